use crate::error::{Error, Result};

/// Counts of actual (rows) versus predicted (columns) classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(classes: Vec<String>, actual: &[usize], predicted: &[usize]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::invalid(format!(
                "{} actual labels but {} predictions",
                actual.len(),
                predicted.len()
            )));
        }
        let k = classes.len();
        let mut counts = vec![vec![0u64; k]; k];
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= k || p >= k {
                return Err(Error::invalid(format!("class index out of range: {a} / {p}")));
            }
            counts[a][p] += 1;
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn overall_accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    pub fn class_accuracy(&self, class: usize) -> f64 {
        let row: u64 = self.counts[class].iter().sum();
        match row {
            0 => 0.0,
            r => self.counts[class][class] as f64 / r as f64,
        }
    }

    /// Row-normalized rates; empty rows stay zero.
    pub fn rates(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let sum: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if sum == 0 { 0.0 } else { c as f64 / sum as f64 })
                    .collect()
            })
            .collect()
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_is_trace_over_total() {
        let cm = ConfusionMatrix::from_predictions(vec!["a".into(), "b".into()], &[0, 0, 1, 1, 1], &[0, 1, 1, 1, 0])
            .unwrap();
        assert_eq!(cm.counts(), &[vec![1, 1], vec![1, 2]]);
        assert_eq!(cm.overall_accuracy(), 3.0 / 5.0);
        assert_eq!(cm.rates()[1], vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(cm.class_accuracy(0), 0.5);
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
