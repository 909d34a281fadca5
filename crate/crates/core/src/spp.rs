//! Spatial pyramid max-pooling.
//!
//! A level `n` splits an `a x a` map into `n x n` windows of side
//! `ceil(a/n)` placed every `floor(a/n)` cells. The last window along each
//! axis is clamped to end at the map edge, so every cell is pooled at every
//! level. Output layout: levels coarse to fine, then channels, then windows
//! row-major.

use crate::error::{Error, Result};
use crate::featmap::FeatureMap;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PyramidSpec(Vec<usize>);

impl PyramidSpec {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::config("pyramid has no levels"));
        }
        if levels[0] == 0 {
            return Err(Error::config("pyramid levels must be positive"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!(
                "pyramid levels must be strictly increasing: {levels:?}"
            )));
        }
        Ok(Self(levels))
    }

    pub fn levels(&self) -> &[usize] {
        &self.0
    }

    pub fn max_level(&self) -> usize {
        *self.0.last().expect("nonempty by construction")
    }

    /// Number of pooled cells per channel, `sum n^2`.
    pub fn bins(&self) -> usize {
        self.0.iter().map(|n| n * n).sum()
    }
}

impl Default for PyramidSpec {
    fn default() -> Self {
        Self(vec![1, 2, 4])
    }
}

/// Fixed-length pooled vector tagged with the side of its source image.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub scale: usize,
    pub values: Vec<f32>,
}

pub fn descriptor_length(channels: usize, spec: &PyramidSpec) -> usize {
    channels * spec.bins()
}

/// `(win, stride) = (ceil(a/n), floor(a/n))`.
pub fn window_geometry(a: usize, n: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::invalid("pyramid level must be positive"));
    }
    if a < n {
        return Err(Error::invalid(format!(
            "pyramid level {n} is finer than the {a}x{a} feature map"
        )));
    }
    Ok((a.div_ceil(n), a / n))
}

/// Half-open index ranges of the `n` windows along one axis.
pub fn window_ranges(a: usize, n: usize) -> Result<Vec<(usize, usize)>> {
    let (win, stride) = window_geometry(a, n)?;
    Ok((0..n)
        .map(|i| {
            let start = i * stride;
            let end = if i + 1 == n { a } else { (start + win).min(a) };
            (start, end)
        })
        .collect())
}

pub fn spp_pool(map: &FeatureMap, spec: &PyramidSpec, scale: usize) -> Result<Descriptor> {
    let a = map.side();
    if a < spec.max_level() {
        return Err(Error::invalid(format!(
            "feature map side {a} is smaller than pyramid level {} (scale {scale})",
            spec.max_level()
        )));
    }
    let mut values = Vec::with_capacity(descriptor_length(map.channels(), spec));
    for &n in spec.levels() {
        let ranges = window_ranges(a, n)?;
        for c in 0..map.channels() {
            let plane = map.channel(c);
            for &(r0, r1) in &ranges {
                for &(c0, c1) in &ranges {
                    let m = (r0..r1)
                        .flat_map(|r| plane[r * a + c0..r * a + c1].iter().copied())
                        .fold(f32::NEG_INFINITY, f32::max);
                    values.push(m);
                }
            }
        }
    }
    Ok(Descriptor { scale, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_examples() {
        assert_eq!(window_geometry(13, 4).unwrap(), (4, 3));
        assert_eq!(window_geometry(6, 6).unwrap(), (1, 1));
        assert_eq!(window_geometry(5, 4).unwrap(), (2, 1));
        assert_eq!(window_ranges(5, 4).unwrap(), vec![(0, 2), (1, 3), (2, 4), (3, 5)]);
        assert!(window_geometry(3, 4).is_err());
    }

    #[test]
    fn last_window_reaches_edge() {
        // 7 = 4*1 + 3: unclamped windows would stop at cell 5
        assert_eq!(window_ranges(7, 4).unwrap().last(), Some(&(3, 7)));
    }

    #[test]
    fn pool_quadrants() {
        let map = FeatureMap::new(1, 4, (1..=16).map(|v| v as f32).collect()).unwrap();
        let d = spp_pool(&map, &PyramidSpec::new(vec![2]).unwrap(), 4).unwrap();
        assert_eq!(d.values, vec![6.0, 8.0, 14.0, 16.0]);
        let d = spp_pool(&map, &PyramidSpec::new(vec![1]).unwrap(), 4).unwrap();
        assert_eq!(d.values, vec![16.0]);
    }

    #[test]
    fn pool_constant_map() {
        let map = FeatureMap::new(2, 8, vec![7.0; 128]).unwrap();
        let d = spp_pool(&map, &PyramidSpec::default(), 8).unwrap();
        assert_eq!(d.values.len(), 42);
        assert!(d.values.iter().all(|&v| v == 7.0));
    }

    #[test]
    fn lengths() {
        assert_eq!(descriptor_length(256, &PyramidSpec::default()), 5376);
        assert_eq!(descriptor_length(1, &PyramidSpec::new(vec![1]).unwrap()), 1);
        assert_eq!(descriptor_length(3, &PyramidSpec::new(vec![1, 2]).unwrap()), 15);
    }

    #[test]
    fn map_smaller_than_level_is_rejected() {
        let map = FeatureMap::new(1, 3, vec![0.0; 9]).unwrap();
        assert!(matches!(
            spp_pool(&map, &PyramidSpec::default(), 3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pyramid_validation() {
        assert!(PyramidSpec::new(vec![]).is_err());
        assert!(PyramidSpec::new(vec![0, 1]).is_err());
        assert!(PyramidSpec::new(vec![2, 1]).is_err());
    }
}
