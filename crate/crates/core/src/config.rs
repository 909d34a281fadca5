//! INI-style run configuration. Every section is optional; unknown sections
//! and keys are rejected. Names are case-insensitive.
//!
//! ```ini
//! [scales]
//! sides = 128, 192, 256
//! [pyramid]
//! levels = 1, 2, 4
//! [extractor]
//! seed = 1592642302
//! channels = 1
//! layers = 8/5/2/2, 16/3/1/2, 16/3/1/1   ; filters/size/stride/pool
//! [kernel]
//! kind = linear          ; or gaussian
//! gamma = 0.5            ; gaussian only
//! normalize = on
//! [svm]
//! c = 1
//! tol = 1e-4
//! [mkl]
//! step = 1
//! outer_tol = 1e-4
//! max_outer = 200
//! [experiment]
//! train_counts = 5, 50, 80
//! repetitions = 10
//! seed = 0
//! [paths]
//! cache = cache          ; relative to the config file
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::dataio::LoadSpec;
use crate::error::{Error, Result};
use crate::featmap::{ExtractorSpec, LayerSpec, ScaleSet};
use crate::kernels::KernelSpec;
use crate::pipeline::report::ExperimentPlan;
use crate::pipeline::TrainConfig;
use crate::spp::PyramidSpec;

const SCHEMA: &[(&str, &[&str])] = &[
    ("scales", &["sides"]),
    ("pyramid", &["levels"]),
    ("extractor", &["seed", "channels", "layers"]),
    ("kernel", &["kind", "gamma", "normalize"]),
    ("svm", &["c", "tol"]),
    ("mkl", &["step", "outer_tol", "max_outer"]),
    ("experiment", &["train_counts", "repetitions", "seed"]),
    ("paths", &["cache"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub load: LoadSpec,
    pub train: TrainConfig,
    pub experiment: ExperimentPlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            load: LoadSpec {
                scales: ScaleSet::default(),
                extractor: ExtractorSpec::default(),
                pyramid: PyramidSpec::default(),
                cache_dir: None,
            },
            train: TrainConfig::default(),
            experiment: ExperimentPlan::default(),
        }
    }
}

fn parse_num<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("[{section}] {key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_num(section, key, v)).collect()
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!(
            "[{section}] {key}: expected on/off, got {value:?}"
        ))),
    }
}

fn parse_layers(value: &str) -> Result<Vec<LayerSpec>> {
    value
        .split(',')
        .map(|layer| {
            let parts: Vec<usize> = layer
                .split('/')
                .map(|p| parse_num("extractor", "layers", p))
                .collect::<Result<_>>()?;
            match parts[..] {
                [filters, size, stride, pool] => Ok(LayerSpec::new(filters, size, stride, pool)),
                _ => Err(Error::config(format!(
                    "[extractor] layers: expected filters/size/stride/pool, got {layer:?}"
                ))),
            }
        })
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        let mut gamma = None;
        let mut kind = "linear".to_string();

        for (section, props) in ini.iter() {
            let section = section.map(str::to_ascii_lowercase);
            let Some(section) = section.as_deref() else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(Error::config(format!("key {key:?} appears outside any section")));
                }
                continue;
            };
            let allowed = SCHEMA
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| *keys)
                .ok_or_else(|| Error::config(format!("unknown section [{section}]")))?;
            for (key, value) in props.iter() {
                let key = key.to_ascii_lowercase();
                let key = key.as_str();
                if !allowed.contains(&key) {
                    return Err(Error::config(format!("unknown key {key:?} in [{section}]")));
                }
                match (section, key) {
                    ("scales", "sides") => cfg.load.scales = ScaleSet::new(parse_list(section, key, value)?)?,
                    ("pyramid", "levels") => cfg.load.pyramid = PyramidSpec::new(parse_list(section, key, value)?)?,
                    ("extractor", "seed") => cfg.load.extractor.seed = parse_num(section, key, value)?,
                    ("extractor", "channels") => cfg.load.extractor.input_channels = parse_num(section, key, value)?,
                    ("extractor", "layers") => cfg.load.extractor.layers = parse_layers(value)?,
                    ("kernel", "kind") => kind = value.trim().to_ascii_lowercase(),
                    ("kernel", "gamma") => gamma = Some(parse_num::<f64>(section, key, value)?),
                    ("kernel", "normalize") => cfg.train.normalize = parse_bool(section, key, value)?,
                    ("svm", "c") => cfg.train.c = parse_num(section, key, value)?,
                    ("svm", "tol") => cfg.train.svm.tol = parse_num(section, key, value)?,
                    ("mkl", "step") => cfg.train.mkl.step = parse_num(section, key, value)?,
                    ("mkl", "outer_tol") => cfg.train.mkl.outer_tol = parse_num(section, key, value)?,
                    ("mkl", "max_outer") => cfg.train.mkl.max_outer = parse_num(section, key, value)?,
                    ("experiment", "train_counts") => cfg.experiment.train_counts = parse_list(section, key, value)?,
                    ("experiment", "repetitions") => cfg.experiment.repetitions = parse_num(section, key, value)?,
                    ("experiment", "seed") => cfg.experiment.seed = parse_num(section, key, value)?,
                    ("paths", "cache") => {
                        let p = base.join(value.trim());
                        let parent = p.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
                        if !parent.as_os_str().is_empty() && !parent.is_dir() {
                            return Err(Error::config(format!(
                                "[paths] cache: parent directory {} does not exist",
                                parent.display()
                            )));
                        }
                        cfg.load.cache_dir = Some(p);
                    }
                    _ => unreachable!("schema and match arms agree"),
                }
            }
        }

        cfg.train.kernel = match (kind.as_str(), gamma) {
            ("linear", None) => KernelSpec::Linear,
            ("linear", Some(_)) => return Err(Error::config("[kernel] gamma is only valid for gaussian kernels")),
            ("gaussian", Some(gamma)) => KernelSpec::Gaussian { gamma },
            ("gaussian", None) => return Err(Error::config("[kernel] gaussian kernels need a gamma")),
            (other, _) => return Err(Error::config(format!("[kernel] unknown kind {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.load.validate()?;
        self.train.kernel.validate()?;
        let t = &self.train;
        if !(t.c > 0.0 && t.c.is_finite()) {
            return Err(Error::config(format!("[svm] c must be positive, got {}", t.c)));
        }
        if !(t.svm.tol > 0.0 && t.svm.tol <= 1e-2) {
            return Err(Error::config(format!(
                "[svm] tol must be in (0, 1e-2], got {}",
                t.svm.tol
            )));
        }
        if !(t.mkl.step > 0.0 && t.mkl.outer_tol > 0.0) || t.mkl.max_outer == 0 {
            return Err(Error::config("[mkl] step, outer_tol and max_outer must be positive"));
        }
        let e = &self.experiment;
        if e.train_counts.is_empty() || e.train_counts.contains(&0) {
            return Err(Error::config("[experiment] train_counts must be positive"));
        }
        if e.repetitions == 0 {
            return Err(Error::config("[experiment] repetitions must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config() {
        let text = "\
[scales]
sides = 64, 96
[pyramid]
levels = 1, 2
[extractor]
seed = 9
channels = 3
layers = 4/3/1/2, 8/3/1/1
[kernel]
kind = gaussian
gamma = 0.25
normalize = off
[svm]
c = 10
tol = 1e-5
[mkl]
step = 0.5
outer_tol = 1e-6
max_outer = 50
[experiment]
train_counts = 5, 25
repetitions = 3
seed = 11
";
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(
            RunConfig::parse("[SVM]\nC = 10\n", Path::new(".")).unwrap().train.c,
            10.0
        );
        assert_eq!(cfg.load.scales.sides(), &[64, 96]);
        assert_eq!(cfg.load.extractor.layers[1], LayerSpec::new(8, 3, 1, 1));
        assert_eq!(cfg.load.extractor.input_channels, 3);
        assert_eq!(cfg.train.kernel, KernelSpec::Gaussian { gamma: 0.25 });
        assert!(!cfg.train.normalize);
        assert_eq!(cfg.train.c, 10.0);
        assert_eq!(cfg.train.mkl.max_outer, 50);
        assert_eq!(cfg.experiment.train_counts, vec![5, 25]);
        assert_eq!(cfg.experiment.seed, 11);
    }

    #[test]
    fn empty_config_uses_defaults() {
        assert_eq!(RunConfig::parse("", Path::new(".")).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_and_sections_fail() {
        for text in ["[svm]\nC_value = 2\n", "[solver]\nc = 1\n", "stray = 1\n"] {
            let err = RunConfig::parse(text, Path::new(".")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn pyramid_finer_than_map_names_scale() {
        let text = "[scales]\nsides = 32, 256\n[pyramid]\nlevels = 1, 2, 8\n";
        let err = RunConfig::parse(text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("scale 32"), "{err}");
    }

    #[test]
    fn gaussian_needs_gamma() {
        assert!(RunConfig::parse("[kernel]\nkind = gaussian\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("[kernel]\ngamma = 1\n", Path::new(".")).is_err());
    }
}
