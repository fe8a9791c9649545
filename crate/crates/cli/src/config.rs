//! Training run configuration: a flat `key = value` file (with `#`
//! comments) overlaid by command-line settings.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use eqcontour::data::DatasetRecord;
use eqcontour::model::{
    build_autoencoder, build_classifier, build_regressor, AutoencoderConfig, ClassifierConfig, InputScale, Model,
    RegressorConfig, TaskKind, TrainConfig,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

const COMMON_KEYS: &[&str] = &[
    "lr",
    "batch_size",
    "epochs",
    "val_fraction",
    "widths",
    "kernel_size",
    "activation",
    "input_scale",
];
const CLASSIFY_KEYS: &[&str] = &["classes", "coarsen_factor", "coarsen_mode", "aggregator", "hidden"];
const AUTOENCODE_KEYS: &[&str] = &["latent_factor", "latent_channels", "coarsen_mode", "aggregator"];

/// Raw `key = value` settings; a later assignment to a key wins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            s.set_pair(line).with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies one `key=value` pair, replacing any earlier value.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected 'key = value', got '{pair}'"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            bail!("expected 'key = value', got '{pair}'");
        }
        self.0.insert(k.to_string(), v.to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    fn check_keys(&self, task: TaskKind) -> Result<()> {
        let extra = match task {
            TaskKind::Classify => CLASSIFY_KEYS,
            TaskKind::Regress => &[],
            TaskKind::Autoencode => AUTOENCODE_KEYS,
        };
        for k in self.0.keys() {
            if !COMMON_KEYS.contains(&k.as_str()) && !extra.contains(&k.as_str()) {
                bail!("unknown config key '{k}' for task '{}'", task.name());
            }
        }
        Ok(())
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key '{key}': {e}")))
            .transpose()
    }

    // Enum values use their snake_case names, e.g. `mod_relu`.
    fn named<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.0
            .get(key)
            .map(|v| {
                serde_json::from_value(serde_json::Value::String(v.clone()))
                    .map_err(|_| anyhow!("config key '{key}': unknown value '{v}'"))
            })
            .transpose()
    }

    fn widths(&self) -> Result<Option<Vec<usize>>> {
        self.0
            .get("widths")
            .map(|v| {
                v.split(',')
                    .map(|w| w.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| anyhow!("config key 'widths': {e}"))
            })
            .transpose()
    }

    fn hidden(&self) -> Result<Option<Option<usize>>> {
        match self.0.get("hidden").map(String::as_str) {
            None => Ok(None),
            Some("none") => Ok(Some(None)),
            Some(_) => Ok(Some(self.num("hidden")?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum Architecture {
    Classifier { classes: usize, config: ClassifierConfig },
    Regressor { config: RegressorConfig },
    Autoencoder { latent_factor: usize, config: AutoencoderConfig },
}

/// Everything a training run uses, after defaults, file and flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub train: TrainConfig,
    pub input_scale: InputScale,
    pub n: usize,
    pub k: usize,
    pub architecture: Architecture,
}

impl ResolvedRun {
    pub fn resolve(task: TaskKind, seed: u64, settings: &Settings, data: &[DatasetRecord]) -> Result<Self> {
        settings.check_keys(task)?;
        let first = data.first().ok_or_else(|| anyhow!("training data is empty"))?;
        let (n, k) = (first.contour.n(), first.contour.k());
        if let Some(r) = data.iter().find(|r| r.contour.n() != n || r.contour.k() != k) {
            bail!(
                "record '{}' has shape {}x{}, expected {k}x{n} like the first record",
                r.id,
                r.contour.k(),
                r.contour.n()
            );
        }

        let mut train = TrainConfig::for_task(task);
        train.seed = seed;
        if let Some(v) = settings.num("lr")? {
            train.lr = v;
        }
        if let Some(v) = settings.num("batch_size")? {
            train.batch_size = v;
        }
        if let Some(v) = settings.num("epochs")? {
            train.epochs = v;
        }
        if let Some(v) = settings.num("val_fraction")? {
            train.val_fraction = v;
        }
        train.validate()?;
        let input_scale = settings.named("input_scale")?.unwrap_or(task.default_scale());

        let architecture = match task {
            TaskKind::Classify => {
                let mut c = ClassifierConfig::default();
                override_common(settings, &mut c.widths, &mut c.kernel_size, &mut c.activation)?;
                if let Some(v) = settings.num("coarsen_factor")? {
                    c.coarsen_factor = v;
                }
                if let Some(v) = settings.named("coarsen_mode")? {
                    c.coarsen_mode = v;
                }
                if let Some(v) = settings.named("aggregator")? {
                    c.aggregator = v;
                }
                if let Some(v) = settings.hidden()? {
                    c.hidden = v;
                }
                c.aux_features = aux_features(data)?;
                let max_label = data
                    .iter()
                    .map(|r| r.label.ok_or_else(|| anyhow!("record '{}' has no label", r.id)))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .max()
                    .unwrap_or(0);
                let classes = settings.num("classes")?.unwrap_or((max_label + 1).max(2));
                Architecture::Classifier { classes, config: c }
            }
            TaskKind::Regress => {
                let mut c = RegressorConfig::default();
                override_common(settings, &mut c.widths, &mut c.kernel_size, &mut c.activation)?;
                Architecture::Regressor { config: c }
            }
            TaskKind::Autoencode => {
                let mut c = AutoencoderConfig::default();
                override_common(settings, &mut c.widths, &mut c.kernel_size, &mut c.activation)?;
                if let Some(v) = settings.num("latent_channels")? {
                    c.latent_channels = v;
                }
                if let Some(v) = settings.named("coarsen_mode")? {
                    c.coarsen_mode = v;
                }
                if let Some(v) = settings.named("aggregator")? {
                    c.aggregator = v;
                }
                let latent_factor = settings.num("latent_factor")?.unwrap_or(2);
                Architecture::Autoencoder { latent_factor, config: c }
            }
        };
        Ok(ResolvedRun {
            train,
            input_scale,
            n,
            k,
            architecture,
        })
    }

    /// The untrained model, initialized from the run seed.
    pub fn build(&self) -> Result<Model> {
        let mut model = match &self.architecture {
            Architecture::Classifier { classes, config } => build_classifier(self.n, self.k, *classes, config)?,
            Architecture::Regressor { config } => build_regressor(self.n, self.k, config)?,
            Architecture::Autoencoder { latent_factor, config } => {
                build_autoencoder(self.n, self.k, *latent_factor, config)?
            }
        };
        model.set_input_scale(self.input_scale);
        model.init_random(self.train.seed);
        Ok(model)
    }
}

fn override_common(
    settings: &Settings,
    widths: &mut Vec<usize>,
    kernel_size: &mut usize,
    activation: &mut eqcontour::layers::ActivationKind,
) -> Result<()> {
    if let Some(v) = settings.widths()? {
        *widths = v;
    }
    if let Some(v) = settings.num("kernel_size")? {
        *kernel_size = v;
    }
    if let Some(v) = settings.named("activation")? {
        *activation = v;
    }
    Ok(())
}

// Auxiliary features are used when every record carries the same number.
fn aux_features(data: &[DatasetRecord]) -> Result<usize> {
    let len = data[0].features.as_ref().map_or(0, Vec::len);
    for r in data {
        if r.features.as_ref().map_or(0, Vec::len) != len {
            bail!("record '{}' disagrees with the first record on auxiliary features", r.id);
        }
    }
    Ok(len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use eqcontour::data::generate_curvature_dataset_with;
    use eqcontour::data::CurvatureConfig;

    fn data() -> Vec<DatasetRecord> {
        let cfg = CurvatureConfig {
            points: 16,
            grid: 200,
            ..Default::default()
        };
        generate_curvature_dataset_with(3, 0, &cfg).unwrap().records
    }

    #[test]
    fn parses_comments_and_overrides() {
        let mut s = Settings::parse("# run\nlr = 0.01  # fast\n\nwidths = 4, 8\n").unwrap();
        s.set_pair("lr=0.02").unwrap();
        let r = ResolvedRun::resolve(TaskKind::Classify, 5, &s, &data()).unwrap();
        assert_eq!(r.train.lr, 0.02);
        assert_eq!(r.train.seed, 5);
        match r.architecture {
            Architecture::Classifier { classes, config } => {
                assert_eq!(config.widths, vec![4, 8]);
                let labels = data().iter().map(|r| r.label.unwrap() + 1).max().unwrap();
                assert_eq!(classes, labels.max(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        let d = data();
        for text in ["colour = red", "hidden = 3", "lr 0.1"] {
            let res = Settings::parse(text).and_then(|s| ResolvedRun::resolve(TaskKind::Regress, 0, &s, &d));
            assert!(res.is_err(), "{text}");
        }
    }

    #[test]
    fn enum_values_use_snake_case() {
        let s = Settings::parse("activation = amplitude_phase\ninput_scale = spread").unwrap();
        let r = ResolvedRun::resolve(TaskKind::Regress, 0, &s, &data()).unwrap();
        assert_eq!(r.input_scale, InputScale::Spread);
        let s = Settings::parse("activation = relu").unwrap();
        assert!(ResolvedRun::resolve(TaskKind::Regress, 0, &s, &data()).is_err());
    }
}
