//! TOML run configuration.
//!
//! A single flat `[run]` table. `epoch_len`, `batch`, `step` and `workers`
//! accept the string `"auto"`. Auto `batch` is `q`, capped by the smallest
//! range a worker samples from.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vrsim_core::config::{auto_epoch_len, auto_step};
use vrsim_core::data::{shard, synthesize, SynthKind};
use vrsim_core::objective::Constants;
use vrsim_core::{Algorithm, Architecture, Dataset, DelayMode, Init, ObjectiveModel, RunConfig, Sampling, SymMatrix};

use crate::dataset::load_csv;
use crate::error::{CliError, Result};

/// A number or the keyword `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Auto<T> {
    Value(T),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

impl<T> Default for Auto<T> {
    fn default() -> Self {
        Auto::Keyword(AutoKeyword::Auto)
    }
}

impl<T: Copy> Auto<T> {
    pub fn or(self, auto: T) -> T {
        match self {
            Auto::Value(v) => v,
            Auto::Keyword(_) => auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_arch")]
    pub arch: String,
    #[serde(default = "default_algo")]
    pub algo: String,
    #[serde(default = "default_model")]
    pub model: String,
    /// CSV path, relative to the config file. Absent means synthetic data.
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default, alias = "N")]
    pub n: Option<usize>,
    #[serde(default, alias = "d")]
    pub dim: Option<usize>,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub symmetric: bool,
    /// Diagonal of the quadratic curvature. Overrides the spread below.
    #[serde(default)]
    pub curvature: Option<Vec<f64>>,
    #[serde(default = "default_curv_min")]
    pub curvature_min: f64,
    #[serde(default = "default_curv_max")]
    pub curvature_max: f64,
    #[serde(default)]
    pub reg: f64,
    /// `"auto"` is `Δ + 1`.
    #[serde(default, alias = "P", alias = "T")]
    pub workers: Auto<usize>,
    #[serde(default, alias = "delta")]
    pub max_delay: usize,
    #[serde(default, alias = "q")]
    pub epoch_len: Auto<usize>,
    #[serde(default)]
    pub batch: Auto<usize>,
    #[serde(default, alias = "eta")]
    pub step: Auto<f64>,
    #[serde(default = "default_iterations", alias = "K")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delay_mode")]
    pub delay_mode: String,
    #[serde(default = "default_auto")]
    pub sampling: String,
    #[serde(default = "default_init")]
    pub init: String,
    #[serde(default = "default_init_std")]
    pub init_std: f64,
    #[serde(default)]
    pub full_step_on_sync: bool,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Gradient-descent iterations used to estimate `f*` for non-quadratic
    /// models.
    #[serde(default = "default_reference_iters")]
    pub reference_iters: usize,
}

fn default_arch() -> String {
    "dm".into()
}
fn default_algo() -> String {
    "synthesis".into()
}
fn default_model() -> String {
    "quadratic".into()
}
fn default_classes() -> usize {
    2
}
fn default_curv_min() -> f64 {
    0.1
}
fn default_curv_max() -> f64 {
    1.0
}
fn default_iterations() -> usize {
    1000
}
fn default_delay_mode() -> String {
    "direct".into()
}
fn default_auto() -> String {
    "auto".into()
}
fn default_init() -> String {
    "zeros".into()
}
fn default_init_std() -> f64 {
    0.01
}
fn default_grid_points() -> usize {
    500
}
fn default_reference_iters() -> usize {
    2000
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }
}

/// Everything needed to launch a run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub section: RunSection,
    pub arch: Architecture,
    pub algo: Algorithm,
    pub model: ObjectiveModel,
    pub data: Dataset,
    pub cfg: RunConfig,
    pub constants: Constants,
}

fn field(name: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("run.{name}: {reason}"))
}

/// Quadratic curvature diagonal: explicit list, or `dim` values spread
/// geometrically over `[curvature_min, curvature_max]`.
pub fn curvature_diag(s: &RunSection, dim: usize) -> Result<Vec<f64>> {
    if let Some(c) = &s.curvature {
        if c.len() != dim {
            return Err(field("curvature", format!("has {} entries, expected d = {dim}", c.len())));
        }
        return Ok(c.clone());
    }
    let (lo, hi) = (s.curvature_min, s.curvature_max);
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(field("curvature_min", "need 0 < curvature_min <= curvature_max"));
    }
    Ok((0..dim)
        .map(|i| {
            let t = if dim == 1 { 1.0 } else { i as f64 / (dim - 1) as f64 };
            lo * (hi / lo).powf(t)
        })
        .collect())
}

/// Size of the smallest index range a worker samples from.
fn sampling_range(cfg: &RunConfig, algo: Algorithm, arch: Architecture, n: usize) -> usize {
    match cfg.sampling_for(algo, arch) {
        Sampling::Global => n,
        Sampling::Shard => shard(n, cfg.workers)
            .map(|s| s.ranges().iter().map(|r| r.len()).min().unwrap_or(n))
            .unwrap_or(n),
    }
}

impl RunSection {
    /// Resolves the section into a runnable experiment. Relative data paths
    /// are taken from `base`.
    pub fn resolve(&self, base: &Path) -> Result<Experiment> {
        let arch = Architecture::parse(&self.arch).ok_or_else(|| field("arch", format!("`{}` is not dm or sm", self.arch)))?;
        let algo = Algorithm::parse(&self.algo)
            .ok_or_else(|| field("algo", format!("`{}` is not synthesis, async-sgd or async-svrg", self.algo)))?;
        let data = self.load_data(base)?;
        let d_in = data.feature_dim();
        let model = match self.model.as_str() {
            "quadratic" => {
                if self.data.is_some() {
                    return Err(field("model", "quadratic models need synthetic centers"));
                }
                ObjectiveModel::quadratic(SymMatrix::diag(&curvature_diag(self, d_in)?))?
            }
            "logistic" => ObjectiveModel::logistic(d_in, self.reg)?,
            "mlp" => ObjectiveModel::mlp(d_in, self.classes)?,
            other => return Err(field("model", format!("`{other}` is not quadratic, logistic or mlp"))),
        };
        let constants = model.lipschitz_estimate(data.samples(), None)?;
        let n = data.len();
        let delay_mode = match self.delay_mode.as_str() {
            "direct" => DelayMode::Direct,
            "service-time" | "service_time" => DelayMode::ServiceTime,
            other => return Err(field("delay_mode", format!("`{other}` is not direct or service-time"))),
        };
        let sampling = match self.sampling.as_str() {
            "auto" => None,
            "shard" => Some(Sampling::Shard),
            "global" => Some(Sampling::Global),
            other => return Err(field("sampling", format!("`{other}` is not auto, shard or global"))),
        };
        let init = match self.init.as_str() {
            "zeros" => Init::Zeros,
            "gaussian" => Init::Gaussian { std: self.init_std },
            other => return Err(field("init", format!("`{other}` is not zeros or gaussian"))),
        };
        let q = self.epoch_len.or(auto_epoch_len(n));
        let workers = self.workers.or(self.max_delay + 1);
        let mut cfg = RunConfig {
            workers,
            max_delay: self.max_delay,
            epoch_len: q,
            batch: 1,
            step: self.step.or(auto_step(arch, constants.smoothness, self.max_delay)),
            iterations: self.iterations,
            seed: self.seed,
            delay_mode,
            sampling,
            init,
            full_step_on_sync: self.full_step_on_sync,
            grid_points: self.grid_points,
        };
        cfg.batch = match self.batch {
            Auto::Value(b) => b,
            Auto::Keyword(_) => q.min(sampling_range(&cfg, algo, arch, n)),
        };
        for (name, v) in [("workers", cfg.workers), ("epoch_len", cfg.epoch_len), ("batch", cfg.batch), ("iterations", cfg.iterations), ("grid_points", cfg.grid_points)] {
            if v == 0 {
                return Err(field(name, "must be at least 1"));
            }
        }
        if !(cfg.step > 0.0 && cfg.step.is_finite()) {
            return Err(field("step", "must be finite and positive"));
        }
        if cfg.workers > n {
            return Err(field("workers", format!("{} workers exceed N = {n}", cfg.workers)));
        }
        Ok(Experiment {
            section: self.clone(),
            arch,
            algo,
            model,
            data,
            cfg,
            constants,
        })
    }

    fn load_data(&self, base: &Path) -> Result<Dataset> {
        if let Some(p) = &self.data {
            let path = resolve_path(base, p);
            return load_csv(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())));
        }
        let n = self.n.ok_or_else(|| field("n", "required for synthetic data"))?;
        let d = self.dim.ok_or_else(|| field("dim", "required for synthetic data"))?;
        let kind = match self.model.as_str() {
            "quadratic" => SynthKind::Quadratic { symmetric: self.symmetric },
            "logistic" => SynthKind::Logistic,
            "mlp" => SynthKind::Classification { classes: self.classes },
            other => return Err(field("model", format!("`{other}` is not quadratic, logistic or mlp"))),
        };
        Ok(synthesize(kind, n, d, self.data_seed)?)
    }

    /// Hex SHA-256 of the section with the seed cleared, so runs that differ
    /// only in seed share a hash.
    pub fn hash(&self) -> String {
        let mut s = self.clone();
        s.seed = 0;
        hex_digest(serde_json::to_string(&s).expect("section serializes").as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn resolve_path(base: &Path, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[run]
arch = "dm"
model = "quadratic"
n = 100
d = 4
delta = 2
q = "auto"
batch = "auto"
eta = "auto"
K = 200
"#;

    #[test]
    fn auto_rules() {
        let c = ConfigFile::parse(SMALL).unwrap();
        let e = c.run.resolve(Path::new(".")).unwrap();
        assert_eq!(e.cfg.epoch_len, 10);
        assert_eq!(e.cfg.batch, 10);
        assert_eq!(e.cfg.workers, 3);
        assert!((e.cfg.step - 1.0 / (4.0 * 1.0 * 3.0)).abs() < 1e-15);
    }

    #[test]
    fn explicit_values() {
        let text = SMALL.replace("eta = \"auto\"", "eta = 0.05").replace("q = \"auto\"", "q = 7");
        let e = ConfigFile::parse(&text).unwrap().run.resolve(Path::new(".")).unwrap();
        assert_eq!(e.cfg.step, 0.05);
        assert_eq!(e.cfg.epoch_len, 7);
        assert_eq!(e.cfg.batch, 7);
    }

    #[test]
    fn auto_batch_fits_the_smallest_shard() {
        // 100 samples over 17 shards leaves at most 5 per shard.
        let text = SMALL.replace("delta = 2", "delta = 16");
        let e = ConfigFile::parse(&text).unwrap().run.resolve(Path::new(".")).unwrap();
        assert_eq!(e.cfg.workers, 17);
        assert_eq!(e.cfg.batch, 5);
        let svrg = text.replace("arch = \"dm\"", "arch = \"dm\"\nalgo = \"async-svrg\"");
        let e = ConfigFile::parse(&svrg).unwrap().run.resolve(Path::new(".")).unwrap();
        assert_eq!(e.cfg.batch, 10);
    }

    #[test]
    fn field_errors_name_the_field() {
        let text = SMALL.replace("arch = \"dm\"", "arch = \"gpu\"");
        let err = ConfigFile::parse(&text).unwrap().run.resolve(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("run.arch"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = ConfigFile::parse(&SMALL.replace("K = 200", "K = \"lots\"")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = ConfigFile::parse(&format!("{SMALL}\nbogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn hash_ignores_seed() {
        let a = ConfigFile::parse(SMALL).unwrap().run;
        let mut b = a.clone();
        b.seed = 99;
        assert_eq!(a.hash(), b.hash());
        b.max_delay = 3;
        assert_ne!(a.hash(), b.hash());
    }
}
