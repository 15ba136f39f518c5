//! Monte Carlo estimation of error probabilities.
//!
//! Trial `i` of algorithm `A` at budget `t` runs on a fresh oracle seeded
//! with `mix_seed([master_seed, A.ordinal(), t, i])`. With pairing on, the
//! ordinal is replaced by a fixed tag so every algorithm sees the same
//! seed at equal `(t, i)`. Counts are summed, so results do not depend on
//! the number of worker threads.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{self, AlgorithmError, AlgorithmId, KnowledgeMode};
use crate::instance::{Instance, InstanceError, InstanceFile};
use crate::oracle::Oracle;
use crate::rng::mix_seed;

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.96;

/// Seed tag used in place of the algorithm ordinal when pairing.
const PAIRED_TAG: u64 = u64::MAX;

pub const DEFAULT_TRIALS: u64 = 2000;

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub algorithm: AlgorithmId,
    pub budget: u64,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ErrorEstimate {
    pub fn from_counts(algorithm: AlgorithmId, budget: u64, trials: u64, errors: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials, Z95);
        ErrorEstimate {
            algorithm,
            budget,
            trials,
            errors,
            p_hat: errors as f64 / trials as f64,
            ci_low,
            ci_high,
        }
    }

    /// `ln p_hat`, or `None` when no error was observed.
    pub fn log_p_hat(&self) -> Option<f64> {
        (self.errors > 0).then(|| self.p_hat.ln())
    }
}

/// Wilson score interval for `successes` out of `n`, clipped to `[0, 1]`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0, "empty sample");
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let high = if successes == n {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    (low, high)
}

pub fn trial_seed(
    master_seed: u64,
    algorithm: AlgorithmId,
    t: u64,
    trial: u64,
    paired: bool,
) -> u64 {
    let tag = if paired {
        PAIRED_TAG
    } else {
        algorithm.ordinal()
    };
    mix_seed(&[master_seed, tag, t, trial])
}

/// Checks applicability and returns the box sizes to hand the algorithm.
fn prepare(
    d: &Instance,
    algorithm: AlgorithmId,
    knowledge: KnowledgeMode,
) -> Result<Option<Vec<u64>>, AlgorithmError> {
    algorithm.check(d.classify_setting(), knowledge)?;
    Ok(knowledge.box_sizes_known.then(|| d.box_sizes()))
}

fn trial_errs(
    d: &Instance,
    modes: &[usize],
    algorithm: AlgorithmId,
    sizes: Option<&[u64]>,
    t: u64,
    seed: u64,
) -> Result<bool, AlgorithmError> {
    let mut oracle = Oracle::new(d, seed, algorithm.identity_mode());
    let result = algorithms::run(algorithm, &mut oracle, t, sizes)?;
    Ok(!modes.contains(&result.estimate))
}

/// One independent run; `true` when the estimate is not a mode.
pub fn run_trial(
    d: &Instance,
    algorithm: AlgorithmId,
    knowledge: KnowledgeMode,
    t: u64,
    seed: u64,
) -> Result<bool, AlgorithmError> {
    let sizes = prepare(d, algorithm, knowledge)?;
    let modes = d.summarize().mode_set;
    trial_errs(d, &modes, algorithm, sizes.as_deref(), t, seed)
}

fn count_errors(
    d: &Instance,
    algorithm: AlgorithmId,
    knowledge: KnowledgeMode,
    t: u64,
    trials: u64,
    seed_of: impl Fn(u64) -> u64 + Sync,
) -> Result<u64, AlgorithmError> {
    let sizes = prepare(d, algorithm, knowledge)?;
    let modes = d.summarize().mode_set;
    (0..trials)
        .into_par_iter()
        .map(|i| trial_errs(d, &modes, algorithm, sizes.as_deref(), t, seed_of(i)).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Error rate of `algorithm` at budget `t` over `trials` unpaired trials.
pub fn estimate_error(
    d: &Instance,
    algorithm: AlgorithmId,
    knowledge: KnowledgeMode,
    t: u64,
    trials: u64,
    master_seed: u64,
) -> Result<ErrorEstimate, MonteCarloError> {
    estimate_error_seeded(d, algorithm, knowledge, t, trials, master_seed, false)
}

fn estimate_error_seeded(
    d: &Instance,
    algorithm: AlgorithmId,
    knowledge: KnowledgeMode,
    t: u64,
    trials: u64,
    master_seed: u64,
    paired: bool,
) -> Result<ErrorEstimate, MonteCarloError> {
    if trials == 0 {
        return Err(MonteCarloError::Config("trials must be at least 1".into()));
    }
    let errors = count_errors(d, algorithm, knowledge, t, trials, |i| {
        trial_seed(master_seed, algorithm, t, i, paired)
    })?;
    Ok(ErrorEstimate::from_counts(algorithm, t, trials, errors))
}

// ---------------------------------------------------------------------------
// experiment configs

/// Where the instance comes from: a file path (relative paths resolve
/// against the config file's directory), a bare count matrix, or a full
/// instance document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    Path(PathBuf),
    Matrix(Vec<Vec<i64>>),
    Inline(InstanceFile),
}

impl InstanceSource {
    pub fn load(&self, base_dir: Option<&Path>) -> Result<Instance, InstanceError> {
        match self {
            InstanceSource::Path(p) => match base_dir {
                Some(dir) if p.is_relative() => Instance::read(dir.join(p)),
                _ => Instance::read(p),
            },
            InstanceSource::Matrix(m) => Instance::from_counts(m.clone()),
            InstanceSource::Inline(f) => Instance::from_file(f.clone()),
        }
    }
}

/// `"DSM"` or `{"id": "DS_SR_BOX", "box_sizes_known": true}`. Without an
/// explicit flag, box sizes are known exactly when the algorithm needs them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmSpec {
    Name(AlgorithmId),
    Full {
        id: AlgorithmId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_sizes_known: Option<bool>,
    },
}

impl AlgorithmSpec {
    pub fn id(&self) -> AlgorithmId {
        match *self {
            AlgorithmSpec::Name(id) | AlgorithmSpec::Full { id, .. } => id,
        }
    }

    pub fn knowledge(&self) -> KnowledgeMode {
        let known = match *self {
            AlgorithmSpec::Full {
                box_sizes_known: Some(k),
                ..
            } => k,
            _ => self.id().requires_box_sizes(),
        };
        KnowledgeMode {
            box_sizes_known: known,
        }
    }
}

impl From<AlgorithmId> for AlgorithmSpec {
    fn from(id: AlgorithmId) -> Self {
        AlgorithmSpec::Name(id)
    }
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithms: Vec<AlgorithmSpec>,
    pub budgets: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub pairing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, MonteCarloError> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; a relative instance path is taken relative to
    /// the config's directory. Returns the config and its loaded instance.
    pub fn read(path: impl AsRef<Path>) -> Result<(Self, Instance), MonteCarloError> {
        let path = path.as_ref();
        let config = Self::from_json(&std::fs::read_to_string(path)?)?;
        let instance = config.instance.load(path.parent())?;
        Ok((config, instance))
    }

    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.trials == 0 {
            return Err(MonteCarloError::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(MonteCarloError::Config("no algorithms listed".into()));
        }
        if self.budgets.is_empty() {
            return Err(MonteCarloError::Config("no budgets listed".into()));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MonteCarloError::Config(
                "budgets must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Every (algorithm, budget) pair of `config`, algorithms outermost, run
/// on the global rayon pool.
pub fn sweep(
    config: &ExperimentConfig,
    d: &Instance,
) -> Result<Vec<ErrorEstimate>, MonteCarloError> {
    config.validate()?;
    // fail on applicability before spending any time
    for spec in &config.algorithms {
        prepare(d, spec.id(), spec.knowledge())?;
    }
    let mut out = Vec::with_capacity(config.algorithms.len() * config.budgets.len());
    for spec in &config.algorithms {
        for &t in &config.budgets {
            out.push(estimate_error_seeded(
                d,
                spec.id(),
                spec.knowledge(),
                t,
                config.trials,
                config.master_seed,
                config.pairing,
            )?);
        }
    }
    Ok(out)
}

/// [`sweep`] on a dedicated pool of `threads` workers (`None` for the
/// rayon default).
pub fn sweep_with_threads(
    config: &ExperimentConfig,
    d: &Instance,
    threads: Option<usize>,
) -> Result<Vec<ErrorEstimate>, MonteCarloError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    builder.build()?.install(|| sweep(config, d))
}

/// Writes `algorithm,t,trials,errors,p_hat,ci_low,ci_high,log_p_hat`.
pub fn write_results_csv<W: Write>(
    estimates: &[ErrorEstimate],
    out: W,
) -> Result<(), MonteCarloError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "algorithm",
        "t",
        "trials",
        "errors",
        "p_hat",
        "ci_low",
        "ci_high",
        "log_p_hat",
    ])?;
    for e in estimates {
        w.write_record([
            e.algorithm.name().to_string(),
            e.budget.to_string(),
            e.trials.to_string(),
            e.errors.to_string(),
            e.p_hat.to_string(),
            e.ci_low.to_string(),
            e.ci_high.to_string(),
            e.log_p_hat().map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RunMetadata<'a> {
    pub config: &'a ExperimentConfig,
    pub master_seed: u64,
    pub threads: Option<usize>,
    pub wall_time_seconds: f64,
    pub library_version: &'static str,
}

/// Runs `config`, writing `{prefix}.csv` and `{prefix}.json` (metadata).
pub fn run_experiment(
    config: &ExperimentConfig,
    d: &Instance,
    prefix: &Path,
    threads: Option<usize>,
) -> Result<Vec<ErrorEstimate>, MonteCarloError> {
    let started = Instant::now();
    let estimates = sweep_with_threads(config, d, threads)?;
    let elapsed = started.elapsed().as_secs_f64();

    let csv_file = std::fs::File::create(with_suffix(prefix, "csv"))?;
    write_results_csv(&estimates, std::io::BufWriter::new(csv_file))?;

    let meta = RunMetadata {
        config,
        master_seed: config.master_seed,
        threads,
        wall_time_seconds: elapsed,
        library_version: env!("CARGO_PKG_VERSION"),
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    std::fs::write(with_suffix(prefix, "json"), text)?;
    Ok(estimates)
}

/// `prefix` with `.ext` appended (not replacing any existing extension).
pub fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert_relative_eq!(hi, Z95 * Z95 / (100.0 + Z95 * Z95), max_relative = 1e-12);
        assert!((hi - 0.0370).abs() < 1e-4);
        let (lo, hi) = wilson_interval(100, 100, Z95);
        assert_eq!(hi, 1.0);
        assert_relative_eq!(lo, 100.0 / (100.0 + Z95 * Z95), max_relative = 1e-12);
        let (lo, hi) = wilson_interval(37, 120, Z95);
        assert!(lo < 37.0 / 120.0 && 37.0 / 120.0 < hi);
    }

    #[test]
    fn zero_budget_is_pure_guess() {
        let d = Instance::mixed(&[5, 3, 1, 1]).unwrap();
        let e = estimate_error(&d, AlgorithmId::Dsm, KnowledgeMode::BLIND, 0, 20_000, 3).unwrap();
        assert!(e.ci_low <= 0.75 && 0.75 <= e.ci_high, "{e:?}");
    }

    #[test]
    fn ties_count_as_correct() {
        // both communities are modes: never an error
        let d = Instance::mixed(&[2, 2]).unwrap();
        let e = estimate_error(&d, AlgorithmId::Sfm, KnowledgeMode::BLIND, 3, 500, 1).unwrap();
        assert_eq!(e.errors, 0);
        assert_eq!(e.log_p_hat(), None);
    }

    #[test]
    fn applicability_is_checked() {
        let d = Instance::separated(&[2, 1]).unwrap();
        assert!(matches!(
            run_trial(&d, AlgorithmId::Sfm, KnowledgeMode::BLIND, 3, 0),
            Err(AlgorithmError::NotApplicable { .. })
        ));
        assert!(matches!(
            run_trial(&d, AlgorithmId::NdsSr, KnowledgeMode::BLIND, 3, 0),
            Err(AlgorithmError::BoxSizesRequired(_))
        ));
        assert!(matches!(
            estimate_error(&d, AlgorithmId::CcSr, KnowledgeMode::BLIND, 3, 10, 0),
            Err(MonteCarloError::Algorithm(
                AlgorithmError::BudgetTooSmall { .. }
            ))
        ));
    }

    #[test]
    fn seeds_differ_unless_paired() {
        let a = trial_seed(1, AlgorithmId::Dsm, 10, 0, false);
        let b = trial_seed(1, AlgorithmId::Sfm, 10, 0, false);
        assert_ne!(a, b);
        assert_ne!(a, trial_seed(1, AlgorithmId::Dsm, 11, 0, false));
        assert_ne!(a, trial_seed(1, AlgorithmId::Dsm, 10, 1, false));
        assert_eq!(
            trial_seed(1, AlgorithmId::Dsm, 10, 0, true),
            trial_seed(1, AlgorithmId::Sfm, 10, 0, true)
        );
    }

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn config_parsing() {
        let c = config(
            r#"{"instance": [[3, 2, 1]], "algorithms": ["DSM", {"id": "DS_UE"},
                {"id": "NDS_UE", "box_sizes_known": true}], "budgets": [1, 5], "master_seed": 9}"#,
        );
        assert_eq!(c.trials, DEFAULT_TRIALS);
        assert!(!c.pairing);
        assert_eq!(c.algorithms[1].knowledge(), KnowledgeMode::BLIND);
        assert_eq!(c.algorithms[2].knowledge(), KnowledgeMode::SIZES);
        assert_eq!(
            AlgorithmSpec::Name(AlgorithmId::EndsSr).knowledge(),
            KnowledgeMode::SIZES
        );
        let d = c.instance.load(None).unwrap();
        assert_eq!(d.community_sizes(), vec![3, 2, 1]);

        let inline = config(
            r#"{"instance": {"boxes": ["x"], "communities": ["a", "b"], "counts": [[1, 2]]},
                "algorithms": ["SFM"], "budgets": [3], "trials": 5, "master_seed": 1, "pairing": true}"#,
        );
        assert_eq!(
            inline.instance.load(None).unwrap().community_labels(),
            ["a", "b"]
        );

        for bad in [
            r#"{"instance": [[1]], "algorithms": ["DSM"], "budgets": [3, 3], "master_seed": 1}"#,
            r#"{"instance": [[1]], "algorithms": ["DSM"], "budgets": [3], "trials": 0, "master_seed": 1}"#,
            r#"{"instance": [[1]], "algorithms": ["XX"], "budgets": [3], "master_seed": 1}"#,
            r#"{"instance": [[1]], "algorithms": ["DSM"], "budgets": [3]}"#,
            r#"{"instance": [[1]], "algorithms": ["DSM"], "budgets": [3], "master_seed": 1, "extra": 0}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn relative_instance_path() {
        let dir = tempfile::tempdir().unwrap();
        Instance::mixed(&[4, 1])
            .unwrap()
            .write(dir.path().join("d.json"))
            .unwrap();
        let cfg = dir.path().join("cfg.json");
        std::fs::write(
            &cfg,
            r#"{"instance": "d.json", "algorithms": ["SFM"], "budgets": [2], "master_seed": 0}"#,
        )
        .unwrap();
        let (_, d) = ExperimentConfig::read(&cfg).unwrap();
        assert_eq!(d.community_sizes(), vec![4, 1]);
    }

    #[test]
    fn sweep_shape_and_pairing() {
        let c = config(
            r#"{"instance": [[5, 4, 1]], "algorithms": ["DSM", "DS_UE"], "budgets": [1, 3, 6],
                "trials": 100, "master_seed": 4, "pairing": true}"#,
        );
        let d = c.instance.load(None).unwrap();
        let out = sweep(&c, &d).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out.iter().map(|e| e.trials).sum::<u64>(), 600);
        // DS_UE on one box is DSM, and pairing gives both the same seeds
        for k in 0..3 {
            assert_eq!(out[k].errors, out[k + 3].errors);
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let c = config(
            r#"{"instance": [[6, 5, 2]], "algorithms": ["SFM", "DSM"], "budgets": [2, 8],
                "trials": 3000, "master_seed": 77}"#,
        );
        let d = c.instance.load(None).unwrap();
        let render = |threads| {
            let mut buf = Vec::new();
            write_results_csv(&sweep_with_threads(&c, &d, threads).unwrap(), &mut buf).unwrap();
            buf
        };
        let one = render(Some(1));
        assert_eq!(one, render(Some(4)));
        assert_eq!(one, render(None));
        let text = String::from_utf8(one).unwrap();
        assert!(text.starts_with("algorithm,t,trials,errors,p_hat,ci_low,ci_high,log_p_hat\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn experiment_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(
            r#"{"instance": [[3, 1]], "algorithms": ["DSM"], "budgets": [4], "trials": 50, "master_seed": 2}"#,
        );
        let d = c.instance.load(None).unwrap();
        let prefix = dir.path().join("out.run");
        run_experiment(&c, &d, &prefix, Some(2)).unwrap();
        assert!(dir.path().join("out.run.csv").exists());
        let meta: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("out.run.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(meta["master_seed"], 2);
        assert_eq!(meta["config"]["budgets"][0], 4);
    }
}
