//! Experiment front-end: configuration, single runs, batch sweeps, CSV
//! emission, and verdicts.
//!
//! Everything here is deterministic given the config seeds: identical
//! configs produce byte-identical trace files.

pub mod plot;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    format_f64, load_chain, sigma_from_spec, write_atomic, write_json, xi_from_spec,
};
use crate::products::{trace_convergence_opts, ConvergenceTrace, StopRule, TraceOptions};
use crate::seqgen::{self, ContractionChain};
use crate::symmat::SymMatrix;

pub const DEFAULT_THRESHOLD: f64 = 1e-4;
/// Horizon auto-extension factor before a run is declared not converged.
pub const HORIZON_EXTENSION: usize = 4;

pub const TRACE_CSV_HEADER: &str = "step,sigma_index,xi_norm,dist_to_P,adjoint_dist,f_functional";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainSpec {
    File(ChainFileSpec),
    Generate(ChainGenSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFileSpec {
    pub file: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainGenSpec {
    pub kind: String,
    pub dim: usize,
    pub len: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_common_vector: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chain: ChainSpec,
    /// `identity | blocks:B | interleave:S | file:sigma.json`.
    pub sigma: String,
    /// `random:SEED | basis:I | file:xi.json`.
    pub xi: String,
    pub horizon: usize,
    /// Order of the `f_k` functional recorded along the trace.
    pub k: u32,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub out_trace: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_verdict: Option<PathBuf>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    pub configs: Vec<ExperimentConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentVerdict {
    pub chain: String,
    pub sigma: String,
    pub xi: String,
    pub k: u32,
    pub threshold: f64,
    pub horizon: usize,
    pub max_horizon: usize,
    pub converged: bool,
    /// First step at which `dist_to_P` reached the threshold.
    pub steps_to_threshold: Option<usize>,
    /// The run needed the horizon extension to converge.
    pub extended: bool,
    pub final_step: usize,
    pub final_dist: f64,
    pub final_adjoint_dist: f64,
    pub final_xi_norm: f64,
    pub chain_gap: f64,
    pub trace_path: PathBuf,
}

/// Builds a chain from a generator spec. `constant` draws one seeded
/// contraction with an exact unit eigenvalue and nonpinned spectrum in
/// `[0, 1 - 1e-4]`, then repeats it.
pub fn make_chain(spec: &ChainSpec) -> Result<ContractionChain> {
    match spec {
        ChainSpec::File(f) => load_chain(&f.file),
        ChainSpec::Generate(g) => {
            let pinned = g.pinned.unwrap_or(1);
            match g.kind.as_str() {
                "constant" => {
                    let mut rng = crate::rng::Rng::new(g.seed);
                    let q = rng.orthogonal(g.dim);
                    let values: Vec<f64> = (0..g.dim)
                        .map(|i| {
                            if i < pinned.min(g.dim) {
                                1.0
                            } else {
                                rng.uniform_in(0.0, 1.0 - 1e-4)
                            }
                        })
                        .collect();
                    let t = SymMatrix::conjugated_diag(&q, &values);
                    seqgen::gen_constant(&t, g.len)
                }
                "projections" => seqgen::gen_projection_chain(g.dim, g.len, g.seed),
                "commuting" => seqgen::gen_commuting_diagonal(g.dim, g.len, g.seed, pinned),
                "gap" => {
                    let delta = g.delta.ok_or_else(|| {
                        Error::Validation("gap generator needs a delta".into())
                    })?;
                    seqgen::gen_gap_chain(g.dim, g.len, delta, g.seed)
                }
                "random" => seqgen::gen_random_decreasing(
                    g.dim,
                    g.len,
                    g.seed,
                    g.fix_common_vector.unwrap_or(false),
                ),
                "proj-average" => seqgen::gen_proj_average(g.dim, g.len, g.seed),
                other => Err(Error::Validation(format!(
                    "unknown generator kind '{other}'"
                ))),
            }
        }
    }
}

fn describe_chain(spec: &ChainSpec) -> String {
    match spec {
        ChainSpec::File(f) => format!("file:{}", f.file.display()),
        ChainSpec::Generate(g) => {
            format!("{}:dim{}:len{}:seed{}", g.kind, g.dim, g.len, g.seed)
        }
    }
}

pub fn write_trace_csv(trace: &ConvergenceTrace, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (trace.steps.len() + 1));
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for s in &trace.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.n,
            s.sigma_index,
            format_f64(s.xi_norm),
            format_f64(s.dist_to_p),
            format_f64(s.adjoint_dist),
            format_f64(s.f_functional),
        ));
    }
    write_atomic(path, out.as_bytes())
}

fn join_base(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Runs one experiment: builds the chain, verifies it, traces the product,
/// writes the CSV trace, and returns (and optionally writes) the verdict.
pub fn run_experiment(config: &ExperimentConfig, base: &Path) -> Result<ExperimentVerdict> {
    if config.horizon == 0 {
        return Err(Error::Validation("horizon must be >= 1".into()));
    }
    if config.threshold <= 0.0 {
        return Err(Error::Validation("threshold must be positive".into()));
    }
    let chain = make_chain(&config.chain)?;
    let report = seqgen::verify_chain(&chain, seqgen::DEFAULT_CHAIN_TOL)?;
    if !report.accepted {
        return Err(Error::Order(format!(
            "chain failed verification (t1 max eig {}, worst witness {:?})",
            report.t1_max_eig,
            report
                .step_witnesses
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        )));
    }

    let max_horizon = config.horizon.saturating_mul(HORIZON_EXTENSION);
    let map = sigma_from_spec(&config.sigma, max_horizon)?;
    let xi = xi_from_spec(&config.xi, chain.dim())?;

    let opts = TraceOptions {
        horizon: max_horizon,
        k: config.k,
        stop_below: Some(config.threshold),
        stop_on: StopRule::Dist,
        retain_vectors: false,
    };
    let trace = trace_convergence_opts(&chain, &map, &xi, &opts)?;

    let trace_path = join_base(base, &config.out_trace);
    write_trace_csv(&trace, &trace_path)?;

    let final_step = trace.final_step();
    let steps_to_threshold = trace.steps_to_threshold(config.threshold);
    let verdict = ExperimentVerdict {
        chain: describe_chain(&config.chain),
        sigma: map.describe(),
        xi: config.xi.clone(),
        k: config.k,
        threshold: config.threshold,
        horizon: config.horizon,
        max_horizon,
        converged: steps_to_threshold.is_some(),
        steps_to_threshold,
        extended: steps_to_threshold.is_none_or(|n| n > config.horizon),
        final_step: final_step.n,
        final_dist: final_step.dist_to_p,
        final_adjoint_dist: final_step.adjoint_dist,
        final_xi_norm: final_step.xi_norm,
        chain_gap: report.proxy_gap,
        trace_path: trace_path.clone(),
    };
    if let Some(v) = &config.out_verdict {
        write_json(&join_base(base, v), &verdict)?;
    }
    Ok(verdict)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub generator: String,
    pub sigma: String,
    pub configs: usize,
    pub converged: usize,
    pub failed: usize,
    pub steps_min: Option<usize>,
    pub steps_median: Option<usize>,
    pub steps_max: Option<usize>,
}

/// One line per config, in manifest order.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub generator: String,
    pub sigma: String,
    pub converged: bool,
    pub steps_to_threshold: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub total_configs: usize,
    pub total_converged: usize,
    pub total_failed: usize,
    /// Per-config outcomes, one row per manifest entry.
    pub runs: Vec<RunSummary>,
    /// Aggregates per generator and sigma family.
    pub rows: Vec<SweepRow>,
    pub errors: Vec<String>,
}

/// Runs every config (in parallel), never aborting the sweep on a per-config
/// failure; failures are recorded in the summary.
pub fn run_sweep(manifest: &SweepManifest, base: &Path) -> Result<SweepSummary> {
    let mut seen = std::collections::BTreeSet::new();
    for c in &manifest.configs {
        if !seen.insert(c.out_trace.clone()) {
            return Err(Error::Validation(format!(
                "configs share the output path {}",
                c.out_trace.display()
            )));
        }
    }

    let outcomes: Vec<(String, String, std::result::Result<ExperimentVerdict, String>)> = manifest
        .configs
        .par_iter()
        .map(|config| {
            let generator = match &config.chain {
                ChainSpec::File(f) => format!("file:{}", f.file.display()),
                ChainSpec::Generate(g) => g.kind.clone(),
            };
            let sigma = config.sigma.clone();
            let outcome = run_experiment(config, base).map_err(|e| e.to_string());
            (generator, sigma, outcome)
        })
        .collect();

    let mut groups: BTreeMap<(String, String), Vec<&std::result::Result<ExperimentVerdict, String>>> =
        BTreeMap::new();
    let mut errors = Vec::new();
    let mut runs = Vec::with_capacity(outcomes.len());
    for (generator, sigma, outcome) in &outcomes {
        groups
            .entry((generator.clone(), sigma.clone()))
            .or_default()
            .push(outcome);
        if let Err(e) = outcome {
            errors.push(format!("{generator}/{sigma}: {e}"));
        }
        runs.push(RunSummary {
            generator: generator.clone(),
            sigma: sigma.clone(),
            converged: outcome.as_ref().is_ok_and(|v| v.converged),
            steps_to_threshold: outcome
                .as_ref()
                .ok()
                .and_then(|v| v.steps_to_threshold),
            error: outcome.as_ref().err().cloned(),
        });
    }

    let mut rows = Vec::new();
    let mut total_converged = 0;
    for ((generator, sigma), outcomes) in groups {
        let mut steps: Vec<usize> = outcomes
            .iter()
            .filter_map(|o| o.as_ref().ok())
            .filter_map(|v| v.steps_to_threshold)
            .collect();
        steps.sort_unstable();
        total_converged += steps.len();
        rows.push(SweepRow {
            configs: outcomes.len(),
            converged: steps.len(),
            failed: outcomes.iter().filter(|o| o.is_err()).count(),
            steps_min: steps.first().copied(),
            steps_median: if steps.is_empty() {
                None
            } else {
                Some(steps[steps.len() / 2])
            },
            steps_max: steps.last().copied(),
            generator,
            sigma,
        });
    }

    Ok(SweepSummary {
        total_configs: manifest.configs.len(),
        total_converged,
        total_failed: errors.len(),
        runs,
        rows,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_json;

    fn gen_spec(kind: &str, dim: usize, len: usize, seed: u64) -> ChainSpec {
        ChainSpec::Generate(ChainGenSpec {
            kind: kind.into(),
            dim,
            len,
            seed,
            delta: (kind == "gap").then_some(0.3),
            pinned: None,
            fix_common_vector: None,
        })
    }

    #[test]
    fn config_files_reject_unknown_keys() {
        let text = r#"{
            "chain": {"kind": "constant", "dim": 2, "len": 4, "seed": 1},
            "sigma": "identity",
            "xi": "random:1",
            "horizon": 100,
            "k": 2,
            "out_trace": "t.csv",
            "surprise": true
        }"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
        let ok = text.replace(",\n            \"surprise\": true", "");
        assert!(serde_json::from_str::<ExperimentConfig>(&ok).is_ok());
    }

    #[test]
    fn experiment_writes_trace_and_verdict() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            chain: gen_spec("gap", 3, 16, 5),
            sigma: "identity".into(),
            xi: "random:9".into(),
            horizon: 2_000,
            k: 2,
            threshold: 1e-4,
            out_trace: "trace.csv".into(),
            out_verdict: Some("verdict.json".into()),
        };
        let verdict = run_experiment(&config, dir.path()).unwrap();
        assert!(verdict.converged, "gap chains converge quickly");
        let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert!(csv.starts_with(TRACE_CSV_HEADER));
        let written: serde_json::Value = read_json(&dir.path().join("verdict.json")).unwrap();
        assert_eq!(written["converged"], serde_json::json!(true));
    }

    #[test]
    fn identical_configs_give_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |name: &str| ExperimentConfig {
            chain: gen_spec("commuting", 4, 12, 3),
            sigma: "blocks:2".into(),
            xi: "random:4".into(),
            horizon: 5_000,
            k: 3,
            threshold: 1e-4,
            out_trace: name.into(),
            out_verdict: None,
        };
        run_experiment(&mk("a.csv"), dir.path()).unwrap();
        run_experiment(&mk("b.csv"), dir.path()).unwrap();
        let a = std::fs::read(dir.path().join("a.csv")).unwrap();
        let b = std::fs::read(dir.path().join("b.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_aggregates_and_survives_failures() {
        let dir = tempfile::tempdir().unwrap();
        let mut configs = Vec::new();
        for seed in 0..3u64 {
            configs.push(ExperimentConfig {
                chain: gen_spec("gap", 3, 16, seed),
                sigma: "identity".into(),
                xi: format!("random:{seed}"),
                horizon: 2_000,
                k: 2,
                threshold: 1e-4,
                out_trace: format!("gap-{seed}.csv").into(),
                out_verdict: None,
            });
        }
        // One config with a missing chain file fails; the sweep continues.
        configs.push(ExperimentConfig {
            chain: ChainSpec::File(ChainFileSpec {
                file: dir.path().join("missing.json"),
            }),
            sigma: "identity".into(),
            xi: "random:0".into(),
            horizon: 100,
            k: 2,
            threshold: 1e-4,
            out_trace: "missing.csv".into(),
            out_verdict: None,
        });
        let summary = run_sweep(&SweepManifest { configs }, dir.path()).unwrap();
        assert_eq!(summary.total_configs, 4);
        assert_eq!(summary.total_failed, 1);
        assert_eq!(summary.total_converged, 3);
        assert_eq!(summary.rows.len(), 2);
        assert_eq!(summary.runs.len(), 4);
        assert!(summary.runs[3].error.is_some());
    }

    #[test]
    fn sweep_summary_has_one_run_row_per_config() {
        // 3 generators x 3 sigma kinds x 5 seeds: 45 per-config rows,
        // 9 aggregate rows.
        let dir = tempfile::tempdir().unwrap();
        let mut configs = Vec::new();
        for (gi, kind) in ["commuting", "gap", "proj-average"].iter().enumerate() {
            for (si, sigma) in ["identity", "blocks:2", "interleave:3"].iter().enumerate() {
                for seed in 0..5u64 {
                    configs.push(ExperimentConfig {
                        chain: gen_spec(kind, 3, 10, seed),
                        sigma: (*sigma).into(),
                        xi: format!("random:{seed}"),
                        horizon: 30_000,
                        k: 2,
                        threshold: 1e-4,
                        out_trace: format!("t-{gi}-{si}-{seed}.csv").into(),
                        out_verdict: None,
                    });
                }
            }
        }
        let summary = run_sweep(&SweepManifest { configs }, dir.path()).unwrap();
        assert_eq!(summary.runs.len(), 45);
        assert_eq!(summary.rows.len(), 9);
        assert_eq!(summary.total_failed, 0);
        for row in &summary.rows {
            assert_eq!(row.configs, 5);
            assert!(row.steps_min <= row.steps_median && row.steps_median <= row.steps_max);
        }
    }

    #[test]
    fn sweep_rejects_shared_output_paths() {
        let config = ExperimentConfig {
            chain: gen_spec("constant", 2, 4, 0),
            sigma: "identity".into(),
            xi: "random:0".into(),
            horizon: 10,
            k: 1,
            threshold: 1e-4,
            out_trace: "same.csv".into(),
            out_verdict: None,
        };
        let manifest = SweepManifest {
            configs: vec![config.clone(), config],
        };
        assert!(matches!(
            run_sweep(&manifest, Path::new(".")),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn empty_sweep_is_a_success() {
        let summary = run_sweep(&SweepManifest { configs: vec![] }, Path::new(".")).unwrap();
        assert_eq!(summary.total_configs, 0);
        assert!(summary.rows.is_empty());
    }

    #[test]
    fn constant_chain_steps_to_threshold_matches_closed_form() {
        // diag(1, 0.5) with xi = (1, 1)/sqrt(2): first step with
        // 0.5^n / sqrt(2) <= 1e-4 is ceil(log(1e-4 sqrt 2) / log 0.5) = 13.
        let dir = tempfile::tempdir().unwrap();
        let chain =
            crate::seqgen::gen_constant(&crate::symmat::SymMatrix::diag(&[1.0, 0.5]), 4)
                .unwrap();
        let chain_path = dir.path().join("chain.json");
        crate::io::save_chain(&chain, &chain_path).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let xi_path = dir.path().join("xi.json");
        write_json(&xi_path, &vec![s, s]).unwrap();
        let config = ExperimentConfig {
            chain: ChainSpec::File(ChainFileSpec { file: chain_path }),
            sigma: "identity".into(),
            xi: format!("file:{}", xi_path.display()),
            horizon: 1000,
            k: 2,
            threshold: 1e-4,
            out_trace: "t.csv".into(),
            out_verdict: None,
        };
        let verdict = run_experiment(&config, dir.path()).unwrap();
        assert!(verdict.converged);
        assert_eq!(verdict.steps_to_threshold, Some(13));
        assert!(!verdict.extended);
    }

    #[test]
    fn xi_in_range_of_p_converges_at_step_zero() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            chain: gen_spec("constant", 2, 4, 1),
            sigma: "identity".into(),
            // constant chains pin coordinate 0 of the seeded frame; basis
            // vectors are not in range(P), so use a file vector below.
            xi: "file:replaced".into(),
            horizon: 50,
            k: 1,
            threshold: 1e-4,
            out_trace: "p.csv".into(),
            out_verdict: None,
        };
        let chain = make_chain(&config.chain).unwrap();
        let p_col: Vec<f64> = (0..2).map(|i| chain.proj_p().get(i, 0)).collect();
        let xi_path = dir.path().join("xi.json");
        write_json(&xi_path, &p_col).unwrap();
        let config = ExperimentConfig {
            xi: format!("file:{}", xi_path.display()),
            ..config
        };
        let verdict = run_experiment(&config, dir.path()).unwrap();
        assert_eq!(verdict.steps_to_threshold, Some(0));
    }
}
