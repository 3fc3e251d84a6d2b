//! Experiment configuration, end-to-end simulation runs, parameter scans and
//! their JSON/CSV outputs.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continuous::{average_norm, reference_evolve, ContinuousAlgorithm, DrivingSchedule, Piece};
use crate::discretize::{build_program, ceil_tolerant, choose_p, FractionalProgram};
use crate::error::{Error, Result};
use crate::numerics::{fidelity, Operator, StateVector, HERMITIAN_TOL};
use crate::oracle::{OracleInstance, QueryCounter};
use crate::recovery::{run_with_recovery, trial_rng, RecoveryOptions, TrajectoryStats};
use crate::segment::{choose_k, choose_m, ExecutionMode, DEFAULT_M_CAP};

/// Complex number as `[re, im]`.
pub type ComplexPair = [f64; 2];

pub const TRIALS_CSV_HEADER: &str = "trial,succeeded,full_queries,segment_computations,error_fixes,fidelity";
pub const SCAN_CSV_HEADER: &str =
    "param,value,total_time,avg_norm,p,theta,m,k,segments,trials,successes,mean_full_queries,mean_fidelity,failure_rate";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSpec {
    Bits(Vec<u8>),
    Seed(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub duration: f64,
    /// Row-major `2ⁿ × 2ⁿ` entries.
    pub generator: Vec<ComplexPair>,
}

/// Experiment file as written by the user. Missing optional fields take the
/// defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_qubits: usize,
    #[serde(default = "default_oracle")]
    pub oracle: OracleSpec,
    pub schedule: Vec<PieceSpec>,
    #[serde(default)]
    pub initial_state: Option<Vec<ComplexPair>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: ExecutionMode,
    #[serde(default = "default_budget_factor")]
    pub budget_factor: f64,
    #[serde(default = "default_m_cap")]
    pub m_cap: usize,
    /// Multiplier applied to every generator.
    #[serde(default = "default_r_scale")]
    pub r_scale: f64,
}

fn default_oracle() -> OracleSpec {
    OracleSpec::Seed(0)
}
fn default_epsilon() -> f64 {
    0.09
}
fn default_trials() -> usize {
    100
}
fn default_mode() -> ExecutionMode {
    ExecutionMode::ExactSequential
}
fn default_budget_factor() -> f64 {
    2.0
}
fn default_m_cap() -> usize {
    DEFAULT_M_CAP
}
fn default_r_scale() -> f64 {
    1.0
}

/// Validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub file: ConfigFile,
    pub oracle: OracleInstance,
    pub algorithm: ContinuousAlgorithm,
}

fn complex(pair: &ComplexPair) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

fn parse_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    Error::config(if path == "." { "(root)".to_string() } else { path }, e.into_inner().to_string())
}

/// Parses and validates a JSON experiment document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(parse_error)?;
    ExperimentConfig::from_file(file)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let n = file.n_qubits;
        if n == 0 || n > 12 {
            return Err(Error::config("n_qubits", format!("{n} is outside [1, 12]")));
        }
        let dim = 1usize << n;
        let oracle = match &file.oracle {
            OracleSpec::Bits(bits) => {
                if bits.len() != dim {
                    return Err(Error::config(
                        "oracle.bits",
                        format!("expected {dim} bits for n_qubits = {n}, found {}", bits.len()),
                    ));
                }
                OracleInstance::new(n, bits.clone()).map_err(|e| Error::config("oracle.bits", e.to_string()))?
            }
            OracleSpec::Seed(seed) => OracleInstance::random(n, &mut ChaCha8Rng::seed_from_u64(*seed)),
        };
        if file.schedule.is_empty() {
            return Err(Error::config("schedule", "at least one piece is required"));
        }
        if !(file.r_scale >= 0.0 && file.r_scale.is_finite()) {
            return Err(Error::config("r_scale", format!("{} must be finite and nonnegative", file.r_scale)));
        }
        let mut pieces = Vec::with_capacity(file.schedule.len());
        for (i, piece) in file.schedule.iter().enumerate() {
            if !(piece.duration > 0.0 && piece.duration.is_finite()) {
                return Err(Error::config(
                    format!("schedule[{i}].duration"),
                    format!("{} must be positive", piece.duration),
                ));
            }
            let path = format!("schedule[{i}].generator");
            if piece.generator.len() != dim * dim {
                return Err(Error::config(
                    path,
                    format!("expected {} entries, found {}", dim * dim, piece.generator.len()),
                ));
            }
            let entries: Vec<Complex64> = piece.generator.iter().map(complex).collect();
            let generator = Operator::from_row_major(dim, &entries).map_err(|e| Error::config(path.clone(), e.to_string()))?;
            let defect = generator.hermiticity_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::config(path, format!("generator is not Hermitian (defect {defect:.3e})")));
            }
            pieces.push(Piece {
                duration: piece.duration,
                generator: generator.scaled(Complex64::new(file.r_scale, 0.0)),
            });
        }
        let schedule = DrivingSchedule::new(pieces).map_err(|e| Error::config("schedule", e.to_string()))?;
        let initial = match &file.initial_state {
            None => StateVector::zero_state(n),
            Some(amps) => {
                if amps.len() != dim {
                    return Err(Error::config(
                        "initial_state",
                        format!("expected {dim} amplitudes, found {}", amps.len()),
                    ));
                }
                StateVector::from_amplitudes(amps.iter().map(complex).collect())
                    .and_then(|s| s.normalized())
                    .map_err(|e| Error::config("initial_state", e.to_string()))?
            }
        };
        if !(file.epsilon > 0.0 && file.epsilon < 1.0) {
            return Err(Error::config("epsilon", format!("{} is outside (0, 1)", file.epsilon)));
        }
        if file.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if !(file.budget_factor >= 1.0 && file.budget_factor.is_finite()) {
            return Err(Error::config("budget_factor", format!("{} must be >= 1", file.budget_factor)));
        }
        if file.m_cap == 0 {
            return Err(Error::config("m_cap", "must be at least 1"));
        }
        let algorithm = ContinuousAlgorithm::new(schedule, initial)?;
        Ok(Self { file, oracle, algorithm })
    }

    /// Rebuilds the experiment with an edited file, re-running validation.
    pub fn with_file(&self, edit: impl FnOnce(&mut ConfigFile)) -> Result<Self> {
        let mut file = self.file.clone();
        edit(&mut file);
        Self::from_file(file)
    }
}

/// Parameters derived from a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParameters {
    pub total_time: f64,
    pub avg_norm: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub p: usize,
    pub theta: f64,
    pub m: usize,
    pub k: usize,
    pub segments: usize,
    pub budget: u64,
}

/// Slice count actually used: the Trotter requirement, raised so that
/// `θ ≤ 1/4`, then rounded up to a multiple of `⌈4T⌉` so segments tile the
/// program evenly.
pub fn aligned_p(total_time: f64, avg_norm: f64, eps1: f64) -> Result<usize> {
    let p = choose_p(total_time, avg_norm, eps1)?;
    let segments = ceil_tolerant(4.0 * total_time).max(1);
    Ok(p.div_ceil(segments).max(1) * segments)
}

pub fn derive_parameters(config: &ExperimentConfig) -> Result<DerivedParameters> {
    let total_time = config.algorithm.total_time();
    let avg_norm = average_norm(config.algorithm.schedule());
    let eps = config.file.epsilon / 9.0;
    let p = aligned_p(total_time, avg_norm, eps)?;
    let theta = total_time / p as f64;
    let m = choose_m(theta)?;
    let k = choose_k(total_time, eps, eps, m, theta)?;
    let segments = p.div_ceil(m);
    let options = RecoveryOptions {
        eps2: eps,
        budget_factor: config.file.budget_factor,
        mode: config.file.mode,
        m_cap: config.file.m_cap,
        k,
    };
    Ok(DerivedParameters {
        total_time,
        avg_norm,
        eps1: eps,
        eps2: eps,
        eps3: eps,
        p,
        theta,
        m,
        k,
        segments,
        budget: options.budget(segments),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    #[serde(flatten)]
    pub stats: TrajectoryStats,
    /// Fidelity against the continuous-time reference; absent on failure.
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: ExecutionMode,
    pub seed: u64,
    pub parameters: DerivedParameters,
    pub trials: Vec<TrialRecord>,
    pub successes: usize,
    pub mean_fidelity: Option<f64>,
    pub min_fidelity: Option<f64>,
    pub mean_full_queries: f64,
    pub median_full_queries: f64,
    pub p90_full_queries: f64,
    pub budget_failure_rate: f64,
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[u64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1] as f64
}

impl RunReport {
    /// Recomputes every aggregate from the per-trial records.
    pub fn from_trials(mode: ExecutionMode, seed: u64, parameters: DerivedParameters, trials: Vec<TrialRecord>) -> Self {
        let fidelities: Vec<f64> = trials.iter().filter_map(|t| t.fidelity).collect();
        let successes = fidelities.len();
        let mut queries: Vec<u64> = trials.iter().map(|t| t.stats.full_queries).collect();
        queries.sort_unstable();
        let n = trials.len().max(1) as f64;
        Self {
            mode,
            seed,
            parameters,
            successes,
            mean_fidelity: (successes > 0).then(|| fidelities.iter().sum::<f64>() / successes as f64),
            min_fidelity: fidelities.iter().copied().reduce(f64::min),
            mean_full_queries: queries.iter().sum::<u64>() as f64 / n,
            median_full_queries: percentile(&queries, 0.5),
            p90_full_queries: percentile(&queries, 0.9),
            budget_failure_rate: (trials.len() - successes) as f64 / n,
            trials,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn trials_csv(&self) -> String {
        let mut out = String::from(TRIALS_CSV_HEADER);
        out.push('\n');
        for t in &self.trials {
            let fid = t.fidelity.map(|f| f.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                t.trial,
                t.stats.succeeded as u8,
                t.stats.full_queries,
                t.stats.segment_computations,
                t.stats.error_fixes,
                fid
            );
        }
        out
    }

    /// Writes `report.json` and `trials.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("trials.csv"), self.trials_csv())
    }
}

/// Runs `trials` recovery trajectories and scores each successful one
/// against the exact continuous-time evolution.
pub fn simulate(config: &ExperimentConfig) -> Result<RunReport> {
    let params = derive_parameters(config)?;
    if config.file.mode == ExecutionMode::Truncated && params.m > config.file.m_cap {
        return Err(Error::SegmentCapExceeded { m: params.m, cap: config.file.m_cap });
    }
    let prog = build_program(&config.algorithm, params.p)?;
    let reference = reference_evolve(&config.algorithm, &config.oracle)?;
    let options = RecoveryOptions {
        eps2: params.eps2,
        budget_factor: config.file.budget_factor,
        mode: config.file.mode,
        m_cap: config.file.m_cap,
        k: params.k,
    };
    let trials = (0..config.file.trials)
        .map(|trial| run_trial(config, &prog, &options, &reference, trial))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport::from_trials(config.file.mode, config.file.seed, params, trials))
}

fn run_trial(
    config: &ExperimentConfig,
    prog: &FractionalProgram,
    options: &RecoveryOptions,
    reference: &StateVector,
    trial: usize,
) -> Result<TrialRecord> {
    let mut rng = trial_rng(config.file.seed, trial as u64);
    let mut counter = QueryCounter::new();
    let (state, stats) = run_with_recovery(
        config.algorithm.initial_state(),
        &config.oracle,
        prog,
        options,
        &mut rng,
        &mut counter,
    )?;
    let fidelity = if stats.succeeded { Some(fidelity(&state, reference)?) } else { None };
    Ok(TrialRecord { trial, stats, fidelity })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanParameter {
    TotalTime,
    RScale,
    Epsilon,
}

impl ScanParameter {
    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::TotalTime => "T",
            ScanParameter::RScale => "r-scale",
            ScanParameter::Epsilon => "epsilon",
        }
    }
}

impl std::str::FromStr for ScanParameter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "T" | "t" | "total_time" => Ok(ScanParameter::TotalTime),
            "r-scale" | "r_scale" | "r" => Ok(ScanParameter::RScale),
            "epsilon" | "eps" => Ok(ScanParameter::Epsilon),
            other => Err(format!("unknown scan parameter `{other}` (expected T, r-scale or epsilon)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub value: f64,
    pub parameters: DerivedParameters,
    pub trials: usize,
    pub successes: usize,
    pub mean_full_queries: f64,
    pub mean_fidelity: Option<f64>,
    pub failure_rate: f64,
}

/// Re-runs `simulate` with one parameter replaced by each value. `T` values
/// stretch the schedule's durations to the requested total time; `r-scale`
/// multiplies the generators of the base configuration.
pub fn scan(config: &ExperimentConfig, param: ScanParameter, values: &[f64]) -> Result<Vec<ScanRow>> {
    let base_time = config.algorithm.total_time();
    values
        .iter()
        .map(|&value| {
            let edited = config.with_file(|f| match param {
                ScanParameter::TotalTime => {
                    for piece in &mut f.schedule {
                        piece.duration *= value / base_time;
                    }
                }
                ScanParameter::RScale => f.r_scale = value,
                ScanParameter::Epsilon => f.epsilon = value,
            })?;
            let report = simulate(&edited)?;
            Ok(ScanRow {
                value,
                parameters: report.parameters,
                trials: report.trials.len(),
                successes: report.successes,
                mean_full_queries: report.mean_full_queries,
                mean_fidelity: report.mean_fidelity,
                failure_rate: report.budget_failure_rate,
            })
        })
        .collect()
}

pub fn scan_csv(param: ScanParameter, rows: &[ScanRow]) -> String {
    let mut out = String::from(SCAN_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.parameters;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            param.name(),
            r.value,
            p.total_time,
            p.avg_norm,
            p.p,
            p.theta,
            p.m,
            p.k,
            p.segments,
            r.trials,
            r.successes,
            r.mean_full_queries,
            r.mean_fidelity.map(|f| f.to_string()).unwrap_or_default(),
            r.failure_rate
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "n_qubits": 1,
        "schedule": [{"duration": 1.0, "generator": [[0,0],[0,0],[0,0],[0,0]]}]
    }"#;

    fn config_with(extra: &str) -> String {
        format!(
            r#"{{
            "n_qubits": 2,
            "oracle": {{"bits": [0, 1, 1, 0]}},
            "schedule": [
                {{"duration": 0.5, "generator": [[0,0],[1,0],[0,0],[0,0], [1,0],[0,0],[0,0],[0,0], [0,0],[0,0],[0,0],[0,-1], [0,0],[0,0],[0,1],[0,0]]}},
                {{"duration": 0.5, "generator": [[0.5,0],[0,0],[0,0],[0,0], [0,0],[-0.5,0],[0,0],[0,0], [0,0],[0,0],[0.5,0],[0,0], [0,0],[0,0],[0,0],[-0.5,0]]}}
            ]{extra}
        }}"#
        )
    }

    fn config_error_path(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.file.budget_factor, 2.0);
        assert_eq!(cfg.file.m_cap, 16);
        assert_eq!(cfg.file.mode, ExecutionMode::ExactSequential);
        assert_eq!(cfg.file.oracle, OracleSpec::Seed(0));
        assert_eq!(cfg.algorithm.total_time(), 1.0);
    }

    #[test]
    fn config_errors_name_the_field() {
        let short = config_with("").replace("[0, 1, 1, 0]", "[0, 1, 1]");
        assert_eq!(config_error_path(&short), "oracle.bits");
        let negative = MINIMAL.replace("\"duration\": 1.0", "\"duration\": -1");
        assert_eq!(config_error_path(&negative), "schedule[0].duration");
        let non_hermitian = MINIMAL.replace("[[0,0],[0,0],[0,0],[0,0]]", "[[0,0],[1,0],[0,0],[0,0]]");
        assert_eq!(config_error_path(&non_hermitian), "schedule[0].generator");
        let wrong_type = MINIMAL.replace("\"n_qubits\": 1", "\"n_qubits\": \"one\"");
        assert_eq!(config_error_path(&wrong_type), "n_qubits");
        let unknown_mode = config_with(r#", "mode": "fast""#);
        assert_eq!(config_error_path(&unknown_mode), "mode");
    }

    #[test]
    fn derived_parameters_tile_the_program() {
        let cfg = parse_config(&config_with("")).unwrap();
        let d = derive_parameters(&cfg).unwrap();
        assert_eq!(d.eps1, 0.01);
        assert_eq!(d.p % 4, 0);
        assert_eq!(d.segments, 4);
        assert!((d.m as f64 * d.theta - 0.25).abs() < 1e-12);
        for scale in [4.0, 10.0] {
            let scaled = cfg.with_file(|f| f.r_scale = scale).unwrap();
            let s = derive_parameters(&scaled).unwrap();
            assert_eq!(s.segments, d.segments);
            assert!(s.p > d.p);
        }
    }

    #[test]
    fn zero_drive_trajectories_are_exact() {
        for mode in ["exact", "truncated"] {
            let text = MINIMAL.replace("\"n_qubits\": 1", &format!("\"n_qubits\": 1, \"trials\": 20, \"mode\": \"{mode}\""));
            let report = simulate(&parse_config(&text).unwrap()).unwrap();
            assert!(report.successes > 0);
            for t in &report.trials {
                if let Some(f) = t.fidelity {
                    assert!((f - 1.0).abs() < 1e-9, "{mode}: {f}");
                }
            }
        }
    }

    #[test]
    fn outputs_are_deterministic_and_consistent() {
        let cfg = parse_config(&config_with(r#", "trials": 30, "seed": 11, "mode": "truncated""#)).unwrap();
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.trials_csv(), b.trials_csv());
        let csv = a.trials_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRIALS_CSV_HEADER));
        let fids: Vec<f64> = lines.filter_map(|l| l.rsplit(',').next().unwrap().parse().ok()).collect();
        let mean = fids.iter().sum::<f64>() / fids.len() as f64;
        assert!((mean - a.mean_fidelity.unwrap()).abs() < 1e-12);
        let total: u64 = a.trials.iter().map(|t| t.stats.full_queries).sum();
        assert!((total as f64 / 30.0 - a.mean_full_queries).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced_in_truncated_mode() {
        let cfg = parse_config(&config_with(r#", "mode": "truncated", "m_cap": 2, "trials": 1"#)).unwrap();
        assert!(matches!(simulate(&cfg), Err(Error::SegmentCapExceeded { cap: 2, .. })));
    }

    #[test]
    fn empty_scan_is_header_only() {
        let cfg = parse_config(MINIMAL).unwrap();
        let rows = scan(&cfg, ScanParameter::RScale, &[]).unwrap();
        assert_eq!(scan_csv(ScanParameter::RScale, &rows), format!("{SCAN_CSV_HEADER}\n"));
        assert_eq!("r-scale".parse::<ScanParameter>().unwrap(), ScanParameter::RScale);
        assert!("x".parse::<ScanParameter>().is_err());
    }

    #[test]
    fn time_scan_stretches_the_schedule() {
        let cfg = parse_config(&config_with(r#", "trials": 5"#)).unwrap();
        let rows = scan(&cfg, ScanParameter::TotalTime, &[0.5, 2.0]).unwrap();
        assert!((rows[0].parameters.total_time - 0.5).abs() < 1e-12);
        assert!((rows[1].parameters.total_time - 2.0).abs() < 1e-12);
        assert_eq!(rows[0].parameters.segments, 2);
        assert_eq!(rows[1].parameters.segments, 8);
    }
}
