use std::path::{Path, PathBuf};

use kronshrink::eval::{
    bootstrap_temporal_factors, incoherence_diagnostic, median, qq_data, replicate_seed, run_benchmark,
    BenchmarkConfig, BenchmarkRow, EstimatorKind, EstimatorSpec,
};
use kronshrink::io::{
    read_covariance, read_json, read_samples, write_benchmark_csv, write_covariance, write_estimate, write_json,
    write_samples, EstimateRecord,
};
use kronshrink::solver::{cross_validate, lambda_serde, plug_in_lambdas, solve, LambdaChoice};
use kronshrink::synth::{
    corrupt, kron_sum_covariance, sample_covariance, sample_gaussian, CorruptionSpec, KronSumSpec,
};
use kronshrink::{kron_spectrum, rearrange, RegParams, SolverConfig, StCovariance};
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{input_path, load, output_dir, resolve_seed, usage, write_manifest, Failure};
use crate::output::{write_series, write_table, Cell};
use crate::{
    BenchmarkArgs, BenchmarkPreset, BootstrapArgs, EstimateArgs, IncoherenceArgs, QqArgs, SpectraArgs, SynthArgs,
    SynthPreset,
};

/// Singular values of the rearranged theta below this fraction of the
/// largest do not count toward the default separation rank.
const RANK_TOL: f64 = 1e-10;

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

// synth

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub truth: KronSumSpec,
    /// `seed` is replaced by the run seed.
    pub corruption: CorruptionSpec,
    pub samples: Vec<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::preset(SynthPreset::Desk)
    }
}

impl SynthConfig {
    fn preset(p: SynthPreset) -> Self {
        let (truth, corruption) = match p {
            SynthPreset::PaperFig1 => (KronSumSpec::three_term(), CorruptionSpec::default()),
            SynthPreset::Desk => (KronSumSpec::desk(), CorruptionSpec::desk(0, false)),
            SynthPreset::DeskToeplitz => (KronSumSpec::desk(), CorruptionSpec::desk(0, true)),
        };
        Self { truth, corruption, samples: Vec::new(), out: None, seed: None }
    }
}

pub fn synth(a: SynthArgs, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = match a.preset {
        Some(p) => SynthConfig::preset(p),
        None => load::<SynthConfig>(a.config.as_deref())?,
    };
    set(&mut cfg.samples, a.samples);
    set_opt(&mut cfg.out, a.out);
    let seed = resolve_seed(seed, cfg.seed)?;
    cfg.seed = Some(seed);
    cfg.corruption.seed = seed;
    cfg.samples.sort_unstable();
    cfg.samples.dedup();
    let out = output_dir(cfg.out.take())?;
    cfg.out = Some(out.clone());

    let truth = kron_sum_covariance(&cfg.truth)?;
    let (corrupted, gamma0) = corrupt(&truth, &cfg.corruption)?;
    let dims = truth.dims();
    write_covariance(&out.join("truth.csv"), truth.matrix(), dims)?;
    write_covariance(&out.join("corrupted.csv"), corrupted.matrix(), dims)?;
    write_covariance(&out.join("gamma0.csv"), gamma0.matrix(), dims)?;
    let mut sample_files = Vec::new();
    for &n in &cfg.samples {
        let set = sample_gaussian(&corrupted, n, replicate_seed(seed, n, 0))?;
        let name = format!("samples_{n}.csv");
        write_samples(&out.join(&name), &set)?;
        sample_files.push(name);
    }
    write_manifest(&out, "synth", seed, &cfg, json!({ "sample_files": sample_files }))
}

// estimate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    #[default]
    Explicit,
    Theory,
    Cv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub covariance: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub toeplitz: bool,
    pub lambda: LambdaMode,
    /// Fixed weights; in theory and cv mode they override that component.
    #[serde(with = "lambda_serde::option")]
    pub lambda_theta: Option<f64>,
    #[serde(with = "lambda_serde::option")]
    pub lambda_gamma: Option<f64>,
    /// Sample count behind `covariance`.
    pub n: Option<usize>,
    pub t0: f64,
    pub eps: f64,
    pub theta_scale: f64,
    pub gamma_scale: f64,
    pub folds: usize,
    /// Cross-validation grid, as multiples of the plug-in weights.
    pub cv_theta_scales: Vec<f64>,
    pub cv_gamma_scales: Vec<f64>,
    pub solver: SolverConfig,
    pub seed: Option<u64>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            covariance: None,
            samples: None,
            out: None,
            toeplitz: false,
            lambda: LambdaMode::Explicit,
            lambda_theta: None,
            lambda_gamma: None,
            n: None,
            t0: 2.0,
            eps: 0.1,
            theta_scale: 1.0,
            gamma_scale: 1.0,
            folds: 5,
            cv_theta_scales: vec![0.003, 0.01, 0.03, 0.1, 0.3],
            cv_gamma_scales: vec![0.03, 0.1, 0.3, 1.0],
            solver: SolverConfig::default(),
            seed: None,
        }
    }
}

pub fn estimate(a: EstimateArgs, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = load::<EstimateConfig>(a.config.as_deref())?;
    if a.covariance.is_some() {
        cfg.covariance = a.covariance;
        cfg.samples = None;
    }
    if a.samples.is_some() {
        cfg.samples = a.samples;
        cfg.covariance = None;
    }
    set_opt(&mut cfg.out, a.out);
    cfg.toeplitz |= a.toeplitz;
    if a.lambda_theory {
        cfg.lambda = LambdaMode::Theory;
    }
    if a.lambda_cv {
        cfg.lambda = LambdaMode::Cv;
    }
    set_opt(&mut cfg.lambda_theta, a.lambda_theta);
    set_opt(&mut cfg.lambda_gamma, a.lambda_gamma);
    set_opt(&mut cfg.n, a.n);
    set(&mut cfg.t0, a.t0);
    set(&mut cfg.eps, a.eps);
    set(&mut cfg.theta_scale, a.theta_scale);
    set(&mut cfg.gamma_scale, a.gamma_scale);
    set(&mut cfg.folds, a.folds);
    set(&mut cfg.solver.max_iter, a.max_iter);
    set(&mut cfg.solver.tol, a.tol);
    let seed = resolve_seed(seed, cfg.seed)?;
    cfg.seed = Some(seed);
    cfg.solver.validate()?;

    let (scm, samples) = match (cfg.covariance.take(), cfg.samples.take()) {
        (Some(p), None) => {
            let p = input_path(Some(p), "covariance")?;
            let scm = read_covariance(&p)?;
            cfg.covariance = Some(p);
            (scm, None)
        }
        (None, Some(p)) => {
            let p = input_path(Some(p), "samples")?;
            let s = read_samples(&p)?;
            cfg.samples = Some(p);
            (sample_covariance(&s), Some(s))
        }
        _ => return Err(usage!("give exactly one of --covariance or --samples")),
    };
    let out = output_dir(cfg.out.take())?;
    cfg.out = Some(out.clone());

    let n = match &samples {
        Some(s) => Some(s.n()),
        None => cfg.n,
    };
    let (params, theory) = match cfg.lambda {
        LambdaMode::Explicit => match (cfg.lambda_theta, cfg.lambda_gamma) {
            (Some(t), Some(g)) => (RegParams::new(t, g)?, None),
            _ => return Err(usage!("set --lambda-theta and --lambda-gamma, or use --lambda-theory / --lambda-cv")),
        },
        LambdaMode::Theory => {
            let n = n.ok_or_else(|| usage!("--lambda-theory on a covariance input needs --n"))?;
            let choice = plug_in_lambdas(&scm, n, cfg.t0, cfg.eps, cfg.toeplitz)?;
            let t = cfg.lambda_theta.unwrap_or(choice.params.lambda_theta * cfg.theta_scale);
            let g = cfg.lambda_gamma.unwrap_or(choice.params.lambda_gamma * cfg.gamma_scale);
            (RegParams::new(t, g)?, Some(choice))
        }
        LambdaMode::Cv => {
            let s = samples.as_ref().ok_or_else(|| usage!("--lambda-cv needs --samples"))?;
            let choice = plug_in_lambdas(&scm, s.n(), cfg.t0, cfg.eps, cfg.toeplitz)?;
            let thetas = match cfg.lambda_theta {
                Some(t) => vec![t],
                None => cfg.cv_theta_scales.iter().map(|k| k * choice.params.lambda_theta).collect(),
            };
            let gammas = match cfg.lambda_gamma {
                Some(g) => vec![g],
                None => cfg.cv_gamma_scales.iter().map(|k| k * choice.params.lambda_gamma).collect(),
            };
            let grid = thetas
                .iter()
                .flat_map(|&t| gammas.iter().map(move |&g| RegParams::new(t, g)))
                .collect::<kronshrink::Result<Vec<_>>>()?;
            (cross_validate(s, &grid, cfg.folds, cfg.toeplitz, &cfg.solver, seed)?, Some(choice))
        }
    };

    let est = solve(&scm, &params, &cfg.solver, cfg.toeplitz)?;
    if !est.diagnostics.converged {
        eprintln!(
            "kronshrink: warning: no convergence after {} iterations (diagnostics.json has converged=false)",
            est.diagnostics.iterations
        );
    }
    write_estimate(&out, &est)?;
    let results = json!({
        "params": params,
        "theory": theory.map(|c: LambdaChoice| json!(c)),
        "n": n,
        "converged": est.diagnostics.converged,
    });
    write_manifest(&out, "estimate", seed, &cfg, results)
}

// benchmark

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkRunConfig {
    pub truth: KronSumSpec,
    /// `seed` is replaced by the run seed.
    pub corruption: CorruptionSpec,
    /// `base_seed` is replaced by the run seed.
    pub benchmark: BenchmarkConfig,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Default for BenchmarkRunConfig {
    fn default() -> Self {
        Self::preset(BenchmarkPreset::DeskFig4)
    }
}

impl BenchmarkRunConfig {
    fn preset(p: BenchmarkPreset) -> Self {
        let (corruption, benchmark) = match p {
            BenchmarkPreset::DeskFig4 => (CorruptionSpec::desk(0, false), BenchmarkConfig::desk_ordering(20, 0)),
            BenchmarkPreset::DeskToeplitz => (CorruptionSpec::desk(0, true), BenchmarkConfig::desk_toeplitz(20, 0)),
        };
        Self { truth: KronSumSpec::desk(), corruption, benchmark, out: None, seed: None }
    }
}

fn parse_estimator(s: &str) -> Result<EstimatorSpec, Failure> {
    let mut parts = s.split(':');
    let kind = EstimatorKind::parse(parts.next().unwrap_or_default().trim())?;
    let mut scale = |what: &str| -> Result<f64, Failure> {
        match parts.next() {
            None => Ok(1.0),
            Some(v) => v.trim().parse().map_err(|_| usage!("estimator '{s}': bad {what} '{v}'")),
        }
    };
    let theta_scale = scale("theta scale")?;
    let gamma_scale = scale("gamma scale")?;
    if parts.next().is_some() {
        return Err(usage!("estimator '{s}': expected kind[:theta_scale[:gamma_scale]]"));
    }
    Ok(EstimatorSpec::new(kind, theta_scale, gamma_scale))
}

pub fn benchmark(a: BenchmarkArgs, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = match a.preset {
        Some(p) => BenchmarkRunConfig::preset(p),
        None => load::<BenchmarkRunConfig>(a.config.as_deref())?,
    };
    set_opt(&mut cfg.out, a.out);
    set(&mut cfg.benchmark.reps, a.reps);
    set(&mut cfg.benchmark.n_grid, a.n_grid);
    if let Some(list) = a.estimators {
        cfg.benchmark.estimators = list.iter().map(|s| parse_estimator(s)).collect::<Result<_, _>>()?;
    }
    if let Some(h) = a.horizon {
        cfg.benchmark.horizon = (h > 0).then_some(h);
    }
    set(&mut cfg.benchmark.solver.max_iter, a.max_iter);
    let seed = resolve_seed(seed, cfg.seed)?;
    cfg.seed = Some(seed);
    cfg.corruption.seed = seed;
    cfg.benchmark.base_seed = seed;
    cfg.benchmark.validate()?;
    let out = output_dir(cfg.out.take())?;
    cfg.out = Some(out.clone());

    let (truth, _) = corrupt(&kron_sum_covariance(&cfg.truth)?, &cfg.corruption)?;
    let rows = match a.threads {
        None => run_benchmark(&truth, &cfg.benchmark)?,
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| usage!("thread pool: {e}"))?
            .install(|| run_benchmark(&truth, &cfg.benchmark))?,
    };
    write_covariance(&out.join("truth.csv"), truth.matrix(), truth.dims())?;
    write_benchmark_csv(&out.join("benchmark.csv"), &rows)?;
    write_summary(&out.join("summary.csv"), &rows, &cfg.benchmark)?;
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        eprintln!("kronshrink: {failures} of {} benchmark rows failed; see the error column", rows.len());
    }
    write_manifest(&out, "benchmark", seed, &cfg, json!({ "rows": rows.len(), "failures": failures }))
}

/// Medians per estimator and sample size. Rows arrive grouped by estimator
/// position, so specs that share a kind stay separate.
fn write_summary(path: &Path, rows: &[BenchmarkRow], config: &BenchmarkConfig) -> Result<(), Failure> {
    let per_estimator = config.n_grid.len() * config.reps;
    let mut table = Vec::new();
    for (spec, chunk) in config.estimators.iter().zip(rows.chunks(per_estimator)) {
        for &n in &config.n_grid {
            let cell: Vec<&BenchmarkRow> = chunk.iter().filter(|r| r.n == n).collect();
            let opt = |v: Option<f64>| v.map_or(Cell::Text(String::new()), Cell::Real);
            table.push(vec![
                Cell::Text(spec.kind.label().into()),
                Cell::Real(spec.theta_scale),
                Cell::Real(spec.gamma_scale),
                Cell::Int(n),
                opt(median(cell.iter().map(|r| r.mse))),
                opt(median(cell.iter().filter_map(|r| r.prediction_loss))),
                Cell::Int(cell.iter().filter(|r| r.error.is_some()).count()),
            ]);
        }
    }
    write_table(
        path,
        &["estimator", "theta_scale", "gamma_scale", "n", "median_mse", "median_prediction_loss", "failures"],
        table,
    )
}

// spectra, qq

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceInputConfig {
    pub covariance: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn covariance_input(
    config: Option<PathBuf>,
    covariance: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<(CovarianceInputConfig, StCovariance, PathBuf, u64), Failure> {
    let mut cfg = load::<CovarianceInputConfig>(config.as_deref())?;
    set_opt(&mut cfg.covariance, covariance);
    set_opt(&mut cfg.out, out);
    let seed = resolve_seed(seed, cfg.seed)?;
    cfg.seed = Some(seed);
    let input = input_path(cfg.covariance.take(), "--covariance")?;
    let sigma = read_covariance(&input)?;
    cfg.covariance = Some(input);
    let out = output_dir(cfg.out.take())?;
    cfg.out = Some(out.clone());
    Ok((cfg, sigma, out, seed))
}

pub fn spectra(a: SpectraArgs, seed: Option<u64>) -> Result<(), Failure> {
    let (cfg, sigma, out, seed) = covariance_input(a.config, a.covariance, a.out, seed)?;
    let spectrum = kron_spectrum(&sigma)?;
    let mut eig: Vec<f64> = SymmetricEigen::new(sigma.matrix().clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    write_series(&out.join("kron_spectrum.csv"), "sigma", &spectrum.sigmas)?;
    write_series(&out.join("pca_spectrum.csv"), "eigenvalue", &eig)?;
    let rank = spectrum.rank(RANK_TOL);
    write_manifest(&out, "spectra", seed, &cfg, json!({ "separation_rank": rank }))
}

pub fn qq(a: QqArgs, seed: Option<u64>) -> Result<(), Failure> {
    let (cfg, sigma, out, seed) = covariance_input(a.config, a.covariance, a.out, seed)?;
    let qq = qq_data(&sigma)?;
    write_table(
        &out.join("qq.csv"),
        &["normal", "empirical"],
        qq.normal.iter().zip(&qq.empirical).map(|(x, y)| vec![Cell::Real(*x), Cell::Real(*y)]),
    )?;
    write_manifest(&out, "qq", seed, &cfg, json!({ "points": qq.normal.len() }))
}

// incoherence

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncoherenceConfig {
    pub estimate: Option<PathBuf>,
    pub theta: Option<PathBuf>,
    pub gamma: Option<PathBuf>,
    #[serde(with = "lambda_serde::option")]
    pub lambda_theta: Option<f64>,
    #[serde(with = "lambda_serde::option")]
    pub lambda_gamma: Option<f64>,
    pub rank: Option<usize>,
    pub support: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn incoherence(a: IncoherenceArgs, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = load::<IncoherenceConfig>(a.config.as_deref())?;
    set_opt(&mut cfg.estimate, a.estimate);
    set_opt(&mut cfg.theta, a.theta);
    set_opt(&mut cfg.gamma, a.gamma);
    set_opt(&mut cfg.lambda_theta, a.lambda_theta);
    set_opt(&mut cfg.lambda_gamma, a.lambda_gamma);
    set_opt(&mut cfg.rank, a.rank);
    set_opt(&mut cfg.support, a.support);
    set_opt(&mut cfg.out, a.out);
    let seed = resolve_seed(seed, cfg.seed)?;
    cfg.seed = Some(seed);

    if let Some(dir) = cfg.estimate.take() {
        let dir = input_path(Some(dir), "--estimate")?;
        let record: EstimateRecord = read_json(&dir.join("diagnostics.json"))?;
        cfg.theta.get_or_insert_with(|| dir.join("theta_hat.csv"));
        cfg.gamma.get_or_insert_with(|| dir.join("gamma_hat.csv"));
        cfg.lambda_theta.get_or_insert(record.params.lambda_theta);
        cfg.lambda_gamma.get_or_insert(record.params.lambda_gamma);
        cfg.estimate = Some(dir);
    }
    let theta_path = input_path(cfg.theta.take(), "--theta")?;
    let gamma_path = input_path(cfg.gamma.take(), "--gamma")?;
    let theta = read_covariance(&theta_path)?;
    let gamma = read_covariance(&gamma_path)?;
    cfg.theta = Some(theta_path);
    cfg.gamma = Some(gamma_path);
    let (Some(lt), Some(lg)) = (cfg.lambda_theta, cfg.lambda_gamma) else {
        return Err(usage!("set --lambda-theta and --lambda-gamma, or pass --estimate"));
    };
    let params = RegParams::new(lt, lg)?;
    let out = output_dir(cfg.out.take())?;
    cfg.out = Some(out.clone());

    let rank = match cfg.rank {
        Some(r) => r,
        None => kron_spectrum(&theta)?.rank(RANK_TOL),
    };
    let support = match cfg.support {
        Some(s) => s,
        None => rearrange(&gamma).matrix().iter().filter(|v| **v != 0.0).count(),
    };
    let report = incoherence_diagnostic(&theta, &gamma, &params, rank, support)?;
    write_json(&out.join("incoherence.json"), &report)?;
    let names = ["theta_on_support", "theta_perp_on_support", "theta_off_support", "theta_perp_off_support"];
    write_table(
        &out.join("incoherence.csv"),
        &["projection", "max_singular_value"],
        names.iter().zip(report.singular_values).map(|(n, v)| vec![Cell::Text((*n).into()), Cell::Real(v)]),
    )?;
    let results = json!({
        "max_singular_value": report.max_singular_value,
        "within_bound": report.max_singular_value <= report.bound,
        "within_strict_bound": report.max_singular_value <= report.strict_bound,
    });
    write_manifest(&out, "incoherence", seed, &cfg, results)
}

// bootstrap

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub samples: Option<PathBuf>,
    pub fractions: Vec<f64>,
    pub reps: usize,
    #[serde(with = "lambda_serde::option")]
    pub lambda_theta: Option<f64>,
    #[serde(with = "lambda_serde::option")]
    pub lambda_gamma: Option<f64>,
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            samples: None,
            fractions: vec![0.5],
            reps: 20,
            lambda_theta: None,
            lambda_gamma: None,
            solver: SolverConfig::default(),
            out: None,
            seed: None,
        }
    }
}

pub fn bootstrap(a: BootstrapArgs, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = load::<BootstrapConfig>(a.config.as_deref())?;
    set_opt(&mut cfg.samples, a.samples);
    set(&mut cfg.fractions, a.fractions);
    set(&mut cfg.reps, a.reps);
    set_opt(&mut cfg.lambda_theta, a.lambda_theta);
    set_opt(&mut cfg.lambda_gamma, a.lambda_gamma);
    set(&mut cfg.solver.max_iter, a.max_iter);
    set_opt(&mut cfg.out, a.out);
    let seed = resolve_seed(seed, cfg.seed)?;
    cfg.seed = Some(seed);
    let input = input_path(cfg.samples.take(), "--samples")?;
    let samples = read_samples(&input)?;
    cfg.samples = Some(input);
    let (Some(lt), Some(lg)) = (cfg.lambda_theta, cfg.lambda_gamma) else {
        return Err(usage!("set --lambda-theta and --lambda-gamma"));
    };
    let params = RegParams::new(lt, lg)?;
    if cfg.fractions.is_empty() {
        return Err(usage!("no subset fractions given"));
    }
    let out = output_dir(cfg.out.take())?;
    cfg.out = Some(out.clone());

    let mut table = Vec::new();
    for &f in &cfg.fractions {
        let v = bootstrap_temporal_factors(&samples, f, cfg.reps, &params, &cfg.solver, seed)?;
        table.push(vec![Cell::Real(f), Cell::Int(cfg.reps), Cell::Real(v)]);
    }
    write_table(&out.join("bootstrap.csv"), &["fraction", "reps", "rms_variation"], table)?;
    write_manifest(&out, "bootstrap", seed, &cfg, serde_json::Value::Null)
}
