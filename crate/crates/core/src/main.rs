use clap::{Parser, Subcommand, ValueEnum};
use pencil_gauge::apps::{self, AppError, Corruption, HuberVariant, LineSpectrumModel, MmvConfig, RateConfig, RecoveryResult};
use pencil_gauge::conic::Settings;
use pencil_gauge::decomp::{decompose_psd_with, DecompError, DecompOptions};
use pencil_gauge::gauge::{self, DualCertificate, GaugeError};
use pencil_gauge::numkern::{c, cmat_serde, eye, CMat, C64};
use pencil_gauge::pencil::{standard_pencil, AtomSet, Family, PencilSpec};
use pencil_gauge::region::{make_curve, CurveKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const OK: u8 = 0;
const IO: u8 = 1;
const INFEASIBLE: u8 = 2;
const SOLVER: u8 = 3;
const VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "pgauge", version, about = "Atomic norms and gauges for matrix-pencil atom sets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver tolerance (overrides the config).
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, env = "PGAUGE_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decompose a PSD matrix into atoms of a pencil atom set.
    Decompose {
        /// Matrix file: JSON rows of `[re, im]` pairs.
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Run an experiment described by `--config`.
    Experiment {
        #[arg(value_enum)]
        kind: Kind,
    },
    /// Check a dual certificate against an atom set on a curve grid.
    Certcheck {
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Covfit,
    Linespec,
    Doa,
    Mmv,
    Rate,
    MmvRate,
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

type Res<T> = Result<T, Failure>;

fn gauge_code(e: &GaugeError) -> u8 {
    match e {
        GaugeError::NotOptimal(_) | GaugeError::Conic(_) | GaugeError::Num(_) => SOLVER,
        GaugeError::Certificate { .. } => VIOLATION,
        _ => IO,
    }
}

fn decomp_code(e: &DecompError) -> u8 {
    match e {
        DecompError::NotPsd { .. }
        | DecompError::LmiInfeasible { .. }
        | DecompError::Hypothesis { .. }
        | DecompError::CaseDispatch { .. } => INFEASIBLE,
        DecompError::Num(_) => SOLVER,
        _ => IO,
    }
}

impl From<AppError> for Failure {
    fn from(e: AppError) -> Self {
        let code = match &e {
            AppError::Input(_) | AppError::Pencil(_) | AppError::Region(_) => IO,
            AppError::Infeasible(_) => INFEASIBLE,
            AppError::Solver { .. } => SOLVER,
            AppError::Gauge(g) => gauge_code(g),
            AppError::Decomp(d) => decomp_code(d),
        };
        fail(code, e.to_string())
    }
}

impl From<GaugeError> for Failure {
    fn from(e: GaugeError) -> Self {
        fail(gauge_code(&e), e.to_string())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Res<T> {
    let text = fs::read_to_string(path).map_err(|e| fail(IO, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fail(IO, format!("{}: {e}", path.display())))
}

fn config<T: DeserializeOwned>(cli: &Cli) -> Res<T> {
    let path = cli.config.as_ref().ok_or_else(|| fail(IO, "--config is required"))?;
    read_json(path)
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(cli: &Cli) -> Res<Self> {
        let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("pgauge-out"));
        fs::create_dir_all(&dir).map_err(|e| fail(IO, format!("{}: {e}", dir.display())))?;
        Ok(Output { dir })
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Res<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| fail(IO, e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| fail(IO, format!("{}: {e}", path.display())))
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Res<()> {
        let path = self.dir.join(name);
        let io = |e: csv::Error| fail(IO, format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        for r in rows {
            w.serialize(r).map_err(io)?;
        }
        w.flush().map_err(|e| fail(IO, format!("{}: {e}", path.display())))
    }
}

/// Atom set description shared by `decompose` and `certcheck`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomSetSpec {
    pencil: Family,
    curve: CurveKind,
    /// Explicit `E` for the (first) block.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_cmat")]
    e: Option<CMat>,
    /// `E = e_scale · I` for the (first) block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e_scale: Option<f64>,
    /// Appends a free block of this size with `E = I` (column-structure programs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    columns: Option<usize>,
}

mod opt_cmat {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<CMat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(cmat_serde::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMat>, D::Error> {
        let rows: Option<Vec<Vec<C64>>> = Option::deserialize(d)?;
        rows.map(|r| cmat_serde::from_rows(&r).map_err(serde::de::Error::custom)).transpose()
    }
}

impl AtomSetSpec {
    fn build(&self) -> Result<AtomSet, AppError> {
        let mut p = standard_pencil(&self.pencil)?;
        if let Some(e) = &self.e {
            p = p.with_e(e.clone())?;
        }
        if let Some(s) = self.e_scale {
            let e = &p.e * c(s, 0.0);
            p = p.with_e(e)?;
        }
        if let Some(m) = self.columns {
            p = PencilSpec::two_block((p.f, p.g, p.e), (CMat::zeros(0, m), CMat::zeros(0, m), eye(m)))?;
        }
        Ok(AtomSet::new(p, make_curve(self.curve)?)?)
    }
}

#[derive(Serialize)]
struct SpectrumRow {
    omega_or_theta: f64,
    magnitude: f64,
}

fn settings(cli: &Cli, cfg_eps: Option<f64>, seed: u64) -> Res<Settings> {
    let mut st = Settings { seed, ..Settings::default() };
    if let Some(e) = cli.eps.or(cfg_eps) {
        if !(e > 0.0 && e < 1.0) {
            return Err(fail(IO, format!("eps must lie in (0, 1), got {e}")));
        }
        st.eps = e;
    }
    Ok(st)
}

fn spectrum(axis: &[f64], mags: &[f64]) -> Vec<SpectrumRow> {
    let mut rows: Vec<SpectrumRow> =
        axis.iter().zip(mags).map(|(&w, &m)| SpectrumRow { omega_or_theta: w, magnitude: m }).collect();
    rows.sort_by(|a, b| a.omega_or_theta.total_cmp(&b.omega_or_theta));
    rows
}

fn print_atoms(label: &str, axis: &[f64], mags: &[f64]) {
    println!("{:>4}  {:>12}  {:>12}", "k", label, "magnitude");
    for (k, row) in spectrum(axis, mags).iter().enumerate() {
        println!("{k:>4}  {:>12.6}  {:>12.6}", row.omega_or_theta, row.magnitude);
    }
}

fn print_summary(res: &RecoveryResult) {
    println!("status {:?}, {} iterations", res.status, res.iterations);
    println!("objective {:.9}  dual {:.9}", res.objective, res.dual_objective);
    if let Some(t) = res.noise_estimate {
        println!("noise estimate {t:.6}");
    }
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    kind: &'a str,
    seed: u64,
    eps: f64,
    config: &'a C,
    result: R,
}

fn uniform_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1).max(1) as f64).collect()
}

/// Writes the certificate, its atom set, and the dual polynomial on `grid`.
fn write_certificate(out: &Output, res: &RecoveryResult, spec: &AtomSetSpec, grid: &[f64], axis: &[f64]) -> Res<()> {
    let Some(cert) = &res.certificate else { return Ok(()) };
    out.json("certificate.json", cert)?;
    out.json("atom_set.json", spec)?;
    let aset = spec.build()?;
    let vals = gauge::dual_polynomial(cert, &aset, grid)?;
    let rows: Vec<SpectrumRow> = axis.iter().zip(vals).map(|(&w, v)| SpectrumRow { omega_or_theta: w, magnitude: v }).collect();
    out.csv("dual_polynomial.csv", &rows)
}

fn default_grid() -> usize {
    512
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CovfitRun {
    n: usize,
    samples: usize,
    model: LineSpectrumModel,
    gamma: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    eps: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinespecRun {
    samples: usize,
    model: LineSpectrumModel,
    #[serde(default)]
    corruption: Option<Corruption>,
    gamma: f64,
    #[serde(default = "one")]
    delta: f64,
    omega_c: f64,
    #[serde(default = "vector")]
    variant: HuberVariant,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    eps: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn vector() -> HuberVariant {
    HuberVariant::Vector
}

fn pi() -> f64 {
    PI
}

fn yes() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DoaRun {
    n: usize,
    sources: Vec<f64>,
    measurements: usize,
    #[serde(default = "pi")]
    alpha: f64,
    #[serde(default = "yes")]
    constrained: bool,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    eps: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MmvRun {
    n: usize,
    sensors: usize,
    sources: Vec<f64>,
    magnitudes: Vec<f64>,
    alpha: f64,
    theta_c: f64,
    m: usize,
    #[serde(default)]
    noise: f64,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    eps: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateRun {
    n: usize,
    sources: Vec<f64>,
    measurement_counts: Vec<usize>,
    trials: usize,
    #[serde(default = "yes")]
    with_intervals: bool,
    #[serde(default = "pi")]
    alpha: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    eps: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MmvRateRun {
    n: usize,
    sensors: usize,
    sources: Vec<f64>,
    magnitudes: Vec<f64>,
    alpha: f64,
    theta_c: f64,
    snapshots: Vec<usize>,
    trials: usize,
    #[serde(default)]
    noise: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    eps: Option<f64>,
}

fn run_covfit(cli: &Cli, out: &Output) -> Res<()> {
    let cfg: CovfitRun = config(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let st = settings(cli, cfg.eps, seed)?;
    let y = apps::synth_signal(&cfg.model, cfg.samples, None, seed)?;
    let r = apps::sample_covariance(&y, cfg.n)?;
    let mut res = apps::covfit(&r, cfg.gamma, &st)?;
    res.score(&cfg.model.omegas, 0.05);
    print_summary(&res);
    print_atoms("omega", &res.estimated.omegas, &res.estimated.magnitudes);
    out.json("result.json", &Report { kind: "covfit", seed, eps: st.eps, config: &cfg, result: &res })?;
    out.csv("spectrum.csv", &spectrum(&res.estimated.omegas, &res.estimated.magnitudes))?;
    let spec = AtomSetSpec {
        pencil: Family::Toeplitz { n: cfg.n },
        curve: CurveKind::UnitCircle,
        e: None,
        e_scale: Some(1.0 / (cfg.n as f64).sqrt()),
        columns: None,
    };
    let grid = uniform_grid(-PI, PI, 512);
    write_certificate(out, &res, &spec, &grid, &grid)
}

fn run_linespec(cli: &Cli, out: &Output) -> Res<()> {
    let cfg: LinespecRun = config(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let st = settings(cli, cfg.eps, seed)?;
    let y = apps::synth_signal(&cfg.model, cfg.samples, cfg.corruption, seed)?;
    let mut res = apps::linespec_huber(&y, cfg.gamma, cfg.delta, cfg.omega_c, cfg.variant, &st)?;
    res.score(&cfg.model.omegas, 0.02);
    print_summary(&res);
    print_atoms("omega", &res.estimated.omegas, &res.estimated.magnitudes);
    out.json("result.json", &Report { kind: "linespec", seed, eps: st.eps, config: &cfg, result: &res })?;
    out.csv("spectrum.csv", &spectrum(&res.estimated.omegas, &res.estimated.magnitudes))
}

fn run_doa(cli: &Cli, out: &Output) -> Res<()> {
    let cfg: DoaRun = config(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let st = settings(cli, cfg.eps, seed)?;
    let rc = RateConfig {
        n: cfg.n,
        sources: cfg.sources.clone(),
        measurement_counts: vec![cfg.measurements],
        trials: 1,
        with_intervals: cfg.constrained,
        alpha: cfg.alpha,
    };
    let (mut prob, truth) = apps::doa_instance(&rc, cfg.measurements, seed)?;
    prob.constrained = cfg.constrained;
    let res = apps::doa_intervals(&prob, &st)?;
    let exact = apps::exact_recovery(&res, &truth, 1e-3);
    print_summary(&res);
    let thetas = res.estimated.thetas.clone().unwrap_or_default();
    print_atoms("theta", &thetas, &res.estimated.magnitudes);
    println!("exact recovery: {exact}");
    #[derive(Serialize)]
    struct DoaOut<'a> {
        problem: &'a apps::DoaProblem,
        exact_recovery: bool,
        recovery: &'a RecoveryResult,
    }
    out.json(
        "result.json",
        &Report { kind: "doa", seed, eps: st.eps, config: &cfg, result: DoaOut { problem: &prob, exact_recovery: exact, recovery: &res } },
    )?;
    out.csv("spectrum.csv", &spectrum(&thetas, &res.estimated.magnitudes))
}

fn run_mmv(cli: &Cli, out: &Output) -> Res<()> {
    let cfg: MmvRun = config(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let st = settings(cli, cfg.eps, seed)?;
    let mc = MmvConfig {
        n: cfg.n,
        sensors: cfg.sensors,
        sources: cfg.sources.clone(),
        magnitudes: cfg.magnitudes.clone(),
        alpha: cfg.alpha,
        theta_c: cfg.theta_c,
        snapshots: vec![cfg.m],
        trials: 1,
        noise: cfg.noise,
    };
    let (idx, b) = apps::mmv_instance(&mc, cfg.m, seed)?;
    let res = apps::doa_mmv(&b, &idx, cfg.theta_c, cfg.alpha, cfg.n, &st)?;
    let exact = apps::exact_recovery(&res, &cfg.sources, 1e-3);
    print_summary(&res);
    let thetas = res.estimated.thetas.clone().unwrap_or_default();
    print_atoms("theta", &thetas, &res.estimated.magnitudes);
    println!("exact recovery: {exact}");
    #[derive(Serialize)]
    struct MmvOut<'a> {
        sensors: &'a [usize],
        exact_recovery: bool,
        recovery: &'a RecoveryResult,
    }
    out.json("result.json", &Report { kind: "mmv", seed, eps: st.eps, config: &cfg, result: MmvOut { sensors: &idx, exact_recovery: exact, recovery: &res } })?;
    out.csv("spectrum.csv", &spectrum(&thetas, &res.estimated.magnitudes))?;
    if let Some(cert) = &res.certificate {
        out.json("certificate.json", cert)?;
        let axis = uniform_grid(-PI / 2.0, PI / 2.0, cfg.grid.max(2));
        let omegas: Vec<f64> = axis.iter().map(|t| cfg.alpha * t.sin()).collect();
        let vals = apps::mmv_dual_polynomial(&res, cfg.n, &omegas)?;
        let rows: Vec<SpectrumRow> = axis.iter().zip(vals).map(|(&t, v)| SpectrumRow { omega_or_theta: t, magnitude: v }).collect();
        out.csv("dual_polynomial.csv", &rows)?;
    }
    Ok(())
}

fn run_rate(cli: &Cli, out: &Output) -> Res<()> {
    let cfg: RateRun = config(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let st = settings(cli, cfg.eps, seed)?;
    let rc = RateConfig {
        n: cfg.n,
        sources: cfg.sources.clone(),
        measurement_counts: cfg.measurement_counts.clone(),
        trials: cfg.trials,
        with_intervals: cfg.with_intervals,
        alpha: cfg.alpha,
    };
    let rows = apps::recovery_rate(&rc, seed, &st)?;
    println!("{:>12}  {:>10}  {:>12}", "measurements", "with", "without");
    for r in &rows {
        let w = r.rate_with.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:>12}  {:>10}  {:>12.3}", r.measurement_count, w, r.rate_without);
    }
    out.json("result.json", &Report { kind: "rate", seed, eps: st.eps, config: &cfg, result: &rows })?;
    out.csv("rate.csv", &rows)
}

fn run_mmv_rate(cli: &Cli, out: &Output) -> Res<()> {
    let cfg: MmvRateRun = config(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let st = settings(cli, cfg.eps, seed)?;
    let mc = MmvConfig {
        n: cfg.n,
        sensors: cfg.sensors,
        sources: cfg.sources.clone(),
        magnitudes: cfg.magnitudes.clone(),
        alpha: cfg.alpha,
        theta_c: cfg.theta_c,
        snapshots: cfg.snapshots.clone(),
        trials: cfg.trials,
        noise: cfg.noise,
    };
    let rows = apps::mmv_rate(&mc, seed, &st)?;
    println!("{:>9}  {:>6}", "snapshots", "rate");
    for r in &rows {
        println!("{:>9}  {:>6.3}", r.snapshots, r.rate);
    }
    out.json("result.json", &Report { kind: "mmv_rate", seed, eps: st.eps, config: &cfg, result: &rows })?;
    out.csv("mmv_rate.csv", &rows)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecomposeRun {
    #[serde(flatten)]
    atoms: AtomSetFields,
    #[serde(default)]
    rank_tol: Option<f64>,
}

/// `AtomSetSpec` fields; kept separate so `flatten` can be used.
#[derive(Debug, Deserialize)]
struct AtomSetFields {
    pencil: Family,
    curve: CurveKind,
    #[serde(default, with = "opt_cmat")]
    e: Option<CMat>,
    #[serde(default)]
    e_scale: Option<f64>,
    #[serde(default)]
    columns: Option<usize>,
}

impl From<AtomSetFields> for AtomSetSpec {
    fn from(f: AtomSetFields) -> Self {
        AtomSetSpec { pencil: f.pencil, curve: f.curve, e: f.e, e_scale: f.e_scale, columns: f.columns }
    }
}

fn run_decompose(cli: &Cli, matrix: &Path) -> Res<()> {
    let cfg: DecomposeRun = config(cli)?;
    let rows: Vec<Vec<C64>> = read_json(matrix)?;
    let x = cmat_serde::from_rows(&rows).map_err(|e| fail(IO, format!("{}: {e}", matrix.display())))?;
    if x.nrows() != x.ncols() {
        return Err(fail(IO, "matrix must be square"));
    }
    let defect = (&x - x.adjoint()).norm();
    if defect > 1e-9 * (1.0 + x.norm()) {
        return Err(fail(INFEASIBLE, format!("matrix is not Hermitian (defect {defect:.3e})")));
    }
    let spec: AtomSetSpec = cfg.atoms.into();
    let aset = spec.build()?;
    let mut opt = DecompOptions::default();
    if let Some(t) = cfg.rank_tol {
        opt.rank_tol = t;
    }
    let d = decompose_psd_with(&x, &aset, opt).map_err(|e| fail(decomp_code(&e), e.to_string()))?;
    println!("rank {}  residual {:.3e}", d.len(), d.residual);
    println!("{:>4}  {:>28}  {:>12}", "k", "point (mu : nu)", "weight");
    for (k, (p, w)) in d.points.iter().zip(&d.weights).enumerate() {
        println!("{k:>4}  {:>28}  {w:>12.6}", format!("({:.4}{:+.4}i : {:.4}{:+.4}i)", p.mu.re, p.mu.im, p.nu.re, p.nu.im));
    }
    let out = Output::new(cli)?;
    #[derive(Serialize)]
    struct DecompOut<'a> {
        rank: usize,
        residual: f64,
        atoms: &'a pencil_gauge::decomp::AtomicDecomposition,
    }
    out.json("decomposition.json", &DecompOut { rank: d.len(), residual: d.residual, atoms: &d })
}

fn run_certcheck(cli: &Cli, certificate: &Path, grid: usize) -> Res<()> {
    let spec: AtomSetSpec = config(cli)?;
    let cert: DualCertificate = read_json(certificate)?;
    let aset = spec.build()?;
    let rep = gauge::certificate_check(&cert, &aset, grid)?;
    println!("max violation {:.3e}", rep.max_violation);
    println!("{} active grid points", rep.active_points.len());
    for p in &rep.active_points {
        let label = p.lambda().map_or("inf".to_string(), |l| format!("{:.6}{:+.6}i", l.re, l.im));
        println!("  lambda = {label}");
    }
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).map_err(|e| fail(IO, format!("{}: {e}", dir.display())))?;
        Output { dir: dir.clone() }.json("certcheck.json", &rep)?;
    }
    if rep.max_violation <= 1e-5 {
        Ok(())
    } else {
        if let Some(p) = &rep.worst_point {
            let label = p.lambda().map_or("inf".to_string(), |l| format!("{:.6}{:+.6}i", l.re, l.im));
            println!("worst violation at lambda = {label}");
        }
        Err(fail(VIOLATION, format!("certificate violated by {:.3e}", rep.max_violation)))
    }
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Decompose { matrix } => run_decompose(cli, matrix),
        Cmd::Certcheck { certificate, grid } => run_certcheck(cli, certificate, *grid),
        Cmd::Experiment { kind } => {
            let out = Output::new(cli)?;
            let t0 = Instant::now();
            match kind {
                Kind::Covfit => run_covfit(cli, &out),
                Kind::Linespec => run_linespec(cli, &out),
                Kind::Doa => run_doa(cli, &out),
                Kind::Mmv => run_mmv(cli, &out),
                Kind::Rate => run_rate(cli, &out),
                Kind::MmvRate => run_mmv_rate(cli, &out),
            }?;
            println!("elapsed {:.3} s, output in {}", t0.elapsed().as_secs_f64(), out.dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { IO } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::from(OK),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
