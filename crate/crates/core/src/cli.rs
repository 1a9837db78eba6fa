//! Configuration files and the four `isac` commands.
//!
//! A run is described by one JSON document ([`RunConfig`]). Every command
//! writes its files atomically and maps failures onto fixed exit codes:
//! 0 success, 1 failed verification, 2 bad configuration, 3 numerical failure.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bfim::{bfim, bfim_direct, build_choi, extract_operators, OperatorBank, DEFAULT_TRUNCATION_TOL};
use crate::comm::{nats_to_bits, waterfill, ConstantForm};
use crate::covopt::{gradient, objective, solve_sensing_optimal, GaussianBlock, Init, SolverOptions};
use crate::covopt::jensen_gap_samples;
use crate::error::Error;
use crate::linalg::{c, frobenius, inner_re, random_hermitian, random_psd, CMatrix};
use crate::mc::{self, Estimate};
use crate::model::{CommChannelModel, Scenario, SensingModel};
use crate::region::{compute_region, McOptions, Z99};
use crate::waveform::{gaussian_waveform, sample_covariance, shc_generate, WaveformKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(msg: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: format!("config error: {msg}"),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        CliError {
            code: EXIT_NUMERICAL,
            message: format!("cannot write {}: {err}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Stage { stage: "config", .. } => EXIT_CONFIG,
            _ => EXIT_NUMERICAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Complex matrix given row by row as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> crate::Result<CMatrix> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || self.re.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("matrix rows must be non-empty and of equal length"));
        }
        if let Some(im) = &self.im {
            if im.len() != rows || im.iter().any(|r| r.len() != cols) {
                return Err(Error::invalid("imaginary part must have the same shape as the real part"));
            }
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            c(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SensingModelConfig {
    /// `H_s = eta`, prior `N(0, prior_variance)`.
    Scalar { prior_variance: f64 },
    /// `2 N_s M` prior variances ordered `[Re vec(H_s); Im vec(H_s)]`.
    LinearGaussian { variances: Vec<f64> },
    /// Prior over `(Re alpha, Im alpha, theta)`.
    RankOneTarget { mean: [f64; 3], variances: [f64; 3] },
    AngleOnlyTarget { gain: [f64; 2], theta_mean: f64, theta_var: f64 },
}

impl SensingModelConfig {
    pub fn build(&self, scenario: &Scenario) -> crate::Result<SensingModel> {
        let (n_s, m) = (scenario.n_s, scenario.m);
        let model = match self {
            SensingModelConfig::Scalar { prior_variance } => SensingModel::scalar(*prior_variance)?,
            SensingModelConfig::LinearGaussian { variances } => SensingModel::linear_gaussian(n_s, m, variances.clone())?,
            SensingModelConfig::RankOneTarget { mean, variances } => {
                SensingModel::rank_one_target(n_s, m, *mean, *variances)?
            }
            SensingModelConfig::AngleOnlyTarget {
                gain,
                theta_mean,
                theta_var,
            } => SensingModel::angle_only_target(n_s, m, c(gain[0], gain[1]), *theta_mean, *theta_var)?,
        };
        model.check_against(scenario)?;
        Ok(model)
    }
}

fn unit_variance() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommModelConfig {
    IidGaussian {
        #[serde(default = "unit_variance")]
        variance: f64,
    },
    Fixed(MatrixSpec),
}

impl CommModelConfig {
    pub fn build(&self, scenario: &Scenario) -> crate::Result<CommChannelModel> {
        let model = match self {
            CommModelConfig::IidGaussian { variance } => CommChannelModel::IidGaussian {
                n_c: scenario.n_c,
                m: scenario.m,
                variance: *variance,
            },
            CommModelConfig::Fixed(spec) => CommChannelModel::Fixed(spec.to_matrix()?),
        };
        model.check_against(scenario)?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub x_tol: f64,
    pub armijo_c1: f64,
    pub armijo_shrink: f64,
    pub rank_eig_tol: f64,
    /// Initial covariance; the scaled identity when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<MatrixSpec>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig {
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            x_tol: d.x_tol,
            armijo_c1: d.armijo_c1,
            armijo_shrink: d.armijo_shrink,
            rank_eig_tol: d.rank_eig_tol,
            init: None,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> crate::Result<SolverOptions> {
        let opts = SolverOptions {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            x_tol: self.x_tol,
            armijo_c1: self.armijo_c1,
            armijo_shrink: self.armijo_shrink,
            rank_eig_tol: self.rank_eig_tol,
            init: match &self.init {
                Some(spec) => Init::Given(spec.to_matrix()?),
                None => Init::ScaledIdentity,
            },
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "isac-out".into(),
            formats: vec![OutputFormat::Json, OutputFormat::Csv],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformChoice {
    Shc,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformConfig {
    pub kind: WaveformChoice,
    pub blocks: usize,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        WaveformConfig {
            kind: WaveformChoice::Shc,
            blocks: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub fd_step: f64,
    pub jacobian_tol: f64,
    pub gradient_tol: f64,
    /// Random feasible points (and prior draws) probed by the derivative checks.
    pub points: usize,
    pub directions: usize,
    pub bfim_samples: usize,
    pub bfim_tol: f64,
    pub jensen_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            fd_step: 1e-6,
            jacobian_tol: 1e-5,
            gradient_tol: 1e-5,
            points: 5,
            directions: 5,
            bfim_samples: 100_000,
            bfim_tol: 0.05,
            jensen_samples: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub sensing_model: SensingModelConfig,
    pub comm_model: CommModelConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub mc: McOptions,
    #[serde(default)]
    pub rate_constant: ConstantForm,
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub waveform: WaveformConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

/// Fully built inputs of a run.
pub struct Prepared {
    pub config: RunConfig,
    pub sensing: SensingModel,
    pub comm: CommChannelModel,
    pub solver: SolverOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(CliError::config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn prepare(self) -> CliResult<Prepared> {
        let checked = |r: crate::Result<()>| r.map_err(CliError::config);
        checked(self.scenario.validate())?;
        checked(self.mc.validate())?;
        if self.output.formats.is_empty() {
            return Err(CliError::config("output.formats must list at least one format"));
        }
        let sensing = self.sensing_model.build(&self.scenario).map_err(CliError::config)?;
        let comm = self.comm_model.build(&self.scenario).map_err(CliError::config)?;
        let solver = self.solver.options().map_err(CliError::config)?;
        Ok(Prepared {
            config: self,
            sensing,
            comm,
            solver,
        })
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serialisable report");
    bytes.push(b'\n');
    bytes
}

fn wants(cfg: &RunConfig, format: OutputFormat) -> bool {
    cfg.output.formats.contains(&format)
}

/// Writes a complex matrix as CSV with `re,im` pairs per column.
pub fn matrix_csv(m: &CMatrix) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|z| format!("{:.16e},{:.16e}", z.re, z.im)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn operator_bank(p: &Prepared, rng: &mut ChaCha8Rng) -> crate::Result<OperatorBank> {
    let choi = build_choi(&p.sensing, p.config.mc.choi_samples, rng).map_err(|e| e.in_stage("build_choi"))?;
    extract_operators(&choi, &p.config.scenario, &p.sensing, DEFAULT_TRUNCATION_TOL).map_err(|e| e.in_stage("extract_operators"))
}

fn estimate_bits(e: &Estimate) -> serde_json::Value {
    json!({ "mean": nats_to_bits(e.mean), "std_err": nats_to_bits(e.std_err), "n": e.n })
}

/// `isac region`: report.json and region.csv.
pub fn cmd_region(p: &Prepared, out_dir: &Path, verbose: bool, log: &mut dyn Write) -> CliResult<()> {
    let cfg = &p.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let res = compute_region(&cfg.scenario, &p.sensing, &p.comm, &p.solver, &cfg.mc, cfg.rate_constant, &mut rng)?;
    let meta = &res.bound.meta;
    let timings: serde_json::Map<String, serde_json::Value> =
        res.timings.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    let report = json!({
        "config": cfg,
        "units": {
            "epsilon": "trace of the BCRB, squared parameter units",
            "rate": "bits per symbol",
            "constants": "nats per symbol",
        },
        "eps_min": res.eps_min,
        "eps1": { "mean": res.eps1.estimate.mean, "std_err": res.eps1.estimate.std_err, "n": res.eps1.estimate.n, "clamped": res.eps1.clamped },
        "r_max_bits": estimate_bits(&res.r_max),
        "r1_bits": {
            "value": res.r1.r1_bits(),
            "std_err": nats_to_bits(res.r1.estimate.std_err),
            "form": cfg.rate_constant,
            "by_form": {
                "consistent": nats_to_bits(res.r1_variants.consistent),
                "appendix": nats_to_bits(res.r1_variants.appendix),
                "statement": nats_to_bits(res.r1_variants.statement),
            },
            "min_snr": res.r1.min_snr,
        },
        "constants": res.constants,
        "vertices": res.bound.vertices,
        "segment": res.bound.segment,
        "metrics": {
            "alpha": meta.alpha,
            "beta": meta.beta,
            "beta_upper_99": res.beta_upper,
            "zeta": meta.zeta,
            "m_sc": meta.m_sc,
            "m_cs": meta.m_cs,
            "rank_sc": meta.rank_sc,
        },
        "solver": {
            "kkt_residual": res.solution.kkt_residual,
            "iterations": res.solution.iterations,
            "converged": res.solution.converged,
            "operator_ranks": [res.operator_ranks.0, res.operator_ranks.1],
        },
        "warnings": res.warnings,
        "timings_s": timings,
    });
    if wants(cfg, OutputFormat::Json) {
        write_atomic(&out_dir.join("report.json"), &to_json_bytes(&report))?;
    }
    if wants(cfg, OutputFormat::Csv) {
        let mut csv = Vec::new();
        res.bound.write_csv(&mut csv).expect("write to memory");
        write_atomic(&out_dir.join("region.csv"), &csv)?;
    }
    let _ = writeln!(
        log,
        "eps_min = {:.6e}  eps1 = {:.6e}  R1 = {:.6} bits  R_max = {:.6} bits",
        res.eps_min,
        res.eps1.estimate.mean,
        res.r1.r1_bits(),
        nats_to_bits(res.r_max.mean)
    );
    for w in &res.warnings {
        let _ = writeln!(log, "warning: {w}");
    }
    if verbose {
        for (stage, secs) in &res.timings {
            let _ = writeln!(log, "  {stage:<24} {secs:>10.4} s");
        }
    }
    Ok(())
}

/// `isac solve-cov`: r_opt.csv and solution.json.
pub fn cmd_solve_cov(p: &Prepared, out_dir: &Path, _verbose: bool, log: &mut dyn Write) -> CliResult<()> {
    let cfg = &p.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bank = operator_bank(p, &mut rng)?;
    let sol = solve_sensing_optimal(&bank, &cfg.scenario, &p.solver).map_err(|e| e.in_stage("solve_sensing_optimal"))?;
    let summary = json!({
        "config": cfg,
        "crb": sol.crb,
        "objective": sol.objective,
        "kkt_residual": sol.kkt_residual,
        "lambda": sol.lambda,
        "rank": sol.rank,
        "rank_bound": p.sensing.k().min(cfg.scenario.m),
        "iterations": sol.iterations,
        "converged": sol.converged,
    });
    if wants(cfg, OutputFormat::Json) {
        write_atomic(&out_dir.join("solution.json"), &to_json_bytes(&summary))?;
    }
    if wants(cfg, OutputFormat::Csv) {
        write_atomic(&out_dir.join("r_opt.csv"), matrix_csv(&sol.r_opt).as_bytes())?;
    }
    let _ = writeln!(
        log,
        "crb = {:.6e}  rank = {}  kkt = {:.3e}  iterations = {}{}",
        sol.crb,
        sol.rank,
        sol.kkt_residual,
        sol.iterations,
        if sol.converged { "" } else { "  (not converged)" }
    );
    Ok(())
}

/// `isac waveform`: one CSV per block plus manifest.json.
pub fn cmd_waveform(
    p: &Prepared,
    kind: WaveformChoice,
    blocks: usize,
    out_dir: &Path,
    _verbose: bool,
    log: &mut dyn Write,
) -> CliResult<()> {
    let cfg = &p.config;
    let s = &cfg.scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let kind_tag = match kind {
        WaveformChoice::Shc => WaveformKind::Shc,
        WaveformChoice::Gaussian => WaveformKind::Gaussian,
    };
    let r_sc = if kind == WaveformChoice::Shc && blocks > 0 {
        let bank = operator_bank(p, &mut rng)?;
        Some(solve_sensing_optimal(&bank, s, &p.solver).map_err(|e| e.in_stage("solve_sensing_optimal"))?.r_opt)
    } else {
        None
    };
    let rank_tol = p.solver.rank_eig_tol;
    let rows: Vec<crate::Result<(crate::waveform::Waveform, serde_json::Value)>> =
        mc::map_samples(&mut rng, blocks, |r| {
            let h = p.comm.draw(r);
            match kind {
                WaveformChoice::Shc => {
                    let r_sc = r_sc.as_ref().expect("sensing optimum");
                    let w = shc_generate(&h, r_sc, s, rank_tol, r)?;
                    let g = &h * r_sc * h.adjoint();
                    let residual = frobenius(&(sample_covariance(&(&h * &w.x)) - &g)) / frobenius(&g);
                    let cov_err = frobenius(&(&w.sample_cov - r_sc)) / frobenius(r_sc);
                    let info = json!({ "trace": w.sample_cov.trace().re, "identity_residual": residual, "cov_rel_error": cov_err });
                    Ok((w, info))
                }
                WaveformChoice::Gaussian => {
                    let r_cs = waterfill(&h, s.total_power(), s.sigma_c2)?.r_cs;
                    let w = gaussian_waveform(&r_cs, s.t, r)?;
                    let cov_err = frobenius(&(&w.sample_cov - &r_cs)) / frobenius(&r_cs);
                    let info = json!({ "trace": w.sample_cov.trace().re, "cov_rel_error": cov_err });
                    Ok((w, info))
                }
            }
        });
    let mut entries = Vec::with_capacity(blocks);
    for (i, row) in rows.into_iter().enumerate() {
        let (w, mut info) = row.map_err(|e| CliError::from(e.in_stage("waveform")))?;
        let name = format!("block_{i:04}.csv");
        let mut csv = Vec::new();
        w.write_csv(&mut csv).expect("write to memory");
        write_atomic(&out_dir.join(&name), &csv)?;
        info["file"] = json!(name);
        entries.push(info);
    }
    let manifest = json!({
        "kind": kind_tag,
        "m": s.m,
        "t": s.t,
        "layout": "M rows, 2T columns of interleaved re,im",
        "blocks": entries,
    });
    write_atomic(&out_dir.join("manifest.json"), &to_json_bytes(&manifest))?;
    let _ = writeln!(log, "wrote {blocks} {} block(s) to {}", serde_json::to_string(&kind_tag).unwrap_or_default(), out_dir.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `true` when `value` must not exceed `threshold`, `false` when it must not fall below.
    pub upper: bool,
    pub pass: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn print(&self, out: &mut dyn Write, verbose: bool) {
        let _ = writeln!(out, "{:<22} {:>14} {:>14}  result", "check", "value", "threshold");
        for c in &self.checks {
            let cmp = if c.upper { "<=" } else { ">=" };
            let _ = write!(
                out,
                "{:<22} {:>14.6e} {cmp}{:>12.3e}  {}",
                c.name,
                c.value,
                c.threshold,
                if c.pass { "PASS" } else { "FAIL" }
            );
            if verbose {
                let _ = write!(out, "  ({:.3} s)", c.seconds);
            }
            let _ = writeln!(out);
        }
    }
}

fn push_check(checks: &mut Vec<Check>, name: &str, value: f64, threshold: f64, upper: bool, start: Instant) {
    let pass = if upper { value <= threshold } else { value >= threshold };
    checks.push(Check {
        name: name.into(),
        value,
        threshold,
        upper,
        pass: pass && value.is_finite(),
        seconds: start.elapsed().as_secs_f64(),
    });
}

/// Oracle suite behind `isac verify`, usable with any sensing model.
pub fn run_verify(
    scenario: &Scenario,
    sensing: &SensingModel,
    solver: &SolverOptions,
    mc_opts: &McOptions,
    vcfg: &VerifyConfig,
    seed: u64,
) -> crate::Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..vcfg.points.max(1) {
        let eta = sensing.prior().sample(&mut rng);
        let analytic = sensing.jacobian(&eta)?;
        let fd = sensing.finite_diff_jacobian(&eta, vcfg.fd_step)?;
        worst = worst.max(frobenius(&(&analytic - &fd)) / frobenius(&fd).max(1e-12));
    }
    push_check(&mut checks, "jacobian-vs-fd", worst, vcfg.jacobian_tol, true, t0);

    let t0 = Instant::now();
    let choi = build_choi(sensing, mc_opts.choi_samples, &mut rng).map_err(|e| e.in_stage("build_choi"))?;
    let bank = extract_operators(&choi, scenario, sensing, DEFAULT_TRUNCATION_TOL)?;
    let gamma = scenario.total_power();
    let m = scenario.m;
    let mut worst = 0.0f64;
    for _ in 0..vcfg.points.max(1) {
        let r = random_psd(&mut rng, m, m, gamma);
        let g = gradient(&bank, &r)?;
        for _ in 0..vcfg.directions.max(1) {
            let d = random_hermitian(&mut rng, m);
            let h = vcfg.fd_step;
            let fd = (objective(&bank, &(&r + d.map(|z| z * h)))? - objective(&bank, &(&r - d.map(|z| z * h)))?) / (2.0 * h);
            let an = inner_re(&g, &d);
            // directions nearly orthogonal to G are judged against the scale of G
            let scale = an.abs().max(1e-3 * frobenius(&g) * frobenius(&d));
            worst = worst.max((fd - an).abs() / scale);
        }
    }
    push_check(&mut checks, "gradient-vs-fd", worst, vcfg.gradient_tol, true, t0);

    let t0 = Instant::now();
    let x = crate::linalg::complex_gaussian_matrix(&mut rng, m, scenario.t).map(|z| z * scenario.p_t.sqrt());
    let closed = bfim(&bank, &sample_covariance(&x))?;
    let direct = bfim_direct(sensing, scenario, &x, vcfg.bfim_samples, &mut rng)?;
    let err = (&direct - &closed).norm() / closed.norm();
    push_check(&mut checks, "bfim-vs-direct", err, vcfg.bfim_tol, true, t0);

    let t0 = Instant::now();
    let sol = solve_sensing_optimal(&bank, scenario, solver).map_err(|e| e.in_stage("solve_sensing_optimal"))?;
    let sampler = GaussianBlock::new(&sol.r_opt, scenario.t)?;
    let gaps = jensen_gap_samples(&bank, sol.crb, &sampler, vcfg.jensen_samples, &mut rng)?;
    let gap = Estimate::from_samples(&gaps);
    push_check(&mut checks, "jensen-gap-lower99", gap.lower(Z99), 0.0, false, t0);

    let t0 = Instant::now();
    push_check(&mut checks, "rank-bound", sol.rank as f64, sensing.k().min(m) as f64, true, t0);
    let t0 = Instant::now();
    let kkt = if sol.converged { sol.kkt_residual } else { f64::INFINITY };
    push_check(&mut checks, "kkt-residual", kkt, solver.grad_tol, true, t0);
    Ok(VerifyReport { checks })
}

/// `isac verify`: prints the check table; exit code 1 when any check fails.
pub fn cmd_verify(p: &Prepared, out_dir: Option<&Path>, verbose: bool, log: &mut dyn Write) -> CliResult<()> {
    let cfg = &p.config;
    let report = run_verify(&cfg.scenario, &p.sensing, &p.solver, &cfg.mc, &cfg.verify, cfg.seed)?;
    report.print(log, verbose);
    if let Some(dir) = out_dir {
        write_atomic(&dir.join("verify.json"), &to_json_bytes(&report))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_VERIFY_FAILED,
            message: "verification failed".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Region,
    SolveCov,
    Waveform {
        kind: Option<WaveformChoice>,
        blocks: Option<usize>,
    },
    Verify,
}

/// Loads the config and runs one command; returns the process exit code.
pub fn run(command: Command, config: &Path, out: Option<&Path>, verbose: bool, log: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = RunConfig::load(config).and_then(RunConfig::prepare).and_then(|p| {
        let out_dir: PathBuf = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&p.config.output.directory));
        match command {
            Command::Region => cmd_region(&p, &out_dir, verbose, log),
            Command::SolveCov => cmd_solve_cov(&p, &out_dir, verbose, log),
            Command::Waveform { kind, blocks } => {
                let kind = kind.unwrap_or(p.config.waveform.kind);
                let blocks = blocks.unwrap_or(p.config.waveform.blocks);
                cmd_waveform(&p, kind, blocks, &out_dir, verbose, log)
            }
            Command::Verify => cmd_verify(&p, out, verbose, log),
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "isac: {e}");
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{
        "scenario": {"m": 1, "n_s": 1, "n_c": 1, "t": 10, "p_t": 1.0, "sigma_s2": 1.0, "sigma_c2": 0.001},
        "sensing_model": {"name": "scalar", "params": {"prior_variance": 1.0}},
        "comm_model": {"name": "fixed", "params": {"re": [[1.0]]}},
        "seed": 7
    }"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = RunConfig::from_json(SCALAR).unwrap();
        assert_eq!(cfg.mc, McOptions::default());
        assert_eq!(cfg.rate_constant, ConstantForm::Consistent);
        let echo = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&echo).unwrap(), cfg);
        assert!(cfg.prepare().is_ok());
    }

    #[test]
    fn unknown_keys_and_missing_seed_rejected() {
        let extra = SCALAR.replace("\"seed\": 7", "\"seed\": 7, \"colour\": 1");
        let e = RunConfig::from_json(&extra).unwrap_err();
        assert_eq!(e.code, EXIT_CONFIG);
        assert!(e.message.contains("colour"));
        let nested = SCALAR.replace("\"prior_variance\": 1.0", "\"prior_variance\": 1.0, \"x\": 2");
        assert!(RunConfig::from_json(&nested).is_err());
        let no_seed = SCALAR.replace(",\n        \"seed\": 7", "");
        assert!(RunConfig::from_json(&no_seed).unwrap_err().message.contains("seed"));
    }

    #[test]
    fn short_block_is_a_config_error() {
        let text = SCALAR
            .replace("\"m\": 1, \"n_s\": 1, \"n_c\": 1, \"t\": 10", "\"m\": 2, \"n_s\": 2, \"n_c\": 2, \"t\": 1")
            .replace(r#"{"name": "scalar", "params": {"prior_variance": 1.0}}"#, r#"{"name": "linear-gaussian", "params": {"variances": [1,1,1,1,1,1,1,1]}}"#);
        let e = RunConfig::from_json(&text).unwrap().prepare().err().unwrap();
        assert_eq!(e.code, EXIT_CONFIG);
        assert!(e.message.contains("T >= M"), "{}", e.message);
    }

    #[test]
    fn matrix_spec_shapes() {
        let spec = MatrixSpec { re: vec![vec![1.0, 2.0]], im: Some(vec![vec![0.5, 0.0]]) };
        let m = spec.to_matrix().unwrap();
        assert_eq!(m.shape(), (1, 2));
        assert_eq!(m[(0, 0)], c(1.0, 0.5));
        assert!(MatrixSpec { re: vec![vec![1.0], vec![1.0, 2.0]], im: None }.to_matrix().is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
