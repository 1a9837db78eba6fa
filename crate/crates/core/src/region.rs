//! The pentagon inner bound of the CRB-rate region and the tradeoff metrics
//! attached to it.

use std::io::Write;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bfim::{bcrb, build_choi, extract_operators, OperatorBank, DEFAULT_TRUNCATION_TOL};
use crate::comm::{
    self, ergodic_capacity, nats_to_bits, r1_constant_c, r1_high_snr, waterfill, ConstantForm, ConstantReport,
    R1Options, R1Result,
};
use crate::covopt::{solve_sensing_optimal, CovSampler, CovSolution, GaussianBlock, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank_hermitian, CMatrix};
use crate::mc::{self, Estimate};
use crate::model::{CommChannelModel, Scenario, SensingModel};

/// Serialises `f64::INFINITY` as the string `"inf"`.
pub mod inf_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

pub fn format_epsilon(eps: f64) -> String {
    if eps.is_infinite() {
        "inf".to_string()
    } else {
        format!("{eps:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    #[serde(with = "inf_f64")]
    pub epsilon: f64,
    pub rate_bits: f64,
    pub label: String,
}

impl RegionPoint {
    fn new(epsilon: f64, rate_bits: f64, label: impl Into<String>) -> Self {
        RegionPoint {
            epsilon,
            rate_bits,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionMeta {
    pub m_sc: usize,
    pub m_cs: usize,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub rank_sc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PentagonBound {
    /// `(inf, 0)`, `(inf, R_max)`, `(eps_min, 0)`, `P_SC`, `P_CS`
    pub vertices: Vec<RegionPoint>,
    pub segment: Vec<RegionPoint>,
    pub meta: RegionMeta,
}

impl PentagonBound {
    pub fn p_sc(&self) -> &RegionPoint {
        &self.vertices[3]
    }

    pub fn p_cs(&self) -> &RegionPoint {
        &self.vertices[4]
    }

    /// `epsilon,rate_bits,label` rows, vertices first, full precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epsilon,rate_bits,label")?;
        for p in self.vertices.iter().chain(&self.segment) {
            writeln!(out, "{},{:.16e},{}", format_epsilon(p.epsilon), p.rate_bits, p.label)?;
        }
        Ok(())
    }
}

/// Time-sharing segment parameter `p` for point `i` of `n`.
fn segment_parameter(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// Builds the pentagon from the two corner points; rates are in bits.
/// Segment point `p` is `p P_SC + (1 - p) P_CS`.
pub fn pentagon(eps_min: f64, r1: f64, eps1: f64, r_max: f64, n_segment: usize) -> Result<PentagonBound> {
    if !(eps_min > 0.0) || !eps1.is_finite() || !(r1 >= 0.0) || !r_max.is_finite() {
        return Err(Error::invalid(format!(
            "corner points must satisfy eps > 0 and rate >= 0, got eps_min = {eps_min}, eps1 = {eps1}, r1 = {r1}, r_max = {r_max}"
        )));
    }
    if eps_min > eps1 || r1 > r_max {
        return Err(Error::invalid(format!(
            "corner ordering violated: need eps_min <= eps1 and R1 <= R_max, got eps_min = {eps_min}, eps1 = {eps1}, R1 = {r1}, R_max = {r_max}"
        )));
    }
    let vertices = vec![
        RegionPoint::new(f64::INFINITY, 0.0, "vertex"),
        RegionPoint::new(f64::INFINITY, r_max, "vertex"),
        RegionPoint::new(eps_min, 0.0, "vertex"),
        RegionPoint::new(eps_min, r1, "P_SC"),
        RegionPoint::new(eps1, r_max, "P_CS"),
    ];
    let segment = (0..n_segment)
        .map(|i| {
            let p = segment_parameter(i, n_segment);
            RegionPoint::new(
                p * eps_min + (1.0 - p) * eps1,
                p * r1 + (1.0 - p) * r_max,
                format!("timeshare({p})"),
            )
        })
        .collect();
    Ok(PentagonBound {
        vertices,
        segment,
        meta: RegionMeta::default(),
    })
}

/// `rank(H R H^H) / rank(H H^H)`
pub fn overlap_coefficient(h: &CMatrix, r: &CMatrix, rank_eig_tol: f64) -> Result<f64> {
    let denom = numerical_rank_hermitian(&(h * h.adjoint()), rank_eig_tol);
    if denom == 0 {
        return Err(Error::invalid("overlap coefficient needs a nonzero channel"));
    }
    let num = numerical_rank_hermitian(&(h * r * h.adjoint()), rank_eig_tol);
    Ok(num as f64 / denom as f64)
}

/// Sample covariances of the capacity-achieving point: draw `H_c`, water-fill,
/// then form `T^{-1} X X^H` for a Gaussian block with that covariance.
#[derive(Debug, Clone)]
pub struct PcsBlock {
    comm: CommChannelModel,
    power: f64,
    sigma_c2: f64,
    t: usize,
    fixed: Option<GaussianBlock>,
}

impl PcsBlock {
    pub fn new(comm: &CommChannelModel, scenario: &Scenario) -> Result<Self> {
        comm.check_against(scenario)?;
        let power = scenario.total_power();
        let fixed = match comm {
            CommChannelModel::Fixed(h) => Some(GaussianBlock::new(&waterfill(h, power, scenario.sigma_c2)?.r_cs, scenario.t)?),
            _ => None,
        };
        Ok(PcsBlock {
            comm: comm.clone(),
            power,
            sigma_c2: scenario.sigma_c2,
            t: scenario.t,
            fixed,
        })
    }
}

impl CovSampler for PcsBlock {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<CMatrix> {
        match &self.fixed {
            Some(block) => block.draw(rng),
            None => {
                let h = self.comm.draw(rng);
                let r_cs = waterfill(&h, self.power, self.sigma_c2)?.r_cs;
                GaussianBlock::new(&r_cs, self.t)?.draw(rng)
            }
        }
    }
}

/// Values above `CLAMP_FACTOR * median` replace singular blocks.
pub const CLAMP_FACTOR: f64 = 1e6;
/// Largest tolerated fraction of clamped blocks.
pub const MAX_CLAMP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Eps1Result {
    pub estimate: Estimate,
    pub clamped: usize,
    pub samples: Vec<f64>,
}

/// `E[bcrb(R_X)]` over a sampler, with singular blocks clamped.
pub fn expected_bcrb<R: RngCore + ?Sized>(
    bank: &OperatorBank,
    sampler: &dyn CovSampler,
    n_blocks: usize,
    rng: &mut R,
) -> Result<Eps1Result> {
    if n_blocks == 0 {
        return Err(Error::invalid("n_blocks must be >= 1"));
    }
    let raw: Vec<Option<f64>> = mc::map_samples(rng, n_blocks, |r| -> Result<Option<f64>> {
        match bcrb(bank, &sampler.draw(r)?) {
            Ok(v) => Ok(Some(v)),
            Err(Error::SingularFim(_)) => Ok(None),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut finite: Vec<f64> = raw.iter().flatten().copied().collect();
    if finite.is_empty() {
        return Err(Error::SingularFim("every sampled block gives a singular BFIM".into()));
    }
    let clamped = raw.len() - finite.len();
    if clamped as f64 > MAX_CLAMP_FRACTION * n_blocks as f64 {
        return Err(Error::Numerical(format!(
            "{clamped} of {n_blocks} sampled blocks give a singular BFIM (limit {:.1}%)",
            MAX_CLAMP_FRACTION * 100.0
        )));
    }
    finite.sort_by(f64::total_cmp);
    let median = finite[finite.len() / 2];
    let samples: Vec<f64> = raw.iter().map(|v| v.unwrap_or(CLAMP_FACTOR * median)).collect();
    Ok(Eps1Result {
        estimate: Estimate::from_samples(&samples),
        clamped,
        samples,
    })
}

/// BCRB averaged over capacity-achieving Gaussian blocks.
pub fn epsilon1<R: RngCore + ?Sized>(
    bank: &OperatorBank,
    comm: &CommChannelModel,
    scenario: &Scenario,
    n_blocks: usize,
    rng: &mut R,
) -> Result<Eps1Result> {
    let sampler = PcsBlock::new(comm, scenario)?;
    expected_bcrb(bank, &sampler, n_blocks, rng)
}

/// `objective(R_sc) / E[objective(R_X)]`, reported with the Monte Carlo samples.
pub fn subspace_centrality<R: RngCore + ?Sized>(
    bank: &OperatorBank,
    r_sc: &CMatrix,
    sampler: &dyn CovSampler,
    n_mc: usize,
    rng: &mut R,
) -> Result<(f64, Eps1Result)> {
    let num = bcrb(bank, r_sc)?;
    let den = expected_bcrb(bank, sampler, n_mc, rng)?;
    Ok((num / den.estimate.mean, den))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McOptions {
    pub choi_samples: usize,
    pub capacity_draws: usize,
    pub eps1_blocks: usize,
    pub segment_points: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            choi_samples: 10_000,
            capacity_draws: 10_000,
            eps1_blocks: 10_000,
            segment_points: 21,
        }
    }
}

impl McOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("choi_samples", self.choi_samples),
            ("capacity_draws", self.capacity_draws),
            ("eps1_blocks", self.eps1_blocks),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("mc.{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Mean of the per-draw high-SNR rate under each constant form, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R1Variants {
    pub consistent: f64,
    pub appendix: f64,
    pub statement: f64,
}

#[derive(Debug, Clone)]
pub struct RegionResult {
    pub bound: PentagonBound,
    pub solution: CovSolution,
    pub operator_ranks: (usize, usize),
    pub eps_min: f64,
    pub eps1: Eps1Result,
    /// nats
    pub r_max: Estimate,
    pub r1: R1Result,
    pub r1_variants: R1Variants,
    pub constants: Option<ConstantReport>,
    /// 99% upper confidence limit of beta
    pub beta_upper: f64,
    pub warnings: Vec<String>,
    pub timings: Vec<(&'static str, f64)>,
}

/// Z value of the two-sided 99% normal interval, used for ordering checks.
pub const Z99: f64 = 2.5758;

fn stage_rng(base: u64, stage: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(base);
    r.set_stream(stage);
    r
}

/// End-to-end region computation. Each stage draws from its own stream of a
/// seed taken from `rng`, so changing one stage's sample count leaves the others unchanged.
pub fn compute_region<R: RngCore + ?Sized>(
    scenario: &Scenario,
    model: &SensingModel,
    comm: &CommChannelModel,
    solver: &SolverOptions,
    mc_opts: &McOptions,
    form: ConstantForm,
    rng: &mut R,
) -> Result<RegionResult> {
    scenario.validate().map_err(|e| e.in_stage("config"))?;
    model.check_against(scenario).map_err(|e| e.in_stage("config"))?;
    comm.check_against(scenario).map_err(|e| e.in_stage("config"))?;
    mc_opts.validate().map_err(|e| e.in_stage("config"))?;
    let base = rng.next_u64();
    let mut timings = Vec::new();
    let mut warnings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let choi = build_choi(model, mc_opts.choi_samples, &mut stage_rng(base, 1)).map_err(|e| e.in_stage("build_choi"))?;
    let bank = extract_operators(&choi, scenario, model, DEFAULT_TRUNCATION_TOL)
        .map_err(|e| e.in_stage("extract_operators"))?;
    lap("operators", &mut timings);

    let solution = solve_sensing_optimal(&bank, scenario, solver).map_err(|e| e.in_stage("solve_sensing_optimal"))?;
    if !solution.converged {
        warnings.push(format!(
            "covariance solver stopped after {} iterations with KKT residual {:.3e}",
            solution.iterations, solution.kkt_residual
        ));
    }
    let eps_min = solution.crb;
    lap("solve_sensing_optimal", &mut timings);

    let r1_opts = R1Options {
        form,
        rank_eig_tol: solver.rank_eig_tol,
    };
    let r1 = r1_high_snr(&solution.r_opt, comm, scenario, mc_opts.capacity_draws, &mut stage_rng(base, 2), &r1_opts)
        .map_err(|e| e.in_stage("r1_high_snr"))?;
    warnings.extend(r1.warnings.iter().cloned());
    let mut variants = [0.0f64; 3];
    for d in &r1.per_draw {
        if d.m_sc > 0 {
            let cs = r1_constant_c(d.m_sc, scenario.t).map_err(|e| e.in_stage("r1_high_snr"))?;
            variants[0] += d.leading + cs.consistent;
            variants[1] += d.leading + cs.appendix;
            variants[2] += d.leading + cs.statement;
        }
    }
    let n_draws = r1.per_draw.len() as f64;
    let r1_variants = R1Variants {
        consistent: variants[0] / n_draws,
        appendix: variants[1] / n_draws,
        statement: variants[2] / n_draws,
    };
    let m_sc = r1.m_sc_mode();
    let constants = if m_sc > 0 { Some(r1_constant_c(m_sc, scenario.t).map_err(|e| e.in_stage("r1_high_snr"))?) } else { None };
    lap("r1_high_snr", &mut timings);

    let r_max = ergodic_capacity(comm, scenario, mc_opts.capacity_draws, &mut stage_rng(base, 3))
        .map_err(|e| e.in_stage("ergodic_capacity"))?;
    let power = scenario.total_power();
    let rank_tol = solver.rank_eig_tol;
    let r_sc = &solution.r_opt;
    let n_metric = if comm.is_fixed() { 1 } else { mc_opts.capacity_draws };
    let metric_draws: Vec<(usize, f64)> = mc::map_samples(&mut stage_rng(base, 4), n_metric, |r| -> Result<(usize, f64)> {
        let h = comm.draw(r);
        let w = waterfill(&h, power, scenario.sigma_c2)?;
        Ok((w.active_modes(), overlap_coefficient(&h, r_sc, rank_tol)?))
    })
    .into_iter()
    .collect::<Result<_>>()
    .map_err(|e| e.in_stage("ergodic_capacity"))?;
    let m_cs = comm::mode(metric_draws.iter().map(|d| d.0));
    let alpha = metric_draws.iter().map(|d| d.1).sum::<f64>() / metric_draws.len() as f64;
    lap("ergodic_capacity", &mut timings);

    let eps1 = epsilon1(&bank, comm, scenario, mc_opts.eps1_blocks, &mut stage_rng(base, 5))
        .map_err(|e| e.in_stage("epsilon1"))?;
    if eps1.clamped > 0 {
        warnings.push(format!("{} of {} blocks gave a singular BFIM and were clamped", eps1.clamped, mc_opts.eps1_blocks));
    }
    lap("epsilon1", &mut timings);

    // Monte Carlo noise can put the estimates a hair on the wrong side of the
    // ordering; pin them only when the violation is inside the confidence band.
    let mut eps1_mean = eps1.estimate.mean;
    if eps1_mean < eps_min {
        if eps1.estimate.upper(Z99) >= eps_min {
            warnings.push(format!("eps1 estimate {eps1_mean:.6e} below eps_min within Monte Carlo error; using eps_min"));
            eps1_mean = eps_min;
        } else {
            return Err(Error::Numerical(format!("eps1 = {eps1_mean:e} is significantly below eps_min = {eps_min:e}"))
                .in_stage("pentagon"));
        }
    }
    let mut r1_nats = r1.r1;
    if r1_nats > r_max.mean {
        let slack = Z99 * (r1.estimate.std_err.powi(2) + r_max.std_err.powi(2)).sqrt();
        if r1_nats - r_max.mean <= slack {
            warnings.push("R1 estimate above R_max within Monte Carlo error; using R_max".into());
            r1_nats = r_max.mean;
        } else {
            return Err(Error::Numerical(format!(
                "R1 = {r1_nats:e} nats exceeds R_max = {:e} nats beyond Monte Carlo error",
                r_max.mean
            ))
            .in_stage("pentagon"));
        }
    }
    let mut bound = pentagon(eps_min, nats_to_bits(r1_nats), eps1_mean, nats_to_bits(r_max.mean), mc_opts.segment_points)
        .map_err(|e| e.in_stage("pentagon"))?;
    let beta = eps_min / eps1.estimate.mean;
    let beta_upper = eps_min / eps1.estimate.lower(Z99).max(f64::MIN_POSITIVE);
    bound.meta = RegionMeta {
        m_sc,
        m_cs,
        alpha,
        beta,
        zeta: comm::dof_efficiency(m_sc, m_cs.max(1), scenario.t).map_err(|e| e.in_stage("pentagon"))?,
        rank_sc: solution.rank,
    };
    lap("pentagon", &mut timings);

    Ok(RegionResult {
        bound,
        operator_ranks: (bank.r1(), bank.r2()),
        solution,
        eps_min,
        eps1,
        r_max,
        r1,
        r1_variants,
        constants,
        beta_upper,
        warnings,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covopt::Degenerate;
    use crate::linalg::c;

    #[test]
    fn pentagon_endpoints_and_midpoint() {
        let b = pentagon(0.1, 1.0, 0.3, 3.0, 3).unwrap();
        assert_eq!(b.segment[0].epsilon, 0.3);
        assert_eq!(b.segment[0].rate_bits, 3.0);
        assert_eq!(b.segment[2].epsilon, 0.1);
        assert_eq!(b.segment[2].rate_bits, 1.0);
        assert!((b.segment[1].epsilon - 0.2).abs() < 1e-16 && b.segment[1].rate_bits == 2.0);
        assert_eq!(b.p_sc().label, "P_SC");
        assert_eq!((b.p_cs().epsilon, b.p_cs().rate_bits), (0.3, 3.0));
        assert!(b.vertices[0].epsilon.is_infinite());
        assert!(pentagon(0.3, 1.0, 0.1, 3.0, 3).is_err());
        assert!(pentagon(0.1, 4.0, 0.3, 3.0, 3).is_err());
    }

    #[test]
    fn degenerate_segment() {
        let b = pentagon(0.2, 2.0, 0.2, 2.0, 5).unwrap();
        assert!(b.segment.iter().all(|p| p.epsilon == 0.2 && p.rate_bits == 2.0));
    }

    #[test]
    fn infinity_round_trips() {
        let p = RegionPoint::new(f64::INFINITY, 1.5, "vertex");
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"inf\""));
        let back: RegionPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn csv_rows() {
        let b = pentagon(0.1, 1.0, 0.3, 3.0, 2).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epsilon,rate_bits,label");
        assert_eq!(lines.len(), 1 + 5 + 2);
        assert!(lines[1].starts_with("inf,"));
    }

    #[test]
    fn overlap_examples() {
        let mut h = CMatrix::zeros(2, 3);
        h[(0, 0)] = c(1.0, 0.0);
        h[(1, 1)] = c(1.0, 0.0);
        let mut r = CMatrix::zeros(3, 3);
        r[(0, 0)] = c(1.0, 0.0);
        assert_eq!(overlap_coefficient(&h, &r, 1e-8).unwrap(), 0.5);
        assert_eq!(overlap_coefficient(&h, &CMatrix::identity(3, 3), 1e-8).unwrap(), 1.0);
        assert_eq!(overlap_coefficient(&h, &CMatrix::zeros(3, 3), 1e-8).unwrap(), 0.0);
        assert!(overlap_coefficient(&CMatrix::zeros(2, 3), &r, 1e-8).is_err());
    }

    fn scalar_inputs() -> (Scenario, SensingModel, CommChannelModel) {
        let s = Scenario { m: 1, n_s: 1, n_c: 1, t: 10, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1e-3 };
        let h = CMatrix::from_element(1, 1, c(1.0, 0.0));
        (s, SensingModel::scalar(1.0).unwrap(), CommChannelModel::Fixed(h))
    }

    #[test]
    fn scalar_region_end_to_end() {
        let (s, model, comm) = scalar_inputs();
        let mc_opts = McOptions { eps1_blocks: 4000, ..McOptions::default() };
        let res = compute_region(
            &s,
            &model,
            &comm,
            &SolverOptions::default(),
            &mc_opts,
            ConstantForm::Consistent,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!((res.eps_min - 1.0 / 21.0).abs() < 1e-12);
        assert!((nats_to_bits(res.r_max.mean) - (1.0f64 + 1e3).log2()).abs() < 1e-12);
        assert!(res.eps1.estimate.mean >= res.eps_min);
        assert!(res.bound.p_sc().rate_bits <= res.bound.p_cs().rate_bits);
        assert_eq!((res.bound.meta.m_sc, res.bound.meta.m_cs), (1, 1));
        assert_eq!(res.bound.meta.alpha, 1.0);
        assert!(res.bound.meta.beta <= 1.0);
        assert_eq!(res.bound.segment.len(), 21);
    }

    #[test]
    fn degenerate_sampler_centrality_is_one() {
        let one = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let bank = OperatorBank::new(vec![one.clone()], vec![one.clone()], crate::linalg::RMatrix::identity(1, 1), 10, 1.0).unwrap();
        let (beta, _) = subspace_centrality(&bank, &one, &Degenerate(one.clone()), 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((beta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clamping_limits() {
        // the second parameter is never observed and the prior is flat
        let mut op = CMatrix::zeros(2, 1);
        op[(0, 0)] = c(1.0, 0.0);
        let bank = OperatorBank::new(vec![op.clone()], vec![op], crate::linalg::RMatrix::zeros(2, 2), 1, 1.0).unwrap();
        let sampler = GaussianBlock::new(&CMatrix::identity(1, 1), 1).unwrap();
        let err = expected_bcrb(&bank, &sampler, 100, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::SingularFim(_)));
    }
}
