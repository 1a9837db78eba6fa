//! Sensing-optimal sample covariance.
//!
//! Minimises `tr(B(R)^{-1})` over `{R = R^H, R >= 0, tr R = P_T M}` where
//! `B(R) = sum F_i R^T F_i^H + sum G_j R G_j^H + (sigma_s^2 / T) J_P`.
//! The solver is a spectral projected gradient method: Barzilai-Borwein trial
//! steps, monotone Armijo backtracking and an exact projection onto the
//! feasible set. Optimality is certified through the KKT conditions
//! `-G(R) + Z = lambda I`, `Z >= 0`, `tr(Z R) = 0`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bfim::{bcrb, OperatorBank};
use crate::error::{Error, Result};
use crate::linalg::{
    complex_gaussian_matrix, eigh_desc, from_eigen, frobenius, hermitian_part, inner_re,
    numerical_rank_hermitian, project_simplex, psd_sqrt, random_hermitian, real_part, spd_inverse,
    symmetric_part, to_complex, trace_re, CMatrix, RMatrix,
};
use crate::mc::{self, Estimate};
use crate::model::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    ScaledIdentity,
    /// Any Hermitian matrix; it is projected onto the feasible set first.
    Given(CMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once the KKT residual drops below this value...
    pub grad_tol: f64,
    /// ...and the projected-gradient step `|P(R - G/L) - R|_F` is below `x_tol * P_T M`.
    pub x_tol: f64,
    pub armijo_c1: f64,
    pub armijo_shrink: f64,
    pub rank_eig_tol: f64,
    pub init: Init,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 5000,
            grad_tol: 1e-7,
            x_tol: 1e-10,
            armijo_c1: 1e-4,
            armijo_shrink: 0.5,
            rank_eig_tol: 1e-8,
            init: Init::ScaledIdentity,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.grad_tol, self.x_tol, self.armijo_c1, self.armijo_shrink, self.rank_eig_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || self.armijo_c1 >= 1.0 || self.armijo_shrink >= 1.0 {
            return Err(Error::invalid(
                "solver tolerances must be > 0 and the Armijo constants must lie in (0, 1)",
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CovSolution {
    pub r_opt: CMatrix,
    /// `tr(J^{-1})` at `r_opt`, i.e. the minimum BCRB.
    pub crb: f64,
    /// `tr(B^{-1})` at `r_opt`.
    pub objective: f64,
    pub kkt_residual: f64,
    pub lambda: f64,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

/// `B(R)` as a real-symmetric matrix.
pub fn b_map(bank: &OperatorBank, r: &CMatrix) -> RMatrix {
    symmetric_part(&real_part(&bank.assemble(r))) + bank.j_prior_scaled()
}

fn b_inverse(bank: &OperatorBank, r: &CMatrix) -> Result<RMatrix> {
    spd_inverse(&b_map(bank, r)).ok_or_else(|| Error::SingularFim("B(R) is not positive definite".into()))
}

/// `tr(B(R)^{-1})`
pub fn objective(bank: &OperatorBank, r: &CMatrix) -> Result<f64> {
    Ok(b_inverse(bank, r)?.trace())
}

fn gradient_from(bank: &OperatorBank, binv: &RMatrix) -> CMatrix {
    let binv2 = to_complex(&(binv * binv));
    let m = bank.m();
    let mut g = CMatrix::zeros(m, m);
    for f in bank.f_ops() {
        g -= (f.adjoint() * &binv2 * f).map(|z| z.conj());
    }
    for op in bank.g_ops() {
        g -= op.adjoint() * &binv2 * op;
    }
    hermitian_part(&g)
}

/// Gradient of [`objective`] with respect to `R`, normalised so that
/// `objective(R + d D) ~ objective(R) + d tr(G D)` for Hermitian `D`.
pub fn gradient(bank: &OperatorBank, r: &CMatrix) -> Result<CMatrix> {
    Ok(gradient_from(bank, &b_inverse(bank, r)?))
}

/// Directional derivative of the gradient, `dG` along the Hermitian direction `dr`.
pub fn hessian_action(bank: &OperatorBank, r: &CMatrix, dr: &CMatrix) -> Result<CMatrix> {
    let binv = b_inverse(bank, r)?;
    let db = symmetric_part(&real_part(&bank.assemble(dr)));
    let binv2 = &binv * &binv;
    let d_binv2 = -(&binv * &db * &binv2 + &binv2 * &db * &binv);
    let d = to_complex(&d_binv2);
    let m = bank.m();
    let mut out = CMatrix::zeros(m, m);
    for f in bank.f_ops() {
        out -= (f.adjoint() * &d * f).map(|z| z.conj());
    }
    for op in bank.g_ops() {
        out -= op.adjoint() * &d * op;
    }
    Ok(hermitian_part(&out))
}

/// Frobenius projection onto `{R = R^H, R >= 0, tr R = gamma}`.
pub fn project_feasible(r: &CMatrix, gamma: f64) -> CMatrix {
    let (vals, vecs) = eigh_desc(r);
    let projected = project_simplex(&vals, gamma);
    from_eigen(&projected, &vecs)
}

/// KKT certificate at a feasible `R`: returns `(residual, lambda)` with
/// `lambda = lambda_max(-G)`, `Z = lambda I + G` and
/// `residual = max(neg. eigenvalue of Z, |tr(Z R)| / (lambda tr R))`.
pub fn kkt_check(bank: &OperatorBank, r: &CMatrix, _rank_eig_tol: f64) -> Result<(f64, f64)> {
    Ok(kkt_from_gradient(&gradient(bank, r)?, r))
}

fn kkt_from_gradient(g: &CMatrix, r: &CMatrix) -> (f64, f64) {
    let m = g.nrows();
    let neg = g.map(|z| -z);
    let (vals, _) = eigh_desc(&neg);
    let lambda = vals[0];
    let z = CMatrix::identity(m, m).map(|v| v * lambda) + g;
    let (zvals, _) = eigh_desc(&z);
    let neg_part = (-zvals[m - 1]).max(0.0);
    let denom = lambda * trace_re(r);
    if !(denom > 0.0) {
        return (f64::INFINITY, lambda);
    }
    let comp = inner_re(&z, r).abs() / denom;
    // Z is PSD by construction up to rounding; its scale is lambda
    (comp.max(neg_part / lambda.abs().max(f64::MIN_POSITIVE)), lambda)
}

fn lipschitz_estimate(bank: &OperatorBank, r: &CMatrix) -> Result<f64> {
    let m = bank.m();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = random_hermitian(&mut rng, m);
    let mut norm = frobenius(&v);
    v /= crate::linalg::c(norm, 0.0);
    for _ in 0..30 {
        let hv = hessian_action(bank, r, &v)?;
        norm = frobenius(&hv);
        if norm == 0.0 {
            break;
        }
        v = hv.map(|z| z / norm);
    }
    Ok(norm)
}

/// Solves the sensing-optimal covariance problem for the bank.
pub fn solve_sensing_optimal(bank: &OperatorBank, scenario: &Scenario, opts: &SolverOptions) -> Result<CovSolution> {
    opts.validate()?;
    scenario.validate()?;
    if bank.r1() + bank.r2() == 0 {
        return Err(Error::invalid("operator bank is empty; there is no sensing problem to solve"));
    }
    let m = bank.m();
    if m != scenario.m {
        return Err(Error::invalid(format!("bank has M = {m}, scenario has M = {}", scenario.m)));
    }
    let gamma = scenario.total_power();
    let identity = CMatrix::identity(m, m).map(|z| z * scenario.p_t);
    if spd_inverse(&b_map(bank, &identity)).is_none() {
        return Err(Error::Unidentifiable(
            "B(R) is singular for every feasible R; the prior and operators leave a parameter unobserved".into(),
        ));
    }
    let mut r = match &opts.init {
        Init::ScaledIdentity => identity,
        Init::Given(r0) => {
            if r0.shape() != (m, m) {
                return Err(Error::invalid(format!("initial covariance must be {m} x {m}")));
            }
            project_feasible(&hermitian_part(r0), gamma)
        }
    };
    let binv = b_inverse(bank, &r).map_err(|_| Error::invalid("initial covariance gives singular B(R)"))?;
    let mut f = binv.trace();
    let mut g = gradient_from(bank, &binv);
    let lip = lipschitz_estimate(bank, &r)?;
    let base_step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let (step_min, step_max) = (base_step * 1e-10, base_step * 1e10);
    let mut step = base_step;
    let mut history = vec![f];
    let (mut kkt, mut lambda) = kkt_from_gradient(&g, &r);
    let mut iterations = 0;
    let stationary = |r: &CMatrix, g: &CMatrix| {
        frobenius(&(project_feasible(&(r - g.map(|z| z * base_step)), gamma) - r)) <= opts.x_tol * gamma
    };
    let mut converged = kkt <= opts.grad_tol && stationary(&r, &g);

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = project_feasible(&(&r - g.map(|z| z * alpha)), gamma);
            let d = &trial - &r;
            let decrease = inner_re(&g, &d);
            if let Ok(trial_binv) = b_inverse(bank, &trial) {
                let trial_f = trial_binv.trace();
                if trial_f <= f + opts.armijo_c1 * decrease {
                    accepted = Some((trial, trial_binv, trial_f));
                    break;
                }
            }
            alpha *= opts.armijo_shrink;
        }
        let Some((next, next_binv, next_f)) = accepted else {
            break;
        };
        let next_g = gradient_from(bank, &next_binv);
        let s = &next - &r;
        let y = &next_g - &g;
        let sy = inner_re(&s, &y);
        let ss = inner_re(&s, &s);
        step = if sy > 0.0 { (ss / sy).clamp(step_min, step_max) } else { step_max.min(alpha * 2.0) };
        r = next;
        f = next_f;
        g = next_g;
        history.push(f);
        (kkt, lambda) = kkt_from_gradient(&g, &r);
        converged = kkt <= opts.grad_tol && stationary(&r, &g);
        if ss == 0.0 {
            break;
        }
    }
    let crb = bcrb(bank, &r)?;
    Ok(CovSolution {
        rank: numerical_rank_hermitian(&r, opts.rank_eig_tol),
        r_opt: r,
        crb,
        objective: f,
        kkt_residual: kkt,
        lambda,
        iterations,
        converged,
        history,
    })
}

/// Source of random sample covariances `R_X`.
pub trait CovSampler: Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<CMatrix>;
}

/// Always returns the same matrix.
#[derive(Debug, Clone)]
pub struct Degenerate(pub CMatrix);

impl CovSampler for Degenerate {
    fn draw(&self, _rng: &mut dyn RngCore) -> Result<CMatrix> {
        Ok(self.0.clone())
    }
}

/// `R_X = X X^H / T` with `X = R^{1/2} W` and `W` an `M x T` matrix of CN(0, 1) entries.
#[derive(Debug, Clone)]
pub struct GaussianBlock {
    sqrt_cov: CMatrix,
    t: usize,
}

impl GaussianBlock {
    pub fn new(cov: &CMatrix, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::invalid("block length must be >= 1"));
        }
        Ok(GaussianBlock {
            sqrt_cov: psd_sqrt(cov),
            t,
        })
    }
}

impl CovSampler for GaussianBlock {
    fn draw(&self, rng: &mut dyn RngCore) -> Result<CMatrix> {
        let w = complex_gaussian_matrix(rng, self.sqrt_cov.ncols(), self.t);
        let x = &self.sqrt_cov * w;
        Ok(hermitian_part(&(&x * x.adjoint())).map(|z| z / self.t as f64))
    }
}

/// Per-draw `bcrb(R_X) - eps_min` for `n_mc` draws of the sampler.
pub fn jensen_gap_samples<R: RngCore + ?Sized>(
    bank: &OperatorBank,
    eps_min: f64,
    sampler: &dyn CovSampler,
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_mc == 0 {
        return Err(Error::invalid("jensen gap needs n_mc >= 1"));
    }
    mc::map_samples(rng, n_mc, |r| -> Result<f64> { Ok(bcrb(bank, &sampler.draw(r)?)? - eps_min) })
        .into_iter()
        .collect()
}

/// `E[bcrb(R_X)] - eps_min` over the sampler, with `eps_min` from
/// [`solve_sensing_optimal`] at default options.
pub fn jensen_gap<R: RngCore + ?Sized>(
    bank: &OperatorBank,
    scenario: &Scenario,
    sampler: &dyn CovSampler,
    n_mc: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let sol = solve_sensing_optimal(bank, scenario, &SolverOptions::default())?;
    let gaps = jensen_gap_samples(bank, sol.crb, sampler, n_mc, rng)?;
    Ok(Estimate::from_samples(&gaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random_psd};

    fn scalar_bank() -> OperatorBank {
        let one = CMatrix::from_element(1, 1, c(1.0, 0.0));
        OperatorBank::new(vec![one.clone()], vec![one], RMatrix::from_element(1, 1, 1.0), 10, 1.0).unwrap()
    }

    fn scalar_scenario() -> Scenario {
        Scenario {
            m: 1,
            n_s: 1,
            n_c: 1,
            t: 10,
            p_t: 1.0,
            sigma_s2: 1.0,
            sigma_c2: 1.0,
        }
    }

    fn iso_bank() -> OperatorBank {
        let id = CMatrix::identity(2, 2);
        OperatorBank::new(vec![id.clone()], vec![id], RMatrix::zeros(2, 2), 8, 1.0).unwrap()
    }

    fn iso_scenario() -> Scenario {
        Scenario {
            m: 2,
            n_s: 2,
            n_c: 2,
            t: 8,
            p_t: 1.0,
            sigma_s2: 1.0,
            sigma_c2: 1.0,
        }
    }

    /// Random bank whose second half is the conjugate of the first, as for
    /// any real parameter vector.
    fn paired_bank(seed: u64, n_ops: usize, k: usize, m: usize, jp: f64) -> OperatorBank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<CMatrix> = (0..n_ops).map(|_| complex_gaussian_matrix(&mut rng, k, m)).collect();
        let g = f.iter().map(|x| x.map(|z| z.conj())).collect();
        OperatorBank::new(f, g, RMatrix::identity(k, k) * jp, 8, 1.0).unwrap()
    }

    fn scalar(v: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c(v, 0.0))
    }

    #[test]
    fn scalar_b_objective_gradient_by_hand() {
        let bank = scalar_bank();
        assert!((b_map(&bank, &scalar(1.0))[(0, 0)] - 2.1).abs() < 1e-15);
        assert!((b_map(&bank, &scalar(0.0))[(0, 0)] - 0.1).abs() < 1e-15);
        assert!((objective(&bank, &scalar(1.0)).unwrap() - 1.0 / 2.1).abs() < 1e-14);
        assert!((objective(&bank, &scalar(2.0)).unwrap() - 1.0 / 4.1).abs() < 1e-14);
        let g = gradient(&bank, &scalar(1.0)).unwrap();
        assert!((g[(0, 0)].re + 2.0 / 2.1f64.powi(2)).abs() < 1e-13);
        // bfim = (T / sigma^2) b_map
        let j = crate::bfim::bfim(&bank, &scalar(1.0)).unwrap();
        assert!((j[(0, 0)] - 10.0 * 2.1).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0)]));
        let p = project_feasible(&d, 2.0);
        assert!((p[(0, 0)].re - 2.0).abs() < 1e-14 && p[(1, 1)].norm() < 1e-14);
        let p = project_feasible(&CMatrix::identity(2, 2), 4.0);
        assert!(frobenius(&(p - CMatrix::identity(2, 2).map(|z| z * 2.0))) < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = random_psd(&mut rng, 3, 2, 3.0);
        assert!(frobenius(&(project_feasible(&r, 3.0) - &r)) < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = 3;
        let m = 3;
        let ops: Vec<CMatrix> = (0..4).map(|_| complex_gaussian_matrix(&mut rng, k, m)).collect();
        let bank = OperatorBank::new(ops[..2].to_vec(), ops[2..].to_vec(), RMatrix::identity(k, k), 5, 0.7).unwrap();
        let r = random_psd(&mut rng, m, m, 3.0);
        let g = gradient(&bank, &r).unwrap();
        let h = 1e-6;
        for _ in 0..20 {
            let d = random_hermitian(&mut rng, m);
            let plus = objective(&bank, &(&r + d.map(|z| z * h))).unwrap();
            let minus = objective(&bank, &(&r - d.map(|z| z * h))).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            let an = inner_re(&g, &d);
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-8), "{fd} vs {an}");
        }
        // -G is PSD
        let (vals, _) = eigh_desc(&g.map(|z| -z));
        assert!(*vals.last().unwrap() >= -1e-12);
    }

    #[test]
    fn hessian_action_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ops: Vec<CMatrix> = (0..2).map(|_| complex_gaussian_matrix(&mut rng, 2, 3)).collect();
        let bank = OperatorBank::new(vec![ops[0].clone()], vec![ops[1].clone()], RMatrix::identity(2, 2), 4, 1.0).unwrap();
        let r = random_psd(&mut rng, 3, 3, 3.0);
        let d = random_hermitian(&mut rng, 3);
        let h = 1e-6;
        let fd = (gradient(&bank, &(&r + d.map(|z| z * h))).unwrap() - gradient(&bank, &(&r - d.map(|z| z * h))).unwrap())
            .map(|z| z / (2.0 * h));
        let an = hessian_action(&bank, &r, &d).unwrap();
        assert!(frobenius(&(&fd - &an)) <= 1e-5 * frobenius(&an));
    }

    #[test]
    fn scalar_problem_is_a_single_point() {
        let sol = solve_sensing_optimal(&scalar_bank(), &scalar_scenario(), &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.r_opt[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((sol.crb - 1.0 / 21.0).abs() < 1e-14);
        assert_eq!(sol.kkt_residual, 0.0);
        assert_eq!(sol.rank, 1);
    }

    #[test]
    fn isotropic_optimum_is_scaled_identity() {
        let bank = iso_bank();
        let s = iso_scenario();
        let sol = solve_sensing_optimal(&bank, &s, &SolverOptions::default()).unwrap();
        assert!(sol.converged && sol.kkt_residual <= 1e-8);
        assert!(frobenius(&(&sol.r_opt - CMatrix::identity(2, 2))) < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r = random_psd(&mut rng, 2, 2, 2.0);
            assert!(sol.objective <= objective(&bank, &r).unwrap() + 1e-12);
        }
        let (res, _) = kkt_check(&bank, &CMatrix::identity(2, 2), 1e-8).unwrap();
        assert!(res <= 1e-8);
    }

    #[test]
    fn perturbed_point_has_larger_kkt_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bank = paired_bank(4, 2, 2, 3, 0.1);
        let s = Scenario { m: 3, n_s: 2, n_c: 3, t: 8, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1.0 };
        let sol = solve_sensing_optimal(&bank, &s, &SolverOptions::default()).unwrap();
        assert!(sol.converged, "kkt {}", sol.kkt_residual);
        assert!(sol.history.windows(2).all(|w| w[1] <= w[0]));
        let v = complex_gaussian_matrix(&mut rng, 3, 1);
        let bumped = project_feasible(&(&sol.r_opt + &v * v.adjoint()), 3.0);
        let (res, _) = kkt_check(&bank, &bumped, 1e-8).unwrap();
        assert!(res > sol.kkt_residual);
        assert!(sol.rank <= 2);
    }

    #[test]
    fn empty_and_unidentifiable_banks_rejected() {
        let s = iso_scenario();
        let empty = OperatorBank::new(vec![], vec![], RMatrix::identity(2, 2), 8, 1.0).unwrap();
        assert!(matches!(solve_sensing_optimal(&empty, &s, &SolverOptions::default()), Err(Error::InvalidArgument(_))));
        // the operator only sees the first parameter and the prior is flat
        let mut op = CMatrix::zeros(2, 2);
        op[(0, 0)] = c(1.0, 0.0);
        op[(0, 1)] = c(1.0, 0.0);
        let deficient = OperatorBank::new(vec![op], vec![], RMatrix::zeros(2, 2), 8, 1.0).unwrap();
        assert!(matches!(
            solve_sensing_optimal(&deficient, &s, &SolverOptions::default()),
            Err(Error::Unidentifiable(_))
        ));
        let bad = SolverOptions { grad_tol: 0.0, ..SolverOptions::default() };
        assert!(solve_sensing_optimal(&iso_bank(), &s, &bad).is_err());
    }

    #[test]
    fn non_convergence_reports_best_iterate() {
        let bank = paired_bank(5, 1, 3, 3, 0.01);
        let s = Scenario { m: 3, n_s: 3, n_c: 3, t: 8, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1.0 };
        let opts = SolverOptions { max_iters: 1, grad_tol: 1e-14, ..SolverOptions::default() };
        let sol = solve_sensing_optimal(&bank, &s, &opts).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
        assert!(sol.history[1] <= sol.history[0]);
    }

    #[test]
    fn degenerate_sampler_gap_is_zero() {
        let bank = iso_bank();
        let s = iso_scenario();
        let sampler = Degenerate(CMatrix::identity(2, 2));
        let gap = jensen_gap(&bank, &s, &sampler, 100, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(gap.mean.abs() < 1e-12);
    }

    #[test]
    fn gaussian_block_sampler_has_right_mean_trace() {
        let sampler = GaussianBlock::new(&CMatrix::identity(2, 2), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 20_000;
        let mean: f64 = (0..n).map(|_| trace_re(&sampler.draw(&mut rng).unwrap())).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.03);
    }
}
