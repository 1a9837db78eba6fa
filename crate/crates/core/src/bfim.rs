//! Bayesian Fisher information through the Choi representation.
//!
//! The expected maps `A -> E[sum_i F_i A F_i^H]` (first Jacobian half) and
//! `A -> E[sum_i F_{N_s+i} A F_{N_s+i}^H]` (second half) are each determined by
//! their Choi matrix `E[sum_i vec(F_i) vec(F_i)^H]`. An eigendecomposition
//! `sum_l lambda_l u_l u_l^H` turns each Choi matrix into a short operator list
//! `sqrt(lambda_l) mat_{K x M}(u_l)`, after which the BFIM for any sample
//! covariance is
//!
//! ```text
//! J = (T / sigma_s^2) (sum_i F_i R^T F_i^H + sum_j G_j R G_j^H) + J_P
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    eigh_desc, frobenius, hermitian_part, max_abs, max_abs_im, real_part, spd_inverse,
    symmetric_part, CMatrix, RMatrix,
};
use crate::mc;
use crate::model::{Scenario, SensingModel};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;
pub const DEFAULT_CHOI_SAMPLES: usize = 10_000;

/// Expected Choi matrices of the two Jacobian halves (`KM x KM` each).
#[derive(Debug, Clone)]
pub struct ChoiPair {
    pub psi1: CMatrix,
    pub psi2: CMatrix,
    pub n_samples: usize,
}

fn accumulate_choi(model: &SensingModel, eta: &[f64], psi1: &mut CMatrix, psi2: &mut CMatrix) -> Result<()> {
    let f = model.jacobian(eta)?;
    let n_s = model.n_s();
    for i in 0..n_s {
        let v1 = model.jacobian_block(&f, i);
        let v2 = model.jacobian_block(&f, n_s + i);
        let v1 = CMatrix::from_column_slice(v1.len(), 1, v1.as_slice());
        let v2 = CMatrix::from_column_slice(v2.len(), 1, v2.as_slice());
        *psi1 += &v1 * v1.adjoint();
        *psi2 += &v2 * v2.adjoint();
    }
    Ok(())
}

/// Monte Carlo estimate of the two expected Choi matrices over the prior.
/// Models with a constant Jacobian are evaluated once at the prior mean.
pub fn build_choi<R: Rng + ?Sized>(model: &SensingModel, n_mc: usize, rng: &mut R) -> Result<ChoiPair> {
    if n_mc == 0 {
        return Err(Error::invalid("build_choi needs n_mc >= 1"));
    }
    let km = model.k() * model.m();
    if model.has_constant_jacobian() {
        let mut psi1 = CMatrix::zeros(km, km);
        let mut psi2 = CMatrix::zeros(km, km);
        accumulate_choi(model, model.prior().mean(), &mut psi1, &mut psi2)?;
        return Ok(ChoiPair {
            psi1: hermitian_part(&psi1),
            psi2: hermitian_part(&psi2),
            n_samples: n_mc,
        });
    }
    let partials = mc::map_chunks(rng, n_mc, |r, len| -> Result<(CMatrix, CMatrix)> {
        let mut psi1 = CMatrix::zeros(km, km);
        let mut psi2 = CMatrix::zeros(km, km);
        for _ in 0..len {
            let eta = model.prior().sample(r);
            accumulate_choi(model, &eta, &mut psi1, &mut psi2)?;
        }
        Ok((hermitian_part(&psi1), hermitian_part(&psi2)))
    });
    let mut psi1 = CMatrix::zeros(km, km);
    let mut psi2 = CMatrix::zeros(km, km);
    for part in partials {
        let (a, b) = part?;
        psi1 += a;
        psi2 += b;
    }
    let scale = 1.0 / n_mc as f64;
    Ok(ChoiPair {
        psi1: hermitian_part(&psi1.map(|z| z * scale)),
        psi2: hermitian_part(&psi2.map(|z| z * scale)),
        n_samples: n_mc,
    })
}

/// Operators extracted from the Choi pair plus the constants needed to
/// assemble a BFIM. The prior FIM is stored unscaled.
#[derive(Debug, Clone)]
pub struct OperatorBank {
    f_ops: Vec<CMatrix>,
    g_ops: Vec<CMatrix>,
    j_prior: RMatrix,
    t: usize,
    sigma_s2: f64,
}

impl OperatorBank {
    pub fn new(f_ops: Vec<CMatrix>, g_ops: Vec<CMatrix>, j_prior: RMatrix, t: usize, sigma_s2: f64) -> Result<Self> {
        let k = j_prior.nrows();
        if j_prior.ncols() != k {
            return Err(Error::invalid("prior FIM must be square"));
        }
        let m = f_ops.first().or(g_ops.first()).map(|op| op.ncols()).unwrap_or(0);
        if f_ops.iter().chain(&g_ops).any(|op| op.shape() != (k, m)) {
            return Err(Error::invalid(format!("every operator must be {k} x {m}")));
        }
        if t == 0 || !(sigma_s2 > 0.0) {
            return Err(Error::invalid("bank needs T >= 1 and sigma_s2 > 0"));
        }
        Ok(OperatorBank {
            f_ops,
            g_ops,
            j_prior,
            t,
            sigma_s2,
        })
    }

    pub fn f_ops(&self) -> &[CMatrix] {
        &self.f_ops
    }

    pub fn g_ops(&self) -> &[CMatrix] {
        &self.g_ops
    }

    pub fn r1(&self) -> usize {
        self.f_ops.len()
    }

    pub fn r2(&self) -> usize {
        self.g_ops.len()
    }

    pub fn k(&self) -> usize {
        self.j_prior.nrows()
    }

    pub fn m(&self) -> usize {
        self.f_ops.first().or(self.g_ops.first()).map(|op| op.ncols()).unwrap_or(0)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn sigma_s2(&self) -> f64 {
        self.sigma_s2
    }

    pub fn j_prior(&self) -> &RMatrix {
        &self.j_prior
    }

    /// `sigma_s^2 / T * J_P`, the prior term of the normalised problem.
    pub fn j_prior_scaled(&self) -> RMatrix {
        &self.j_prior * (self.sigma_s2 / self.t as f64)
    }

    /// `sum_i F_i R^T F_i^H + sum_j G_j R G_j^H` before taking the real part.
    pub fn assemble(&self, r: &CMatrix) -> CMatrix {
        let k = self.k();
        let mut acc = CMatrix::zeros(k, k);
        let rt = r.transpose();
        for f in &self.f_ops {
            acc += f * &rt * f.adjoint();
        }
        for g in &self.g_ops {
            acc += g * r * g.adjoint();
        }
        acc
    }

    /// `sum_i F_i A F_i^H` and `sum_j G_j A G_j^H` for an arbitrary `A`.
    pub fn apply_maps(&self, a: &CMatrix) -> (CMatrix, CMatrix) {
        let k = self.k();
        let mut first = CMatrix::zeros(k, k);
        let mut second = CMatrix::zeros(k, k);
        for f in &self.f_ops {
            first += f * a * f.adjoint();
        }
        for g in &self.g_ops {
            second += g * a * g.adjoint();
        }
        (first, second)
    }
}

fn operators_from(psi: &CMatrix, k: usize, m: usize, tol: f64) -> Vec<CMatrix> {
    let (vals, vecs) = eigh_desc(psi);
    let top = vals.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Vec::new();
    }
    vals.iter()
        .enumerate()
        .take_while(|(_, &l)| l > tol * top)
        .map(|(idx, &l)| {
            let u = vecs.column(idx);
            CMatrix::from_column_slice(k, m, u.as_slice()).map(|z| z * l.sqrt())
        })
        .collect()
}

/// Eigen-decomposes both Choi matrices and keeps eigenpairs above `tol * lambda_max`.
pub fn extract_operators(choi: &ChoiPair, scenario: &Scenario, model: &SensingModel, tol: f64) -> Result<OperatorBank> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("truncation tolerance must be > 0, got {tol}")));
    }
    model.check_against(scenario)?;
    let (k, m) = (model.k(), model.m());
    if choi.psi1.shape() != (k * m, k * m) || choi.psi2.shape() != (k * m, k * m) {
        return Err(Error::invalid("Choi matrices do not match the model dimensions"));
    }
    let f_ops = operators_from(&choi.psi1, k, m, tol);
    let g_ops = operators_from(&choi.psi2, k, m, tol);
    OperatorBank::new(f_ops, g_ops, model.prior_fim(), scenario.t, scenario.sigma_s2)
}

fn check_covariance(bank: &OperatorBank, r: &CMatrix) -> Result<()> {
    let m = bank.m();
    if r.shape() != (m, m) {
        return Err(Error::invalid(format!("covariance must be {m} x {m}, got {:?}", r.shape())));
    }
    let asym = frobenius(&(r - r.adjoint()));
    if asym > 1e-10 * frobenius(r).max(1.0) {
        return Err(Error::invalid(format!("covariance is not Hermitian (|R - R^H|_F = {asym:e})")));
    }
    Ok(())
}

/// The K x K BFIM for a sample covariance `R`.
pub fn bfim(bank: &OperatorBank, r: &CMatrix) -> Result<RMatrix> {
    check_covariance(bank, r)?;
    let s = bank.assemble(r);
    let scale = max_abs(&s);
    let im = max_abs_im(&s);
    if im > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "assembled Fisher information has imaginary part {im:e} (scale {scale:e})"
        )));
    }
    let data = symmetric_part(&real_part(&s)) * (bank.t as f64 / bank.sigma_s2);
    Ok(data + &bank.j_prior)
}

/// `tr(J^{-1})` for the BFIM at `R`.
pub fn bcrb(bank: &OperatorBank, r: &CMatrix) -> Result<f64> {
    let j = bfim(bank, r)?;
    let inv = spd_inverse(&j).ok_or_else(|| {
        Error::SingularFim("BFIM is not positive definite; some parameters are unidentifiable".into())
    })?;
    Ok(inv.trace())
}

/// Monte Carlo BFIM straight from the likelihood of `Y_s = H_s X + Z_s`.
///
/// The score `(2/sigma_s^2) Re tr(Z^H dH/deta_k X)` is averaged in outer
/// product over draws of `(eta, Z_s)`; channel derivatives come from central
/// differences of the channel map, not from the Jacobian layout.
pub fn bfim_direct<R: Rng + ?Sized>(
    model: &SensingModel,
    scenario: &Scenario,
    x: &CMatrix,
    n_mc: usize,
    rng: &mut R,
) -> Result<RMatrix> {
    if n_mc == 0 {
        return Err(Error::invalid("bfim_direct needs n_mc >= 1"));
    }
    model.check_against(scenario)?;
    if x.nrows() != model.m() {
        return Err(Error::invalid(format!("waveform must have {} rows", model.m())));
    }
    let k = model.k();
    let n_s = model.n_s();
    let t = x.ncols();
    let sigma2 = scenario.sigma_s2;
    let noise_scale = sigma2.sqrt();
    let partials = mc::map_chunks(rng, n_mc, |r, len| {
        let mut acc = RMatrix::zeros(k, k);
        let mut score = vec![0.0; k];
        for _ in 0..len {
            let eta = model.prior().sample(r);
            let z = crate::linalg::complex_gaussian_matrix(r, n_s, t).map(|v| v * noise_scale);
            let derivs = model.finite_diff_derivatives(&eta, 1e-6);
            for (kk, d) in derivs.iter().enumerate() {
                let dx = d * x;
                let mut s = 0.0;
                for (zi, mi) in z.iter().zip(dx.iter()) {
                    s += (zi.conj() * mi).re;
                }
                score[kk] = 2.0 * s / sigma2;
            }
            for a in 0..k {
                for b in 0..k {
                    acc[(a, b)] += score[a] * score[b];
                }
            }
        }
        acc
    });
    let mut total = RMatrix::zeros(k, k);
    for p in partials {
        total += p;
    }
    Ok(symmetric_part(&(total / n_mc as f64)) + model.prior_fim())
}
