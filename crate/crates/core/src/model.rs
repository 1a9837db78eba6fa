//! Sensing and communication scenarios.
//!
//! The sensing channel is a map `eta -> H_s` from a real parameter vector to
//! an `N_s x M` complex matrix. Complex quantities (target gains, channel
//! entries) are always split into real and imaginary coordinates so that the
//! Fisher information stays real-symmetric.
//!
//! # Jacobian layout
//!
//! The Jacobian is a `K x 2 N_s M` complex matrix made of `2 N_s` blocks of
//! size `K x M`, ordered like the stacked vector `[vec(H_s^T); vec(H_s^H)]`.
//! Block `i < N_s` covers row `i` of `H_s`, block `N_s + i` covers the
//! conjugate of the same row. Entries hold the *conjugate* derivative,
//! `F[k, n] = conj(d h_n / d eta_k)`, so that the Fisher information of `eta`
//! reads `F J_h F^H` with `J_h` the Fisher information of the stacked vector.
//! With this convention block `N_s + i` is the entrywise conjugate of block `i`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, complex_gaussian_matrix, CMatrix, RMatrix, C64, J};

/// Dimensions, power budget and noise levels of one ISAC link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Transmit antennas.
    pub m: usize,
    /// Sensing receive antennas.
    pub n_s: usize,
    /// Communication receive antennas.
    pub n_c: usize,
    /// Block length in symbols.
    pub t: usize,
    /// Average power per transmitted symbol.
    pub p_t: f64,
    pub sigma_s2: f64,
    pub sigma_c2: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("n_s", self.n_s), ("n_c", self.n_c), ("t", self.t)] {
            if v < 1 {
                return Err(Error::invalid(format!("scenario.{name} must be >= 1, got {v}")));
            }
        }
        for (name, v) in [("p_t", self.p_t), ("sigma_s2", self.sigma_s2), ("sigma_c2", self.sigma_c2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("scenario.{name} must be positive, got {v}")));
            }
        }
        if self.t < self.m {
            return Err(Error::invalid(format!(
                "block length T >= M is required (a semi-unitary M x T matrix must exist): T = {}, M = {}",
                self.t, self.m
            )));
        }
        Ok(())
    }

    /// Trace budget of the transmit covariance, `P_T * M`.
    pub fn total_power(&self) -> f64 {
        self.p_t * self.m as f64
    }
}

/// Independent Gaussian prior `N(mean, diag(variances))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    mean: Vec<f64>,
    variances: Vec<f64>,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.len() != variances.len() {
            return Err(Error::invalid(format!(
                "prior mean has length {} but variances have length {}",
                mean.len(),
                variances.len()
            )));
        }
        if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("prior variances must be positive, got {v}")));
        }
        Ok(GaussianPrior { mean, variances })
    }

    pub fn standard(k: usize) -> Self {
        GaussianPrior {
            mean: vec![0.0; k],
            variances: vec![1.0; k],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.variances)
            .map(|(m, v)| {
                let z: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * z
            })
            .collect()
    }

    /// Gradient of `ln p(eta)`.
    pub fn score(&self, eta: &[f64]) -> Vec<f64> {
        eta.iter()
            .zip(&self.mean)
            .zip(&self.variances)
            .map(|((x, m), v)| -(x - m) / v)
            .collect()
    }

    /// Fisher information of the prior, `Sigma^{-1}`.
    pub fn fim(&self) -> RMatrix {
        RMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.variances.iter().map(|v| 1.0 / v),
        ))
    }
}

pub type MatrixFn = Arc<dyn Fn(&[f64]) -> CMatrix + Send + Sync>;

/// User-supplied parametrisation. Without an analytic Jacobian the central
/// finite-difference Jacobian is used.
#[derive(Clone)]
pub struct CustomChannel {
    pub k: usize,
    pub map: MatrixFn,
    /// Returns the Jacobian in the layout documented at module level.
    pub jacobian: Option<MatrixFn>,
}

impl fmt::Debug for CustomChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomChannel")
            .field("k", &self.k)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum ChannelKind {
    /// `M = N_s = K = 1`, `H_s = eta`.
    Scalar,
    /// `eta = [Re vec(H_s); Im vec(H_s)]`, `K = 2 N_s M`.
    LinearGaussian,
    /// `H_s = alpha b(theta) a(theta)^T` with `eta = (Re alpha, Im alpha, theta)`.
    /// Injective for `|theta| < pi/2` and `alpha != 0`.
    RankOneTarget,
    /// Rank-one target with a known complex gain, `eta = (theta)`.
    AngleOnlyTarget { gain: C64 },
    Custom(CustomChannel),
}

/// Uniform-linear-array steering vector with half-wavelength spacing.
pub fn steering(n: usize, theta: f64) -> CMatrix {
    let s = std::f64::consts::PI * theta.sin();
    CMatrix::from_iterator(n, 1, (0..n).map(|m| C64::from_polar(1.0, s * m as f64)))
}

fn steering_derivative(n: usize, theta: f64) -> CMatrix {
    let s = std::f64::consts::PI * theta.sin();
    let ds = std::f64::consts::PI * theta.cos();
    CMatrix::from_iterator(
        n,
        1,
        (0..n).map(|m| J * (ds * m as f64) * C64::from_polar(1.0, s * m as f64)),
    )
}

/// Parametrised sensing channel together with its prior.
#[derive(Debug, Clone)]
pub struct SensingModel {
    n_s: usize,
    m: usize,
    k: usize,
    kind: ChannelKind,
    prior: GaussianPrior,
}

impl SensingModel {
    pub fn new(n_s: usize, m: usize, kind: ChannelKind, prior: GaussianPrior) -> Result<Self> {
        if n_s == 0 || m == 0 {
            return Err(Error::invalid("sensing model dimensions must be >= 1"));
        }
        let k = match &kind {
            ChannelKind::Scalar => {
                if n_s != 1 || m != 1 {
                    return Err(Error::invalid(format!(
                        "scalar model requires M = N_s = 1, got M = {m}, N_s = {n_s}"
                    )));
                }
                1
            }
            ChannelKind::LinearGaussian => 2 * n_s * m,
            ChannelKind::RankOneTarget => 3,
            ChannelKind::AngleOnlyTarget { .. } => 1,
            ChannelKind::Custom(cc) => cc.k,
        };
        if k == 0 {
            return Err(Error::invalid("parameter dimension K must be >= 1"));
        }
        if prior.dim() != k {
            return Err(Error::invalid(format!(
                "prior has dimension {} but the model has K = {k}",
                prior.dim()
            )));
        }
        Ok(SensingModel { n_s, m, k, kind, prior })
    }

    pub fn scalar(prior_variance: f64) -> Result<Self> {
        Self::new(1, 1, ChannelKind::Scalar, GaussianPrior::new(vec![0.0], vec![prior_variance])?)
    }

    pub fn linear_gaussian(n_s: usize, m: usize, variances: Vec<f64>) -> Result<Self> {
        let k = 2 * n_s * m;
        Self::new(n_s, m, ChannelKind::LinearGaussian, GaussianPrior::new(vec![0.0; k], variances)?)
    }

    /// `mean`/`variances` are ordered `(Re alpha, Im alpha, theta)`.
    pub fn rank_one_target(n_s: usize, m: usize, mean: [f64; 3], variances: [f64; 3]) -> Result<Self> {
        Self::new(
            n_s,
            m,
            ChannelKind::RankOneTarget,
            GaussianPrior::new(mean.to_vec(), variances.to_vec())?,
        )
    }

    pub fn angle_only_target(n_s: usize, m: usize, gain: C64, theta_mean: f64, theta_var: f64) -> Result<Self> {
        Self::new(
            n_s,
            m,
            ChannelKind::AngleOnlyTarget { gain },
            GaussianPrior::new(vec![theta_mean], vec![theta_var])?,
        )
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    /// True when the Jacobian does not depend on `eta`.
    pub fn has_constant_jacobian(&self) -> bool {
        matches!(self.kind, ChannelKind::Scalar | ChannelKind::LinearGaussian)
    }

    /// Checks that the model matches the scenario's antenna counts.
    pub fn check_against(&self, scenario: &Scenario) -> Result<()> {
        if self.m != scenario.m || self.n_s != scenario.n_s {
            return Err(Error::invalid(format!(
                "sensing model is {} x {} but the scenario has N_s = {}, M = {}",
                self.n_s, self.m, scenario.n_s, scenario.m
            )));
        }
        Ok(())
    }

    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.k {
            return Err(Error::invalid(format!(
                "eta has length {} but the model has K = {}",
                eta.len(),
                self.k
            )));
        }
        Ok(())
    }

    /// `H_s = g(eta)`.
    pub fn evaluate_channel(&self, eta: &[f64]) -> Result<CMatrix> {
        self.check_eta(eta)?;
        Ok(self.channel_unchecked(eta))
    }

    fn channel_unchecked(&self, eta: &[f64]) -> CMatrix {
        match &self.kind {
            ChannelKind::Scalar => CMatrix::from_element(1, 1, c(eta[0], 0.0)),
            ChannelKind::LinearGaussian => {
                let nm = self.n_s * self.m;
                CMatrix::from_iterator(self.n_s, self.m, (0..nm).map(|p| c(eta[p], eta[nm + p])))
            }
            ChannelKind::RankOneTarget => {
                let alpha = c(eta[0], eta[1]);
                let theta = eta[2];
                (steering(self.n_s, theta) * steering(self.m, theta).transpose()).map(|z| z * alpha)
            }
            ChannelKind::AngleOnlyTarget { gain } => {
                let theta = eta[0];
                (steering(self.n_s, theta) * steering(self.m, theta).transpose()).map(|z| z * gain)
            }
            ChannelKind::Custom(cc) => (cc.map)(eta),
        }
    }

    /// Channel derivatives `d H_s / d eta_k`, one `N_s x M` matrix per parameter.
    fn channel_derivatives(&self, eta: &[f64]) -> Vec<CMatrix> {
        let (n_s, m) = (self.n_s, self.m);
        match &self.kind {
            ChannelKind::Scalar => vec![CMatrix::from_element(1, 1, c(1.0, 0.0))],
            ChannelKind::LinearGaussian => {
                let nm = n_s * m;
                (0..2 * nm)
                    .map(|p| {
                        let mut d = CMatrix::zeros(n_s, m);
                        let q = p % nm;
                        d[(q % n_s, q / n_s)] = if p < nm { c(1.0, 0.0) } else { J };
                        d
                    })
                    .collect()
            }
            ChannelKind::RankOneTarget => {
                let alpha = c(eta[0], eta[1]);
                let theta = eta[2];
                let (b, a) = (steering(n_s, theta), steering(m, theta));
                let outer = &b * a.transpose();
                let d_theta = (steering_derivative(n_s, theta) * a.transpose()
                    + &b * steering_derivative(m, theta).transpose())
                    .map(|z| z * alpha);
                vec![outer.clone(), outer.map(|z| z * J), d_theta]
            }
            ChannelKind::AngleOnlyTarget { gain } => {
                let theta = eta[0];
                let (b, a) = (steering(n_s, theta), steering(m, theta));
                let d_theta = (steering_derivative(n_s, theta) * a.transpose()
                    + b * steering_derivative(m, theta).transpose())
                    .map(|z| z * gain);
                vec![d_theta]
            }
            ChannelKind::Custom(_) => unreachable!("custom models use their own Jacobian"),
        }
    }

    fn stack(&self, derivs: &[CMatrix]) -> CMatrix {
        let (n_s, m) = (self.n_s, self.m);
        let mut f = CMatrix::zeros(self.k, 2 * n_s * m);
        for (k, d) in derivs.iter().enumerate() {
            for i in 0..n_s {
                for col in 0..m {
                    f[(k, i * m + col)] = d[(i, col)].conj();
                    f[(k, (n_s + i) * m + col)] = d[(i, col)];
                }
            }
        }
        f
    }

    /// Analytic Jacobian (see module docs for the layout); custom models
    /// without one fall back to central differences with step `1e-6`.
    pub fn jacobian(&self, eta: &[f64]) -> Result<CMatrix> {
        self.check_eta(eta)?;
        match &self.kind {
            ChannelKind::Custom(cc) => match &cc.jacobian {
                Some(jac) => {
                    let f = jac(eta);
                    if f.shape() != (self.k, 2 * self.n_s * self.m) {
                        return Err(Error::invalid(format!(
                            "custom Jacobian has shape {:?}, expected ({}, {})",
                            f.shape(),
                            self.k,
                            2 * self.n_s * self.m
                        )));
                    }
                    Ok(f)
                }
                None => self.finite_diff_jacobian(eta, 1e-6),
            },
            _ => Ok(self.stack(&self.channel_derivatives(eta))),
        }
    }

    /// Central-difference Jacobian of `evaluate_channel`, stacked like [`Self::jacobian`].
    pub fn finite_diff_jacobian(&self, eta: &[f64], step: f64) -> Result<CMatrix> {
        self.check_eta(eta)?;
        if !(step > 0.0) {
            return Err(Error::invalid(format!("finite-difference step must be > 0, got {step}")));
        }
        Ok(self.stack(&self.finite_diff_derivatives(eta, step)))
    }

    /// Central-difference estimates of `d H_s / d eta_k`.
    pub fn finite_diff_derivatives(&self, eta: &[f64], step: f64) -> Vec<CMatrix> {
        let mut probe = eta.to_vec();
        (0..self.k)
            .map(|k| {
                probe[k] = eta[k] + step;
                let plus = self.channel_unchecked(&probe);
                probe[k] = eta[k] - step;
                let minus = self.channel_unchecked(&probe);
                probe[k] = eta[k];
                (plus - minus).map(|z| z / (2.0 * step))
            })
            .collect()
    }

    /// Block `i` of the Jacobian (`0 <= i < 2 N_s`), a `K x M` matrix.
    pub fn jacobian_block(&self, f: &CMatrix, i: usize) -> CMatrix {
        f.columns(i * self.m, self.m).into_owned()
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::invalid("sample_prior needs n >= 1"));
        }
        Ok((0..n).map(|_| self.prior.sample(rng)).collect())
    }

    pub fn prior_fim(&self) -> RMatrix {
        self.prior.fim()
    }
}

/// Distribution of the communication channel `H_c` (`N_c x M`).
#[derive(Debug, Clone, PartialEq)]
pub enum CommChannelModel {
    Fixed(CMatrix),
    /// I.i.d. CN(0, variance) entries.
    IidGaussian { n_c: usize, m: usize, variance: f64 },
}

impl CommChannelModel {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            CommChannelModel::Fixed(h) => h.shape(),
            CommChannelModel::IidGaussian { n_c, m, .. } => (*n_c, *m),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, CommChannelModel::Fixed(_))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        match self {
            CommChannelModel::Fixed(h) => h.clone(),
            CommChannelModel::IidGaussian { n_c, m, variance } => {
                complex_gaussian_matrix(rng, *n_c, *m).map(|z| z * variance.sqrt())
            }
        }
    }

    pub fn check_against(&self, scenario: &Scenario) -> Result<()> {
        let (n_c, m) = self.dims();
        if n_c != scenario.n_c || m != scenario.m {
            return Err(Error::invalid(format!(
                "communication channel is {n_c} x {m} but the scenario has N_c = {}, M = {}",
                scenario.n_c, scenario.m
            )));
        }
        if let CommChannelModel::IidGaussian { variance, .. } = self {
            if !(*variance > 0.0) {
                return Err(Error::invalid("communication channel variance must be positive"));
            }
        }
        Ok(())
    }
}
