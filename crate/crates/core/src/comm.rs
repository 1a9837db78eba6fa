//! Communication-side quantities: water-filling, ergodic capacity and the
//! high-SNR rate achieved while the sample covariance is pinned to the
//! sensing optimum.
//!
//! Rates are in nats throughout; [`nats_to_bits`] converts at the edges.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh_desc, CMatrix};
use crate::mc::{self, Estimate};
use crate::model::{CommChannelModel, Scenario};

pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}

#[derive(Debug, Clone)]
pub struct WaterfillResult {
    pub r_cs: CMatrix,
    /// nats per symbol
    pub rate: f64,
    pub water_level: f64,
    /// Squared singular values of the channel, descending.
    pub gains: Vec<f64>,
    /// Power on each eigenmode, aligned with `gains`.
    pub powers: Vec<f64>,
}

impl WaterfillResult {
    pub fn rate_bits(&self) -> f64 {
        nats_to_bits(self.rate)
    }

    /// Number of eigenmodes that receive power.
    pub fn active_modes(&self) -> usize {
        self.powers.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Water levels `a_i = sigma^2 / g_i` sorted ascending; returns `(mu, powers)`.
fn water_levels(gains: &[f64], total_power: f64, sigma2: f64) -> (f64, Vec<f64>) {
    let floors: Vec<f64> = gains.iter().map(|&g| sigma2 / g).collect();
    let mut active = floors.len();
    let mut mu = 0.0;
    while active > 0 {
        mu = (total_power + floors[..active].iter().sum::<f64>()) / active as f64;
        if mu > floors[active - 1] {
            break;
        }
        active -= 1;
    }
    let powers = floors.iter().map(|&a| (mu - a).max(0.0)).collect();
    (mu, powers)
}

/// Capacity-achieving covariance for one channel realisation.
pub fn waterfill(h: &CMatrix, total_power: f64, sigma_c2: f64) -> Result<WaterfillResult> {
    if !(total_power > 0.0) || !(sigma_c2 > 0.0) {
        return Err(Error::invalid("water-filling needs total_power > 0 and sigma_c2 > 0"));
    }
    let m = h.ncols();
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s_max = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > 1e-12 * s_max && s_max > 0.0)
        .collect();
    if kept.is_empty() {
        return Ok(WaterfillResult {
            r_cs: CMatrix::identity(m, m).map(|z| z * (total_power / m as f64)),
            rate: 0.0,
            water_level: f64::INFINITY,
            gains: Vec::new(),
            powers: Vec::new(),
        });
    }
    let gains: Vec<f64> = kept.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    let (mu, powers) = water_levels(&gains, total_power, sigma_c2);
    let mut r_cs = CMatrix::zeros(m, m);
    let mut rate = 0.0;
    for ((&idx, &g), &p) in kept.iter().zip(&gains).zip(&powers) {
        if p > 0.0 {
            let v = v_t.row(idx).adjoint();
            r_cs += (&v * v.adjoint()).map(|z| z * p);
            rate += (p * g / sigma_c2).ln_1p();
        }
    }
    Ok(WaterfillResult {
        r_cs: crate::linalg::hermitian_part(&r_cs),
        rate,
        water_level: mu,
        gains,
        powers,
    })
}

/// `ln det(I + H R H^H / sigma^2)` in nats.
pub fn rate_given_cov(h: &CMatrix, r: &CMatrix, sigma_c2: f64) -> f64 {
    let g = h * r * h.adjoint();
    let (vals, _) = eigh_desc(&g);
    vals.iter().map(|&l| (l.max(0.0) / sigma_c2).ln_1p()).sum()
}

/// Monte Carlo average of the per-realisation water-filling rate (nats).
pub fn ergodic_capacity<R: RngCore + ?Sized>(
    comm: &CommChannelModel,
    scenario: &Scenario,
    n_mc: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if n_mc == 0 {
        return Err(Error::invalid("ergodic capacity needs n_mc >= 1"));
    }
    comm.check_against(scenario)?;
    let power = scenario.total_power();
    if let CommChannelModel::Fixed(h) = comm {
        return Ok(Estimate::exact(waterfill(h, power, scenario.sigma_c2)?.rate));
    }
    let rates: Result<Vec<f64>> = mc::map_samples(rng, n_mc, |r| {
        waterfill(&comm.draw(r), power, scenario.sigma_c2).map(|w| w.rate)
    })
    .into_iter()
    .collect();
    Ok(Estimate::from_samples(&rates?))
}

/// Which expression to use for the additive constant of the high-SNR rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantForm {
    /// Per-symbol constant consistent with the Gaussian noise entropy and the
    /// Stiefel-manifold volume; tends to a finite limit and keeps the rate below capacity.
    #[default]
    Consistent,
    /// `sum_i [(1 - (2i-1)/2T) ln(pi T) - (1/T) ln Gamma(T-i+1)] + M ln 2`
    Appendix,
    /// `M (1 - M/2T) ln(pi T) + M ln 2 - sum_i ln Gamma(T-i+1)`
    Statement,
}

/// `ln Gamma(n + 1) = ln n!`
fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// Weight `1 - (2i-1)/(2T)` of the `i`-th eigenvalue (1-based).
pub fn dof_weight(i: usize, t: usize) -> f64 {
    1.0 - (2.0 * i as f64 - 1.0) / (2.0 * t as f64)
}

/// All three forms of the additive constant for `M_sc` streams over a block of `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantReport {
    pub consistent: f64,
    pub appendix: f64,
    pub statement: f64,
}

impl ConstantReport {
    pub fn get(&self, form: ConstantForm) -> f64 {
        match form {
            ConstantForm::Consistent => self.consistent,
            ConstantForm::Appendix => self.appendix,
            ConstantForm::Statement => self.statement,
        }
    }
}

pub fn r1_constant_c(m_sc: usize, t: usize) -> Result<ConstantReport> {
    if m_sc == 0 || m_sc > t {
        return Err(Error::invalid(format!("constant needs 1 <= M_sc <= T, got M_sc = {m_sc}, T = {t}")));
    }
    let tf = t as f64;
    let mf = m_sc as f64;
    let ln_pi_t = (std::f64::consts::PI * tf).ln();
    let ln_gammas: f64 = (1..=m_sc).map(|i| ln_factorial(t - i)).sum();
    let weights: f64 = (1..=m_sc).map(|i| dof_weight(i, t)).sum();
    let appendix = weights * ln_pi_t - ln_gammas / tf + mf * std::f64::consts::LN_2;
    let statement = mf * (1.0 - mf / (2.0 * tf)) * ln_pi_t + mf * std::f64::consts::LN_2 - ln_gammas;
    let consistent = weights * (tf.ln() - 1.0) - ln_gammas / tf
        + mf * (std::f64::consts::LN_2 + 0.5 * std::f64::consts::PI.ln()) / tf;
    Ok(ConstantReport {
        consistent,
        appendix,
        statement,
    })
}

/// `sum_i (1 - (2i-1)/2T) ln(lambda_i / sigma^2)` for descending eigenvalues.
pub fn r1_leading_term(eigs: &[f64], sigma_c2: f64, t: usize) -> f64 {
    eigs.iter()
        .enumerate()
        .map(|(i, &l)| dof_weight(i + 1, t) * (l / sigma_c2).ln())
        .sum()
}

/// Lower and upper bounds on [`r1_leading_term`] from Chebyshev's sum inequality:
/// `(1 - M/2T) sum ln(lambda_i/sigma^2) <= leading <= M (1 - M/2T) ln(lambda_1/sigma^2)`.
pub fn sandwich_bounds(eigs: &[f64], sigma_c2: f64, t: usize) -> (f64, f64) {
    let m = eigs.len() as f64;
    if eigs.is_empty() {
        return (0.0, 0.0);
    }
    let factor = 1.0 - m / (2.0 * t as f64);
    let logs: f64 = eigs.iter().map(|&l| (l / sigma_c2).ln()).sum();
    (factor * logs, m * factor * (eigs[0] / sigma_c2).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct R1Options {
    pub form: ConstantForm,
    pub rank_eig_tol: f64,
}

impl Default for R1Options {
    fn default() -> Self {
        R1Options {
            form: ConstantForm::Consistent,
            rank_eig_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R1Draw {
    /// Retained eigenvalues of `H_c R_sc H_c^H`, descending.
    pub eigenvalues: Vec<f64>,
    pub m_sc: usize,
    pub leading: f64,
    pub c: f64,
}

impl R1Draw {
    pub fn value(&self) -> f64 {
        self.leading + self.c
    }
}

#[derive(Debug, Clone)]
pub struct R1Result {
    /// Mean over draws clamped at zero, nats per symbol.
    pub r1: f64,
    /// Unclamped mean and its standard error.
    pub estimate: Estimate,
    pub per_draw: Vec<R1Draw>,
    pub form: ConstantForm,
    /// Smallest retained `lambda_i / sigma_c^2` seen across draws.
    pub min_snr: f64,
    pub warnings: Vec<String>,
}

impl R1Result {
    /// Most frequent `M_SC` across draws (ties go to the smaller value).
    pub fn m_sc_mode(&self) -> usize {
        mode(self.per_draw.iter().map(|d| d.m_sc))
    }

    pub fn r1_bits(&self) -> f64 {
        nats_to_bits(self.r1)
    }
}

pub(crate) fn mode(values: impl Iterator<Item = usize>) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&v, _)| v)
        .unwrap_or(0)
}

fn r1_draw(h: &CMatrix, r_sc: &CMatrix, scenario: &Scenario, opts: &R1Options) -> Result<R1Draw> {
    let g: CMatrix = h * r_sc * h.adjoint();
    let (vals, _) = eigh_desc(&g);
    let top = vals.first().copied().unwrap_or(0.0);
    let eigenvalues: Vec<f64> = if top > 0.0 {
        vals.into_iter().filter(|&l| l > opts.rank_eig_tol * top).collect()
    } else {
        Vec::new()
    };
    let m_sc = eigenvalues.len();
    if m_sc == 0 {
        return Ok(R1Draw { eigenvalues, m_sc, leading: 0.0, c: 0.0 });
    }
    if m_sc > scenario.t {
        return Err(Error::invalid(format!("T = {} is smaller than M_SC = {m_sc}", scenario.t)));
    }
    let leading = r1_leading_term(&eigenvalues, scenario.sigma_c2, scenario.t);
    let c = r1_constant_c(m_sc, scenario.t)?.get(opts.form);
    Ok(R1Draw { eigenvalues, m_sc, leading, c })
}

/// High-SNR rate at the sensing-optimal point, averaged over channel draws.
pub fn r1_high_snr<R: RngCore + ?Sized>(
    r_sc: &CMatrix,
    comm: &CommChannelModel,
    scenario: &Scenario,
    n_mc: usize,
    rng: &mut R,
    opts: &R1Options,
) -> Result<R1Result> {
    if n_mc == 0 {
        return Err(Error::invalid("r1_high_snr needs n_mc >= 1"));
    }
    comm.check_against(scenario)?;
    if r_sc.shape() != (scenario.m, scenario.m) {
        return Err(Error::invalid("sensing-optimal covariance has the wrong shape"));
    }
    let draws: Vec<R1Draw> = match comm {
        CommChannelModel::Fixed(h) => vec![r1_draw(h, r_sc, scenario, opts)?],
        _ => mc::map_samples(rng, n_mc, |r| r1_draw(&comm.draw(r), r_sc, scenario, opts))
            .into_iter()
            .collect::<Result<_>>()?,
    };
    let values: Vec<f64> = draws.iter().map(R1Draw::value).collect();
    let estimate = Estimate::from_samples(&values);
    let min_snr = draws
        .iter()
        .filter_map(|d| d.eigenvalues.last())
        .map(|&l| l / scenario.sigma_c2)
        .fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    if min_snr < 1e3 {
        warnings.push(format!(
            "high-SNR rate formula used with min lambda/sigma_c^2 = {min_snr:.3e} < 1e3; the dropped O(sigma_c^2) terms may matter"
        ));
    }
    Ok(R1Result {
        r1: estimate.mean.max(0.0),
        estimate,
        per_draw: draws,
        form: opts.form,
        min_snr,
        warnings,
    })
}

/// `(M_sc / M_cs) (1 - M_sc / 2T)`
pub fn dof_efficiency(m_sc: usize, m_cs: usize, t: usize) -> Result<f64> {
    if m_cs == 0 || t == 0 {
        return Err(Error::invalid("DoF efficiency needs M_cs >= 1 and T >= 1"));
    }
    let (ms, t) = (m_sc as f64, t as f64);
    Ok(ms / m_cs as f64 * (1.0 - ms / (2.0 * t)))
}
