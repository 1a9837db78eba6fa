//! Transmit blocks for the two corner points: successive hypersphere coding
//! when the sample covariance must be pinned, and i.i.d. Gaussian columns
//! for the capacity-achieving point.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    complex_gaussian_matrix, eigh_desc, frobenius, hermitian_part, pinv, psd_sqrt, CMatrix, CVector,
};
use crate::model::Scenario;

pub const PINV_TOL: f64 = 1e-12;
/// Relative leakage of `R_sc` outside the row space of `H_c` that still counts as reachable.
pub const REACH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformKind {
    Shc,
    Gaussian,
}

#[derive(Debug, Clone)]
pub struct Waveform {
    pub x: CMatrix,
    pub sample_cov: CMatrix,
    pub kind: WaveformKind,
}

impl Waveform {
    fn new(x: CMatrix, kind: WaveformKind) -> Self {
        let sample_cov = sample_covariance(&x);
        Waveform { x, sample_cov, kind }
    }

    /// Writes `X` as CSV: one line per antenna, `re,im` pairs for each of the `T` symbols.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.x.row_iter() {
            let mut line = String::new();
            for (j, z) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:.16e},{:.16e}", z.re, z.im));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Uniform draw from the unit sphere of `C^n`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CVector> {
    if n == 0 {
        return Err(Error::invalid("sphere dimension must be >= 1"));
    }
    loop {
        let g = CVector::from_iterator(n, (0..n).map(|_| crate::linalg::complex_normal(rng)));
        let norm = g.norm();
        if norm > 0.0 {
            return Ok(g.map(|z| z / norm));
        }
    }
}

/// `T^{-1} X X^H`
pub fn sample_covariance(x: &CMatrix) -> CMatrix {
    let t = x.ncols().max(1) as f64;
    hermitian_part(&(x * x.adjoint())).map(|z| z / t)
}

/// Orthonormal rows spanning the orthogonal complement of the rows of `q_partial`.
pub fn null_space_basis(q_partial: &CMatrix) -> CMatrix {
    let (k, t) = q_partial.shape();
    if k >= t {
        return CMatrix::zeros(0, t);
    }
    let mut stacked = CMatrix::zeros(t, k + t);
    stacked.columns_mut(0, k).copy_from(&q_partial.adjoint());
    stacked.columns_mut(k, t).fill_with_identity();
    let q = stacked.qr().q();
    q.columns(k, t - k).adjoint()
}

/// Successive hypersphere coding for the sample covariance `r_sc` over channel `h`.
///
/// Returns `X = sqrt(T) pinv(H) U S Q` where `H R_sc H^H = U S^2 U^H` and `Q`
/// has orthonormal rows drawn one at a time, each uniform on the unit sphere
/// of the complement of the rows before it.
pub fn shc_generate<R: Rng + ?Sized>(
    h: &CMatrix,
    r_sc: &CMatrix,
    scenario: &Scenario,
    rank_eig_tol: f64,
    rng: &mut R,
) -> Result<Waveform> {
    let m = scenario.m;
    let t = scenario.t;
    if h.ncols() != m || r_sc.shape() != (m, m) {
        return Err(Error::invalid("channel or covariance does not match the scenario"));
    }
    let g = h * r_sc * h.adjoint();
    let (vals, vecs) = eigh_desc(&g);
    let top = vals.first().copied().unwrap_or(0.0);
    let m_sc = if top > 0.0 { vals.iter().filter(|&&l| l > rank_eig_tol * top).count() } else { 0 };
    if m_sc == 0 {
        return Err(Error::invalid("effective covariance H R_sc H^H is zero; nothing to encode"));
    }
    if t < m_sc {
        return Err(Error::invalid(format!("SHC needs T >= M_SC, got T = {t}, M_SC = {m_sc}")));
    }
    let h_pinv = pinv(h, PINV_TOL);
    let projector = &h_pinv * h;
    let leak = frobenius(&(r_sc - &projector * r_sc));
    if leak > REACH_TOL * frobenius(r_sc) {
        return Err(Error::UnreachableSubspace(format!(
            "R_sc has a component of relative size {:.3e} outside the row space of H_c",
            leak / frobenius(r_sc)
        )));
    }

    let mut q = CMatrix::zeros(m_sc, t);
    for i in 0..m_sc {
        let row = if i == 0 {
            sample_unit_sphere(rng, t)?.transpose()
        } else {
            let basis = null_space_basis(&q.rows(0, i).into_owned());
            sample_unit_sphere(rng, t - i)?.transpose() * basis
        };
        q.set_row(i, &row);
    }
    let mut us = vecs.columns(0, m_sc).into_owned();
    for (j, &l) in vals.iter().take(m_sc).enumerate() {
        us.column_mut(j).scale_mut(l.sqrt());
    }
    let x = (h_pinv * us * q).map(|z| z * (t as f64).sqrt());
    Ok(Waveform::new(x, WaveformKind::Shc))
}

/// Block with i.i.d. `CN(0, R)` columns.
pub fn gaussian_waveform<R: Rng + ?Sized>(r_cs: &CMatrix, t: usize, rng: &mut R) -> Result<Waveform> {
    if t == 0 || r_cs.nrows() != r_cs.ncols() {
        return Err(Error::invalid("gaussian waveform needs T >= 1 and a square covariance"));
    }
    let w = complex_gaussian_matrix(rng, r_cs.nrows(), t);
    Ok(Waveform::new(psd_sqrt(r_cs) * w, WaveformKind::Gaussian))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random_psd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scen(m: usize, t: usize) -> Scenario {
        Scenario { m, n_s: m, n_c: m, t, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1.0 }
    }

    #[test]
    fn sphere_draws_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in 1..8 {
            assert!((sample_unit_sphere(&mut rng, n).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        assert!(sample_unit_sphere(&mut rng, 0).is_err());
        let n = 100_000;
        let mut mean = CVector::zeros(4);
        for _ in 0..n {
            mean += sample_unit_sphere(&mut rng, 4).unwrap();
        }
        assert!(mean.norm() / (n as f64) < 0.02);
    }

    #[test]
    fn null_space_examples() {
        let q = CMatrix::from_row_slice(1, 3, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let b = null_space_basis(&q);
        assert_eq!(b.shape(), (2, 3));
        assert!(b.column(0).norm() < 1e-12);
        let mut stacked = CMatrix::zeros(3, 3);
        stacked.rows_mut(0, 1).copy_from(&q);
        stacked.rows_mut(1, 2).copy_from(&b);
        assert!(frobenius(&(&stacked * stacked.adjoint() - CMatrix::identity(3, 3))) < 1e-12);
        assert_eq!(null_space_basis(&q), b);
        assert_eq!(null_space_basis(&CMatrix::identity(2, 2)).nrows(), 0);
    }

    #[test]
    fn null_space_of_random_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = complex_gaussian_matrix(&mut rng, 5, 2);
        let q = a.qr().q().adjoint();
        let b = null_space_basis(&q);
        assert_eq!(b.shape(), (3, 5));
        assert!(crate::linalg::max_abs(&(&b * q.adjoint())) < 1e-12);
        assert!(frobenius(&(&b * b.adjoint() - CMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn shc_square_channel_reproduces_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = scen(3, 7);
        let h = complex_gaussian_matrix(&mut rng, 3, 3);
        let r = random_psd(&mut rng, 3, 2, 3.0);
        let w = shc_generate(&h, &r, &s, 1e-8, &mut rng).unwrap();
        assert_eq!(w.kind, WaveformKind::Shc);
        assert_eq!(w.x.shape(), (3, 7));
        assert!(frobenius(&(&w.sample_cov - &r)) < 1e-10 * frobenius(&r));
        let hx = &h * &w.x;
        let g = &h * &r * h.adjoint();
        assert!(frobenius(&(sample_covariance(&hx) - &g)) < 1e-10 * frobenius(&g));
    }

    #[test]
    fn shc_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_psd(&mut rng, 3, 3, 3.0);
        let h = complex_gaussian_matrix(&mut rng, 3, 3);
        let short = Scenario { t: 2, ..scen(3, 3) };
        assert!(matches!(shc_generate(&h, &r, &short, 1e-8, &mut rng), Err(Error::InvalidArgument(_))));
        let wide = complex_gaussian_matrix(&mut rng, 2, 3);
        let s = Scenario { n_c: 2, ..scen(3, 4) };
        assert!(matches!(shc_generate(&wide, &r, &s, 1e-8, &mut rng), Err(Error::UnreachableSubspace(_))));
    }

    #[test]
    fn gaussian_waveform_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let zero = gaussian_waveform(&CMatrix::zeros(2, 2), 5, &mut rng).unwrap();
        assert!(zero.x.iter().all(|z| *z == c(0.0, 0.0)));
        let r = random_psd(&mut rng, 2, 2, 2.0);
        let w = gaussian_waveform(&r, 100_000, &mut rng).unwrap();
        assert!(frobenius(&(&w.sample_cov - &r)) < 0.03 * frobenius(&r));
        let a = gaussian_waveform(&r, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gaussian_waveform(&r, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn sample_covariance_of_semi_unitary_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = complex_gaussian_matrix(&mut rng, 6, 2).qr().q().adjoint();
        // rows scaled so that X X^H / T = P_T I with P_T = 2
        let x = q.map(|z| z * (2.0f64 * 6.0).sqrt());
        assert!(frobenius(&(sample_covariance(&x) - CMatrix::identity(2, 2).map(|z| z * 2.0))) < 1e-12);
        assert_eq!(sample_covariance(&CMatrix::zeros(2, 3)), CMatrix::zeros(2, 2));
    }

    #[test]
    fn csv_layout() {
        let x = CMatrix::from_row_slice(1, 2, &[c(1.0, -2.0), c(0.5, 0.0)]);
        let w = Waveform::new(x, WaveformKind::Gaussian);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let fields: Vec<f64> = text.trim().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields, vec![1.0, -2.0, 0.5, 0.0]);
    }
}
