//! Dense complex linear-algebra helpers shared by every stage.
//!
//! Matrices are column-major `nalgebra::DMatrix`, so `vec(A)` is simply the
//! underlying storage slice and `mat_{m x n}(v)` is `from_column_slice`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;
pub type CVector = DVector<C64>;

pub const J: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// (A + A^H) / 2
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).map(|z| z * 0.5)
}

pub fn symmetric_part(a: &RMatrix) -> RMatrix {
    (a + a.transpose()) * 0.5
}

pub fn to_complex(a: &RMatrix) -> CMatrix {
    a.map(|x| C64::new(x, 0.0))
}

pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// Re tr(A B) without forming the product.
pub fn inner_re(a: &CMatrix, b: &CMatrix) -> f64 {
    // tr(AB) = sum_{ij} A_ij B_ji
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn eigh_desc(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = hermitian_part(a);
    let n = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Reassembles `V diag(values) V^H`.
pub fn from_eigen(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    hermitian_part(&(scaled * vectors.adjoint()))
}

/// Number of eigenvalues above `rel_tol * max(|lambda_max|, 0)`.
pub fn numerical_rank_hermitian(a: &CMatrix, rel_tol: f64) -> usize {
    if a.nrows() == 0 {
        return 0;
    }
    let (vals, _) = eigh_desc(a);
    let top = vals[0].max(0.0);
    if top == 0.0 {
        return 0;
    }
    vals.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Symmetric PSD square root; negative eigenvalues are clipped to zero.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh_desc(a);
    let roots: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    from_eigen(&roots, &vecs)
}

/// Moore-Penrose pseudo-inverse; singular values below `rel_tol * s_max` count as zero.
pub fn pinv(a: &CMatrix, rel_tol: f64) -> CMatrix {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return CMatrix::zeros(n, m);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = CMatrix::zeros(n, m);
    if s_max == 0.0 {
        return out;
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * s_max {
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k).adjoint();
            out += (vk * uk).map(|z| z / s);
        }
    }
    out
}

/// Inverse of a symmetric positive definite real matrix, or `None` when the
/// Cholesky factorisation fails.
pub fn spd_inverse(b: &RMatrix) -> Option<RMatrix> {
    let chol = symmetric_part(b).cholesky()?;
    let inv = chol.inverse();
    if inv.iter().all(|x| x.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

/// Projection of a real vector onto the simplex `{x >= 0, sum x = total}`.
pub fn project_simplex(values: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - total) / (k as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Standard circularly-symmetric complex Gaussian sample, CN(0, 1).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. CN(0, 1) entries.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // fill column-major explicitly so the draw order is fixed
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(complex_normal(rng));
    }
    CMatrix::from_vec(rows, cols, data)
}

/// Random Hermitian matrix with i.i.d. Gaussian entries (GUE-like).
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    hermitian_part(&complex_gaussian_matrix(rng, n, n))
}

/// Random PSD matrix `W W^H` with `rank` columns in W, scaled to the given trace.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize, trace: f64) -> CMatrix {
    let w = complex_gaussian_matrix(rng, n, rank.max(1));
    let r = hermitian_part(&(&w * w.adjoint()));
    let t = trace_re(&r);
    r.map(|z| z * (trace / t))
}

pub fn max_abs_im(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn real_part(a: &CMatrix) -> RMatrix {
    a.map(|z| z.re)
}
