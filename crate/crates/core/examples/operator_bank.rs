//! Choi decomposition of the sensing model and a Monte Carlo check of the closed-form BFIM.

use isac_region::bfim::{bfim, bfim_direct, build_choi, extract_operators, DEFAULT_TRUNCATION_TOL};
use isac_region::linalg::complex_gaussian_matrix;
use isac_region::model::{Scenario, SensingModel};
use isac_region::waveform::sample_covariance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isac_region::Result<()> {
    let s = Scenario { m: 3, n_s: 3, n_c: 3, t: 12, p_t: 1.0, sigma_s2: 0.5, sigma_c2: 1.0 };
    let model = SensingModel::rank_one_target(3, 3, [1.0, -0.5, 0.4], [0.3, 0.3, 0.02])?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let choi = build_choi(&model, 20_000, &mut rng)?;
    let bank = extract_operators(&choi, &s, &model, DEFAULT_TRUNCATION_TOL)?;
    println!("K = {}  ranks r1 = {}  r2 = {}", bank.k(), bank.r1(), bank.r2());

    let x = complex_gaussian_matrix(&mut rng, s.m, s.t);
    let closed = bfim(&bank, &sample_covariance(&x))?;
    let direct = bfim_direct(&model, &s, &x, 100_000, &mut rng)?;
    println!("closed form\n{closed:.5}");
    println!("score outer product\n{direct:.5}");
    println!("relative error {:.3e}", (&direct - &closed).norm() / closed.norm());
    Ok(())
}
