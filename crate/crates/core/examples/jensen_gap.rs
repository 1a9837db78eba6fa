//! Cost of random Gaussian blocks relative to a deterministic sample covariance, versus block length.

use isac_region::bfim::{build_choi, extract_operators, DEFAULT_TRUNCATION_TOL};
use isac_region::covopt::{jensen_gap_samples, solve_sensing_optimal, GaussianBlock, SolverOptions};
use isac_region::mc::Estimate;
use isac_region::model::{Scenario, SensingModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isac_region::Result<()> {
    let s = Scenario { m: 2, n_s: 2, n_c: 2, t: 8, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1.0 };
    let model = SensingModel::linear_gaussian(2, 2, vec![1.0, 2.0, 0.5, 1.0, 1.0, 2.0, 0.5, 1.0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bank = extract_operators(&build_choi(&model, 1, &mut rng)?, &s, &model, DEFAULT_TRUNCATION_TOL)?;
    let sol = solve_sensing_optimal(&bank, &s, &SolverOptions::default())?;
    println!("eps_min = {:.6e}", sol.crb);
    for t in [2usize, 8, 64, 512] {
        let sampler = GaussianBlock::new(&sol.r_opt, t)?;
        let gap = Estimate::from_samples(&jensen_gap_samples(&bank, sol.crb, &sampler, 5_000, &mut rng)?);
        println!("T = {t:>4}  gap = {:.4e} +- {:.1e}", gap.mean, gap.std_err);
    }
    Ok(())
}
