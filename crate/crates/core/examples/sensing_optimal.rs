//! Sensing-optimal transmit covariance with its optimality certificate.

use isac_region::bfim::{build_choi, extract_operators, DEFAULT_TRUNCATION_TOL};
use isac_region::covopt::{kkt_check, solve_sensing_optimal, SolverOptions};
use isac_region::linalg::{c, eigh_desc};
use isac_region::model::{Scenario, SensingModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isac_region::Result<()> {
    let s = Scenario { m: 4, n_s: 4, n_c: 4, t: 32, p_t: 2.0, sigma_s2: 1.0, sigma_c2: 1.0 };
    let model = SensingModel::angle_only_target(4, 4, c(1.0, 0.0), 0.3, 0.05)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bank = extract_operators(&build_choi(&model, 10_000, &mut rng)?, &s, &model, DEFAULT_TRUNCATION_TOL)?;

    let opts = SolverOptions::default();
    let sol = solve_sensing_optimal(&bank, &s, &opts)?;
    let (eigs, _) = eigh_desc(&sol.r_opt);
    println!("eps_min = {:.6e} after {} iterations", sol.crb, sol.iterations);
    println!("eigenvalues of R_opt: {eigs:.4?}");
    println!("rank {} (bound min(K, M) = {})", sol.rank, bank.k().min(s.m));
    let (res, lambda) = kkt_check(&bank, &sol.r_opt, opts.rank_eig_tol)?;
    println!("KKT residual {res:.3e}, multiplier {lambda:.4e}");
    for (it, obj) in sol.history.iter().enumerate().take(8) {
        println!("  iter {it:>2}  objective {obj:.9e}");
    }
    Ok(())
}
