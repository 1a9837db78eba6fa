//! The scalar link end to end: every number here has a pencil-and-paper value.

use isac_region::bfim::{build_choi, extract_operators, DEFAULT_TRUNCATION_TOL};
use isac_region::comm::{ergodic_capacity, nats_to_bits};
use isac_region::covopt::{solve_sensing_optimal, SolverOptions};
use isac_region::linalg::CMatrix;
use isac_region::model::{CommChannelModel, Scenario, SensingModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isac_region::Result<()> {
    let s = Scenario { m: 1, n_s: 1, n_c: 1, t: 10, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 0.01 };
    let prior_var = 1.0;
    let model = SensingModel::scalar(prior_var)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let choi = build_choi(&model, 1, &mut rng)?;
    let bank = extract_operators(&choi, &s, &model, DEFAULT_TRUNCATION_TOL)?;
    let sol = solve_sensing_optimal(&bank, &s, &SolverOptions::default())?;
    let hand = 1.0 / (2.0 * s.t as f64 * s.p_t / s.sigma_s2 + 1.0 / prior_var);
    println!("eps_min  solver {:.12}  hand {:.12}", sol.crb, hand);

    let h = 0.8;
    let comm = CommChannelModel::Fixed(CMatrix::from_element(1, 1, h.into()));
    let r_max = ergodic_capacity(&comm, &s, 1, &mut rng)?;
    let hand = (1.0 + h * h * s.p_t / s.sigma_c2).log2();
    println!("R_max    solver {:.12}  hand {:.12} bits", nats_to_bits(r_max.mean), hand);
    Ok(())
}
