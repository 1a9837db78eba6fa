//! Full pentagon inner bound for a MIMO link with a point target, written as CSV to stdout.

use isac_region::comm::ConstantForm;
use isac_region::covopt::SolverOptions;
use isac_region::model::{CommChannelModel, Scenario, SensingModel};
use isac_region::region::{compute_region, McOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isac_region::Result<()> {
    let s = Scenario { m: 4, n_s: 4, n_c: 2, t: 32, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1e-3 };
    let model = SensingModel::rank_one_target(4, 4, [1.0, 0.0, 0.3], [0.5, 0.5, 0.01])?;
    let comm = CommChannelModel::IidGaussian { n_c: 2, m: 4, variance: 1.0 };
    let mc = McOptions { choi_samples: 4_000, capacity_draws: 4_000, eps1_blocks: 4_000, segment_points: 11 };
    let res = compute_region(&s, &model, &comm, &SolverOptions::default(), &mc, ConstantForm::Consistent, &mut ChaCha8Rng::seed_from_u64(2024))?;

    let meta = &res.bound.meta;
    eprintln!("alpha {:.3}  beta {:.3}  zeta {:.3}  M_SC {}  M_CS {}", meta.alpha, meta.beta, meta.zeta, meta.m_sc, meta.m_cs);
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    res.bound.write_csv(std::io::stdout().lock()).expect("stdout");
    Ok(())
}
