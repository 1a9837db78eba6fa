//! The oracle suite behind `isac verify`, run on each built-in sensing model.

use isac_region::cli::{run_verify, VerifyConfig};
use isac_region::covopt::SolverOptions;
use isac_region::model::{Scenario, SensingModel};
use isac_region::region::McOptions;

fn main() -> isac_region::Result<()> {
    let s = Scenario { m: 2, n_s: 2, n_c: 2, t: 8, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1.0 };
    let models = [
        ("linear-gaussian", SensingModel::linear_gaussian(2, 2, vec![1.0, 0.5, 2.0, 1.0, 1.0, 0.5, 2.0, 1.0])?),
        ("rank-one-target", SensingModel::rank_one_target(2, 2, [1.0, 0.0, 0.2], [0.2, 0.2, 0.05])?),
        ("angle-only-target", SensingModel::angle_only_target(2, 2, isac_region::linalg::c(0.0, 1.0), -0.4, 0.02)?),
    ];
    let mc = McOptions { choi_samples: 4_000, ..McOptions::default() };
    let vcfg = VerifyConfig { bfim_samples: 20_000, bfim_tol: 0.1, ..VerifyConfig::default() };
    for (name, model) in &models {
        println!("== {name}");
        let report = run_verify(&s, model, &SolverOptions::default(), &mc, &vcfg, 17)?;
        report.print(&mut std::io::stdout(), false);
    }
    Ok(())
}
