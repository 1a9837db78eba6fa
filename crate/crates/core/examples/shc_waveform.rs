//! Successive hypersphere coding: the transmitted block pins the sample covariance exactly.

use isac_region::linalg::{complex_gaussian_matrix, frobenius, random_psd};
use isac_region::model::Scenario;
use isac_region::waveform::{gaussian_waveform, sample_covariance, shc_generate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isac_region::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = Scenario { m: 4, n_s: 4, n_c: 4, t: 10, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1.0 };
    let h = complex_gaussian_matrix(&mut rng, 4, 4);
    let r_sc = random_psd(&mut rng, 4, 2, s.total_power());

    let shc = shc_generate(&h, &r_sc, &s, 1e-8, &mut rng)?;
    let g = &h * &r_sc * h.adjoint();
    println!("SHC   |R_X - R_sc| / |R_sc| = {:.3e}", frobenius(&(&shc.sample_cov - &r_sc)) / frobenius(&r_sc));
    println!("      effective channel residual = {:.3e}", frobenius(&(sample_covariance(&(&h * &shc.x)) - &g)) / frobenius(&g));

    let gauss = gaussian_waveform(&r_sc, s.t, &mut rng)?;
    println!("Gauss |R_X - R_sc| / |R_sc| = {:.3e}", frobenius(&(&gauss.sample_cov - &r_sc)) / frobenius(&r_sc));

    let mut csv = Vec::new();
    shc.write_csv(&mut csv).expect("in-memory write");
    let first = String::from_utf8(csv).expect("utf8");
    println!("first CSV row: {}", first.lines().next().unwrap_or_default().chars().take(80).collect::<String>());
    Ok(())
}
