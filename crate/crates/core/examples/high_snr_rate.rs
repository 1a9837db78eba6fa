//! Sensing-limited rate at high SNR under each constant convention.

use isac_region::comm::{nats_to_bits, r1_constant_c, r1_high_snr, sandwich_bounds, ConstantForm, R1Options};
use isac_region::linalg::{random_psd, CMatrix};
use isac_region::model::{CommChannelModel, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isac_region::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = Scenario { m: 3, n_s: 3, n_c: 3, t: 24, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 1e-4 };
    let r_sc = random_psd(&mut rng, 3, 2, s.total_power());
    let comm = CommChannelModel::IidGaussian { n_c: 3, m: 3, variance: 1.0 };
    for form in [ConstantForm::Consistent, ConstantForm::Appendix, ConstantForm::Statement] {
        let opts = R1Options { form, ..R1Options::default() };
        let r1 = r1_high_snr(&r_sc, &comm, &s, 2_000, &mut ChaCha8Rng::seed_from_u64(6), &opts)?;
        println!("{form:?}: R1 = {:.4} bits (M_SC = {})", r1.r1_bits(), r1.m_sc_mode());
    }

    println!("constant c(M_SC = 2, T) in nats:");
    for t in [4usize, 16, 256, 4096, 16384] {
        let k = r1_constant_c(2, t)?;
        println!("  T = {t:>5}  consistent {:>9.4}  appendix {:>9.4}  statement {:>12.4}", k.consistent, k.appendix, k.statement);
    }

    let h = CMatrix::identity(3, 3);
    let eigs = isac_region::linalg::eigh_desc(&(&h * &r_sc * h.adjoint())).0;
    let (lo, hi) = sandwich_bounds(&eigs[..2], s.sigma_c2, s.t);
    println!("sandwich for H = I: [{:.4}, {:.4}] bits", nats_to_bits(lo), nats_to_bits(hi));
    Ok(())
}
