//! Water-filling on a hand case and the ergodic capacity of an i.i.d. Rayleigh channel.

use isac_region::comm::{ergodic_capacity, nats_to_bits, waterfill};
use isac_region::linalg::{c, CMatrix, CVector};
use isac_region::model::{CommChannelModel, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> isac_region::Result<()> {
    let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
    let wf = waterfill(&h, 1.0, 1.0)?;
    println!("gains {:?} powers {:?} water level {}", wf.gains, wf.powers, wf.water_level);
    println!("rate {:.12} bits, hand {:.12}", wf.rate_bits(), 4.5f64.log2() + 1.125f64.log2());

    let s = Scenario { m: 4, n_s: 4, n_c: 4, t: 16, p_t: 1.0, sigma_s2: 1.0, sigma_c2: 0.1 };
    let comm = CommChannelModel::IidGaussian { n_c: 4, m: 4, variance: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [100, 1_000, 10_000] {
        let e = ergodic_capacity(&comm, &s, n, &mut rng)?;
        println!("n = {n:>6}  R_max = {:.4} +- {:.4} bits", nats_to_bits(e.mean), nats_to_bits(e.std_err));
    }
    Ok(())
}
