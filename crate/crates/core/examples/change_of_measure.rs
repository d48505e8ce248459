//! Certifies the trajectory-to-step change of measure on random instances
//! and searches for instances where the moment ratio is large.

use outcome_rl::measure_lemma::{
    lemma_certificate, random_functional, tightness_probe, ProbeFamily,
};
use outcome_rl::mdp::random::{random_mdp, random_policy, RandomMdpConfig};
use outcome_rl::mdp::default_cap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> outcome_rl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cap = default_cap();
    for i in 0..5 {
        let mdp = random_mdp(&mut rng, &RandomMdpConfig::default());
        let pi = random_policy(&mut rng, mdp.shape(), false);
        let off = random_policy(&mut rng, mdp.shape(), true);
        let f = random_functional(&mut rng, &mdp);
        let cert = lemma_certificate(&mdp, &pi, &off, &f, cap)?;
        println!(
            "instance {i}: H={} C_sa={:.3} E_pi f^2={:.4e} E_off f^2={:.4e} bound={:.3e} pass={}",
            cert.horizon, cert.c_sa, cert.second_pi, cert.second_off, cert.bound_ratio, cert.passes()
        );
    }
    let report = tightness_probe(&ProbeFamily::Random(RandomMdpConfig::default()), 7, 500, cap)?;
    println!(
        "probe: {} of {} scored, max ratio/(H^3 C_sa) = {:.4}, max ratio/C_sa = {:.4}",
        report.scored, report.trials, report.max_score(), report.max_ratio_over_c
    );
    for horizon in 1..=4 {
        let r = tightness_probe(&ProbeFamily::IndependentCoordinates { horizon }, 0, 1, cap)?;
        println!("independent coordinates H={horizon}: ratio/C_sa = {:.4}", r.max_ratio_over_c);
    }
    Ok(())
}
