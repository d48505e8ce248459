//! Tabular DPO over a finite policy class on a deterministic tree.

use outcome_rl::experiment::kl_closed_form_error;
use outcome_rl::fixtures::dpo_ladder;
use outcome_rl::mdp::default_cap;
use outcome_rl::preference::{collect_preferences, dpo_fit, implicit_value_range};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> outcome_rl::Result<()> {
    let cap = default_cap();
    let ladder = dpo_ladder(1.0, cap)?;
    println!("closed-form error of the KL-optimal policy: {:.2e}", kl_closed_form_error(&ladder, cap)?);
    for (j, pi) in ladder.class.iter().enumerate() {
        println!(
            "member {j:>2}: deficit {:.3e} regularized gap {:.3e} max |ln pi/pi_ref| {:.3}",
            ladder.deficits[j],
            ladder.gaps[j],
            implicit_value_range(&ladder.mdp, pi, &ladder.pi_ref, cap)?
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [128, 2048, 16384] {
        let data = collect_preferences(&ladder.mdp, &ladder.pi_ref, &ladder.reward, n, &mut rng);
        let fit = dpo_fit(&data, &ladder.class, &ladder.pi_ref, ladder.cfg.beta)?;
        println!("n={n:>5}: picks member {} (gap {:.3e})", fit.index, ladder.gaps[fit.index]);
    }
    Ok(())
}
