//! Bradley-Terry preferences: calibration of the sampler and maximum
//! likelihood over a finite reward class.

use outcome_rl::fixtures::{reward_ladder, two_armed_bandit};
use outcome_rl::mdp::TabularPolicy;
use outcome_rl::preference::{collect_preferences, mle_reward, sigmoid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> outcome_rl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for gap in [0.0, 0.5, 1.0] {
        let mdp = two_armed_bandit(0.0, gap);
        let pi = TabularPolicy::uniform(mdp.shape());
        let data = collect_preferences(&mdp, &pi, mdp.rewards(), 20_000, &mut rng);
        let split: Vec<_> = data
            .pairs
            .iter()
            .filter(|p| p.win.steps()[0].action != p.lose.steps()[0].action)
            .collect();
        let wins = split.iter().filter(|p| p.win.steps()[0].action == 1).count();
        println!(
            "gap {gap}: better arm wins {:.4}, sigmoid {:.4}",
            wins as f64 / split.len() as f64,
            sigmoid(gap)
        );
    }
    let ladder = reward_ladder();
    for n in [256, 4096, 65536] {
        let data = collect_preferences(&ladder.mdp, &ladder.pi_off, ladder.mdp.rewards(), n, &mut rng);
        let fit = mle_reward(&data, &ladder.class)?;
        println!("n={n:>6}: MLE picks `{}`", ladder.class.name(fit.index));
    }
    Ok(())
}
