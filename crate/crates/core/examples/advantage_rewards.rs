//! Q-values make a poor process reward, advantages do not; then the full
//! rollout-estimate, fit, plan pipeline with its bound.

use outcome_rl::advantage::{advantage_pipeline, default_nu, q_as_reward_gap, Planner};
use outcome_rl::fixtures::{advantage_reward_class, counterexample, with_bounded_suffixes};
use outcome_rl::mdp::random::{random_mdp, random_policy, RandomMdpConfig};
use outcome_rl::mdp::{default_cap, optimal_plan, value_tables};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> outcome_rl::Result<()> {
    let (mdp, mu) = counterexample();
    let (pi_q, gap) = q_as_reward_gap(&mdp, &mu);
    println!("greedy on Q^mu plays {:?} at the root and loses {gap:.6}", pi_q.action(0, 0));
    let adv = value_tables(&mdp, &mu, mdp.rewards()).advantage;
    let pi_a = optimal_plan(&mdp, &adv).policy;
    println!("greedy on A^mu plays {:?} at the root", pi_a.action(0, 0));

    // Rollouts are exact on the deterministic counterexample; use a random
    // stochastic instance for the estimation pipeline.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mdp = with_bounded_suffixes(&random_mdp(&mut rng, &RandomMdpConfig::default()));
    let mu = random_policy(&mut rng, mdp.shape(), false);
    let class = advantage_reward_class(&mdp, &mu)?;
    let nu = default_nu(&mdp);
    for k in [1, 4, 64] {
        for planner in [Planner::Exact, Planner::Truncated { depth: 1 }] {
            let r = advantage_pipeline(&mdp, &mu, &class, &nu, k, planner, default_cap(), &mut rng)?;
            println!(
                "k={k:>2} {planner:?}: subopt {:.4} eps_stat {:.4} eps_alg {:.4} bound {:.4} (linear {:.4})",
                r.suboptimality, r.eps_stat, r.eps_alg, r.bound_sqrt, r.bound_linear
            );
        }
    }
    Ok(())
}
