//! Pessimism over a likelihood version space avoids a branch the data never
//! visits, where plug-in planning with an optimistic fitted reward does not.

use outcome_rl::fixtures::armor_instance;
use outcome_rl::mdp::{default_cap, deterministic_policies, optimal_value, policy_return};
use outcome_rl::outcome::{collect_outcome_dataset, outcome_to_process};
use outcome_rl::solvers::{armor_total_reward, choose_alpha, Solver, DEFAULT_ALPHA_CONSTANT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> outcome_rl::Result<()> {
    let inst = armor_instance();
    let mdp = &inst.mdp;
    let best = optimal_value(mdp, mdp.rewards());
    let policies = deterministic_policies(mdp.shape(), default_cap())?;
    let alpha = choose_alpha(inst.models.len(), 0.05, DEFAULT_ALPHA_CONSTANT)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = collect_outcome_dataset(mdp, &inst.pi_off, 4096, &mut rng)?;

    let armor = armor_total_reward(&data, &inst.models, alpha, &policies)?;
    println!("alpha = {alpha:.3}, version space = {:?}", armor.version_space.members);
    println!(
        "pessimistic: root action {:?}, suboptimality {:.3}",
        armor.policy.action(0, 0),
        best - policy_return(mdp, &armor.policy, mdp.rewards())
    );
    let naive = outcome_to_process(&data, &inst.rewards, Solver::PlugInGreedy, mdp.shape(), 3)?;
    println!(
        "plug-in:     root action {:?}, fitted reward `{}`, suboptimality {:.3}",
        naive.policy.action(0, 0),
        inst.rewards.name(naive.fit.index),
        best - policy_return(mdp, &naive.policy, mdp.rewards())
    );
    Ok(())
}
