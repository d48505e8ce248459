//! Learns a per-step reward from totals only, imputes step rewards, and
//! hands the result to offline solvers.

use outcome_rl::fixtures::reward_ladder;
use outcome_rl::mdp::{optimal_value, policy_return};
use outcome_rl::outcome::{collect_outcome_dataset, outcome_to_process, sup_reward_evaluation_gap};
use outcome_rl::solvers::Solver;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> outcome_rl::Result<()> {
    let ladder = reward_ladder();
    let mdp = &ladder.mdp;
    let best = optimal_value(mdp, mdp.rewards());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [128, 1024, 8192] {
        let data = collect_outcome_dataset(mdp, &ladder.pi_off, n, &mut rng)?;
        for solver in [Solver::Fqi, Solver::ModelBasedGreedy] {
            let out = outcome_to_process(&data, &ladder.class, solver, mdp.shape(), 9)?;
            println!(
                "n={n:>5} {:<19} reward={:<7} sup gap={:.4} suboptimality={:.4}",
                solver.name(),
                ladder.class.name(out.fit.index),
                sup_reward_evaluation_gap(mdp, &out.fit.reward),
                best - policy_return(mdp, &out.policy, mdp.rewards()),
            );
        }
    }
    Ok(())
}
