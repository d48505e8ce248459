//! State-action coverage stays constant while trajectory coverage grows
//! exponentially with the horizon.

use outcome_rl::coverage::{
    all_policy_concentrability, state_action_concentrability, trajectory_concentrability,
};
use outcome_rl::fixtures::{biased_policy, independent_coordinates};
use outcome_rl::mdp::{default_cap, TabularPolicy};

fn main() -> outcome_rl::Result<()> {
    println!("{:>3} {:>10} {:>12} {:>12}", "H", "C_sa", "C_traj", "sup_pi C_sa");
    for horizon in 1..=8 {
        let mdp = independent_coordinates(horizon);
        let off = TabularPolicy::uniform(mdp.shape());
        let pi = biased_policy(mdp.shape(), 0.75);
        let c_sa = state_action_concentrability(&mdp, &pi, &off);
        let c_traj = trajectory_concentrability(&mdp, &pi, &off, default_cap())?;
        let sup = all_policy_concentrability(&mdp, &off);
        println!(
            "{horizon:>3} {:>10.4} {:>12.4} {:>12.4}",
            c_sa.value, c_traj.value, sup.value
        );
    }
    Ok(())
}
