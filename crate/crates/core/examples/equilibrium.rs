//! Optimal contract and Cournot efforts for a few type pairs, with the
//! fixed-point and golden-section oracles alongside.

use duopoly_contract::equilibrium::oracle::{
    argmax_lambda, fixed_point_efforts, FixedPointOptions,
};
use duopoly_contract::equilibrium::{lambda_star, unconstrained_lambda};
use duopoly_contract::{AgentType, EffortProfile, NoiseSpec};

fn main() -> duopoly_contract::Result<()> {
    let noise = NoiseSpec::uniform(0.1)?;
    println!(
        "{:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>10}",
        "theta1", "theta2", "lambda*", "floor", "a1", "a2", "oracle gap"
    );
    for (t1, t2) in [(1.0, 1.0), (2.0, 1.0), (0.3, 4.0), (5.0, 5.0)] {
        let types = [AgentType::new(t1)?, AgentType::new(t2)?];
        let s = lambda_star(&types, &noise);
        let fp = fixed_point_efforts(
            &types,
            &s.contract(),
            EffortProfile::ZERO,
            &FixedPointOptions::default(),
        );
        let found = argmax_lambda(
            &types,
            &noise,
            0.0,
            10.0 * unconstrained_lambda(&types),
            1e-10,
        );
        let gap = (fp.efforts.a1() - s.efforts.a1())
            .abs()
            .max((found - unconstrained_lambda(&types)).abs());
        println!(
            "{t1:>6} {t2:>6} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {gap:>10.1e}",
            s.lambda_star,
            s.lambda_floor,
            s.efforts.a1(),
            s.efforts.a2()
        );
    }
    Ok(())
}
