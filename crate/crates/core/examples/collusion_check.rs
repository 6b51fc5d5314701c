//! When do the agents prefer to collude? Same-type gains around the
//! threshold, then side-payment ranges for different types.

use duopoly_contract::collusion::{
    alpha_bounds, different_type_rational, same_type_rational, same_type_threshold, theta_hat_range,
};
use duopoly_contract::equilibrium::lambda_star;
use duopoly_contract::{AgentType, ContractParams, NoiseSpec};

fn main() -> duopoly_contract::Result<()> {
    let noise = NoiseSpec::none();
    let unit = ContractParams::new(1.0)?;
    println!("same types, threshold {:.6}", same_type_threshold());
    for theta in [0.5, 0.64, 0.65, 1.0, 3.0] {
        let agent = AgentType::new(theta)?;
        let v = same_type_rational(&agent, &noise, &unit);
        let range = theta_hat_range(&agent);
        println!(
            "  theta {theta:<5} rational {:<5} gain {:+.6}  better targets ({:.4}, {:.4}]",
            v.rational, v.gain, range.lower, range.upper
        );
    }

    println!("different types (sigma = 0, optimal lambda)");
    for (th, tl) in [(3.0, 1.0), (1.5, 1.0), (1.9, 1.0), (4.0, 2.5)] {
        let types = [AgentType::new(th)?, AgentType::new(tl)?];
        let c = lambda_star(&types, &noise).contract();
        let verdict = different_type_rational(th, tl)?;
        let bounds = alpha_bounds(&types[0], &types[1], &noise, &c)?;
        let alpha = match bounds.feasible() {
            Some((lo, hi)) => format!("alpha in ({lo:.5}, {hi:.5})"),
            None => "no side payment works".to_string(),
        };
        println!(
            "  ({th}, {tl}): C1 {} C2 {} -> {alpha}",
            verdict.c1, verdict.c2
        );
    }
    Ok(())
}
