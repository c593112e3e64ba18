//! Fit the log density ratio by EM on contaminated Gaussian data and compare
//! it with the true ratio h(t) = t - 1/2.

use std::sync::Arc;

use rand::SeedableRng;
use rocem::simharness::{generate, Scenario};
use rocem::{fit_em, EmOptions, PenalizedProblem, SplineBasis};

fn main() -> rocem::Result<()> {
    let scenario = Scenario::univariate(0.9, 400, 1, 3);
    let rates = scenario.rates()?;
    println!("pi0 = {:.4}, pi1 = {:.4}", rates.pi0, rates.pi1);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let data = generate(&scenario, &mut rng)?.markers.remove(0);

    let basis = Arc::new(SplineBasis::from_order(50, 4)?);
    let problem = PenalizedProblem::new(&data, basis, rates)?;
    let fit = fit_em(&problem, 0.01, &EmOptions::default())?;

    println!(
        "EM iterations = {}, converged = {}, Q = {:.4}",
        fit.n_em_iters, fit.converged, fit.final_objective
    );
    let trace = &fit.objective_trace;
    println!("first objectives: {:?}", &trace[..trace.len().min(5)]);

    let tr = data.transform();
    println!("{:>7} {:>9} {:>9}", "t", "h_hat", "t - 1/2");
    for raw in [-1.5, -0.5, 0.0, 0.5, 1.0, 1.5, 2.5] {
        let u = tr.forward(raw);
        println!("{raw:7.2} {:9.4} {:9.4}", fit.h(u)?, raw - 0.5);
    }
    Ok(())
}
