//! ROC curve, AUC, partial AUC and Youden's index from a fitted density
//! ratio, with the cutoff mapped back to the raw scale.

use std::sync::Arc;

use rand::SeedableRng;
use rocem::estimators::{default_s_grid, estimate_cdfs, summarize, youden};
use rocem::simharness::{generate, true_targets, Dgp, Scenario};
use rocem::{fit_em, EmOptions, PenalizedProblem, SplineBasis};

fn main() -> rocem::Result<()> {
    let scenario = Scenario::univariate(0.95, 500, 1, 5);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let data = generate(&scenario, &mut rng)?.markers.remove(0);

    let basis = Arc::new(SplineBasis::from_order(50, 4)?);
    let problem = PenalizedProblem::new(&data, basis, scenario.rates()?)?;
    let fit = fit_em(&problem, 0.005, &EmOptions::default())?;

    let cdfs = estimate_cdfs(&fit, data.scaled())?;
    let yp = youden(&fit, &cdfs);
    let summary = summarize(&cdfs, yp, &default_s_grid(11), 0.1, 0.3, data.transform())?;
    let truth = &true_targets(&Dgp::UnivariateNormal, 0.1, 0.3)?.markers[0];

    println!("{:>6} {:>8}", "s", "ROC(s)");
    for (s, r) in &summary.roc_grid {
        println!("{s:6.3} {r:8.4}");
    }
    println!("AUC    {:.4}  (true {:.4})", summary.auc, truth.targets.auc);
    println!("pAUC   {:.4}  (true {:.4})", summary.pauc.value, truth.targets.pauc);
    println!("Youden {:.4}  (true {:.4})", summary.youden_j, truth.targets.youden);
    println!("cutoff {:.4}  (true {:.4})", summary.cutoff_raw, truth.cutoff);
    Ok(())
}
