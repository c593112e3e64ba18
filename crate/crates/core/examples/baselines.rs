//! The proposed fit next to the ECDF-inversion estimator and the naive fit
//! that trusts the reference standard, on one contaminated sample.

use std::sync::Arc;

use rand::SeedableRng;
use rocem::baselines::{naive_fit, np_inversion_cdfs};
use rocem::estimators::{auc, estimate_cdfs, pauc, youden, youden_from_cdfs};
use rocem::simharness::{generate, true_targets, Dgp, Scenario};
use rocem::{fit_em, EmOptions, PenalizedProblem, SplineBasis};

fn main() -> rocem::Result<()> {
    let scenario = Scenario::univariate(0.75, 500, 1, 2);
    let rates = scenario.rates()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let data = generate(&scenario, &mut rng)?.markers.remove(0);
    let basis = Arc::new(SplineBasis::from_order(50, 4)?);
    let opts = EmOptions::default();

    let em = fit_em(&PenalizedProblem::new(&data, Arc::clone(&basis), rates)?, 0.005, &opts)?;
    let em_cdfs = estimate_cdfs(&em, data.scaled())?;
    let naive = naive_fit(&data, basis, 0.005, &opts)?;
    let naive_cdfs = estimate_cdfs(&naive, data.scaled())?;
    let np_cdfs = np_inversion_cdfs(&data, &rates)?;

    let truth = true_targets(&Dgp::UnivariateNormal, 0.1, 0.3)?.markers[0].targets;
    println!("se = sp = 0.75: pi0 = {:.3}, pi1 = {:.3}", rates.pi0, rates.pi1);
    println!("{:6} {:>8} {:>8} {:>8} {:>8}", "", "ROC(.2)", "AUC", "pAUC", "Youden");
    println!(
        "{:6} {:8.4} {:8.4} {:8.4} {:8.4}",
        "truth", truth.roc, truth.auc, truth.pauc, truth.youden
    );
    let rows = [
        ("EM", &em_cdfs, youden(&em, &em_cdfs).j),
        ("NP", &np_cdfs, youden_from_cdfs(&np_cdfs).j),
        ("naive", &naive_cdfs, youden(&naive, &naive_cdfs).j),
    ];
    for (name, c, j) in rows {
        println!(
            "{name:6} {:8.4} {:8.4} {:8.4} {j:8.4}",
            c.roc(0.2),
            auc(c),
            pauc(c, 0.1, 0.3)?
        );
    }
    Ok(())
}
