//! Two correlated markers measured on the same subjects: fit each marginally
//! and report the differences in ROC(s), AUC, pAUC and Youden's index.

use rand::SeedableRng;
use rocem::cli::{analyze_marker, FitSettings};
use rocem::estimators::compare_markers;
use rocem::simharness::{generate, true_targets, Scenario};

fn main() -> rocem::Result<()> {
    let scenario = Scenario::bivariate(0.95, 500, 1, 4);
    let rates = scenario.rates()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let sample = generate(&scenario, &mut rng)?;

    let settings = FitSettings {
        nu: Some(0.005),
        ..FitSettings::default()
    };
    let a = analyze_marker(&sample.markers[0], rates, &settings)?;
    let b = analyze_marker(&sample.markers[1], rates, &settings)?;
    let d = compare_markers(&a.summary, &b.summary)?;
    let truth = true_targets(&scenario.dgp, 0.1, 0.3)?.delta.expect("two markers");

    println!("marker 1 AUC {:.4}, marker 2 AUC {:.4}", a.summary.auc, b.summary.auc);
    println!("dAUC    {:+.4}  (true {:+.4})", d.auc, truth.auc);
    println!("dpAUC   {:+.4}  (true {:+.4})", d.pauc, truth.pauc);
    println!("dYouden {:+.4}  (true {:+.4})", d.youden_j, truth.youden);
    let at = |s: f64| d.roc_grid.iter().min_by(|p, q| (p.0 - s).abs().total_cmp(&(q.0 - s).abs())).unwrap();
    let p = at(0.2);
    println!("dROC({:.2}) {:+.4}", p.0, p.1);
    Ok(())
}
