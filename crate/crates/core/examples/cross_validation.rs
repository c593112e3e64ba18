//! Five-fold cross-validation of the penalty weight.

use std::sync::Arc;

use rand::SeedableRng;
use rocem::simharness::{generate, Scenario};
use rocem::tuning::{cv_select_nu, CvPlan};
use rocem::{EmOptions, SplineBasis};

fn main() -> rocem::Result<()> {
    let scenario = Scenario::univariate(0.95, 300, 1, 11);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let data = generate(&scenario, &mut rng)?.markers.remove(0);

    let basis = Arc::new(SplineBasis::from_order(50, 4)?);
    let plan = CvPlan {
        seed: 11,
        ..CvPlan::default()
    };
    let cv = cv_select_nu(&data, basis, scenario.rates()?, &plan, &EmOptions::default())?;

    for p in &cv.curve {
        let mark = if p.nu == cv.nu_star { "  <-" } else { "" };
        match p.score {
            Some(s) => println!("nu = {:9.2e}  held-out loglik = {s:10.3}{mark}", p.nu),
            None => println!("nu = {:9.2e}  ({} folds failed)", p.nu, p.failed_folds),
        }
    }
    println!("selected nu = {:.3e}", cv.nu_star);
    Ok(())
}
