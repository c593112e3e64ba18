//! Presence-only reference standard: every nominal control is truly healthy
//! (pi0 = 1) while only a known share pi1 of nominal cases are diseased.
//! Values are log-normal, so the fit runs on the log scale, as one would for
//! parasite densities.

use rand::{Rng, SeedableRng};
use rand_distr::LogNormal;
use rocem::cli::{analyze_marker, analyze_np, FitSettings};
use rocem::{MixtureRates, TwoSampleData};

fn main() -> rocem::Result<()> {
    let pi1 = 0.677;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let healthy: LogNormal<f64> = LogNormal::new(5.0, 1.2).unwrap();
    let diseased: LogNormal<f64> = LogNormal::new(7.5, 1.2).unwrap();
    let x: Vec<f64> = (0..81).map(|_| rng.sample(healthy).ln()).collect();
    let y: Vec<f64> = (0..211)
        .map(|_| {
            if rng.random::<f64>() < pi1 {
                rng.sample(diseased).ln()
            } else {
                rng.sample(healthy).ln()
            }
        })
        .collect();
    let data = TwoSampleData::new(x, y, 0.01)?;
    let rates = MixtureRates::new(1.0, pi1)?;

    let settings = FitSettings::default();
    let em = analyze_marker(&data, rates, &settings)?;
    let (_, np) = analyze_np(&data, rates, &settings)?;
    let naive = analyze_marker(&data, MixtureRates::perfect(), &settings)?;

    println!("selected nu = {:.3e}", em.fit.nu);
    println!("{:6} {:>7} {:>7} {:>7} {:>12}", "", "AUC", "pAUC", "Youden", "cutoff (raw)");
    for (name, s) in [("EM", &em.summary), ("NP", &np), ("naive", &naive.summary)] {
        println!(
            "{name:6} {:7.3} {:7.3} {:7.3} {:12.1}",
            s.auc,
            s.pauc.value,
            s.youden_j,
            s.cutoff_raw.exp()
        );
    }
    Ok(())
}
