//! A small Monte Carlo study in the format of the simulation tables.
//!
//! cargo run --release --example monte_carlo -- [se_sp] [n] [reps] [seed]

use rocem::cli::metrics_csv;
use rocem::simharness::{run_scenario, Scenario};

fn main() -> rocem::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.into());
    let se_sp: f64 = arg(0, "0.95").parse().expect("se_sp");
    let n: usize = arg(1, "100").parse().expect("n");
    let reps: usize = arg(2, "100").parse().expect("reps");
    let seed: u64 = arg(3, "1").parse().expect("seed");

    let report = run_scenario(&Scenario::univariate(se_sp, n, reps, seed))?;
    println!("nu chosen on replication 0: {:?}", report.nu_used);
    print!("{}", metrics_csv(&report)?);
    for (method, est) in &report.estimates {
        let failed = est.iter().filter(|e| e.is_none()).count();
        if failed > 0 {
            println!("{method}: {failed} failed replications");
        }
    }
    Ok(())
}
