//! Drive the `rocem` command line from code: write a CSV, fit it with the
//! baselines, and read back the JSON report.

use rand::SeedableRng;
use rocem::simharness::{generate, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::univariate(0.9, 200, 1, 8);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let data = generate(&scenario, &mut rng)?.markers.remove(0);

    let dir = std::env::temp_dir().join("rocem-cli-workflow");
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("marker.csv");
    let mut body = String::from("value,label\n");
    for v in data.x() {
        body.push_str(&format!("{v},0\n"));
    }
    for v in data.y() {
        body.push_str(&format!("{v},1\n"));
    }
    std::fs::write(&csv, body)?;

    let rates = scenario.rates()?;
    let args = [
        "rocem".to_string(),
        "fit".into(),
        "--input".into(),
        csv.display().to_string(),
        "--pi0".into(),
        rates.pi0.to_string(),
        "--pi1".into(),
        rates.pi1.to_string(),
        "--with-baselines".into(),
    ];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = rocem::cli::main_with_args(args, &mut out, &mut err);
    if code != 0 {
        eprintln!("{}", String::from_utf8_lossy(&err));
        std::process::exit(code);
    }
    let report: serde_json::Value = serde_json::from_slice(&out)?;
    println!("nu      {}", report["inputs"]["nu"]);
    println!("AUC     {}", report["summary"]["auc"]);
    println!("Youden  {}", report["summary"]["youden"]["j"]);
    println!("NP AUC  {}", report["baselines"]["np"]["auc"]);
    println!("naive   {}", report["baselines"]["naive"]["auc"]);
    Ok(())
}
