//! Cubic B-spline basis on [0, 1], its roughness penalty, and the map that
//! brings raw biomarker values onto the unit interval.

use rocem::basis::{fit_transform, SplineBasis};

fn main() -> rocem::Result<()> {
    // order 4 = cubic, the default used throughout
    let basis = SplineBasis::from_order(12, 4)?;
    println!(
        "K = {}, degree = {}, intervals = {}",
        basis.n_basis(),
        basis.degree(),
        basis.n_intervals()
    );

    for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
        let v = basis.eval(t)?;
        let total: f64 = v.iter().sum();
        let nonzero = v.iter().filter(|x| **x != 0.0).count();
        println!("t = {t:4}: sum = {total:.15}, nonzero = {nonzero}");
    }

    let phi = basis.penalty_matrix()?;
    let eig = phi.clone().symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    println!("smallest penalty eigenvalues: {:.2e} {:.2e} {:.2e}", ev[0], ev[1], ev[2]);

    // a constant coefficient vector has zero roughness
    let ones = nalgebra::DVector::from_element(basis.n_basis(), 1.0);
    println!("roughness of h = 1: {:.2e}", (ones.transpose() * &phi * &ones)[(0, 0)]);

    let (transform, t) = fit_transform(&[-1.3, 0.2, 2.4, 0.9], 0.01)?;
    println!("scaled: {t:?}");
    println!("back to raw: {:?}", t.iter().map(|&u| transform.inverse(u)).collect::<Vec<_>>());
    Ok(())
}
