//! Tabulate the weight each rule assigns to a squared residual, holding the
//! adaptive parameter fixed.

use robust_bayes::kernels::{asor_iteration_update, eror_weight, esor_weight, gnc_weight, AsorHyperParams, AsorState, Method};

fn main() -> robust_bayes::Result<()> {
    let mu = 4.0;
    let rho_sq = 4.0;
    let c_sq = 4.0;
    let hp = AsorHyperParams::default();
    let residuals: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0].to_vec();

    let mut state = AsorState::new(&hp);
    let asor = asor_iteration_update(&residuals, &mut state, &hp)?;

    println!("mu = rho^2 = c^2 = {mu}, GNC mu = 1, ASOR from its initial state");
    println!("{:>6} {:>8} {:>8} {:>8} {:>8} {:>8}", "r^2", "EROR", "ESOR", "ASOR", "GNC-GM", "GNC-TLS");
    for (r, a) in residuals.iter().zip(&asor) {
        println!(
            "{:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r,
            eror_weight(*r, mu)?,
            esor_weight(*r, rho_sq)?,
            a,
            gnc_weight(Method::GncGm, *r, 1.0, c_sq)?,
            gnc_weight(Method::GncTls, *r, 1.0, c_sq)?,
        );
    }
    println!("ASOR b_hat after one update: {:.4}", state.b_hat);
    Ok(())
}
