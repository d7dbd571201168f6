//! Kernel moment constants and the factor relating the residual-criterion
//! optimum to the MSE optimum, for the von Mises kernel and a custom one.

use circfit::kernel::{moment_b, moment_b_quadrature};
use circfit::{moment_pack, xi_factor, Kernel};

fn main() -> circfit::Result<()> {
    let vm = Kernel::von_mises();
    println!("von Mises moments b_j* (closed form vs quadrature)");
    for j in 0..=6 {
        println!("  j = {j}: {:.12}  {:.12}", moment_b(j, &vm)?, moment_b_quadrature(j, &vm)?);
    }
    for p in [1, 3] {
        let m = moment_pack(p, &vm)?;
        println!("p = {p}: a0 = {:.6}, C_p = {:.6}, xi = {:.6}", m.a0(), m.c_const, xi_factor(p, 0, &vm)?);
    }

    // compactly supported profile in r = kappa (1 - cos)
    let biweight = Kernel::custom("biweight", |r| if r < 4.0 { (1.0 - r / 4.0).powi(2) } else { 0.0 })?;
    let m = moment_pack(1, &biweight)?;
    println!("{}: a0 = {:.6}, xi = {:.6}", biweight.name(), m.a0(), xi_factor(1, 0, &biweight)?);
    Ok(())
}
