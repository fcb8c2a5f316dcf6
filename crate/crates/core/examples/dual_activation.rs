//! Dual activations and the fully connected NTK as a function of the input
//! correlation.
//!
//!     cargo run --example dual_activation

use ntk_complete::dual::{dual, dual_derivative, kappa, Activation};

fn main() -> ntk_complete::Result<()> {
    let acts = [Activation::Relu, Activation::leaky_relu(0.1)?, Activation::Linear];
    println!("{:>6}  {:>22}  {:>10}  {:>10}  {:>10}  {:>10}", "xi", "activation", "dual", "derivative", "kappa_1", "kappa_3");
    for xi in [-1.0, -0.5, 0.0, 0.5, 0.9, 1.0] {
        for act in acts {
            println!(
                "{xi:>6.2}  {:>22}  {:>10.6}  {:>10.6}  {:>10.6}  {:>10.6}",
                act.to_string(),
                dual(act, xi)?,
                dual_derivative(act, xi)?,
                kappa(act, 1, xi)?,
                kappa(act, 3, xi)?
            );
        }
    }
    // Deeper networks push kappa_d(xi) / kappa_d(1) towards a constant.
    for d in [1, 2, 5, 10, 50] {
        println!("d = {d:>2}: kappa(0) / kappa(1) = {:.4}", kappa(Activation::Relu, d, 0.0)? / kappa(Activation::Relu, d, 1.0)?);
    }
    Ok(())
}
