//! Solves a 1,000-point kernel system directly and with the preconditioned
//! iterative solver, then compares predictions.
//!
//!     cargo run --release --example iterative_solver

use ndarray::Array2;

use ntk_complete::cntk::{build_cntk, gram_between, ArchSpec, PixelGram};
use ntk_complete::dual::Activation;
use ntk_complete::priors::analytic_uniform_prior;
use ntk_complete::solve::{predict, solve, SolveOptions};

fn main() -> ntk_complete::Result<()> {
    let arch = ArchSpec::encoder_decoder((32, 32), 1, 3, Activation::Relu, false)?;
    let kernel = build_cntk(&arch, &analytic_uniform_prior(32, 32)?)?;
    let all: Vec<(usize, usize)> = (0..32 * 32).map(|x| (x / 32, x % 32)).collect();
    let (mut train, mut test): (Vec<_>, Vec<_>) = all.iter().partition(|&&(i, j)| (i * 32 + j) % 50 != 0);
    test.extend(train.split_off(1000));
    let y = Array2::from_shape_fn((train.len(), 1), |(r, _)| {
        let (i, j) = train[r];
        (i as f64 / 5.0).sin() + (j as f64 / 7.0).cos()
    });
    let cross = gram_between(&kernel, &train, &test)?;
    let op = PixelGram::new(&kernel, train.clone())?;

    let direct = solve(&op, y.view(), &SolveOptions::default())?;
    println!("{}", direct.report);
    let iter = solve(&op, y.view(), &SolveOptions { epochs: 30, ..SolveOptions::iterative() })?;
    println!("{}", iter.report);
    for (e, r) in iter.report.residuals.iter().enumerate().step_by(5) {
        println!("  epoch {:>3}: residual {r:.3e}", e + 1);
    }
    let a = predict(direct.coefficients.view(), cross.view(), 1.0)?;
    let b = predict(iter.coefficients.view(), cross.view(), 1.0)?;
    let gap = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
    println!("largest prediction gap {gap:.2e} (relative {:.2e})", gap / scale);
    Ok(())
}
