//! The 3x3 toy completion problem with an identity feature prior: prints the
//! kernel between observed entries, the cross kernel for a missing entry and
//! the completed matrix.
//!
//!     cargo run --example worked_example

use ntk_complete::dual::Activation;
use ntk_complete::fc::{column_kernel, complete_matrix, entry_cross, entry_gram, ObservationSet};
use ntk_complete::priors::identity_prior;
use ntk_complete::solve::SolveOptions;

fn main() -> ntk_complete::Result<()> {
    let obs = ObservationSet::new(
        (3, 3),
        vec![(0, 1, 0.5), (0, 2, 0.3), (1, 0, 0.1), (1, 1, 0.2), (2, 0, 0.4)],
    )?;
    let prior = identity_prior(3)?;
    let kernel = column_kernel(&prior, 1, Activation::Relu)?;

    println!("kernel between observed entries:\n{:.4}", entry_gram(&obs, &kernel));
    println!("cross kernel for (1, 2): {:.4}", entry_cross(&obs, &kernel, (1, 2)));

    let done = complete_matrix(&obs, &prior, 1, Activation::Relu, &SolveOptions::default())?;
    println!("completed:\n{:.4}", done.values);
    println!("{:?}", done.diagnostics);
    Ok(())
}
