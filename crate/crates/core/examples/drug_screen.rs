//! Tabular completion on a synthetic drug-by-cell response matrix. Compares a
//! one-hot cell prior (which reduces to a shrunken row mean) with an
//! embedding prior, over repeated folds of held-out cells, and reports the
//! corrected resampled t statistic for the difference.
//!
//!     cargo run --release --example drug_screen

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ntk_complete::dual::Activation;
use ntk_complete::fc::{complete_matrix, ObservationSet};
use ntk_complete::metrics::{corrected_t_sqrt, mean_r2, pearson_r_paper, FoldDifferences};
use ntk_complete::priors::{one_hot_prior, reference_prior, EmbeddingTable};
use ntk_complete::solve::{Ridge, SolveOptions};

const GENES: usize = 60;
const CELLS: usize = 40;
const LATENT: usize = 4;

fn main() -> ntk_complete::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Low-rank responses: genes x cells.
    let u = Array2::from_shape_fn((GENES, LATENT), |_| rng.random::<f64>() - 0.5);
    let mut cell_embed = Array2::from_shape_fn((LATENT, CELLS), |_| rng.random::<f64>() - 0.5);
    for mut c in cell_embed.columns_mut() {
        let norm = c.dot(&c).sqrt();
        c /= norm;
    }
    let truth = u.dot(&cell_embed) + Array2::from_shape_fn((GENES, CELLS), |_| 0.05 * (rng.random::<f64>() - 0.5));

    // Cells carry a noisy view of their latent factors; the "drug" part is
    // shared, so only the cell block differs between columns.
    let noisy = &cell_embed + &Array2::from_shape_fn((LATENT, CELLS), |_| 0.05 * (rng.random::<f64>() - 0.5));
    let cells = EmbeddingTable::new((0..CELLS).map(|c| format!("cell{c}")).collect(), noisy, None)?;
    let drugs = EmbeddingTable::new(vec!["drug".into()], Array2::from_elem((2, 1), 1.0), None)?;
    let pairs: Vec<(String, String)> = (0..CELLS).map(|c| ("drug".to_string(), format!("cell{c}"))).collect();
    let embedding = reference_prior(&drugs, &cells, &pairs, 1.25)?;
    let one_hot = one_hot_prior(&(0..CELLS).collect::<Vec<_>>(), CELLS)?;

    let opts = SolveOptions { ridge: Ridge::TraceScaled(1e-6), ..SolveOptions::default() };
    let (k, r) = (5, 3);
    let mut diffs = Array2::zeros((k, r));
    for rep in 0..r {
        let mut order: Vec<usize> = (0..CELLS).collect();
        for i in (1..CELLS).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for fold in 0..k {
            let held: Vec<usize> = order.iter().copied().skip(fold).step_by(k).collect();
            let entries = (0..GENES)
                .flat_map(|g| (0..CELLS).map(move |c| (g, c)))
                .filter(|(_, c)| !held.contains(c))
                .map(|(g, c)| (g, c, truth[(g, c)]))
                .collect();
            let obs = ObservationSet::new((GENES, CELLS), entries)?;
            let score = |prior| -> ntk_complete::Result<f64> {
                let pred = complete_matrix(&obs, prior, 2, Activation::Relu, &opts)?.values;
                let p = pred.select(ndarray::Axis(1), &held);
                let t = truth.select(ndarray::Axis(1), &held);
                mean_r2(p.view(), t.view())
            };
            let (a, b) = (score(&embedding)?, score(&one_hot)?);
            if rep == 0 && fold == 0 {
                let pred = complete_matrix(&obs, &embedding, 2, Activation::Relu, &opts)?;
                println!("shared pattern: {}, factorizations: {}", pred.diagnostics.shared_pattern, pred.diagnostics.factorizations);
                let p = pred.values.select(ndarray::Axis(1), &held);
                let t = truth.select(ndarray::Axis(1), &held);
                println!("pearson r on held-out cells: {:.3}", pearson_r_paper(p.view(), t.view())?);
            }
            println!("rep {rep} fold {fold}: mean R2 embedding {a:.3}, one-hot {b:.3}");
            diffs[(fold, rep)] = a - b;
        }
    }
    let held = CELLS / k;
    let t = corrected_t_sqrt(&FoldDifferences::new(diffs, CELLS - held, held)?)?;
    println!("corrected t = {:.2} on {} degrees of freedom", t.t, t.dof);
    Ok(())
}
