//! Library results against independent recomputations.

mod common;

use std::f64::consts::PI;

use ndarray::{array, Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ntk_complete::cntk::{build_cntk, gram_between, init_state, ArchSpec, Layer, PixelGram, PixelKernel};
use ntk_complete::dual::{dual, kappa, Activation};
use ntk_complete::expand::expand_arch;
use ntk_complete::fc::{column_kernel, complete_matrix, normalize_prior, ObservationSet};
use ntk_complete::metrics::{corrected_t, corrected_t_sqrt, mean_r2, ssim, FoldDifferences};
use ntk_complete::priors::{
    analytic_uniform_prior, identity_prior, meshgrid_prior, one_hot_prior, uniform_random_prior, ImagePrior,
};
use ntk_complete::solve::{solve, SolveOptions};

#[test]
fn one_hot_rows_predict_scaled_mean() {
    for l in [1usize, 3, 10, 50] {
        let n = l + 2;
        let z = one_hot_prior(&(0..n).collect::<Vec<_>>(), n).unwrap();
        let ys: Vec<f64> = (0..l).map(|k| ((k * 37 % 11) as f64) / 7.0 - 0.4).collect();
        let obs = ObservationSet::new((1, n), ys.iter().enumerate().map(|(k, &v)| (0, k, v)).collect()).unwrap();
        let out = complete_matrix(&obs, &z, 1, Activation::Relu, &SolveOptions::default()).unwrap().values;

        // K = (2 - 1/pi) I + (1/pi) 11^T on the observed block, k = (1/pi) 1.
        let k = Array2::from_shape_fn((l, l), |(a, b)| if a == b { 2.0 } else { 1.0 / PI });
        let alpha = common::gauss_solve(k.view(), &Array1::from_elem(l, 1.0 / PI));
        let by_hand: f64 = alpha.iter().zip(&ys).map(|(a, y)| a * y).sum();
        let mean = ys.iter().sum::<f64>() / l as f64;
        let closed = l as f64 / (2.0 * PI - 1.0 + l as f64) * mean;
        for j in l..n {
            assert!((out[(0, j)] - closed).abs() < 1e-8, "l = {l}: {} vs {closed}", out[(0, j)]);
            assert!((by_hand - closed).abs() < 1e-10);
        }
    }
}

#[test]
fn identity_prior_column_kernel() {
    let k = column_kernel(&identity_prior(3).unwrap(), 1, Activation::Relu).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let want = if a == b { 2.0 } else { 1.0 / PI };
            assert!((k.matrix()[(a, b)] - want).abs() < 1e-14);
        }
    }
}

#[test]
fn column_kernel_entrywise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw = Array2::from_shape_fn((4, 5), |_| rng.random::<f64>() - 0.5);
    let z = normalize_prior(raw).unwrap();
    let k = column_kernel(&z, 2, Activation::Relu).unwrap();
    let zd = z.data();
    for a in 0..5 {
        for b in 0..5 {
            let xi = zd.column(a).dot(&zd.column(b));
            // acos has infinite slope at 1, so an ulp of difference in the
            // diagonal inner products shows up near 1e-8.
            let tol = if a == b { 1e-7 } else { 1e-12 };
            assert!((k.matrix()[(a, b)] - kappa(Activation::Relu, 2, xi).unwrap()).abs() < tol);
        }
    }
}

#[test]
fn leaky_relu_dual_against_sampling() {
    let slope = 0.2;
    let act = Activation::leaky_relu(slope).unwrap();
    let c2 = 2.0 / (1.0 + slope * slope);
    let f = |x: f64| if x > 0.0 { x } else { slope * x };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = 400_000;
    for xi in [-0.9f64, -0.4, 0.0, 0.3, 0.8, 1.0] {
        let s: f64 = (1.0 - xi * xi).max(0.0).sqrt();
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..samples {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            let t = c2 * f(u) * f(xi * u + s * v);
            sum += t;
            sum2 += t * t;
        }
        let mean = sum / samples as f64;
        let se = ((sum2 / samples as f64 - mean * mean) / samples as f64).sqrt();
        let got = dual(act, xi).unwrap();
        assert!((got - mean).abs() < 4.0 * se, "xi = {xi}: {got} vs {mean} +- {se}");
    }
}

fn explicit_data(prior: &ImagePrior) -> &Array3<f64> {
    match prior {
        ImagePrior::Explicit { data } => data,
        _ => panic!("explicit prior expected"),
    }
}

#[test]
fn first_convolution_matches_quadruple_loop() {
    for q in [1usize, 3, 5] {
        let prior = uniform_random_prior(3, 5, 6, 1.0, q as u64).unwrap();
        let z = explicit_data(&prior);
        let (c, m, n) = z.dim();
        let state = init_state(&prior, q).unwrap();
        let h = (q / 2) as isize;
        let w = |k: usize, a: isize, len: usize| (k as isize + a).rem_euclid(len as isize) as usize;
        for i in 0..m {
            for j in 0..n {
                for i2 in 0..m {
                    for j2 in 0..n {
                        let mut acc = 0.0;
                        for a in -h..=h {
                            for b in -h..=h {
                                let mut g = 0.0;
                                for p in 0..c {
                                    g += z[(p, w(i, a, m), w(j, b, n))] * z[(p, w(i2, a, m), w(j2, b, n))];
                                }
                                acc += g;
                            }
                        }
                        assert_eq!(state.sigma[(i * n + j, i2 * n + j2)], acc);
                    }
                }
            }
        }
    }
}

/// One hidden layer, written out from the two-layer network's gradient
/// expectation.
#[test]
fn one_hidden_layer_transcription() {
    let q = 3;
    let prior = uniform_random_prior(2, 4, 4, 1.0, 21).unwrap();
    let z = explicit_data(&prior);
    let (m, n) = (4usize, 4usize);
    let idx = |i: usize, j: usize| i * n + j;
    let w = |k: usize, a: isize, len: usize| (k as isize + a).rem_euclid(len as isize) as usize;
    let mut k0 = Array2::<f64>::zeros((16, 16));
    for (x, x2) in itertools(16) {
        let (i, j, i2, j2) = (x / n, x % n, x2 / n, x2 % n);
        let mut acc = 0.0;
        for a in -1..=1 {
            for b in -1..=1 {
                for p in 0..2 {
                    acc += z[(p, w(i, a, m), w(j, b, n))] * z[(p, w(i2, a, m), w(j2, b, n))];
                }
            }
        }
        k0[(x, x2)] = acc;
    }
    let mut inner = Array2::<f64>::zeros((16, 16));
    for (x, x2) in itertools(16) {
        let norm = (k0[(x, x)] * k0[(x2, x2)]).sqrt();
        let xi = k0[(x, x2)] / norm;
        inner[(x, x2)] = norm * common::relu_dual(xi) + common::relu_dual_derivative(xi) * k0[(x, x2)];
    }
    let arch = ArchSpec::plain((4, 4), 1, q, Activation::Relu).unwrap();
    let built = build_cntk(&arch, &prior).unwrap();
    for (x, x2) in itertools(16) {
        let (i, j, i2, j2) = (x / n, x % n, x2 / n, x2 % n);
        let mut acc = 0.0;
        for a in -1..=1 {
            for b in -1..=1 {
                acc += inner[(idx(w(i, a, m), w(j, b, n)), idx(w(i2, a, m), w(j2, b, n)))];
            }
        }
        let want = acc / (q * q) as f64;
        assert!((built.matrix[(x, x2)] - want).abs() < 1e-12 * want.abs(), "{x},{x2}");
    }
}

fn itertools(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| (0..n).map(move |b| (a, b)))
}

#[test]
fn uniform_prior_correlation_tends_to_three_quarters() {
    let prior = uniform_random_prior(20_000, 2, 3, 1.0, 9).unwrap();
    let g = prior.pixel_gram();
    for a in 0..6 {
        for b in 0..6 {
            if a != b {
                let r = g[(a, b)] / (g[(a, a)] * g[(b, b)]).sqrt();
                assert!((r - 0.75).abs() < 0.01, "{r}");
            }
        }
    }
    assert_eq!(analytic_uniform_prior(2, 2).unwrap().rho(), Some(0.75));
}

#[test]
fn meshgrid_is_not_stationary() {
    assert!(!meshgrid_prior(6, 6).unwrap().is_stationary(1e-10));
    assert!(analytic_uniform_prior(6, 6).unwrap().is_stationary(1e-10));
}

#[test]
fn no_sampling_kernel_is_shift_invariant_at_16() {
    let arch = ArchSpec::plain((16, 16), 2, 3, Activation::Relu).unwrap();
    let k = build_cntk(&arch, &analytic_uniform_prior(16, 16).unwrap()).unwrap();
    let (m, n) = (16, 16);
    for (a, b) in [(1usize, 0usize), (0, 1), (5, 11)] {
        for (x, x2) in itertools(256) {
            let (i, j, i2, j2) = (x / n, x % n, x2 / n, x2 % n);
            let y = ((i + a) % m) * n + (j + b) % n;
            let y2 = ((i2 + a) % m) * n + (j2 + b) % n;
            assert_eq!(k.matrix[(x, x2)], k.matrix[(y, y2)]);
        }
    }
}

#[test]
fn sampling_breaks_shift_invariance_except_modulo_period() {
    let arch = ArchSpec::encoder_decoder((16, 16), 1, 3, Activation::Relu, false).unwrap();
    let k = build_cntk(&arch, &analytic_uniform_prior(16, 16).unwrap()).unwrap();
    let n = 16;
    let shifted = |x: usize, a: usize, b: usize| ((x / n + a) % n) * n + (x % n + b) % n;
    let mut worst_even = 0.0f64;
    let mut worst_odd = 0.0f64;
    for (x, x2) in itertools(256) {
        let v = k.matrix[(x, x2)];
        worst_even = worst_even.max((v - k.matrix[(shifted(x, 2, 0), shifted(x2, 2, 0))]).abs());
        worst_even = worst_even.max((v - k.matrix[(shifted(x, 0, 6), shifted(x2, 0, 6))]).abs());
        worst_odd = worst_odd.max((v - k.matrix[(shifted(x, 1, 0), shifted(x2, 1, 0))]).abs());
    }
    assert!(worst_even < 1e-10, "{worst_even}");
    assert!(worst_odd > 1e-3, "{worst_odd}");
}

#[test]
fn expansion_matches_direct_build_across_depths() {
    let prior = analytic_uniform_prior(2, 2).unwrap();
    for s in 0..=2usize {
        for d2 in [1usize << (s + 2), 1 << (s + 3)] {
            let arch = ArchSpec::encoder_decoder((d2, d2), s, 3, Activation::Relu, false).unwrap();
            let compact = expand_arch(&arch, &prior, d2).unwrap();
            assert_eq!(compact.stored_len(), (1 << (2 * s)) * d2 * d2);
            let direct = build_cntk(&arch, &prior.resized(d2, d2).unwrap()).unwrap();
            let mut worst = 0.0f64;
            for (x, x2) in itertools(d2 * d2) {
                let (i, j, i2, j2) = (x / d2, x % d2, x2 / d2, x2 % d2);
                worst = worst.max((compact.value(i, j, i2, j2) - direct.matrix[(x, x2)]).abs());
            }
            assert!(worst < 1e-10, "s = {s}, d2 = {d2}: {worst}");

            // Every stored row bottoms out at the same value.
            let rows = compact.rows();
            let p = 1 << s;
            let mins: Vec<f64> = (0..p * p)
                .map(|r| rows.slice(ndarray::s![r / p, r % p, .., ..]).iter().copied().fold(f64::INFINITY, f64::min))
                .collect();
            assert!(mins.iter().all(|v| (v - mins[0]).abs() < 1e-12), "{mins:?}");

            // Queries repeat with the period.
            for (i, j, i2, j2) in [(0, 1, 3, 2), (1, 1, 0, d2 - 1)] {
                let a = compact.query(i, j, i2, j2).unwrap();
                let b = compact.query((i + p) % d2, j, (i2 + p) % d2, j2).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn materialized_gram_slices_the_direct_kernel() {
    let arch = ArchSpec::encoder_decoder((32, 32), 2, 3, Activation::Relu, false).unwrap();
    let prior = analytic_uniform_prior(32, 32).unwrap();
    let compact = expand_arch(&arch, &prior, 32).unwrap();
    let direct = build_cntk(&arch, &prior).unwrap();
    let a: Vec<(usize, usize)> = (0..40).map(|k| (k * 7 % 32, k * 13 % 32)).collect();
    let b: Vec<(usize, usize)> = (0..25).map(|k| (k * 5 % 32, (k * 3 + 1) % 32)).collect();
    let g = compact.materialize_gram(&a, &b).unwrap();
    let want = gram_between(&direct, &a, &b).unwrap();
    assert!(common::max_abs_diff(g.view(), want.view()) < 1e-10);
    let sym = compact.materialize_gram(&a, &a).unwrap();
    assert_eq!(sym, sym.t());
    assert_eq!(compact.materialize_gram(&a[..1], &b[..1]).unwrap()[(0, 0)], compact.query(a[0].0, a[0].1, b[0].0, b[0].1).unwrap());
}

#[test]
fn ridgeless_predictions_ignore_kernel_scale() {
    let arch = ArchSpec::new((8, 8), vec![Layer::Conv { q: 3 }, Layer::Act(Activation::Relu), Layer::Conv { q: 3 }, Layer::Act(Activation::Relu)]).unwrap();
    let kernel = build_cntk(&arch, &uniform_random_prior(2, 8, 8, 1.0, 3).unwrap()).unwrap();
    let train: Vec<(usize, usize)> = (0..64).filter(|x| x % 3 != 0).map(|x| (x / 8, x % 8)).collect();
    let test: Vec<(usize, usize)> = (0..64).filter(|x| x % 3 == 0).map(|x| (x / 8, x % 8)).collect();
    let y = Array2::from_shape_fn((train.len(), 1), |(r, _)| ((r * 29 % 17) as f64) / 17.0);
    let cross = gram_between(&kernel, &train, &test).unwrap();
    let op = PixelGram::new(&kernel, train.clone()).unwrap();
    let predict = |opts: &SolveOptions| {
        let sol = solve(&op, y.view(), opts).unwrap();
        ntk_complete::solve::predict(sol.coefficients.view(), cross.view(), opts.kernel_scale).unwrap()
    };
    let base = predict(&SolveOptions::default());
    let scaled = predict(&SolveOptions { kernel_scale: 7.5, ..SolveOptions::default() });
    assert!(common::max_abs_diff(base.view(), scaled.view()) < 1e-9);
    let iter = predict(&SolveOptions { kernel_scale: 7.5, ..SolveOptions::iterative() });
    let iter_base = predict(&SolveOptions::iterative());
    assert!(common::max_abs_diff(iter.view(), iter_base.view()) < 1e-6);
}

#[test]
fn ssim_matches_reference_implementation() {
    let board = Array2::from_shape_fn((16, 16), |(i, j)| ((i + j) % 2) as f64);
    let inverse = board.mapv(|v| 1.0 - v);
    assert!((ssim(board.view(), inverse.view()).unwrap() - -0.9964064683569569).abs() < 1e-10);

    let g = Array2::from_shape_fn((20, 24), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0);
    let h = Array2::from_shape_fn((20, 24), |(i, j)| {
        (i as f64 / 3.0).sin() * 0.5 + 0.5 * (j as f64 / 5.0).cos().powi(2)
    });
    assert!((ssim(g.view(), h.view()).unwrap() - 0.007251926389942301).abs() < 1e-10);
}

#[test]
fn mean_r2_by_hand() {
    let truth = array![[1.0, 2.0, 3.0, 4.0], [2.0, 0.0, 1.0, 5.0]];
    let pred = array![[1.5, 2.0, 2.5, 4.5], [2.0, 1.0, 1.0, 4.0]];
    let mut total = 0.0;
    for c in 0..4 {
        let t = truth.column(c);
        let mean = t.sum() / 2.0;
        let ss_res: f64 = t.iter().zip(pred.column(c)).map(|(a, b): (&f64, &f64)| (a - b).powi(2)).sum();
        let ss_tot: f64 = t.iter().map(|a: &f64| (a - mean).powi(2)).sum();
        total += 1.0 - ss_res / ss_tot;
    }
    assert!((mean_r2(pred.view(), truth.view()).unwrap() - total / 4.0).abs() < 1e-14);
}

#[test]
fn corrected_t_by_hand() {
    let d = array![[0.10, 0.12, 0.08], [0.11, 0.09, 0.13]];
    let vals: Vec<f64> = d.iter().copied().collect();
    let mean = vals.iter().sum::<f64>() / 6.0;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
    let scale = 1.0 / 6.0 + 25.0 / 100.0;
    let fd = FoldDifferences::new(d, 100, 25).unwrap();
    assert!((corrected_t(&fd).unwrap().t - mean / (scale * var)).abs() < 1e-9);
    assert!((corrected_t_sqrt(&fd).unwrap().t - mean / (scale * var).sqrt()).abs() < 1e-9);
    assert_eq!(corrected_t(&fd).unwrap().dof, 5);
}
