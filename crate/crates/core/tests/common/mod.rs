#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2};

/// Dense Gauss-Jordan solve with partial pivoting. Deliberately naive so it
/// shares nothing with the library's factorizations.
pub fn gauss_solve(a: ArrayView2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    let mut m = Array2::<f64>::zeros((n, n + 1));
    m.slice_mut(ndarray::s![.., ..n]).assign(&a);
    m.column_mut(n).assign(b);
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[(x, c)].abs().partial_cmp(&m[(y, c)].abs()).unwrap())
            .unwrap();
        if p != c {
            for k in 0..=n {
                m.swap((p, k), (c, k));
            }
        }
        let piv = m[(c, c)];
        assert!(piv.abs() > 1e-300, "singular system");
        for k in c..=n {
            m[(c, k)] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[(r, c)];
                if f != 0.0 {
                    for k in c..=n {
                        m[(r, k)] -= f * m[(c, k)];
                    }
                }
            }
        }
    }
    m.column(n).to_owned()
}

/// ReLU dual written out longhand.
pub fn relu_dual(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    ((1.0 - x * x).sqrt() + (std::f64::consts::PI - x.acos()) * x) / std::f64::consts::PI
}

pub fn relu_dual_derivative(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    (std::f64::consts::PI - x.acos()) / std::f64::consts::PI
}

pub fn max_abs_diff(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
