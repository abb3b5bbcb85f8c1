//! Oracles and generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use cpse_core::{Container, GraphDocument, WeightTensor};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Eigenvalues of `[[a, b], [b, c]]` from the characteristic polynomial.
pub fn eig2(x: &DMatrix<f64>) -> Vec<f64> {
    let (a, b, c) = (x[(0, 0)], x[(0, 1)], x[(1, 1)]);
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c).powi(2) + b * b).sqrt();
    vec![mean + radius, mean - radius]
}

/// Closed-form roots of the 3x3 symmetric characteristic cubic.
pub fn eig3(x: &DMatrix<f64>) -> Vec<f64> {
    let p1 = x[(0, 1)].powi(2) + x[(0, 2)].powi(2) + x[(1, 2)].powi(2);
    let q = x.trace() / 3.0;
    let p2 = (0..3).map(|i| (x[(i, i)] - q).powi(2)).sum::<f64>() + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return vec![q; 3];
    }
    let b = (x - DMatrix::identity(3, 3) * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    vec![e1, 3.0 * q - e1 - e3, e3]
}

/// Number of eigenvalues of symmetric `x` below `shift` (Sylvester inertia of
/// `x - shift·I` via elimination without pivoting).
pub fn count_below(x: &DMatrix<f64>, shift: f64) -> usize {
    let n = x.nrows();
    let mut a = x.clone() - DMatrix::identity(n, n) * shift;
    let tiny = f64::EPSILON * x.amax().max(1.0) * 1e-3;
    let mut negative = 0;
    for k in 0..n {
        let mut pivot = a[(k, k)];
        if pivot == 0.0 {
            pivot = -tiny;
        }
        if pivot < 0.0 {
            negative += 1;
        }
        for i in (k + 1)..n {
            let f = a[(i, k)] / pivot;
            for j in (k + 1)..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    negative
}

/// All eigenvalues, descending, by bisection on the inertia count.
pub fn eig_bisect(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    let bound = (0..n)
        .map(|i| x.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let mut out: Vec<f64> = (0..n)
        .map(|k| {
            // k-th smallest: smallest t with count_below(t) > k
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(x, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    out.reverse();
    out
}

/// Smooth, normalize and sum `p·log2(p/q)` one term at a time.
pub fn kl_oracle(omega_p: &[f64], omega_q: &[f64], eps: f64) -> f64 {
    let smooth = |w: &[f64]| {
        let raw: Vec<f64> = w.iter().map(|v| v + eps).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect::<Vec<f64>>()
    };
    let (p, q) = (smooth(omega_p), smooth(omega_q));
    let mut acc = 0.0;
    for i in 0..p.len() {
        acc += p[i] * (p[i].ln() - q[i].ln()) / std::f64::consts::LN_2;
    }
    acc
}

pub fn matrix(
    rows: std::ops::RangeInclusive<usize>,
    cols: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = DMatrix<f64>> {
    (rows, cols).prop_flat_map(|(n, m)| {
        prop::collection::vec(-2.0f64..2.0, n * m).prop_map(move |v| DMatrix::from_row_slice(n, m, &v))
    })
}

pub fn tensor(index: usize) -> impl Strategy<Value = WeightTensor> {
    prop::collection::vec(1usize..5, 1..5).prop_flat_map(move |shape| {
        let len: usize = shape.iter().product();
        let name = format!("t{index}.weight");
        prop_oneof![
            prop::collection::vec(any::<f32>(), len).prop_map({
                let (name, shape) = (name.clone(), shape.clone());
                move |d| WeightTensor::f32(name.clone(), shape.clone(), d)
            }),
            prop::collection::vec(any::<f64>(), len).prop_map(move |d| WeightTensor::f64(
                name.clone(),
                shape.clone(),
                d
            )),
        ]
    })
}

pub fn container() -> impl Strategy<Value = Container> {
    (1usize..6, any::<bool>()).prop_flat_map(|(n, with_graph)| {
        (0..n).map(tensor).collect::<Vec<_>>().prop_map(move |layers| {
            let graph =
                with_graph.then(|| GraphDocument::chain(&layers.iter().map(|t| t.name.as_str()).collect::<Vec<_>>()));
            Container::new(layers, graph)
        })
    })
}
