//! Random scenario strategies shared by the property suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use proptest::prelude::*;
use subswap_core::geometry::{CompressionOperator, ElectricalAngle, ElementPositions};
use subswap_core::linalg::{CMatrix, C64};
use subswap_core::models::{CovarianceModel, MeanModel, SignalModel};

#[derive(Clone, Debug)]
pub struct Case {
    pub model: SignalModel,
    pub psi: CompressionOperator,
}

/// `p` distinct angles spaced between one half and one and a half Rayleigh widths.
pub fn angles(n: u32, p: usize) -> impl Strategy<Value = Vec<ElectricalAngle>> {
    let w = 2.0 * PI / f64::from(n);
    (-1.0f64..0.0, prop::collection::vec(0.5f64..1.5, p - 1)).prop_map(move |(base, gaps)| {
        let mut t = vec![base];
        for g in gaps {
            t.push(t.last().unwrap() + g * w);
        }
        t.into_iter().map(ElectricalAngle::new).collect()
    })
}

pub fn complex(lo: f64, hi: f64) -> impl Strategy<Value = C64> {
    (lo..hi, -PI..PI).prop_map(|(r, ph)| C64::from_polar(r, ph))
}

/// `B B^H + 0.1 I` with a random `p x p` factor.
pub fn source_covariance(p: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(complex(0.1, 1.5), p * p).prop_map(move |b| {
        let b = CMatrix::from_fn(p, p, |i, j| b[i * p + j]);
        let mut r = b.matmul(&b.adjoint()).unwrap();
        for i in 0..p {
            r[(i, i)] += C64::new(0.1, 0.0);
        }
        r
    })
}

/// A whitened random or a random selection compressor with `p < m <= n`.
pub fn compressor(n: u32, p: usize) -> impl Strategy<Value = CompressionOperator> {
    let n_us = n as usize;
    (p + 1..=n_us, any::<u64>(), any::<bool>()).prop_map(move |(m, seed, random)| {
        if random {
            CompressionOperator::random_whitened(m, n_us, seed).unwrap()
        } else {
            // Element 0 plus m - 1 others ordered by a hash of the seed.
            let mut idx: Vec<u32> = (1..n).collect();
            idx.sort_by_key(|&i| u64::from(i).wrapping_mul(seed | 1).rotate_left(29));
            let mut keep = idx[..m - 1].to_vec();
            keep.push(0);
            keep.sort_unstable();
            CompressionOperator::selection(&ElementPositions::new(keep).unwrap(), n_us).unwrap()
        }
    })
}

pub fn mean_case() -> impl Strategy<Value = Case> {
    (8u32..=20, 1usize..=3).prop_flat_map(|(n, p)| {
        (
            angles(n, p),
            prop::collection::vec(complex(0.5, 2.0), p),
            0.1f64..10.0,
            compressor(n, p),
        )
            .prop_map(move |(thetas, alpha, sigma2, psi)| Case {
                model: SignalModel::Mean(
                    MeanModel::new(ElementPositions::dense(n).unwrap(), thetas, alpha, sigma2).unwrap(),
                ),
                psi,
            })
    })
}

pub fn cov_case() -> impl Strategy<Value = Case> {
    (8u32..=20, 1usize..=3).prop_flat_map(|(n, p)| {
        (angles(n, p), source_covariance(p), 0.1f64..10.0, compressor(n, p)).prop_map(
            move |(thetas, r, sigma2, psi)| Case {
                model: SignalModel::Covariance(
                    CovarianceModel::new(ElementPositions::dense(n).unwrap(), thetas, r, sigma2).unwrap(),
                ),
                psi,
            },
        )
    })
}

pub fn any_case() -> impl Strategy<Value = Case> {
    prop_oneof![mean_case(), cov_case()]
}

/// `max |a - b|` over entries.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
