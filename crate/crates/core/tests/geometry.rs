mod common;

use proptest::prelude::*;
use subswap_core::geometry::{coprime_positions, CompressionOperator, ElementPositions};
use subswap_core::linalg::C64;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

proptest! {
    #[test]
    fn coprime_cardinality((m1, m2) in (2u32..40, 1u32..40).prop_filter("co-prime", |&(a, b)| gcd(a, b) == 1)) {
        let pos = coprime_positions(m1, m2).unwrap();
        let top = ((2 * m2 - 1) * m1).max((m1 - 1) * m2);
        let brute = (0..=top)
            .filter(|&x| (x % m1 == 0 && x / m1 < 2 * m2) || (x % m2 == 0 && x / m2 < m1))
            .count();
        prop_assert_eq!(pos.len(), brute);
        prop_assert_eq!(pos.len() as u32, m1 + 2 * m2 - 1);
        prop_assert_eq!(pos.aperture(), top);
    }

    #[test]
    fn compressors_are_row_orthonormal(psi in (4u32..40).prop_flat_map(|n| common::compressor(n, 1))) {
        prop_assert!(psi.matrix().row_orthonormality_error() <= 1e-10);
    }

    #[test]
    fn selection_keeps_selected_energy(
        mut keep in prop::collection::btree_set(1u32..30, 0..29),
        v in prop::collection::vec(common::complex(0.0, 3.0), 30),
    ) {
        keep.insert(0);
        let pos = ElementPositions::new(keep.into_iter().collect()).unwrap();
        let psi = CompressionOperator::selection(&pos, 30).unwrap();
        prop_assert!(psi.matrix().row_orthonormality_error() <= 1e-10);
        let y = psi.apply(&v).unwrap();
        for (r, &p) in pos.as_slice().iter().enumerate() {
            prop_assert_eq!(y[r].norm_sqr(), v[p as usize].norm_sqr());
        }
    }
}

#[test]
fn fixed_layouts_are_row_orthonormal() {
    for (m1, m2, n) in [(11, 9, 188), (5, 4, 36), (5, 2, 16)] {
        let psi = CompressionOperator::selection(&coprime_positions(m1, m2).unwrap(), n).unwrap();
        assert!(psi.matrix().row_orthonormality_error() <= 1e-10);
    }
    let id = CompressionOperator::identity(12);
    assert_eq!(id.matrix().row_orthonormality_error(), 0.0);
    let v: Vec<C64> = (0..12).map(|k| C64::new(k as f64, -1.0)).collect();
    assert_eq!(id.apply(&v).unwrap(), v);
}
