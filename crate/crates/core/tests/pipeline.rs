// SPDX-License-Identifier: Apache-2.0

//! Cross-module checks: context networks through vector spaces, operators
//! and back into networks.

use epiq::context::{pad_virtual_values, propagate, validate_context, Amplitude, ContextNetwork, Layer};
use epiq::evolution::KnowabilityLevel::{Decided, Unknowable};
use epiq::hilbert::{
    build_space, commutator, make_operator, operator_to_property, projection_probability_deviation, PropertyOperator,
};
use epiq::uniqueness::{verify_multiplicativity, CandidateMap, PolynomialMap};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn rotation_net(angle: f64, init: f64) -> ContextNetwork {
    let (c, s) = (angle.cos(), angle.sin());
    let r = Amplitude::real;
    ContextNetwork::new(
        vec![
            Layer::new("P", Decided, vec![1.0, -1.0]),
            Layer::new("Q", Decided, vec![1.0, -1.0]),
        ],
        vec![r(init.cos()), r(init.sin())],
        vec![vec![vec![r(c), r(s)], vec![r(-s), r(c)]]],
    )
}

proptest! {
    #[test]
    fn rotated_contexts_reproduce_propagation(angle in 0.05f64..1.5, init in 0.0f64..6.2) {
        let net = rotation_net(angle, init);
        let space = build_space(&net, None, None).unwrap();
        prop_assert!(projection_probability_deviation(&space, &net).unwrap() <= 1e-12);
        let p = make_operator(&space, "P").unwrap();
        let q = make_operator(&space, "Q").unwrap();
        // [Z, R Z R^T] has norm 2 |sin 2 angle| for a real rotation R.
        let expected = 2.0 * (2.0 * angle).sin().abs();
        prop_assert!((commutator(&p, &q).unwrap().norm - expected).abs() <= 1e-9);
    }

    #[test]
    fn padding_keeps_probabilities(t in 0.1f64..1.4) {
        let r = Amplitude::real;
        let rows = vec![
            vec![r(t.cos()), r(t.sin())],
            vec![r(-t.sin()), r(t.cos())],
            vec![r(t.sin()), r(t.cos())],
            vec![r(t.cos()), r(-t.sin())],
        ];
        let net = ContextNetwork::new(
            vec![Layer::new("P", Unknowable, vec![1.0, 2.0, 3.0, 4.0]), Layer::new("Q", Decided, vec![1.0, 2.0])],
            vec![r(0.5); 4],
            vec![rows],
        );
        let (padded, report) = pad_virtual_values(&net, 1).unwrap();
        prop_assert!(validate_context(&padded).is_empty());
        prop_assert_eq!(padded.layer(1).len(), 4);
        prop_assert!(report.max_virtual_probability <= 1e-12);
        let d = propagate(&padded).unwrap();
        prop_assert!(d.probabilities[2..].iter().all(|p| p.abs() <= 1e-12));
    }
}

#[test]
fn operator_with_tilted_eigenbasis_defines_a_new_property() {
    let net = rotation_net(0.0, std::f64::consts::FRAC_PI_4);
    let space = build_space(&net, None, None).unwrap();
    let x = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    );
    let op = PropertyOperator::from_matrix(x).unwrap();
    let built = operator_to_property(&op, &space, &net, "X").unwrap();
    for row in &built.joint_volumes {
        for v in row {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }
    assert!(built.notes.iter().any(|n| n == "regions not uniquely determined"));
    assert_eq!(built.network.layers().len(), 3);
    assert!(validate_context(&built.network).is_empty());
    let d = propagate(&built.network).unwrap();
    assert!(d.probabilities.iter().all(|p| (p - 0.5).abs() < 1e-12));
}

#[test]
fn multiplicativity_filter() {
    let odd = CandidateMap::Polynomial(PolynomialMap::new(vec![(2, 0, 1.0), (0, 4, 1.0)]).unwrap());
    assert!(!verify_multiplicativity(&odd, 1000, 1).multiplicative);
    for gamma in 1..=3 {
        let f = CandidateMap::ModulusPower { gamma };
        let report = verify_multiplicativity(&f, 1000, 1);
        assert!(report.multiplicative && report.max_deviation < 1e-12);
    }
}
