//! Property tests for the cone-order primitives and the set metrics: the
//! partial-order axioms (reflexivity, antisymmetry via negation symmetry,
//! transitivity on cone sums) and the two translation/triangle inequalities
//! the mixed set distances must satisfy.

use compflow::metrics::{hausdorff, separation_index};
use compflow::order::{classify_difference, order_relate, ConeSpec, OrderRelation, RegionTag};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// A well-conditioned non-orthogonal cone so the properties are exercised in
/// genuinely transformed coordinates, not just the identity orthant.
fn skewed_cone() -> ConeSpec {
    let generators = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.3, -0.2, 0.1, 1.0, 0.25, -0.15, 0.2, 1.0],
    );
    ConeSpec::new(generators, 1e-9).expect("static cone")
}

fn vec3() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-10.0..10.0f64, 3).prop_map(DVector::from_vec)
}

/// Strictly positive cone coordinates: `from_cone_coords` of these is a
/// certified strict increase.
fn positive_coords3() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(0.1..5.0f64, 3).prop_map(DVector::from_vec)
}

fn point_set() -> impl Strategy<Value = Vec<DVector<f64>>> {
    prop::collection::vec(vec3(), 1..8)
}

fn translate(points: &[DVector<f64>], shift: &DVector<f64>) -> Vec<DVector<f64>> {
    points.iter().map(|p| p + shift).collect()
}

proptest! {
    /// x ≤ x for every x, reported as exact equality of the pair.
    #[test]
    fn relation_is_reflexive(x in vec3()) {
        let cone = skewed_cone();
        prop_assert_eq!(order_relate(&cone, &x, &x).unwrap(), OrderRelation::Equal);
    }

    /// Classifying d and −d must give mirror tags with identical margins:
    /// this is the computational face of antisymmetry (d and −d can never
    /// both certify a strict increase).
    #[test]
    fn classification_is_antisymmetric_under_negation(x in vec3(), y in vec3()) {
        let cone = skewed_cone();
        let d = &y - &x;
        let fwd = classify_difference(&cone, &d).unwrap();
        let bwd = classify_difference(&cone, &(-&d)).unwrap();
        let mirrored = match fwd.tag {
            RegionTag::InteriorCPlus => RegionTag::InteriorCMinus,
            RegionTag::InteriorCMinus => RegionTag::InteriorCPlus,
            other => other,
        };
        prop_assert_eq!(bwd.tag, mirrored);
        prop_assert!((fwd.margin - bwd.margin).abs() <= 1e-12,
            "margins differ under negation: {} vs {}", fwd.margin, bwd.margin);
    }

    /// x ≪ y and y ≪ z imply x ≪ z: built constructively as y = x + d1,
    /// z = y + d2 with d1, d2 strictly inside the cone, so the sum's cone
    /// coordinates are the (nonnegative) sums of the parts'.
    #[test]
    fn order_is_transitive_on_cone_sums(
        x in vec3(),
        c1 in positive_coords3(),
        c2 in positive_coords3(),
    ) {
        let cone = skewed_cone();
        let y = &x + cone.from_cone_coords(&c1);
        let z = &y + cone.from_cone_coords(&c2);
        prop_assert_eq!(order_relate(&cone, &x, &y).unwrap(), OrderRelation::StrictlyBelow);
        prop_assert_eq!(order_relate(&cone, &y, &z).unwrap(), OrderRelation::StrictlyBelow);
        prop_assert_eq!(order_relate(&cone, &x, &z).unwrap(), OrderRelation::StrictlyBelow);
        // The composed difference must carry the summed cone coordinates.
        let coords = cone.to_cone_coords(&(&z - &x));
        for k in 0..3 {
            prop_assert!(coords[k] >= -1e-9, "negative cone coordinate {}", coords[k]);
            prop_assert!((coords[k] - (c1[k] + c2[k])).abs() <= 1e-9 * (1.0 + c1[k] + c2[k]));
        }
    }

    /// Translating a set moves its Hausdorff position by at most the shift:
    /// d_H(A + x, A + y) ≤ |x − y|.
    #[test]
    fn hausdorff_translate_inequality(a in point_set(), x in vec3(), y in vec3()) {
        let ax = translate(&a, &x);
        let ay = translate(&a, &y);
        let dh = hausdorff(&ax, &ay).unwrap();
        prop_assert!(dh <= (&x - &y).norm() + 1e-12,
            "d_H = {} exceeds |x − y| = {}", dh, (&x - &y).norm());
    }

    /// The separation index obeys the mixed triangle inequality
    /// sep(A, B) ≤ sep(A, C) + d_H(B, C).
    #[test]
    fn mixed_distance_triangle_inequality(
        a in point_set(),
        b in point_set(),
        c in point_set(),
    ) {
        let sab = separation_index(&a, &b).unwrap();
        let sac = separation_index(&a, &c).unwrap();
        let dbc = hausdorff(&b, &c).unwrap();
        prop_assert!(sab <= sac + dbc + 1e-12,
            "sep(A,B) = {} exceeds sep(A,C) + d_H(B,C) = {}", sab, sac + dbc);
    }
}
