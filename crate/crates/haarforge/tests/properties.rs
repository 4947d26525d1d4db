use haarforge::free_words::FreeWord;
use haarforge::partition_algebra::{involution, multiply, realize_int, SetPartitionDiagram};
use haarforge::perm_core::{PhasedPermutation, Permutation};
use haarforge::matrix_engine::C64;
use proptest::prelude::*;

fn perm(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|m| Permutation::new(m).unwrap())
}

fn two_perms() -> impl Strategy<Value = (Permutation, Permutation)> {
    (1usize..9).prop_flat_map(|n| (perm(n), perm(n)))
}

fn diagram(k: usize) -> impl Strategy<Value = SetPartitionDiagram> {
    prop::collection::vec(0u8..(2 * k as u8), 2 * k).prop_map(move |l| SetPartitionDiagram::from_labels(k, &l).unwrap())
}

fn letters() -> impl Strategy<Value = Vec<(u32, i8)>> {
    prop::collection::vec((1u32..4, prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 })), 0..12)
}

proptest! {
    #[test]
    fn sign_is_multiplicative((a, b) in two_perms()) {
        prop_assert_eq!(a.compose(&b).unwrap().sign(), a.sign() * b.sign());
        prop_assert!(a.compose(&a.invert()).unwrap().is_identity());
    }

    #[test]
    fn compose_matches_matrix_product((a, b) in two_perms()) {
        let dense = a.to_dense().matmul(&b.to_dense()).unwrap();
        prop_assert_eq!(dense.max_abs_diff(&a.compose(&b).unwrap().to_dense()).unwrap(), 0.0);
    }

    #[test]
    fn phased_permutations_are_unitary(p in perm(6), angles in prop::collection::vec(0.0..std::f64::consts::TAU, 6)) {
        let z = PhasedPermutation::new(p, angles.iter().map(|&t| C64::from_polar(1.0, t)).collect()).unwrap();
        let zz = z.compose(&z.adjoint()).unwrap();
        prop_assert!(zz.to_dense().max_abs_diff(&PhasedPermutation::identity(6).to_dense()).unwrap() < 1e-14);
    }

    #[test]
    fn word_times_inverse_reduces_to_identity(l in letters()) {
        let w = FreeWord::reduce(&l).unwrap();
        let mut both = w.letters();
        both.extend(w.inverse().letters());
        prop_assert!(FreeWord::reduce(&both).unwrap().is_identity());
        let text = w.to_string();
        prop_assert_eq!(text.parse::<FreeWord>().unwrap(), w);
    }

    #[test]
    fn diagram_identity_is_a_unit(p in diagram(3)) {
        let id = SetPartitionDiagram::identity(3);
        prop_assert_eq!(multiply(&id, &p).unwrap(), (p.clone(), 0));
        prop_assert_eq!(multiply(&p, &id).unwrap(), (p.clone(), 0));
        prop_assert_eq!(involution(&involution(&p)), p);
    }

    #[test]
    fn involution_is_transpose(p in diagram(2)) {
        let o = realize_int(&p, 3).unwrap();
        prop_assert_eq!(realize_int(&involution(&p), 3).unwrap(), o.transpose());
    }

    #[test]
    fn diagram_product_is_associative(a in diagram(2), b in diagram(2), c in diagram(2)) {
        let (ab, d1) = multiply(&a, &b).unwrap();
        let (ab_c, d2) = multiply(&ab, &c).unwrap();
        let (bc, d3) = multiply(&b, &c).unwrap();
        let (a_bc, d4) = multiply(&a, &bc).unwrap();
        prop_assert_eq!(ab_c, a_bc);
        prop_assert_eq!(d1 + d2, d3 + d4);
    }
}
