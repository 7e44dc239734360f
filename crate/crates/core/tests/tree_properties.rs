use num_bigint::BigUint;
use proptest::prelude::*;

use arbor_core::cycles::{cycle_decomposition, strongly_settle};
use arbor_core::sampling::{haar_sample, vertex_rng};
use arbor_core::tree::adding_machine;
use arbor_core::{TreeShape, TruncatedAutomorphism};

fn shape_strategy() -> impl Strategy<Value = TreeShape> {
    prop_oneof![
        (2usize..=3, 1usize..=6).prop_map(|(d, n)| TreeShape::constant(d, n).unwrap()),
        (prop::collection::vec(2usize..=4, 1..=4)).prop_map(|f| {
            let n = f.len();
            TreeShape::explicit(f, n).unwrap()
        }),
    ]
}

/// Haar on levels `1..=split`, a second stream below.
fn spliced(shape: &TreeShape, split: usize, a: u64, b: u64) -> TruncatedAutomorphism {
    TruncatedAutomorphism::from_portrait(shape, |n, v| {
        let mut p: Vec<usize> = (0..shape.branching(n)).collect();
        let seed = if n <= split { a } else { b };
        rand::seq::SliceRandom::shuffle(p.as_mut_slice(), &mut vertex_rng(seed, n, v));
        p
    })
    .unwrap()
}

proptest! {
    #[test]
    fn compose_and_inverse_stay_consistent(shape in shape_strategy(), s1 in any::<u64>(), s2 in any::<u64>(), e in -5i64..6) {
        let n = shape.depth();
        let u = haar_sample(&shape, n, s1).unwrap();
        let w = haar_sample(&shape, n, s2).unwrap();
        let uw = u.compose(&w).unwrap();
        prop_assert!(uw.verify_consistency());
        prop_assert!(u.inverse().verify_consistency());
        prop_assert!(u.pow(e).verify_consistency());
        prop_assert!(u.compose(&u.inverse()).unwrap().is_identity());
        prop_assert_eq!(uw.inverse(), w.inverse().compose(&u.inverse()).unwrap());
    }

    #[test]
    fn transitivity_iff_full_order(d in 2usize..=3, n in 1usize..=6, seed in any::<u64>(), settle_at in 0usize..=6, power in 1i64..9) {
        let shape = TreeShape::constant(d, n).unwrap();
        let haar = haar_sample(&shape, n, seed).unwrap();
        let settled = strongly_settle(&haar, settle_at.min(n - 1), n).unwrap();
        let odometer_power = adding_machine(&shape).unwrap().pow(power);
        for u in [haar, settled, odometer_power] {
            for level in 1..=n {
                let map = u.level(level).unwrap();
                let full = BigUint::from(d).pow(level as u32);
                prop_assert_eq!(map.is_transitive(), u.order_at_level(level).unwrap() == full);
            }
        }
    }

    #[test]
    fn orders_divide_down_the_tree(shape in shape_strategy(), seed in any::<u64>()) {
        let u = haar_sample(&shape, shape.depth(), seed).unwrap();
        let profile = u.order_profile(shape.depth()).unwrap();
        for w in profile.windows(2) {
            prop_assert_eq!(&w[1] % &w[0], BigUint::from(0u8));
        }
    }

    #[test]
    fn distance_is_an_ultrametric(n in 1usize..=6, cuts in prop::array::uniform3(0usize..=6), seeds in prop::array::uniform4(any::<u64>())) {
        let shape = TreeShape::binary(n);
        let z = haar_sample(&shape, n, seeds[0]).unwrap();
        let u = spliced(&shape, cuts[0].min(n), seeds[0], seeds[1]);
        let w = spliced(&shape, cuts[1].min(n), seeds[0], seeds[2]);
        let x = spliced(&shape, cuts[2].min(n), seeds[3], seeds[2]);
        for (a, b, c) in [(&u, &w, &z), (&u, &x, &w), (&z, &x, &u)] {
            let direct = a.distance(b).unwrap();
            let via = a.distance(c).unwrap().max(c.distance(b).unwrap());
            prop_assert!(direct <= via);
            prop_assert_eq!(a.distance(b).unwrap(), b.distance(a).unwrap());
        }
    }

    #[test]
    fn conjugates_share_cycle_types(shape in shape_strategy(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let n = shape.depth();
        let u = haar_sample(&shape, n, s1).unwrap();
        let g = haar_sample(&shape, n, s2).unwrap();
        let c = u.conjugate_by(&g).unwrap();
        for level in 1..=n {
            prop_assert_eq!(cycle_decomposition(&u, level).unwrap().lengths(), cycle_decomposition(&c, level).unwrap().lengths());
        }
    }

    #[test]
    fn documents_round_trip(shape in shape_strategy(), seed in any::<u64>()) {
        let u = haar_sample(&shape, shape.depth(), seed).unwrap();
        prop_assert_eq!(TruncatedAutomorphism::from_document(&u.to_document()).unwrap(), u);
    }

    #[test]
    fn apply_matches_level_tables(shape in shape_strategy(), seed in any::<u64>(), pick in any::<u64>()) {
        let n = shape.depth();
        let u = haar_sample(&shape, n, seed).unwrap();
        let size = shape.level_size(n);
        let idx = (pick % size as u64) as usize;
        let v = arbor_core::Vertex::from_index(&shape, n, idx).unwrap();
        let image = u.apply(&v).unwrap();
        prop_assert_eq!(image.index(&shape).unwrap(), u.top().image(idx));
        // prefixes map to prefixes
        let parent = v.parent().unwrap();
        prop_assert_eq!(u.apply(&parent).unwrap(), image.parent().unwrap());
    }
}
