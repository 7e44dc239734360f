//! Reproducible random automorphisms. Every vertex draws from its own
//! ChaCha stream keyed by `(seed, level, vertex)`, so results do not depend
//! on evaluation order.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tree::{TreeShape, TruncatedAutomorphism};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable sub-seed for cell `index` of the computation named `label`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let label_hash = label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    splitmix(splitmix(seed ^ label_hash).wrapping_add(index))
}

/// Generator dedicated to one vertex of one level.
pub fn vertex_rng(seed: u64, level: usize, vertex: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(level as u64);
    rng.set_word_pos((vertex as u128) << 20);
    rng
}

/// Uniform element of the level-`depth` quotient of the full automorphism
/// group: every vertex gets a uniform local permutation.
pub fn haar_sample(shape: &TreeShape, depth: usize, seed: u64) -> Result<TruncatedAutomorphism> {
    let shape = shape.with_depth(depth)?;
    TruncatedAutomorphism::from_portrait(&shape, |n, v| {
        let mut p: Vec<usize> = (0..shape.branching(n)).collect();
        p.shuffle(&mut vertex_rng(seed, n, v));
        p
    })
}

/// Element of the iterated wreath product of `h`: each vertex draws its local
/// permutation uniformly from `h`.
pub fn wreath_sample(
    shape: &TreeShape,
    h: &[Vec<usize>],
    depth: usize,
    seed: u64,
) -> Result<TruncatedAutomorphism> {
    let Some(first) = h.first() else {
        return Err(Error::Precondition("the local permutation set is empty".into()));
    };
    let d = first.len();
    let shape = shape.with_depth(depth)?;
    if shape.degree() != Some(d) {
        return Err(Error::Precondition(format!(
            "local permutations of degree {d} do not fit the tree"
        )));
    }
    for p in h {
        if !is_permutation(p, d) {
            return Err(Error::InvalidPermutation(format!("{p:?}")));
        }
    }
    TruncatedAutomorphism::from_portrait(&shape, |n, v| {
        h[vertex_rng(seed, n, v).gen_range(0..h.len())].clone()
    })
}

fn is_permutation(p: &[usize], d: usize) -> bool {
    p.len() == d && p.iter().collect::<BTreeSet<_>>().len() == d && p.iter().all(|&x| x < d)
}

/// All products of `gens`, sorted.
pub fn permutation_closure(gens: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    let d = gens.first().map(Vec::len).unwrap_or(0);
    if let Some(bad) = gens.iter().find(|g| !is_permutation(g, d)) {
        return Err(Error::InvalidPermutation(format!("{bad:?}")));
    }
    let identity: Vec<usize> = (0..d).collect();
    let mut seen = BTreeSet::from([identity.clone()]);
    let mut queue = VecDeque::from([identity]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y: Vec<usize> = x.iter().map(|&i| g[i]).collect();
            if seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    Ok(seen.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::settled_stats;

    #[test]
    fn haar_is_consistent_and_reproducible() {
        let shape = TreeShape::constant(3, 5).unwrap();
        let u = haar_sample(&shape, 5, 7).unwrap();
        assert!(u.verify_consistency());
        assert_eq!(u, haar_sample(&shape, 5, 7).unwrap());
        assert_ne!(u, haar_sample(&shape, 5, 8).unwrap());
        // deeper samples restrict to shallower ones
        assert_eq!(haar_sample(&shape, 6, 7).unwrap().truncate(5).unwrap(), u);
    }

    #[test]
    fn trivial_wreath_sample() {
        let shape = TreeShape::binary(6);
        let u = wreath_sample(&shape, &[vec![0, 1]], 6, 3).unwrap();
        assert!(u.is_identity());
        assert!(wreath_sample(&shape, &[], 6, 3).is_err());
        assert!(wreath_sample(&shape, &[vec![0, 0]], 6, 3).is_err());
        assert!(wreath_sample(&shape, &[vec![1, 2, 0]], 6, 3).is_err());
    }

    #[test]
    fn alternating_group_wreath() {
        let a5 = permutation_closure(&[vec![1, 2, 0, 3, 4], vec![0, 1, 3, 4, 2], vec![1, 0, 3, 2, 4]])
            .unwrap();
        assert_eq!(a5.len(), 60);
        let shape = TreeShape::constant(5, 4).unwrap();
        let u = wreath_sample(&shape, &a5, 4, 11).unwrap();
        assert!(u.verify_consistency());
        assert!(u.levels().iter().all(|l| l.sign() == 1));
        let stats = settled_stats(&u, 3, 4).unwrap();
        assert!(stats.levels.iter().all(|l| l.stable <= l.total));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, "weyl", 0), derive_seed(1, "weyl", 1));
        assert_ne!(derive_seed(1, "weyl", 0), derive_seed(1, "sample", 0));
        assert_eq!(derive_seed(9, "x", 4), derive_seed(9, "x", 4));
    }
}
