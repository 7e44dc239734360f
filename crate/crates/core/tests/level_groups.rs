//! `LevelGroup` against a plain Schreier-Sims implementation written here.

use std::collections::HashMap;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use arbor_core::monodromy::{img_generators, level_group, LevelGroup};
use arbor_core::sampling::{haar_sample, vertex_rng};
use arbor_core::{LevelMap, TreeShape, TruncatedAutomorphism};

type Perm = Vec<u32>;

fn mul(a: &Perm, b: &Perm) -> Perm {
    // a after b
    b.iter().map(|&x| a[x as usize]).collect()
}

fn inv(a: &Perm) -> Perm {
    let mut out = vec![0; a.len()];
    for (i, &x) in a.iter().enumerate() {
        out[x as usize] = i as u32;
    }
    out
}

fn is_id(a: &Perm) -> bool {
    a.iter().enumerate().all(|(i, &x)| i as u32 == x)
}

struct Chain {
    base: Vec<usize>,
    strong: Vec<Perm>,
    /// Per level: point -> coset representative mapping the base point to it.
    trans: Vec<HashMap<usize, Perm>>,
}

impl Chain {
    fn level_gens(&self, i: usize) -> Vec<&Perm> {
        self.strong.iter().filter(|s| self.base[..i].iter().all(|&b| s[b] as usize == b)).collect()
    }

    fn orbit(&self, i: usize) -> HashMap<usize, Perm> {
        let n = self.strong.first().map_or(0, Vec::len);
        let gens = self.level_gens(i);
        let b = self.base[i];
        let mut t = HashMap::from([(b, (0..n as u32).collect::<Perm>())]);
        let mut queue = vec![b];
        while let Some(x) = queue.pop() {
            for g in &gens {
                let y = g[x] as usize;
                if !t.contains_key(&y) {
                    let u = mul(g, &t[&x]);
                    t.insert(y, u);
                    queue.push(y);
                }
            }
        }
        t
    }

    fn sift(&self, from: usize, g: &Perm) -> (Perm, usize) {
        let mut h = g.clone();
        for i in from..self.base.len() {
            match self.trans[i].get(&(h[self.base[i]] as usize)) {
                Some(u) => h = mul(&inv(u), &h),
                None => return (h, i),
            }
        }
        (h, self.base.len())
    }

    fn new(gens: &[Perm]) -> Self {
        let mut c = Chain { base: Vec::new(), strong: Vec::new(), trans: Vec::new() };
        for g in gens.iter().filter(|g| !is_id(g)) {
            c.strong.push(g.clone());
            if c.base.iter().all(|&b| g[b] as usize == b) {
                c.base.push((0..g.len()).find(|&x| g[x] as usize != x).unwrap());
            }
        }
        c.trans = vec![HashMap::new(); c.base.len()];
        let mut i = c.base.len() as isize - 1;
        while i >= 0 {
            let l = i as usize;
            c.trans[l] = c.orbit(l);
            let mut jumped = None;
            'scan: for (&x, ux) in &c.trans[l] {
                for s in c.level_gens(l) {
                    let y = s[x] as usize;
                    let schreier = mul(&inv(&c.trans[l][&y]), &mul(s, ux));
                    let (h, j) = c.sift(l + 1, &schreier);
                    if !is_id(&h) {
                        jumped = Some((h, j));
                        break 'scan;
                    }
                }
            }
            match jumped {
                Some((h, j)) => {
                    if j == c.base.len() {
                        c.base.push((0..h.len()).find(|&x| h[x] as usize != x).unwrap());
                        c.trans.push(HashMap::new());
                    }
                    c.strong.push(h);
                    i = j as isize;
                }
                None => i -= 1,
            }
        }
        c
    }

    fn order(&self) -> BigUint {
        self.trans.iter().map(|t| BigUint::from(t.len())).product()
    }

    fn contains(&self, g: &Perm) -> bool {
        is_id(&self.sift(0, g).0)
    }
}

/// Element whose local permutations are nontrivial with probability `p`.
fn sparse(shape: &TreeShape, seed: u64, p: f64) -> TruncatedAutomorphism {
    TruncatedAutomorphism::from_portrait(shape, |n, v| {
        let m = shape.branching(n);
        let mut rng = vertex_rng(seed, n, v);
        if rng.gen_bool(p) {
            let r = rng.gen_range(1..m);
            (0..m).map(|x| (x + r) % m).collect()
        } else {
            (0..m).collect()
        }
    })
    .unwrap()
}

fn top_tables(gens: &[TruncatedAutomorphism]) -> Vec<Perm> {
    gens.iter().map(|g| g.top().table().to_vec()).collect()
}

fn compare(shape: &TreeShape, gens: &[TruncatedAutomorphism], probes: &[TruncatedAutomorphism]) {
    let n = shape.depth();
    let group = level_group(gens, n).unwrap();
    let chain = Chain::new(&top_tables(gens));
    assert_eq!(group.order(), chain.order());
    for p in probes {
        assert_eq!(group.contains(p.top()).unwrap(), chain.contains(&p.top().table().to_vec()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn binary_sparse_subgroups(seed in any::<u64>(), n in 2usize..=5, count in 1usize..=3, p in 0.05f64..0.5) {
        let shape = TreeShape::binary(n);
        let gens: Vec<_> = (0..count as u64).map(|i| sparse(&shape, seed ^ i, p)).collect();
        let mut probes: Vec<_> = (0..4).map(|i| sparse(&shape, seed.wrapping_add(100 + i), p)).collect();
        probes.push(gens[0].compose(gens.last().unwrap()).unwrap());
        probes.push(haar_sample(&shape, n, seed).unwrap());
        compare(&shape, &gens, &probes);
    }

    #[test]
    fn ternary_subgroups(seed in any::<u64>(), n in 1usize..=3, count in 1usize..=2, p in 0.05f64..0.6) {
        let shape = TreeShape::constant(3, n).unwrap();
        let gens: Vec<_> = (0..count as u64).map(|i| sparse(&shape, seed ^ i, p)).collect();
        let mut probes: Vec<_> = (0..4).map(|i| sparse(&shape, seed.wrapping_add(7 + i), p)).collect();
        probes.push(gens[0].pow(2));
        compare(&shape, &gens, &probes);
    }

    #[test]
    fn img_level_groups(r in 2usize..=5, s_off in 0usize..4, n in 1usize..=5, seed in any::<u64>()) {
        let s = 1 + s_off % (r - 1);
        let pres = img_generators(r, s).unwrap();
        let gens = pres.truncated_generators(n).unwrap();
        let shape = TreeShape::binary(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probes = Vec::new();
        for _ in 0..4 {
            let mut x = TruncatedAutomorphism::identity(&shape).unwrap();
            for _ in 0..rng.gen_range(1..12) {
                x = x.compose(&gens[rng.gen_range(0..gens.len())]).unwrap();
            }
            probes.push(x);
        }
        probes.push(haar_sample(&shape, n, seed).unwrap());
        compare(&shape, &gens, &probes);
    }
}

#[test]
fn lower_levels_agree_with_their_own_groups() {
    let pres = img_generators(4, 2).unwrap();
    let gens = pres.truncated_generators(6).unwrap();
    let top = level_group(&gens, 6).unwrap();
    let shape = TreeShape::binary(6);
    for seed in 0..20 {
        let u = sparse(&shape, seed, 0.3);
        for m in 1..=6 {
            let own = level_group(&gens, m).unwrap();
            assert_eq!(top.contains(u.level(m).unwrap()).unwrap(), own.contains(u.level(m).unwrap()).unwrap());
        }
    }
}

#[test]
fn orders_at_level_eight() {
    // log2 |G|V_8|, computed independently with a general permutation-group package
    for ((r, s), log2) in [((2, 1), 9u64), ((3, 1), 162), ((3, 2), 178), ((4, 2), 225), ((5, 2), 241)] {
        let group = img_generators(r, s).unwrap().level_group(8).unwrap();
        assert_eq!(group.order(), BigUint::from(1u8) << log2, "r = {r}, s = {s}");
        let dims = group.kernel_dimensions().unwrap();
        assert_eq!(dims.iter().sum::<usize>() as u64, log2);
    }
}

#[test]
fn strong_generators_rebuild_the_group() {
    let pres = img_generators(3, 2).unwrap();
    let group = pres.level_group(5).unwrap();
    let strong: Vec<LevelMap> = group.strong_generators();
    let rebuilt = LevelGroup::from_level_maps(group.shape(), strong.clone()).unwrap();
    assert_eq!(rebuilt.order(), group.order());
    let chain = Chain::new(&strong.iter().map(|g| g.table().to_vec()).collect::<Vec<_>>());
    assert_eq!(chain.order(), group.order());
}
