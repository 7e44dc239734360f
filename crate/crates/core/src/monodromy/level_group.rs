//! Membership in the finite groups `G|V_n`.
//!
//! On binary trees an element fixing `V_{l-1}` is determined on `V_l` by one
//! bit per vertex of `V_{l-1}`, so the level kernels of `G|V_n` are
//! `F_2`-subspaces. The structure keeps, for every level, an echelon basis of
//! that subspace together with group elements realizing each basis vector.
//! Base points are the left children of the vertices of `V_{l-1}`, level by
//! level in vertex order. Other trees use a plain Schreier–Sims chain.

use std::collections::VecDeque;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::tree::{LevelMap, TreeShape, TruncatedAutomorphism, Vertex};

const NONE: u32 = u32::MAX;

type Perm = Vec<u32>;

fn compose_into(out: &mut [u32], a: &[u32], b: &[u32]) {
    for (o, &x) in out.iter_mut().zip(b) {
        *o = a[x as usize];
    }
}

/// `a ∘ b`.
fn compose(a: &[u32], b: &[u32]) -> Perm {
    b.iter().map(|&x| a[x as usize]).collect()
}

fn invert(a: &[u32]) -> Perm {
    let mut out = vec![0u32; a.len()];
    for (i, &x) in a.iter().enumerate() {
        out[x as usize] = i as u32;
    }
    out
}

fn is_identity(a: &[u32]) -> bool {
    a.iter().enumerate().all(|(i, &x)| i == x as usize)
}

/// Level kernel `ker(G|V_l → G|V_{l-1})` as a subspace of `F_2^{V_{l-1}}`.
#[derive(Clone, Debug)]
struct Layer {
    level: usize,
    words: usize,
    basis: Vec<Vec<u64>>,
    pivot_slot: Vec<u32>,
    reps: Vec<Perm>,
    rep_invs: Vec<Perm>,
}

impl Layer {
    fn new(level: usize) -> Self {
        let bits = 1usize << (level - 1);
        Layer {
            level,
            words: bits.div_ceil(64),
            basis: Vec::new(),
            pivot_slot: vec![NONE; bits],
            reps: Vec::new(),
            rep_invs: Vec::new(),
        }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Bits of `t` (a table at level `m`) on `V_{level-1}`, assuming `t`
    /// fixes `V_{level-1}`.
    fn labels(&self, t: &[u32], m: usize) -> Vec<u64> {
        let shift = m - self.level;
        let mut v = vec![0u64; self.words];
        for w in 0..1usize << (self.level - 1) {
            let c = 2 * w;
            if (t[c << shift] >> shift) as usize != c {
                v[w / 64] |= 1 << (w % 64);
            }
        }
        v
    }

    /// Clears `v` against the basis, multiplying `g` by the inverse of every
    /// representative used. `g` is a table at level `m`.
    fn reduce(&self, v: &mut [u64], g: &mut Perm, scratch: &mut Perm) {
        while let Some(p) = lowest_bit(v) {
            let slot = self.pivot_slot[p];
            if slot == NONE {
                return;
            }
            let slot = slot as usize;
            for (a, b) in v.iter_mut().zip(&self.basis[slot]) {
                *a ^= b;
            }
            let inv = &self.rep_invs[slot];
            if inv.len() == g.len() {
                compose_into(scratch, g, inv);
            } else {
                // truncate the representative on the fly
                let shift = (inv.len() / g.len()).trailing_zeros();
                for (i, o) in scratch.iter_mut().enumerate() {
                    *o = g[(inv[i << shift] >> shift) as usize];
                }
            }
            std::mem::swap(g, scratch);
        }
    }

    fn push(&mut self, v: Vec<u64>, rep: Perm) {
        let p = lowest_bit(&v).expect("nonzero residue");
        self.pivot_slot[p] = self.basis.len() as u32;
        self.basis.push(v);
        self.rep_invs.push(invert(&rep));
        self.reps.push(rep);
    }
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter().enumerate().find(|(_, &w)| w != 0).map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
}

/// One step of a Schreier–Sims chain.
#[derive(Clone, Debug)]
struct StabLayer {
    point: u32,
    gens: Vec<Perm>,
    /// `transversal[x]` maps `point` to `x`.
    transversal: Vec<Option<Perm>>,
}

impl StabLayer {
    fn orbit(&self) -> impl Iterator<Item = usize> + '_ {
        self.transversal.iter().enumerate().filter(|(_, t)| t.is_some()).map(|(i, _)| i)
    }

    fn rebuild(&mut self, size: usize) {
        let mut transversal: Vec<Option<Perm>> = vec![None; size];
        transversal[self.point as usize] = Some((0..size as u32).collect());
        let mut queue = VecDeque::from([self.point as usize]);
        while let Some(x) = queue.pop_front() {
            for g in &self.gens {
                let y = g[x] as usize;
                if transversal[y].is_none() {
                    transversal[y] = Some(compose(g, transversal[x].as_ref().expect("reached")));
                    queue.push_back(y);
                }
            }
        }
        self.transversal = transversal;
    }
}

#[derive(Clone, Debug)]
enum Chain {
    Binary(Vec<Layer>),
    General(Vec<StabLayer>),
}

/// The finite group generated by level-`n` restrictions, with exact membership.
#[derive(Clone, Debug)]
pub struct LevelGroup {
    shape: TreeShape,
    generators: Vec<LevelMap>,
    chain: Chain,
}

/// `G|V_n` for the group generated by `gens`, each of depth at least `n`.
pub fn level_group(gens: &[TruncatedAutomorphism], n: usize) -> Result<LevelGroup> {
    let Some(first) = gens.first() else {
        return Err(Error::Precondition("no generators".into()));
    };
    let shape = first.shape().with_depth(n)?;
    let mut maps = Vec::with_capacity(gens.len());
    for g in gens {
        if g.depth() < n {
            return Err(Error::DepthExceeded { requested: n, depth: g.depth() });
        }
        if g.shape().with_depth(n)? != shape {
            return Err(Error::ShapeMismatch("generators live on different trees".into()));
        }
        maps.push(if n == 0 { LevelMap::identity(0, 1) } else { g.level(n)?.clone() });
    }
    LevelGroup::from_level_maps(&shape, maps)
}

impl LevelGroup {
    /// Group generated by permutations of the last level of `shape`.
    pub fn from_level_maps(shape: &TreeShape, generators: Vec<LevelMap>) -> Result<Self> {
        let n = shape.depth();
        let size = shape.checked_level_size(n)?;
        for g in &generators {
            if g.level() != n || g.len() != size {
                return Err(Error::ShapeMismatch(format!(
                    "generator on level {} with {} vertices, expected level {n} with {size}",
                    g.level(),
                    g.len()
                )));
            }
            if n > 0 {
                TruncatedAutomorphism::from_top(shape, g.table().to_vec())?;
            }
        }
        let tables: Vec<Perm> = generators.iter().map(|g| g.table().to_vec()).collect();
        let chain = if shape.degree() == Some(2) && n > 0 {
            Chain::Binary(build_binary(n, &tables))
        } else {
            Chain::General(build_general(size, &tables))
        };
        Ok(LevelGroup { shape: shape.clone(), generators, chain })
    }

    pub fn level(&self) -> usize {
        self.shape.depth()
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn generators(&self) -> &[LevelMap] {
        &self.generators
    }

    pub fn order(&self) -> BigUint {
        match &self.chain {
            Chain::Binary(layers) => BigUint::from(1u8) << layers.iter().map(Layer::dim).sum::<usize>(),
            Chain::General(chain) => {
                chain.iter().map(|l| BigUint::from(l.orbit().count())).product()
            }
        }
    }

    /// `log_2` of the order of each level kernel (binary trees only).
    pub fn kernel_dimensions(&self) -> Option<Vec<usize>> {
        match &self.chain {
            Chain::Binary(layers) => Some(layers.iter().map(Layer::dim).collect()),
            Chain::General(_) => None,
        }
    }

    /// Base points in sifting order.
    pub fn base(&self) -> Result<Vec<Vertex>> {
        match &self.chain {
            Chain::Binary(layers) => {
                let mut out = Vec::new();
                for layer in layers {
                    let mut pivots: Vec<usize> = layer.basis.iter().map(|b| lowest_bit(b).unwrap_or(0)).collect();
                    pivots.sort_unstable();
                    for p in pivots {
                        out.push(Vertex::from_index(&self.shape, layer.level, 2 * p)?);
                    }
                }
                Ok(out)
            }
            Chain::General(chain) => chain
                .iter()
                .map(|l| Vertex::from_index(&self.shape, self.level(), l.point as usize))
                .collect(),
        }
    }

    pub fn strong_generators(&self) -> Vec<LevelMap> {
        let n = self.level();
        match &self.chain {
            Chain::Binary(layers) => layers
                .iter()
                .flat_map(|l| l.reps.iter().map(|r| LevelMap::from_raw(n, r.clone())))
                .collect(),
            Chain::General(chain) => {
                let mut out: Vec<Perm> = Vec::new();
                for l in chain {
                    for g in &l.gens {
                        if !out.contains(g) {
                            out.push(g.clone());
                        }
                    }
                }
                out.into_iter().map(|t| LevelMap::from_raw(n, t)).collect()
            }
        }
    }

    /// Membership of a permutation of `V_m`, `m ≤ n`, in `G|V_m`.
    pub fn contains(&self, u: &LevelMap) -> Result<bool> {
        let m = u.level();
        let n = self.level();
        if m > n {
            return Err(Error::DepthExceeded { requested: m, depth: n });
        }
        if u.len() != self.shape.level_size(m) {
            return Err(Error::ShapeMismatch(format!("{} vertices on level {m}", u.len())));
        }
        if m == 0 {
            return Ok(true);
        }
        match &self.chain {
            Chain::Binary(layers) => Ok(sift_binary(layers, u.table().to_vec(), m).is_none()),
            Chain::General(chain) if m == n => Ok(sift_general(chain, u.table().to_vec()).1.is_none()),
            Chain::General(_) => {
                let shape = self.shape.with_depth(m)?;
                let gens = self
                    .generators
                    .iter()
                    .map(|g| Ok(TruncatedAutomorphism::from_top(&self.shape, g.table().to_vec())?.level(m)?.clone()))
                    .collect::<Result<Vec<_>>>()?;
                LevelGroup::from_level_maps(&shape, gens)?.contains(u)
            }
        }
    }

    /// Membership of `u|V_m` in `G|V_m`.
    pub fn contains_at_level(&self, u: &TruncatedAutomorphism, m: usize) -> Result<bool> {
        if m == 0 {
            return Ok(true);
        }
        self.contains(u.level(m)?)
    }

    /// Membership of `u|V_n` where `n` is the level of the group.
    pub fn contains_element(&self, u: &TruncatedAutomorphism) -> Result<bool> {
        self.contains_at_level(u, self.level())
    }
}

/// Sifts a level-`m` table through the first `m` layers. Returns the first
/// layer with a nonzero residue, the partially reduced element and the
/// residue, or `None` for members.
fn sift_binary(layers: &[Layer], mut g: Perm, m: usize) -> Option<(usize, Perm, Vec<u64>)> {
    let mut scratch = vec![0u32; g.len()];
    for layer in &layers[..m] {
        let mut v = layer.labels(&g, m);
        layer.reduce(&mut v, &mut g, &mut scratch);
        if lowest_bit(&v).is_some() {
            return Some((layer.level, g, v));
        }
    }
    None
}

enum Task {
    Element(Perm),
    Square { level: usize, slot: usize },
    Commutator { level: usize, a: usize, b: usize },
    Conjugate { level: usize, slot: usize, gen: usize },
}

fn build_binary(n: usize, gens: &[Perm]) -> Vec<Layer> {
    let mut layers: Vec<Layer> = (1..=n).map(Layer::new).collect();
    let gen_invs: Vec<Perm> = gens.iter().map(|g| invert(g)).collect();
    let mut queue: VecDeque<Task> = gens.iter().cloned().map(Task::Element).collect();
    while let Some(task) = queue.pop_front() {
        let g = match task {
            Task::Element(g) => g,
            Task::Square { level, slot } => {
                let r = &layers[level - 1].reps[slot];
                compose(r, r)
            }
            Task::Commutator { level, a, b } => {
                let l = &layers[level - 1];
                let ab = compose(&l.reps[a], &l.reps[b]);
                let ba = compose(&l.reps[b], &l.reps[a]);
                compose(&ab, &invert(&ba))
            }
            Task::Conjugate { level, slot, gen } => {
                let r = &layers[level - 1].reps[slot];
                compose(&compose(&gens[gen], r), &gen_invs[gen])
            }
        };
        if let Some((level, h, v)) = sift_binary(&layers, g, n) {
            let layer = &mut layers[level - 1];
            let slot = layer.dim();
            layer.push(v, h);
            if level < n {
                queue.push_back(Task::Square { level, slot });
                for a in 0..slot {
                    queue.push_back(Task::Commutator { level, a, b: slot });
                }
            }
            for gen in 0..gens.len() {
                queue.push_back(Task::Conjugate { level, slot, gen });
            }
        }
    }
    layers
}

/// Sifts through a stabilizer chain; returns the residue and the index of
/// the step where it stopped, if it is not the identity.
fn sift_general(chain: &[StabLayer], mut g: Perm) -> (Perm, Option<usize>) {
    for (i, layer) in chain.iter().enumerate() {
        let x = g[layer.point as usize] as usize;
        match &layer.transversal[x] {
            Some(t) => g = compose(&invert(t), &g),
            None => return (g, Some(i)),
        }
    }
    if is_identity(&g) {
        (g, None)
    } else {
        (g, Some(chain.len()))
    }
}

fn build_general(size: usize, gens: &[Perm]) -> Vec<StabLayer> {
    let mut chain: Vec<StabLayer> = Vec::new();
    let mut pending: Vec<Perm> = gens.iter().filter(|g| !is_identity(g)).cloned().collect();
    loop {
        for g in pending.drain(..) {
            add_strong(&mut chain, size, g, 0);
        }
        // every Schreier generator of every step must sift through the rest
        let mut found = None;
        'outer: for i in (0..chain.len()).rev() {
            let layer = &chain[i];
            for x in layer.orbit() {
                let tx = layer.transversal[x].as_ref().expect("orbit point");
                for s in &layer.gens {
                    let y = s[x] as usize;
                    let ty = layer.transversal[y].as_ref().expect("orbit is closed");
                    let schreier = compose(&invert(ty), &compose(s, tx));
                    let (res, stop) = sift_general(&chain[i + 1..], schreier);
                    if stop.is_some() {
                        found = Some((res, i + 1));
                        break 'outer;
                    }
                }
            }
        }
        match found {
            Some((res, from)) => add_strong(&mut chain, size, res, from),
            None => return chain,
        }
    }
}

/// Adds `g`, which fixes the base points before step `from`, as a strong
/// generator at every step from `from` down to where it moves a base point.
fn add_strong(chain: &mut Vec<StabLayer>, size: usize, g: Perm, from: usize) {
    let (g, stop) = sift_general(&chain[from..], g);
    let Some(stop) = stop else { return };
    let stop = from + stop;
    if stop == chain.len() {
        let point = g.iter().enumerate().position(|(i, &x)| i != x as usize).expect("nontrivial") as u32;
        chain.push(StabLayer { point, gens: Vec::new(), transversal: Vec::new() });
    }
    // the residue fixes every base point before `stop`, so it belongs to all
    // of those stabilizers from `from` on
    for layer in &mut chain[from..=stop] {
        layer.gens.push(g.clone());
        layer.rebuild(size);
    }
}
