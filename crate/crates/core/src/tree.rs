//! Spherically homogeneous rooted trees cut off at a finite depth, and the
//! level-compatible permutation families that represent their automorphisms.
//!
//! Vertices of level `n` are encoded as mixed-radix integers with the level-1
//! letter most significant, so the parent of index `i` at level `n` is
//! `i / m_n` and the children of `v` are `v * m_{n+1} + s`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest level the crate will materialize as a dense table.
pub const MAX_LEVEL_SIZE: usize = 1 << 26;

const DOCUMENT_SCHEMA: &str = "arbor.automorphism.v1";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SphericalIndex {
    Constant { d: usize },
    Explicit { factors: Vec<usize> },
}

/// Spherical index together with the working truncation depth.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeShape {
    index: SphericalIndex,
    depth: usize,
}

impl TreeShape {
    pub fn constant(d: usize, depth: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidShape(format!("branching factor {d} is below 2")));
        }
        if depth == 0 {
            return Err(Error::InvalidShape("depth must be positive".into()));
        }
        Ok(TreeShape { index: SphericalIndex::Constant { d }, depth })
    }

    pub fn binary(depth: usize) -> Self {
        Self::constant(2, depth.max(1)).expect("binary shape")
    }

    /// Explicit spherical index; the list must cover every stored level.
    pub fn explicit(factors: Vec<usize>, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidShape("depth must be positive".into()));
        }
        if factors.len() < depth {
            return Err(Error::InvalidShape(format!(
                "{} branching factors given for depth {depth}",
                factors.len()
            )));
        }
        if let Some(m) = factors.iter().find(|&&m| m < 2) {
            return Err(Error::InvalidShape(format!("branching factor {m} is below 2")));
        }
        Ok(TreeShape { index: SphericalIndex::Explicit { factors }, depth })
    }

    pub fn index(&self) -> &SphericalIndex {
        &self.index
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Branching factor `m_n` between levels `n - 1` and `n` (`n >= 1`).
    pub fn branching(&self, n: usize) -> usize {
        assert!(n >= 1, "levels of the spherical index start at 1");
        match &self.index {
            SphericalIndex::Constant { d } => *d,
            SphericalIndex::Explicit { factors } => factors[n - 1],
        }
    }

    /// `m_n`, or `None` past the end of an explicit index.
    pub fn branching_checked(&self, n: usize) -> Option<usize> {
        match &self.index {
            SphericalIndex::Constant { d } => (n >= 1).then_some(*d),
            SphericalIndex::Explicit { factors } => n.checked_sub(1).and_then(|i| factors.get(i).copied()),
        }
    }

    /// The common branching factor, if every stored level has the same one.
    pub fn degree(&self) -> Option<usize> {
        match &self.index {
            SphericalIndex::Constant { d } => Some(*d),
            SphericalIndex::Explicit { factors } => {
                let first = factors[0];
                factors[..self.depth].iter().all(|&m| m == first).then_some(first)
            }
        }
    }

    /// `|V_n|`, saturating at `usize::MAX`.
    pub fn level_size(&self, n: usize) -> usize {
        (1..=n).fold(1usize, |acc, i| acc.saturating_mul(self.branching(i)))
    }

    pub fn level_size_big(&self, n: usize) -> BigUint {
        (1..=n).fold(BigUint::one(), |acc, i| acc * self.branching(i))
    }

    /// `|V_n|` when level `n` is stored and small enough to tabulate.
    pub fn checked_level_size(&self, n: usize) -> Result<usize> {
        if n > self.depth {
            return Err(Error::DepthExceeded { requested: n, depth: self.depth });
        }
        let size = self.level_size(n);
        if size > MAX_LEVEL_SIZE {
            return Err(Error::Budget(format!(
                "level {n} has {} vertices, above the table limit {MAX_LEVEL_SIZE}",
                self.level_size_big(n)
            )));
        }
        Ok(size)
    }

    /// Same spherical index, different working depth.
    pub fn with_depth(&self, depth: usize) -> Result<Self> {
        match &self.index {
            SphericalIndex::Constant { d } => Self::constant(*d, depth),
            SphericalIndex::Explicit { factors } => Self::explicit(factors.clone(), depth),
        }
    }

    /// Shape of the subtree hanging below a vertex of level `offset`.
    pub fn subtree(&self, offset: usize) -> Result<Self> {
        if offset >= self.depth {
            return Err(Error::DepthExceeded { requested: offset + 1, depth: self.depth });
        }
        match &self.index {
            SphericalIndex::Constant { d } => Self::constant(*d, self.depth - offset),
            SphericalIndex::Explicit { factors } => {
                Self::explicit(factors[offset..].to_vec(), self.depth - offset)
            }
        }
    }

    fn same_index_as(&self, other: &TreeShape) -> bool {
        let depth = self.depth.min(other.depth);
        (1..=depth).all(|n| self.branching(n) == other.branching(n))
    }
}

/// A vertex, given by its word of letters `x_1 … x_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    word: Vec<usize>,
}

impl Vertex {
    pub fn new(word: Vec<usize>) -> Self {
        Vertex { word }
    }

    pub fn root() -> Self {
        Vertex { word: Vec::new() }
    }

    pub fn zeros(level: usize) -> Self {
        Vertex { word: vec![0; level] }
    }

    pub fn level(&self) -> usize {
        self.word.len()
    }

    pub fn word(&self) -> &[usize] {
        &self.word
    }

    pub fn child(&self, letter: usize) -> Vertex {
        let mut word = self.word.clone();
        word.push(letter);
        Vertex { word }
    }

    pub fn parent(&self) -> Option<Vertex> {
        let (_, prefix) = self.word.split_last()?;
        Some(Vertex { word: prefix.to_vec() })
    }

    /// Mixed-radix index of the vertex in `V_n`.
    pub fn index(&self, shape: &TreeShape) -> Result<usize> {
        let n = self.level();
        if n > shape.depth() {
            return Err(Error::DepthExceeded { requested: n, depth: shape.depth() });
        }
        let mut idx = 0usize;
        for (i, &x) in self.word.iter().enumerate() {
            let size = shape.branching(i + 1);
            if x >= size {
                return Err(Error::LetterOutOfRange { level: i + 1, letter: x, size });
            }
            idx = idx
                .checked_mul(size)
                .and_then(|v| v.checked_add(x))
                .ok_or_else(|| Error::Budget(format!("vertex index overflows at level {n}")))?;
        }
        Ok(idx)
    }

    pub fn from_index(shape: &TreeShape, level: usize, index: usize) -> Result<Self> {
        let size = shape.checked_level_size(level)?;
        if index >= size {
            return Err(Error::Precondition(format!(
                "index {index} is outside level {level} of size {size}"
            )));
        }
        let mut word = vec![0; level];
        let mut rest = index;
        for n in (1..=level).rev() {
            let m = shape.branching(n);
            word[n - 1] = rest % m;
            rest /= m;
        }
        Ok(Vertex { word })
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.iter().all(|&x| x < 10) {
            for x in &self.word {
                write!(f, "{x}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.word.iter().map(|x| x.to_string()).collect();
            f.write_str(&parts.join("."))
        }
    }
}

impl FromStr for Vertex {
    type Err = Error;

    /// Accepts `0110` (single-digit letters) or `3.11.0` (dotted letters).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Precondition(format!("cannot read vertex `{s}`"));
        if s.is_empty() {
            return Ok(Vertex::root());
        }
        let word = if s.contains('.') {
            s.split('.').map(|p| p.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<_>>()?
        } else {
            s.chars().map(|c| c.to_digit(10).map(|x| x as usize).ok_or_else(bad)).collect::<Result<_>>()?
        };
        Ok(Vertex { word })
    }
}

/// Permutation of `V_n` in the mixed-radix encoding.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LevelMap {
    level: usize,
    table: Vec<u32>,
}

impl LevelMap {
    pub fn new(level: usize, table: Vec<u32>) -> Result<Self> {
        if !is_bijection(&table) {
            return Err(Error::NotBijection { level });
        }
        Ok(LevelMap { level, table })
    }

    pub(crate) fn from_raw(level: usize, table: Vec<u32>) -> Self {
        debug_assert!(is_bijection(&table));
        LevelMap { level, table }
    }

    pub fn identity(level: usize, size: usize) -> Self {
        LevelMap { level, table: (0..size as u32).collect() }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn into_table(self) -> Vec<u32> {
        self.table
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.table[i] as usize
    }

    pub fn is_identity(&self) -> bool {
        self.table.iter().enumerate().all(|(i, &x)| i == x as usize)
    }

    /// `self ∘ other`: `other` acts first.
    pub fn compose(&self, other: &LevelMap) -> LevelMap {
        assert_eq!(self.len(), other.len(), "level maps of different sizes");
        let table = other.table.iter().map(|&x| self.table[x as usize]).collect();
        LevelMap { level: self.level, table }
    }

    pub fn inverse(&self) -> LevelMap {
        let mut table = vec![0u32; self.len()];
        for (i, &x) in self.table.iter().enumerate() {
            table[x as usize] = i as u32;
        }
        LevelMap { level: self.level, table }
    }

    pub fn pow(&self, e: i64) -> LevelMap {
        let mut table = vec![0u32; self.len()];
        for cycle in self.cycles() {
            let len = cycle.len() as i64;
            let shift = e.rem_euclid(len) as usize;
            for (pos, &x) in cycle.iter().enumerate() {
                table[x as usize] = cycle[(pos + shift) % cycle.len()];
            }
        }
        LevelMap { level: self.level, table }
    }

    /// Cycles in orbit order, each starting at its least vertex, sorted by that vertex.
    pub fn cycles(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                cycle.push(x as u32);
                x = self.table[x] as usize;
            }
            out.push(cycle);
        }
        out
    }

    /// Length of the cycle through each vertex.
    pub fn cycle_lengths(&self) -> Vec<u32> {
        let mut lengths = vec![0u32; self.len()];
        for start in 0..self.len() {
            if lengths[start] != 0 {
                continue;
            }
            let mut len = 1u32;
            let mut x = self.table[start] as usize;
            while x != start {
                len += 1;
                x = self.table[x] as usize;
            }
            let mut x = start;
            loop {
                lengths[x] = len;
                x = self.table[x] as usize;
                if x == start {
                    break;
                }
            }
        }
        lengths
    }

    /// Sorted multiset of cycle lengths.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut lengths: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        lengths.sort_unstable();
        lengths
    }

    pub fn sign(&self) -> i8 {
        let cycles = self.cycles().len();
        if (self.len() - cycles) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn order(&self) -> BigUint {
        let mut lengths = self.cycle_type();
        lengths.dedup();
        lengths.into_iter().fold(BigUint::one(), |acc, l| acc.lcm(&BigUint::from(l)))
    }

    /// Lift to the next level acting trivially on the new letter:
    /// `σ(v s) = σ(v) s`.
    pub fn parallel_lift(&self, m: usize) -> LevelMap {
        let mut table = vec![0u32; self.len() * m];
        for (v, &image) in self.table.iter().enumerate() {
            for s in 0..m {
                table[v * m + s] = (image as usize * m + s) as u32;
            }
        }
        LevelMap { level: self.level + 1, table }
    }

    /// Lift to the next level turning every cycle `v_1 … v_l` (with `v_1` its
    /// least vertex) into a single cycle of length `l m`: interior steps keep
    /// the new letter, the closing step `v_l s ↦ v_1 (s + 1)` increments it
    /// and `v_l (m - 1) ↦ v_1 0` wraps.
    pub fn splice_lift(&self, m: usize) -> LevelMap {
        let mut table = vec![0u32; self.len() * m];
        for cycle in self.cycles() {
            let first = cycle[0] as usize;
            for (j, &v) in cycle.iter().enumerate() {
                let v = v as usize;
                if j + 1 < cycle.len() {
                    let next = cycle[j + 1] as usize;
                    for s in 0..m {
                        table[v * m + s] = (next * m + s) as u32;
                    }
                } else {
                    for s in 0..m {
                        table[v * m + s] = (first * m + (s + 1) % m) as u32;
                    }
                }
            }
        }
        LevelMap { level: self.level + 1, table }
    }

    pub fn is_transitive(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        let mut len = 1;
        let mut x = self.table[0] as usize;
        while x != 0 {
            len += 1;
            x = self.table[x] as usize;
        }
        len == self.len()
    }
}

fn is_bijection(table: &[u32]) -> bool {
    let mut seen = vec![false; table.len()];
    for &x in table {
        let x = x as usize;
        if x >= table.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// Outcome of comparing two truncations in the tree metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Distance {
    /// `2^-m`, where `m` is the last level on which the two agree.
    Dyadic(usize),
    /// The two agree on every stored level.
    EqualToDepth(usize),
}

impl Distance {
    /// Whether the distance is at most `2^-m`.
    pub fn at_most(&self, m: usize) -> bool {
        match self {
            Distance::Dyadic(e) => *e >= m,
            Distance::EqualToDepth(_) => true,
        }
    }
}

impl Ord for Distance {
    fn cmp(&self, other: &Self) -> Ordering {
        use Distance::*;
        match (self, other) {
            (EqualToDepth(a), EqualToDepth(b)) => b.cmp(a),
            (EqualToDepth(_), Dyadic(_)) => Ordering::Less,
            (Dyadic(_), EqualToDepth(_)) => Ordering::Greater,
            (Dyadic(a), Dyadic(b)) => b.cmp(a),
        }
    }
}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Dyadic(0) => f.write_str("1"),
            Distance::Dyadic(m) => write!(f, "1/{}", BigUint::one() << *m),
            Distance::EqualToDepth(n) => write!(f, "equal to depth {n}"),
        }
    }
}

/// The restrictions `u|V_1, …, u|V_N` of a tree automorphism.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TruncatedAutomorphism {
    shape: TreeShape,
    levels: Vec<LevelMap>,
}

impl TruncatedAutomorphism {
    pub fn identity(shape: &TreeShape) -> Result<Self> {
        let levels = (1..=shape.depth())
            .map(|n| Ok(LevelMap::identity(n, shape.checked_level_size(n)?)))
            .collect::<Result<_>>()?;
        Ok(TruncatedAutomorphism { shape: shape.clone(), levels })
    }

    /// Builds a family from raw tables; each must be a bijection of the right
    /// size. Prefix compatibility is not required here, see
    /// [`verify_consistency`](Self::verify_consistency).
    pub fn from_levels(shape: &TreeShape, tables: Vec<Vec<u32>>) -> Result<Self> {
        if tables.len() != shape.depth() {
            return Err(Error::ShapeMismatch(format!(
                "{} level tables for depth {}",
                tables.len(),
                shape.depth()
            )));
        }
        let levels = tables
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let n = i + 1;
                let size = shape.checked_level_size(n)?;
                if t.len() != size {
                    return Err(Error::ShapeMismatch(format!(
                        "level {n} table has {} entries, expected {size}",
                        t.len()
                    )));
                }
                LevelMap::new(n, t)
            })
            .collect::<Result<_>>()?;
        Ok(TruncatedAutomorphism { shape: shape.clone(), levels })
    }

    /// Builds the family from its deepest level, reading the others off by
    /// prefix truncation.
    pub fn from_top(shape: &TreeShape, top: Vec<u32>) -> Result<Self> {
        let depth = shape.depth();
        let size = shape.checked_level_size(depth)?;
        if top.len() != size {
            return Err(Error::ShapeMismatch(format!(
                "top table has {} entries, expected {size}",
                top.len()
            )));
        }
        let mut levels = vec![LevelMap::new(depth, top)?];
        for n in (1..depth).rev() {
            let m = shape.branching(n + 1);
            let upper = levels.last().expect("nonempty");
            let lower: Vec<u32> = (0..shape.level_size(n))
                .map(|v| upper.table[v * m] / m as u32)
                .collect();
            for (x, &image) in upper.table.iter().enumerate() {
                if (image as usize) / m != lower[x / m] as usize {
                    return Err(Error::Precondition(format!(
                        "top table does not preserve the tree at level {}",
                        n + 1
                    )));
                }
            }
            levels.push(LevelMap::new(n, lower)?);
        }
        levels.reverse();
        Ok(TruncatedAutomorphism { shape: shape.clone(), levels })
    }

    /// Builds the automorphism with local permutation `local(n, v)` at each
    /// vertex `v` of level `n - 1`: `u(v x) = u(v) local(n, v)(x)`.
    pub fn from_portrait<F>(shape: &TreeShape, mut local: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<usize>,
    {
        let mut levels: Vec<LevelMap> = Vec::with_capacity(shape.depth());
        let mut prev: Vec<u32> = vec![0];
        for n in 1..=shape.depth() {
            let size = shape.checked_level_size(n)?;
            let m = shape.branching(n);
            let mut table = vec![0u32; size];
            let mut seen = vec![false; m];
            for (v, &pv) in prev.iter().enumerate() {
                let rho = local(n, v);
                if rho.len() != m {
                    return Err(Error::Arity { expected: m, found: rho.len() });
                }
                seen.iter_mut().for_each(|s| *s = false);
                for (x, &y) in rho.iter().enumerate() {
                    if y >= m || seen[y] {
                        return Err(Error::InvalidPermutation(format!(
                            "local label {rho:?} at level {n}"
                        )));
                    }
                    seen[y] = true;
                    table[v * m + x] = (pv as usize * m + y) as u32;
                }
            }
            levels.push(LevelMap::from_raw(n, table));
            prev = levels.last().expect("pushed").table.clone();
        }
        Ok(TruncatedAutomorphism { shape: shape.clone(), levels })
    }

    pub(crate) fn from_level_maps(shape: &TreeShape, levels: Vec<LevelMap>) -> Self {
        debug_assert_eq!(levels.len(), shape.depth());
        TruncatedAutomorphism { shape: shape.clone(), levels }
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn depth(&self) -> usize {
        self.shape.depth()
    }

    pub fn levels(&self) -> &[LevelMap] {
        &self.levels
    }

    /// `u|V_n`; level 0 is the trivial permutation of the root.
    pub fn level(&self, n: usize) -> Result<&LevelMap> {
        if n == 0 || n > self.depth() {
            return Err(Error::DepthExceeded { requested: n, depth: self.depth() });
        }
        Ok(&self.levels[n - 1])
    }

    pub fn top(&self) -> &LevelMap {
        self.levels.last().expect("depth is positive")
    }

    /// Whether `π_{n+1}(vx)` begins with `π_n(v)` at every stored level.
    pub fn verify_consistency(&self) -> bool {
        self.levels.windows(2).enumerate().all(|(i, pair)| {
            let m = self.shape.branching(i + 2);
            pair[1]
                .table
                .iter()
                .enumerate()
                .all(|(x, &y)| y as usize / m == pair[0].table[x / m] as usize)
        })
    }

    pub fn apply(&self, v: &Vertex) -> Result<Vertex> {
        let n = v.level();
        if n == 0 {
            return Ok(Vertex::root());
        }
        let idx = v.index(&self.shape)?;
        Vertex::from_index(&self.shape, n, self.level(n)?.image(idx))
    }

    pub fn apply_index(&self, n: usize, idx: usize) -> Result<usize> {
        if n == 0 {
            return Ok(0);
        }
        let map = self.level(n)?;
        if idx >= map.len() {
            return Err(Error::Precondition(format!("index {idx} is outside level {n}")));
        }
        Ok(map.image(idx))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.depth() != other.depth() || !self.shape.same_index_as(&other.shape) {
            return Err(Error::ShapeMismatch(format!(
                "depths {} and {} or spherical indices differ",
                self.depth(),
                other.depth()
            )));
        }
        Ok(())
    }

    /// `self ∘ other` on every level.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let levels = self.levels.iter().zip(&other.levels).map(|(u, w)| u.compose(w)).collect();
        Ok(TruncatedAutomorphism { shape: self.shape.clone(), levels })
    }

    pub fn inverse(&self) -> Self {
        let levels = self.levels.iter().map(LevelMap::inverse).collect();
        TruncatedAutomorphism { shape: self.shape.clone(), levels }
    }

    pub fn pow(&self, e: i64) -> Self {
        let levels = self.levels.iter().map(|l| l.pow(e)).collect();
        TruncatedAutomorphism { shape: self.shape.clone(), levels }
    }

    /// `g ∘ self ∘ g⁻¹`.
    pub fn conjugate_by(&self, g: &Self) -> Result<Self> {
        g.compose(self)?.compose(&g.inverse())
    }

    /// `[self, other] = self other self⁻¹ other⁻¹`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.compose(other)?.compose(&self.inverse())?.compose(&other.inverse())
    }

    /// Restriction to the first `n` levels.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.depth() {
            return Err(Error::DepthExceeded { requested: n, depth: self.depth() });
        }
        Ok(TruncatedAutomorphism {
            shape: self.shape.with_depth(n)?,
            levels: self.levels[..n].to_vec(),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.levels.iter().all(LevelMap::is_identity)
    }

    pub fn distance(&self, other: &Self) -> Result<Distance> {
        self.check_same_shape(other)?;
        match self.levels.iter().zip(&other.levels).position(|(u, w)| u != w) {
            Some(i) => Ok(Distance::Dyadic(i)),
            None => Ok(Distance::EqualToDepth(self.depth())),
        }
    }

    pub fn sign_at_level(&self, n: usize) -> Result<i8> {
        Ok(self.level(n)?.sign())
    }

    pub fn order_at_level(&self, n: usize) -> Result<BigUint> {
        Ok(self.level(n)?.order())
    }

    /// `(o(u_1), …, o(u_n))`.
    pub fn order_profile(&self, n: usize) -> Result<Vec<BigUint>> {
        (1..=n).map(|k| self.order_at_level(k)).collect()
    }

    pub fn to_document(&self) -> String {
        let doc = DocumentRef {
            schema: DOCUMENT_SCHEMA,
            shape: &self.shape,
            levels: self.levels.iter().map(|l| l.table.as_slice()).collect(),
        };
        serde_json::to_string(&doc).expect("serializable")
    }

    /// Reads a document written by [`to_document`](Self::to_document); the
    /// family must be prefix compatible.
    pub fn from_document(text: &str) -> Result<Self> {
        let doc: Document =
            serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        if doc.schema != DOCUMENT_SCHEMA {
            return Err(Error::Document(format!("unsupported schema `{}`", doc.schema)));
        }
        let shape = match doc.shape.index {
            SphericalIndex::Constant { d } => TreeShape::constant(d, doc.shape.depth)?,
            SphericalIndex::Explicit { factors } => TreeShape::explicit(factors, doc.shape.depth)?,
        };
        let u = Self::from_levels(&shape, doc.levels)?;
        if !u.verify_consistency() {
            return Err(Error::Document("levels are not prefix compatible".into()));
        }
        Ok(u)
    }
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    schema: &'a str,
    shape: &'a TreeShape,
    levels: Vec<&'a [u32]>,
}

#[derive(Deserialize)]
struct Document {
    schema: String,
    shape: TreeShape,
    levels: Vec<Vec<u32>>,
}

/// Successor map on words with `x_1` least significant, built directly on
/// any shape.
pub fn adding_machine(shape: &TreeShape) -> Result<TruncatedAutomorphism> {
    TruncatedAutomorphism::from_portrait(shape, |n, v| {
        let m = shape.branching(n);
        // carry reaches level n exactly when every earlier letter is maximal
        let carried = (1..n).rev().try_fold(v, |rest, i| {
            let mi = shape.branching(i);
            (rest % mi == mi - 1).then_some(rest / mi)
        });
        if carried.is_some() {
            (0..m).map(|x| (x + 1) % m).collect()
        } else {
            (0..m).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eta(depth: usize) -> TruncatedAutomorphism {
        TruncatedAutomorphism::from_portrait(&TreeShape::binary(depth), |n, _| {
            if n == 1 {
                vec![1, 0]
            } else {
                vec![0, 1]
            }
        })
        .unwrap()
    }

    #[test]
    fn vertex_roundtrip() {
        let shape = TreeShape::explicit(vec![2, 3, 5], 3).unwrap();
        for i in 0..30 {
            let v = Vertex::from_index(&shape, 3, i).unwrap();
            assert_eq!(v.index(&shape).unwrap(), i);
        }
        let v: Vertex = "120".parse().unwrap();
        assert_eq!(v.word(), &[1, 2, 0]);
        assert_eq!(v.index(&shape).unwrap(), 15 + 2 * 5);
        assert!("1.7".parse::<Vertex>().unwrap().index(&shape).is_err());
    }

    #[test]
    fn identity_is_consistent() {
        let id = TruncatedAutomorphism::identity(&TreeShape::binary(5)).unwrap();
        assert!(id.verify_consistency());
        let v: Vertex = "011".parse().unwrap();
        assert_eq!(id.apply(&v).unwrap(), v);
    }

    #[test]
    fn inconsistent_family_detected() {
        // π₁ swaps 0 and 1, π₂ swaps 00 and 01
        let u = TruncatedAutomorphism::from_levels(
            &TreeShape::binary(2),
            vec![vec![1, 0], vec![1, 0, 2, 3]],
        )
        .unwrap();
        assert!(!u.verify_consistency());
    }

    #[test]
    fn from_levels_rejects_non_bijection() {
        let err = TruncatedAutomorphism::from_levels(&TreeShape::binary(1), vec![vec![0, 0]]);
        assert_eq!(err.unwrap_err(), Error::NotBijection { level: 1 });
    }

    #[test]
    fn eta_swaps_first_letter() {
        let e = eta(3);
        let v: Vertex = "010".parse().unwrap();
        assert_eq!(e.apply(&v).unwrap().to_string(), "110");
        assert!(e.compose(&e).unwrap().is_identity());
        assert_eq!(e.sign_at_level(2).unwrap(), 1);
        assert_eq!(e.sign_at_level(1).unwrap(), -1);
    }

    #[test]
    fn adding_machine_on_binary() {
        let a = adding_machine(&TreeShape::binary(8)).unwrap();
        assert!(a.verify_consistency());
        assert_eq!(a.apply(&"11".parse().unwrap()).unwrap().to_string(), "00");
        assert_eq!(a.apply(&"10".parse().unwrap()).unwrap().to_string(), "01");
        for n in 1..=8 {
            assert_eq!(a.sign_at_level(n).unwrap(), -1);
            assert!(a.level(n).unwrap().is_transitive());
        }
        assert_eq!(a.order_at_level(5).unwrap(), BigUint::from(32u32));
    }

    #[test]
    fn adding_machine_on_mixed_radix() {
        let shape = TreeShape::explicit(vec![2, 3, 4], 3).unwrap();
        let a = adding_machine(&shape).unwrap();
        assert!(a.verify_consistency());
        let profile = a.order_profile(3).unwrap();
        assert_eq!(profile, vec![2u32, 6, 24].into_iter().map(BigUint::from).collect::<Vec<_>>());
        assert_eq!(a.apply(&"12".parse().unwrap()).unwrap().to_string(), "00");
        assert_eq!(a.apply(&"02".parse().unwrap()).unwrap().to_string(), "12");
    }

    #[test]
    fn distance_examples() {
        let id = TruncatedAutomorphism::identity(&TreeShape::binary(6)).unwrap();
        let a = adding_machine(&TreeShape::binary(6)).unwrap();
        assert_eq!(id.distance(&id).unwrap(), Distance::EqualToDepth(6));
        assert_eq!(id.distance(&eta(6)).unwrap(), Distance::Dyadic(0));
        assert_eq!(id.distance(&a.pow(2)).unwrap(), Distance::Dyadic(1));
        assert_eq!(Distance::Dyadic(1).to_string(), "1/2");
    }

    #[test]
    fn pow_matches_repeated_compose() {
        let a = adding_machine(&TreeShape::constant(3, 4).unwrap()).unwrap();
        let mut acc = TruncatedAutomorphism::identity(a.shape()).unwrap();
        for e in 0..12 {
            assert_eq!(a.pow(e), acc);
            acc = acc.compose(&a).unwrap();
        }
        assert_eq!(a.pow(-1), a.inverse());
    }

    #[test]
    fn document_roundtrip() {
        let a = adding_machine(&TreeShape::constant(3, 3).unwrap()).unwrap();
        let text = a.to_document();
        assert!(text.contains(DOCUMENT_SCHEMA));
        assert_eq!(TruncatedAutomorphism::from_document(&text).unwrap(), a);
        let broken = text.replace(DOCUMENT_SCHEMA, "arbor.automorphism.v0");
        assert!(matches!(
            TruncatedAutomorphism::from_document(&broken),
            Err(Error::Document(_))
        ));
    }

    #[test]
    fn from_top_recovers_levels() {
        let a = adding_machine(&TreeShape::binary(5)).unwrap();
        let rebuilt = TruncatedAutomorphism::from_top(a.shape(), a.top().table().to_vec()).unwrap();
        assert_eq!(rebuilt, a);
        assert!(TruncatedAutomorphism::from_top(&TreeShape::binary(2), vec![1, 2, 0, 3]).is_err());
    }

    #[test]
    fn depth_exceeded() {
        let id = TruncatedAutomorphism::identity(&TreeShape::binary(2)).unwrap();
        assert!(matches!(
            id.apply(&Vertex::zeros(3)),
            Err(Error::DepthExceeded { requested: 3, depth: 2 })
        ));
        assert!(id.sign_at_level(3).is_err());
    }
}
