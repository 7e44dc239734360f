//! Wreath-recursive element definitions and their level-by-level evaluation.
//!
//! Products follow function composition: `Compose([u, w])` applies `w`
//! first. A tuple `(c_0, …, c_{m-1})` fixes the first letter and acts by
//! `c_s` below letter `s`; a root permutation acts on the first letter only.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{LevelMap, TreeShape, TruncatedAutomorphism, MAX_LEVEL_SIZE};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementExpr {
    Identity,
    RootPerm(Vec<usize>),
    Tuple(Vec<ElementExpr>),
    Compose(Vec<ElementExpr>),
    Inverse(Box<ElementExpr>),
    Ref(String),
}

impl ElementExpr {
    /// The swap of the two letters of a binary tree.
    pub fn eta() -> Self {
        ElementExpr::RootPerm(vec![1, 0])
    }

    /// `s ↦ s + 1 mod d` on the first letter.
    pub fn rotation(d: usize) -> Self {
        ElementExpr::RootPerm((0..d).map(|s| (s + 1) % d).collect())
    }

    pub fn reference(name: impl Into<String>) -> Self {
        ElementExpr::Ref(name.into())
    }

    pub fn tuple(children: Vec<ElementExpr>) -> Self {
        ElementExpr::Tuple(children)
    }

    pub fn compose(factors: Vec<ElementExpr>) -> Self {
        ElementExpr::Compose(factors)
    }

    pub fn inverse(self) -> Self {
        ElementExpr::Inverse(Box::new(self))
    }

    /// `self^e`, expanded into a product of copies.
    pub fn pow(self, e: i64) -> Self {
        match e {
            0 => ElementExpr::Identity,
            1 => self,
            -1 => self.inverse(),
            _ => {
                let base = if e < 0 { self.inverse() } else { self };
                ElementExpr::Compose(vec![base; e.unsigned_abs() as usize])
            }
        }
    }

    /// Every name referenced anywhere in the expression.
    pub fn refs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_refs(true, &mut out);
        out
    }

    /// Names referenced at the same level, i.e. outside every tuple.
    fn head_refs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_refs(false, &mut out);
        out
    }

    fn collect_refs(&self, enter_tuples: bool, out: &mut BTreeSet<String>) {
        match self {
            ElementExpr::Identity | ElementExpr::RootPerm(_) => {}
            ElementExpr::Tuple(cs) => {
                if enter_tuples {
                    cs.iter().for_each(|c| c.collect_refs(true, out));
                }
            }
            ElementExpr::Compose(fs) => fs.iter().for_each(|f| f.collect_refs(enter_tuples, out)),
            ElementExpr::Inverse(x) => x.collect_refs(enter_tuples, out),
            ElementExpr::Ref(name) => {
                out.insert(name.clone());
            }
        }
    }

    fn is_compound(&self) -> bool {
        matches!(self, ElementExpr::Compose(fs) if fs.len() > 1)
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, e: &ElementExpr) -> fmt::Result {
    if e.is_compound() {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for ElementExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementExpr::Identity => f.write_str("id"),
            ElementExpr::RootPerm(p) if p == &[1, 0] => f.write_str("eta"),
            ElementExpr::RootPerm(p) => {
                f.write_str("perm(")?;
                let mut seen = vec![false; p.len()];
                for start in 0..p.len() {
                    if seen[start] || p[start] == start {
                        continue;
                    }
                    let mut cycle = Vec::new();
                    let mut x = start;
                    while !seen[x] {
                        seen[x] = true;
                        cycle.push(x.to_string());
                        x = p[x];
                    }
                    write!(f, "({})", cycle.join(" "))?;
                }
                f.write_str(")")
            }
            ElementExpr::Tuple(cs) => {
                f.write_str("(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
            ElementExpr::Compose(fs) => match fs.as_slice() {
                [] => f.write_str("id"),
                [x] => write!(f, "{x}"),
                _ => {
                    for (i, x) in fs.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" * ")?;
                        }
                        write_term(f, x)?;
                    }
                    Ok(())
                }
            },
            ElementExpr::Inverse(x) => {
                write_term(f, x)?;
                f.write_str("^-1")
            }
            ElementExpr::Ref(name) => f.write_str(name),
        }
    }
}

/// Named definitions over a fixed tree shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecursionEnv {
    shape: TreeShape,
    bindings: BTreeMap<String, ElementExpr>,
    order: Vec<String>,
}

impl RecursionEnv {
    pub fn new(shape: TreeShape) -> Self {
        RecursionEnv { shape, bindings: BTreeMap::new(), order: Vec::new() }
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn get(&self, name: &str) -> Option<&ElementExpr> {
        self.bindings.get(name)
    }

    /// Binding names in definition order.
    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn define(self, name: impl Into<String>, expr: ElementExpr) -> Result<Self> {
        self.define_all(vec![(name.into(), expr)])
    }

    /// Adds a batch of possibly mutually recursive bindings at once.
    pub fn define_all(mut self, defs: Vec<(String, ElementExpr)>) -> Result<Self> {
        for (name, expr) in defs {
            if self.bindings.contains_key(&name) {
                return Err(Error::DuplicateDefinition(name));
            }
            self.check_arity(&expr, 0)?;
            self.bindings.insert(name.clone(), expr);
            self.order.push(name);
        }
        self.check_references()?;
        self.check_contraction()?;
        Ok(self)
    }

    /// Arity and reference resolution for an unbound expression; bound
    /// names were already checked for contraction.
    pub fn check_expr(&self, expr: &ElementExpr) -> Result<()> {
        self.check_arity(expr, 0)?;
        for name in expr.refs() {
            if !self.bindings.contains_key(&name) {
                return Err(Error::UnresolvedRef(name));
            }
        }
        Ok(())
    }

    fn check_arity(&self, expr: &ElementExpr, offset: usize) -> Result<()> {
        let Some(m) = self.shape.branching_checked(offset + 1) else {
            // nothing below the end of an explicit index is ever evaluated
            return Ok(());
        };
        match expr {
            ElementExpr::Identity => Ok(()),
            ElementExpr::RootPerm(p) => {
                if p.len() != m {
                    return Err(Error::Arity { expected: m, found: p.len() });
                }
                let mut seen = vec![false; m];
                for &x in p {
                    if x >= m || seen[x] {
                        return Err(Error::InvalidPermutation(format!("{p:?}")));
                    }
                    seen[x] = true;
                }
                Ok(())
            }
            ElementExpr::Tuple(cs) => {
                if cs.len() != m {
                    return Err(Error::Arity { expected: m, found: cs.len() });
                }
                cs.iter().try_for_each(|c| self.check_arity(c, offset + 1))
            }
            ElementExpr::Compose(fs) => fs.iter().try_for_each(|f| self.check_arity(f, offset)),
            ElementExpr::Inverse(x) => self.check_arity(x, offset),
            ElementExpr::Ref(name) => {
                if self.shape.degree().is_none() {
                    return Err(Error::Precondition(format!(
                        "reference `{name}` needs a constant branching factor"
                    )));
                }
                Ok(())
            }
        }
    }

    fn check_references(&self) -> Result<()> {
        for body in self.bindings.values() {
            if let Some(name) = body.refs().into_iter().find(|n| !self.bindings.contains_key(n)) {
                return Err(Error::UnresolvedRef(name));
            }
        }
        Ok(())
    }

    /// Same-level references must form an acyclic graph, so that evaluating
    /// a binding at level `n` only ever waits on level `n - 1`.
    fn check_contraction(&self) -> Result<()> {
        let mut state = HashMap::new();
        for name in &self.order {
            self.visit(name, &mut state, &mut Vec::new())?;
        }
        Ok(())
    }

    fn visit<'a>(
        &'a self,
        name: &'a str,
        state: &mut HashMap<&'a str, bool>,
        path: &mut Vec<&'a str>,
    ) -> Result<()> {
        match state.get(name) {
            Some(true) => return Ok(()),
            Some(false) => {
                let start = path.iter().position(|&p| p == name).unwrap_or(0);
                let mut cycle: Vec<&str> = path[start..].to_vec();
                cycle.push(name);
                return Err(Error::NonContracting(format!(
                    "`{}` refers to itself at the same level",
                    cycle.join("` -> `")
                )));
            }
            None => {}
        }
        state.insert(name, false);
        path.push(name);
        let body = self.bindings.get(name).ok_or_else(|| Error::UnresolvedRef(name.into()))?;
        for dep in body.head_refs() {
            let (key, _) = self.bindings.get_key_value(dep.as_str()).ok_or(Error::UnresolvedRef(dep))?;
            self.visit(key, state, path)?;
        }
        path.pop();
        state.insert(name, true);
        Ok(())
    }

    /// Binary environment with the odometer `a = (a, id) * eta`,
    /// `b = (a, b)` and `c = (b, c)`.
    pub fn standard_binary(depth: usize) -> Self {
        use ElementExpr as E;
        RecursionEnv::new(TreeShape::binary(depth))
            .define_all(vec![
                ("a".into(), odometer_binding(2, "a")),
                ("b".into(), E::tuple(vec![E::reference("a"), E::reference("b")])),
                ("c".into(), E::tuple(vec![E::reference("b"), E::reference("c")])),
            ])
            .expect("standard definitions are contracting")
    }
}

/// `u = ρ · (c_0, …, c_{m-1})`, meaning `u(s x) = ρ(s) c_s(x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    pub root: Vec<usize>,
    pub children: Vec<ElementExpr>,
}

fn identity_perm(m: usize) -> Vec<usize> {
    (0..m).collect()
}

fn invert_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

fn simplify_compose(a: ElementExpr, b: ElementExpr) -> ElementExpr {
    let mut factors = Vec::new();
    for e in [a, b] {
        match e {
            ElementExpr::Identity => {}
            ElementExpr::Compose(fs) => factors.extend(fs),
            other => factors.push(other),
        }
    }
    match factors.len() {
        0 => ElementExpr::Identity,
        1 => factors.pop().expect("one factor"),
        _ => ElementExpr::Compose(factors),
    }
}

fn simplify_inverse(e: ElementExpr) -> ElementExpr {
    match e {
        ElementExpr::Identity => ElementExpr::Identity,
        ElementExpr::Inverse(x) => *x,
        ElementExpr::RootPerm(p) => ElementExpr::RootPerm(invert_perm(&p)),
        other => other.inverse(),
    }
}

/// Pushes every root permutation to the left using
/// `(c_0, …) ρ = ρ (c_{ρ(0)}, …)`.
pub fn normal_form(expr: &ElementExpr, env: &RecursionEnv) -> Result<NormalForm> {
    env.check_expr(expr)?;
    normal_form_at(expr, env, 0)
}

fn normal_form_at(expr: &ElementExpr, env: &RecursionEnv, offset: usize) -> Result<NormalForm> {
    let m = env.shape.branching(offset + 1);
    Ok(match expr {
        ElementExpr::Identity => {
            NormalForm { root: identity_perm(m), children: vec![ElementExpr::Identity; m] }
        }
        ElementExpr::RootPerm(p) => {
            NormalForm { root: p.clone(), children: vec![ElementExpr::Identity; m] }
        }
        ElementExpr::Tuple(cs) => NormalForm { root: identity_perm(m), children: cs.clone() },
        ElementExpr::Compose(fs) => {
            let mut acc =
                NormalForm { root: identity_perm(m), children: vec![ElementExpr::Identity; m] };
            for f in fs {
                let next = normal_form_at(f, env, offset)?;
                // (ρ1, c1) ∘ (ρ2, c2) = (ρ1 ρ2, s ↦ c1_{ρ2(s)} ∘ c2_s)
                let root = next.root.iter().map(|&s| acc.root[s]).collect();
                let children = next
                    .children
                    .into_iter()
                    .enumerate()
                    .map(|(s, c2)| simplify_compose(acc.children[next.root[s]].clone(), c2))
                    .collect();
                acc = NormalForm { root, children };
            }
            acc
        }
        ElementExpr::Inverse(x) => {
            let nf = normal_form_at(x, env, offset)?;
            let inv = invert_perm(&nf.root);
            let children =
                (0..m).map(|s| simplify_inverse(nf.children[inv[s]].clone())).collect();
            NormalForm { root: inv, children }
        }
        ElementExpr::Ref(name) => {
            let body = env.get(name).ok_or_else(|| Error::UnresolvedRef(name.clone()))?;
            normal_form_at(body, env, offset)?
        }
    })
}

/// The child of the normal form below `letter`.
pub fn section(expr: &ElementExpr, letter: usize, env: &RecursionEnv) -> Result<ElementExpr> {
    let m = env.shape.branching(1);
    if letter >= m {
        return Err(Error::LetterOutOfRange { level: 1, letter, size: m });
    }
    let mut nf = normal_form(expr, env)?;
    Ok(nf.children.swap_remove(letter))
}

type Table = Arc<Vec<u32>>;

/// Evaluates expressions over one environment, memoizing each binding per
/// level. Shareable across threads.
pub struct Evaluator<'e> {
    env: &'e RecursionEnv,
    memo: RwLock<HashMap<(String, usize), Table>>,
}

impl<'e> Evaluator<'e> {
    pub fn new(env: &'e RecursionEnv) -> Self {
        Evaluator { env, memo: RwLock::new(HashMap::new()) }
    }

    fn shape_for(&self, depth: usize) -> Result<TreeShape> {
        self.env.shape.with_depth(depth)
    }

    /// Levels `1..=depth` of `expr`.
    pub fn truncate(&self, expr: &ElementExpr, depth: usize) -> Result<TruncatedAutomorphism> {
        self.env.check_expr(expr)?;
        let shape = self.shape_for(depth)?;
        shape.checked_level_size(depth)?;
        let levels = (1..=depth)
            .map(|n| {
                let table = self.eval(expr, &shape, 0, n)?;
                Ok(LevelMap::from_raw(n, Arc::unwrap_or_clone(table)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TruncatedAutomorphism::from_level_maps(&shape, levels))
    }

    /// Level `n` of `expr` only.
    pub fn level(&self, expr: &ElementExpr, n: usize) -> Result<LevelMap> {
        self.env.check_expr(expr)?;
        let shape = self.shape_for(n.max(1))?;
        shape.checked_level_size(n)?;
        Ok(LevelMap::from_raw(n, Arc::unwrap_or_clone(self.eval(expr, &shape, 0, n)?)))
    }

    fn size(shape: &TreeShape, offset: usize, level: usize) -> usize {
        (offset + 1..=offset + level).map(|i| shape.branching(i)).product()
    }

    fn eval(&self, expr: &ElementExpr, shape: &TreeShape, offset: usize, level: usize) -> Result<Table> {
        if level == 0 {
            return Ok(Arc::new(vec![0]));
        }
        let size = Self::size(shape, offset, level);
        if size > MAX_LEVEL_SIZE {
            return Err(Error::Budget(format!("level {level} exceeds the table limit")));
        }
        let m = shape.branching(offset + 1);
        let below = size / m;
        let table = match expr {
            ElementExpr::Identity => (0..size as u32).collect(),
            ElementExpr::RootPerm(p) => {
                let mut t = vec![0u32; size];
                for (s, &ps) in p.iter().enumerate() {
                    for y in 0..below {
                        t[s * below + y] = (ps * below + y) as u32;
                    }
                }
                t
            }
            ElementExpr::Tuple(cs) => {
                let mut t = vec![0u32; size];
                for (s, c) in cs.iter().enumerate() {
                    let child = self.eval(c, shape, offset + 1, level - 1)?;
                    let base = (s * below) as u32;
                    for (y, &cy) in child.iter().enumerate() {
                        t[s * below + y] = base + cy;
                    }
                }
                t
            }
            ElementExpr::Compose(fs) => {
                let Some((last, rest)) = fs.split_last() else {
                    return Ok(Arc::new((0..size as u32).collect()));
                };
                let mut acc = Arc::unwrap_or_clone(self.eval(last, shape, offset, level)?);
                for f in rest.iter().rev() {
                    let t = self.eval(f, shape, offset, level)?;
                    acc.iter_mut().for_each(|x| *x = t[*x as usize]);
                }
                acc
            }
            ElementExpr::Inverse(x) => {
                let t = self.eval(x, shape, offset, level)?;
                let mut inv = vec![0u32; size];
                for (i, &y) in t.iter().enumerate() {
                    inv[y as usize] = i as u32;
                }
                inv
            }
            ElementExpr::Ref(name) => return self.eval_ref(name, shape, offset, level),
        };
        Ok(Arc::new(table))
    }

    fn eval_ref(&self, name: &str, shape: &TreeShape, offset: usize, level: usize) -> Result<Table> {
        let key = (name.to_string(), level);
        if let Some(t) = self.memo.read().expect("memo lock").get(&key) {
            return Ok(Arc::clone(t));
        }
        let body = self.env.get(name).ok_or_else(|| Error::UnresolvedRef(name.into()))?;
        let table = self.eval(body, shape, offset, level)?;
        self.memo.write().expect("memo lock").entry(key).or_insert_with(|| Arc::clone(&table));
        Ok(table)
    }
}

/// One-shot truncation of `expr` to `depth` levels.
pub fn truncate(expr: &ElementExpr, env: &RecursionEnv, depth: usize) -> Result<TruncatedAutomorphism> {
    Evaluator::new(env).truncate(expr, depth)
}

/// Self-similar odometer body `(a, id, …, id) * ρ` for a binding named `name`.
pub fn odometer_binding(d: usize, name: &str) -> ElementExpr {
    let mut children = vec![ElementExpr::Identity; d];
    children[0] = ElementExpr::reference(name);
    ElementExpr::compose(vec![ElementExpr::tuple(children), ElementExpr::rotation(d)])
}

/// The adding machine of `shape` down to its depth, as a reference-free
/// expression nested one tuple per level.
pub fn odometer(shape: &TreeShape) -> ElementExpr {
    (0..shape.depth()).rev().fold(ElementExpr::Identity, |inner, offset| {
        let m = shape.branching(offset + 1);
        let mut children = vec![ElementExpr::Identity; m];
        children[0] = inner;
        ElementExpr::compose(vec![ElementExpr::tuple(children), ElementExpr::rotation(m)])
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    Double,
    Hold,
}

/// Directive `rules[n - 1]` governs the passage from `V_{n-1}` to `V_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub rules: Vec<Growth>,
}

impl GrowthProfile {
    /// `double, hold, double, hold, …` over `n` levels.
    pub fn alternating(n: usize) -> Self {
        let rules = (0..n).map(|i| if i % 2 == 0 { Growth::Double } else { Growth::Hold }).collect();
        GrowthProfile { rules }
    }

    pub fn constant(rule: Growth, n: usize) -> Self {
        GrowthProfile { rules: vec![rule; n] }
    }
}

/// Binary element whose cycles double in length at `double` levels and split
/// into parallel copies at `hold` levels.
pub fn profile_element(profile: &GrowthProfile, depth: usize) -> Result<TruncatedAutomorphism> {
    if depth == 0 {
        return Err(Error::InfeasibleProfile("depth must be positive".into()));
    }
    if profile.rules.len() < depth {
        return Err(Error::InfeasibleProfile(format!(
            "{} directives for depth {depth}",
            profile.rules.len()
        )));
    }
    let shape = TreeShape::binary(depth);
    shape.checked_level_size(depth)?;
    let mut levels = Vec::with_capacity(depth);
    let mut prev = LevelMap::identity(0, 1);
    for rule in &profile.rules[..depth] {
        let next = match rule {
            Growth::Double => prev.splice_lift(2),
            Growth::Hold => prev.parallel_lift(2),
        };
        levels.push(next.clone());
        prev = next;
    }
    Ok(TruncatedAutomorphism::from_level_maps(&shape, levels))
}
