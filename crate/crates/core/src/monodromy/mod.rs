//! Iterated monodromy groups of quadratic polynomials with strictly
//! pre-periodic critical orbit, words in their normalizers, and the
//! finite-level experiments built on them.

mod level_group;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{theta_signature, AffineElement, BaseOdometerFrame, ThetaSignature};
use crate::cycles::is_minimal_up_to;
use crate::error::{Error, Result};
use crate::recursion::{ElementExpr, Evaluator, RecursionEnv};
use crate::tree::{TreeShape, TruncatedAutomorphism};

pub use level_group::{level_group, LevelGroup};

/// Working depth of presentations built by [`img_generators`].
pub const DEFAULT_DEPTH: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormalizerCase {
    /// `r ≥ 4`, `s ≥ 2`.
    A,
    /// `s = 1`, `r ≥ 3`.
    B,
    /// `r = 3`, `s = 2`.
    C,
    /// `r = 2`, `s = 1`.
    Dihedral,
}

impl NormalizerCase {
    pub fn of(r: usize, s: usize) -> Result<Self> {
        check_params(r, s)?;
        Ok(match (r, s) {
            (2, _) => NormalizerCase::Dihedral,
            (_, 1) => NormalizerCase::B,
            (3, 2) => NormalizerCase::C,
            _ => NormalizerCase::A,
        })
    }

    /// `w_i|V_k` is trivial whenever `k < i + offset`.
    pub fn triviality_offset(&self, s: usize) -> usize {
        match self {
            NormalizerCase::A => s,
            NormalizerCase::B => 1,
            NormalizerCase::C => 2,
            NormalizerCase::Dihedral => 0,
        }
    }

    /// Whether a multiplier `k` lies in the kernel that predicts membership of
    /// `σ_{m,k}` in the group. `None` in the dihedral case.
    pub fn predicts_member(&self, theta: ThetaSignature) -> Option<bool> {
        match self {
            NormalizerCase::A => Some(theta.theta1 == 0),
            NormalizerCase::B => Some(theta.theta2 == 0),
            NormalizerCase::C => Some(theta.theta1 == 0 && theta.theta2 == 0),
            NormalizerCase::Dihedral => None,
        }
    }
}

impl fmt::Display for NormalizerCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizerCase::A => "A",
            NormalizerCase::B => "B",
            NormalizerCase::C => "C",
            NormalizerCase::Dihedral => "dihedral",
        })
    }
}

fn check_params(r: usize, s: usize) -> Result<()> {
    if r < 2 || s == 0 || s >= r {
        return Err(Error::Precondition(format!("need 1 <= s < r and r >= 2, got r = {r}, s = {s}")));
    }
    Ok(())
}

fn u(i: usize) -> ElementExpr {
    ElementExpr::reference(format!("u{i}"))
}

fn w(i: usize) -> ElementExpr {
    ElementExpr::reference(format!("w{i}"))
}

/// Generators `u_1, …, u_r` bound as `u1`, …, `ur` over the binary tree.
#[derive(Clone, Debug)]
pub struct ImgPresentation {
    r: usize,
    s: usize,
    env: RecursionEnv,
}

pub fn img_generators(r: usize, s: usize) -> Result<ImgPresentation> {
    ImgPresentation::with_depth(r, s, DEFAULT_DEPTH)
}

impl ImgPresentation {
    pub fn with_depth(r: usize, s: usize, depth: usize) -> Result<Self> {
        check_params(r, s)?;
        let mut defs = vec![("u1".to_string(), ElementExpr::eta())];
        for i in 2..=r {
            let right = if i == s + 1 { u(r) } else { ElementExpr::Identity };
            defs.push((format!("u{i}"), ElementExpr::tuple(vec![u(i - 1), right])));
        }
        let env = RecursionEnv::new(TreeShape::binary(depth)).define_all(defs)?;
        Ok(ImgPresentation { r, s, env })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn case(&self) -> NormalizerCase {
        NormalizerCase::of(self.r, self.s).expect("parameters were checked")
    }

    pub fn env(&self) -> &RecursionEnv {
        &self.env
    }

    /// `u_i` for `1 ≤ i ≤ r`.
    pub fn generator(&self, i: usize) -> Result<ElementExpr> {
        if i == 0 || i > self.r {
            return Err(Error::Precondition(format!("no generator u{i} for r = {}", self.r)));
        }
        Ok(u(i))
    }

    pub fn generators(&self) -> Vec<ElementExpr> {
        (1..=self.r).map(u).collect()
    }

    pub fn truncated_generators(&self, depth: usize) -> Result<Vec<TruncatedAutomorphism>> {
        let ev = Evaluator::new(&self.env);
        self.generators().iter().map(|g| ev.truncate(g, depth)).collect()
    }

    /// `G|V_n`.
    pub fn level_group(&self, n: usize) -> Result<LevelGroup> {
        level_group(&self.truncated_generators(n.max(1))?, n)
    }
}

/// `a_0 = u_1 u_2 ⋯ u_r`.
pub fn product_generator(pres: &ImgPresentation) -> ElementExpr {
    ElementExpr::compose(pres.generators())
}

/// `w_0^{t_0} w_1^{t_1} ⋯` for a finitely supported `t`, with `t[i] = t_i`.
#[derive(Clone, Debug)]
pub struct NormalizerWord {
    case: NormalizerCase,
    s: usize,
    t: Vec<bool>,
    env: RecursionEnv,
    expr: ElementExpr,
}

pub fn normalizer_words(pres: &ImgPresentation, t: &[bool]) -> Result<NormalizerWord> {
    let case = pres.case();
    if case == NormalizerCase::Dihedral {
        return Err(Error::Precondition("normalizer words need r >= 3".into()));
    }
    if t.first() == Some(&true) && case != NormalizerCase::C {
        return Err(Error::Precondition(format!("t_0 = 1 only exists in case C, not case {case}")));
    }
    let top = t.iter().rposition(|&x| x).unwrap_or(0).max(1);
    let (s, r) = (pres.s(), pres.r());
    let first = match case {
        NormalizerCase::A => ElementExpr::tuple(vec![u(s), u(s)]),
        _ => {
            let us_ur = ElementExpr::compose(vec![u(s), u(r)]);
            ElementExpr::tuple(vec![ElementExpr::Identity, us_ur.pow(2)])
        }
    };
    let mut defs = vec![("w1".to_string(), first)];
    for i in 2..=top {
        defs.push((format!("w{i}"), ElementExpr::tuple(vec![w(i - 1), w(i - 1)])));
    }
    if case == NormalizerCase::C {
        let body = ElementExpr::compose(vec![u(3), ElementExpr::tuple(vec![w(0), w(0)])]);
        defs.push(("w0".to_string(), body));
    }
    let env = pres.env().clone().define_all(defs)?;
    let factors: Vec<ElementExpr> =
        t.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| w(i)).collect();
    let expr = match factors.len() {
        0 => ElementExpr::Identity,
        1 => factors.into_iter().next().expect("one factor"),
        _ => ElementExpr::compose(factors),
    };
    let mut t = t.to_vec();
    while t.last() == Some(&false) {
        t.pop();
    }
    Ok(NormalizerWord { case, s, t, env, expr })
}

impl NormalizerWord {
    pub fn case(&self) -> NormalizerCase {
        self.case
    }

    pub fn t(&self) -> &[bool] {
        &self.t
    }

    /// Environment with the generators and every `w_i` the word needs.
    pub fn env(&self) -> &RecursionEnv {
        &self.env
    }

    pub fn expr(&self) -> &ElementExpr {
        &self.expr
    }

    pub fn is_trivial(&self) -> bool {
        self.t.is_empty()
    }

    /// `w_i`, bound in [`Self::env`] when `i` is at most the largest index in
    /// the support (and at least 1).
    pub fn word(&self, i: usize) -> Result<ElementExpr> {
        let name = format!("w{i}");
        self.env.get(&name).ok_or(Error::UnresolvedRef(name))?;
        Ok(w(i))
    }

    /// Indices `i ≥ 1` whose factor can be nontrivial on `V_depth`.
    pub fn support_at_depth(&self, depth: usize) -> Vec<usize> {
        let offset = self.case.triviality_offset(self.s);
        (1..self.t.len()).filter(|&i| self.t[i] && i + offset <= depth).collect()
    }

    /// The word with factors known to be trivial on `V_depth` dropped.
    pub fn expr_at_depth(&self, depth: usize) -> ElementExpr {
        let mut factors = Vec::new();
        if self.t.first() == Some(&true) {
            factors.push(w(0));
        }
        factors.extend(self.support_at_depth(depth).into_iter().map(w));
        ElementExpr::compose(factors)
    }

    pub fn truncate(&self, depth: usize) -> Result<TruncatedAutomorphism> {
        Evaluator::new(&self.env).truncate(&self.expr_at_depth(depth), depth)
    }

    /// The coset representative used with minimal elements: the word itself,
    /// or `u_3` times it in case C when `t_0 = 1`.
    pub fn coset_representative(&self) -> ElementExpr {
        if self.case == NormalizerCase::C && self.t.first() == Some(&true) {
            ElementExpr::compose(vec![u(3), self.expr.clone()])
        } else {
            self.expr.clone()
        }
    }

    /// Smallest level on which `w_i` acts nontrivially, searched up to `depth`.
    pub fn first_nontrivial_level(&self, i: usize, depth: usize) -> Result<Option<usize>> {
        let x = Evaluator::new(&self.env).truncate(&self.word(i)?, depth)?;
        Ok(x.levels().iter().position(|l| !l.is_identity()).map(|p| p + 1))
    }
}

/// `a · w`, with `w` the case-appropriate representative of the coset of
/// `word`. Evaluate it in `word.env()`.
pub fn coset_minimal_element(word: &NormalizerWord, a0: &ElementExpr) -> ElementExpr {
    if word.is_trivial() {
        return a0.clone();
    }
    ElementExpr::compose(vec![a0.clone(), word.coset_representative()])
}

/// One `(m, k)` cell of a Weyl experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeylRow {
    pub m: u64,
    pub k: u64,
    pub theta: ThetaSignature,
    /// `None` in the dihedral case.
    pub predicted_member: Option<bool>,
    /// Membership on levels `1..=n_max`.
    pub member: Vec<bool>,
    pub first_non_member: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeylReport {
    pub case: NormalizerCase,
    pub r: usize,
    pub s: usize,
    pub n_max: usize,
    pub rows: Vec<WeylRow>,
}

impl WeylReport {
    /// Rows whose multiplier is in the predicted kernel but which fail
    /// membership somewhere.
    pub fn inclusion_violations(&self) -> Vec<&WeylRow> {
        self.rows
            .iter()
            .filter(|r| r.predicted_member == Some(true) && r.first_non_member.is_some())
            .collect()
    }
}

/// Membership of the realized `σ_{m,k}` in `G|V_n`, `n ≤ n_max`, for every
/// `m` in `ms` and odd `k` in `ks`, in the frame of `a_0`.
pub fn weyl_index_experiment(
    pres: &ImgPresentation,
    n_max: usize,
    ms: &[u64],
    ks: &[u64],
) -> Result<WeylReport> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be positive".into()));
    }
    let ev = Evaluator::new(pres.env());
    let a = ev.truncate(&product_generator(pres), n_max)?;
    let frame = BaseOdometerFrame::new(a)?;
    let group = pres.level_group(n_max)?;
    let case = pres.case();
    let cells: Vec<(u64, u64)> = ms.iter().flat_map(|&m| ks.iter().map(move |&k| (m, k))).collect();
    let rows = cells
        .par_iter()
        .map(|&(m, k)| {
            let theta = theta_signature(&BigInt::from(k))?;
            let aff = AffineElement::new(2, n_max, m, k)?;
            let member = (1..=n_max)
                .map(|n| group.contains(&frame.realize_level(&aff, n)?))
                .collect::<Result<Vec<_>>>()?;
            let first_non_member = member.iter().position(|&x| !x).map(|p| p + 1);
            Ok(WeylRow { m, k, theta, predicted_member: case.predicts_member(theta), member, first_non_member })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeylReport { case, r: pres.r(), s: pres.s(), n_max, rows })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DihedralLevel {
    pub n: usize,
    pub order: BigUint,
    pub enumerated: usize,
    pub outside_cyclic: usize,
    /// Elements outside `⟨a⟩` whose square is the identity.
    pub involutions_outside: usize,
    /// Multipliers of the elements that act affinely in the frame of `a`.
    pub multipliers: Vec<u64>,
}

impl DihedralLevel {
    pub fn is_consistent(&self) -> bool {
        let size = 1u64 << self.n;
        let expected: BTreeSet<u64> = [1 % size, size - 1].into_iter().collect();
        // V_1 has only two vertices
        let order = if self.n == 1 { 2 } else { 2usize << self.n };
        self.order == BigUint::from(order)
            && self.enumerated == order
            && self.involutions_outside == self.outside_cyclic
            && self.multipliers.iter().copied().collect::<BTreeSet<_>>() == expected
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DihedralReport {
    pub levels: Vec<DihedralLevel>,
}

impl DihedralReport {
    pub fn is_consistent(&self) -> bool {
        self.levels.iter().all(DihedralLevel::is_consistent)
    }
}

/// Full enumeration of `G|V_n` for `r = 2`, `s = 1` at every `n ≤ n_max`.
pub fn dihedral_audit(n_max: usize) -> Result<DihedralReport> {
    let pres = ImgPresentation::with_depth(2, 1, n_max.max(1))?;
    let gens = pres.truncated_generators(n_max)?;
    let a = Evaluator::new(pres.env()).truncate(&product_generator(&pres), n_max)?;
    let frame = BaseOdometerFrame::new(a.clone())?;
    let levels = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let group = level_group(&gens, n)?;
            let tables: Vec<Vec<u32>> =
                gens.iter().map(|g| Ok(g.level(n)?.table().to_vec())).collect::<Result<_>>()?;
            let elements = closure(&tables);
            let a_n = a.level(n)?;
            let mut cyclic = HashSet::new();
            let mut x = crate::tree::LevelMap::identity(n, a_n.len());
            for _ in 0..a_n.len() {
                cyclic.insert(x.table().to_vec());
                x = a_n.compose(&x);
            }
            let mut outside = 0;
            let mut involutions = 0;
            let mut multipliers = BTreeSet::new();
            for e in &elements {
                let map = crate::tree::LevelMap::new(n, e.clone())?;
                if let Some((_, k)) = frame.fit(&map) {
                    multipliers.insert(k);
                }
                if !cyclic.contains(e) {
                    outside += 1;
                    if map.compose(&map).is_identity() {
                        involutions += 1;
                    }
                }
            }
            Ok(DihedralLevel {
                n,
                order: group.order(),
                enumerated: elements.len(),
                outside_cyclic: outside,
                involutions_outside: involutions,
                multipliers: multipliers.into_iter().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DihedralReport { levels })
}

fn closure(gens: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let size = gens.first().map_or(1, Vec::len);
    let id: Vec<u32> = (0..size as u32).collect();
    let mut seen = HashSet::from([id.clone()]);
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y: Vec<u32> = x.iter().map(|&i| g[i as usize]).collect();
            if seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    let mut out: Vec<_> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetCheck {
    /// `z (aw) z⁻¹` is transitive on every level up to `n_max`.
    pub minimal: bool,
    /// `(z (aw) z⁻¹)(aw)⁻¹ ∈ G|V_n` for `n = 1..=n_max`.
    pub same_coset: Vec<bool>,
}

impl CosetCheck {
    pub fn holds(&self) -> bool {
        self.minimal && self.same_coset.iter().all(|&x| x)
    }
}

/// Whether conjugating `aw` by `z` stays minimal and inside the coset
/// `aw · G`, level by level up to `n_max ≤ group.level()`.
pub fn conjugation_coset_check(
    group: &LevelGroup,
    z: &TruncatedAutomorphism,
    aw: &TruncatedAutomorphism,
    n_max: usize,
) -> Result<CosetCheck> {
    if n_max > group.level() {
        return Err(Error::DepthExceeded { requested: n_max, depth: group.level() });
    }
    let z = z.truncate(n_max)?;
    let aw = aw.truncate(n_max)?;
    let conj = aw.conjugate_by(&z)?;
    let minimal = is_minimal_up_to(&conj, n_max)?;
    let quotient = conj.compose(&aw.inverse())?;
    let same_coset =
        (1..=n_max).map(|n| group.contains(quotient.level(n)?)).collect::<Result<Vec<_>>>()?;
    Ok(CosetCheck { minimal, same_coset })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases() {
        assert_eq!(NormalizerCase::of(2, 1).unwrap(), NormalizerCase::Dihedral);
        assert_eq!(NormalizerCase::of(3, 1).unwrap(), NormalizerCase::B);
        assert_eq!(NormalizerCase::of(5, 1).unwrap(), NormalizerCase::B);
        assert_eq!(NormalizerCase::of(3, 2).unwrap(), NormalizerCase::C);
        assert_eq!(NormalizerCase::of(4, 2).unwrap(), NormalizerCase::A);
        assert_eq!(NormalizerCase::of(6, 5).unwrap(), NormalizerCase::A);
        assert!(NormalizerCase::of(3, 3).is_err());
        assert!(NormalizerCase::of(1, 0).is_err());
    }

    #[test]
    fn generators_are_involutions() {
        for (r, s) in [(2, 1), (3, 1), (3, 2), (4, 2), (5, 3)] {
            let pres = img_generators(r, s).unwrap();
            for g in pres.truncated_generators(8).unwrap() {
                assert!(g.verify_consistency());
                assert!(g.compose(&g).unwrap().is_identity());
                assert!(!g.is_identity());
            }
        }
    }

    #[test]
    fn dihedral_group_at_level_three() {
        let pres = img_generators(2, 1).unwrap();
        let g = pres.level_group(3).unwrap();
        assert_eq!(g.order(), BigUint::from(16u8));
        let a = Evaluator::new(pres.env()).truncate(&product_generator(&pres), 3).unwrap();
        let frame = BaseOdometerFrame::new(a).unwrap();
        let sigma = frame.realize_level(&AffineElement::new(2, 3, 1, 3).unwrap(), 3).unwrap();
        assert!(!g.contains(&sigma).unwrap());
        let minus = frame.realize_level(&AffineElement::new(2, 3, 1, 7).unwrap(), 3).unwrap();
        assert!(g.contains(&minus).unwrap());
    }

    #[test]
    fn words_need_the_right_case() {
        let b = img_generators(3, 1).unwrap();
        assert!(normalizer_words(&b, &[true, true]).is_err());
        assert!(normalizer_words(&img_generators(2, 1).unwrap(), &[false, true]).is_err());
        let c = img_generators(3, 2).unwrap();
        let word = normalizer_words(&c, &[true, false, true]).unwrap();
        assert_eq!(word.t(), &[true, false, true]);
        assert_eq!(word.coset_representative().to_string(), "u3 * (w0 * w2)");
    }
}
