//! Cycle structure of truncated automorphisms, stability of cycles up to a
//! depth budget, settledness counts, and the constructions built on them.

use std::fmt;

use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::{LevelMap, TruncatedAutomorphism, Vertex};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cycle {
    pub length: usize,
    /// Orbit order, starting at the least vertex index.
    pub members: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub level: usize,
    pub cycles: Vec<Cycle>,
    /// Position in `cycles` of the cycle through each vertex.
    pub cycle_of: Vec<u32>,
}

impl CycleReport {
    /// Sorted multiset of cycle lengths.
    pub fn lengths(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.cycles.iter().map(|c| c.length).collect();
        out.sort_unstable();
        out
    }
}

fn level_map(u: &TruncatedAutomorphism, n: usize) -> Result<LevelMap> {
    if n == 0 {
        Ok(LevelMap::identity(0, 1))
    } else {
        u.level(n).cloned()
    }
}

pub fn cycle_decomposition(u: &TruncatedAutomorphism, n: usize) -> Result<CycleReport> {
    let map = level_map(u, n)?;
    let mut cycle_of = vec![0u32; map.len()];
    let cycles: Vec<Cycle> = map
        .cycles()
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            for &x in &members {
                cycle_of[x as usize] = id as u32;
            }
            Cycle { length: members.len(), members }
        })
        .collect();
    Ok(CycleReport { level: n, cycles, cycle_of })
}

/// Status of a cycle judged against a finite depth budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "status", content = "level")]
pub enum Stability {
    /// Lifts to a single cycle at every level up to the budget.
    StableUpTo(usize),
    /// First level where the lifts are not a single cycle.
    BrokenAt(usize),
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::StableUpTo(_))
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stability::StableUpTo(n) => write!(f, "stable up to {n}"),
            Stability::BrokenAt(m) => write!(f, "broken at {m}"),
        }
    }
}

/// Cycle length through every vertex, for levels `0..=budget`.
struct LengthTables {
    tables: Vec<Vec<u32>>,
    sizes: Vec<usize>,
}

impl LengthTables {
    fn new(u: &TruncatedAutomorphism, budget: usize) -> Result<Self> {
        if budget > u.depth() {
            return Err(Error::DepthExceeded { requested: budget, depth: u.depth() });
        }
        let tables: Vec<Vec<u32>> =
            (0..=budget).map(|n| Ok(level_map(u, n)?.cycle_lengths())).collect::<Result<_>>()?;
        let sizes = tables.iter().map(Vec::len).collect();
        Ok(LengthTables { tables, sizes })
    }

    fn judge(&self, n: usize, v: usize, budget: usize) -> Stability {
        let k = self.tables[n][v] as usize;
        for m in n + 1..=budget {
            let factor = self.sizes[m] / self.sizes[n];
            if self.tables[m][v * factor] as usize != k * factor {
                return Stability::BrokenAt(m);
            }
        }
        Stability::StableUpTo(budget)
    }
}

fn check_budget(u: &TruncatedAutomorphism, n: usize, budget: usize) -> Result<()> {
    if budget > u.depth() {
        return Err(Error::DepthExceeded { requested: budget, depth: u.depth() });
    }
    if n >= budget {
        return Err(Error::Precondition(format!("level {n} must lie below the budget {budget}")));
    }
    Ok(())
}

/// Stability of the cycle through `v` (a vertex of level `n = v.level()`).
pub fn stable_up_to(u: &TruncatedAutomorphism, v: &Vertex, budget: usize) -> Result<Stability> {
    let n = v.level();
    check_budget(u, n, budget)?;
    let idx = v.index(u.shape())?;
    Ok(LengthTables::new(u, budget)?.judge(n, idx, budget))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleStability {
    pub representative: u32,
    pub length: usize,
    pub status: Stability,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    pub level: usize,
    pub budget: usize,
    /// One entry per cycle, in the order of [`cycle_decomposition`].
    pub cycles: Vec<CycleStability>,
}

pub fn stability_report(u: &TruncatedAutomorphism, n: usize, budget: usize) -> Result<StabilityReport> {
    check_budget(u, n, budget)?;
    let tables = LengthTables::new(u, budget)?;
    let cycles = cycle_decomposition(u, n)?
        .cycles
        .into_iter()
        .map(|c| CycleStability {
            representative: c.members[0],
            length: c.length,
            status: tables.judge(n, c.members[0] as usize, budget),
        })
        .collect();
    Ok(StabilityReport { level: n, budget, cycles })
}

/// Nonnegative rational in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator > 0, "zero denominator");
        let g = numerator.gcd(&denominator);
        Ratio { numerator: numerator / g, denominator: denominator / g }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelFraction {
    pub level: usize,
    pub stable: u64,
    pub total: u64,
    pub fraction: Ratio,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SettledStats {
    pub budget: usize,
    /// Levels `1..=n0`.
    pub levels: Vec<LevelFraction>,
}

impl SettledStats {
    pub fn fraction(&self, n: usize) -> Option<Ratio> {
        self.levels.iter().find(|l| l.level == n).map(|l| l.fraction)
    }
}

/// Fraction of each level lying in cycles that are stable up to `budget`.
pub fn settled_stats(u: &TruncatedAutomorphism, n0: usize, budget: usize) -> Result<SettledStats> {
    check_budget(u, n0, budget)?;
    let tables = LengthTables::new(u, budget)?;
    let levels = (1..=n0)
        .map(|n| {
            let stable = cycle_decomposition(u, n)?
                .cycles
                .iter()
                .filter(|c| tables.judge(n, c.members[0] as usize, budget).is_stable())
                .map(|c| c.length as u64)
                .sum();
            let total = tables.sizes[n] as u64;
            Ok(LevelFraction { level: n, stable, total, fraction: Ratio::new(stable, total) })
        })
        .collect::<Result<_>>()?;
    Ok(SettledStats { budget, levels })
}

/// Transitivity on every level up to `depth`.
pub fn is_minimal_up_to(u: &TruncatedAutomorphism, depth: usize) -> Result<bool> {
    if depth > u.depth() {
        return Err(Error::DepthExceeded { requested: depth, depth: u.depth() });
    }
    Ok(u.levels()[..depth].iter().all(LevelMap::is_transitive))
}

/// Keeps `τ` on the first `n` levels and below them splices every cycle into
/// a single transitive cycle, level by level, down to `budget`.
pub fn strongly_settle(tau: &TruncatedAutomorphism, n: usize, budget: usize) -> Result<TruncatedAutomorphism> {
    check_budget(tau, n, budget)?;
    let shape = tau.shape().with_depth(budget)?;
    let mut levels: Vec<LevelMap> = tau.levels()[..n].to_vec();
    let mut prev = level_map(tau, n)?;
    for m in n + 1..=budget {
        shape.checked_level_size(m)?;
        prev = prev.splice_lift(shape.branching(m));
        levels.push(prev.clone());
    }
    Ok(TruncatedAutomorphism::from_level_maps(&shape, levels))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PowerSettledReport {
    pub exponent: i64,
    pub base: SettledStats,
    pub power: SettledStats,
}

/// Settled fractions of `u` and of `u^k`, side by side.
pub fn power_settled_consistency(
    u: &TruncatedAutomorphism,
    k: i64,
    n0: usize,
    budget: usize,
) -> Result<PowerSettledReport> {
    if k == 0 {
        return Err(Error::Precondition("exponent must be nonzero".into()));
    }
    Ok(PowerSettledReport {
        exponent: k,
        base: settled_stats(u, n0, budget)?,
        power: settled_stats(&u.pow(k), n0, budget)?,
    })
}

/// `g` with `g u g⁻¹ = w` on levels `1..=depth`, matching the `u`-orbit of
/// the all-zeros vertex with the `w`-orbit in orbit order.
pub fn level_conjugator(
    u: &TruncatedAutomorphism,
    w: &TruncatedAutomorphism,
    depth: usize,
) -> Result<TruncatedAutomorphism> {
    for x in [u, w] {
        if depth > x.depth() {
            return Err(Error::DepthExceeded { requested: depth, depth: x.depth() });
        }
        if let Some(level) = (1..=depth).find(|&n| !x.levels()[n - 1].is_transitive()) {
            return Err(Error::NotMinimal { level });
        }
    }
    let shape = u.shape().with_depth(depth)?;
    let levels = (1..=depth)
        .map(|n| {
            let (un, wn) = (&u.levels()[n - 1], &w.levels()[n - 1]);
            let mut table = vec![0u32; un.len()];
            let (mut x, mut y) = (0usize, 0usize);
            for _ in 0..un.len() {
                table[x] = y as u32;
                x = un.image(x);
                y = wn.image(y);
            }
            LevelMap::new(n, table)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TruncatedAutomorphism::from_level_maps(&shape, levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursion::{profile_element, truncate, ElementExpr, GrowthProfile, RecursionEnv};
    use crate::tree::{adding_machine, TreeShape};

    fn odometer(depth: usize) -> TruncatedAutomorphism {
        adding_machine(&TreeShape::binary(depth)).unwrap()
    }

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
    fn decompositions() {
        let id = TruncatedAutomorphism::identity(&TreeShape::binary(3)).unwrap();
        assert_eq!(cycle_decomposition(&id, 3).unwrap().lengths(), vec![1; 8]);
        let a = odometer(3);
        let report = cycle_decomposition(&a, 3).unwrap();
        assert_eq!(report.lengths(), vec![8]);
        assert!(report.cycle_of.iter().all(|&c| c == 0));
    }

    #[test]
    fn stability_examples() {
        let a = odometer(8);
        for v in ["0", "1", "011", "1101"] {
            assert_eq!(stable_up_to(&a, &v.parse().unwrap(), 8).unwrap(), Stability::StableUpTo(8));
        }
        assert_eq!(stable_up_to(&eta(2), &"0".parse().unwrap(), 2).unwrap(), Stability::BrokenAt(2));
        let id = TruncatedAutomorphism::identity(&TreeShape::binary(5)).unwrap();
        assert_eq!(stable_up_to(&id, &"01".parse().unwrap(), 3).unwrap(), Stability::BrokenAt(3));
        assert!(stable_up_to(&id, &"01".parse().unwrap(), 2).is_err());
        assert!(stable_up_to(&id, &"01".parse().unwrap(), 6).is_err());
    }

    #[test]
    fn settled_fractions_of_fixtures() {
        let env = RecursionEnv::standard_binary(12);
        let b = truncate(&ElementExpr::reference("b"), &env, 12).unwrap();
        let stats = settled_stats(&b, 8, 12).unwrap();
        for n in 1..=8u32 {
            let total = 1u64 << n;
            assert_eq!(stats.fraction(n as usize).unwrap(), Ratio::new(total - 1, total));
        }
        let a = odometer(12);
        assert!(settled_stats(&a, 11, 12).unwrap().levels.iter().all(|l| l.stable == l.total));
        let h = profile_element(&GrowthProfile::alternating(12), 12).unwrap();
        assert!(settled_stats(&h, 11, 12).unwrap().levels.iter().all(|l| l.stable == 0));
    }

    #[test]
    fn minimality() {
        assert!(is_minimal_up_to(&odometer(10), 10).unwrap());
        assert!(!is_minimal_up_to(&eta(2), 2).unwrap());
        assert!(!is_minimal_up_to(&odometer(4).pow(2), 1).unwrap());
        assert!(is_minimal_up_to(&odometer(4).pow(3), 4).unwrap());
    }

    #[test]
    fn strongly_settle_identity() {
        let id = TruncatedAutomorphism::identity(&TreeShape::binary(6)).unwrap();
        let s = strongly_settle(&id, 1, 6).unwrap();
        assert!(s.verify_consistency());
        assert!(s.level(1).unwrap().is_identity());
        for m in 2..=6 {
            assert_eq!(s.level(m).unwrap().cycle_type(), vec![1 << (m - 1); 2]);
        }
        let a = odometer(6);
        let s = strongly_settle(&a, 3, 6).unwrap();
        assert!(is_minimal_up_to(&s, 6).unwrap());
        assert!(s.distance(&a).unwrap().at_most(3));
    }

    #[test]
    fn powers_of_the_odometer() {
        let a = odometer(10);
        let report = power_settled_consistency(&a, 2, 9, 10).unwrap();
        for n in 1..=9 {
            let cycles = cycle_decomposition(&a.pow(2), n).unwrap();
            assert_eq!(cycles.cycles.len(), 2);
            assert_eq!(report.power.levels[n - 1].stable, report.power.levels[n - 1].total);
        }
        assert!(is_minimal_up_to(&a.pow(3), 10).unwrap());
        let id = TruncatedAutomorphism::identity(&TreeShape::binary(6)).unwrap();
        let r = power_settled_consistency(&id, 5, 5, 6).unwrap();
        assert!(r.power.levels.iter().all(|l| l.stable == 0));
        assert!(power_settled_consistency(&id, 0, 5, 6).is_err());
    }

    #[test]
    fn conjugator_between_odometer_powers() {
        let a = odometer(6);
        let a3 = a.pow(3);
        let g = level_conjugator(&a, &a3, 6).unwrap();
        assert!(g.verify_consistency());
        assert_eq!(a.conjugate_by(&g).unwrap(), a3);
        assert!(level_conjugator(&a, &a, 6).unwrap().is_identity());
        assert_eq!(level_conjugator(&a, &a.pow(2), 6).unwrap_err(), Error::NotMinimal { level: 1 });
    }
}
