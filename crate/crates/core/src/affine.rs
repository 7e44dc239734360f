//! The normalizer of an odometer `a` in affine coordinates.
//!
//! Through the frame `φ_n(a^j(0^n)) = j`, every element normalizing `⟨a⟩`
//! acts on level residues as `j ↦ m + k j mod d^n` with `k` a unit; the
//! pair `(m, k)` is the canonical form used here.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{LevelMap, TruncatedAutomorphism, Vertex};

pub fn is_prime(d: u32) -> bool {
    d >= 2 && (2..).take_while(|p| p * p <= d).all(|p| d % p != 0)
}

fn require_prime(d: u32) -> Result<()> {
    if is_prime(d) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("branching factor {d} is not prime")))
    }
}

/// `σ_{m,k}` truncated at depth `N`: residues of `m` and `k` modulo `d^N`.
/// Serializes as a `(d, N, m, k)` record with decimal residues.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AffineRecord", into = "AffineRecord")]
pub struct AffineElement {
    d: u32,
    depth: usize,
    m: BigUint,
    k: BigUint,
}

impl AffineElement {
    pub fn new(d: u32, depth: usize, m: impl Into<BigInt>, k: impl Into<BigInt>) -> Result<Self> {
        require_prime(d)?;
        if depth == 0 {
            return Err(Error::Precondition("depth must be positive".into()));
        }
        let modulus = BigInt::from(d).pow(depth as u32);
        let reduce = |x: BigInt| x.mod_floor(&modulus).to_biguint().expect("nonnegative residue");
        let (m, k) = (reduce(m.into()), reduce(k.into()));
        if (&k % d).is_zero() {
            return Err(Error::Precondition(format!("multiplier {k} is not a unit mod {d}")));
        }
        Ok(AffineElement { d, depth, m, k })
    }

    pub fn identity(d: u32, depth: usize) -> Result<Self> {
        Self::new(d, depth, 0, 1)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn m(&self) -> &BigUint {
        &self.m
    }

    pub fn k(&self) -> &BigUint {
        &self.k
    }

    pub fn modulus(&self) -> BigUint {
        BigUint::from(self.d).pow(self.depth as u32)
    }

    fn check_level(&self, n: usize) -> Result<BigUint> {
        if n > self.depth {
            return Err(Error::DepthExceeded { requested: n, depth: self.depth });
        }
        Ok(BigUint::from(self.d).pow(n as u32))
    }

    /// `m + k j mod d^n`.
    pub fn apply(&self, j: &BigUint, n: usize) -> Result<BigUint> {
        let modulus = self.check_level(n)?;
        Ok((&self.m + &self.k * j) % modulus)
    }

    /// `(m, k)` reduced mod `d^n`, when that fits in a machine word.
    pub fn residues(&self, n: usize) -> Result<(u64, u64)> {
        let modulus = self.check_level(n)?;
        let fit = |x: &BigUint| (x % &modulus).to_u64();
        match (fit(&self.m), fit(&self.k), modulus.to_u64()) {
            (Some(m), Some(k), Some(_)) => Ok((m, k)),
            _ => Err(Error::Budget(format!("d^{n} does not fit in 64 bits"))),
        }
    }

    /// `self ∘ other = (m₁ + k₁ m₂, k₁ k₂)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.d != other.d || self.depth != other.depth {
            return Err(Error::ShapeMismatch(format!(
                "affine elements over ({}, {}) and ({}, {})",
                self.d, self.depth, other.d, other.depth
            )));
        }
        let modulus = self.modulus();
        Ok(AffineElement {
            d: self.d,
            depth: self.depth,
            m: (&self.m + &self.k * &other.m) % &modulus,
            k: (&self.k * &other.k) % &modulus,
        })
    }

    /// `σ^p = (m r(p), k^p)` with `r(p) = 1 + k + … + k^{p-1}`.
    pub fn pow(&self, p: u64) -> Self {
        let modulus = self.modulus();
        let mut result = AffineElement { m: BigUint::zero(), k: BigUint::one(), ..self.clone() };
        let mut base = self.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                result = result.compose(&base).expect("same frame");
            }
            base = base.compose(&base).expect("same frame");
            e >>= 1;
        }
        debug_assert!(result.k < modulus);
        result
    }

    pub fn is_identity(&self) -> bool {
        self.m.is_zero() && self.k.is_one()
    }
}

impl fmt::Display for AffineElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(d={}, N={}, m={}, k={})", self.d, self.depth, self.m, self.k)
    }
}

#[derive(Serialize, Deserialize)]
struct AffineRecord {
    d: u32,
    depth: usize,
    m: String,
    k: String,
}

impl From<AffineElement> for AffineRecord {
    fn from(a: AffineElement) -> Self {
        AffineRecord { d: a.d, depth: a.depth, m: a.m.to_string(), k: a.k.to_string() }
    }
}

impl TryFrom<AffineRecord> for AffineElement {
    type Error = Error;

    fn try_from(r: AffineRecord) -> Result<Self> {
        let parse = |s: &str| {
            s.parse::<BigInt>().map_err(|_| Error::Document(format!("`{s}` is not an integer")))
        };
        AffineElement::new(r.d, r.depth, parse(&r.m)?, parse(&r.k)?)
    }
}

pub fn affine_apply(aff: &AffineElement, j: &BigUint, n: usize) -> Result<BigUint> {
    aff.apply(j, n)
}

pub fn affine_compose(a: &AffineElement, b: &AffineElement) -> Result<AffineElement> {
    a.compose(b)
}

pub fn affine_power(aff: &AffineElement, p: u64) -> AffineElement {
    aff.pow(p)
}

/// Exponent of `d` in a nonzero integer; `None` for zero.
pub fn valuation<T: Integer + Clone>(x: &T, d: &T) -> Option<u32> {
    if x.is_zero() {
        return None;
    }
    let mut x = x.clone();
    let mut e = 0;
    loop {
        let (q, r) = x.div_rem(d);
        if !r.is_zero() {
            return Some(e);
        }
        x = q;
        e += 1;
    }
}

/// `r(n) = 1 + k + … + k^{n-1}`.
pub fn geometric_sum(k: &BigUint, n: u64) -> BigUint {
    if k.is_one() {
        return BigUint::from(n);
    }
    if k.is_zero() {
        return BigUint::from(u64::from(n > 0));
    }
    let exponent = u32::try_from(n).expect("exponent fits in 32 bits");
    (k.pow(exponent) - 1u32) / (k - 1u32)
}

/// `v_d(r(n))` by exact big-integer arithmetic.
pub fn geometric_valuation(k: &BigUint, n: u64, d: u32) -> Result<u32> {
    if n == 0 {
        return Err(Error::Precondition("r(0) = 0 has no finite valuation".into()));
    }
    Ok(valuation(&geometric_sum(k, n), &BigUint::from(d)).expect("r(n) is positive for n >= 1"))
}

/// Whether `k` meets the congruence under which `v_d(r(n)) = v_d(n)`.
pub fn is_admissible_multiplier(k: &BigUint, d: u32) -> bool {
    let one = BigUint::one();
    if d == 2 {
        k > &one && (k % 4u32).is_one()
    } else {
        k > &one && (k % d).is_one()
    }
}

/// Transitivity criterion on affine data: `d ∤ m` and `k ≡ 1` modulo `d`
/// (modulo 4 when `d = 2`).
pub fn is_minimal_affine(m: &BigUint, k: &BigUint, d: u32) -> Result<bool> {
    require_prime(d)?;
    if (k % d).is_zero() {
        return Err(Error::Precondition(format!("multiplier {k} is not a unit mod {d}")));
    }
    if m.is_zero() {
        return Err(Error::Precondition("translation must be at least 1".into()));
    }
    let k_ok = if d == 2 { (k % 4u32).is_one() } else { (k % d).is_one() };
    Ok(!(m % d).is_zero() && k_ok)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CyclePrediction {
    /// A cycle of length `d^exponent` with `exponent >= 1`.
    Cycle { exponent: u32 },
    FixedPoint,
}

impl CyclePrediction {
    pub fn length(&self, d: u32) -> BigUint {
        match self {
            CyclePrediction::Cycle { exponent } => BigUint::from(d).pow(*exponent),
            CyclePrediction::FixedPoint => BigUint::one(),
        }
    }

    pub fn length_u64(&self, d: u32) -> u64 {
        match self {
            CyclePrediction::Cycle { exponent } => u64::from(d).pow(*exponent),
            CyclePrediction::FixedPoint => 1,
        }
    }
}

/// Length of the cycle of residue `v` under `j ↦ m + k j mod d^n`, for an
/// admissible `k = d s + 1` and `m = d^j q` with `j >= 1`, `d ∤ q`, `n > j`.
///
/// With `i = v_d(s v)`: the length is `d^{n-i-1}` if `i < j - 1` and
/// `d^{n-j}` if `i > j - 1`. When `i = j - 1`, put `r = s v / d^{j-1}` and
/// `t = v_d(q + r)`; the length is `d^{n-j-t}` if `t < n - j`, otherwise
/// `v` is fixed.
pub fn predicted_cycle_length(
    m: &BigUint,
    k: &BigUint,
    v: &BigUint,
    n: u32,
    d: u32,
) -> Result<CyclePrediction> {
    predict(m.clone(), k.clone(), v.clone(), n, d)
}

/// Word-sized variant of [`predicted_cycle_length`].
pub fn predicted_cycle_length_u64(m: u64, k: u64, v: u64, n: u32, d: u32) -> Result<CyclePrediction> {
    match CycleLengthPredictor::new(m, k, n, d) {
        Ok(p) => p.predict(v),
        Err(Error::Budget(_)) => predict(u128::from(m), u128::from(k), u128::from(v), n, d),
        Err(e) => Err(e),
    }
}

fn valuation_u64(x: u64, d: u64) -> u32 {
    if d == 2 {
        return x.trailing_zeros();
    }
    let mut x = x;
    let mut e = 0;
    while x % d == 0 {
        x /= d;
        e += 1;
    }
    e
}

/// [`predicted_cycle_length`] for one `(m, k, n, d)` and many residues, with
/// the parameters checked once.
#[derive(Clone, Copy, Debug)]
pub struct CycleLengthPredictor {
    d: u64,
    n: u32,
    j: u32,
    q: u64,
    s: u64,
    size: u64,
}

impl CycleLengthPredictor {
    /// Fails with [`Error::Budget`] when `k d^n` does not fit in 64 bits.
    pub fn new(m: u64, k: u64, n: u32, d: u32) -> Result<Self> {
        require_prime(d)?;
        let dd = u64::from(d);
        let admissible = if d == 2 { k % 4 == 1 } else { k % dd == 1 };
        if k <= 1 || !admissible {
            return Err(Error::Precondition(format!("multiplier {k} is not admissible for d = {d}")));
        }
        if m == 0 || m % dd != 0 {
            return Err(Error::Precondition(format!("{d} does not divide translation {m}")));
        }
        let j = valuation_u64(m, dd);
        if n <= j {
            return Err(Error::Precondition(format!("level {n} must exceed v_d(m) = {j}")));
        }
        let size = dd
            .checked_pow(n)
            .filter(|size| size.checked_mul(k).and_then(|x| x.checked_add(m)).is_some())
            .ok_or_else(|| Error::Budget(format!("{k} * {d}^{n} does not fit in 64 bits")))?;
        Ok(CycleLengthPredictor { d: dd, n, j, q: m / dd.pow(j), s: (k - 1) / dd, size })
    }

    pub fn predict(&self, v: u64) -> Result<CyclePrediction> {
        let (d, n, j) = (self.d, self.n, self.j);
        if v >= self.size {
            return Err(Error::Precondition(format!("residue {v} is outside Z/{d}^{n}")));
        }
        let sv = self.s * v;
        let exponent = if sv == 0 {
            n - j
        } else {
            match valuation_u64(sv, d) {
                i if i < j - 1 => n - i - 1,
                i if i == j - 1 => {
                    let r = sv / d.pow(j - 1);
                    let t = valuation_u64(self.q + r, d);
                    if t >= n - j {
                        return Ok(CyclePrediction::FixedPoint);
                    }
                    n - j - t
                }
                _ => n - j,
            }
        };
        Ok(CyclePrediction::Cycle { exponent })
    }
}

fn predict<T>(m: T, k: T, v: T, n: u32, d: u32) -> Result<CyclePrediction>
where
    T: Integer + Clone + From<u32> + fmt::Display,
{
    require_prime(d)?;
    let dd = T::from(d);
    let one = T::one();
    let admissible = if d == 2 { k.mod_floor(&T::from(4)) == one } else { k.mod_floor(&dd) == one };
    if k <= one || !admissible {
        return Err(Error::Precondition(format!("multiplier {k} is not admissible for d = {d}")));
    }
    let j = match valuation(&m, &dd) {
        Some(j) if j >= 1 => j,
        _ => return Err(Error::Precondition(format!("{d} does not divide translation {m}"))),
    };
    if n <= j {
        return Err(Error::Precondition(format!("level {n} must exceed v_d(m) = {j}")));
    }
    let level_size = num_traits::pow(dd.clone(), n as usize);
    if v >= level_size {
        return Err(Error::Precondition(format!("residue {v} is outside Z/{d}^{n}")));
    }
    let s = (k - one) / dd.clone();
    let sv = s * v;
    let q = m / num_traits::pow(dd.clone(), j as usize);
    let exponent = match valuation(&sv, &dd) {
        Some(i) if i < j - 1 => n - i - 1,
        Some(i) if i == j - 1 => {
            let r = sv / num_traits::pow(dd.clone(), (j - 1) as usize);
            let t = valuation(&(q + r), &dd).expect("q + r is positive");
            if t >= n - j {
                return Ok(CyclePrediction::FixedPoint);
            }
            n - j - t
        }
        _ => n - j,
    };
    Ok(CyclePrediction::Cycle { exponent })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThetaSignature {
    pub theta1: u8,
    pub theta2: u8,
}

/// `θ₁(k) = (k - 1)/2 mod 2` and `θ₂(k) = (k² - 1)/8 mod 2` for odd `k`.
pub fn theta_signature(k: &BigInt) -> Result<ThetaSignature> {
    let r = k.mod_floor(&BigInt::from(16)).to_u32().expect("residue mod 16");
    if r % 2 == 0 {
        return Err(Error::Precondition(format!("multiplier {k} is even")));
    }
    Ok(ThetaSignature { theta1: (((r - 1) / 2) % 2) as u8, theta2: (((r * r - 1) / 8) % 2) as u8 })
}

/// Identification `V_n ≅ Z/d^n` along the orbit of the all-zeros vertex
/// under a minimal element `a`.
#[derive(Clone, Debug)]
pub struct BaseOdometerFrame {
    a: TruncatedAutomorphism,
    d: u32,
    phi: Vec<Vec<u32>>,
    phi_inv: Vec<Vec<u32>>,
}

impl BaseOdometerFrame {
    pub fn new(a: TruncatedAutomorphism) -> Result<Self> {
        let d = a.shape().degree().ok_or_else(|| {
            Error::Precondition("affine frames need a constant branching factor".into())
        })?;
        let d = u32::try_from(d).map_err(|_| Error::Precondition("branching factor too large".into()))?;
        require_prime(d)?;
        let mut phi = Vec::with_capacity(a.depth());
        let mut phi_inv = Vec::with_capacity(a.depth());
        for (i, level) in a.levels().iter().enumerate() {
            let size = level.len();
            let mut forward = vec![u32::MAX; size];
            let mut orbit = Vec::with_capacity(size);
            let mut x = 0usize;
            for j in 0..size {
                if forward[x] != u32::MAX {
                    return Err(Error::NotMinimal { level: i + 1 });
                }
                forward[x] = j as u32;
                orbit.push(x as u32);
                x = level.image(x);
            }
            phi.push(forward);
            phi_inv.push(orbit);
        }
        Ok(BaseOdometerFrame { a, d, phi, phi_inv })
    }

    pub fn a(&self) -> &TruncatedAutomorphism {
        &self.a
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.a.depth()
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.depth() {
            return Err(Error::DepthExceeded { requested: n, depth: self.depth() });
        }
        Ok(())
    }

    /// `φ_n` on vertex indices of level `n`.
    pub fn phi_index(&self, n: usize, idx: usize) -> u32 {
        self.phi[n - 1][idx]
    }

    /// `φ_n⁻¹` as a vertex index of level `n`.
    pub fn phi_inverse_index(&self, n: usize, j: usize) -> u32 {
        self.phi_inv[n - 1][j]
    }

    pub fn phi_level(&self, v: &Vertex) -> Result<u64> {
        let n = v.level();
        if n == 0 {
            return Ok(0);
        }
        self.check_level(n)?;
        Ok(u64::from(self.phi[n - 1][v.index(self.a.shape())?]))
    }

    pub fn phi_inverse(&self, j: u64, n: usize) -> Result<Vertex> {
        if n == 0 {
            return Ok(Vertex::root());
        }
        self.check_level(n)?;
        let size = self.phi_inv[n - 1].len() as u64;
        Vertex::from_index(self.a.shape(), n, self.phi_inv[n - 1][(j % size) as usize] as usize)
    }

    /// Level-`n` permutation `v ↦ φ_n⁻¹(m + k φ_n(v))`.
    pub fn realize_level(&self, aff: &AffineElement, n: usize) -> Result<LevelMap> {
        self.check_level(n)?;
        if aff.d() != self.d {
            return Err(Error::ShapeMismatch(format!("affine d = {} on a {}-ary frame", aff.d(), self.d)));
        }
        let (m, k) = aff.residues(n)?;
        let (phi, inv) = (&self.phi[n - 1], &self.phi_inv[n - 1]);
        let size = phi.len() as u64;
        let table = phi.iter().map(|&j| inv[((m + k * u64::from(j)) % size) as usize]).collect();
        LevelMap::new(n, table)
    }

    /// Affine coefficients `(m, k)` of a level map that acts affinely in this
    /// frame, or `None`.
    pub fn fit(&self, g: &LevelMap) -> Option<(u64, u64)> {
        let n = g.level();
        if n == 0 || n > self.depth() || g.len() != self.phi[n - 1].len() {
            return None;
        }
        let (phi, inv) = (&self.phi[n - 1], &self.phi_inv[n - 1]);
        let size = phi.len() as u64;
        let image = |j: u64| u64::from(phi[g.image(inv[j as usize] as usize)]);
        let m = image(0);
        let k = (image(1 % size) + size - m) % size;
        (0..size).all(|j| image(j) == (m + k * j) % size).then_some((m, k))
    }
}

/// The tree automorphism of `aff` on levels `1..=depth` of the frame.
pub fn realize_affine(
    frame: &BaseOdometerFrame,
    aff: &AffineElement,
    depth: usize,
) -> Result<TruncatedAutomorphism> {
    if depth > frame.depth() {
        return Err(Error::DepthExceeded { requested: depth, depth: frame.depth() });
    }
    let shape = frame.a().shape().with_depth(depth)?;
    let levels = (1..=depth).map(|n| frame.realize_level(aff, n)).collect::<Result<Vec<_>>>()?;
    Ok(TruncatedAutomorphism::from_level_maps(&shape, levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{adding_machine, TreeShape};

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn apply_and_compose() {
        let s = AffineElement::new(2, 4, 2, 5).unwrap();
        assert_eq!(s.apply(&big(3), 4).unwrap(), big(1));
        let sq = s.pow(2);
        assert_eq!(sq, s.compose(&s).unwrap());
        let t = AffineElement::new(2, 4, 1, 5).unwrap().pow(2);
        assert_eq!((t.m(), t.k()), (&big(6), &big(9)));
        let r = AffineElement::new(2, 8, 3, 1).unwrap().pow(4);
        assert_eq!((r.m(), r.k()), (&big(12), &big(1)));
        assert!(AffineElement::new(2, 4, 1, 4).is_err());
        assert!(AffineElement::new(4, 4, 1, 3).is_err());
        assert_eq!(AffineElement::new(2, 4, -1, -1).unwrap().k(), &big(15));
    }

    #[test]
    fn record_roundtrip() {
        let s = AffineElement::new(5, 20, 25, 6).unwrap().pow(1000);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.starts_with(r#"{"d":5,"depth":20,"m":""#));
        assert_eq!(serde_json::from_str::<AffineElement>(&text).unwrap(), s);
        assert!(serde_json::from_str::<AffineElement>(r#"{"d":2,"depth":3,"m":"1","k":"2"}"#).is_err());
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(geometric_valuation(&big(7), 1, 3).unwrap(), 0);
        assert_eq!(geometric_valuation(&big(4), 9, 3).unwrap(), 2);
        assert_eq!(geometric_valuation(&big(5), 4, 2).unwrap(), 2);
        assert_eq!(geometric_sum(&big(5), 4), big(156));
        assert!(geometric_valuation(&big(5), 0, 2).is_err());
    }

    #[test]
    fn minimal_affine_examples() {
        assert!(is_minimal_affine(&big(1), &big(5), 2).unwrap());
        assert!(!is_minimal_affine(&big(1), &big(3), 2).unwrap());
        assert!(is_minimal_affine(&big(1), &big(4), 3).unwrap());
        assert!(!is_minimal_affine(&big(3), &big(4), 3).unwrap());
        assert!(is_minimal_affine(&big(1), &big(3), 3).is_err());
    }

    #[test]
    fn theta_examples() {
        let t = |k: i64| theta_signature(&BigInt::from(k)).unwrap();
        assert_eq!(t(5), ThetaSignature { theta1: 0, theta2: 1 });
        assert_eq!(t(7), ThetaSignature { theta1: 1, theta2: 0 });
        assert_eq!(t(1), ThetaSignature { theta1: 0, theta2: 0 });
        assert_eq!(t(-1), ThetaSignature { theta1: 1, theta2: 0 });
        assert!(theta_signature(&BigInt::from(4)).is_err());
    }

    #[test]
    fn prediction_at_zero_and_errors() {
        // m = 12 = 4 * 3, so j = 2
        assert_eq!(
            predicted_cycle_length_u64(12, 5, 0, 6, 2).unwrap(),
            CyclePrediction::Cycle { exponent: 4 }
        );
        assert!(predicted_cycle_length_u64(3, 5, 0, 6, 2).is_err());
        assert!(predicted_cycle_length_u64(4, 3, 0, 6, 2).is_err());
        assert!(predicted_cycle_length_u64(4, 5, 0, 2, 2).is_err());
        assert!(predicted_cycle_length_u64(4, 5, 64, 6, 2).is_err());
        assert_eq!(
            predicted_cycle_length(&big(12), &big(5), &big(0), 6, 2).unwrap(),
            CyclePrediction::Cycle { exponent: 4 }
        );
    }

    #[test]
    fn predictor_matches_big_integer_path() {
        for (d, k) in [(2u32, 5u64), (2, 13), (3, 7), (5, 11)] {
            for m in (1..=40u64).filter(|m| m % u64::from(d) == 0) {
                let j = valuation(&m, &u64::from(d)).unwrap();
                for n in j + 1..=j + 3 {
                    let p = CycleLengthPredictor::new(m, k, n, d).unwrap();
                    for v in 0..u64::from(d).pow(n) {
                        assert_eq!(
                            p.predict(v).unwrap(),
                            predicted_cycle_length(&big(m), &big(k), &big(v), n, d).unwrap()
                        );
                    }
                }
            }
        }
        assert!(matches!(CycleLengthPredictor::new(4, 5, 70, 2), Err(Error::Budget(_))));
        assert_eq!(
            predicted_cycle_length_u64(4, 5, 3, 70, 2).unwrap(),
            predicted_cycle_length(&big(4), &big(5), &big(3), 70, 2).unwrap()
        );
    }

    #[test]
    fn frame_on_binary_odometer() {
        let a = adding_machine(&TreeShape::binary(6)).unwrap();
        let frame = BaseOdometerFrame::new(a.clone()).unwrap();
        let phi = |s: &str| frame.phi_level(&s.parse().unwrap()).unwrap();
        assert_eq!([phi("00"), phi("10"), phi("01"), phi("11")], [0, 1, 2, 3]);
        assert_eq!(frame.phi_inverse(2, 2).unwrap().to_string(), "01");
        let sigma = AffineElement::new(2, 6, 1, 1).unwrap();
        assert_eq!(realize_affine(&frame, &sigma, 6).unwrap(), a);
        assert_eq!(frame.fit(a.level(5).unwrap()), Some((1, 1)));
        assert!(BaseOdometerFrame::new(a.pow(2)).is_err());
    }

    #[test]
    fn frame_rejects_mixed_radix() {
        let shape = TreeShape::explicit(vec![2, 3, 4], 3).unwrap();
        let a = adding_machine(&shape).unwrap();
        assert!(matches!(BaseOdometerFrame::new(a), Err(Error::Precondition(_))));
    }
}
