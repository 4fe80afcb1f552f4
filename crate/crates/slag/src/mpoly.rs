//! Exact truncated power-series arithmetic in three variables.
//!
//! A [`TruncatedSeries`] is a sparse polynomial in `(x1, x2, x3)` with
//! `BigRational` coefficients and a total-degree cap: terms above the cap are
//! unknown and silently discarded by arithmetic, so a series stands for an
//! analytic germ known exactly up to its cap. All identity checks downstream
//! (harmonicity, sigma2 residuals, coefficient recursions) run on this exact
//! layer with tolerance zero; sampling and sweeps use the compiled
//! [`FloatPoly`] evaluation layer instead.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlagError};

pub type Rat = BigRational;

/// Shorthand rational from a signed numerator/denominator pair.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X1,
    X2,
    X3,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X1, Axis::X2, Axis::X3];

    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
            Axis::X3 => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        match i {
            0 => Some(Axis::X1),
            1 => Some(Axis::X2),
            2 => Some(Axis::X3),
            _ => None,
        }
    }
}

/// Packed exponent triple `(i, j, k)` for `x1^i x2^j x3^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl MultiIndex {
    pub fn new(i: u32, j: u32, k: u32) -> Self {
        MultiIndex { i, j, k }
    }

    pub fn total(self) -> u32 {
        self.i + self.j + self.k
    }

    fn exp(self, axis: Axis) -> u32 {
        match axis {
            Axis::X1 => self.i,
            Axis::X2 => self.j,
            Axis::X3 => self.k,
        }
    }

    fn with_exp(self, axis: Axis, e: u32) -> Self {
        let mut out = self;
        match axis {
            Axis::X1 => out.i = e,
            Axis::X2 => out.j = e,
            Axis::X3 => out.k = e,
        }
        out
    }
}

/// Result of a lowest-order query: either the smallest total degree carrying
/// a coefficient above tolerance, or "above cap" when none does.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowOrder {
    Degree(u32),
    AboveCap,
}

impl LowOrder {
    /// True when the low order is >= `k` (an `[r^k]` witness).
    pub fn at_least(self, k: u32) -> bool {
        match self {
            LowOrder::Degree(d) => d >= k,
            LowOrder::AboveCap => true,
        }
    }
}

impl fmt::Display for LowOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LowOrder::Degree(d) => write!(f, "{d}"),
            LowOrder::AboveCap => write!(f, "above cap"),
        }
    }
}

/// Sparse exact power series in `(x1, x2, x3)` truncated at a total degree.
///
/// Invariants: no stored index exceeds the cap, no stored coefficient is zero,
/// arithmetic results carry the minimum of the operand caps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    cap: u32,
    terms: BTreeMap<MultiIndex, Rat>,
}

impl TruncatedSeries {
    pub fn zero(cap: u32) -> Self {
        TruncatedSeries {
            cap,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Rat, cap: u32) -> Self {
        let mut s = Self::zero(cap);
        s.insert(MultiIndex::new(0, 0, 0), c);
        s
    }

    pub fn variable(axis: Axis, cap: u32) -> Self {
        let mut s = Self::zero(cap);
        let idx = MultiIndex::new(0, 0, 0).with_exp(axis, 1);
        s.insert(idx, Rat::one());
        s
    }

    pub fn monomial(idx: MultiIndex, c: Rat, cap: u32) -> Self {
        let mut s = Self::zero(cap);
        s.insert(idx, c);
        s
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, idx: MultiIndex) -> Rat {
        self.terms.get(&idx).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, &Rat)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    fn insert(&mut self, idx: MultiIndex, c: Rat) {
        if idx.total() <= self.cap && !c.is_zero() {
            self.terms.insert(idx, c);
        }
    }

    fn add_to(&mut self, idx: MultiIndex, c: &Rat) {
        if idx.total() > self.cap || c.is_zero() {
            return;
        }
        let entry = self.terms.entry(idx).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&idx);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let cap = self.cap.min(other.cap);
        let mut out = self.truncated(cap);
        for (idx, c) in other.terms.iter() {
            out.add_to(*idx, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn scale(&self, factor: &Rat) -> Self {
        if factor.is_zero() {
            return Self::zero(self.cap);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= factor;
        }
        out
    }

    pub fn add_scalar(&self, c: &Rat) -> Self {
        let mut out = self.clone();
        out.add_to(MultiIndex::new(0, 0, 0), c);
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let cap = self.cap.min(other.cap);
        let mut out = Self::zero(cap);
        for (ia, ca) in self.terms.iter() {
            if ia.total() > cap {
                continue;
            }
            for (ib, cb) in other.terms.iter() {
                let total = ia.total() + ib.total();
                if total > cap {
                    continue;
                }
                let idx = MultiIndex::new(ia.i + ib.i, ia.j + ib.j, ia.k + ib.k);
                out.add_to(idx, &(ca * cb));
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(Rat::one(), self.cap);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Exact partial derivative; the cap drops by one since the derivative of
    /// an unknown degree-(cap+1) term would land at degree cap.
    pub fn diff(&self, axis: Axis) -> Self {
        let mut out = Self::zero(self.cap.saturating_sub(1));
        for (idx, c) in self.terms.iter() {
            let e = idx.exp(axis);
            if e == 0 {
                continue;
            }
            let new_idx = idx.with_exp(axis, e - 1);
            out.add_to(new_idx, &(c * Rat::from(BigInt::from(e))));
        }
        out
    }

    /// Smallest total degree with |coefficient| > tol, or above cap.
    pub fn low_order(&self, tol: &Rat) -> LowOrder {
        let mut best: Option<u32> = None;
        for (idx, c) in self.terms.iter() {
            if c.abs() > *tol {
                let d = idx.total();
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best.map_or(LowOrder::AboveCap, LowOrder::Degree)
    }

    /// Largest total degree carrying a nonzero coefficient.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|idx| idx.total()).max()
    }

    /// Copy with a (smaller or larger) cap; terms above the new cap are dropped.
    pub fn truncated(&self, cap: u32) -> Self {
        let mut out = Self::zero(cap);
        for (idx, c) in self.terms.iter() {
            if idx.total() <= cap {
                out.terms.insert(*idx, c.clone());
            }
        }
        out
    }

    /// True when no term involves `x3`.
    pub fn is_x12_only(&self) -> bool {
        self.terms.keys().all(|idx| idx.k == 0)
    }

    /// Coefficient of `x3^k` as a series in `(x1, x2)` with cap reduced by `k`.
    pub fn x3_slice(&self, k: u32) -> Self {
        let mut out = Self::zero(self.cap.saturating_sub(k));
        for (idx, c) in self.terms.iter() {
            if idx.k == k {
                out.insert(MultiIndex::new(idx.i, idx.j, 0), c.clone());
            }
        }
        out
    }

    /// Largest `x3` exponent present.
    pub fn max_x3_degree(&self) -> u32 {
        self.terms.keys().map(|idx| idx.k).max().unwrap_or(0)
    }

    /// Multiply by `x3^k`, re-capping to `new_cap`.
    pub fn shift_x3(&self, k: u32, new_cap: u32) -> Self {
        let mut out = Self::zero(new_cap);
        for (idx, c) in self.terms.iter() {
            out.add_to(MultiIndex::new(idx.i, idx.j, idx.k + k), c);
        }
        out
    }

    /// Exact substitution `x -> r x`, i.e. coefficient at degree d scales by r^d.
    pub fn scale_argument(&self, r: &Rat) -> Self {
        let mut out = Self::zero(self.cap);
        for (idx, c) in self.terms.iter() {
            let mut f = Rat::one();
            for _ in 0..idx.total() {
                f *= r;
            }
            out.insert(*idx, c * f);
        }
        out
    }

    pub fn eval_rat(&self, p: &[Rat; 3]) -> Rat {
        let mut acc = Rat::zero();
        for (idx, c) in self.terms.iter() {
            let mut term = c.clone();
            for (axis, e) in [(0usize, idx.i), (1, idx.j), (2, idx.k)] {
                for _ in 0..e {
                    term *= &p[axis];
                }
            }
            acc += term;
        }
        acc
    }

    /// Compile to the float evaluation layer.
    pub fn to_float(&self) -> FloatPoly {
        let terms = self
            .terms
            .iter()
            .map(|(idx, c)| (idx.i, idx.j, idx.k, rat_to_f64(c)))
            .collect();
        FloatPoly {
            cap: self.cap,
            terms,
        }
    }

    fn homogeneous_parts(&self, cap: u32) -> Vec<Vec<(MultiIndex, Rat)>> {
        let mut parts: Vec<Vec<(MultiIndex, Rat)>> = vec![Vec::new(); cap as usize + 1];
        for (idx, c) in self.terms.iter() {
            let d = idx.total();
            if d <= cap {
                parts[d as usize].push((*idx, c.clone()));
            }
        }
        parts
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Denormal-range fallback: split into mantissa-sized chunks.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Quotient of truncated series when the divisor has a nonzero constant term.
/// Solved order by order over homogeneous degrees; result cap is the minimum
/// of the operand caps.
pub fn div_unit(num: &TruncatedSeries, den: &TruncatedSeries) -> Result<TruncatedSeries> {
    let cap = num.cap().min(den.cap());
    let d0 = den.coeff(MultiIndex::new(0, 0, 0));
    if d0.is_zero() {
        return Err(SlagError::DegenerateCauchyData(
            "series division by a non-unit (zero constant term)".into(),
        ));
    }
    let den_parts = den.homogeneous_parts(cap);
    let num_parts = num.homogeneous_parts(cap);
    let mut quot = TruncatedSeries::zero(cap);
    let mut quot_parts: Vec<Vec<(MultiIndex, Rat)>> = vec![Vec::new(); cap as usize + 1];
    for d in 0..=cap as usize {
        // residual_d = num_d - sum_{e>=1} den_e * quot_{d-e}
        let mut residual: BTreeMap<MultiIndex, Rat> = BTreeMap::new();
        for (idx, c) in &num_parts[d] {
            residual.insert(*idx, c.clone());
        }
        for e in 1..=d {
            for (di, dc) in &den_parts[e] {
                for (qi, qc) in &quot_parts[d - e] {
                    let idx = MultiIndex::new(di.i + qi.i, di.j + qi.j, di.k + qi.k);
                    let entry = residual.entry(idx).or_insert_with(Rat::zero);
                    *entry -= dc * qc;
                    if entry.is_zero() {
                        residual.remove(&idx);
                    }
                }
            }
        }
        for (idx, c) in residual {
            let q = c / d0.clone();
            quot_parts[d].push((idx, q.clone()));
            quot.insert(idx, q);
        }
    }
    Ok(quot)
}

/// The constant-coefficient operator `d11 + d22 + 2 d33`, the linearization of
/// sigma2 at diag(1,1,0).
pub fn laplace_tilde(s: &TruncatedSeries) -> TruncatedSeries {
    let d11 = s.diff(Axis::X1).diff(Axis::X1);
    let d22 = s.diff(Axis::X2).diff(Axis::X2);
    let d33 = s.diff(Axis::X3).diff(Axis::X3);
    d11.add(&d22).add(&d33.scale(&rat(2, 1)))
}

/// Plain Laplacian `d11 + d22 + d33`.
pub fn laplace(s: &TruncatedSeries) -> TruncatedSeries {
    let d11 = s.diff(Axis::X1).diff(Axis::X1);
    let d22 = s.diff(Axis::X2).diff(Axis::X2);
    let d33 = s.diff(Axis::X3).diff(Axis::X3);
    d11.add(&d22).add(&d33)
}

/// `sigma2(D^2 s)` as an exact series: the sum of the three principal 2x2
/// minors of the Hessian.
pub fn sigma2_hessian(s: &TruncatedSeries) -> TruncatedSeries {
    let u11 = s.diff(Axis::X1).diff(Axis::X1);
    let u22 = s.diff(Axis::X2).diff(Axis::X2);
    let u33 = s.diff(Axis::X3).diff(Axis::X3);
    let u12 = s.diff(Axis::X1).diff(Axis::X2);
    let u13 = s.diff(Axis::X1).diff(Axis::X3);
    let u23 = s.diff(Axis::X2).diff(Axis::X3);
    let minors = u11
        .mul(&u22)
        .add(&u11.mul(&u33))
        .add(&u22.mul(&u33));
    minors
        .sub(&u12.mul(&u12))
        .sub(&u13.mul(&u13))
        .sub(&u23.mul(&u23))
}

/// A point of the sampling layer with the radius/cylindrical accessors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Point3 {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Point3 { x1, x2, x3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn radius(self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3).sqrt()
    }

    pub fn rho(self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2).sqrt()
    }
}

/// Compiled float view of a [`TruncatedSeries`] for fast sampling.
#[derive(Clone, Debug)]
pub struct FloatPoly {
    cap: u32,
    terms: Vec<(u32, u32, u32, f64)>,
}

impl FloatPoly {
    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        let n = self.cap as usize + 1;
        let mut p1 = vec![1.0; n];
        let mut p2 = vec![1.0; n];
        let mut p3 = vec![1.0; n];
        for d in 1..n {
            p1[d] = p1[d - 1] * x[0];
            p2[d] = p2[d - 1] * x[1];
            p3[d] = p3[d - 1] * x[2];
        }
        let mut acc = 0.0;
        let mut comp = 0.0;
        for &(i, j, k, c) in &self.terms {
            let term = c * p1[i as usize] * p2[j as usize] * p3[k as usize];
            // Kahan compensation keeps repeated sweeps reproducible and tight.
            let y = term - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
        }
        acc
    }
}

// --- serialization -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SeriesRepr {
    cap: u32,
    terms: Vec<(u32, u32, u32, String)>,
}

pub fn format_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rat(s: &str) -> Result<Rat> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let numer = BigInt::from_str(n.trim())
        .map_err(|e| SlagError::Parameter(format!("bad rational `{s}`: {e}")))?;
    let denom = BigInt::from_str(d.trim())
        .map_err(|e| SlagError::Parameter(format!("bad rational `{s}`: {e}")))?;
    if denom.is_zero() {
        return Err(SlagError::Parameter(format!("bad rational `{s}`: zero denominator")));
    }
    Ok(Rat::new(numer, denom))
}

impl Serialize for TruncatedSeries {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = SeriesRepr {
            cap: self.cap,
            terms: self
                .terms
                .iter()
                .map(|(idx, c)| (idx.i, idx.j, idx.k, format_rat(c)))
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TruncatedSeries {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SeriesRepr::deserialize(deserializer)?;
        let mut s = TruncatedSeries::zero(repr.cap);
        for (i, j, k, c) in repr.terms {
            let c = parse_rat(&c).map_err(serde::de::Error::custom)?;
            s.insert(MultiIndex::new(i, j, k), c);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(axis: Axis, cap: u32) -> TruncatedSeries {
        TruncatedSeries::variable(axis, cap)
    }

    fn rho2(cap: u32) -> TruncatedSeries {
        let x1 = x(Axis::X1, cap);
        let x2 = x(Axis::X2, cap);
        x1.mul(&x1).add(&x2.mul(&x2))
    }

    #[test]
    fn monomial_product() {
        let x1 = x(Axis::X1, 6);
        let sq = x1.mul(&x1);
        assert_eq!(sq.coeff(MultiIndex::new(2, 0, 0)), Rat::one());
        assert_eq!(sq.num_terms(), 1);
    }

    #[test]
    fn additive_inverse() {
        let a = rho2(5).add(&x(Axis::X3, 5)).scale(&rat(7, 3));
        assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn truncation_drops_everything_above_cap() {
        let r2 = rho2(3);
        let prod = r2.mul(&r2);
        assert!(prod.is_zero());
        assert_eq!(prod.cap(), 3);
    }

    #[test]
    fn diff_of_x3_squared() {
        let x3 = x(Axis::X3, 4);
        let d = x3.mul(&x3).diff(Axis::X3);
        assert_eq!(d.coeff(MultiIndex::new(0, 0, 1)), rat(2, 1));
        assert_eq!(d.num_terms(), 1);
        assert_eq!(d.cap(), 3);
    }

    #[test]
    fn tilde_laplacian_of_q_m2() {
        // Q = rho^2 x3^2 for m = 2; tilde-Laplacian gives 4 x3^2 + 4 rho^2.
        let cap = 6;
        let q = rho2(cap).mul(&x(Axis::X3, cap)).mul(&x(Axis::X3, cap));
        let lap = laplace_tilde(&q);
        let expected = x(Axis::X3, cap - 2)
            .mul(&x(Axis::X3, cap - 2))
            .scale(&rat(4, 1))
            .add(&rho2(cap - 2).scale(&rat(4, 1)));
        assert_eq!(lap, expected);
    }

    #[test]
    fn diff_of_re_z2_x3() {
        // d1 of (x1^2 - x2^2) x3 is 2 x1 x3.
        let cap = 5;
        let x1 = x(Axis::X1, cap);
        let x2 = x(Axis::X2, cap);
        let x3 = x(Axis::X3, cap);
        let h = x1.mul(&x1).sub(&x2.mul(&x2)).mul(&x3);
        let d = h.diff(Axis::X1);
        assert_eq!(d.coeff(MultiIndex::new(1, 0, 1)), rat(2, 1));
        assert_eq!(d.num_terms(), 1);
    }

    #[test]
    fn eval_background_quadratic() {
        let s = rho2(4).scale(&rat(1, 2));
        let p = [rat(1, 1), rat(1, 1), rat(0, 1)];
        assert_eq!(s.eval_rat(&p), rat(1, 1));
        let f = s.to_float();
        assert_eq!(f.eval(&[1.0, 1.0, 0.0]), 1.0);
    }

    #[test]
    fn gradient_of_re_z2_x3_vanishes_on_axis() {
        let cap = 5;
        let x1 = x(Axis::X1, cap);
        let x2 = x(Axis::X2, cap);
        let x3 = x(Axis::X3, cap);
        let h = x1.mul(&x1).sub(&x2.mul(&x2)).mul(&x3);
        for t in [rat(1, 4), rat(-3, 7), rat(0, 1)] {
            let p = [rat(0, 1), rat(0, 1), t];
            for axis in Axis::ALL {
                assert!(h.diff(axis).eval_rat(&p).is_zero());
            }
        }
    }

    #[test]
    fn low_order_basic() {
        let cap = 6;
        let s = TruncatedSeries::monomial(MultiIndex::new(2, 0, 1), Rat::one(), cap)
            .add(&TruncatedSeries::monomial(MultiIndex::new(0, 0, 5), Rat::one(), cap));
        assert_eq!(s.low_order(&Rat::zero()), LowOrder::Degree(3));
        assert_eq!(TruncatedSeries::zero(4).low_order(&Rat::zero()), LowOrder::AboveCap);
    }

    #[test]
    fn division_by_unit_roundtrips() {
        let cap = 6;
        let den = TruncatedSeries::constant(rat(2, 1), cap)
            .add(&rho2(cap))
            .add(&x(Axis::X3, cap).scale(&rat(-1, 3)));
        let quot = rho2(cap).add(&TruncatedSeries::constant(rat(5, 7), cap));
        let num = den.mul(&quot);
        let back = div_unit(&num, &den).unwrap();
        assert_eq!(back, quot);
    }

    #[test]
    fn division_by_non_unit_fails() {
        let num = rho2(4);
        let den = x(Axis::X1, 4);
        assert!(div_unit(&num, &den).is_err());
    }

    #[test]
    fn point_accessors_satisfy_radius_identity() {
        let p = Point3::new(0.3, -0.4, 0.5);
        let lhs = p.radius() * p.radius();
        let rhs = p.rho() * p.rho() + p.x3 * p.x3;
        assert!((lhs - rhs).abs() < 1e-15);
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let s = rho2(5)
            .scale(&rat(-7, 12))
            .add(&x(Axis::X3, 5).scale(&rat(355, 113)));
        let json = serde_json::to_string(&s).unwrap();
        let back: TruncatedSeries = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        // Canonical term ordering is lexicographic in (i, j, k).
        assert!(json.contains("\"cap\":5"));
    }

    fn small_series() -> impl Strategy<Value = TruncatedSeries> {
        let term = (0u32..3, 0u32..3, 0u32..3, -6i64..7, 1i64..5);
        proptest::collection::vec(term, 0..6).prop_map(|terms| {
            let mut s = TruncatedSeries::zero(4);
            for (i, j, k, n, d) in terms {
                s.add_to(MultiIndex::new(i, j, k), &rat(n, d));
            }
            s
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(a in small_series(), b in small_series(), c in small_series()) {
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.add(&b), b.add(&a));
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        }

        #[test]
        fn derivatives_commute(a in small_series()) {
            for ax in Axis::ALL {
                for ay in Axis::ALL {
                    prop_assert_eq!(a.diff(ax).diff(ay), a.diff(ay).diff(ax));
                }
            }
        }

        #[test]
        fn eval_diff_matches_finite_differences(
            a in small_series(),
            px in -50i64..51, py in -50i64..51, pz in -50i64..51,
        ) {
            let p = [px as f64 / 100.0, py as f64 / 100.0, pz as f64 / 100.0];
            let h = 1e-4;
            let f = a.to_float();
            for axis in Axis::ALL {
                let d = a.diff(axis).to_float();
                let mut hi = p;
                let mut lo = p;
                hi[axis.index()] += h;
                lo[axis.index()] -= h;
                let fd = (f.eval(&hi) - f.eval(&lo)) / (2.0 * h);
                prop_assert!((fd - d.eval(&p)).abs() < 1e-5);
            }
        }
    }
}
