//! Order-by-order solution of `sigma2(D^2 u) = 1` from Cauchy data on the
//! plane `x3 = 0`.
//!
//! The equation is put in the normal form
//! `(u11 + u22) u33 = 1 - u11 u22 + u12^2 + u13^2 + u23^2`
//! and solved for the `x3^k`-slice coefficients `c_{k+2}` one order at a
//! time, dividing by the unit series `u11 + u22` (constant term 2 for the
//! seed data). Slices are truncated so the result carries exactly the same
//! total-degree semantics as the series layer: the residual of the returned
//! series vanishes identically up to the truncation order `cap - 2`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlagError};
use crate::mpoly::{div_unit, rat, sigma2_hessian, Axis, LowOrder, MultiIndex, Rat, TruncatedSeries};

/// Cauchy data on `x3 = 0`: `c0 = u(., ., 0)` and `c1 = u3(., ., 0)`, both
/// series in `(x1, x2)` only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CauchyData {
    pub c0: TruncatedSeries,
    pub c1: TruncatedSeries,
}

impl CauchyData {
    pub fn new(c0: TruncatedSeries, c1: TruncatedSeries) -> Result<Self> {
        if !c0.is_x12_only() || !c1.is_x12_only() {
            return Err(SlagError::Parameter(
                "Cauchy data must not depend on x3".into(),
            ));
        }
        Ok(CauchyData { c0, c1 })
    }

    /// Restrict a potential to the plane: `c0 = p|_{x3=0}`, `c1 = p_3|_{x3=0}`.
    pub fn from_potential(p: &TruncatedSeries) -> Self {
        CauchyData {
            c0: p.x3_slice(0),
            c1: p.diff(Axis::X3).x3_slice(0),
        }
    }
}

fn lap_prime(s: &TruncatedSeries) -> TruncatedSeries {
    s.diff(Axis::X1).diff(Axis::X1).add(&s.diff(Axis::X2).diff(Axis::X2))
}

fn int_rat(n: u32) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Solve the Cauchy problem up to total degree `cap`. The recursion requires
/// the normal-form condition `(u11 + u22)(0) != 0` computed from `c0`.
pub fn ck_solve(data: &CauchyData, cap: u32) -> Result<TruncatedSeries> {
    if cap < 2 {
        return Err(SlagError::Parameter(format!("cap must be >= 2, got {cap}")));
    }
    // Slice k lives at x'-cap `cap - k`.
    let mut c: Vec<TruncatedSeries> = Vec::with_capacity(cap as usize + 1);
    c.push(data.c0.truncated(cap));
    c.push(data.c1.truncated(cap - 1));

    let trace0 = lap_prime(&c[0]);
    if trace0.coeff(MultiIndex::new(0, 0, 0)).is_zero() {
        return Err(SlagError::DegenerateCauchyData(
            "u11(0) + u22(0) vanishes; the equation cannot be solved for u33".into(),
        ));
    }

    // Second x'-derivatives of the known slices, extended as we go.
    let mut d11: Vec<TruncatedSeries> = Vec::new();
    let mut d22: Vec<TruncatedSeries> = Vec::new();
    let mut d12: Vec<TruncatedSeries> = Vec::new();
    let mut d1: Vec<TruncatedSeries> = Vec::new();
    let mut d2: Vec<TruncatedSeries> = Vec::new();
    let mut lapp: Vec<TruncatedSeries> = Vec::new();
    let push_derivs = |slice: &TruncatedSeries,
                       d11: &mut Vec<TruncatedSeries>,
                       d22: &mut Vec<TruncatedSeries>,
                       d12: &mut Vec<TruncatedSeries>,
                       d1: &mut Vec<TruncatedSeries>,
                       d2: &mut Vec<TruncatedSeries>,
                       lapp: &mut Vec<TruncatedSeries>| {
        d11.push(slice.diff(Axis::X1).diff(Axis::X1));
        d22.push(slice.diff(Axis::X2).diff(Axis::X2));
        d12.push(slice.diff(Axis::X1).diff(Axis::X2));
        d1.push(slice.diff(Axis::X1));
        d2.push(slice.diff(Axis::X2));
        lapp.push(lap_prime(slice));
    };
    for slice in &c {
        push_derivs(slice, &mut d11, &mut d22, &mut d12, &mut d1, &mut d2, &mut lapp);
    }

    for k in 0..=cap - 2 {
        let slice_cap = cap - k - 2;
        let mut rhs = if k == 0 {
            TruncatedSeries::constant(rat(1, 1), slice_cap)
        } else {
            TruncatedSeries::zero(slice_cap)
        };
        for a in 0..=k {
            let b = k - a;
            // -(u11 u22)_k + (u12^2)_k
            rhs = rhs.sub(&d11[a as usize].mul(&d22[b as usize]));
            rhs = rhs.add(&d12[a as usize].mul(&d12[b as usize]));
            // (u13^2)_k + (u23^2)_k draw on slices a+1, b+1.
            let f = int_rat(a + 1) * int_rat(b + 1);
            rhs = rhs.add(
                &d1[(a + 1) as usize]
                    .mul(&d1[(b + 1) as usize])
                    .scale(&f),
            );
            rhs = rhs.add(
                &d2[(a + 1) as usize]
                    .mul(&d2[(b + 1) as usize])
                    .scale(&f),
            );
            // Known lower-order part of ((u11 + u22) u33)_k.
            if a >= 1 {
                let factor = int_rat(b + 2) * int_rat(b + 1);
                rhs = rhs.sub(&lapp[a as usize].mul(&c[(b + 2) as usize]).scale(&factor));
            }
        }
        let quot = div_unit(&rhs.truncated(slice_cap), &lapp[0])?;
        let next = quot
            .scale(&(Rat::from(BigInt::from(1)) / (int_rat(k + 2) * int_rat(k + 1))))
            .truncated(slice_cap);
        push_derivs(&next, &mut d11, &mut d22, &mut d12, &mut d1, &mut d2, &mut lapp);
        c.push(next);
    }

    let mut u = TruncatedSeries::zero(cap);
    for (k, slice) in c.iter().enumerate() {
        u = u.add(&slice.shift_x3(k as u32, cap));
    }
    Ok(u)
}

/// Lowest total degree of `sigma2(D^2 u) - 1`, computed exactly. For a series
/// produced by [`ck_solve`] at cap N this is above the residual cap `N - 2`.
pub fn residual_order(u: &TruncatedSeries) -> LowOrder {
    sigma2_hessian(u)
        .add_scalar(&rat(-1, 1))
        .low_order(&Rat::zero())
}

/// Lowest total degree of `u - p`.
pub fn agreement_order(u: &TruncatedSeries, p: &TruncatedSeries) -> LowOrder {
    u.sub(p).low_order(&Rat::zero())
}

// --- float escape hatch -------------------------------------------------------
//
// The same recursion over f64 coefficients, for caps where rational bit-size
// becomes a burden. Coefficients below ZERO_TOL are treated as zero. Never
// used by the acceptance path.

const ZERO_TOL: f64 = 1e-30;

type FSlice = BTreeMap<(u32, u32), f64>;

fn fdiff(s: &FSlice, axis: usize) -> FSlice {
    let mut out = FSlice::new();
    for (&(i, j), &c) in s {
        let (e, idx) = if axis == 0 {
            (i, (i.wrapping_sub(1), j))
        } else {
            (j, (i, j.wrapping_sub(1)))
        };
        if e > 0 {
            *out.entry(idx).or_insert(0.0) += c * e as f64;
        }
    }
    out
}

fn fmul(a: &FSlice, b: &FSlice, cap: u32) -> FSlice {
    let mut out = FSlice::new();
    for (&(i1, j1), &c1) in a {
        for (&(i2, j2), &c2) in b {
            if i1 + i2 + j1 + j2 <= cap {
                *out.entry((i1 + i2, j1 + j2)).or_insert(0.0) += c1 * c2;
            }
        }
    }
    out.retain(|_, c| c.abs() > ZERO_TOL);
    out
}

fn fadd_scaled(acc: &mut FSlice, other: &FSlice, factor: f64, cap: u32) {
    for (&(i, j), &c) in other {
        if i + j <= cap {
            *acc.entry((i, j)).or_insert(0.0) += factor * c;
        }
    }
}

fn fdiv_unit(num: &FSlice, den: &FSlice, cap: u32) -> Result<FSlice> {
    let d0 = *den.get(&(0, 0)).unwrap_or(&0.0);
    if d0.abs() <= ZERO_TOL {
        return Err(SlagError::DegenerateCauchyData(
            "float-mode division by a non-unit".into(),
        ));
    }
    let mut quot = FSlice::new();
    for d in 0..=cap {
        let mut layer: Vec<((u32, u32), f64)> = num
            .iter()
            .filter(|(&(i, j), _)| i + j == d)
            .map(|(&k, &v)| (k, v))
            .collect();
        for (&(di, dj), &dc) in den.iter().filter(|(&(i, j), _)| i + j >= 1 && i + j <= d) {
            for (&(qi, qj), &qc) in quot.iter().filter(|(&(i, j), _)| i + j == d - di - dj) {
                layer.push(((di + qi, dj + qj), -dc * qc));
            }
        }
        let mut merged = FSlice::new();
        for (k, v) in layer {
            *merged.entry(k).or_insert(0.0) += v;
        }
        for (k, v) in merged {
            let q = v / d0;
            if q.abs() > ZERO_TOL {
                *quot.entry(k).or_insert(0.0) += q;
            }
        }
    }
    Ok(quot)
}

/// Float-mode solve; returns slices `c_k` as coefficient maps on `(x1, x2)`.
pub fn ck_solve_f64(data: &CauchyData, cap: u32) -> Result<Vec<FSlice>> {
    if cap < 2 {
        return Err(SlagError::Parameter(format!("cap must be >= 2, got {cap}")));
    }
    let to_f = |s: &TruncatedSeries, cap: u32| -> FSlice {
        s.terms()
            .filter(|(idx, _)| idx.i + idx.j <= cap)
            .map(|(idx, c)| ((idx.i, idx.j), crate::mpoly::rat_to_f64(c)))
            .collect()
    };
    let mut c: Vec<FSlice> = vec![to_f(&data.c0, cap), to_f(&data.c1, cap - 1)];
    let lapp = |s: &FSlice| -> FSlice {
        let mut out = fdiff(&fdiff(s, 0), 0);
        fadd_scaled(&mut out, &fdiff(&fdiff(s, 1), 1), 1.0, u32::MAX);
        out
    };
    for k in 0..=cap - 2 {
        let slice_cap = cap - k - 2;
        let mut rhs = FSlice::new();
        if k == 0 {
            rhs.insert((0, 0), 1.0);
        }
        for a in 0..=k {
            let b = k - a;
            let (ca, cb) = (&c[a as usize], &c[b as usize]);
            let t = fmul(&fdiff(&fdiff(ca, 0), 0), &fdiff(&fdiff(cb, 1), 1), slice_cap);
            fadd_scaled(&mut rhs, &t, -1.0, slice_cap);
            let t = fmul(&fdiff(&fdiff(ca, 0), 1), &fdiff(&fdiff(cb, 0), 1), slice_cap);
            fadd_scaled(&mut rhs, &t, 1.0, slice_cap);
            let f = (a + 1) as f64 * (b + 1) as f64;
            let t = fmul(
                &fdiff(&c[(a + 1) as usize], 0),
                &fdiff(&c[(b + 1) as usize], 0),
                slice_cap,
            );
            fadd_scaled(&mut rhs, &t, f, slice_cap);
            let t = fmul(
                &fdiff(&c[(a + 1) as usize], 1),
                &fdiff(&c[(b + 1) as usize], 1),
                slice_cap,
            );
            fadd_scaled(&mut rhs, &t, f, slice_cap);
            if a >= 1 {
                let t = fmul(&lapp(&c[a as usize]), &c[(b + 2) as usize], slice_cap);
                fadd_scaled(&mut rhs, &t, -((b + 2) as f64) * (b + 1) as f64, slice_cap);
            }
        }
        let quot = fdiv_unit(&rhs, &lapp(&c[0]), slice_cap)?;
        let mut next = FSlice::new();
        fadd_scaled(&mut next, &quot, 1.0 / ((k + 2) as f64 * (k + 1) as f64), slice_cap);
        c.push(next);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpoly::rat_to_f64;

    fn rho2_half(cap: u32) -> TruncatedSeries {
        crate::seed::rho2_pow(1, cap).scale(&rat(1, 2))
    }

    #[test]
    fn background_quadratic_is_reproduced_exactly() {
        let c0 = rho2_half(8);
        let data = CauchyData::new(c0.clone(), TruncatedSeries::zero(8)).unwrap();
        let u = ck_solve(&data, 8).unwrap();
        assert_eq!(u, c0);
        assert_eq!(residual_order(&u), LowOrder::AboveCap);
    }

    #[test]
    fn quadratic_data_recovers_third_eigenvalue() {
        // c0 = (2 x1^2 + x2^2)/2: lambda3 = (1 - 2)/(2 + 1) = -1/3, so the
        // solution gains x3^2 * (-1/6) and nothing else.
        let cap = 8;
        let x1 = TruncatedSeries::variable(Axis::X1, cap);
        let x2 = TruncatedSeries::variable(Axis::X2, cap);
        let c0 = x1.mul(&x1).add(&x2.mul(&x2).scale(&rat(1, 2)));
        let data = CauchyData::new(c0.clone(), TruncatedSeries::zero(cap)).unwrap();
        let u = ck_solve(&data, cap).unwrap();
        let diff = u.sub(&c0);
        assert_eq!(diff.coeff(MultiIndex::new(0, 0, 2)), rat(-1, 6));
        assert_eq!(diff.num_terms(), 1);
        assert_eq!(residual_order(&u), LowOrder::AboveCap);
        // Cross-check against l1 l2 + l2 l3 + l3 l1 = 1.
        let (l1, l2, l3) = (rat(2, 1), rat(1, 1), rat(-1, 3));
        assert_eq!(&l1 * &l2 + &l2 * &l3 + &l3 * &l1, rat(1, 1));
    }

    #[test]
    fn seed_data_residual_and_agreement() {
        let params = crate::seed::SeedParams::new(2, rat(1, 160), rat(1, 4)).unwrap();
        let cap = 8;
        let p = crate::seed::build_p(&params, cap).unwrap();
        let data = CauchyData::from_potential(&p);
        let u = ck_solve(&data, cap).unwrap();
        let res = residual_order(&u);
        assert!(res.at_least(cap - 1), "residual order {res} not above cap - 2");
        let agree = agreement_order(&u, &p);
        assert!(agree.at_least(2 * params.m), "agreement order {agree} < 2m");
        // The paper-level expectation is agreement up to order 3m - 2 = 4.
        println!("m=2 agreement order of u - P: {agree}");
    }

    #[test]
    fn solution_matches_data_at_x3_zero() {
        let params = crate::seed::SeedParams::new(2, rat(1, 160), rat(1, 4)).unwrap();
        let p = crate::seed::build_p(&params, 8).unwrap();
        let data = CauchyData::from_potential(&p);
        let u = ck_solve(&data, 8).unwrap();
        assert_eq!(u.x3_slice(0), data.c0.truncated(8));
        assert_eq!(u.x3_slice(1), data.c1.truncated(7));
        // Everything beyond the data carries x3-order >= 2.
        let rest = u
            .sub(&data.c0.truncated(8))
            .sub(&data.c1.truncated(8).shift_x3(1, 8));
        assert!(rest.terms().all(|(idx, _)| idx.k >= 2));
    }

    #[test]
    fn degenerate_data_is_rejected() {
        let cap = 6;
        let x1 = TruncatedSeries::variable(Axis::X1, cap);
        let c0 = x1.mul(&x1).mul(&x1);
        let data = CauchyData::new(c0, TruncatedSeries::zero(cap)).unwrap();
        match ck_solve(&data, cap) {
            Err(SlagError::DegenerateCauchyData(_)) => {}
            other => panic!("expected degenerate data error, got {other:?}"),
        }
    }

    #[test]
    fn tiny_cap_is_rejected() {
        let data = CauchyData::new(rho2_half(4), TruncatedSeries::zero(4)).unwrap();
        assert!(matches!(ck_solve(&data, 1), Err(SlagError::Parameter(_))));
    }

    #[test]
    fn x3_dependent_data_is_rejected() {
        let cap = 4;
        let bad = TruncatedSeries::variable(Axis::X3, cap);
        assert!(CauchyData::new(bad, TruncatedSeries::zero(cap)).is_err());
    }

    #[test]
    fn float_mode_matches_exact_solve() {
        let params = crate::seed::SeedParams::new(2, rat(1, 160), rat(1, 4)).unwrap();
        let cap = 8;
        let p = crate::seed::build_p(&params, cap).unwrap();
        let data = CauchyData::from_potential(&p);
        let exact = ck_solve(&data, cap).unwrap();
        let float = ck_solve_f64(&data, cap).unwrap();
        for (idx, c) in exact.terms() {
            let got = float[idx.k as usize]
                .get(&(idx.i, idx.j))
                .copied()
                .unwrap_or(0.0);
            assert!(
                (got - rat_to_f64(c)).abs() <= 1e-12 * (1.0 + rat_to_f64(c).abs()),
                "mismatch at {idx:?}"
            );
        }
    }
}
