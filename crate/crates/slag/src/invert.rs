//! Numerical inversion of the gradient map `Df` under the two-dimensional
//! ellipticity hypotheses, exposing the pi/2-rotated potential.
//!
//! The inversion mirrors the monotonicity structure of the underlying proof:
//! an outer bisection on `xi = x3` drives the strictly decreasing scalar
//! `y3(xi) = f3(x'(xi), xi)`, while the inner solve recovers `x'(xi)` from
//! the kappa-elliptic 2x2 system by damped Newton. Bisection is used in the
//! x3 direction deliberately: `det D^2 f` degenerates at the origin, which
//! destroys Newton's convergence exactly where the interesting targets live,
//! while bisection on a monotone scalar cannot fail.

use nalgebra::{Matrix2, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::handle::{Provenance, SolutionHandle, SolutionSurface};
use crate::error::{Result, SlagError};
use crate::geometry::{eig3_sym, SymMat3};
use crate::mpoly::Point3;
use crate::numerics::{fibonacci_sphere, log_spaced, newton2_damped, sample_in_ball, seeded_rng};
use crate::report::VerificationReport;

/// Residual tolerance of [`invert_point`]: `|Df(x) - target| <= tol * max(1, |target|)`.
pub const INVERT_TOL: f64 = 1e-10;
/// Absolute tolerance of the potential line integral.
pub const POTENTIAL_TOL: f64 = 1e-10;

/// Hypotheses of the inversion rotation: domain radius, 2x2-minor ellipticity
/// constant, and the bound on `|D'f3|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InversionHypotheses {
    pub rho: f64,
    pub kappa: f64,
    pub grad3_bound: f64,
}

impl InversionHypotheses {
    pub fn new(rho: f64, kappa: f64, grad3_bound: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(SlagError::Parameter("rho must be positive".into()));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(SlagError::Parameter(format!(
                "kappa must lie in (0, 1], got {kappa}"
            )));
        }
        if !(grad3_bound > 0.0 && grad3_bound <= 0.5) {
            return Err(SlagError::Parameter(format!(
                "grad3 bound must lie in (0, 1/2], got {grad3_bound}"
            )));
        }
        Ok(InversionHypotheses {
            rho,
            kappa,
            grad3_bound,
        })
    }

    /// Half-width of the x3 bisection bracket: `kappa^2 rho / 2`.
    pub fn bracket(&self) -> f64 {
        0.5 * self.kappa * self.kappa * self.rho
    }

    /// Image-ball radius suggested by the proof chain, before verification.
    pub fn nominal_image_radius(&self) -> f64 {
        self.bracket() * self.kappa / 2.0f64.sqrt()
    }
}

/// Sample the hypotheses on log-spaced shells of `B_rho` minus the origin:
/// `Df(0) = 0`, `det D^2 f < 0` away from 0, the two-sided minor bounds, and
/// the `|D'f3|` bound. Failures become negative margins, not errors.
pub fn hypothesis_check(
    f: &SolutionHandle,
    hyp: &InversionHypotheses,
    n_samples: u64,
    rng_seed: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("inversion-hypotheses");
    report.samples.seed = rng_seed;
    report.samples.points = n_samples;
    report.samples.r_min = hyp.rho * 1e-4;
    report.samples.r_max = hyp.rho;
    report.param("rho", hyp.rho);
    report.param("kappa", hyp.kappa);

    let g0 = f.grad(&[0.0, 0.0, 0.0])?.norm();
    report.fit("grad_norm_at_origin", g0);
    report.margin("grad_vanishes_at_origin", 1e-10 - g0);

    let shells = 24usize.min(n_samples.max(1) as usize);
    let radii = log_spaced(hyp.rho * 1e-4, hyp.rho, shells);
    let per_shell = (n_samples as usize / shells).max(1);
    let mut rng = seeded_rng(rng_seed, 1);
    let mut max_det = f64::NEG_INFINITY;
    let mut min_minor_gap = f64::INFINITY;
    let mut max_minor_gap = f64::INFINITY;
    let mut grad3_gap = f64::INFINITY;
    for &r in &radii {
        for _ in 0..per_shell {
            let dir = crate::numerics::sample_unit_vector(&mut rng);
            let x = [dir[0] * r, dir[1] * r, dir[2] * r];
            let h = f.hessian(&x)?;
            max_det = max_det.max(h.det());
            let minors = h.minor2_eigenvalues();
            min_minor_gap = min_minor_gap.min(minors[0] - hyp.kappa);
            max_minor_gap = max_minor_gap.min(1.0 / hyp.kappa - minors[1]);
            let m = h.matrix();
            let d3 = (m[(0, 2)].powi(2) + m[(1, 2)].powi(2)).sqrt();
            grad3_gap = grad3_gap.min(hyp.grad3_bound - d3);
        }
    }
    report.fit("max_det_d2f", max_det);
    report.fit("min_minor_margin", min_minor_gap);
    report.fit("min_upper_minor_margin", max_minor_gap);
    report.fit("min_grad3_margin", grad3_gap);
    report.margin("det_negative_off_origin", -max_det);
    report.margin("minor_lower_bound", min_minor_gap);
    report.margin("minor_upper_bound", max_minor_gap);
    report.margin("grad3_bound", grad3_gap);
    Ok(report)
}

#[derive(Clone, Copy, Debug)]
enum Accuracy {
    /// Stop as soon as the full residual meets `INVERT_TOL`.
    Residual,
    /// Bisect until the bracket collapses to rounding; used where the target
    /// sits deep in the degenerate cusp and the default residual tolerance
    /// would leave the preimage under-resolved.
    BracketCollapse,
}

fn inner_solve(
    f: &SolutionHandle,
    xi: f64,
    target: &[f64; 3],
    warm: Vector2<f64>,
) -> Result<(Vector2<f64>, Vector3<f64>)> {
    let sol = newton2_damped(
        |xp: &Vector2<f64>| {
            let x = [xp[0], xp[1], xi];
            match f.grad_hess(&x) {
                Ok((g, h)) => {
                    let m = h.matrix();
                    (
                        Vector2::new(g[0] - target[0], g[1] - target[1]),
                        Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]),
                    )
                }
                // Out-of-domain probes surface as a huge residual so damping
                // backs off instead of aborting the whole solve.
                Err(_) => (Vector2::new(1e30, 1e30), Matrix2::identity()),
            }
        },
        warm,
        1e-14 * (1.0 + target[0].abs() + target[1].abs()),
        120,
    )
    .map_err(|_| SlagError::EllipticityViolated(xi))?;
    let g = f.grad(&[sol[0], sol[1], xi])?;
    Ok((sol, g))
}

// Verified image radii sit many orders below the chart scale because the
// gradient image is thin in the x3 direction (thickness ~ eps b^(2m-1), the
// anisotropy behind the Hoelder exponent). Tolerances are therefore relative
// to the target with an f64 evaluation-noise floor, never to the unit scale.
const RESID_FLOOR: f64 = 1e-13;

fn invert_with(
    f: &SolutionHandle,
    hyp: &InversionHypotheses,
    target: &[f64; 3],
    accuracy: Accuracy,
) -> Result<Point3> {
    let tnorm = (target[0].powi(2) + target[1].powi(2) + target[2].powi(2)).sqrt();
    if tnorm == 0.0 {
        return Ok(Point3::new(0.0, 0.0, 0.0));
    }
    let b = hyp.bracket();
    let tol = (INVERT_TOL * tnorm).max(0.5 * RESID_FLOOR);

    let mut warm = Vector2::new(target[0], target[1]);
    let (lo_xp, lo_g) = inner_solve(f, -b, target, warm)?;
    warm = lo_xp;
    let y_lo = lo_g[2];
    let (hi_xp, hi_g) = inner_solve(f, b, target, warm)?;
    let y_hi = hi_g[2];
    // y3 is strictly decreasing in xi, so the bracket must satisfy
    // y3(-b) >= t3 >= y3(b) up to rounding slack.
    let slack = 1e-12 * (1.0 + tnorm);
    if target[2] > y_lo + slack || target[2] < y_hi - slack {
        return Err(SlagError::TargetOutsideImage(target[0], target[1], target[2]));
    }

    let mut lo = -b;
    let mut hi = b;
    let mut best: Option<(f64, [f64; 3])> = None;
    for (xp, g, xi) in [(lo_xp, lo_g, -b), (hi_xp, hi_g, b)] {
        let resid = (g - Vector3::new(target[0], target[1], target[2])).norm();
        if best.as_ref().map_or(true, |(r, _)| resid < *r) {
            best = Some((resid, [xp[0], xp[1], xi]));
        }
    }
    for _ in 0..220 {
        let mid = 0.5 * (lo + hi);
        let (xp, g) = inner_solve(f, mid, target, warm)?;
        warm = xp;
        let resid = (g - Vector3::new(target[0], target[1], target[2])).norm();
        if best.as_ref().map_or(true, |(r, _)| resid < *r) {
            best = Some((resid, [xp[0], xp[1], mid]));
        }
        if matches!(accuracy, Accuracy::Residual) && resid <= tol {
            break;
        }
        if g[2] > target[2] {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * b.max(lo.abs()).max(hi.abs()) {
            break;
        }
    }
    let (resid, x) = best.expect("bisection evaluated at least the endpoints");
    // After bracket collapse the remaining residual is limited by evaluation
    // noise through the cusp, not by iteration count.
    let final_tol = (1e-7 * tnorm).max(RESID_FLOOR);
    if resid > final_tol {
        return Err(SlagError::TargetOutsideImage(target[0], target[1], target[2]));
    }
    Ok(Point3::new(x[0], x[1], x[2]))
}

/// Find `x` with `Df(x) = target` by outer bisection on `x3` and an inner
/// damped 2x2 Newton solve, to `INVERT_TOL` relative residual.
pub fn invert_point(
    f: &SolutionHandle,
    hyp: &InversionHypotheses,
    target: &[f64; 3],
) -> Result<Point3> {
    invert_with(f, hyp, target, Accuracy::Residual)
}

/// An evaluable chart of the pi/2-rotated graph: `Phi = (Df)^{-1}`,
/// `D u~~ = -Phi`, `D^2 u~~ = -(D^2 f)^{-1} o Phi`, and the potential by a
/// radial line integral. The stored image radius is the one verified by
/// probing, never larger than the nominal proof-chain radius.
#[derive(Clone)]
pub struct InverseGraphHandle {
    f: SolutionHandle,
    hyp: InversionHypotheses,
    image_radius: f64,
}

impl InverseGraphHandle {
    pub fn f(&self) -> &SolutionHandle {
        &self.f
    }

    pub fn hypotheses(&self) -> &InversionHypotheses {
        &self.hyp
    }

    pub fn image_radius(&self) -> f64 {
        self.image_radius
    }

    /// The continuous inverse of the gradient map.
    pub fn phi(&self, y: &[f64; 3]) -> Result<Point3> {
        invert_with(&self.f, &self.hyp, y, Accuracy::Residual)
    }

    /// High-accuracy variant: bisects to bracket collapse.
    pub fn phi_sharp(&self, y: &[f64; 3]) -> Result<Point3> {
        invert_with(&self.f, &self.hyp, y, Accuracy::BracketCollapse)
    }

    /// Potential by the axis-aligned three-leg path, for the path audit.
    pub fn potential_via_axis_path(&self, y: &[f64; 3]) -> Result<f64> {
        let mut total = 0.0;
        let mut base = [0.0f64; 3];
        for leg in 0..3 {
            let fixed = base;
            let target = y[leg];
            if target != 0.0 {
                total += line_integral(|t| {
                    let mut p = fixed;
                    p[leg] = t * target;
                    Ok(-self.phi(&p)?.to_array()[leg] * target)
                })?;
            }
            base[leg] = y[leg];
        }
        Ok(total)
    }
}

/// Build the inverse-graph handle: re-check the hypotheses, then verify a
/// conservative image radius by probing inversions on shells, shrinking from
/// the nominal radius until every probe lands.
pub fn build_inverse_graph(
    f: &SolutionHandle,
    hyp: &InversionHypotheses,
) -> Result<InverseGraphHandle> {
    if hyp.rho > f.valid_radius() * (1.0 + 1e-12) {
        return Err(SlagError::Parameter(format!(
            "hypothesis radius {} exceeds handle radius {}",
            hyp.rho,
            f.valid_radius()
        )));
    }
    let guard = hypothesis_check(f, hyp, 512, 13)?;
    if !guard.pass {
        return Err(SlagError::Construction(format!(
            "inversion hypotheses fail on B_rho: {:?}",
            guard.margins
        )));
    }
    // The image is thin in the y3 direction (its extent there is governed by
    // the small Hessian eigenvalue), so a verified ball must start from the
    // measured y3 range on the bracket, not from the nominal radius alone.
    let b = hyp.bracket();
    let (_, g_lo) = inner_solve(f, -b, &[0.0; 3], Vector2::zeros())?;
    let (_, g_hi) = inner_solve(f, b, &[0.0; 3], Vector2::zeros())?;
    let thickness = g_lo[2].abs().min(g_hi[2].abs());
    if !(thickness > 0.0) {
        return Err(SlagError::Construction(
            "gradient image has no y3 extent on the bracket".into(),
        ));
    }
    let mut radius = hyp.nominal_image_radius().min(0.9 * thickness);
    let dirs = fibonacci_sphere(16);
    'shrink: for _ in 0..14 {
        for &scale in &[1.0, 0.3, 0.03, 1e-3] {
            for d in &dirs {
                let y = [d[0] * radius * scale, d[1] * radius * scale, d[2] * radius * scale];
                let ok = invert_with(f, hyp, &y, Accuracy::Residual).is_ok();
                if !ok {
                    radius *= 0.8;
                    continue 'shrink;
                }
            }
        }
        return Ok(InverseGraphHandle {
            f: f.clone(),
            hyp: *hyp,
            image_radius: radius,
        });
    }
    Err(SlagError::Construction(
        "could not verify any image radius for the inverse graph".into(),
    ))
}

/// Quadrature of a line integrand over `(0, 1]` by geometric panels
/// accumulating toward the origin (where pipeline integrands are merely
/// Hoelder) with a 16-point Gauss rule per panel. The layout is fixed, so the
/// cost stays bounded even when inverter noise caps the attainable accuracy.
fn line_integral(mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (nodes, weights) = crate::numerics::gauss_legendre(16);
    let mut acc = crate::numerics::Kahan::default();
    let mut hi = 1.0f64;
    for _ in 0..36 {
        let lo = hi * 0.5;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for (x, w) in nodes.iter().zip(&weights) {
            acc.add(w * half * f(mid + half * x)?);
        }
        hi = lo;
    }
    // Closing stub [0, 2^-36]: the integrand is bounded there.
    let mid = 0.5 * hi;
    let half = 0.5 * hi;
    for (x, w) in nodes.iter().zip(&weights) {
        acc.add(w * half * f(mid + half * x)?);
    }
    Ok(acc.total())
}

/// Potential of the rotated graph by quadrature of `-Phi . ds` along the
/// radial segment from the origin, to `POTENTIAL_TOL` relative to the
/// natural scale `|y| * bracket` of the integral.
pub fn reconstruct_potential(h: &InverseGraphHandle, y: &[f64; 3]) -> Result<f64> {
    let norm = (y[0].powi(2) + y[1].powi(2) + y[2].powi(2)).sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    if norm > h.image_radius * (1.0 + 1e-9) {
        return Err(SlagError::TargetOutsideImage(y[0], y[1], y[2]));
    }
    line_integral(|t| {
        let p = [t * y[0], t * y[1], t * y[2]];
        let x = h.phi(&p)?;
        let xv = x.to_array();
        Ok(-(xv[0] * y[0] + xv[1] * y[1] + xv[2] * y[2]))
    })
}

// The handle evaluators run the inverter to bracket collapse rather than to
// the documented residual tolerance of `invert_point`: deep in the cusp the
// x3 resolution left by an early residual exit is a visible fraction of the
// coordinate itself, and everything downstream (Hessians especially) feels
// it. Bisection to collapse costs less than twice as much.
impl SolutionSurface for InverseGraphHandle {
    fn value(&self, y: &[f64; 3]) -> Result<f64> {
        // Transport identity across the pi/2 rotation: with x = Phi(y) the
        // potential equals f(x) - x . y, the closed form of the line
        // integral. It is first-order immune to inverter noise because the
        // line integrand is stationary in x at the solution.
        let x = self.phi_sharp(y)?.to_array();
        let base = self.f.value(&x)?;
        Ok(base - (x[0] * y[0] + x[1] * y[1] + x[2] * y[2]))
    }

    fn grad(&self, y: &[f64; 3]) -> Result<Vector3<f64>> {
        let x = self.phi_sharp(y)?;
        Ok(-Vector3::new(x.x1, x.x2, x.x3))
    }

    fn hessian(&self, y: &[f64; 3]) -> Result<SymMat3> {
        // The refusal at the image of the origin is the content of the
        // construction: the potential is C^1 but not C^2 there.
        if y[0] == 0.0 && y[1] == 0.0 && y[2] == 0.0 {
            return Err(SlagError::HessianUndefinedAtSingularPoint);
        }
        let x = self.phi_sharp(y)?;
        let hf = self.f.hessian(&x.to_array())?;
        let inv = hf
            .matrix()
            .try_inverse()
            .ok_or(SlagError::GraphCondition(y[0], y[1], y[2]))?;
        Ok(SymMat3::symmetrize(&(-inv)).0)
    }

    fn grad_hess(&self, y: &[f64; 3]) -> Result<(Vector3<f64>, SymMat3)> {
        let g = self.grad(y)?;
        if y[0] == 0.0 && y[1] == 0.0 && y[2] == 0.0 {
            return Err(SlagError::HessianUndefinedAtSingularPoint);
        }
        let hf = self.f.hessian(&[-g[0], -g[1], -g[2]])?;
        let inv = hf
            .matrix()
            .try_inverse()
            .ok_or(SlagError::GraphCondition(y[0], y[1], y[2]))?;
        Ok((g, SymMat3::symmetrize(&(-inv)).0))
    }

    fn valid_radius(&self) -> f64 {
        self.image_radius
    }

    fn provenance(&self) -> Provenance {
        Provenance::InverseGraph
    }
}

/// Sampled invariants of the inversion: the distance expansion of
/// `Psi = (f1, f2, x3)`, strict monotonicity of `y3` in `xi`, the round trip
/// `Df o invert = id`, and Hessian reciprocity of the handle.
pub fn inversion_invariants(
    h: &InverseGraphHandle,
    n_samples: u64,
    rng_seed: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("inversion-invariants");
    report.samples.seed = rng_seed;
    report.samples.points = n_samples;
    let f = &h.f;
    let hyp = &h.hyp;
    let mut rng = seeded_rng(rng_seed, 2);
    let psi = |x: &[f64; 3]| -> Result<Vector3<f64>> {
        let g = f.grad(x)?;
        Ok(Vector3::new(g[0], g[1], x[2]))
    };

    // Psi distance expansion with factor kappa / sqrt(2).
    let mut min_ratio = f64::INFINITY;
    for _ in 0..n_samples {
        let a = sample_in_ball(&mut rng, hyp.rho);
        let b = sample_in_ball(&mut rng, hyp.rho);
        let d = (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
        if d < 1e-12 {
            continue;
        }
        let ratio = (psi(&a)? - psi(&b)?).norm() / d;
        min_ratio = min_ratio.min(ratio);
    }
    let factor = hyp.kappa / 2.0f64.sqrt();
    report.fit("psi_min_expansion", min_ratio);
    report.margin("psi_expansion_factor", min_ratio - factor);

    // Strict monotonicity of y3 along xi-lines (finite differences all negative).
    let mut max_fd = f64::NEG_INFINITY;
    let b = hyp.bracket();
    for line in 0..16 {
        let mut lrng = seeded_rng(rng_seed, 100 + line);
        let t1: f64 = lrng.gen_range(-0.3 * b..0.3 * b);
        let t2: f64 = lrng.gen_range(-0.3 * b..0.3 * b);
        let mut warm = Vector2::new(t1, t2);
        let mut prev: Option<f64> = None;
        for step in 0..24 {
            let xi = -b + 2.0 * b * step as f64 / 23.0;
            let (xp, g) = inner_solve(f, xi, &[t1, t2, 0.0], warm)?;
            warm = xp;
            if let Some(p) = prev {
                max_fd = max_fd.max(g[2] - p);
            }
            prev = Some(g[2]);
        }
    }
    report.fit("max_y3_forward_difference", max_fd);
    report.margin("y3_strictly_decreasing", -max_fd);

    // Round trip and Hessian reciprocity on the verified image, sampled away
    // from the image of the origin where 1/lambda comparisons reach the f64
    // floor.
    let mut worst_rt = 0.0f64;
    let mut worst_recip = 0.0f64;
    for _ in 0..n_samples.min(1000) {
        let y = crate::numerics::sample_in_annulus(&mut rng, 0.05 * h.image_radius, h.image_radius);
        let x = h.phi(&y)?;
        let g = f.grad(&x.to_array())?;
        let resid = (g - Vector3::new(y[0], y[1], y[2])).norm();
        worst_rt = worst_rt.max(resid / y.iter().map(|t| t * t).sum::<f64>().sqrt().max(1.0));
        // Reciprocity compares the handle Hessian against the forward
        // Hessian at the handle's own (sharp) preimage.
        let x = h.phi_sharp(&y)?;
        if y != [0.0; 3] {
            // Scale-free reciprocity: pair each handle eigenvalue with the
            // forward eigenvalue whose negative reciprocal it should be and
            // require the product to be -1. Comparing the reciprocals
            // directly would divide by eigenvalues near the f64 floor.
            let lam_f = eig3_sym(&f.hessian(&x.to_array())?).lambda;
            let mut pairs: Vec<(f64, f64)> = lam_f.iter().map(|&l| (-1.0 / l, l)).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let lam_h = eig3_sym(&h.hessian(&y)?).lambda;
            // Any eigenvalue of the handle Hessian carries an absolute
            // extraction floor of eps * ||matrix||; the products inherit it
            // scaled by the paired forward eigenvalue.
            let h_norm = lam_h.iter().fold(0.0f64, |a, l| a.max(l.abs()));
            for i in 0..3 {
                let dev = (lam_h[i] * pairs[i].1 + 1.0).abs();
                let floor = 4.0 * f64::EPSILON * h_norm * pairs[i].1.abs();
                worst_recip = worst_recip.max(dev - floor);
            }
        }
    }
    report.fit("worst_round_trip_residual", worst_rt);
    report.margin("round_trip", 1e-8 - worst_rt);
    report.fit("worst_hessian_reciprocity", worst_recip);
    report.margin("hessian_reciprocity", 1e-8 - worst_recip);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpoly::{rat, Axis, MultiIndex, TruncatedSeries};

    /// f = (a (x1^2 + x2^2) - c x3^2) / 2 as a series handle.
    fn diag_quadratic(a: i64, c: i64, radius: f64) -> SolutionHandle {
        let cap = 4;
        let x1 = TruncatedSeries::variable(Axis::X1, cap);
        let x2 = TruncatedSeries::variable(Axis::X2, cap);
        let x3 = TruncatedSeries::variable(Axis::X3, cap);
        let s = x1
            .mul(&x1)
            .add(&x2.mul(&x2))
            .scale(&rat(a, 2))
            .add(&x3.mul(&x3).scale(&rat(-c, 2)));
        SolutionHandle::from_series(&s, radius)
    }

    #[test]
    fn hypotheses_pass_for_constant_negative_hessian() {
        // D^2 f = diag(2, 2, -1): minors 2I inside [1/2, 2], det = -4.
        let f = diag_quadratic(2, 1, 2.0);
        let hyp = InversionHypotheses::new(1.0, 0.5, 0.5).unwrap();
        let rep = hypothesis_check(&f, &hyp, 512, 5).unwrap();
        assert!(rep.pass, "{:?}", rep.margins);
        assert!((rep.fitted_value("max_det_d2f").unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn hypotheses_fail_for_positive_det_branch() {
        // f = |x'|^2/2 + x3^3: det D^2 f = 6 x3 turns positive.
        let cap = 4;
        let x1 = TruncatedSeries::variable(Axis::X1, cap);
        let x2 = TruncatedSeries::variable(Axis::X2, cap);
        let s = x1
            .mul(&x1)
            .add(&x2.mul(&x2))
            .scale(&rat(1, 2))
            .add(&TruncatedSeries::monomial(MultiIndex::new(0, 0, 3), rat(1, 1), cap));
        let f = SolutionHandle::from_series(&s, 2.0);
        let hyp = InversionHypotheses::new(1.0, 0.5, 0.5).unwrap();
        let rep = hypothesis_check(&f, &hyp, 512, 5).unwrap();
        assert!(!rep.pass);
        let (_, worst) = rep
            .margins
            .iter()
            .find(|(k, _)| k == "det_negative_off_origin")
            .unwrap();
        assert!(*worst < 0.0);
    }

    #[test]
    fn invert_diagonal_quadratic_closed_form() {
        // a = 1, c = 2: inverse is (t1, t2, -t3/2).
        let f = diag_quadratic(1, 2, 4.0);
        let hyp = InversionHypotheses::new(3.0, 0.5, 0.5).unwrap();
        let x = invert_point(&f, &hyp, &[0.1, -0.2, 0.4]).unwrap();
        assert!((x.x1 - 0.1).abs() < 1e-10);
        assert!((x.x2 + 0.2).abs() < 1e-10);
        assert!((x.x3 + 0.2).abs() < 1e-10);
    }

    #[test]
    fn invert_monotone_cubic_through_degenerate_origin() {
        // f = |x'|^2/2 - x3^4/4: Df = (x1, x2, -x3^3); target (0, 0, 0.008)
        // has the closed-form preimage x3 = -0.2.
        let cap = 5;
        let x1 = TruncatedSeries::variable(Axis::X1, cap);
        let x2 = TruncatedSeries::variable(Axis::X2, cap);
        let s = x1
            .mul(&x1)
            .add(&x2.mul(&x2))
            .scale(&rat(1, 2))
            .add(&TruncatedSeries::monomial(MultiIndex::new(0, 0, 4), rat(-1, 4), cap));
        let f = SolutionHandle::from_series(&s, 2.0);
        let hyp = InversionHypotheses::new(1.8, 0.9, 0.5).unwrap();
        let x = invert_point(&f, &hyp, &[0.0, 0.0, 0.008]).unwrap();
        assert!(x.x1.abs() < 1e-10 && x.x2.abs() < 1e-10);
        assert!((x.x3 + 0.2).abs() < 1e-9, "got {}", x.x3);
        // Origin maps to origin exactly.
        let o = invert_point(&f, &hyp, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(o.to_array(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn invert_rejects_outside_targets() {
        let f = diag_quadratic(1, 2, 1.0);
        let hyp = InversionHypotheses::new(0.5, 0.5, 0.5).unwrap();
        // Bracket is kappa^2 rho / 2 = 1/16; y3 range is [-2b, 2b] = 1/8.
        match invert_point(&f, &hyp, &[0.0, 0.0, 0.5]) {
            Err(SlagError::TargetOutsideImage(_, _, _)) => {}
            other => panic!("expected outside-image error, got {other:?}"),
        }
    }

    #[test]
    fn inverse_graph_of_antidiagonal_quadratic() {
        // f = (|x'|^2 - x3^2)/2: handle Hessian is diag(-1, -1, 1) everywhere.
        let f = diag_quadratic(1, 1, 6.0);
        let hyp = InversionHypotheses::new(5.0, 0.5, 0.5).unwrap();
        let h = build_inverse_graph(&f, &hyp).unwrap();
        let y = [0.05, -0.02, 0.04];
        let hm = h.hessian(&y).unwrap();
        for (i, want) in [(-1.0), (-1.0), 1.0].iter().enumerate() {
            assert!((hm.matrix()[(i, i)] - want).abs() < 1e-9);
        }
        // Hessian refuses the singular point.
        match h.hessian(&[0.0, 0.0, 0.0]) {
            Err(SlagError::HessianUndefinedAtSingularPoint) => {}
            other => panic!("expected refusal at the origin, got {other:?}"),
        }
    }

    #[test]
    fn potential_of_antidiagonal_quadratic() {
        // f~ (y) = -(y1^2 + y2^2)/2 + y3^2/2; at (t, 0, t) it vanishes.
        let f = diag_quadratic(1, 1, 24.0);
        let hyp = InversionHypotheses::new(20.0, 0.5, 0.5).unwrap();
        let h = build_inverse_graph(&f, &hyp).unwrap();
        assert!(h.image_radius() >= 0.8);
        let v = reconstruct_potential(&h, &[0.5, 0.0, 0.5]).unwrap();
        assert!(v.abs() < 1e-9, "got {v}");
        let v = reconstruct_potential(&h, &[0.3, -0.4, 0.1]).unwrap();
        assert!((v - (-0.5 * 0.25 + 0.5 * 0.01)).abs() < 1e-9);
        assert_eq!(reconstruct_potential(&h, &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn path_independence_for_coupled_potential() {
        // Non-diagonal f keeps the one-form closed; radial and axis paths agree.
        let cap = 6;
        let x1 = TruncatedSeries::variable(Axis::X1, cap);
        let x2 = TruncatedSeries::variable(Axis::X2, cap);
        let x3 = TruncatedSeries::variable(Axis::X3, cap);
        let s = x1
            .mul(&x1)
            .add(&x2.mul(&x2))
            .scale(&rat(1, 2))
            .add(&x3.mul(&x3).scale(&rat(-1, 2)))
            .add(&x1.mul(&x3).mul(&x3).scale(&rat(1, 20)))
            .add(&TruncatedSeries::monomial(MultiIndex::new(0, 0, 4), rat(-1, 40), cap));
        let f = SolutionHandle::from_series(&s, 3.0);
        let hyp = InversionHypotheses::new(2.0, 0.5, 0.4).unwrap();
        let h = build_inverse_graph(&f, &hyp).unwrap();
        let mut rng = seeded_rng(17, 0);
        for _ in 0..12 {
            let y = sample_in_ball(&mut rng, h.image_radius());
            let radial = reconstruct_potential(&h, &y).unwrap();
            let axis = h.potential_via_axis_path(&y).unwrap();
            assert!((radial - axis).abs() < 1e-8, "paths differ: {radial} vs {axis}");
        }
    }

    #[test]
    fn invariants_report_for_pipelineish_quadratic() {
        let f = diag_quadratic(1, 1, 6.0);
        let hyp = InversionHypotheses::new(5.0, 0.5, 0.5).unwrap();
        let h = build_inverse_graph(&f, &hyp).unwrap();
        let rep = inversion_invariants(&h, 400, 21).unwrap();
        assert!(rep.pass, "{:?}", rep.margins);
    }
}
