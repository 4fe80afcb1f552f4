//! Pointwise symmetric-matrix analysis and U(3) rotations of Lagrangian
//! graphs.
//!
//! The per-coordinate rotation `x~_j = x_j cos b_j + y_j sin b_j`,
//! `y~_j = -x_j sin b_j + y_j cos b_j` preserves the special Lagrangian
//! property and shifts each eigen-angle by `-b_j` modulo pi. The Hessian of
//! the rotated potential is the pushforward `(dy~/dx)(dx~/dx)^{-1}`,
//! symmetrized under a hard asymmetry gate: asymmetry beyond the gate means
//! the map stopped being a gradient graph, not a rounding issue.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Result, SlagError};
use crate::numerics::{sample_in_ball, seeded_rng};
use crate::report::VerificationReport;

/// Gate on the asymmetry of a pushforward Hessian before symmetrization.
pub const ASYMMETRY_GATE: f64 = 1e-8;
/// Condition-number gate for the chart Jacobian.
pub const CONDITION_GATE: f64 = 1e8;
/// Relative tolerance for eigenvalues against the characteristic polynomial.
pub const EIG_CHARPOLY_TOL: f64 = 1e-10;
// Stricter internal gate (relative per eigenvalue, with a scale floor)
// deciding when the closed form must yield to the iterative solver.
const EIG_FALLBACK_TOL: f64 = 1e-11;

/// Symmetric 3x3 matrix stored as its full nalgebra form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat3 {
    m: Matrix3<f64>,
}

impl SymMat3 {
    pub fn from_upper(a11: f64, a12: f64, a13: f64, a22: f64, a23: f64, a33: f64) -> Self {
        SymMat3 {
            m: Matrix3::new(a11, a12, a13, a12, a22, a23, a13, a23, a33),
        }
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::from_upper(a, 0.0, 0.0, b, 0.0, c)
    }

    /// Symmetrize a general matrix, reporting the largest asymmetry entry.
    pub fn symmetrize(m: &Matrix3<f64>) -> (Self, f64) {
        let sym = (m + m.transpose()) * 0.5;
        let asym = (m - m.transpose()).abs().max();
        (SymMat3 { m: sym }, asym)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }

    /// Eigenvalues of the upper-left 2x2 minor (ascending).
    pub fn minor2_eigenvalues(&self) -> [f64; 2] {
        let half_tr = 0.5 * (self.m[(0, 0)] + self.m[(1, 1)]);
        let det = self.m[(0, 0)] * self.m[(1, 1)] - self.m[(0, 1)] * self.m[(1, 0)];
        let disc = (half_tr * half_tr - det).max(0.0).sqrt();
        [half_tr - disc, half_tr + disc]
    }
}

/// Second elementary symmetric function of the eigenvalues: the sum of the
/// three principal 2x2 minors, equal to `((tr H)^2 - |H|_F^2) / 2`.
pub fn sigma2(h: &SymMat3) -> f64 {
    let m = h.matrix();
    let m01 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let m02 = m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)];
    let m12 = m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
    m01 + m02 + m12
}

/// Sorted eigenvalues with their arctangent angles and phase.
#[derive(Clone, Copy, Debug)]
pub struct EigenData {
    /// Ascending eigenvalues.
    pub lambda: [f64; 3],
    /// theta_i = arctan(lambda_i), each in (-pi/2, pi/2).
    pub theta: [f64; 3],
    /// Sum of the eigen-angles, in (-3 pi/2, 3 pi/2).
    pub phase: f64,
}

fn charpoly_residual(m: &Matrix3<f64>, lambda: f64) -> f64 {
    (m - Matrix3::identity() * lambda).determinant()
}

fn eig3_trig(m: &Matrix3<f64>) -> [f64; 3] {
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    if p1 == 0.0 {
        let mut d = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return d;
    }
    let q = m.trace() / 3.0;
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q, q, q];
    }
    let b = (m - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    let mut out = [lo, mid, hi];
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Eigen-decomposition of a symmetric 3x3 matrix by the trigonometric closed
/// form, with an iterative symmetric solver as fallback whenever the closed
/// form fails the characteristic-polynomial gate.
pub fn eig3_sym(h: &SymMat3) -> EigenData {
    let m = h.matrix();
    let scale = m.abs().max().max(1.0);
    let mut lambda = eig3_trig(m);
    // First-order error estimate |p(l)| / |p'(l)| per eigenvalue. The trig
    // form loses pairs that are clustered relative to the matrix scale, so
    // fall back to the iterative symmetric solver whenever the estimate
    // exceeds the target accuracy.
    let err_est = |vals: &[f64; 3], i: usize| -> f64 {
        let deriv: f64 = (0..3)
            .filter(|&j| j != i)
            .map(|j| (vals[i] - vals[j]).abs().max(1e-300))
            .product();
        charpoly_residual(m, vals[i]).abs() / deriv
    };
    let ok = (0..3).all(|i| {
        err_est(&lambda, i) <= (EIG_FALLBACK_TOL * lambda[i].abs()).max(1e-14 * scale)
    });
    if !ok {
        let se = m.symmetric_eigen();
        let mut vals = [se.eigenvalues[0], se.eigenvalues[1], se.eigenvalues[2]];
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lambda = vals;
    }
    // An isolated eigenvalue far below the matrix scale cancels to absolute
    // rounding in the closed form; the determinant ratio keeps its relative
    // accuracy (the determinant of such matrices is built from small terms,
    // with no order-one cancellation).
    let (mut idx, mut amin) = (0usize, lambda[0].abs());
    for i in 1..3 {
        if lambda[i].abs() < amin {
            idx = i;
            amin = lambda[i].abs();
        }
    }
    let others: f64 = (0..3).filter(|&i| i != idx).map(|i| lambda[i]).product();
    if amin < 1e-4 * scale && others.abs() > 1e3 * amin.max(f64::MIN_POSITIVE) {
        let cand = m.determinant() / others;
        if cand.is_finite() {
            lambda[idx] = cand;
            lambda.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
    }
    let theta = [lambda[0].atan(), lambda[1].atan(), lambda[2].atan()];
    EigenData {
        lambda,
        theta,
        phase: theta.iter().sum(),
    }
}

/// Second-order Taylor proxy for the isolated small eigenvalue of a matrix
/// near diag(1, 1, 0): `H33 - H13^2 - H23^2`. Diagnostic only; requires the
/// perturbation to be small.
pub fn isolated_eig_taylor(h: &SymMat3) -> Result<f64> {
    let ref_m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    let dist = (h.matrix() - ref_m).norm();
    if dist >= 0.25 {
        return Err(SlagError::Domain(format!(
            "matrix is {dist:.3} from diag(1,1,0); isolated-eigenvalue proxy needs < 0.25"
        )));
    }
    let m = h.matrix();
    Ok(m[(2, 2)] - m[(0, 2)].powi(2) - m[(1, 2)].powi(2))
}

/// Per-complex-coordinate rotation angles, each in (-pi, pi].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationAngles {
    pub beta: [f64; 3],
}

impl RotationAngles {
    pub fn new(b1: f64, b2: f64, b3: f64) -> Result<Self> {
        for b in [b1, b2, b3] {
            if !(b > -PI && b <= PI) || !b.is_finite() {
                return Err(SlagError::Parameter(format!(
                    "rotation angle {b} outside (-pi, pi]"
                )));
            }
        }
        Ok(RotationAngles { beta: [b1, b2, b3] })
    }

    /// Horizontal rotation (alpha, alpha, 0).
    pub fn horizontal(alpha: f64) -> Result<Self> {
        Self::new(alpha, alpha, 0.0)
    }

    /// The inversion rotation (pi/2, pi/2, pi/2).
    pub fn inversion() -> Self {
        RotationAngles {
            beta: [FRAC_PI_2; 3],
        }
    }

    pub fn total(&self) -> f64 {
        self.beta.iter().sum()
    }

    pub fn is_identity(&self) -> bool {
        self.beta.iter().all(|b| *b == 0.0)
    }
}

/// One evaluated point of a parameterized Lagrangian graph: positions and
/// first-order Jacobians with respect to the underlying parameter.
#[derive(Clone, Copy, Debug)]
pub struct GraphPoint {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub jx: Matrix3<f64>,
    pub jy: Matrix3<f64>,
}

type GraphEval = dyn Fn(&[f64; 3]) -> Result<GraphPoint> + Send + Sync;

/// An evaluable parameterization `x -> (x~(x), y~(x))` of a Lagrangian graph
/// with first-order Jacobians. Immutable and shareable.
#[derive(Clone)]
pub struct LagrangianMap {
    domain_radius: f64,
    eval: Arc<GraphEval>,
}

impl LagrangianMap {
    /// The graph `(x, Du(x))` of a potential given by gradient and Hessian
    /// evaluators.
    pub fn from_gradient_map<G>(domain_radius: f64, grad_hess: G) -> Self
    where
        G: Fn(&[f64; 3]) -> Result<(Vector3<f64>, Matrix3<f64>)> + Send + Sync + 'static,
    {
        LagrangianMap {
            domain_radius,
            eval: Arc::new(move |x: &[f64; 3]| {
                let (g, h) = grad_hess(x)?;
                Ok(GraphPoint {
                    x: Vector3::new(x[0], x[1], x[2]),
                    y: g,
                    jx: Matrix3::identity(),
                    jy: h,
                })
            }),
        }
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn eval(&self, x: &[f64; 3]) -> Result<GraphPoint> {
        (self.eval)(x)
    }
}

/// Rotate a graph per complex coordinate; Jacobians compose by the chain rule.
pub fn rotate_graph(src: &LagrangianMap, angles: RotationAngles) -> LagrangianMap {
    let base = src.eval.clone();
    let beta = angles.beta;
    LagrangianMap {
        domain_radius: src.domain_radius,
        eval: Arc::new(move |x: &[f64; 3]| {
            let g = base(x)?;
            let mut out = g;
            for j in 0..3 {
                let (s, c) = beta[j].sin_cos();
                out.x[j] = c * g.x[j] + s * g.y[j];
                out.y[j] = -s * g.x[j] + c * g.y[j];
                for col in 0..3 {
                    out.jx[(j, col)] = c * g.jx[(j, col)] + s * g.jy[(j, col)];
                    out.jy[(j, col)] = -s * g.jx[(j, col)] + c * g.jy[(j, col)];
                }
            }
            Ok(out)
        }),
    }
}

fn condition_estimate(m: &Matrix3<f64>, inv: &Matrix3<f64>) -> f64 {
    m.abs().max() * inv.abs().max()
}

/// Hessian of the rotated potential at the parameter point `x`:
/// `(dy~/dx)(dx~/dx)^{-1}`, symmetrized under the asymmetry gate.
pub fn pushforward_hessian(src: &LagrangianMap, x: &[f64; 3]) -> Result<SymMat3> {
    let g = src.eval(x)?;
    pushforward_from_point(&g, x)
}

pub fn pushforward_from_point(g: &GraphPoint, x: &[f64; 3]) -> Result<SymMat3> {
    let inv = g
        .jx
        .try_inverse()
        .ok_or(SlagError::GraphCondition(x[0], x[1], x[2]))?;
    if condition_estimate(&g.jx, &inv) > CONDITION_GATE {
        return Err(SlagError::GraphCondition(x[0], x[1], x[2]));
    }
    let d = g.jy * inv;
    let (sym, asym) = SymMat3::symmetrize(&d);
    let scale = d.abs().max().max(1.0);
    if asym > ASYMMETRY_GATE * scale {
        return Err(SlagError::GraphCondition(x[0], x[1], x[2]));
    }
    Ok(sym)
}

/// Sample point pairs in the domain ball and verify the distance expansion
/// `|x~(a) - x~(b)|^2 >= |a - b|^2 / 4`; reports the minimum observed ratio.
pub fn check_graph_condition(
    src: &LagrangianMap,
    n_pairs: u64,
    rng_seed: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("graph-condition");
    report.samples.seed = rng_seed;
    report.samples.points = n_pairs;
    report.samples.r_max = src.domain_radius;
    let mut rng = seeded_rng(rng_seed, 0);
    let mut min_ratio = f64::INFINITY;
    let mut worst = [0.0; 3];
    for _ in 0..n_pairs {
        let a = sample_in_ball(&mut rng, src.domain_radius);
        let b = sample_in_ball(&mut rng, src.domain_radius);
        let d2 = (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
        if d2 < 1e-24 {
            continue;
        }
        let ga = src.eval(&a)?;
        let gb = src.eval(&b)?;
        let im2 = (ga.x - gb.x).norm_squared();
        let ratio = im2 / d2;
        if ratio < min_ratio {
            min_ratio = ratio;
            worst = a;
        }
    }
    report.fit("min_ratio_squared", min_ratio);
    report.param("worst_pair_anchor", format!("{worst:?}"));
    report.margin("distance_expansion_quarter", min_ratio - 0.25);
    Ok(report)
}

/// Branch-corrected phase shift: returns the integer number of pi-wraps `w`
/// such that `phase_after = phase_before - total_angle + w pi`, together with
/// the residual of that identity.
pub fn phase_shift_residual(phase_before: f64, phase_after: f64, total_angle: f64) -> (i32, f64) {
    let raw = (phase_after - phase_before + total_angle) / PI;
    let w = raw.round();
    (w as i32, (raw - w) * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_sym(rng: &mut rand_chacha::ChaCha12Rng, scale: f64) -> SymMat3 {
        let mut v = [0.0; 6];
        for t in v.iter_mut() {
            *t = rng.gen_range(-scale..scale);
        }
        SymMat3::from_upper(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    #[test]
    fn sigma2_basics() {
        assert_eq!(sigma2(&SymMat3::diag(1.0, 1.0, 1.0)), 3.0);
        assert_eq!(sigma2(&SymMat3::diag(1.0, 1.0, 0.0)), 1.0);
    }

    #[test]
    fn sigma2_matches_hand_expansion_for_seed_hessian() {
        // D^2 h at (x1, x2, x3) for m = 2 gives -4 x3^2 - 4 rho^2.
        let mut rng = seeded_rng(3, 0);
        for _ in 0..50 {
            let x1: f64 = rng.gen_range(-0.5..0.5);
            let x2: f64 = rng.gen_range(-0.5..0.5);
            let x3: f64 = rng.gen_range(-0.5..0.5);
            let h = SymMat3::from_upper(2.0 * x3, 0.0, 2.0 * x1, -2.0 * x3, -2.0 * x2, 0.0);
            let expected = -4.0 * x3 * x3 - 4.0 * (x1 * x1 + x2 * x2);
            assert!((sigma2(&h) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma2_invariant_under_conjugation() {
        let mut rng = seeded_rng(11, 0);
        for _ in 0..40 {
            let h = random_sym(&mut rng, 2.0);
            // Random rotation from QR of a random matrix.
            let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let qr = a.qr();
            let q = qr.q();
            let conj = q * h.matrix() * q.transpose();
            let (hs, _) = SymMat3::symmetrize(&conj);
            assert!((sigma2(&h) - sigma2(&hs)).abs() < 1e-10 * (1.0 + sigma2(&h).abs()));
        }
    }

    #[test]
    fn eig_diag_cases_are_exact() {
        let e = eig3_sym(&SymMat3::diag(1.0, 1.0, 0.0));
        assert_eq!(e.lambda, [0.0, 1.0, 1.0]);
        assert!((e.phase - FRAC_PI_2).abs() < 1e-15);
        let e = eig3_sym(&SymMat3::diag(2.0, 2.0, -3.0));
        assert_eq!(e.lambda, [-3.0, 2.0, 2.0]);
    }

    #[test]
    fn eig_random_matches_charpoly() {
        let mut rng = seeded_rng(5, 0);
        for _ in 0..200 {
            let h = random_sym(&mut rng, 3.0);
            let e = eig3_sym(&h);
            let scale = h.matrix().abs().max().max(1.0);
            for l in e.lambda {
                assert!(
                    charpoly_residual(h.matrix(), l).abs() <= 1e-10 * scale.powi(3),
                    "charpoly residual too large"
                );
            }
            assert!(e.lambda[0] <= e.lambda[1] && e.lambda[1] <= e.lambda[2]);
            assert!(e.theta.iter().all(|t| t.abs() < FRAC_PI_2));
        }
    }

    #[test]
    fn eig_recovers_known_spectrum_under_conjugation() {
        let mut rng = seeded_rng(6, 0);
        for _ in 0..60 {
            let spec = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let q = a.qr().q();
            let d = Matrix3::from_diagonal(&Vector3::new(spec[0], spec[1], spec[2]));
            let (h, _) = SymMat3::symmetrize(&(q * d * q.transpose()));
            let mut want = spec;
            want.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let got = eig3_sym(&h).lambda;
            for i in 0..3 {
                assert!((got[i] - want[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn taylor_proxy_reference_cases() {
        assert_eq!(isolated_eig_taylor(&SymMat3::diag(1.0, 1.0, 0.0)).unwrap(), 0.0);
        // Single off-diagonal perturbation: exact lambda_min = (1 - sqrt(1 + 4 t^2)) / 2.
        for t in [0.01, 0.05, 0.1] {
            let h = SymMat3::from_upper(1.0, 0.0, t, 1.0, 0.0, 0.0);
            let proxy = isolated_eig_taylor(&h).unwrap();
            assert!((proxy + t * t).abs() < 1e-15);
            let exact = (1.0 - (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            assert!((proxy - exact).abs() < 2.0 * t.powi(4));
        }
        let too_far = SymMat3::diag(2.0, 1.0, 0.0);
        assert!(isolated_eig_taylor(&too_far).is_err());
    }

    fn quadratic_graph(a: f64, b: f64, c: f64) -> LagrangianMap {
        LagrangianMap::from_gradient_map(1.0, move |x| {
            Ok((
                Vector3::new(a * x[0], b * x[1], c * x[2]),
                Matrix3::from_diagonal(&Vector3::new(a, b, c)),
            ))
        })
    }

    #[test]
    fn identity_rotation_is_identity() {
        let g = quadratic_graph(1.0, 1.0, 0.0);
        let rot = rotate_graph(&g, RotationAngles::new(0.0, 0.0, 0.0).unwrap());
        let p = rot.eval(&[0.2, -0.1, 0.3]).unwrap();
        assert_eq!(p.x, Vector3::new(0.2, -0.1, 0.3));
        let h = pushforward_hessian(&rot, &[0.2, -0.1, 0.3]).unwrap();
        assert_eq!(h.matrix()[(0, 0)], 1.0);
        assert_eq!(h.matrix()[(2, 2)], 0.0);
    }

    #[test]
    fn horizontal_rotation_of_background_quadratic() {
        // u = |x'|^2 / 2 rotated by (alpha, alpha, 0) has pushforward Hessian
        // diag(tan(pi/4 - alpha), tan(pi/4 - alpha), 0) at the origin.
        for alpha in [0.0, 0.2, std::f64::consts::FRAC_PI_8] {
            let g = quadratic_graph(1.0, 1.0, 0.0);
            let rot = rotate_graph(&g, RotationAngles::horizontal(alpha).unwrap());
            let h = pushforward_hessian(&rot, &[0.0, 0.0, 0.0]).unwrap();
            let want = (std::f64::consts::FRAC_PI_4 - alpha).tan();
            assert!((h.matrix()[(0, 0)] - want).abs() < 1e-14);
            assert!((h.matrix()[(1, 1)] - want).abs() < 1e-14);
            assert!(h.matrix()[(2, 2)].abs() < 1e-14);
        }
    }

    #[test]
    fn phase_shift_identity_under_equal_angle_rotation() {
        // For angles (b, b, b) the phase drops by 3b modulo pi, exactly.
        let mut rng = seeded_rng(7, 0);
        for _ in 0..40 {
            let h = random_sym(&mut rng, 1.5);
            let beta = rng.gen_range(-0.6..0.6);
            let g = LagrangianMap::from_gradient_map(1.0, move |x| {
                let m = *h.matrix();
                Ok((m * Vector3::new(x[0], x[1], x[2]), m))
            });
            let rot = rotate_graph(&g, RotationAngles::new(beta, beta, beta).unwrap());
            let x = [0.1, 0.1, 0.1];
            let before = eig3_sym(&h).phase;
            match pushforward_hessian(&rot, &x) {
                Ok(after) => {
                    let (_, resid) =
                        phase_shift_residual(before, eig3_sym(&after).phase, 3.0 * beta);
                    assert!(resid.abs() < 1e-8, "phase identity residual {resid}");
                }
                Err(_) => {} // rotated plane vertical at this angle; no chart to compare
            }
        }
    }

    #[test]
    fn graph_condition_identity_and_rotated_quadratic() {
        let id = quadratic_graph(0.0, 0.0, 0.0);
        let r = check_graph_condition(&id, 500, 42).unwrap();
        assert!(r.pass);
        assert!((r.fitted_value("min_ratio_squared").unwrap() - 1.0).abs() < 1e-12);

        // u = |x'|^2/2 under alpha = pi/8: linear map with singular values
        // (cos a + sin a, cos a + sin a, 1): min ratio is exactly 1.
        let g = quadratic_graph(1.0, 1.0, 0.0);
        let rot = rotate_graph(&g, RotationAngles::horizontal(std::f64::consts::FRAC_PI_8).unwrap());
        let r = check_graph_condition(&rot, 2000, 42).unwrap();
        assert!(r.pass);
        assert!(r.fitted_value("min_ratio_squared").unwrap() >= 0.25);
    }

    #[test]
    fn pushforward_rejects_vertical_charts() {
        // Rotating the graph of u = |x|^2/2 by pi/2 in every coordinate sends
        // dx~/dx to the Hessian itself; at a degenerate Hessian the chart fails.
        let g = quadratic_graph(1.0, 1.0, 0.0);
        let rot = rotate_graph(&g, RotationAngles::inversion());
        match pushforward_hessian(&rot, &[0.1, 0.1, 0.1]) {
            Err(SlagError::GraphCondition(_, _, _)) => {}
            other => panic!("expected graph-condition failure, got {other:?}"),
        }
    }
}
