//! The uniform currency of the pipeline: an evaluable triple `(u, Du, D^2 u)`
//! behind a shared handle, backed by a series, a rotated chart, an inverse
//! gradient map, or a rescaling of one of those.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::{Result, SlagError};
use crate::geometry::{eig3_sym, LagrangianMap, RotationAngles, SymMat3};
use crate::mpoly::{FloatPoly, TruncatedSeries};
use crate::numerics::{newton2_damped, seeded_rng};
use crate::report::VerificationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Series,
    Rotated,
    InverseGraph,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Series => write!(f, "series"),
            Provenance::Rotated => write!(f, "rotated"),
            Provenance::InverseGraph => write!(f, "inverse-graph"),
        }
    }
}

/// Behavior of a potential with evaluable value, gradient, and Hessian.
pub trait SolutionSurface: Send + Sync {
    fn value(&self, x: &[f64; 3]) -> Result<f64>;
    fn grad(&self, x: &[f64; 3]) -> Result<Vector3<f64>>;
    fn hessian(&self, x: &[f64; 3]) -> Result<SymMat3>;

    fn grad_hess(&self, x: &[f64; 3]) -> Result<(Vector3<f64>, SymMat3)> {
        Ok((self.grad(x)?, self.hessian(x)?))
    }

    fn valid_radius(&self) -> f64;
    fn provenance(&self) -> Provenance;
}

/// Shared, immutable handle to a solution surface.
#[derive(Clone)]
pub struct SolutionHandle(Arc<dyn SolutionSurface>);

impl SolutionHandle {
    pub fn from_surface(surface: Arc<dyn SolutionSurface>) -> Self {
        SolutionHandle(surface)
    }

    /// Series-backed handle; compiles the float evaluation layer once.
    pub fn from_series(series: &TruncatedSeries, radius: f64) -> Self {
        SolutionHandle(Arc::new(SeriesSolution::new(series, radius)))
    }

    pub fn value(&self, x: &[f64; 3]) -> Result<f64> {
        self.0.value(x)
    }

    pub fn grad(&self, x: &[f64; 3]) -> Result<Vector3<f64>> {
        self.0.grad(x)
    }

    pub fn hessian(&self, x: &[f64; 3]) -> Result<SymMat3> {
        self.0.hessian(x)
    }

    pub fn grad_hess(&self, x: &[f64; 3]) -> Result<(Vector3<f64>, SymMat3)> {
        self.0.grad_hess(x)
    }

    pub fn valid_radius(&self) -> f64 {
        self.0.valid_radius()
    }

    pub fn provenance(&self) -> Provenance {
        self.0.provenance()
    }

    pub fn phase_at(&self, x: &[f64; 3]) -> Result<f64> {
        Ok(eig3_sym(&self.hessian(x)?).phase)
    }

    /// The gradient graph `(x, Du(x))` as a parameterized Lagrangian map.
    pub fn graph(&self) -> LagrangianMap {
        let inner = self.0.clone();
        LagrangianMap::from_gradient_map(self.valid_radius(), move |x| {
            let (g, h) = inner.grad_hess(x)?;
            Ok((g, *h.matrix()))
        })
    }

    /// Parabolic rescaling `x -> s * u(r x) / r^2` (s = -1 when negated);
    /// the Hessian evaluator is exactly `s * D^2 u(r x)`.
    pub fn rescaled(&self, r: f64, negate: bool) -> Result<SolutionHandle> {
        if !(r > 0.0) || r > self.valid_radius() {
            return Err(SlagError::Parameter(format!(
                "rescale radius {r} outside (0, {}]",
                self.valid_radius()
            )));
        }
        Ok(SolutionHandle(Arc::new(RescaledSolution {
            base: self.0.clone(),
            r,
            sign: if negate { -1.0 } else { 1.0 },
        })))
    }

    /// Finite-difference consistency of the evaluator triple at random
    /// interior points. Series-backed handles are checked at O(h^2); handles
    /// whose values come from quadrature or iterative inversion carry that
    /// noise through the difference quotient, so they get a relative gate.
    pub fn fd_consistency(&self, n_points: u32, seed: u64) -> Result<VerificationReport> {
        let mut report = VerificationReport::new("fd-consistency");
        report.samples.seed = seed;
        report.samples.points = n_points as u64;
        let tight = self.provenance() == Provenance::Series;
        // Handles whose gradients come from iterative inversion carry that
        // noise into difference quotients: the Hessian check needs a larger
        // step to stay above the noise, while the value-based gradient check
        // can keep a small one (the potential transport is noise-immune).
        // The relative gates still catch any wrong evaluator wiring.
        let (h_grad, h_hess) = if tight {
            (1e-5, 1e-5)
        } else {
            (1e-4 * self.valid_radius(), 1e-2 * self.valid_radius())
        };
        let tol_grad = if tight { 1e-8 } else { 1e-3 };
        let tol_hess = if tight { 1e-6 } else { 3e-2 };
        let mut rng = seeded_rng(seed, 0);
        let mut worst_grad = 0.0f64;
        let mut worst_hess = 0.0f64;
        let mut hess_checked = 0u32;
        for _ in 0..n_points {
            let x = crate::numerics::sample_in_annulus(
                &mut rng,
                0.25 * self.valid_radius(),
                0.5 * self.valid_radius(),
            );
            let g = self.grad(&x)?;
            let hess = self.hessian(&x)?;
            let hscale = hess.matrix().abs().max().max(0.5);
            // Keep the finite-difference step inside the region where the
            // Hessian itself barely changes: a step moving the gradient by
            // more than ~2% of its size would difference across the blow-up
            // profile instead of through it. Points too stiff to offer any
            // usable step are skipped; most of the annulus qualifies.
            let h_loc = h_hess.min(0.005 * g.norm() / hscale);
            let check_hess = h_loc > 1e-8 * self.valid_radius();
            for axis in 0..3 {
                let mut hi = x;
                let mut lo = x;
                hi[axis] += h_grad;
                lo[axis] -= h_grad;
                let fd_u = (self.value(&hi)? - self.value(&lo)?) / (2.0 * h_grad);
                let scale = g.norm().max(0.05);
                worst_grad = worst_grad.max((fd_u - g[axis]).abs() / scale);
                if check_hess {
                    let mut hi = x;
                    let mut lo = x;
                    hi[axis] += h_loc;
                    lo[axis] -= h_loc;
                    let fd_g = (self.grad(&hi)? - self.grad(&lo)?) / (2.0 * h_loc);
                    for row in 0..3 {
                        worst_hess = worst_hess
                            .max((fd_g[row] - hess.matrix()[(row, axis)]).abs() / hscale);
                    }
                }
            }
            hess_checked += u32::from(check_hess);
        }
        report.fit("hess_points_checked", f64::from(hess_checked));
        report.require("hess_coverage", hess_checked * 3 >= n_points);
        report.fit("worst_grad_fd", worst_grad);
        report.fit("worst_hess_fd", worst_hess);
        report.margin("grad_matches_fd", tol_grad - worst_grad);
        report.margin("hess_matches_fd", tol_hess - worst_hess);
        report.param("provenance", self.provenance());
        Ok(report)
    }
}

// --- series backing -----------------------------------------------------------

pub struct SeriesSolution {
    series: TruncatedSeries,
    u: FloatPoly,
    du: [FloatPoly; 3],
    d2u: [FloatPoly; 6],
    radius: f64,
}

const HESS_INDEX: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl SeriesSolution {
    pub fn new(series: &TruncatedSeries, radius: f64) -> Self {
        use crate::mpoly::Axis;
        let d = |a: Axis| series.diff(a);
        let du = [d(Axis::X1), d(Axis::X2), d(Axis::X3)];
        let mut d2u = Vec::with_capacity(6);
        for (r, c) in HESS_INDEX {
            let axis_r = Axis::from_index(r).unwrap();
            let axis_c = Axis::from_index(c).unwrap();
            d2u.push(series.diff(axis_r).diff(axis_c).to_float());
        }
        SeriesSolution {
            series: series.clone(),
            u: series.to_float(),
            du: [du[0].to_float(), du[1].to_float(), du[2].to_float()],
            d2u: d2u.try_into().unwrap(),
            radius,
        }
    }

    pub fn series(&self) -> &TruncatedSeries {
        &self.series
    }

    pub fn grad_vec(&self, x: &[f64; 3]) -> Vector3<f64> {
        Vector3::new(self.du[0].eval(x), self.du[1].eval(x), self.du[2].eval(x))
    }

    pub fn hess_mat(&self, x: &[f64; 3]) -> SymMat3 {
        let v: Vec<f64> = self.d2u.iter().map(|p| p.eval(x)).collect();
        SymMat3::from_upper(v[0], v[1], v[2], v[3], v[4], v[5])
    }
}

impl SolutionSurface for SeriesSolution {
    fn value(&self, x: &[f64; 3]) -> Result<f64> {
        Ok(self.u.eval(x))
    }

    fn grad(&self, x: &[f64; 3]) -> Result<Vector3<f64>> {
        Ok(self.grad_vec(x))
    }

    fn hessian(&self, x: &[f64; 3]) -> Result<SymMat3> {
        Ok(self.hess_mat(x))
    }

    fn valid_radius(&self) -> f64 {
        self.radius
    }

    fn provenance(&self) -> Provenance {
        Provenance::Series
    }
}

// --- rotated backing ------------------------------------------------------------

/// The potential of a horizontally rotated graph, as a function over the
/// rotated coordinates. The chart `x' -> x' cos a + D'u(x', x3) sin a` is
/// inverted by a damped 2x2 Newton solve; the third coordinate is untouched.
pub struct RotatedSolution {
    base: Arc<SeriesSolution>,
    alpha: f64,
    map: LagrangianMap,
    radius: f64,
    base_radius: f64,
}

impl RotatedSolution {
    pub fn new(base: Arc<SeriesSolution>, alpha: f64, radius: f64) -> Result<Self> {
        let angles = RotationAngles::horizontal(alpha)?;
        let b = base.clone();
        let base_map = LagrangianMap::from_gradient_map(base.radius, move |x| {
            Ok((b.grad_vec(x), *b.hess_mat(x).matrix()))
        });
        let map = crate::geometry::rotate_graph(&base_map, angles);
        Ok(RotatedSolution {
            base_radius: base.radius,
            base,
            alpha,
            map,
            radius,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn map(&self) -> &LagrangianMap {
        &self.map
    }

    /// Invert the chart: find the parameter point x with x~(x) = target.
    pub fn chart_preimage(&self, target: &[f64; 3]) -> Result<[f64; 3]> {
        if self.alpha == 0.0 {
            return Ok(*target);
        }
        let x3 = target[2];
        let (sin_a, cos_a) = self.alpha.sin_cos();
        let base = self.base.clone();
        let start = Vector2::new(target[0] / (cos_a + sin_a), target[1] / (cos_a + sin_a));
        let sol = newton2_damped(
            |xp: &Vector2<f64>| {
                let x = [xp[0], xp[1], x3];
                let g = base.grad_vec(&x);
                let h = base.hess_mat(&x);
                let f = Vector2::new(
                    xp[0] * cos_a + g[0] * sin_a - target[0],
                    xp[1] * cos_a + g[1] * sin_a - target[1],
                );
                let hm = h.matrix();
                let j = Matrix2::new(
                    cos_a + sin_a * hm[(0, 0)],
                    sin_a * hm[(0, 1)],
                    sin_a * hm[(1, 0)],
                    cos_a + sin_a * hm[(1, 1)],
                );
                (f, j)
            },
            start,
            1e-13,
            80,
        )
        .map_err(|_| SlagError::GraphCondition(target[0], target[1], target[2]))?;
        let x = [sol[0], sol[1], x3];
        let r2: f64 = x.iter().map(|t| t * t).sum();
        if r2.sqrt() > self.base_radius * 1.05 {
            return Err(SlagError::Domain(format!(
                "chart preimage left the verified ball at {target:?}"
            )));
        }
        Ok(x)
    }
}

impl SolutionSurface for RotatedSolution {
    fn value(&self, xt: &[f64; 3]) -> Result<f64> {
        // Transport of the potential along the rotation: integrating
        // y~ . dx~ on the graph gives, per rotated coordinate,
        // u~ = u - sin^2(a) x_j y_j + sin(a) cos(a) (y_j^2 - x_j^2)/2,
        // normalized by u~(0) = 0.
        let x = self.chart_preimage(xt)?;
        let u = self.base.value(&x)?;
        let y = self.base.grad_vec(&x);
        let (s, c) = self.alpha.sin_cos();
        let mut acc = u;
        for j in 0..2 {
            acc += -s * s * x[j] * y[j] + s * c * (y[j] * y[j] - x[j] * x[j]) / 2.0;
        }
        Ok(acc)
    }

    fn grad(&self, xt: &[f64; 3]) -> Result<Vector3<f64>> {
        let x = self.chart_preimage(xt)?;
        Ok(self.map.eval(&x)?.y)
    }

    fn hessian(&self, xt: &[f64; 3]) -> Result<SymMat3> {
        let x = self.chart_preimage(xt)?;
        crate::geometry::pushforward_hessian(&self.map, &x)
    }

    fn grad_hess(&self, xt: &[f64; 3]) -> Result<(Vector3<f64>, SymMat3)> {
        let x = self.chart_preimage(xt)?;
        let g = self.map.eval(&x)?;
        let h = crate::geometry::pushforward_from_point(&g, &x)?;
        Ok((g.y, h))
    }

    fn valid_radius(&self) -> f64 {
        self.radius
    }

    fn provenance(&self) -> Provenance {
        Provenance::Rotated
    }
}

// --- rescaled backing -----------------------------------------------------------

struct RescaledSolution {
    base: Arc<dyn SolutionSurface>,
    r: f64,
    sign: f64,
}

impl SolutionSurface for RescaledSolution {
    fn value(&self, x: &[f64; 3]) -> Result<f64> {
        let y = [x[0] * self.r, x[1] * self.r, x[2] * self.r];
        Ok(self.sign * self.base.value(&y)? / (self.r * self.r))
    }

    fn grad(&self, x: &[f64; 3]) -> Result<Vector3<f64>> {
        let y = [x[0] * self.r, x[1] * self.r, x[2] * self.r];
        Ok(self.base.grad(&y)? * (self.sign / self.r))
    }

    fn hessian(&self, x: &[f64; 3]) -> Result<SymMat3> {
        let y = [x[0] * self.r, x[1] * self.r, x[2] * self.r];
        let h = self.base.hessian(&y)?;
        let m = h.matrix() * self.sign;
        Ok(SymMat3::symmetrize(&m).0)
    }

    fn valid_radius(&self) -> f64 {
        self.base.valid_radius() / self.r
    }

    fn provenance(&self) -> Provenance {
        self.base.provenance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpoly::{rat, Axis};

    fn background(cap: u32) -> TruncatedSeries {
        let x1 = TruncatedSeries::variable(Axis::X1, cap);
        let x2 = TruncatedSeries::variable(Axis::X2, cap);
        x1.mul(&x1).add(&x2.mul(&x2)).scale(&rat(1, 2))
    }

    #[test]
    fn series_handle_evaluates_triple() {
        let h = SolutionHandle::from_series(&background(4), 1.0);
        let x = [0.3, -0.2, 0.5];
        assert!((h.value(&x).unwrap() - 0.5 * (0.09 + 0.04)).abs() < 1e-15);
        assert_eq!(h.grad(&x).unwrap(), Vector3::new(0.3, -0.2, 0.0));
        assert_eq!(h.hessian(&x).unwrap(), SymMat3::diag(1.0, 1.0, 0.0));
        assert!((h.phase_at(&x).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn rescale_identity_and_quadratic_invariance() {
        let h = SolutionHandle::from_series(&background(4), 1.0);
        let same = h.rescaled(1.0, false).unwrap();
        let x = [0.2, 0.1, -0.3];
        assert_eq!(h.value(&x).unwrap(), same.value(&x).unwrap());
        // Quadratics are invariant under parabolic scaling.
        let scaled = h.rescaled(0.5, false).unwrap();
        assert!((scaled.value(&x).unwrap() - h.value(&x).unwrap()).abs() < 1e-15);
        assert_eq!(scaled.hessian(&x).unwrap(), h.hessian(&x).unwrap());
        // Phase is preserved by rescaling.
        assert!((scaled.phase_at(&x).unwrap() - h.phase_at(&x).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn rescale_rejects_bad_radii() {
        let h = SolutionHandle::from_series(&background(4), 0.5);
        assert!(h.rescaled(0.7, false).is_err());
        assert!(h.rescaled(0.0, false).is_err());
    }

    #[test]
    fn negation_flips_phase_sign() {
        let cap = 6;
        let series = background(cap).add(
            &TruncatedSeries::variable(Axis::X3, cap)
                .pow(2)
                .scale(&rat(-1, 6)),
        );
        let h = SolutionHandle::from_series(&series, 1.0);
        let n = h.rescaled(1.0, true).unwrap();
        let x = [0.1, 0.2, 0.05];
        assert!((h.phase_at(&x).unwrap() + n.phase_at(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fd_consistency_series() {
        let cap = 6;
        let series = background(cap)
            .add(&crate::seed::re_z_pow(2, cap).mul(&TruncatedSeries::variable(Axis::X3, cap)));
        let h = SolutionHandle::from_series(&series, 0.8);
        let rep = h.fd_consistency(50, 9).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn rotated_chart_inverts_and_transports() {
        // Base u = |x'|^2/2 rotated by alpha: closed-form linear chart.
        let base = Arc::new(SeriesSolution::new(&background(6), 1.0));
        let alpha = 0.3;
        let rot = RotatedSolution::new(base, alpha, 0.5).unwrap();
        let x = [0.1, -0.2, 0.3];
        let xt = [
            x[0] * alpha.cos() + x[0] * alpha.sin(),
            x[1] * alpha.cos() + x[1] * alpha.sin(),
            x[2],
        ];
        let back = rot.chart_preimage(&xt).unwrap();
        for i in 0..3 {
            assert!((back[i] - x[i]).abs() < 1e-12);
        }
        // Pushforward Hessian has the closed-form eigenvalue tan(pi/4 - alpha).
        let h = rot.hessian(&xt).unwrap();
        let want = (std::f64::consts::FRAC_PI_4 - alpha).tan();
        assert!((h.matrix()[(0, 0)] - want).abs() < 1e-12);
        // FD consistency of the transported value against the chart gradient.
        let handle = SolutionHandle::from_surface(Arc::new(
            RotatedSolution::new(Arc::new(SeriesSolution::new(&background(6), 1.0)), alpha, 0.5)
                .unwrap(),
        ));
        let rep = handle.fd_consistency(25, 4).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
