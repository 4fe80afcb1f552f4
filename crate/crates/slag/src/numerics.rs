//! Shared numerical utilities: seeded RNG streams, sampling, log-log fits,
//! Gauss-Legendre rules, adaptive line quadrature, and damped Newton solvers.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Result, SlagError};

/// Deterministic RNG: one base seed, one stream index per independent worker.
/// Results are reproducible regardless of thread count because every work item
/// owns its stream.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_unit_vector(rng: &mut ChaCha12Rng) -> [f64; 3] {
    // Marsaglia rejection on the cube.
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n2: f64 = v.iter().map(|t| t * t).sum();
        if n2 > 1e-12 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

pub fn sample_in_ball(rng: &mut ChaCha12Rng, radius: f64) -> [f64; 3] {
    let dir = sample_unit_vector(rng);
    let r = radius * rng.gen_range(0.0f64..1.0).cbrt();
    [dir[0] * r, dir[1] * r, dir[2] * r]
}

/// Uniform-in-volume sample of the annulus `r_lo <= |x| <= r_hi`.
pub fn sample_in_annulus(rng: &mut ChaCha12Rng, r_lo: f64, r_hi: f64) -> [f64; 3] {
    let dir = sample_unit_vector(rng);
    let u: f64 = rng.gen_range(0.0..1.0);
    let r = (r_lo.powi(3) + u * (r_hi.powi(3) - r_lo.powi(3))).cbrt();
    [dir[0] * r, dir[1] * r, dir[2] * r]
}

/// Deterministic quasi-uniform directions on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Ordinary least squares line fit.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

/// log-log power fit `y ~ C x^p`; returns the fitted exponent as slope.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> LineFit {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl_on_interval(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive scalar quadrature on a segment: GL-8 versus GL-16 per panel,
/// halving until the panel discrepancy is below the shared tolerance.
pub fn adaptive_segment_quad(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<f64> {
    let (n8, w8) = gauss_legendre(8);
    let (n16, w16) = gauss_legendre(16);
    let mut total = 0.0;
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = gl_on_interval(&mut f, lo, hi, &n8, &w8);
        let fine = gl_on_interval(&mut f, lo, hi, &n16, &w16);
        let scale = (hi - lo) / (b - a).abs().max(f64::MIN_POSITIVE);
        if (fine - coarse).abs() <= abs_tol * scale.max(1e-4) || (hi - lo).abs() < 1e-14 {
            total += fine;
        } else {
            if depth > 48 {
                return Err(SlagError::QuadratureTolerance(format!(
                    "segment quadrature did not converge on [{lo}, {hi}]"
                )));
            }
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    Ok(total)
}

/// Failure modes of the damped Newton helpers.
#[derive(Clone, Copy, Debug)]
pub enum NewtonFailure {
    SingularJacobian,
    Stagnated,
    IterationLimit,
}

const NEWTON_MAX_HALVINGS: u32 = 60;

/// Damped Newton for a 2x2 system. A step is accepted once the residual norm
/// halves; otherwise the step is halved, up to 60 times.
pub fn newton2_damped(
    mut f: impl FnMut(&Vector2<f64>) -> (Vector2<f64>, Matrix2<f64>),
    x0: Vector2<f64>,
    tol: f64,
    max_iter: u32,
) -> std::result::Result<Vector2<f64>, NewtonFailure> {
    let mut x = x0;
    let (mut g, mut jac) = f(&x);
    for _ in 0..max_iter {
        let gn = g.norm();
        if gn <= tol {
            return Ok(x);
        }
        let step = jac
            .try_inverse()
            .map(|inv| -(inv * g))
            .ok_or(NewtonFailure::SingularJacobian)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..NEWTON_MAX_HALVINGS {
            let cand = x + step * lambda;
            let (gc, jc) = f(&cand);
            if gc.norm() <= 0.5 * gn || gc.norm() <= tol {
                x = cand;
                g = gc;
                jac = jc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(NewtonFailure::Stagnated);
        }
    }
    if g.norm() <= tol {
        Ok(x)
    } else {
        Err(NewtonFailure::IterationLimit)
    }
}

/// Damped Newton for a 3x3 system with the same acceptance rule.
pub fn newton3_damped(
    mut f: impl FnMut(&Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>),
    x0: Vector3<f64>,
    tol: f64,
    max_iter: u32,
) -> std::result::Result<Vector3<f64>, NewtonFailure> {
    let mut x = x0;
    let (mut g, mut jac) = f(&x);
    for _ in 0..max_iter {
        let gn = g.norm();
        if gn <= tol {
            return Ok(x);
        }
        let step = jac
            .try_inverse()
            .map(|inv| -(inv * g))
            .ok_or(NewtonFailure::SingularJacobian)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..NEWTON_MAX_HALVINGS {
            let cand = x + step * lambda;
            let (gc, jc) = f(&cand);
            if gc.norm() <= (1.0 - 0.25 * lambda) * gn || gc.norm() <= tol {
                x = cand;
                g = gc;
                jac = jc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(NewtonFailure::Stagnated);
        }
    }
    if g.norm() <= tol {
        Ok(x)
    } else {
        Err(NewtonFailure::IterationLimit)
    }
}

/// Compensated accumulator for reproducible long sums.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (n, w) = gauss_legendre(8);
        // integral of x^14 over [-1, 1] = 2/15 (degree 14 <= 2*8 - 1).
        let acc: f64 = n.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((acc - 2.0 / 15.0).abs() < 1e-14);
        let acc: f64 = n.iter().zip(&w).map(|(x, w)| w * x.powi(3)).sum();
        assert!(acc.abs() < 1e-15);
    }

    #[test]
    fn adaptive_quad_hits_tolerance() {
        // integral of 1/sqrt(t) on (0, 1] = 2, mildly singular at the left end.
        let v = adaptive_segment_quad(|t| 1.0 / t.max(1e-300).sqrt(), 1e-12, 1.0, 1e-10).unwrap();
        assert!((v - (2.0 - 2e-6)).abs() < 1e-5);
        let v = adaptive_segment_quad(|t| (3.0 * t * t).sin(), 0.0, 2.0, 1e-12).unwrap();
        // Reference from a fine fixed rule.
        let (n, w) = gauss_legendre(64);
        let mut reference = 0.0;
        for (x, wt) in n.iter().zip(&w) {
            let t = 1.0 + x;
            reference += wt * (3.0 * t * t).sin();
        }
        assert!((v - reference).abs() < 1e-11);
    }

    #[test]
    fn newton2_solves_elliptic_system() {
        // grad of f(x) = x1^2 + x1 x2 + x2^2 - (1, 2) . x
        let sol = newton2_damped(
            |x| {
                let g = Vector2::new(2.0 * x[0] + x[1] - 1.0, x[0] + 2.0 * x[1] - 2.0);
                let j = Matrix2::new(2.0, 1.0, 1.0, 2.0);
                (g, j)
            },
            Vector2::new(5.0, -7.0),
            1e-13,
            50,
        )
        .unwrap();
        assert!((sol[0] - 0.0).abs() < 1e-12);
        assert!((sol[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fibonacci_sphere_is_unit_and_spread() {
        let dirs = fibonacci_sphere(64);
        for d in &dirs {
            let n: f64 = d.iter().map(|t| t * t).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let mean: [f64; 3] = dirs.iter().fold([0.0; 3], |mut acc, d| {
            for i in 0..3 {
                acc[i] += d[i] / 64.0;
            }
            acc
        });
        assert!(mean.iter().all(|c| c.abs() < 0.05));
    }

    #[test]
    fn loglog_fit_recovers_exponent() {
        let xs = log_spaced(1e-3, 1e-1, 12);
        let ys: Vec<f64> = xs.iter().map(|x| 3.5 * x.powf(1.75)).collect();
        let fit = fit_loglog(&xs, &ys);
        assert!((fit.slope - 1.75).abs() < 1e-12);
        assert!((fit.intercept.exp() - 3.5).abs() < 1e-10);
    }

    #[test]
    fn rng_streams_are_stable_and_independent() {
        let a: Vec<u64> = {
            let mut r = seeded_rng(42, 7);
            (0..4).map(|_| r.gen()).collect()
        };
        let b: Vec<u64> = {
            let mut r = seeded_rng(42, 7);
            (0..4).map(|_| r.gen()).collect()
        };
        let c: Vec<u64> = {
            let mut r = seeded_rng(42, 8);
            (0..4).map(|_| r.gen()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
