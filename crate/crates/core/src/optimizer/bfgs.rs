//! Dense BFGS over a 4-vector with Armijo backtracking.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Re-association rounds per frame.
    pub max_outer_iterations: usize,
    /// Outer loop stops once a round improves the loss by less than this.
    pub outer_tolerance: f64,
    /// BFGS iterations per inner solve.
    pub max_inner_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 10,
            outer_tolerance: 1e-6,
            max_inner_iterations: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: [f64; 4],
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// A non-finite loss was met and could not be stepped around.
    pub non_finite: bool,
}

fn is_finite(v: f64, g: &Vector4<f64>) -> bool {
    v.is_finite() && g.iter().all(|x| x.is_finite())
}

/// Minimizes `f`, which returns the value and gradient at a point.
///
/// Stops when the gradient norm falls to 1e-6, the line search can no
/// longer make progress, or after `max_iterations`. The returned value never
/// exceeds the value at `init`.
pub fn minimize<F>(f: F, init: [f64; 4], max_iterations: usize) -> Minimum
where
    F: Fn(&[f64; 4]) -> (f64, [f64; 4]),
{
    let eval = |x: &Vector4<f64>| {
        let (v, g) = f(&[x[0], x[1], x[2], x[3]]);
        (v, Vector4::from(g))
    };
    let mut x = Vector4::from(init);
    let (mut fx, mut g) = eval(&x);
    let initial_value = fx;
    let mut out = Minimum {
        x: init,
        value: fx,
        initial_value,
        iterations: 0,
        gradient_norm: g.norm(),
        non_finite: false,
    };
    if !is_finite(fx, &g) {
        out.non_finite = true;
        return out;
    }

    let mut h = Matrix4::<f64>::identity();
    let mut first_step = true;
    for iter in 0..max_iterations {
        if g.norm() <= GRADIENT_TOLERANCE {
            break;
        }
        let mut p = -(h * g);
        let mut slope = g.dot(&p);
        if slope >= 0.0 {
            h = Matrix4::identity();
            p = -g;
            slope = g.dot(&p);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut saw_non_finite = false;
        for _ in 0..MAX_BACKTRACKS {
            let xn = x + p * alpha;
            let (fn_, gn) = eval(&xn);
            if !is_finite(fn_, &gn) {
                saw_non_finite = true;
            } else if fn_ <= fx + ARMIJO_C1 * alpha * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            out.non_finite |= saw_non_finite;
            break;
        };

        let s = xn - x;
        let y = gn - g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if first_step {
                h *= sy / y.dot(&y);
                first_step = false;
            }
            let rho = 1.0 / sy;
            let i = Matrix4::<f64>::identity();
            h = (i - s * y.transpose() * rho) * h * (i - y * s.transpose() * rho)
                + s * s.transpose() * rho;
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        out.iterations = iter + 1;
        if improvement == 0.0 && s.norm() == 0.0 {
            break;
        }
    }
    out.x = [x[0], x[1], x[2], x[3]];
    out.value = fx;
    out.gradient_norm = g.norm();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic() {
        let c = [1.5, -2.0, 0.25, 3.0];
        let m = minimize(
            |x| {
                let d: Vec<f64> = (0..4).map(|i| x[i] - c[i]).collect();
                (
                    d.iter().map(|v| v * v).sum(),
                    [2.0 * d[0], 2.0 * d[1], 2.0 * d[2], 2.0 * d[3]],
                )
            },
            [0.0; 4],
            50,
        );
        for i in 0..4 {
            assert!((m.x[i] - c[i]).abs() < 1e-8, "{:?}", m.x);
        }
    }

    fn rosenbrock(x: &[f64; 4]) -> (f64, [f64; 4]) {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2) + x[2] * x[2] + x[3] * x[3];
        let ga = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        let gb = 200.0 * (b - a * a);
        (v, [ga, gb, 2.0 * x[2], 2.0 * x[3]])
    }

    #[test]
    fn rosenbrock_padded() {
        let m = minimize(rosenbrock, [-1.2, 1.0, 0.0, 0.0], 500);
        let target = [1.0, 1.0, 0.0, 0.0];
        for i in 0..4 {
            assert!((m.x[i] - target[i]).abs() < 1e-4, "{:?}", m.x);
        }
        assert!(m.value <= m.initial_value);
    }

    #[test]
    fn stationary_start_stays() {
        let m = minimize(
            |x| (x.iter().map(|v| v * v).sum(), x.map(|v| 2.0 * v)),
            [0.0; 4],
            50,
        );
        assert_eq!(m.x, [0.0; 4]);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn non_finite_region_is_avoided() {
        // Loss is NaN for x0 > 1; minimum of the finite part sits at the wall.
        let m = minimize(
            |x| {
                if x[0] > 1.0 {
                    (f64::NAN, [f64::NAN; 4])
                } else {
                    ((x[0] - 3.0).powi(2), [2.0 * (x[0] - 3.0), 0.0, 0.0, 0.0])
                }
            },
            [0.0; 4],
            50,
        );
        assert!(m.value.is_finite());
        assert!(m.value <= m.initial_value);
        assert!(m.x[0] <= 1.0);
    }
}
