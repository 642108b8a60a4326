//! Convergence measures: the scaled linear-gap criterion over the norm ball
//! and its consequences (stationarity, convex optimality gap).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm_r, norm_r_star, OperatorSpace};
use crate::point::Point;

pub const DEFAULT_STATIONARITY_TOL: f64 = 1e-8;

/// A criterion evaluation together with the radius it was taken at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub value: f64,
    pub radius: f64,
}

/// Scaled gap criterion at a feasible point:
///
/// finite `R`:  `G_R(x) = (1/R) <g, x> + R*(g)` — the closed form of
/// `(1/R) max_{R(x') <= R} <g, x - x'>`, the maximum being attained at
/// `x' = -R lmo(g)`;
/// infinite `R`: the dual gradient norm `R*(g)`.
pub fn grad_criterion(space: OperatorSpace, x: &Point, g: &Point, radius: f64) -> Result<f64> {
    space.check_point(x)?;
    space.check_point(g)?;
    let dual = norm_r_star(space, g)?;
    if radius.is_finite() {
        let rx = norm_r(space, x)?;
        if rx > radius * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::Infeasible {
                norm: rx,
                radius,
            });
        }
        Ok(g.dot(x)? / radius + dual)
    } else {
        Ok(dual)
    }
}

/// True iff the criterion is at most `tol`. A zero criterion is equivalent
/// to `-g` lying in the normal cone of the ball at `x`.
pub fn stationarity_check(
    space: OperatorSpace,
    x: &Point,
    g: &Point,
    radius: f64,
    tol: f64,
) -> Result<bool> {
    Ok(grad_criterion(space, x, g, radius)? <= tol)
}

/// `R * G_R(x)`: for convex objectives this upper-bounds `f(x) - f*` over
/// the ball. Requires a finite radius.
pub fn convex_gap_bound(space: OperatorSpace, x: &Point, g: &Point, radius: f64) -> Result<f64> {
    if !radius.is_finite() {
        return Err(Error::InvalidParameter(
            "gap bound needs a finite radius".into(),
        ));
    }
    Ok(radius * grad_criterion(space, x, g, radius)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lmo, sample_ball_point, sample_gaussian_point};
    use crate::point::Point;
    use crate::problems::{f_eval, grad_true, make_benchmark, BenchmarkConfig};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(d: usize) -> OperatorSpace {
        OperatorSpace::Diagonal { dim: d }
    }

    #[test]
    fn zero_gradient_gives_zero() {
        let x = Point::vector([0.3, -0.2]);
        let g = Point::vector([0.0, 0.0]);
        assert_eq!(grad_criterion(diag(2), &x, &g, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn infinite_radius_is_dual_norm() {
        let x = Point::vector([5.0, 5.0]);
        let g = Point::vector([3.0, -4.0]);
        let v = grad_criterion(diag(2), &x, &g, f64::INFINITY).unwrap();
        assert_relative_eq!(v, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn at_origin_equals_dual_norm() {
        // with x = 0 the inner-product term vanishes; cross-check the closed
        // form against a brute-force max over sampled ball points at d=2
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = diag(2);
        let radius = 0.7;
        let g = Point::vector([1.3, -0.4]);
        let x = Point::vector([0.0, 0.0]);
        let closed = grad_criterion(sp, &x, &g, radius).unwrap();
        assert_relative_eq!(closed, 1.7, epsilon = 1e-12);
        let mut brute = f64::NEG_INFINITY;
        for _ in 0..20_000 {
            let xp = sample_ball_point(sp, radius, &mut rng);
            brute = brute.max(g.dot(&x.sub(&xp).unwrap()).unwrap() / radius);
        }
        // include the analytic extremal candidate -R lmo(g)
        let extremal = lmo(sp, &g).unwrap().scale(-radius);
        brute = brute.max(g.dot(&x.sub(&extremal).unwrap()).unwrap() / radius);
        assert!((closed - brute).abs() < 1e-3, "closed {closed} brute {brute}");
    }

    #[test]
    fn feasibility_enforced() {
        let x = Point::vector([2.0, 0.0]);
        let g = Point::vector([1.0, 0.0]);
        assert!(matches!(
            grad_criterion(diag(2), &x, &g, 1.0),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn nonnegative_on_feasible_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for sp in [
            OperatorSpace::Scalar { dim: 3 },
            diag(3),
            OperatorSpace::LeftMatrix { rows: 2, cols: 2 },
        ] {
            for _ in 0..1000 {
                let radius = rng.gen_range(0.1..3.0);
                let x = sample_ball_point(sp, radius, &mut rng);
                let g = sample_gaussian_point(sp, &mut rng);
                let v = grad_criterion(sp, &x, &g, radius).unwrap();
                assert!(v >= -1e-12, "criterion {v} negative");
            }
        }
    }

    #[test]
    fn continuity_in_radius() {
        // for fixed feasible x, G_R -> G_inf monotonically as R grows
        let sp = diag(3);
        let x = Point::vector([0.5, -0.2, 0.9]);
        let g = Point::vector([1.0, 2.0, -0.5]);
        let ginf = grad_criterion(sp, &x, &g, f64::INFINITY).unwrap();
        let mut prev_gap = f64::INFINITY;
        for exp in 1..=6 {
            let radius = 10f64.powi(exp);
            let v = grad_criterion(sp, &x, &g, radius).unwrap();
            let gap = (v - ginf).abs();
            assert!(gap <= prev_gap + 1e-15);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-5);
    }

    #[test]
    fn stationarity_at_interior_optimum() {
        let mut cfg = BenchmarkConfig::named("dense-diag");
        cfg.dim = Some(4);
        let p = make_benchmark(&cfg).unwrap();
        let g = grad_true(&p, &p.x_opt).unwrap();
        assert!(stationarity_check(p.space, &p.x_opt, &g, p.radius, 1e-8).unwrap());
        // a random non-stationary point fails at tol 1e-3
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = sample_ball_point(p.space, p.radius, &mut rng);
        let g = grad_true(&p, &x).unwrap();
        assert!(!stationarity_check(p.space, &x, &g, p.radius, 1e-3).unwrap());
    }

    #[test]
    fn boundary_pinned_stationarity_1d() {
        // 1-D quadratic with minimizer outside the ball: the constrained
        // solution sits on the boundary and the criterion vanishes there.
        // f(x) = 1/2 (x - 2)^2, ball |x| <= 1, solution x = 1, g = -1.
        let sp = diag(1);
        let x = Point::vector([1.0]);
        let g = Point::vector([-1.0]);
        let v = grad_criterion(sp, &x, &g, 1.0).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gap_bound_dominates_on_convex_quadratic() {
        let mut cfg = BenchmarkConfig::named("sparse-diag");
        cfg.dim = Some(3);
        cfg.delta = Some(0.2);
        let p = make_benchmark(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = sample_ball_point(p.space, p.radius, &mut rng);
            let g = grad_true(&p, &x).unwrap();
            let bound = convex_gap_bound(p.space, &x, &g, p.radius).unwrap();
            let gap = f_eval(&p, &x).unwrap() - p.f_opt;
            assert!(
                bound >= gap - 1e-10,
                "bound {bound} below gap {gap}"
            );
        }
    }

    #[test]
    fn gap_bound_rejects_infinite_radius() {
        let x = Point::vector([0.0]);
        let g = Point::vector([1.0]);
        assert!(convex_gap_bound(diag(1), &x, &g, f64::INFINITY).is_err());
    }
}
