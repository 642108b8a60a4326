//! Synthetic quadratic objectives with known structural certificates and a
//! stochastic gradient oracle whose noise saturates the variance bound.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    norm_r, sample_gaussian_point, OperatorSpace, Payload, StructuredOperator,
};
use crate::point::Point;

/// Distribution of the i.i.d. entries driving the gradient noise. Both have
/// unit variance, so the calibration constant is the same.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Rademacher,
}

impl Default for NoiseKind {
    fn default() -> Self {
        NoiseKind::Gaussian
    }
}

/// A synthetic quadratic problem `f(x) = 1/2 <x - x*, A (x - x*)> + offset`
/// over the ball `{R(x) <= radius}`, together with the structural operators
/// certifying smoothness (L), gradient noise (Sigma), mean-square Lipschitz
/// gradients (M), and second-order smoothness (T).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub space: OperatorSpace,
    /// Hessian A, stored in its natural space (Diagonal for vector problems,
    /// LeftMatrix for matrix problems); must satisfy `A <= L` and `A <= M`.
    pub hessian: StructuredOperator,
    pub x_opt: Point,
    pub f_offset: f64,
    pub smoothness: StructuredOperator,
    pub noise_cov: StructuredOperator,
    pub noise_cov_sqrt: StructuredOperator,
    pub mean_square: StructuredOperator,
    pub second_order: StructuredOperator,
    /// Ball radius; `f64::INFINITY` for the unconstrained problem.
    pub radius: f64,
    pub f_opt: f64,
    pub convex: bool,
    pub noise: NoiseKind,
}

/// One draw of the stochastic gradient oracle.
#[derive(Debug, Clone)]
pub struct GradientSample {
    /// `g(x; xi) = grad f(x) + noise`
    pub value: Point,
    pub noise_part: Point,
    /// Bookkeeping tag identifying the draw.
    pub seed_draw: u64,
}

impl ProblemSpec {
    /// Builds and validates a quadratic problem. `f_opt` is taken as the
    /// unconstrained optimum value when `x_opt` lies inside the ball;
    /// otherwise it must be supplied via `f_opt_override`.
    #[allow(clippy::too_many_arguments)]
    pub fn quadratic(
        space: OperatorSpace,
        hessian: StructuredOperator,
        x_opt: Point,
        smoothness: StructuredOperator,
        noise_cov: StructuredOperator,
        mean_square: StructuredOperator,
        second_order: StructuredOperator,
        radius: f64,
        noise: NoiseKind,
        f_opt_override: Option<f64>,
    ) -> Result<Self> {
        space.check_point(&x_opt)?;
        if !x_opt.is_finite() {
            return Err(Error::InvalidParameter("x_opt has non-finite entries".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("radius must be positive".into()));
        }
        for (name, op) in [
            ("L", &smoothness),
            ("Sigma", &noise_cov),
            ("M", &mean_square),
            ("T", &second_order),
        ] {
            if op.space() != space {
                return Err(Error::InvalidConfig(format!(
                    "certificate {name} lives in a different operator space"
                )));
            }
            if !op.is_positive_definite() {
                return Err(Error::SingularPayload);
            }
        }
        if hessian.min_eig() < -1e-12 {
            return Err(Error::InvalidParameter("Hessian must be PSD".into()));
        }
        // A <= L certifies smoothness; A <= M certifies the mean-square
        // Lipschitz condition (the noise is additive, so gradient
        // differences are exact).
        if min_eig_difference(&smoothness, &hessian)? < -1e-9 {
            return Err(Error::InvalidConfig("Hessian is not dominated by L".into()));
        }
        if min_eig_difference(&mean_square, &hessian)? < -1e-9 {
            return Err(Error::InvalidConfig("Hessian is not dominated by M".into()));
        }
        let f_opt = match f_opt_override {
            Some(v) => v,
            None => {
                if radius.is_finite() && norm_r(space, &x_opt)? > radius + 1e-12 {
                    return Err(Error::InvalidConfig(
                        "x_opt lies outside the ball; supply f_opt explicitly".into(),
                    ));
                }
                0.0
            }
        };
        let noise_cov_sqrt = noise_cov.sqrt()?;
        Ok(ProblemSpec {
            space,
            hessian,
            x_opt,
            f_offset: f_opt,
            smoothness,
            noise_cov,
            noise_cov_sqrt,
            mean_square,
            second_order,
            radius,
            f_opt,
            convex: true,
            noise,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.ambient_dim()
    }

    /// Trace-normalized combination of the four certificates (the operator
    /// weighting the momentum-error norm).
    pub fn combined_b(&self) -> Result<StructuredOperator> {
        crate::geometry::combine_b(
            &self.smoothness,
            &self.mean_square,
            &self.noise_cov,
            &self.second_order,
        )
    }
}

/// Smallest eigenvalue of `big - small`, promoting Scalar payloads so that
/// operators from different vector subspaces can be compared.
pub fn min_eig_difference(big: &StructuredOperator, small: &StructuredOperator) -> Result<f64> {
    fn as_diag(op: &StructuredOperator) -> Option<DVector<f64>> {
        match (op.space(), op.payload()) {
            (OperatorSpace::Scalar { dim }, Payload::Scalar(b)) => {
                Some(DVector::from_element(dim, *b))
            }
            (_, Payload::Diagonal(h)) => Some(h.clone()),
            _ => None,
        }
    }
    fn as_sym(op: &StructuredOperator) -> Option<DMatrix<f64>> {
        match op.payload() {
            Payload::LeftMatrix(b) => Some(b.clone()),
            _ => None,
        }
    }
    if let (Some(a), Some(b)) = (as_diag(big), as_diag(small)) {
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("dimension {}", a.len()),
                got: format!("dimension {}", b.len()),
            });
        }
        return Ok((a - b).min());
    }
    if let (Some(a), Some(b)) = (as_sym(big), as_sym(small)) {
        if a.nrows() != b.nrows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0} payload", a.nrows()),
                got: format!("{0}x{0} payload", b.nrows()),
            });
        }
        return Ok((a - b).symmetric_eigenvalues().min());
    }
    Err(Error::InvalidParameter(
        "operators are not comparable".into(),
    ))
}

/// Objective value.
pub fn f_eval(p: &ProblemSpec, x: &Point) -> Result<f64> {
    let d = x.sub(&p.x_opt)?;
    let ad = p.hessian.apply(&d)?;
    Ok(0.5 * d.dot(&ad)? + p.f_offset)
}

/// Exact gradient `A (x - x*)`.
pub fn grad_true(p: &ProblemSpec, x: &Point) -> Result<Point> {
    let d = x.sub(&p.x_opt)?;
    p.hessian.apply(&d)
}

/// Draws the gradient noise `n = c Sigma^{1/2} zeta` with unit-variance
/// i.i.d. `zeta` and `c = sqrt(trace_norm(Sigma) / dim)`, so that
/// `E ||n||^2_{Sigma^{-1}} = trace_norm(Sigma)` exactly saturates the
/// variance bound.
pub fn sample_noise<R: Rng>(p: &ProblemSpec, rng: &mut R) -> Result<Point> {
    let zeta = match p.noise {
        NoiseKind::Gaussian => sample_gaussian_point(p.space, rng),
        NoiseKind::Rademacher => {
            let g = sample_gaussian_point(p.space, rng);
            match g {
                Point::Vector(v) => Point::Vector(v.map(|t| if t >= 0.0 { 1.0 } else { -1.0 })),
                Point::Matrix(m) => Point::Matrix(m.map(|t| if t >= 0.0 { 1.0 } else { -1.0 })),
            }
        }
    };
    let c = (p.noise_cov.trace_norm() / p.dim() as f64).sqrt();
    Ok(p.noise_cov_sqrt.apply(&zeta)?.scale(c))
}

/// One stochastic gradient draw at `x`.
pub fn grad_sample<R: Rng>(p: &ProblemSpec, x: &Point, rng: &mut R) -> Result<GradientSample> {
    let seed_draw = rng.gen::<u64>();
    let noise_part = sample_noise(p, rng)?;
    let value = grad_true(p, x)?.add(&noise_part)?;
    Ok(GradientSample {
        value,
        noise_part,
        seed_draw,
    })
}

/// Worst observed ratios for the structural assumptions on random pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    /// max over pairs of `|D_f(x;x')| / (1/2 ||x-x'||^2_L)`
    pub smoothness_ratio: f64,
    /// second-order residual (exactly zero for quadratics)
    pub second_order_lhs: f64,
    /// max over pairs of `||g(x)-g(x')||^2_{M^{-1}} / ||x-x'||^2_M`
    pub mean_square_ratio: f64,
    pub trials: usize,
}

impl StructureReport {
    pub fn all_within(&self, tol: f64) -> bool {
        self.smoothness_ratio <= 1.0 + tol
            && self.second_order_lhs.abs() <= tol
            && self.mean_square_ratio <= 1.0 + tol
    }
}

/// Samples random pairs and measures how tightly the certificates hold.
/// `D_f` is the Bregman residual `f(x) - f(x') - <grad f(x'), x - x'>`.
pub fn certify_structure<R: Rng>(
    p: &ProblemSpec,
    trials: usize,
    rng: &mut R,
) -> Result<StructureReport> {
    let mut smoothness_ratio: f64 = 0.0;
    let mut mean_square_ratio: f64 = 0.0;
    for _ in 0..trials {
        let x = sample_gaussian_point(p.space, rng);
        let xp = sample_gaussian_point(p.space, rng);
        let delta = x.sub(&xp)?;
        let bregman = f_eval(p, &x)? - f_eval(p, &xp)? - grad_true(p, &xp)?.dot(&delta)?;
        let bound = 0.5 * crate::geometry::weighted_sqnorm(&p.smoothness, &delta, false)?;
        if bound > 0.0 {
            smoothness_ratio = smoothness_ratio.max(bregman.abs() / bound);
        }
        // Additive noise cancels in gradient differences, so the mean-square
        // condition is deterministic: ||A delta||^2_{M^{-1}} <= ||delta||^2_M.
        let gdiff = p.hessian.apply(&delta)?;
        let lhs = crate::geometry::weighted_sqnorm(&p.mean_square, &gdiff, true)?;
        let rhs = crate::geometry::weighted_sqnorm(&p.mean_square, &delta, false)?;
        if rhs > 0.0 {
            mean_square_ratio = mean_square_ratio.max(lhs / rhs);
        }
    }
    Ok(StructureReport {
        smoothness_ratio,
        second_order_lhs: 0.0, // constant Hessian
        mean_square_ratio,
        trials,
    })
}

/// Named benchmark generator parameters (the CLI `problem.params` object).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub name: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub rows: Option<usize>,
    #[serde(default)]
    pub cols: Option<usize>,
    /// Tail value for sparse / low-rank spectra.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub rank: Option<usize>,
    /// Ball radius (default 1; use `null` plus `unconstrained` for infinity).
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub unconstrained: bool,
    #[serde(default)]
    pub noise: Option<NoiseKind>,
    /// `R(x_opt) / radius`, default 0.5 (keeps the optimum interior).
    #[serde(default)]
    pub x_opt_fraction: Option<f64>,
    /// Hessian as a multiple of L, in (0, 1]; default 1 (tight smoothness).
    #[serde(default)]
    pub hessian_scale: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl BenchmarkConfig {
    pub fn named(name: &str) -> Self {
        BenchmarkConfig {
            name: name.to_string(),
            dim: None,
            rows: None,
            cols: None,
            delta: None,
            rank: None,
            radius: None,
            unconstrained: false,
            noise: None,
            x_opt_fraction: None,
            hessian_scale: None,
            seed: 0,
        }
    }
}

/// Names accepted by [`make_benchmark`].
pub const BENCHMARK_NAMES: [&str; 4] = ["sparse-diag", "dense-diag", "lowrank-left", "isotropic"];

/// Builds one of the named synthetic benchmark families:
///
/// * `sparse-diag`: Diagonal space, `l = (1, delta, ..., delta)` so that
///   `||l||_1 << d ||l||_inf` for small `delta`;
/// * `dense-diag`: Diagonal space, all entries `1/d` (no structure);
/// * `lowrank-left`: LeftMatrix space with a rank-`r` dominant payload;
/// * `isotropic`: Scalar space baseline.
pub fn make_benchmark(cfg: &BenchmarkConfig) -> Result<ProblemSpec> {
    let radius = if cfg.unconstrained {
        f64::INFINITY
    } else {
        cfg.radius.unwrap_or(1.0)
    };
    let frac = cfg.x_opt_fraction.unwrap_or(0.5);
    let hessian_scale = cfg.hessian_scale.unwrap_or(1.0);
    if !(hessian_scale > 0.0 && hessian_scale <= 1.0) {
        return Err(Error::InvalidParameter(
            "hessian_scale must lie in (0, 1]".into(),
        ));
    }
    let noise = cfg.noise.unwrap_or_default();
    let mut rng = crate::util::sub_rng(cfg.seed, 0xBE);
    match cfg.name.as_str() {
        "sparse-diag" | "dense-diag" => {
            let d = cfg
                .dim
                .ok_or_else(|| Error::InvalidParameter("dim required".into()))?;
            if d == 0 {
                return Err(Error::InvalidParameter("dim must be >= 1".into()));
            }
            let space = OperatorSpace::Diagonal { dim: d };
            let l = if cfg.name == "sparse-diag" {
                let delta = cfg.delta.unwrap_or(1e-3);
                if !(delta > 0.0) {
                    return Err(Error::InvalidParameter("delta must be positive".into()));
                }
                DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { delta })
            } else {
                DVector::from_element(d, 1.0 / d as f64)
            };
            let mk = |v: &DVector<f64>| {
                StructuredOperator::positive(space, Payload::Diagonal(v.clone()))
            };
            let smoothness = mk(&l)?;
            let noise_cov = mk(&l)?;
            let mean_square = mk(&l)?;
            let second_order = space.scaled_identity(1.0 / d as f64);
            let hessian = smoothness.scale(hessian_scale);
            let x_opt = if radius.is_finite() {
                // random sign pattern on the inf-ball at the requested fraction
                Point::Vector(DVector::from_fn(d, |_, _| {
                    let s: f64 = rng.sample(StandardNormal);
                    frac * radius * s.signum()
                }))
            } else {
                Point::Vector(DVector::from_element(d, frac))
            };
            ProblemSpec::quadratic(
                space,
                hessian,
                x_opt,
                smoothness,
                noise_cov,
                mean_square,
                second_order,
                radius,
                noise,
                None,
            )
        }
        "lowrank-left" => {
            let m = cfg
                .rows
                .ok_or_else(|| Error::InvalidParameter("rows required".into()))?;
            let n = cfg
                .cols
                .ok_or_else(|| Error::InvalidParameter("cols required".into()))?;
            let r = cfg.rank.unwrap_or(1);
            if m == 0 || n == 0 || r == 0 || r > m {
                return Err(Error::InvalidParameter("need 1 <= rank <= rows".into()));
            }
            let delta = cfg.delta.unwrap_or(1e-8);
            let space = OperatorSpace::LeftMatrix { rows: m, cols: n };
            // Diagonal payload with r unit eigenvalues and a small PD tail.
            let spectrum =
                DVector::from_fn(m, |i, _| if i < r { 1.0 } else { delta });
            let payload = DMatrix::from_diagonal(&spectrum);
            let mk = || StructuredOperator::positive(space, Payload::LeftMatrix(payload.clone()));
            let smoothness = mk()?;
            let noise_cov = mk()?;
            let mean_square = mk()?;
            let second_order = space.scaled_identity(1.0 / (m * n) as f64);
            let hessian = smoothness.scale(hessian_scale);
            let x_opt = if radius.is_finite() {
                let g = sample_gaussian_point(space, &mut rng);
                let rn = norm_r(space, &g)?;
                g.scale(frac * radius / rn)
            } else {
                Point::Matrix(DMatrix::from_element(m, n, frac))
            };
            ProblemSpec::quadratic(
                space,
                hessian,
                x_opt,
                smoothness,
                noise_cov,
                mean_square,
                second_order,
                radius,
                noise,
                None,
            )
        }
        "isotropic" => {
            let d = cfg
                .dim
                .ok_or_else(|| Error::InvalidParameter("dim required".into()))?;
            if d == 0 {
                return Err(Error::InvalidParameter("dim must be >= 1".into()));
            }
            let space = OperatorSpace::Scalar { dim: d };
            let beta = 1.0;
            let smoothness = space.scaled_identity(beta);
            let noise_cov = space.scaled_identity(beta);
            let mean_square = space.scaled_identity(beta);
            let second_order = space.scaled_identity(1.0 / d as f64);
            let hessian = StructuredOperator::positive(
                OperatorSpace::Diagonal { dim: d },
                Payload::Diagonal(DVector::from_element(d, hessian_scale * beta)),
            )?;
            let x_opt = if radius.is_finite() {
                let g = sample_gaussian_point(space, &mut rng);
                let rn = norm_r(space, &g)?;
                g.scale(frac * radius / rn)
            } else {
                Point::Vector(DVector::from_element(d, frac))
            };
            ProblemSpec::quadratic(
                space,
                hessian,
                x_opt,
                smoothness,
                noise_cov,
                mean_square,
                second_order,
                radius,
                noise,
                None,
            )
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown benchmark '{other}'; known: {BENCHMARK_NAMES:?}"
        ))),
    }
}

/// Rebinds a problem to the Scalar (Euclidean) geometry on the same
/// objective: the tightest scalar certificates dominating the originals.
/// Matrix problems are flattened to `R^{m n}` (diagonal payloads only).
pub fn scalarize(p: &ProblemSpec) -> Result<ProblemSpec> {
    let tight_scalar = |op: &StructuredOperator, space: OperatorSpace| -> StructuredOperator {
        // largest payload eigenvalue as the dominating multiple of I
        let beta = match op.payload() {
            Payload::Scalar(b) => *b,
            Payload::Diagonal(h) => h.max(),
            Payload::LeftMatrix(b) => b.symmetric_eigenvalues().max(),
        };
        space.scaled_identity(beta)
    };
    match p.space {
        OperatorSpace::Scalar { .. } => Ok(p.clone()),
        OperatorSpace::Diagonal { dim } => {
            let space = OperatorSpace::Scalar { dim };
            // Noise keeps its total energy: trace norm is preserved.
            let sigma = space.scaled_identity(p.noise_cov.trace_norm() / dim as f64);
            ProblemSpec::quadratic(
                space,
                p.hessian.clone(),
                p.x_opt.clone(),
                tight_scalar(&p.smoothness, space),
                sigma,
                tight_scalar(&p.mean_square, space),
                space.scaled_identity(p.second_order.trace_norm() / dim as f64),
                p.radius,
                p.noise,
                Some(p.f_opt),
            )
        }
        OperatorSpace::LeftMatrix { rows, cols } => {
            let d = rows * cols;
            let space = OperatorSpace::Scalar { dim: d };
            let diag_of = |op: &StructuredOperator| -> Result<DVector<f64>> {
                match op.payload() {
                    Payload::LeftMatrix(b) => {
                        if (b - DMatrix::from_diagonal(&b.diagonal())).amax() > 1e-12 {
                            return Err(Error::InvalidParameter(
                                "scalarize requires a diagonal LeftMatrix payload".into(),
                            ));
                        }
                        let mut v = DVector::zeros(d);
                        for j in 0..cols {
                            for i in 0..rows {
                                v[i + j * rows] = b[(i, i)];
                            }
                        }
                        Ok(v)
                    }
                    _ => Err(Error::InvalidParameter("expected LeftMatrix payload".into())),
                }
            };
            let hessian = StructuredOperator::positive(
                OperatorSpace::Diagonal { dim: d },
                Payload::Diagonal(diag_of(&p.hessian)?),
            )?;
            let sigma = space.scaled_identity(p.noise_cov.trace_norm() / d as f64);
            ProblemSpec::quadratic(
                space,
                hessian,
                Point::Vector(p.x_opt.flatten()),
                tight_scalar(&p.smoothness, space),
                sigma,
                tight_scalar(&p.mean_square, space),
                space.scaled_identity(p.second_order.trace_norm() / d as f64),
                p.radius,
                p.noise,
                Some(p.f_opt),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::weighted_sqnorm;
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_problem(a: &[f64], x_opt: &[f64], radius: f64) -> ProblemSpec {
        let d = a.len();
        let space = OperatorSpace::Diagonal { dim: d };
        let op = |v: &[f64]| {
            StructuredOperator::positive(space, Payload::Diagonal(DVector::from_row_slice(v)))
                .unwrap()
        };
        ProblemSpec::quadratic(
            space,
            op(a),
            Point::vector(x_opt.to_vec()),
            op(a),
            op(a),
            op(a),
            space.scaled_identity(1.0 / d as f64),
            radius,
            NoiseKind::Gaussian,
            None,
        )
        .unwrap()
    }

    #[test]
    fn f_eval_examples() {
        let p = diag_problem(&[1.0, 1.0], &[0.0, 0.0], f64::INFINITY);
        assert_eq!(f_eval(&p, &p.x_opt).unwrap(), p.f_opt);
        assert_relative_eq!(
            f_eval(&p, &Point::vector([3.0, 4.0])).unwrap(),
            12.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn grad_true_examples() {
        let p = diag_problem(&[2.0, 1.0], &[0.0, 0.0], f64::INFINITY);
        assert_eq!(grad_true(&p, &p.x_opt).unwrap(), Point::vector([0.0, 0.0]));
        assert_eq!(
            grad_true(&p, &Point::vector([1.0, 1.0])).unwrap(),
            Point::vector([2.0, 1.0])
        );
    }

    #[test]
    fn grad_matches_finite_differences() {
        let p = diag_problem(
            &[2.0, 0.5, 1.0, 3.0, 0.2, 1.5, 0.9, 2.5],
            &[0.1, -0.2, 0.3, 0.0, 0.5, -0.4, 0.2, 0.1],
            f64::INFINITY,
        );
        let x = Point::vector([0.7, 0.2, -0.9, 0.4, -0.1, 0.8, 0.3, -0.6]);
        let g = grad_true(&p, &x).unwrap();
        let h = 1e-5;
        let gv = g.as_vector().unwrap();
        for i in 0..8 {
            let mut e = vec![0.0; 8];
            e[i] = h;
            let xp = x.add(&Point::vector(e.clone())).unwrap();
            let xm = x.sub(&Point::vector(e)).unwrap();
            let fd = (f_eval(&p, &xp).unwrap() - f_eval(&p, &xm).unwrap()) / (2.0 * h);
            let denom = gv[i].abs().max(1.0);
            assert!((fd - gv[i]).abs() / denom <= 1e-6);
        }
    }

    #[test]
    fn bregman_equals_half_hessian_norm() {
        let p = diag_problem(&[2.0, 0.5, 1.5], &[0.0, 0.2, -0.1], f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = sample_gaussian_point(p.space, &mut rng);
            let xp = sample_gaussian_point(p.space, &mut rng);
            let delta = x.sub(&xp).unwrap();
            let lhs = f_eval(&p, &x).unwrap()
                - f_eval(&p, &xp).unwrap()
                - grad_true(&p, &xp).unwrap().dot(&delta).unwrap();
            let rhs = 0.5 * weighted_sqnorm(&p.hessian, &delta, false).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn noise_is_unbiased_and_saturates_variance() {
        for name in BENCHMARK_NAMES {
            let mut cfg = BenchmarkConfig::named(name);
            cfg.dim = Some(6);
            cfg.rows = Some(3);
            cfg.cols = Some(2);
            cfg.rank = Some(1);
            cfg.delta = Some(0.1);
            let p = make_benchmark(&cfg).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let n_draws = 10_000;
            let mut mean = Point::zeros_like(&p.x_opt);
            let mut sq = 0.0;
            for _ in 0..n_draws {
                let n = sample_noise(&p, &mut rng).unwrap();
                mean = mean.add(&n).unwrap();
                sq += weighted_sqnorm(&p.noise_cov, &n, true).unwrap();
            }
            mean = mean.scale(1.0 / n_draws as f64);
            let target = p.noise_cov.trace_norm();
            let emp = sq / n_draws as f64;
            assert!(
                (emp - target).abs() / target < 0.05,
                "{name}: E||n||^2 = {emp}, trace norm = {target}"
            );
            // componentwise mean within 4 standard errors of zero; the
            // per-coordinate std is bounded by c * sqrt(max eig of Sigma)
            let c = (target / p.dim() as f64).sqrt();
            let se = 4.0 * c * p.noise_cov.trace_norm().sqrt() / (n_draws as f64).sqrt();
            assert!(mean.iter().all(|v| v.abs() <= se), "{name}: biased noise");
        }
    }

    #[test]
    fn scalar_noise_reduces_to_standard_normal() {
        let p = diag_problem(&[1.0], &[0.0], f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n_draws = 10_000;
        let var: f64 = (0..n_draws)
            .map(|_| {
                let n = sample_noise(&p, &mut rng).unwrap();
                n.as_vector().unwrap()[0].powi(2)
            })
            .sum::<f64>()
            / n_draws as f64;
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn rademacher_noise_has_unit_magnitude_entries() {
        let mut cfg = BenchmarkConfig::named("dense-diag");
        cfg.dim = Some(4);
        cfg.noise = Some(NoiseKind::Rademacher);
        let p = make_benchmark(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = sample_noise(&p, &mut rng).unwrap();
        let c = (p.noise_cov.trace_norm() / p.dim() as f64).sqrt();
        for (v, h) in n.iter().zip([0.25f64; 4]) {
            assert_relative_eq!(v.abs(), c * h.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn grad_sample_decomposes_exactly() {
        let p = diag_problem(&[2.0, 1.0], &[0.0, 0.0], f64::INFINITY);
        let x = Point::vector([0.5, -1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = grad_sample(&p, &x, &mut rng).unwrap();
        let recomposed = grad_true(&p, &x).unwrap().add(&s.noise_part).unwrap();
        assert_eq!(s.value, recomposed);
    }

    #[test]
    fn certify_structure_on_all_benchmarks() {
        for name in BENCHMARK_NAMES {
            let mut cfg = BenchmarkConfig::named(name);
            cfg.dim = Some(8);
            cfg.rows = Some(4);
            cfg.cols = Some(3);
            cfg.rank = Some(2);
            let p = make_benchmark(&cfg).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let report = certify_structure(&p, 200, &mut rng).unwrap();
            assert!(report.all_within(1e-9), "{name}: {report:?}");
        }
    }

    #[test]
    fn tight_hessian_reaches_ratio_one() {
        // A = L: aligned pairs drive the smoothness ratio to 1
        let p = diag_problem(&[1.0, 2.0], &[0.0, 0.0], f64::INFINITY);
        let x = Point::vector([0.0, 1.0]); // dominant eigendirection
        let xp = Point::vector([0.0, 0.0]);
        let delta = x.sub(&xp).unwrap();
        let bregman = f_eval(&p, &x).unwrap()
            - f_eval(&p, &xp).unwrap()
            - grad_true(&p, &xp).unwrap().dot(&delta).unwrap();
        let bound = 0.5 * weighted_sqnorm(&p.smoothness, &delta, false).unwrap();
        assert_relative_eq!(bregman / bound, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn generator_trace_arithmetic() {
        let mut sparse = BenchmarkConfig::named("sparse-diag");
        sparse.dim = Some(256);
        sparse.delta = Some(1e-3);
        let p = make_benchmark(&sparse).unwrap();
        assert_relative_eq!(p.smoothness.trace_norm(), 1.0 + 255.0 * 1e-3, epsilon = 1e-12);

        let mut low = BenchmarkConfig::named("lowrank-left");
        low.rows = Some(32);
        low.cols = Some(32);
        low.rank = Some(2);
        low.delta = Some(0.0_f64.max(1e-12));
        let p = make_benchmark(&low).unwrap();
        assert_relative_eq!(p.smoothness.trace_norm(), 64.0, epsilon = 1e-6);

        let mut iso = BenchmarkConfig::named("isotropic");
        iso.dim = Some(4);
        let p = make_benchmark(&iso).unwrap();
        assert_relative_eq!(p.smoothness.trace_norm(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn construction_rejects_undominated_hessian() {
        let space = OperatorSpace::Diagonal { dim: 2 };
        let op = |v: &[f64]| {
            StructuredOperator::positive(space, Payload::Diagonal(DVector::from_row_slice(v)))
                .unwrap()
        };
        let err = ProblemSpec::quadratic(
            space,
            op(&[2.0, 1.0]), // exceeds L in the first coordinate
            Point::vector([0.0, 0.0]),
            op(&[1.0, 1.0]),
            op(&[1.0, 1.0]),
            op(&[2.0, 1.0]),
            space.scaled_identity(0.5),
            1.0,
            NoiseKind::Gaussian,
            None,
        );
        assert!(err.is_err());
    }

    #[test]
    fn x_opt_outside_ball_needs_explicit_f_opt() {
        let space = OperatorSpace::Diagonal { dim: 1 };
        let op = StructuredOperator::positive(space, Payload::Diagonal(DVector::from_element(1, 1.0)))
            .unwrap();
        let build = |f_opt| {
            ProblemSpec::quadratic(
                space,
                op.clone(),
                Point::vector([2.0]),
                op.clone(),
                op.clone(),
                op.clone(),
                space.scaled_identity(1.0),
                1.0,
                NoiseKind::Gaussian,
                f_opt,
            )
        };
        assert!(build(None).is_err());
        // f(1) = 1/2 (1-2)^2 = 0.5 is the ball optimum
        assert!(build(Some(0.5)).is_ok());
    }

    #[test]
    fn scalarize_preserves_objective_and_dominates() {
        let mut cfg = BenchmarkConfig::named("sparse-diag");
        cfg.dim = Some(5);
        cfg.delta = Some(0.3);
        let p = make_benchmark(&cfg).unwrap();
        let s = scalarize(&p).unwrap();
        assert_eq!(s.space, OperatorSpace::Scalar { dim: 5 });
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = sample_gaussian_point(p.space, &mut rng);
            assert_relative_eq!(
                f_eval(&p, &x).unwrap(),
                f_eval(&s, &x).unwrap(),
                epsilon = 1e-12
            );
        }
        assert!(min_eig_difference(&s.smoothness, &p.smoothness).unwrap() >= -1e-12);
        assert_relative_eq!(
            s.noise_cov.trace_norm(),
            p.noise_cov.trace_norm(),
            epsilon = 1e-12
        );

        let mut low = BenchmarkConfig::named("lowrank-left");
        low.rows = Some(3);
        low.cols = Some(2);
        low.rank = Some(1);
        low.delta = Some(0.5);
        let p = make_benchmark(&low).unwrap();
        let s = scalarize(&p).unwrap();
        assert_eq!(s.space, OperatorSpace::Scalar { dim: 6 });
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = sample_gaussian_point(p.space, &mut rng);
            let xv = Point::Vector(x.flatten());
            assert_relative_eq!(
                f_eval(&p, &x).unwrap(),
                f_eval(&s, &xv).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn unknown_benchmark_is_rejected() {
        let cfg = BenchmarkConfig::named("nope");
        assert!(make_benchmark(&cfg).is_err());
    }
}
