//! The trust-region stochastic method: a linear-minimization-oracle step
//! with weight decay, three momentum estimators, parameter schedules, and a
//! per-iteration recorder.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::grad_criterion;
use crate::error::{Error, Result};
use crate::geometry::{lmo, norm_r, weighted_sqnorm, OperatorSpace, StructuredOperator};
use crate::point::Point;
use crate::problems::{f_eval, grad_sample, grad_true, sample_noise, ProblemSpec};

/// Momentum estimator variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentumOption {
    /// Exponential moving average of fresh gradients.
    M1,
    /// Moving average of gradients at the extrapolated point
    /// `xbar_{k+1} = x_k + (1/alpha)(x_{k+1} - x_k)`.
    M2,
    /// Variance-reduced recursion reusing one draw at both `x_k` and
    /// `x_{k+1}`.
    M3,
}

impl std::str::FromStr for MomentumOption {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(MomentumOption::M1),
            "m2" => Ok(MomentumOption::M2),
            "m3" => Ok(MomentumOption::M3),
            other => Err(Error::InvalidConfig(format!(
                "unknown momentum option '{other}' (expected m1|m2|m3)"
            ))),
        }
    }
}

/// Algorithm parameters. With a finite radius the weight decay must satisfy
/// `beta = eta / radius`, which keeps every iterate in the ball and every
/// step shorter than `2 eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub iterations: u64,
    pub option: MomentumOption,
    pub radius: f64,
    /// When false, a decoupled (beta, eta, radius) triple is accepted as-is.
    #[serde(default = "default_true")]
    pub strict_coupling: bool,
}

fn default_true() -> bool {
    true
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0,1], got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0,1), got {}",
                self.beta
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidParameter("radius must be positive".into()));
        }
        if self.strict_coupling {
            if self.radius.is_finite() {
                let expect = self.eta / self.radius;
                if (self.beta - expect).abs() > 1e-12 * expect.max(1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "beta = {} is not coupled to eta/radius = {expect}",
                        self.beta
                    )));
                }
            } else if self.beta != 0.0 {
                return Err(Error::InvalidConfig(
                    "infinite radius requires beta = 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Mutable loop state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub k: u64,
    pub x: Point,
    pub m: Point,
    pub rng: ChaCha8Rng,
}

/// Initializes the state with one gradient draw at `x0`.
pub fn init(p: &ProblemSpec, cfg: &OptimizerConfig, x0: Point, seed: u64) -> Result<OptimizerState> {
    cfg.validate()?;
    p.space.check_point(&x0)?;
    if cfg.radius.is_finite() {
        let r0 = norm_r(p.space, &x0)?;
        if r0 > cfg.radius + 1e-12 {
            return Err(Error::Infeasible {
                norm: r0,
                radius: cfg.radius,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grad_sample(p, &x0, &mut rng)?.value;
    Ok(OptimizerState { k: 0, x: x0, m, rng })
}

/// One update `x_{k+1} = (1 - beta) x_k - eta lmo(m_k)`: the exact minimizer
/// of `<m_k, x>` over `{R(x - (1 - beta) x_k) <= eta}`.
pub fn trust_region_step(
    space: OperatorSpace,
    x_k: &Point,
    m_k: &Point,
    eta: f64,
    beta: f64,
) -> Result<Point> {
    if !(eta > 0.0) || !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(
            "trust-region step needs eta > 0 and beta in [0,1)".into(),
        ));
    }
    let direction = lmo(space, m_k)?;
    x_k.scale(1.0 - beta).axpy(-eta, &direction)
}

/// Computes `m_{k+1}` from `(x_k, m_k, x_{k+1})` with one fresh oracle draw.
pub fn momentum_update<R: Rng>(
    option: MomentumOption,
    p: &ProblemSpec,
    x_k: &Point,
    m_k: &Point,
    x_next: &Point,
    alpha: f64,
    rng: &mut R,
) -> Result<Point> {
    match option {
        MomentumOption::M1 => {
            let g = grad_sample(p, x_next, rng)?.value;
            m_k.scale(1.0 - alpha).axpy(alpha, &g)
        }
        MomentumOption::M2 => {
            let xbar = x_k.axpy(1.0 / alpha, &x_next.sub(x_k)?)?;
            let g = grad_sample(p, &xbar, rng)?.value;
            m_k.scale(1.0 - alpha).axpy(alpha, &g)
        }
        MomentumOption::M3 => {
            // one shared draw evaluated at both points
            let _seed_draw: u64 = rng.gen();
            let noise = sample_noise(p, rng)?;
            let g_prev = grad_true(p, x_k)?.add(&noise)?;
            let g_next = grad_true(p, x_next)?.add(&noise)?;
            m_k.sub(&g_prev)?.scale(1.0 - alpha).add(&g_next)
        }
    }
}

/// One recorded iteration. `momentum_err` is `||m_k - grad f(x_k)||` in the
/// inverse combined-certificate norm; `step_norm` is `R(x_k - x_{k-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub k: u64,
    pub f: f64,
    pub f_gap: f64,
    pub criterion: f64,
    pub r_x: f64,
    pub momentum_err: f64,
    pub step_norm: f64,
}

/// What the recorder tracks beyond the rows.
#[derive(Debug, Clone, Copy, Default)]
pub struct Recorder {
    /// Row thinning stride; `None` picks 1 below 1e5 iterations and
    /// `ceil(K / 1e4)` above.
    pub stride: Option<u64>,
    /// Optional hitting-time target.
    pub target: Option<Target>,
}

/// Hitting-time definition: first k where the running minimum of the
/// criterion (or the optimality gap, for convex targets) reaches `eps`.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub eps: f64,
    pub use_f_gap: bool,
}

/// A completed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    pub seed: u64,
    pub config: OptimizerConfig,
    /// First k hitting the recorder target, if one was set and reached.
    pub k_hit: Option<u64>,
    pub censored: bool,
    /// Max over iterations of (descent-inequality LHS - RHS); negative
    /// means the inequality held everywhere with margin. `None` when the
    /// run does not evaluate it (baseline runs).
    pub descent_max_violation: Option<f64>,
    pub final_x: Point,
}

fn auto_stride(k: u64) -> u64 {
    if k < 100_000 {
        1
    } else {
        k.div_ceil(10_000)
    }
}

struct Metrics {
    f: f64,
    criterion: f64,
}

#[allow(clippy::too_many_arguments)]
fn record_row(
    rows: &mut Vec<TrajectoryRow>,
    p: &ProblemSpec,
    b: &StructuredOperator,
    k: u64,
    x: &Point,
    m: &Point,
    prev_x: Option<&Point>,
    radius: f64,
    store: bool,
) -> Result<Metrics> {
    let g = grad_true(p, x)?;
    let f = f_eval(p, x)?;
    let criterion = grad_criterion(p.space, x, &g, radius)?;
    if store {
        let momentum_err = weighted_sqnorm(b, &g.sub(m)?, true)?.max(0.0).sqrt();
        let step_norm = match prev_x {
            Some(xp) => norm_r(p.space, &x.sub(xp)?)?,
            None => 0.0,
        };
        rows.push(TrajectoryRow {
            k,
            f,
            f_gap: f - p.f_opt,
            criterion,
            r_x: norm_r(p.space, x)?,
            momentum_err,
            step_norm,
        });
    }
    Ok(Metrics { f, criterion })
}

/// Runs `cfg.iterations` steps from `x0`, recording metrics and checking
/// the descent inequality
/// `eta G(x_k) <= f(x_k) - f(x_{k+1}) + 4 eta ||grad f(x_k) - m_k||_{B^-1}
///  + 2 trace_norm(L) eta^2`
/// pointwise along the trajectory. Deterministic given the seed.
pub fn run(
    p: &ProblemSpec,
    cfg: &OptimizerConfig,
    x0: Point,
    seed: u64,
    rec: &Recorder,
) -> Result<TrajectoryRecord> {
    let mut st = init(p, cfg, x0, seed)?;
    let b = p.combined_b()?;
    let k_total = cfg.iterations;
    let stride = rec.stride.unwrap_or_else(|| auto_stride(k_total)).max(1);
    let tr_l = p.smoothness.trace_norm();
    let mut rows = Vec::new();
    let mut prev_x: Option<Point> = None;
    let mut k_hit = None;
    let mut running_min = f64::INFINITY;
    let mut max_violation = f64::NEG_INFINITY;
    for k in 0..=k_total {
        let store = k % stride == 0 || k == k_total;
        let met = record_row(&mut rows, p, &b, k, &st.x, &st.m, prev_x.as_ref(), cfg.radius, store)?;
        running_min = running_min.min(met.criterion);
        if let Some(t) = rec.target {
            let watched = if t.use_f_gap {
                met.f - p.f_opt
            } else {
                running_min
            };
            if k_hit.is_none() && watched <= t.eps {
                k_hit = Some(k);
            }
        }
        if k == k_total {
            break;
        }
        let x_next = trust_region_step(p.space, &st.x, &st.m, cfg.eta, cfg.beta)?;
        // descent inequality: all terms exact for quadratics
        let g = grad_true(p, &st.x)?;
        let merr = weighted_sqnorm(&b, &g.sub(&st.m)?, true)?.max(0.0).sqrt();
        let lhs = cfg.eta * met.criterion;
        let rhs = met.f - f_eval(p, &x_next)? + 4.0 * cfg.eta * merr + 2.0 * tr_l * cfg.eta * cfg.eta;
        max_violation = max_violation.max(lhs - rhs);
        st.m = momentum_update(cfg.option, p, &st.x, &st.m, &x_next, cfg.alpha, &mut st.rng)?;
        prev_x = Some(std::mem::replace(&mut st.x, x_next));
        st.k = k + 1;
    }
    let censored = rec.target.is_some() && k_hit.is_none();
    Ok(TrajectoryRecord {
        rows,
        seed,
        config: *cfg,
        k_hit,
        censored,
        descent_max_violation: Some(max_violation),
        final_x: st.x,
    })
}

/// Schedule selector: the three momentum options each come with a
/// non-convex and a convex parameter recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Nonconvex,
    Convex,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nonconvex" => Ok(Regime::Nonconvex),
            "convex" => Ok(Regime::Convex),
            other => Err(Error::InvalidConfig(format!(
                "unknown regime '{other}' (expected nonconvex|convex)"
            ))),
        }
    }
}

/// Problem constants entering the schedules (trace norms and scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub l: f64,
    pub sigma: f64,
    pub m: f64,
    pub t: f64,
    /// Initial gap `f(x0) - f_opt` (non-convex recipes only).
    pub delta0: f64,
    pub radius: f64,
}

impl ScheduleConstants {
    pub fn from_problem(p: &ProblemSpec, x0: &Point) -> Result<Self> {
        Ok(ScheduleConstants {
            l: p.smoothness.trace_norm(),
            sigma: p.noise_cov.trace_norm(),
            m: p.mean_square.trace_norm(),
            t: p.second_order.trace_norm(),
            delta0: f_eval(p, x0)? - p.f_opt,
            radius: p.radius,
        })
    }
}

/// Log factor of the convex recipes: `ceil(ln(1/eps) + 1)`, at least 1.
fn log_factor(eps: f64) -> f64 {
    ((1.0 / eps).ln() + 1.0).ceil().max(1.0)
}

/// Builds the `(alpha, beta, eta, K)` recipe for one momentum option at
/// target accuracy `eps`. All hidden constants are set to 1 and scaled by
/// `c_mult` (which divides the iteration count, so smaller parameters come
/// with proportionally more steps).
pub fn schedule(
    option: MomentumOption,
    regime: Regime,
    eps: f64,
    c: &ScheduleConstants,
    c_mult: f64,
) -> Result<OptimizerConfig> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    if !(c_mult > 0.0) {
        return Err(Error::InvalidParameter("c_mult must be positive".into()));
    }
    for (name, v) in [
        ("l", c.l),
        ("sigma", c.sigma),
        ("m", c.m),
        ("t", c.t),
        ("radius", c.radius),
    ] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule constant {name} must be positive"
            )));
        }
    }
    if regime == Regime::Convex && !c.radius.is_finite() {
        return Err(Error::InvalidParameter(
            "convex recipes need a finite radius".into(),
        ));
    }
    let (cl, sg, cm, ct, d0, r) = (c.l, c.sigma, c.m, c.t, c.delta0.max(0.0), c.radius);
    let cc = c_mult;
    let (alpha, beta_or_eta, k_raw) = match (option, regime) {
        (MomentumOption::M1, Regime::Nonconvex) => {
            let alpha = (cc * eps * eps / (sg * sg)).min(1.0);
            let k = [
                1.0,
                d0 / (eps * r),
                cl * d0 / (eps * eps),
                sg.powi(3) / eps.powi(3),
                sg * sg * cl * d0 / eps.powi(4),
            ]
            .into_iter()
            .fold(1.0f64, f64::max);
            let beta_or_eta = if r.is_finite() {
                Coupling::Beta((cc * eps * alpha / (cl * r)).min(1.0))
            } else {
                Coupling::Eta(cc * eps * alpha / cl)
            };
            (alpha, beta_or_eta, k)
        }
        (MomentumOption::M1, Regime::Convex) => {
            let alpha = (cc * eps * eps / (sg * sg * r * r)).min(1.0);
            let beta = (cc * eps * alpha / (cl * r * r)).min(alpha);
            let k = [
                1.0,
                cl * r * r / eps,
                sg * sg * r * r / (eps * eps),
                sg * sg * cl * r.powi(4) / eps.powi(3),
            ]
            .into_iter()
            .fold(1.0f64, f64::max)
                * log_factor(eps);
            (alpha, Coupling::Beta(beta), k)
        }
        (MomentumOption::M2, Regime::Nonconvex) => {
            let alpha = (cc * eps * eps / (sg * sg)).min(1.0);
            let k = [
                1.0,
                d0 / (eps * r),
                cl * d0 / (eps * eps),
                sg.powi(3) / eps.powi(3),
                sg * sg * ct.sqrt() * d0 / eps.powf(3.5),
            ]
            .into_iter()
            .fold(1.0f64, f64::max);
            let beta_or_eta = if r.is_finite() {
                Coupling::Beta(
                    (cc * eps / (cl * r))
                        .min(cc * eps.sqrt() * alpha / (ct.sqrt() * r))
                        .min(1.0),
                )
            } else {
                Coupling::Eta((cc * eps / cl).min(cc * eps.sqrt() * alpha / ct.sqrt()))
            };
            (alpha, beta_or_eta, k)
        }
        (MomentumOption::M2, Regime::Convex) => {
            let alpha = (cc * eps * eps / (sg * sg)).min(1.0);
            let beta = (cc * eps / (cl * r * r))
                .min(cc * eps.sqrt() * alpha / (ct * r.powi(3)).sqrt())
                .min(alpha);
            let k = [
                1.0,
                cl * r * r / eps,
                sg * sg * r * r / (eps * eps),
                sg * sg * ct.sqrt() * r.powf(3.5) / eps.powf(2.5),
            ]
            .into_iter()
            .fold(1.0f64, f64::max)
                * log_factor(eps);
            (alpha, Coupling::Beta(beta), k)
        }
        (MomentumOption::M3, Regime::Nonconvex) => {
            let alpha = (cc * eps * eps / (sg * sg)).min(1.0);
            let k = [
                1.0,
                d0 / (eps * r),
                cl * d0 / (eps * eps),
                cm * d0 / (eps * eps),
                sg.powi(3) / eps.powi(3),
                sg * cm * d0 / eps.powi(3),
            ]
            .into_iter()
            .fold(1.0f64, f64::max);
            let beta_or_eta = if r.is_finite() {
                Coupling::Beta(
                    (cc * eps / (cl * r))
                        .min(cc * eps * alpha.sqrt() / (cm * r))
                        .min(1.0),
                )
            } else {
                Coupling::Eta((cc * eps / cl).min(cc * eps * alpha.sqrt() / cm))
            };
            (alpha, beta_or_eta, k)
        }
        (MomentumOption::M3, Regime::Convex) => {
            let alpha = (cc * eps * eps / (sg * sg * r * r)).min(1.0);
            let beta = (cc * eps / (cl * r * r))
                .min(cc * eps * alpha.sqrt() / (cm * r * r))
                .min(alpha);
            let k = [
                1.0,
                cl * r * r / eps,
                sg * sg * r * r / (eps * eps),
                sg * cm * r.powi(3) / (eps * eps),
            ]
            .into_iter()
            .fold(1.0f64, f64::max)
                * log_factor(eps);
            (alpha, Coupling::Beta(beta), k)
        }
    };
    let (beta, eta) = match beta_or_eta {
        // the recipes cap beta at 1; keep it inside the valid [0,1) range
        Coupling::Beta(b) => {
            let b = b.min(1.0 - 1e-9);
            (b, b * r)
        }
        Coupling::Eta(e) => (0.0, e),
    };
    let iterations = (k_raw / c_mult).ceil().max(1.0) as u64;
    let cfg = OptimizerConfig {
        alpha,
        beta,
        eta,
        iterations,
        option,
        radius: r,
        strict_coupling: true,
    };
    cfg.validate()?;
    Ok(cfg)
}

enum Coupling {
    Beta(f64),
    Eta(f64),
}

/// Plain Euclidean SGD comparator `x_{k+1} = x_k - gamma g(x_k)`, radially
/// projected back to the ball when a finite radius is set. Shares the
/// recording schema with [`run`]; the descent inequality is not evaluated.
pub fn euclidean_baseline(
    p: &ProblemSpec,
    steps: u64,
    stepsize: f64,
    seed: u64,
    rec: &Recorder,
) -> Result<TrajectoryRecord> {
    if stepsize < 0.0 {
        return Err(Error::InvalidParameter("stepsize must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = p.combined_b()?;
    let stride = rec.stride.unwrap_or_else(|| auto_stride(steps)).max(1);
    let mut x = p.x_opt.zeros_like();
    let mut prev_x: Option<Point> = None;
    let mut rows = Vec::new();
    let mut k_hit = None;
    let mut running_min = f64::INFINITY;
    for k in 0..=steps {
        let g_sample = grad_sample(p, &x, &mut rng)?.value;
        let store = k % stride == 0 || k == steps;
        let met = record_row(&mut rows, p, &b, k, &x, &g_sample, prev_x.as_ref(), p.radius, store)?;
        running_min = running_min.min(met.criterion);
        if let Some(t) = rec.target {
            let watched = if t.use_f_gap {
                met.f - p.f_opt
            } else {
                running_min
            };
            if k_hit.is_none() && watched <= t.eps {
                k_hit = Some(k);
            }
        }
        if k == steps {
            break;
        }
        let mut x_next = x.axpy(-stepsize, &g_sample)?;
        if p.radius.is_finite() {
            let rn = norm_r(p.space, &x_next)?;
            if rn > p.radius {
                x_next = x_next.scale(p.radius / rn);
            }
        }
        prev_x = Some(std::mem::replace(&mut x, x_next));
    }
    Ok(TrajectoryRecord {
        rows,
        seed,
        config: OptimizerConfig {
            alpha: 1.0,
            beta: 0.0,
            eta: stepsize.max(f64::MIN_POSITIVE),
            iterations: steps,
            option: MomentumOption::M1,
            radius: p.radius,
            strict_coupling: false,
        },
        k_hit,
        censored: rec.target.is_some() && k_hit.is_none(),
        descent_max_violation: None,
        final_x: x,
    })
}
