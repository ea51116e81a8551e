//! Expected number of new entities from one more query at a node.
//!
//! Three estimators are provided:
//!
//! * **Chao92Shen**: coverage-based richness estimate of the unseen count
//!   `f0`, plugged into Shen's formula `f0 * (1 - (1 - (1 - C) / f0)^k)`.
//! * **HwangShen**: `f0 = K * f1 / n` where `K` is the intercept of the
//!   exponential regression `g(i) ~ b0 * exp(b1 * i^b2)` on the ratios
//!   `g(i) = (n - i) f_i / ((i + 1) f_{i+1})`, then Shen's formula.
//! * **NewRegr**: the direct gain
//!   `G = (K f1/n - K' f1 (1 - p1)^m / (n + m)) / (1 + K'/(n + m))`
//!   with `K` from the same regression, `K'` predicted for the enlarged
//!   sample by a logistic curve fitted to the node's history of `K`
//!   observations, and `p1 = 2 f2 / (n f1)` the Good-Turing singleton
//!   popularity.
//!
//! Exclude lists are handled by deleting the excluded entities from the
//! running sample before estimating. Spread comes from a token-level
//! bootstrap of the (exclusion-adjusted) sample.
//!
//! The pure formulas are generic over [`Real`]; the store-facing entry
//! points work in `f64`.

use crate::domain::{Domain, EntityId, NodeId};
use crate::numerics::{grid_starts, log_grid, minimize, ParamBox, SimplexOptions};
use crate::sample::{FrequencyStats, SampleStore};
use crate::scalar::Real;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EstimatorError {
    #[error("sample is empty; coverage is undefined")]
    EmptySample,
    #[error("unknown estimator `{0}`")]
    UnknownMethod(String),
}

/// Conditions an estimate ran into. Informational; the value is still usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorFlag {
    /// `(1 - C) / f0 > 1` in Shen's formula; the base was clamped to zero.
    ShenBaseClamped = 1,
    /// Coverage estimate was zero (all singletons).
    ZeroCoverage = 2,
    /// The unseen-count estimate hit the cap.
    F0Capped = 4,
    /// Too few usable frequency ratios for the regression; fell back to Chao92.
    RegressionInfeasible = 8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags(u8);

impl Flags {
    pub fn contains(self, flag: EstimatorFlag) -> bool {
        self.0 & flag as u8 != 0
    }

    pub fn insert(&mut self, flag: EstimatorFlag) {
        self.0 |= flag as u8;
    }

    pub fn union(self, other: Flags) -> Flags {
        Flags(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub flags: Flags,
}

impl<T> Flagged<T> {
    pub fn clean(value: T) -> Self {
        Self { value, flags: Flags::default() }
    }

    fn with(value: T, flags: Flags) -> Self {
        Self { value, flags }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GainMethod {
    Chao92Shen,
    HwangShen,
    NewRegr,
}

impl GainMethod {
    pub const ALL: [GainMethod; 3] = [GainMethod::Chao92Shen, GainMethod::HwangShen, GainMethod::NewRegr];
}

impl fmt::Display for GainMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GainMethod::Chao92Shen => "Chao92Shen",
            GainMethod::HwangShen => "HwangShen",
            GainMethod::NewRegr => "NewRegr",
        })
    }
}

impl FromStr for GainMethod {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "chao92shen" | "chao" => Ok(GainMethod::Chao92Shen),
            "hwangshen" | "hwang" => Ok(GainMethod::HwangShen),
            "newregr" | "newr" => Ok(GainMethod::NewRegr),
            _ => Err(EstimatorError::UnknownMethod(s.to_string())),
        }
    }
}

/// Tunables shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// `f0` is capped at `max(cap_factor * D, cap_floor)`.
    pub f0_cap_factor: f64,
    pub f0_cap_floor: f64,
    /// Bootstrap resamples per estimate.
    pub bootstrap: usize,
    /// Variance reported for a node with no observations.
    pub prior_variance: f64,
    /// Minimum history length before the logistic K-curve is fitted.
    pub min_k_history: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { f0_cap_factor: 10.0, f0_cap_floor: 50.0, bootstrap: 100, prior_variance: 1.0, min_k_history: 3 }
    }
}

impl EstimatorConfig {
    pub fn f0_cap<T: Real>(&self, distinct: u64) -> T {
        T::lit((self.f0_cap_factor * distinct as f64).max(self.f0_cap_floor))
    }
}

// ---------------------------------------------------------------------------
// Closed-form pieces

/// Good-Turing coverage `1 - f1 / n`, clamped to `[0, 1]`.
pub fn coverage<T: Real>(stats: &FrequencyStats) -> Result<T, EstimatorError> {
    if stats.n == 0 {
        return Err(EstimatorError::EmptySample);
    }
    let c = T::one() - T::count(stats.f1()) / T::count(stats.n);
    Ok(c.max(T::zero()).min(T::one()))
}

/// Shen's expected number of unseen entities appearing in `k` more draws.
pub fn shen_gain<T: Real>(f0: T, coverage: T, k: u32) -> Flagged<T> {
    if !(f0 > T::zero()) {
        return Flagged::clean(T::zero());
    }
    let mut flags = Flags::default();
    let mut base = T::one() - (T::one() - coverage) / f0;
    if base < T::zero() {
        base = T::zero();
        flags.insert(EstimatorFlag::ShenBaseClamped);
    }
    let gain = f0 * (T::one() - base.powi(k as i32));
    Flagged::with(gain.max(T::zero()), flags)
}

/// Coverage-based Chao (1992) estimate of the number of unseen entities.
pub fn chao92_f0<T: Real>(stats: &FrequencyStats, cfg: &EstimatorConfig) -> Result<Flagged<T>, EstimatorError> {
    let c: T = coverage(stats)?;
    let cap: T = cfg.f0_cap(stats.distinct);
    let mut flags = Flags::default();
    if c <= T::zero() {
        flags.insert(EstimatorFlag::ZeroCoverage);
        flags.insert(EstimatorFlag::F0Capped);
        return Ok(Flagged::with(cap, flags));
    }
    let n = T::count(stats.n);
    let d = T::count(stats.distinct);
    let pair_sum =
        stats.histogram().map(|(i, fi)| T::count((i * (i - 1)) as u64) * T::count(fi)).fold(T::zero(), |a, b| a + b);
    let gamma_sq =
        if stats.n > 1 { ((d / c) * pair_sum / (n * (n - T::one())) - T::one()).max(T::zero()) } else { T::zero() };
    let richness = d / c + n * (T::one() - c) / c * gamma_sq;
    let mut f0 = (richness - d).max(T::zero());
    if f0 > cap {
        f0 = cap;
        flags.insert(EstimatorFlag::F0Capped);
    }
    Ok(Flagged::with(f0, flags))
}

/// The regression targets `g(i) = (n - i) f_i / ((i + 1) f_{i+1})` for every `i`
/// where both frequencies are nonzero.
pub fn frequency_ratios<T: Real>(stats: &FrequencyStats) -> Vec<(T, T)> {
    let top = stats.max_frequency();
    (1..top)
        .filter_map(|i| {
            let (fi, fnext) = (stats.f(i), stats.f(i + 1));
            if fi == 0 || fnext == 0 {
                return None;
            }
            let y = T::count(stats.n - i as u64) * T::count(fi) / (T::count(i as u64 + 1) * T::count(fnext));
            Some((T::count(i as u64), y))
        })
        .collect()
}

/// Minimum number of ratio points for the exponential regression.
pub const MIN_REGRESSION_POINTS: usize = 3;

/// Fitted `y = b0 * exp(b1 * x^b2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit<T> {
    pub b0: T,
    pub b1: T,
    pub b2: T,
    pub rss: T,
}

const PARAM_FLOOR: f64 = 1e-9;

fn fit_options<T: Real>() -> SimplexOptions<T> {
    SimplexOptions { value_tol: T::lit(1e-12), ..SimplexOptions::default() }
}

// Least-squares scale `a` for a fixed shape `s(x)`, clamped into `[lo, hi]`, with its residual.
fn profile_scale<T: Real>(points: &[(T, T)], shape: impl Fn(T) -> T, lo: T, hi: T) -> (T, T) {
    let (mut sy, mut ss) = (T::zero(), T::zero());
    let mut cache = [T::zero(); 64];
    for (j, &(x, y)) in points.iter().enumerate() {
        let e = shape(x);
        if j < cache.len() {
            cache[j] = e;
        }
        sy = sy + y * e;
        ss = ss + e * e;
    }
    let a = if ss > T::zero() { sy / ss } else { lo };
    let a = if a.is_finite() { a.max(lo).min(hi) } else { hi };
    let mut rss = T::zero();
    for (j, &(x, y)) in points.iter().enumerate() {
        let e = if j < cache.len() { cache[j] } else { shape(x) };
        let r = y - a * e;
        rss = rss + r * r;
    }
    (a, rss)
}

fn exp_shape_bounds<T: Real>() -> [ParamBox<T>; 2] {
    let tiny = T::lit(PARAM_FLOOR);
    [ParamBox::at_most(-tiny), ParamBox::at_least(tiny)]
}

fn exp_fit_from<T: Real>(points: &[(T, T)], b0_max: T, starts: &[Vec<T>]) -> Option<ExpFit<T>> {
    let tiny = T::lit(PARAM_FLOOR);
    let b0_max = b0_max.max(tiny);
    let objective = |p: &[T]| profile_scale(points, |x| (p[0] * x.powf(p[1])).exp(), tiny, b0_max).1;
    let best = minimize(objective, &exp_shape_bounds(), starts, &fit_options()).ok()?;
    let (b1, b2) = (best.params[0], best.params[1]);
    let (b0, rss) = profile_scale(points, |x| (b1 * x.powf(b2)).exp(), tiny, b0_max);
    rss.is_finite().then_some(ExpFit { b0, b1, b2, rss })
}

/// Fits `y = b0 * exp(b1 * x^b2)` with `b0` in `[1e-9, b0_max]`, `b1 <= -1e-9`, `b2 >= 1e-9`.
///
/// `b0` enters linearly and is solved in closed form; the simplex searches
/// `(b1, b2)` from eight log-spaced starts. Returns `None` with fewer than
/// [`MIN_REGRESSION_POINTS`] points.
pub fn exponential_regression<T: Real>(points: &[(T, T)], b0_max: T) -> Option<ExpFit<T>> {
    if points.len() < MIN_REGRESSION_POINTS {
        return None;
    }
    let starts = grid_starts(&[
        log_grid(T::lit(0.05), T::lit(2.0), 4).into_iter().map(|v| -v).collect(),
        log_grid(T::lit(0.5), T::lit(1.5), 2),
    ]);
    exp_fit_from(points, b0_max, &starts)
}

/// Single-start refit from a known shape `(b1, b2)`, used for bootstrap replicates.
pub fn exponential_regression_near<T: Real>(points: &[(T, T)], b0_max: T, shape: (T, T)) -> Option<ExpFit<T>> {
    if points.len() < MIN_REGRESSION_POINTS {
        return None;
    }
    exp_fit_from(points, b0_max, &[vec![shape.0, shape.1]])
}

/// Largest admissible `K`: `f0 = K f1 / n` may not exceed the f0 cap. Infinite when `f1 = 0`.
pub fn k_cap<T: Real>(stats: &FrequencyStats, cfg: &EstimatorConfig) -> T {
    if stats.f1() == 0 {
        return T::infinity();
    }
    cfg.f0_cap::<T>(stats.distinct) * T::count(stats.n) / T::count(stats.f1())
}

fn regression_fit<T: Real>(
    stats: &FrequencyStats,
    cfg: &EstimatorConfig,
    near: Option<(T, T)>,
) -> Option<(Flagged<T>, ExpFit<T>)> {
    let points = frequency_ratios::<T>(stats);
    let cap = k_cap::<T>(stats, cfg);
    let fit = match near {
        Some(shape) => exponential_regression_near(&points, cap, shape),
        None => exponential_regression(&points, cap),
    }?;
    let mut flags = Flags::default();
    if cap.is_finite() && fit.b0 >= cap * (T::one() - T::lit(1e-9)) {
        flags.insert(EstimatorFlag::F0Capped);
    }
    Some((Flagged::with(fit.b0, flags), fit))
}

/// Regression estimate of `K`: the fitted intercept `b0`, bounded by [`k_cap`].
pub fn regression_k<T: Real>(stats: &FrequencyStats, cfg: &EstimatorConfig) -> Option<Flagged<T>> {
    regression_fit(stats, cfg, None).map(|r| r.0)
}

/// Hwang-Shen unseen count `K * f1 / n`, falling back to Chao92 when the regression is infeasible.
pub fn hwangshen_f0<T: Real>(stats: &FrequencyStats, cfg: &EstimatorConfig) -> Result<Flagged<T>, EstimatorError> {
    hwangshen_f0_near(stats, cfg, None).map(|r| r.0)
}

fn hwangshen_f0_near<T: Real>(
    stats: &FrequencyStats,
    cfg: &EstimatorConfig,
    near: Option<(T, T)>,
) -> Result<(Flagged<T>, Option<ExpFit<T>>), EstimatorError> {
    if stats.n == 0 {
        return Err(EstimatorError::EmptySample);
    }
    if stats.f1() == 0 {
        return Ok((Flagged::clean(T::zero()), None));
    }
    match regression_fit::<T>(stats, cfg, near) {
        Some((k, fit)) => {
            let cap: T = cfg.f0_cap(stats.distinct);
            let f0 = (k.value * T::count(stats.f1()) / T::count(stats.n)).min(cap);
            Ok((Flagged::with(f0, k.flags), Some(fit)))
        }
        None => {
            let mut r = chao92_f0::<T>(stats, cfg)?;
            r.flags.insert(EstimatorFlag::RegressionInfeasible);
            Ok((r, None))
        }
    }
}

/// `K(n) = sum (1 - p_i)^n / sum p_i (1 - p_i)^(n - 1)` for known abundances.
/// Returns 0 when the denominator vanishes.
pub fn k_exact<T: Real>(popularities: &[T], n: u32) -> T {
    let (num, den) = popularities.iter().fold((T::zero(), T::zero()), |(num, den), &p| {
        let q = T::one() - p;
        (num + q.powi(n as i32), den + p * q.powi(n as i32 - 1))
    });
    if den > T::zero() {
        num / den
    } else {
        T::zero()
    }
}

/// Good-Turing popularity of a singleton of the sample.
pub fn singleton_popularity<T: Real>(stats: &FrequencyStats) -> T {
    good_turing_p1(stats.n, stats.f1(), stats.f2())
}

/// `2 f2 / (n f1)`, clamped to `[0, 1]`; 0 without singletons or doubletons.
pub fn good_turing_p1<T: Real>(n: u64, f1: u64, f2: u64) -> T {
    if n == 0 || f1 == 0 || f2 == 0 {
        return T::zero();
    }
    let p = T::lit(2.0) * T::count(f2) / (T::count(n) * T::count(f1));
    p.max(T::zero()).min(T::one())
}

/// Direct gain of `m` more draws, clamped to `[0, m]`.
pub fn direct_gain<T: Real>(k: T, k_next: T, f1: u64, n: u64, p1: T, m: u32) -> T {
    if n == 0 || f1 == 0 {
        return T::zero();
    }
    let (f1, n, mm) = (T::count(f1), T::count(n), T::count(m as u64));
    let grown = n + mm;
    let numerator = k * f1 / n - k_next * f1 * (T::one() - p1).powi(m as i32) / grown;
    let g = numerator / (T::one() + k_next / grown);
    if g.is_nan() {
        return T::zero();
    }
    g.max(T::zero()).min(mm)
}

/// Logistic model of `K` as a function of sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KModel<T> {
    /// `K(x) = a / (1 + exp(-b (x - c)))`.
    Fitted {
        a: T,
        b: T,
        c: T,
    },
    InsufficientData,
}

impl<T: Real> KModel<T> {
    /// Fits the curve to `(sample size, K)` observations. Needs `min_points` distinct sizes.
    pub fn fit(history: &[(u64, T)], min_points: usize) -> Self {
        let mut distinct: Vec<u64> = history.iter().map(|h| h.0).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < min_points.max(3) {
            return KModel::InsufficientData;
        }
        let points: Vec<(T, T)> = history.iter().map(|&(n, k)| (T::count(n), k)).collect();
        let k_max = points.iter().map(|p| p.1).fold(T::zero(), T::max);
        let (x_lo, x_hi) = (T::count(distinct[0]), T::count(*distinct.last().unwrap()));
        let span = (x_hi - x_lo).max(T::one());
        let a_floor = k_max.max(T::lit(1e-12));
        let logistic = |b: T, c: T| move |x: T| T::one() / (T::one() + (-b * (x - c)).exp());
        // `a` is linear and solved in closed form; the simplex searches `(b, c)`.
        let starts = grid_starts(&[log_grid(T::lit(0.1) / span, T::lit(4.0) / span, 4), vec![x_lo, x_hi]]);
        let bounds = [ParamBox::at_least(T::zero()), ParamBox::free()];
        let objective = |p: &[T]| profile_scale(&points, logistic(p[0], p[1]), a_floor, T::infinity()).1;
        match minimize(objective, &bounds, &starts, &fit_options()) {
            Ok(r) if r.rss.is_finite() => {
                let (b, c) = (r.params[0], r.params[1]);
                let (a, _) = profile_scale(&points, logistic(b, c), a_floor, T::infinity());
                KModel::Fitted { a, b, c }
            }
            _ => KModel::InsufficientData,
        }
    }

    pub fn predict(&self, x: T) -> Option<T> {
        match *self {
            KModel::Fitted { a, b, c } => Some(a / (T::one() + (-b * (x - c)).exp())),
            KModel::InsufficientData => None,
        }
    }

    pub fn is_fitted(&self) -> bool {
        matches!(self, KModel::Fitted { .. })
    }
}

/// The `K` observation a sample contributes to the node's history:
/// the regression intercept, or `n f0 / f1` from Chao92 when the regression is infeasible.
pub fn k_observation<T: Real>(stats: &FrequencyStats, cfg: &EstimatorConfig) -> Option<Flagged<T>> {
    k_observation_near(stats, cfg, None).map(|r| r.0)
}

fn k_observation_near<T: Real>(
    stats: &FrequencyStats,
    cfg: &EstimatorConfig,
    near: Option<(T, T)>,
) -> Option<(Flagged<T>, Option<ExpFit<T>>)> {
    if stats.n == 0 || stats.f1() == 0 {
        return None;
    }
    if let Some((k, fit)) = regression_fit::<T>(stats, cfg, near) {
        return Some((k, Some(fit)));
    }
    let f0 = chao92_f0::<T>(stats, cfg).ok()?;
    let mut flags = f0.flags;
    flags.insert(EstimatorFlag::RegressionInfeasible);
    Some((Flagged::with(T::count(stats.n) * f0.value / T::count(stats.f1()), flags), None))
}

/// Direct (NewRegr) gain of `m` more draws given the node's fitted K-curve.
pub fn newregr_gain<T: Real>(
    stats: &FrequencyStats,
    m: u32,
    k_model: &KModel<T>,
    cfg: &EstimatorConfig,
) -> Result<Flagged<T>, EstimatorError> {
    if stats.n == 0 {
        return Err(EstimatorError::EmptySample);
    }
    let Some(k) = k_observation::<T>(stats, cfg) else {
        return Ok(Flagged::clean(T::zero()));
    };
    let k_next = next_k(k.value, k_model, stats.n, m);
    let p1 = singleton_popularity::<T>(stats);
    Ok(Flagged::with(direct_gain(k.value, k_next, stats.f1(), stats.n, p1, m), k.flags))
}

// K is nondecreasing in the sample size, so the current K bounds the prediction from below.
fn next_k<T: Real>(k: T, model: &KModel<T>, n: u64, m: u32) -> T {
    model.predict(T::count(n + m as u64)).map_or(k, |p| if p.is_finite() { p.max(k) } else { k })
}

/// Point gain estimate of `q(k, .)` on an already exclusion-adjusted sample.
pub fn point_gain<T: Real>(
    method: GainMethod,
    stats: &FrequencyStats,
    k: u32,
    k_model: &KModel<T>,
    cfg: &EstimatorConfig,
) -> Result<T, EstimatorError> {
    let prepared = Prepared::new(method, stats, k_model, cfg)?;
    Ok(prepared.gain(k))
}

/// Per-sample quantities that do not depend on the query size.
enum Prepared<'m, T> {
    Shen { f0: T, coverage: T },
    Direct { k: T, f1: u64, n: u64, p1: T, model: &'m KModel<T> },
    Zero,
}

impl<'m, T: Real> Prepared<'m, T> {
    fn new(
        method: GainMethod,
        stats: &FrequencyStats,
        model: &'m KModel<T>,
        cfg: &EstimatorConfig,
    ) -> Result<Self, EstimatorError> {
        Self::near(method, stats, model, cfg, None).map(|r| r.0)
    }

    /// `near` seeds the regression with a known shape; the fitted shape is returned for reuse.
    fn near(
        method: GainMethod,
        stats: &FrequencyStats,
        model: &'m KModel<T>,
        cfg: &EstimatorConfig,
        near: Option<(T, T)>,
    ) -> Result<(Self, Option<(T, T)>), EstimatorError> {
        let shape = |f: Option<ExpFit<T>>| f.map(|f| (f.b1, f.b2));
        Ok(match method {
            GainMethod::Chao92Shen => {
                (Prepared::Shen { f0: chao92_f0::<T>(stats, cfg)?.value, coverage: coverage(stats)? }, None)
            }
            GainMethod::HwangShen => {
                let (f0, fit) = hwangshen_f0_near::<T>(stats, cfg, near)?;
                (Prepared::Shen { f0: f0.value, coverage: coverage(stats)? }, shape(fit))
            }
            GainMethod::NewRegr => {
                if stats.n == 0 {
                    return Err(EstimatorError::EmptySample);
                }
                match k_observation_near::<T>(stats, cfg, near) {
                    Some((k, fit)) => (
                        Prepared::Direct {
                            k: k.value,
                            f1: stats.f1(),
                            n: stats.n,
                            p1: singleton_popularity(stats),
                            model,
                        },
                        shape(fit),
                    ),
                    None => (Prepared::Zero, None),
                }
            }
        })
    }

    fn gain(&self, m: u32) -> T {
        let g = match *self {
            Prepared::Shen { f0, coverage } => shen_gain(f0, coverage, m).value,
            Prepared::Direct { k, f1, n, p1, model } => direct_gain(k, next_k(k, model, n, m), f1, n, p1, m),
            Prepared::Zero => T::zero(),
        };
        g.max(T::zero()).min(T::count(m as u64))
    }
}

// ---------------------------------------------------------------------------
// Store-facing estimates with bootstrap spread

/// Expected new entities from a candidate query, with its bootstrap variance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GainEstimate<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Real> GainEstimate<T> {
    pub fn zero() -> Self {
        Self { mean: T::zero(), variance: T::zero() }
    }

    pub fn upper(&self, sigma: T) -> T {
        self.mean + sigma
    }

    pub fn lower(&self, sigma: T) -> T {
        self.mean - sigma
    }
}

/// Uniformly random exclude list of `min(l, D)` distinct entities observed at `node`.
pub fn draw_exclude_list<R: Rng + ?Sized>(
    store: &SampleStore,
    node: &NodeId,
    l: u32,
    rng: &mut R,
) -> BTreeSet<EntityId> {
    if l == 0 {
        return BTreeSet::new();
    }
    let distinct = store.distinct_entities(node);
    distinct.choose_multiple(rng, (l as usize).min(distinct.len())).copied().collect()
}

/// Estimates for several query sizes sharing one node and one exclude list.
///
/// Dead nodes get zero; an empty (exclusion-adjusted) sample gets the
/// optimistic default `(k, prior_variance)`. Otherwise the mean is the
/// point estimate and the variance comes from `cfg.bootstrap` token-level
/// resamples drawn from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_group(
    method: GainMethod,
    domain: &Domain,
    store: &SampleStore,
    node: &NodeId,
    exclude: &BTreeSet<EntityId>,
    ks: &[u32],
    k_model: &KModel<f64>,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Vec<GainEstimate<f64>> {
    if store.is_dead(domain, node) {
        return vec![GainEstimate::zero(); ks.len()];
    }
    let counts: Vec<u32> = store
        .node(node)
        .map(|s| s.occurrences.iter().filter(|(id, _)| !exclude.contains(id)).map(|(_, &c)| c).collect())
        .unwrap_or_default();
    let stats = FrequencyStats::from_counts(counts.iter().copied());
    if stats.n == 0 {
        return ks.iter().map(|&k| GainEstimate { mean: k as f64, variance: cfg.prior_variance }).collect();
    }
    let Ok((point, shape)) = Prepared::near(method, &stats, k_model, cfg, None) else {
        return vec![GainEstimate::zero(); ks.len()];
    };
    let means: Vec<f64> = ks.iter().map(|&k| point.gain(k)).collect();
    let variances = bootstrap_replicates(method, &counts, ks, k_model, cfg, seed, shape);
    means.into_iter().zip(variances).map(|(mean, variance)| GainEstimate { mean, variance }).collect()
}

/// Per-`k` sample variance of the gain over multinomial resamples of the occurrence tokens.
///
/// Regression-based methods refit each replicate from the shape fitted on the full sample.
pub fn bootstrap_variances(
    method: GainMethod,
    counts: &[u32],
    ks: &[u32],
    k_model: &KModel<f64>,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Vec<f64> {
    let stats = FrequencyStats::from_counts(counts.iter().copied());
    let shape = Prepared::near(method, &stats, k_model, cfg, None).ok().and_then(|p| p.1);
    bootstrap_replicates(method, counts, ks, k_model, cfg, seed, shape)
}

fn bootstrap_replicates(
    method: GainMethod,
    counts: &[u32],
    ks: &[u32],
    k_model: &KModel<f64>,
    cfg: &EstimatorConfig,
    seed: u64,
    shape: Option<(f64, f64)>,
) -> Vec<f64> {
    let b = cfg.bootstrap;
    if b < 2 {
        return vec![0.0; ks.len()];
    }
    let tokens: Vec<u32> =
        counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i as u32, c as usize)).collect();
    if tokens.is_empty() {
        return vec![0.0; ks.len()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resampled = vec![0u32; counts.len()];
    // Welford accumulators per k.
    let mut mean = vec![0.0f64; ks.len()];
    let mut m2 = vec![0.0f64; ks.len()];
    for rep in 0..b {
        resampled.iter_mut().for_each(|c| *c = 0);
        for _ in 0..tokens.len() {
            resampled[tokens[rng.gen_range(0..tokens.len())] as usize] += 1;
        }
        let stats = FrequencyStats::from_counts(resampled.iter().copied());
        let prepared = match Prepared::near(method, &stats, k_model, cfg, shape) {
            Ok(p) => p.0,
            Err(_) => Prepared::Zero,
        };
        for (j, &k) in ks.iter().enumerate() {
            let g = prepared.gain(k);
            let delta = g - mean[j];
            mean[j] += delta / (rep + 1) as f64;
            m2[j] += delta * (g - mean[j]);
        }
    }
    m2.into_iter().map(|s| s / (b - 1) as f64).collect()
}

/// Single-query estimate: draws the exclude list from `seed`, fits the node's K-curve, and
/// bootstraps the spread.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gain(
    method: GainMethod,
    domain: &Domain,
    store: &SampleStore,
    node: &NodeId,
    k: u32,
    l: u32,
    cfg: &EstimatorConfig,
    seed: u64,
) -> GainEstimate<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exclude = draw_exclude_list(store, node, l, &mut rng);
    let model = match (method, store.node(node)) {
        (GainMethod::NewRegr, Some(state)) => KModel::fit(&state.k_history, cfg.min_k_history),
        _ => KModel::InsufficientData,
    };
    estimate_group(method, domain, store, node, &exclude, &[k], &model, cfg, rng.gen())[0]
}
