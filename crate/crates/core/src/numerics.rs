//! Box-constrained nonlinear least squares via multi-start Nelder-Mead.
//!
//! Each start runs an independent simplex search on the residual sum of
//! squares (or any objective passed to [`minimize`]). Box constraints are enforced by clamping the parameter vector
//! before every model evaluation, and the reported parameters are clamped
//! the same way, so they always lie inside the box.

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit needs at least {params} points, got {points}")]
    TooFewPoints { points: usize, params: usize },
    #[error("no start points supplied")]
    NoStarts,
    #[error("start point {index} has {got} parameters, expected {expected}")]
    StartDimension { index: usize, got: usize, expected: usize },
    #[error("parameter {index} has an empty box [{lower}, {upper}]")]
    EmptyBox { index: usize, lower: f64, upper: f64 },
}

/// Closed interval a parameter is clamped into. Either side may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Real> ParamBox<T> {
    pub fn new(lower: T, upper: T) -> Self {
        Self { lower, upper }
    }

    pub fn free() -> Self {
        Self::new(T::neg_infinity(), T::infinity())
    }

    pub fn at_least(lower: T) -> Self {
        Self::new(lower, T::infinity())
    }

    pub fn at_most(upper: T) -> Self {
        Self::new(T::neg_infinity(), upper)
    }

    #[inline]
    pub fn clamp(&self, x: T) -> T {
        if x < self.lower {
            self.lower
        } else if x > self.upper {
            self.upper
        } else {
            x
        }
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Simplex coefficients and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions<T> {
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
    /// Stop once the largest vertex distance from the best vertex drops below this.
    pub diameter_tol: T,
    /// Also stop once `f_worst - f_best <= value_tol * (1 + |f_best|)`. Zero disables it.
    pub value_tol: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self {
            reflection: T::one(),
            expansion: T::lit(2.0),
            contraction: T::lit(0.5),
            shrink: T::lit(0.5),
            diameter_tol: T::lit(1e-8),
            value_tol: T::zero(),
            max_iterations: 500,
        }
    }
}

/// A least-squares problem: minimise `sum (y_i - model(params, x_i))^2`.
pub struct FitProblem<T, M> {
    pub points: Vec<(T, T)>,
    pub model: M,
    pub bounds: Vec<ParamBox<T>>,
    pub starts: Vec<Vec<T>>,
    pub options: SimplexOptions<T>,
}

impl<T, M> FitProblem<T, M>
where
    T: Real,
    M: Fn(&[T], T) -> T,
{
    pub fn new(points: Vec<(T, T)>, model: M, bounds: Vec<ParamBox<T>>, starts: Vec<Vec<T>>) -> Self {
        Self { points, model, bounds, starts, options: SimplexOptions::default() }
    }

    pub fn with_options(mut self, options: SimplexOptions<T>) -> Self {
        self.options = options;
        self
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    fn validate(&self) -> Result<(), FitError> {
        let dim = self.dimension();
        if self.points.len() < dim {
            return Err(FitError::TooFewPoints { points: self.points.len(), params: dim });
        }
        if self.starts.is_empty() {
            return Err(FitError::NoStarts);
        }
        for (index, s) in self.starts.iter().enumerate() {
            if s.len() != dim {
                return Err(FitError::StartDimension { index, got: s.len(), expected: dim });
            }
        }
        for (index, b) in self.bounds.iter().enumerate() {
            if !(b.lower <= b.upper) {
                return Err(FitError::EmptyBox { index, lower: b.lower.as_f64(), upper: b.upper.as_f64() });
            }
        }
        Ok(())
    }

    pub fn clamp_into(&self, params: &[T], out: &mut [T]) {
        for ((o, p), b) in out.iter_mut().zip(params).zip(&self.bounds) {
            *o = b.clamp(*p);
        }
    }

    /// Residual sum of squares at `params` after clamping. Non-finite values map to +inf.
    pub fn rss(&self, params: &[T]) -> T {
        let mut clamped = params.to_vec();
        self.clamp_into(params, &mut clamped);
        self.rss_clamped(&clamped)
    }

    fn rss_clamped(&self, clamped: &[T]) -> T {
        let mut acc = T::zero();
        for &(x, y) in &self.points {
            let r = y - (self.model)(clamped, x);
            acc = acc + r * r;
        }
        if acc.is_finite() {
            acc
        } else {
            T::infinity()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub params: Vec<T>,
    pub rss: T,
    pub converged: bool,
    pub starts_tried: usize,
}

/// Runs one simplex search from every start and keeps the lowest residual.
///
/// Deterministic for a fixed problem. If no start reaches the diameter
/// tolerance the best parameters are still returned with `converged = false`.
pub fn fit<T, M>(problem: &FitProblem<T, M>) -> Result<FitResult<T>, FitError>
where
    T: Real,
    M: Fn(&[T], T) -> T,
{
    problem.validate()?;
    minimize(|p: &[T]| problem.rss_clamped(p), &problem.bounds, &problem.starts, &problem.options)
}

/// Multi-start box-constrained Nelder-Mead on an arbitrary objective.
///
/// The objective always receives clamped parameters; non-finite values are
/// treated as `+inf`. `FitResult::rss` holds the objective value.
pub fn minimize<T, F>(
    objective: F,
    bounds: &[ParamBox<T>],
    starts: &[Vec<T>],
    options: &SimplexOptions<T>,
) -> Result<FitResult<T>, FitError>
where
    T: Real,
    F: Fn(&[T]) -> T,
{
    if starts.is_empty() {
        return Err(FitError::NoStarts);
    }
    for (index, s) in starts.iter().enumerate() {
        if s.len() != bounds.len() {
            return Err(FitError::StartDimension { index, got: s.len(), expected: bounds.len() });
        }
    }
    for (index, b) in bounds.iter().enumerate() {
        if !(b.lower <= b.upper) {
            return Err(FitError::EmptyBox { index, lower: b.lower.as_f64(), upper: b.upper.as_f64() });
        }
    }
    let guarded = |p: &[T]| {
        let v = objective(p);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };
    let mut best: Option<FitResult<T>> = None;
    for start in starts {
        let (params, rss, converged) = nelder_mead(&guarded, bounds, start, options);
        let better = match &best {
            None => true,
            Some(b) => rss < b.rss || (b.rss.is_infinite() && rss.is_finite()),
        };
        if better {
            best = Some(FitResult { params, rss, converged, starts_tried: 0 });
        }
    }
    let mut best = best.expect("at least one start");
    best.starts_tried = starts.len();
    Ok(best)
}

fn clamp_params<T: Real>(bounds: &[ParamBox<T>], params: &[T], out: &mut [T]) {
    for ((o, p), b) in out.iter_mut().zip(params).zip(bounds) {
        *o = b.clamp(*p);
    }
}

fn nelder_mead<T, F>(objective: &F, bounds: &[ParamBox<T>], start: &[T], opts: &SimplexOptions<T>) -> (Vec<T>, T, bool)
where
    T: Real,
    F: Fn(&[T]) -> T,
{
    let dim = bounds.len();
    let mut scratch = vec![T::zero(); dim];
    let eval = |p: &[T], scratch: &mut Vec<T>| {
        clamp_params(bounds, p, scratch);
        objective(scratch)
    };

    let mut x0 = vec![T::zero(); dim];
    clamp_params(bounds, start, &mut x0);

    // fminsearch-style initial simplex: 5% perturbation, or a small absolute step at zero.
    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.clone());
    for i in 0..dim {
        let mut v = x0.clone();
        let step = if v[i] != T::zero() { v[i] * T::lit(0.05) } else { T::lit(0.00025) };
        v[i] = v[i] + step;
        simplex.push(v);
    }
    let mut values: Vec<T> = simplex.iter().map(|v| eval(v, &mut scratch)).collect();

    let mut order: Vec<usize> = (0..=dim).collect();
    let mut centroid = vec![T::zero(); dim];
    let mut trial = vec![T::zero(); dim];
    let mut trial2 = vec![T::zero(); dim];
    let mut converged = false;
    let nf = T::count(dim as u64);

    for _ in 0..opts.max_iterations {
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim.saturating_sub(1)];

        let diameter = simplex
            .iter()
            .map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max))
            .fold(T::zero(), T::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        if opts.value_tol > T::zero()
            && values[worst] - values[best] <= opts.value_tol * (T::one() + values[best].abs())
        {
            converged = true;
            break;
        }

        for c in centroid.iter_mut() {
            *c = T::zero();
        }
        for &idx in order.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c = *c + *x;
            }
        }
        for c in centroid.iter_mut() {
            *c = *c / nf;
        }

        for j in 0..dim {
            trial[j] = centroid[j] + opts.reflection * (centroid[j] - simplex[worst][j]);
        }
        let f_reflect = eval(&trial, &mut scratch);

        if f_reflect < values[best] {
            for j in 0..dim {
                trial2[j] = centroid[j] + opts.expansion * (trial[j] - centroid[j]);
            }
            let f_expand = eval(&trial2, &mut scratch);
            if f_expand < f_reflect {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_expand;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[second_worst] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = f_reflect;
            continue;
        }

        // Contraction: outside if the reflection improved on the worst vertex, inside otherwise.
        let outside = f_reflect < values[worst];
        for j in 0..dim {
            trial2[j] = if outside {
                centroid[j] + opts.contraction * (trial[j] - centroid[j])
            } else {
                centroid[j] + opts.contraction * (simplex[worst][j] - centroid[j])
            };
        }
        let f_contract = eval(&trial2, &mut scratch);
        let accept = if outside { f_contract <= f_reflect } else { f_contract < values[worst] };
        if accept {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = f_contract;
            continue;
        }

        let anchor = simplex[best].clone();
        for idx in 0..=dim {
            if idx == best {
                continue;
            }
            for j in 0..dim {
                simplex[idx][j] = anchor[j] + opts.shrink * (simplex[idx][j] - anchor[j]);
            }
            values[idx] = eval(&simplex[idx], &mut scratch);
        }
    }

    let (best_idx, _) = values.iter().enumerate().fold((0, T::infinity()), |(bi, bv), (i, &v)| {
        if v < bv || (bv.is_infinite() && i == 0) {
            (i, v)
        } else {
            (bi, bv)
        }
    });
    let mut params = vec![T::zero(); dim];
    clamp_params(bounds, &simplex[best_idx], &mut params);
    let rss = values[best_idx];
    (params, rss, converged)
}

/// `count` log-spaced values between `lo` and `hi` inclusive (both positive).
pub fn log_grid<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let steps = T::count((count - 1) as u64);
            (0..count).map(|i| (a + (b - a) * T::count(i as u64) / steps).exp()).collect()
        }
    }
}

/// Cartesian product of per-parameter candidate values, in row-major order.
pub fn grid_starts<T: Real>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect()
    })
}
