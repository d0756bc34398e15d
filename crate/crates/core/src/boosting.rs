//! Gentle AdaBoost over single-dimension regression stumps.
//!
//! A weak learner is `f(x) = a * sigmoid(x^d - delta) + b`; each round picks
//! the `(d, delta, a, b)` minimizing the weighted squared error against the
//! +/-1 labels, with `(a, b)` solved in closed form from the weighted normal
//! equations. Sample weights follow `w_i <- w_i * exp(-y_i f(x_i))` with
//! renormalization.
//!
//! The indicator-stump variant (`f(x) = a * 1[x^d > delta] + b`) mirrors the
//! textbook Gentle AdaBoost weak learner and exists as a cross-check oracle
//! for the sigmoid path.

use std::io::Write;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::par;

/// Sigmoid regression stump: `scale * sigmoid(x[dim] - threshold) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stump {
    pub dim: usize,
    pub threshold: f64,
    pub scale: f64,
    pub offset: f64,
}

impl Stump {
    #[inline]
    pub fn evaluate_value(&self, v: f64) -> f64 {
        self.scale * sigmoid(v - self.threshold) + self.offset
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.evaluate_value(x[self.dim])
    }
}

/// Indicator ("hard") stump, the oracle counterpart of [`Stump`].
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorStump {
    pub dim: usize,
    pub threshold: f64,
    pub scale: f64,
    pub offset: f64,
}

impl IndicatorStump {
    #[inline]
    pub fn evaluate_value(&self, v: f64) -> f64 {
        if v > self.threshold {
            self.scale + self.offset
        } else {
            self.offset
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.evaluate_value(x[self.dim])
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Additive ensemble of sigmoid stumps, capped at `rounds` members.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongClassifier {
    stumps: Vec<Stump>,
    rounds: usize,
}

impl StrongClassifier {
    pub fn new(rounds: usize) -> Self {
        Self {
            stumps: Vec::new(),
            rounds,
        }
    }

    pub fn push(&mut self, stump: Stump) {
        assert!(self.stumps.len() < self.rounds, "round cap exceeded");
        self.stumps.push(stump);
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.stumps
    }

    pub fn len(&self) -> usize {
        self.stumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stumps.is_empty()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Sum of the stump responses; errors when `x` is too short for any
    /// stump's dimension.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if let Some(max_dim) = self.stumps.iter().map(|s| s.dim).max() {
            if max_dim >= x.len() {
                return Err(Error::DimensionMismatch(format!(
                    "classifier uses dimension {max_dim}, input has {}",
                    x.len()
                )));
            }
        }
        Ok(self.stumps.iter().map(|s| s.evaluate(x)).sum())
    }
}

/// Normalized, nonnegative boosting weights; the sum is held at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights {
    w: Vec<f64>,
}

impl SampleWeights {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("weights need >= 1 sample"));
        }
        Ok(Self {
            w: vec![1.0 / n as f64; n],
        })
    }

    /// Normalizes arbitrary nonnegative weights to sum 1.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput("weights need >= 1 sample"));
        }
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::ZeroWeights);
        }
        Ok(Self {
            w: raw.into_iter().map(|v| v / sum).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// `w_i <- w_i * exp(-y_i f_i)`, renormalized to sum 1. A sum that vanishes
/// or overflows signals divergence and is reported as an error.
pub fn update_weights(w: &SampleWeights, f_values: &[f64], y: &[i8]) -> Result<SampleWeights> {
    if w.len() != f_values.len() || w.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "weights {}, scores {}, labels {}",
            w.len(),
            f_values.len(),
            y.len()
        )));
    }
    let mut updated = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let wi = w.values()[i];
        let nw = if wi > 0.0 {
            wi * (-(y[i] as f64) * f_values[i]).exp()
        } else {
            0.0
        };
        updated.push(nw);
    }
    let sum: f64 = updated.iter().sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::WeightUnderflow);
    }
    for v in &mut updated {
        *v /= sum;
    }
    Ok(SampleWeights { w: updated })
}

/// The weak-learner shapes share one search; only the link differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WeakShape {
    Sigmoid,
    Indicator,
}

impl WeakShape {
    #[inline]
    fn link(self, v: f64, threshold: f64) -> f64 {
        match self {
            WeakShape::Sigmoid => sigmoid(v - threshold),
            WeakShape::Indicator => {
                if v > threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct WeakFit {
    dim: usize,
    threshold: f64,
    scale: f64,
    offset: f64,
    weighted_error: f64,
}

/// Max candidate thresholds per dimension; midpoints beyond this are thinned
/// to evenly spaced quantiles of the distinct-value midpoints.
const MAX_THRESHOLD_CANDIDATES: usize = 64;

/// Feature values grouped and sorted per dimension so each boosting round
/// costs one linear walk per dimension instead of a sort.
pub struct SortedColumns {
    n: usize,
    columns: Vec<ColumnOrder>,
}

struct ColumnOrder {
    /// sample indices ordered by ascending feature value
    order: Vec<u32>,
    /// feature values in that order
    values: Vec<f64>,
}

impl SortedColumns {
    pub fn build(x: &FeatureMatrix) -> Self {
        let n = x.n_samples();
        let columns = par::map_range(x.n_dims(), |d| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| {
                x.get(a as usize, d)
                    .total_cmp(&x.get(b as usize, d))
                    .then(a.cmp(&b))
            });
            let values = order.iter().map(|&i| x.get(i as usize, d)).collect();
            ColumnOrder { order, values }
        });
        Self { n, columns }
    }

    pub fn n_dims(&self) -> usize {
        self.columns.len()
    }
}

/// Weighted label sums of the samples sharing one feature value.
struct ValueGroup {
    value: f64,
    sw: f64,
    swy: f64,
}

fn column_groups(col: &ColumnOrder, w: &[f64], y: &[i8]) -> Vec<ValueGroup> {
    let mut groups: Vec<ValueGroup> = Vec::new();
    for (pos, &idx) in col.order.iter().enumerate() {
        let wi = w[idx as usize];
        if wi == 0.0 {
            // zero-weight samples contribute nothing, not even candidates
            continue;
        }
        let v = col.values[pos];
        let wy = wi * y[idx as usize] as f64;
        match groups.last_mut() {
            Some(g) if g.value == v => {
                g.sw += wi;
                g.swy += wy;
            }
            _ => groups.push(ValueGroup {
                value: v,
                sw: wi,
                swy: wy,
            }),
        }
    }
    groups
}

/// Candidate thresholds: midpoints of consecutive distinct observed values,
/// thinned to at most [`MAX_THRESHOLD_CANDIDATES`].
fn candidate_thresholds(groups: &[ValueGroup]) -> Vec<f64> {
    let mids = groups.len().saturating_sub(1);
    if mids == 0 {
        return Vec::new();
    }
    let midpoint = |i: usize| 0.5 * (groups[i].value + groups[i + 1].value);
    if mids <= MAX_THRESHOLD_CANDIDATES {
        return (0..mids).map(midpoint).collect();
    }
    let mut out = Vec::with_capacity(MAX_THRESHOLD_CANDIDATES);
    let mut last = usize::MAX;
    for i in 0..MAX_THRESHOLD_CANDIDATES {
        let idx = i * (mids - 1) / (MAX_THRESHOLD_CANDIDATES - 1);
        if idx != last {
            out.push(midpoint(idx));
            last = idx;
        }
    }
    out
}

/// Closed-form weighted least squares for `(a, b)` at a fixed `(d, delta)`,
/// returning the fit and its weighted squared error. `sum_y` is the global
/// weighted label mean (weights sum to 1).
fn solve_candidate(
    groups: &[ValueGroup],
    threshold: f64,
    shape: WeakShape,
    sum_y: f64,
) -> Option<(f64, f64, f64)> {
    let mut s_s = 0.0;
    let mut s_ss = 0.0;
    let mut s_sy = 0.0;
    for g in groups {
        let s = shape.link(g.value, threshold);
        s_s += g.sw * s;
        s_ss += g.sw * s * s;
        s_sy += g.swy * s;
    }
    let det = s_ss - s_s * s_s;
    if det <= 1e-14 {
        return None; // constant link on the support: falls back to the constant fit
    }
    let a = (s_sy - s_s * sum_y) / det;
    let b = sum_y - a * s_s;
    // err = sum w (a s + b - y)^2 with sum w = sum w y^2 = 1
    let err = 1.0 - 2.0 * (a * s_sy + b * sum_y) + a * a * s_ss + 2.0 * a * b * s_s + b * b;
    Some((a, b, err.max(0.0)))
}

fn fit_weak(
    columns: &SortedColumns,
    y: &[i8],
    w: &SampleWeights,
    shape: WeakShape,
) -> Result<WeakFit> {
    let n = columns.n;
    if n < 2 {
        return Err(Error::InvalidArgument(
            "stump fitting needs >= 2 samples".into(),
        ));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix rows {n}, labels {}, weights {}",
            y.len(),
            w.len()
        )));
    }
    if y.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if w.values().iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroWeights);
    }
    let sum_y: f64 = w
        .values()
        .iter()
        .zip(y)
        .map(|(&wi, &yi)| wi * yi as f64)
        .sum();

    // best constant predictor; always a valid fallback
    let constant = WeakFit {
        dim: 0,
        threshold: 0.0,
        scale: 0.0,
        offset: sum_y,
        weighted_error: (1.0 - sum_y * sum_y).max(0.0),
    };

    // per-dimension bests, in dimension order for deterministic tie-breaks
    let per_dim: Vec<Option<WeakFit>> = par::map_range(columns.n_dims(), |d| {
        let groups = column_groups(&columns.columns[d], w.values(), y);
        let mut best: Option<WeakFit> = None;
        for threshold in candidate_thresholds(&groups) {
            if let Some((a, b, err)) = solve_candidate(&groups, threshold, shape, sum_y) {
                if best.as_ref().is_none_or(|c| err < c.weighted_error) {
                    best = Some(WeakFit {
                        dim: d,
                        threshold,
                        scale: a,
                        offset: b,
                        weighted_error: err,
                    });
                }
            }
        }
        best
    });

    let mut best = constant;
    for cand in per_dim.into_iter().flatten() {
        if cand.weighted_error < best.weighted_error {
            best = cand;
        }
    }
    Ok(best)
}

/// Fits the sigmoid regression stump minimizing weighted squared error over
/// all dimensions and candidate thresholds; ties resolve to the lowest
/// dimension, then the lowest threshold. The constant fit `(a=0, b=mean)` is
/// always in the candidate set.
pub fn fit_stump(x: &FeatureMatrix, y: &[i8], w: &SampleWeights) -> Result<Stump> {
    let columns = SortedColumns::build(x);
    let fit = fit_weak(&columns, y, w, WeakShape::Sigmoid)?;
    Ok(Stump {
        dim: fit.dim,
        threshold: fit.threshold,
        scale: fit.scale,
        offset: fit.offset,
    })
}

/// Indicator-stump counterpart of [`fit_stump`]; oracle use only.
pub fn fit_stump_indicator(x: &FeatureMatrix, y: &[i8], w: &SampleWeights) -> Result<IndicatorStump> {
    let columns = SortedColumns::build(x);
    let fit = fit_weak(&columns, y, w, WeakShape::Indicator)?;
    Ok(IndicatorStump {
        dim: fit.dim,
        threshold: fit.threshold,
        scale: fit.scale,
        offset: fit.offset,
    })
}

/// Per-round training diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    pub round: usize,
    pub dim: usize,
    pub threshold: f64,
    pub scale: f64,
    pub offset: f64,
    /// weighted squared error of the applied stump
    pub weighted_error: f64,
    /// training misclassification rate of the accumulated ensemble
    pub train_error: f64,
    /// training exponential loss of the accumulated ensemble
    pub exp_loss: f64,
}

/// A trained ensemble plus its per-round trace.
#[derive(Debug, Clone)]
pub struct BoostRun {
    pub classifier: StrongClassifier,
    pub rounds: Vec<RoundStats>,
}

/// Indicator-stump ensemble produced by the oracle training path.
#[derive(Debug, Clone)]
pub struct IndicatorRun {
    pub stumps: Vec<IndicatorStump>,
    pub rounds: Vec<RoundStats>,
}

impl IndicatorRun {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.evaluate(x)).sum()
    }
}

struct TrainState {
    scores: Vec<f64>,
    weights: SampleWeights,
    stats: Vec<RoundStats>,
    zero_streak: usize,
}

/// Shared boosting loop. The fitted stump is damped (both coefficients
/// halved) in the rare case its full step would raise the training
/// exponential loss, preserving the descent property of the weight update.
fn train_loop(
    columns: &SortedColumns,
    y: &[i8],
    rounds: usize,
    shape: WeakShape,
    mut on_stump: impl FnMut(&WeakFit),
) -> Result<TrainState> {
    let n = columns.n;
    let mut state = TrainState {
        scores: vec![0.0; n],
        weights: SampleWeights::uniform(n)?,
        stats: Vec::new(),
        zero_streak: 0,
    };
    for round in 1..=rounds {
        let mut fit = fit_weak(columns, y, &state.weights, shape)?;
        let col = &columns.columns[fit.dim];
        let mut f_values = vec![0.0; n];
        for (pos, &idx) in col.order.iter().enumerate() {
            f_values[idx as usize] =
                fit.scale * shape.link(col.values[pos], fit.threshold) + fit.offset;
        }

        // rho = sum_i w_i exp(-y_i f_i); rho <= 1 means the update cannot
        // raise the exponential loss. Halve the step while it would.
        let rho = |fv: &[f64]| -> f64 {
            state
                .weights
                .values()
                .iter()
                .zip(fv)
                .zip(y)
                .filter(|((w, _), _)| **w > 0.0)
                .map(|((w, f), &yi)| w * (-(yi as f64) * f).exp())
                .sum()
        };
        let mut halvings = 0;
        while rho(&f_values) > 1.0 + 1e-12 && halvings < 60 {
            fit.scale *= 0.5;
            fit.offset *= 0.5;
            for f in &mut f_values {
                *f *= 0.5;
            }
            halvings += 1;
        }
        if halvings > 0 {
            fit.weighted_error = state
                .weights
                .values()
                .iter()
                .zip(&f_values)
                .zip(y)
                .map(|((w, f), &yi)| w * (f - yi as f64) * (f - yi as f64))
                .sum();
        }

        state.weights = update_weights(&state.weights, &f_values, y)?;
        debug_assert!((state.weights.sum() - 1.0).abs() < 1e-9);

        for (s, f) in state.scores.iter_mut().zip(&f_values) {
            *s += f;
        }
        let mistakes = state
            .scores
            .iter()
            .zip(y)
            .filter(|(&s, &yi)| s * yi as f64 <= 0.0)
            .count();
        let train_error = mistakes as f64 / n as f64;
        let exp_loss: f64 = state
            .scores
            .iter()
            .zip(y)
            .map(|(&s, &yi)| (-(yi as f64) * s).exp())
            .sum();
        state.stats.push(RoundStats {
            round,
            dim: fit.dim,
            threshold: fit.threshold,
            scale: fit.scale,
            offset: fit.offset,
            weighted_error: fit.weighted_error,
            train_error,
            exp_loss,
        });
        on_stump(&fit);

        if train_error == 0.0 {
            state.zero_streak += 1;
            if state.zero_streak >= 3 {
                break;
            }
        } else {
            state.zero_streak = 0;
        }
    }
    Ok(state)
}

/// Runs up to `rounds` boosting rounds, early-stopping after three
/// consecutive rounds at zero training error.
pub fn train_strong(x: &FeatureMatrix, y: &[i8], rounds: usize) -> Result<BoostRun> {
    let columns = SortedColumns::build(x);
    train_strong_on(&columns, y, rounds)
}

/// [`train_strong`] on pre-sorted columns, for callers that refit several
/// times over one feature matrix.
pub fn train_strong_on(columns: &SortedColumns, y: &[i8], rounds: usize) -> Result<BoostRun> {
    let mut classifier = StrongClassifier::new(rounds);
    let state = train_loop(columns, y, rounds, WeakShape::Sigmoid, |fit| {
        classifier.push(Stump {
            dim: fit.dim,
            threshold: fit.threshold,
            scale: fit.scale,
            offset: fit.offset,
        });
    })?;
    Ok(BoostRun {
        classifier,
        rounds: state.stats,
    })
}

/// Indicator-stump training used to cross-check sigmoid-stump decisions.
pub fn train_strong_indicator(x: &FeatureMatrix, y: &[i8], rounds: usize) -> Result<IndicatorRun> {
    let columns = SortedColumns::build(x);
    let mut stumps = Vec::new();
    let state = train_loop(&columns, y, rounds, WeakShape::Indicator, |fit| {
        stumps.push(IndicatorStump {
            dim: fit.dim,
            threshold: fit.threshold,
            scale: fit.scale,
            offset: fit.offset,
        });
    })?;
    Ok(IndicatorRun {
        stumps,
        rounds: state.stats,
    })
}

/// Writes the per-round diagnostics CSV (`round,dim,threshold,scale,offset,
/// weighted_error,train_error`).
pub fn write_round_csv<W: Write>(out: &mut W, rounds: &[RoundStats]) -> std::io::Result<()> {
    writeln!(out, "round,dim,threshold,scale,offset,weighted_error,train_error")?;
    for r in rounds {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round, r.dim, r.threshold, r.scale, r.offset, r.weighted_error, r.train_error
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let d = rows[0].len();
        FeatureMatrix::from_rows(
            rows.into_iter()
                .map(|values| FeatureVector { values, clamped: 0 })
                .collect(),
            d,
        )
        .unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (FeatureMatrix, Vec<i8>) {
        let rows = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let y = (0..n)
            .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
            .collect();
        (matrix(rows), y)
    }

    /// Brute-force reference: enumerate every dimension and candidate
    /// midpoint with the closed-form normal equations, no grouping tricks.
    fn brute_force_best(
        x: &FeatureMatrix,
        y: &[i8],
        w: &SampleWeights,
        sigmoid_shape: bool,
    ) -> (f64, f64, Vec<f64>) {
        let n = x.n_samples();
        let sum_y: f64 = w
            .values()
            .iter()
            .zip(y)
            .map(|(&wi, &yi)| wi * yi as f64)
            .sum();
        let mut best_err = 1.0 - sum_y * sum_y;
        let mut best_pred = vec![sum_y; n];
        let best_const = best_err;
        for d in 0..x.n_dims() {
            let mut vals: Vec<f64> = (0..n)
                .filter(|&i| w.values()[i] > 0.0)
                .map(|i| x.get(i, d))
                .collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let mids: Vec<f64> = vals.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
            let mids = if mids.len() <= 64 {
                mids
            } else {
                let mut out = Vec::new();
                let mut last = usize::MAX;
                for i in 0..64 {
                    let idx = i * (mids.len() - 1) / 63;
                    if idx != last {
                        out.push(mids[idx]);
                        last = idx;
                    }
                }
                out
            };
            for delta in mids {
                let s: Vec<f64> = (0..n)
                    .map(|i| {
                        let v = x.get(i, d);
                        if sigmoid_shape {
                            sigmoid(v - delta)
                        } else if v > delta {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let sw: f64 = w.values().iter().zip(&s).map(|(wi, si)| wi * si).sum();
                let sww: f64 = w.values().iter().zip(&s).map(|(wi, si)| wi * si * si).sum();
                let swy: f64 = (0..n)
                    .map(|i| w.values()[i] * s[i] * y[i] as f64)
                    .sum();
                let det = sww - sw * sw;
                if det <= 1e-14 {
                    continue;
                }
                let a = (swy - sw * sum_y) / det;
                let b = sum_y - a * sw;
                let err: f64 = (0..n)
                    .map(|i| {
                        let f = a * s[i] + b;
                        w.values()[i] * (f - y[i] as f64) * (f - y[i] as f64)
                    })
                    .sum();
                if err < best_err {
                    best_err = err;
                    best_pred = s.iter().map(|si| a * si + b).collect();
                }
            }
        }
        (best_err, best_const, best_pred)
    }

    #[test]
    fn constant_target_gives_constant_positive_stump() {
        let x = matrix(vec![vec![0.0], vec![1.0], vec![5.0]]);
        let y = vec![1, 1, 1];
        let w = SampleWeights::uniform(3).unwrap();
        let stump = fit_stump(&x, &y, &w).unwrap();
        for i in 0..3 {
            assert!(stump.evaluate(x.row(i)) > 0.0);
        }
    }

    #[test]
    fn separable_one_dimensional_data_is_split_between_the_classes() {
        let x = matrix(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = vec![-1, -1, 1, 1];
        let w = SampleWeights::uniform(4).unwrap();
        let stump = fit_stump(&x, &y, &w).unwrap();
        assert!(stump.threshold > 1.0 && stump.threshold < 2.0);
        for i in 0..4 {
            let pred = stump.evaluate(x.row(i));
            assert!(pred * y[i] as f64 > 0.0, "sample {i}: {pred}");
        }
        // matches the brute-force candidate sweep
        let (oracle_err, _, _) = brute_force_best(&x, &y, &w, true);
        let fitted_err: f64 = (0..4)
            .map(|i| 0.25 * (stump.evaluate(x.row(i)) - y[i] as f64).powi(2))
            .sum();
        assert!((fitted_err - oracle_err).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..15 {
            let n = rng.gen_range(4..20);
            let d = rng.gen_range(1..6);
            let (x, y) = random_matrix(&mut rng, n, d);
            let w = SampleWeights::from_raw((0..n).map(|_| rng.gen_range(0.1..1.0)).collect())
                .unwrap();
            for shape in [true, false] {
                let (oracle_err, _, _) = brute_force_best(&x, &y, &w, shape);
                let err = if shape {
                    let s = fit_stump(&x, &y, &w).unwrap();
                    (0..n)
                        .map(|i| {
                            w.values()[i] * (s.evaluate(x.row(i)) - y[i] as f64).powi(2)
                        })
                        .sum::<f64>()
                } else {
                    let s = fit_stump_indicator(&x, &y, &w).unwrap();
                    (0..n)
                        .map(|i| {
                            w.values()[i] * (s.evaluate(x.row(i)) - y[i] as f64).powi(2)
                        })
                        .sum::<f64>()
                };
                assert!(
                    (err - oracle_err).abs() <= 1e-10,
                    "shape sigmoid={shape}: {err} vs oracle {oracle_err}"
                );
            }
        }
    }

    #[test]
    fn zero_weight_samples_have_no_influence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y) = random_matrix(&mut rng, 10, 3);
        let mut raw = vec![1.0; 10];
        raw[4] = 0.0;
        let w = SampleWeights::from_raw(raw).unwrap();
        let before = fit_stump(&x, &y, &w).unwrap();

        let mut rows: Vec<Vec<f64>> = (0..10).map(|i| x.row(i).to_vec()).collect();
        rows[4] = vec![99.0, -99.0, 42.0];
        let perturbed = matrix(rows);
        let after = fit_stump(&perturbed, &y, &w).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn indicator_fit_on_separable_data_reaches_zero_error() {
        let x = matrix(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = vec![-1, -1, 1, 1];
        let w = SampleWeights::uniform(4).unwrap();
        let s = fit_stump_indicator(&x, &y, &w).unwrap();
        // a two-level fit: offset on the left, offset+scale on the right
        assert!((s.offset - (-1.0)).abs() < 1e-12);
        assert!((s.scale - 2.0).abs() < 1e-12);
        let err: f64 = (0..4)
            .map(|i| 0.25 * (s.evaluate(x.row(i)) - y[i] as f64).powi(2))
            .sum();
        assert!(err < 1e-20);
    }

    #[test]
    fn constant_feature_falls_back_to_weighted_mean() {
        let x = matrix(vec![vec![2.0], vec![2.0], vec![2.0]]);
        let y = vec![1, -1, 1];
        let w = SampleWeights::uniform(3).unwrap();
        let s = fit_stump_indicator(&x, &y, &w).unwrap();
        assert_eq!(s.scale, 0.0);
        assert!((s.offset - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_and_indicator_agree_when_saturated() {
        // spread the classes far apart so sigmoid(x - delta) is 0/1-like
        let x = matrix(vec![vec![-100.0], vec![-80.0], vec![80.0], vec![100.0]]);
        let y = vec![-1, -1, 1, 1];
        let w = SampleWeights::uniform(4).unwrap();
        let soft = fit_stump(&x, &y, &w).unwrap();
        let hard = fit_stump_indicator(&x, &y, &w).unwrap();
        for i in 0..4 {
            let a = soft.evaluate(x.row(i));
            let b = hard.evaluate(x.row(i));
            assert!(a.signum() == b.signum());
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicating_samples_with_halved_weights_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (x, y) = random_matrix(&mut rng, 8, 2);
        let w = SampleWeights::uniform(8).unwrap();
        let base = fit_stump(&x, &y, &w).unwrap();

        let mut rows: Vec<Vec<f64>> = (0..8).map(|i| x.row(i).to_vec()).collect();
        rows.extend((0..8).map(|i| x.row(i).to_vec()));
        let doubled_x = matrix(rows);
        let mut doubled_y = y.clone();
        doubled_y.extend(&y);
        let doubled_w = SampleWeights::uniform(16).unwrap();
        let doubled = fit_stump(&doubled_x, &doubled_y, &doubled_w).unwrap();
        assert_eq!(base, doubled);
    }

    #[test]
    fn update_weights_identity_under_zero_scores() {
        let w = SampleWeights::uniform(4).unwrap();
        let updated = update_weights(&w, &[0.0; 4], &[1, -1, 1, -1]).unwrap();
        assert_eq!(w, updated);
    }

    #[test]
    fn update_weights_hand_example() {
        let w = SampleWeights::uniform(2).unwrap();
        let updated = update_weights(&w, &[1.0, 1.0], &[1, -1]).unwrap();
        assert!((updated.values()[0] - 0.119_202_922_022_117_8).abs() < 1e-9);
        assert!((updated.values()[1] - 0.880_797_077_977_882_3).abs() < 1e-9);
        assert!((updated.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn misclassified_samples_never_lose_relative_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 6;
            let w = SampleWeights::uniform(n).unwrap();
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<i8> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
                .collect();
            let updated = update_weights(&w, &f, &y).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if y[i] as f64 * f[i] < 0.0 && y[j] as f64 * f[j] >= 0.0 {
                        // misclassified i gains weight relative to j
                        assert!(updated.values()[i] / updated.values()[j] >= w.values()[i] / w.values()[j] - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn update_weights_flags_divergence() {
        let w = SampleWeights::uniform(2).unwrap();
        let result = update_weights(&w, &[1e10, 1e10], &[1, 1]);
        assert!(matches!(result, Err(Error::WeightUnderflow)));
    }

    #[test]
    fn zero_rounds_gives_zero_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, y) = random_matrix(&mut rng, 6, 2);
        let run = train_strong(&x, &y, 0).unwrap();
        assert!(run.classifier.is_empty());
        assert_eq!(run.classifier.score(x.row(0)).unwrap(), 0.0);
    }

    fn separable_dataset() -> (FeatureMatrix, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..20 {
            rows.push(vec![rng.gen_range(2.0..4.0), rng.gen_range(-1.0..1.0)]);
            y.push(1);
            rows.push(vec![rng.gen_range(-4.0..-2.0), rng.gen_range(-1.0..1.0)]);
            y.push(-1);
        }
        (matrix(rows), y)
    }

    #[test]
    fn separable_data_is_learned_within_five_rounds() {
        let (x, y) = separable_dataset();
        let run = train_strong(&x, &y, 5).unwrap();
        let errors = (0..x.n_samples())
            .filter(|&i| run.classifier.score(x.row(i)).unwrap() * y[i] as f64 <= 0.0)
            .count();
        assert_eq!(errors, 0);

        // the indicator oracle reaches the same decisions
        let oracle = train_strong_indicator(&x, &y, 5).unwrap();
        for i in 0..x.n_samples() {
            let soft = run.classifier.score(x.row(i)).unwrap();
            let hard = oracle.score(x.row(i));
            assert!(soft.signum() == hard.signum(), "sample {i}");
        }
    }

    #[test]
    fn exponential_loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let n = rng.gen_range(6..30);
            let d = rng.gen_range(1..6);
            let (x, y) = random_matrix(&mut rng, n, d);
            let run = train_strong(&x, &y, 10).unwrap();
            let mut prev = n as f64; // loss of the empty ensemble
            for r in &run.rounds {
                assert!(
                    r.exp_loss <= prev + 1e-9,
                    "round {}: {} > {}",
                    r.round,
                    r.exp_loss,
                    prev
                );
                prev = r.exp_loss;
            }
        }
    }

    #[test]
    fn selected_stump_beats_the_best_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(5..25);
            let (x, y) = random_matrix(&mut rng, n, 3);
            let w = SampleWeights::from_raw((0..n).map(|_| rng.gen_range(0.01..1.0)).collect())
                .unwrap();
            let stump = fit_stump(&x, &y, &w).unwrap();
            let err: f64 = (0..n)
                .map(|i| w.values()[i] * (stump.evaluate(x.row(i)) - y[i] as f64).powi(2))
                .sum();
            let sum_y: f64 = w
                .values()
                .iter()
                .zip(&y)
                .map(|(&wi, &yi)| wi * yi as f64)
                .sum();
            let const_err = 1.0 - sum_y * sum_y;
            assert!(err <= const_err + 1e-12);
        }
    }

    #[test]
    fn weights_stay_normalized_across_rounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (x, y) = random_matrix(&mut rng, 20, 4);
        let columns = SortedColumns::build(&x);
        let mut w = SampleWeights::uniform(20).unwrap();
        for _ in 0..8 {
            let fit = fit_weak(&columns, &y, &w, WeakShape::Sigmoid).unwrap();
            let f: Vec<f64> = (0..20)
                .map(|i| fit.scale * sigmoid(x.get(i, fit.dim) - fit.threshold) + fit.offset)
                .collect();
            w = update_weights(&w, &f, &y).unwrap();
            assert!((w.sum() - 1.0).abs() < 1e-10);
            assert!(w.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn negated_labels_negate_the_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (x, y) = random_matrix(&mut rng, 12, 3);
        let neg_y: Vec<i8> = y.iter().map(|&v| -v).collect();
        let run_pos = train_strong(&x, &y, 6).unwrap();
        let run_neg = train_strong(&x, &neg_y, 6).unwrap();
        for i in 0..x.n_samples() {
            let a = run_pos.classifier.score(x.row(i)).unwrap();
            let b = run_neg.classifier.score(x.row(i)).unwrap();
            assert!((a + b).abs() < 1e-9, "sample {i}: {a} vs {b}");
        }
    }

    #[test]
    fn score_checks_dimensions() {
        let mut clf = StrongClassifier::new(1);
        clf.push(Stump {
            dim: 5,
            threshold: 0.0,
            scale: 1.0,
            offset: 0.0,
        });
        assert!(clf.score(&[1.0, 2.0]).is_err());
        assert!(clf.score(&[0.0; 6]).is_ok());
    }

    #[test]
    fn empty_classifier_scores_zero() {
        let clf = StrongClassifier::new(0);
        assert_eq!(clf.score(&[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_stump_at_its_threshold_scores_zero() {
        let mut clf = StrongClassifier::new(1);
        clf.push(Stump {
            dim: 0,
            threshold: 0.7,
            scale: 2.0,
            offset: -1.0,
        });
        assert!(clf.score(&[0.7]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn two_stump_score_is_the_sum_of_the_parts() {
        let s1 = Stump {
            dim: 0,
            threshold: 1.0,
            scale: 2.0,
            offset: -0.5,
        };
        let s2 = Stump {
            dim: 1,
            threshold: -1.0,
            scale: -1.5,
            offset: 0.25,
        };
        let mut clf = StrongClassifier::new(2);
        clf.push(s1.clone());
        clf.push(s2.clone());
        let x = [0.3, 0.9];
        let expect = s1.evaluate(&x) + s2.evaluate(&x);
        assert!((clf.score(&x).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn round_csv_has_expected_columns() {
        let stats = vec![RoundStats {
            round: 1,
            dim: 3,
            threshold: 0.5,
            scale: 1.0,
            offset: -0.25,
            weighted_error: 0.4,
            train_error: 0.1,
            exp_loss: 8.0,
        }];
        let mut buf = Vec::new();
        write_round_csv(&mut buf, &stats).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("round,dim,threshold,scale,offset,weighted_error,train_error\n"));
        assert!(text.contains("1,3,0.5,1,-0.25,0.4,0.1"));
    }
}
