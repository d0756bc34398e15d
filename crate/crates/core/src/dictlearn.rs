//! The joint single-layer objective: empirical exponential loss of the
//! boosted ensemble plus an analysis regularizer that pushes the selected
//! filters toward small response over the negative class.
//!
//! The alternating loop per outer iteration: extract features under the
//! current bank, boost a strong classifier, map its stump dimensions back to
//! filters, then run gradient descent on the regularizer restricted to those
//! filters. The empirical term reaches the filters only through
//! winner-take-all and histogram counting, which are piecewise constant in
//! the kernels, so only the regularizer is descended directly.

use std::collections::BTreeSet;
use std::io::Write;

use crate::boosting::{self, RoundStats, StrongClassifier};
use crate::error::{Error, Result};
use crate::features::{
    batch_stacks, feature_matrix, fit_bins, selected_filters, FeatureLayout,
};
use crate::filters::{AnalysisDictionary, Filter};
use crate::imagekit::{convolve_valid, correlate_adjoint, Image, Kernel};
use crate::par;

/// Knobs for one joint layer optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    /// regularizer weight in the joint objective; 0 disables dictionary updates
    pub lambda: f64,
    /// initial gradient step size, backtracked by halving
    pub eta: f64,
    /// gradient steps per dictionary update
    pub grad_steps: usize,
    /// max alternations of boost + update
    pub outer_iters: usize,
    /// relative objective decrease below which the loop stops
    pub tol: f64,
    /// boosting rounds per alternation
    pub rounds: usize,
    /// histogram bins per pyramid block
    pub bins: usize,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            eta: 0.01,
            grad_steps: 10,
            outer_iters: 5,
            tol: 1e-3,
            rounds: 50,
            bins: 50,
        }
    }
}

impl JointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument("eta must be > 0".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument("tol must lie in (0, 1)".into()));
        }
        if self.outer_iters == 0 {
            return Err(Error::InvalidArgument("outer_iters must be >= 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("bins must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sum of squared valid-convolution responses of every filter over every
/// image. Empty filter sets cost 0.
pub fn reg_loss_of(filters: &[Filter], negatives: &[&Image]) -> Result<f64> {
    if filters.is_empty() || negatives.is_empty() {
        return Ok(0.0);
    }
    let per_image: Result<Vec<f64>> = par::map_slice(negatives, |img| {
        let mut acc = 0.0;
        for f in filters {
            acc += convolve_valid(img, &f.kernel)?.sum_of_squares();
        }
        Ok(acc)
    })
    .into_iter()
    .collect();
    Ok(per_image?.iter().sum())
}

/// Regularizer over the whole dictionary.
pub fn reg_loss(dict: &AnalysisDictionary, negatives: &[&Image]) -> Result<f64> {
    reg_loss_of(dict.filters(), negatives)
}

/// Gradient of [`reg_loss`] with respect to each kernel: filters outside
/// `selected` get a zero matrix. Per selected filter `g` the gradient is
/// `2 * sum_j adjoint(I_j, g * I_j)`.
pub fn reg_gradient(
    dict: &AnalysisDictionary,
    selected: &BTreeSet<usize>,
    negatives: &[&Image],
) -> Result<Vec<Kernel>> {
    let k = dict.kernel_size();
    if let Some(&bad) = selected.iter().find(|&&i| i >= dict.len()) {
        return Err(Error::InvalidArgument(format!(
            "selected filter index {bad} out of range for {} filters",
            dict.len()
        )));
    }
    let picked: Vec<usize> = selected.iter().copied().collect();
    let per_image: Result<Vec<Vec<Kernel>>> = par::map_slice(negatives, |img| {
        picked
            .iter()
            .map(|&m| {
                let resp = convolve_valid(img, &dict.filters()[m].kernel)?;
                Ok(correlate_adjoint(img, &resp, k))
            })
            .collect()
    })
    .into_iter()
    .collect();

    let mut grads = vec![Kernel::zeros(k); dict.len()];
    for image_grads in per_image? {
        for (&m, g) in picked.iter().zip(image_grads) {
            for (acc, v) in grads[m].values_mut().iter_mut().zip(g.values()) {
                *acc += 2.0 * v;
            }
        }
    }
    Ok(grads)
}

/// Outcome of a dictionary update.
#[derive(Debug, Clone)]
pub struct DictUpdate {
    pub dictionary: AnalysisDictionary,
    /// set when backtracking was exhausted (or the gradient vanished); the
    /// returned dictionary is then the unchanged input
    pub stalled: bool,
    /// accepted gradient steps
    pub steps: usize,
    /// regularizer over the selected filters before/after the update; both 0
    /// when no update was attempted
    pub loss_before: f64,
    pub loss_after: f64,
}

const MAX_BACKTRACK_HALVINGS: usize = 20;

/// Runs `grad_steps` steps of `g <- g - eta * lambda * grad` on the selected
/// filters, halving the step (up to 20 times) whenever it would not strictly
/// decrease the regularizer. Valid convolution is linear in the kernel, so
/// the backtracking objective `A - t*||grad||^2 + t^2*C` is the loss itself,
/// evaluated exactly without re-convolving per trial step.
///
/// Unselected filters come back bit-identical; on a stall the whole input is
/// returned unchanged.
pub fn update_filters(
    dict: &AnalysisDictionary,
    selected: &BTreeSet<usize>,
    negatives: &[&Image],
    config: &JointConfig,
) -> Result<DictUpdate> {
    config.validate()?;
    if config.lambda == 0.0 || selected.is_empty() || config.grad_steps == 0 || negatives.is_empty()
    {
        return Ok(DictUpdate {
            dictionary: dict.clone(),
            stalled: false,
            steps: 0,
            loss_before: 0.0,
            loss_after: 0.0,
        });
    }
    let k = dict.kernel_size();
    let picked: Vec<usize> = selected.iter().copied().collect();
    let mut working = dict.clone();
    let selected_filters = |d: &AnalysisDictionary| -> Vec<Filter> {
        picked.iter().map(|&m| d.filters()[m].clone()).collect()
    };

    let loss_before = reg_loss_of(&selected_filters(&working), negatives)?;
    let mut current_loss = loss_before;
    let mut steps = 0usize;

    for _ in 0..config.grad_steps {
        let grads = reg_gradient(&working, selected, negatives)?;
        let grad_norm_sq: f64 = picked
            .iter()
            .map(|&m| grads[m].values().iter().map(|v| v * v).sum::<f64>())
            .sum();
        if grad_norm_sq < 1e-28 {
            if steps == 0 {
                return Ok(DictUpdate {
                    dictionary: dict.clone(),
                    stalled: true,
                    steps: 0,
                    loss_before,
                    loss_after: loss_before,
                });
            }
            break;
        }
        // curvature term: responses of the gradient direction itself
        let curvature: Result<Vec<f64>> = par::map_slice(negatives, |img| {
            let mut acc = 0.0;
            for &m in &picked {
                acc += convolve_valid(img, &grads[m])?.sum_of_squares();
            }
            Ok(acc)
        })
        .into_iter()
        .collect();
        let c: f64 = curvature?.iter().sum();

        let mut t = config.eta * config.lambda;
        let mut accepted = false;
        for _ in 0..=MAX_BACKTRACK_HALVINGS {
            let trial = current_loss - t * grad_norm_sq + t * t * c;
            if trial < current_loss {
                current_loss = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Ok(DictUpdate {
                dictionary: dict.clone(),
                stalled: true,
                steps,
                loss_before,
                loss_after: loss_before,
            });
        }
        for &m in &picked {
            let mut kernel = working.filters()[m].kernel.clone();
            for (v, g) in kernel.values_mut().iter_mut().zip(grads[m].values()) {
                *v -= t * g;
            }
            working = working.with_kernel(m, kernel);
        }
        debug_assert_eq!(working.kernel_size(), k);
        steps += 1;
    }

    Ok(DictUpdate {
        dictionary: working,
        stalled: false,
        steps,
        loss_before,
        loss_after: current_loss,
    })
}

/// Joint objective from precomputed classifier scores: half the exponential
/// loss plus `lambda` times the regularizer.
pub fn objective_value(scores: &[f64], y: &[i8], lambda: f64, reg: f64) -> f64 {
    let empirical: f64 = scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| (-(yi as f64) * s).exp())
        .sum();
    0.5 * empirical + lambda * reg
}

/// Joint objective evaluated from scratch: features of every image are
/// extracted under `dict` and `layout`, scored by the classifier, and
/// combined with the regularizer over the negatives.
pub fn objective(
    dict: &AnalysisDictionary,
    classifier: &StrongClassifier,
    layout: &FeatureLayout,
    positives: &[&Image],
    negatives: &[&Image],
    lambda: f64,
) -> Result<f64> {
    let mut images: Vec<&Image> = Vec::with_capacity(positives.len() + negatives.len());
    images.extend_from_slice(positives);
    images.extend_from_slice(negatives);
    let stacks = batch_stacks(&images, dict)?;
    let matrix = feature_matrix(&stacks, layout)?;
    let scores: Result<Vec<f64>> = (0..matrix.n_samples())
        .map(|i| classifier.score(matrix.row(i)))
        .collect();
    let y: Vec<i8> = (0..positives.len())
        .map(|_| 1)
        .chain((0..negatives.len()).map(|_| -1))
        .collect();
    let reg = if lambda > 0.0 {
        reg_loss(dict, negatives)?
    } else {
        0.0
    };
    Ok(objective_value(&scores?, &y, lambda, reg))
}

/// Objective trace entry for one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterIterStats {
    pub outer_iter: usize,
    /// half the training exponential loss
    pub empirical: f64,
    /// regularizer over negatives under the iteration's dictionary
    /// (recorded as 0 when lambda = 0)
    pub regularizer: f64,
    pub objective: f64,
    pub selected_count: usize,
    pub boost_rounds_used: usize,
    /// regularizer after the dictionary update, when one ran
    pub reg_after_update: Option<f64>,
    pub stalled: bool,
}

/// A trained layer: the final bank, the classifier fitted to features under
/// that bank, the layout (with bin edges) those features used, and the
/// optimization trace.
#[derive(Debug, Clone)]
pub struct LayerModel {
    pub dictionary: AnalysisDictionary,
    pub classifier: StrongClassifier,
    pub layout: FeatureLayout,
    pub selected: BTreeSet<usize>,
    pub trace: Vec<OuterIterStats>,
    pub boost_rounds: Vec<RoundStats>,
}

/// Alternates feature boosting and dictionary updates until the joint
/// objective stops decreasing (relative decrease below `tol`), the iteration
/// budget is spent, or an update stalls. The convergence check runs before
/// the update, so the returned classifier is always consistent with the
/// returned dictionary and bin edges.
pub fn joint_train_layer(
    positives: &[&Image],
    negatives: &[&Image],
    dictionary: &AnalysisDictionary,
    config: &JointConfig,
) -> Result<LayerModel> {
    config.validate()?;
    if positives.is_empty() {
        return Err(Error::EmptyInput("joint training needs positive images"));
    }
    if negatives.is_empty() {
        return Err(Error::EmptyInput("joint training needs negative images"));
    }
    let mut images: Vec<&Image> = Vec::with_capacity(positives.len() + negatives.len());
    images.extend_from_slice(positives);
    images.extend_from_slice(negatives);
    let y: Vec<i8> = (0..positives.len())
        .map(|_| 1)
        .chain((0..negatives.len()).map(|_| -1))
        .collect();

    let mut dict = dictionary.clone();
    let mut trace: Vec<OuterIterStats> = Vec::new();
    let mut prev_objective: Option<f64> = None;

    for outer in 1..=config.outer_iters {
        let stacks = batch_stacks(&images, &dict)?;
        let edges = fit_bins(&stacks, config.bins)?;
        let layout = FeatureLayout::new(dict.len(), edges)?;
        let matrix = feature_matrix(&stacks, &layout)?;
        let run = boosting::train_strong(&matrix, &y, config.rounds)?;
        let selected = selected_filters(&run.classifier, &layout);

        let empirical = 0.5
            * run
                .rounds
                .last()
                .map_or(images.len() as f64, |r| r.exp_loss);
        let regularizer = if config.lambda > 0.0 {
            reg_loss(&dict, negatives)?
        } else {
            0.0
        };
        let objective = empirical + config.lambda * regularizer;

        let converged = prev_objective.is_some_and(|prev| {
            (prev - objective) / prev.abs().max(f64::MIN_POSITIVE) < config.tol
        });
        let last_iteration = converged || outer == config.outer_iters || selected.is_empty();

        if last_iteration {
            trace.push(OuterIterStats {
                outer_iter: outer,
                empirical,
                regularizer,
                objective,
                selected_count: selected.len(),
                boost_rounds_used: run.rounds.len(),
                reg_after_update: None,
                stalled: false,
            });
            return Ok(LayerModel {
                dictionary: dict,
                classifier: run.classifier,
                layout,
                selected,
                trace,
                boost_rounds: run.rounds,
            });
        }

        let update = update_filters(&dict, &selected, negatives, config)?;
        let reg_after = if config.lambda > 0.0 {
            regularizer - (update.loss_before - update.loss_after)
        } else {
            0.0
        };
        trace.push(OuterIterStats {
            outer_iter: outer,
            empirical,
            regularizer,
            objective,
            selected_count: selected.len(),
            boost_rounds_used: run.rounds.len(),
            reg_after_update: Some(reg_after),
            stalled: update.stalled,
        });
        if update.stalled {
            // no further dictionary progress is possible; the current state
            // is already consistent (the update returned the input unchanged)
            return Ok(LayerModel {
                dictionary: dict,
                classifier: run.classifier,
                layout,
                selected,
                trace,
                boost_rounds: run.rounds,
            });
        }
        dict = update.dictionary;
        prev_objective = Some(objective);
    }
    unreachable!("loop always returns on its last iteration")
}

/// Objective-trace CSV (`outer_iter,empirical,regularizer,objective,
/// selected,rounds,reg_after_update,stalled`).
pub fn write_objective_csv<W: Write>(out: &mut W, trace: &[OuterIterStats]) -> std::io::Result<()> {
    writeln!(
        out,
        "outer_iter,empirical,regularizer,objective,selected,rounds,reg_after_update,stalled"
    )?;
    for t in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.outer_iter,
            t.empirical,
            t.regularizer,
            t.objective,
            t.selected_count,
            t.boost_rounds_used,
            t.reg_after_update.map_or(String::new(), |v| v.to_string()),
            t.stalled
        )?;
    }
    Ok(())
}
