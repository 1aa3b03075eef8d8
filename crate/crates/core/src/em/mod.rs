//! MAP expectation-maximization over the similarity, the mixture weights
//! and the outlier rate.

pub mod estep;
pub mod init;
pub mod mstep;
pub mod weights;

use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::extraction::{downsample, extract_points, DEFAULT_STRIDE, DEFAULT_THRESHOLD};
use crate::model::{LabelProbMap, LpMixtureModel, PointSet, Responsibilities, Similarity, TransformState};

pub use estep::{e_step, e_step_with_objective};
pub use init::{init_from_box, init_outlier_rate, BoundingBox};
pub use mstep::{
    geometric_m_step, m_step_closed_form_p2, m_step_refine, refine_stationary_point, ClosedFormCoefficients,
    finite_difference_gradient, Derivatives, ReducedObjective, RefineOutcome,
};
pub use weights::{update_weights, NUMERATOR_FLOOR};

/// Relative slack of the ascent guard.
pub const ASCENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Convergence threshold on `max(|Δtx|, |Δty|, |Δs|·max(w, h))`, pixels.
    pub epsilon: f64,
    /// Iteration cap per level.
    pub max_iters: usize,
    /// Stride of the coarse level; 1 runs the full set only.
    pub stride: usize,
    pub alpha_bounds: (f64, f64),
    /// Point extraction threshold, used by [`register`].
    pub threshold: f64,
    pub gn_max_iters: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            max_iters: 100,
            stride: DEFAULT_STRIDE,
            alpha_bounds: (0.01, 0.9),
            threshold: DEFAULT_THRESHOLD,
            gn_max_iters: 20,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        let (lo, hi) = self.alpha_bounds;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::invalid(format!("alpha bounds ({lo}, {hi}) must satisfy 0 < lo < hi < 1")));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Why a level stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The similarity moved less than `epsilon`.
    Converged,
    /// The next candidate would have decreased `R`; the last accepted
    /// iterate is kept.
    AscentStalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub stride: usize,
    pub num_points: usize,
    pub iterations: usize,
    pub stop: StopReason,
}

/// One accepted iterate. Iteration 0 of each level is its starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub level: usize,
    pub iteration: usize,
    pub objective: f64,
    pub similarity: Similarity,
    pub outlier_rate: f64,
    pub elapsed: Duration,
    /// The outlier-rate update was rolled back for this iterate.
    pub rate_held: bool,
}

#[derive(Debug, Clone)]
pub struct EmReport {
    pub levels: Vec<LevelReport>,
    pub trace: Vec<TraceRow>,
    pub state: TransformState,
    /// Responsibilities of the full point set at `state`.
    pub responsibilities: Responsibilities,
    /// `R` of the full point set at `state`.
    pub objective: f64,
    /// False when the last level hit the iteration cap.
    pub converged: bool,
}

impl EmReport {
    pub fn total_iterations(&self) -> usize {
        self.levels.iter().map(|l| l.iterations).sum()
    }

    /// Trace rows of one level.
    pub fn level_trace(&self, level: usize) -> impl Iterator<Item = &TraceRow> + '_ {
        self.trace.iter().filter(move |r| r.level == level)
    }
}

fn step_size(a: &Similarity, b: &Similarity, extent: f64) -> f64 {
    (a.tx - b.tx).abs().max((a.ty - b.ty).abs()).max((a.s - b.s).abs() * extent)
}

fn accepted(candidate: f64, current: f64) -> bool {
    candidate >= current - ASCENT_TOLERANCE * current.abs()
}

struct LevelOutcome {
    state: TransformState,
    responsibilities: Responsibilities,
    objective: f64,
    report: LevelReport,
}

fn run_level(
    points: &PointSet,
    model: &LpMixtureModel,
    start: TransformState,
    cfg: &EmConfig,
    level: usize,
    stride: usize,
    trace: &mut Vec<TraceRow>,
) -> LevelOutcome {
    let extent = model.ref_dims().0.max(model.ref_dims().1) as f64;
    let clock = Instant::now();
    let mut state = start;
    let (mut resp, mut objective) = e_step_with_objective(points, model, &state);
    trace.push(TraceRow {
        level,
        iteration: 0,
        objective,
        similarity: state.similarity,
        outlier_rate: state.outlier_rate,
        elapsed: clock.elapsed(),
        rate_held: false,
    });
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    for iteration in 1..=cfg.max_iters {
        let started = Instant::now();
        let similarity = geometric_m_step(points, model, &resp, &state.similarity, cfg.gn_max_iters);
        let (weights, outlier_rate) =
            update_weights(&resp, model, &state.weights, state.outlier_rate, cfg.alpha_bounds);
        let candidate = TransformState {
            similarity,
            weights,
            outlier_rate,
        };
        let (mut cand_resp, mut cand_objective) = e_step_with_objective(points, model, &candidate);
        let mut candidate = candidate;
        let mut rate_held = false;
        if !accepted(cand_objective, objective) {
            // R grows with the outlier rate, so a decreasing rate update can
            // lower it; retry with the rate held before giving up.
            let held = TransformState {
                outlier_rate: state.outlier_rate,
                ..candidate
            };
            let (r, o) = e_step_with_objective(points, model, &held);
            if !accepted(o, objective) {
                debug!("level {level} iteration {iteration}: R would drop from {objective} to {o}; stopping");
                stop = StopReason::AscentStalled;
                break;
            }
            candidate = held;
            cand_resp = r;
            cand_objective = o;
            rate_held = true;
        }
        let moved = step_size(&state.similarity, &candidate.similarity, extent);
        state = candidate;
        resp = cand_resp;
        objective = cand_objective;
        iterations = iteration;
        trace.push(TraceRow {
            level,
            iteration,
            objective,
            similarity: state.similarity,
            outlier_rate: state.outlier_rate,
            elapsed: started.elapsed(),
            rate_held,
        });
        if moved <= cfg.epsilon {
            stop = StopReason::Converged;
            break;
        }
    }
    if stop == StopReason::MaxIterations {
        warn!("level {level} hit the iteration cap of {}", cfg.max_iters);
    }
    LevelOutcome {
        state,
        responsibilities: resp,
        objective,
        report: LevelReport {
            stride,
            num_points: points.len(),
            iterations,
            stop,
        },
    }
}

/// Two-level EM: a coarse pass on every `stride`-th pixel, then the full
/// set from the coarse estimate.
///
/// A level stops when the similarity moves less than `epsilon`, when the
/// next candidate would lower `R`, or at `max_iters`. The report is marked
/// unconverged only in the last case.
pub fn run_em(points: &PointSet, model: &LpMixtureModel, initial: TransformState, cfg: &EmConfig) -> Result<EmReport> {
    cfg.validate()?;
    initial.validate(model)?;
    if points.is_empty() {
        return Err(Error::NoFacadeEvidence);
    }
    if points.num_labels() != model.labels().len() {
        return Err(Error::invalid(format!(
            "points carry {} labels, model has {}",
            points.num_labels(),
            model.labels().len()
        )));
    }
    let mut trace = Vec::new();
    let mut levels = Vec::new();
    let mut state = initial;
    if cfg.stride > 1 {
        let coarse = downsample(points, cfg.stride)?;
        let out = run_level(&coarse, model, state, cfg, 0, cfg.stride, &mut trace);
        state = out.state;
        levels.push(out.report);
    }
    let fine = run_level(points, model, state, cfg, levels.len(), 1, &mut trace);
    levels.push(fine.report);
    let converged = levels.last().map(|l| l.stop != StopReason::MaxIterations).unwrap_or(false);
    info!(
        "EM finished: {} iterations, R = {:.6}, s = {:.5}, t = ({:.3}, {:.3})",
        levels.iter().map(|l| l.iterations).sum::<usize>(),
        fine.objective,
        fine.state.similarity.s,
        fine.state.similarity.tx,
        fine.state.similarity.ty
    );
    Ok(EmReport {
        levels,
        trace,
        state: fine.state,
        responsibilities: fine.responsibilities,
        objective: fine.objective,
        converged,
    })
}

/// Initial state from a detection box.
pub fn initial_state(model: &LpMixtureModel, bbox: &BoundingBox, target_dims: (usize, usize), cfg: &EmConfig) -> Result<TransformState> {
    let similarity = init_from_box(bbox, model.ref_dims())?;
    let alpha = init_outlier_rate(similarity.s, model.ref_dims(), target_dims, cfg.alpha_bounds);
    Ok(TransformState::from_model(model, similarity, alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSummary {
    pub bbox: BoundingBox,
    pub initial: Similarity,
    pub final_similarity: Similarity,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MultiInitReport {
    /// Index of the selected candidate.
    pub selected: usize,
    pub candidates: Vec<CandidateSummary>,
    pub report: EmReport,
}

/// Runs [`run_em`] from every box and keeps the run with the highest final
/// `R`, ties going to the lowest index. Failed runs are skipped unless all
/// of them fail.
pub fn run_multi_init(
    points: &PointSet,
    model: &LpMixtureModel,
    boxes: &[BoundingBox],
    cfg: &EmConfig,
) -> Result<MultiInitReport> {
    if boxes.is_empty() {
        return Err(Error::invalid("at least one initialisation box is required"));
    }
    let mut best: Option<(usize, EmReport)> = None;
    let mut candidates = Vec::with_capacity(boxes.len());
    let mut last_error = None;
    for (k, bbox) in boxes.iter().enumerate() {
        let run = initial_state(model, bbox, points.source_dims(), cfg)
            .and_then(|init| run_em(points, model, init, cfg).map(|r| (init_sim(bbox, model), r)));
        match run {
            Ok((initial, report)) => {
                candidates.push(CandidateSummary {
                    bbox: *bbox,
                    initial,
                    final_similarity: report.state.similarity,
                    objective: report.objective,
                    converged: report.converged,
                });
                let better = best.as_ref().is_none_or(|(_, b)| report.objective > b.objective);
                if better {
                    best = Some((k, report));
                }
            }
            Err(e) => {
                warn!("initialisation {k} failed: {e}");
                candidates.push(CandidateSummary {
                    bbox: *bbox,
                    initial: Similarity::IDENTITY,
                    final_similarity: Similarity::IDENTITY,
                    objective: f64::NEG_INFINITY,
                    converged: false,
                });
                last_error = Some(e);
            }
        }
    }
    match best {
        Some((selected, report)) => Ok(MultiInitReport {
            selected,
            candidates,
            report,
        }),
        None => Err(last_error.unwrap_or(Error::NoFacadeEvidence)),
    }
}

/// Facade evidence of a target and the registration run on it.
#[derive(Debug, Clone)]
pub struct Registration {
    pub points: PointSet,
    pub multi: MultiInitReport,
}

/// Extracts points from `target` at `cfg.threshold` and registers `model`
/// from every box with [`run_multi_init`].
pub fn register(
    model: &LpMixtureModel,
    target: &LabelProbMap,
    boxes: &[BoundingBox],
    cfg: &EmConfig,
) -> Result<Registration> {
    cfg.validate()?;
    if target.labels() != model.labels() {
        return Err(Error::invalid(format!(
            "target labels {:?} differ from model labels {:?}",
            target.labels().names(),
            model.labels().names()
        )));
    }
    let points = extract_points(target, cfg.threshold)?;
    let multi = run_multi_init(&points, model, boxes, cfg)?;
    Ok(Registration { points, multi })
}

fn init_sim(bbox: &BoundingBox, model: &LpMixtureModel) -> Similarity {
    init_from_box(bbox, model.ref_dims()).unwrap_or(Similarity::IDENTITY)
}
