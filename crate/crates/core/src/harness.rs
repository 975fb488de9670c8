//! Experiment engine: synthetic data, linear detrending, out-of-sample
//! cross-validation and score aggregation.

use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::bootstrap::bootstrap_fit;
use crate::distributions::PredictiveDist;
use crate::error::{Error, Result};
use crate::mos::{self, fit_mos};
use crate::ngr::{self, fit_ngr};
use crate::rng::{derive_seed, stream};
use crate::simplex::SimplexSettings;
use crate::training::{Record, TrainingSet};
use crate::verification::{self, crpss, pit_histogram, PitHistogram, VerificationRecord};

/// Data-generating regression for synthetic experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// `y = a + b m + c eps`; `c` is the error standard deviation.
    Mos { a: f64, b: f64, c: f64 },
    /// `y ~ N(a + b m, c + d v)`.
    Ngr { a: f64, b: f64, c: f64, d: f64 },
}

/// Ensemble variances are drawn as `shift + Gamma(shape, scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceProcess {
    pub shift: f64,
    pub shape: f64,
    pub scale: f64,
}

impl Default for VarianceProcess {
    fn default() -> Self {
        VarianceProcess {
            shift: 0.1,
            shape: 2.0,
            scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub generator: Generator,
    /// Mean and variance of the Normal ensemble-mean process.
    pub m_mean: f64,
    pub m_var: f64,
    pub v_process: VarianceProcess,
    pub n: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(generator: Generator, n: usize, seed: u64) -> Self {
        SyntheticSpec {
            generator,
            m_mean: 0.0,
            m_var: 1.0,
            v_process: VarianceProcess::default(),
            n,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let vp = &self.v_process;
        if !(self.m_mean.is_finite() && self.m_var.is_finite() && self.m_var >= 0.0) {
            return Err(Error::Input(format!(
                "ensemble-mean process N({}, {}) is invalid",
                self.m_mean, self.m_var
            )));
        }
        if !(vp.shift >= 0.0 && vp.shape > 0.0 && vp.scale > 0.0 && vp.shift.is_finite()) {
            return Err(Error::Input(format!("variance process {vp:?} is invalid")));
        }
        match self.generator {
            Generator::Mos { a, b, c } => {
                if !(a.is_finite() && b.is_finite() && c.is_finite() && c > 0.0) {
                    return Err(Error::Input(format!("MOS generator needs finite a, b and c > 0, got ({a}, {b}, {c})")));
                }
            }
            Generator::Ngr { a, b, c, d } => {
                let finite = [a, b, c, d].iter().all(|x| x.is_finite());
                // v >= shift, so c + d v > 0 for every draw iff this holds.
                if !(finite && d >= 0.0 && c + d * vp.shift > 0.0) {
                    return Err(Error::Input(format!(
                        "NGR generator needs d >= 0 and c + d v > 0 for v >= {}, got ({a}, {b}, {c}, {d})",
                        vp.shift
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draws `spec.n` cases. Each case consumes, in order, one ensemble mean,
/// one ensemble variance and one standard Normal error from a stream
/// seeded by `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TrainingSet> {
    spec.validate()?;
    let mut rng = stream(spec.seed);
    let gamma = Gamma::new(spec.v_process.shape, spec.v_process.scale)
        .map_err(|e| Error::Input(format!("variance process: {e}")))?;
    let m_sd = spec.m_var.sqrt();
    let mut records = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let zm: f64 = StandardNormal.sample(&mut rng);
        let m = spec.m_mean + m_sd * zm;
        let v = spec.v_process.shift + gamma.sample(&mut rng);
        let eps: f64 = StandardNormal.sample(&mut rng);
        let y = match spec.generator {
            Generator::Mos { a, b, c } => a + b * m + c * eps,
            Generator::Ngr { a, b, c, d } => a + b * m + (c + d * v).sqrt() * eps,
        };
        records.push(Record { m, v, y });
    }
    TrainingSet::new(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trend {
    pub intercept: f64,
    pub slope: f64,
}

impl Trend {
    pub fn at(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detrended {
    pub residuals: Vec<f64>,
    pub trend: Trend,
}

/// Removes the least-squares line in `t` from `x`.
pub fn detrend_linear(series: &[(f64, f64)]) -> Result<Detrended> {
    if series.len() < 3 {
        return Err(Error::Input(format!("detrending needs at least 3 points, got {}", series.len())));
    }
    let n = series.len() as f64;
    let t_bar = series.iter().map(|p| p.0).sum::<f64>() / n;
    let x_bar = series.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = series.iter().map(|p| (p.0 - t_bar).powi(2)).sum();
    if !(stt > 0.0) {
        return Err(Error::Input("detrending needs at least two distinct time indices".into()));
    }
    let stx: f64 = series.iter().map(|p| (p.0 - t_bar) * (p.1 - x_bar)).sum();
    let slope = stx / stt;
    let trend = Trend {
        intercept: x_bar - slope * t_bar,
        slope,
    };
    Ok(Detrended {
        residuals: series.iter().map(|&(t, x)| x - trend.at(t)).collect(),
        trend,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Recalibrator {
    MosPlugin,
    MosT,
    NgrPlugin,
    NgrBootstrap,
}

impl Recalibrator {
    pub const ALL: [Recalibrator; 4] = [
        Recalibrator::MosPlugin,
        Recalibrator::MosT,
        Recalibrator::NgrPlugin,
        Recalibrator::NgrBootstrap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Recalibrator::MosPlugin => "mos-plugin",
            Recalibrator::MosT => "mos-t",
            Recalibrator::NgrPlugin => "ngr-plugin",
            Recalibrator::NgrBootstrap => "ngr-bootstrap",
        }
    }

    pub fn min_training(&self) -> usize {
        match self {
            Recalibrator::MosPlugin | Recalibrator::MosT => mos::MIN_TRAINING,
            Recalibrator::NgrPlugin | Recalibrator::NgrBootstrap => ngr::MIN_TRAINING,
        }
    }
}

impl std::str::FromStr for Recalibrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recalibrator::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown recalibrator '{s}'")))
    }
}

impl std::fmt::Display for Recalibrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvMode {
    /// Each forecast is trained on the `window` cases immediately before it.
    Rolling { window: usize },
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub mode: CvMode,
    pub recalibrator: Recalibrator,
    pub base_seed: u64,
    /// Bootstrap replicates per forecast (ngr-bootstrap only).
    pub bootstrap_k: usize,
    pub detrend: bool,
    pub optimizer: SimplexSettings,
    /// In rolling mode, evaluate only targets at or after this index
    /// (lets several window sizes share one target set).
    pub first_target: Option<usize>,
    /// Fit folds concurrently. Results do not depend on this.
    pub parallel: bool,
}

impl CvPlan {
    pub fn new(mode: CvMode, recalibrator: Recalibrator) -> Self {
        CvPlan {
            mode,
            recalibrator,
            base_seed: 0,
            bootstrap_k: 50,
            detrend: false,
            optimizer: SimplexSettings::default(),
            first_target: None,
            parallel: true,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let need = self.recalibrator.min_training();
        if let CvMode::Rolling { window } = self.mode {
            if window < need {
                return Err(Error::Input(format!(
                    "window {window} is below the minimum training size {need} of {}",
                    self.recalibrator
                )));
            }
            if n <= window {
                return Err(Error::Input(format!(
                    "{n} cases leave no forecast to evaluate with window {window}"
                )));
            }
        } else if n < need + 1 {
            return Err(Error::Input(format!(
                "leave-one-out with {} needs at least {} cases, got {n}",
                self.recalibrator,
                need + 1
            )));
        }
        if self.recalibrator == Recalibrator::NgrBootstrap && self.bootstrap_k == 0 {
            return Err(Error::Input("bootstrap_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One cross-validation fold: the forecast index and its training indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub target: usize,
    pub train: Vec<usize>,
}

pub fn fold_schedule(n: usize, mode: CvMode, first_target: Option<usize>) -> Vec<Fold> {
    match mode {
        CvMode::Rolling { window } => {
            let start = window.max(first_target.unwrap_or(0));
            (start..n)
                .map(|t| Fold {
                    target: t,
                    train: (t - window..t).collect(),
                })
                .collect()
        }
        CvMode::LeaveOneOut => (0..n)
            .map(|t| Fold {
                target: t,
                train: (0..n).filter(|&i| i != t).collect(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub index: usize,
    pub forecast: PredictiveDist,
    pub y: f64,
    pub record: VerificationRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldFailure {
    pub index: usize,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CvOutput {
    pub folds: Vec<FoldResult>,
    pub failures: Vec<FoldFailure>,
}

/// Fits `recalibrator` on `train` and issues the forecast for case
/// `(m_star, v_star)`. `seed` is used only by the bootstrap.
pub fn forecast(
    train: &TrainingSet,
    m_star: f64,
    v_star: f64,
    recalibrator: Recalibrator,
    bootstrap_k: usize,
    seed: u64,
    optimizer: &SimplexSettings,
) -> Result<PredictiveDist> {
    match recalibrator {
        Recalibrator::MosPlugin => fit_mos(train)?.predict_plugin(m_star).map(Into::into),
        Recalibrator::MosT => fit_mos(train)?.predict_t(m_star).map(Into::into),
        Recalibrator::NgrPlugin => fit_ngr(train, optimizer)?.params.predict(m_star, v_star).map(Into::into),
        Recalibrator::NgrBootstrap => bootstrap_fit(train, bootstrap_k, seed, optimizer)?
            .predict(m_star, v_star)
            .map(Into::into),
    }
}

/// Forecast for case `target` of `data` from the cases in `train_idx`,
/// using positions in `data` as time indices.
pub fn forecast_case(
    data: &TrainingSet,
    train_idx: &[usize],
    target: usize,
    plan: &CvPlan,
) -> Result<PredictiveDist> {
    let rs = data.records();
    let star = rs
        .get(target)
        .ok_or_else(|| Error::Input(format!("target index {target} out of range")))?;
    let train: Vec<(f64, Record)> = train_idx.iter().map(|&i| (i as f64, rs[i])).collect();
    let seed = derive_seed(plan.base_seed, target as u64);
    forecast_at(&train, target as f64, star.m, star.v, plan, seed)
}

/// Forecast at time `t_star` from time-stamped training cases.
///
/// With `plan.detrend`, least-squares lines in time are fitted to the
/// training ensemble means and observations and removed before the
/// recalibration fit; the ensemble-mean trend is removed from `m_star` and
/// the observation trend extrapolated to `t_star` is added back to the
/// forecast location.
pub fn forecast_at(
    train: &[(f64, Record)],
    t_star: f64,
    m_star: f64,
    v_star: f64,
    plan: &CvPlan,
    seed: u64,
) -> Result<PredictiveDist> {
    if !plan.detrend {
        let set = TrainingSet::new(train.iter().map(|(_, r)| *r).collect())?;
        return forecast(&set, m_star, v_star, plan.recalibrator, plan.bootstrap_k, seed, &plan.optimizer);
    }
    let m_series: Vec<(f64, f64)> = train.iter().map(|(t, r)| (*t, r.m)).collect();
    let y_series: Vec<(f64, f64)> = train.iter().map(|(t, r)| (*t, r.y)).collect();
    let dm = detrend_linear(&m_series)?;
    let dy = detrend_linear(&y_series)?;
    let set = TrainingSet::new(
        train
            .iter()
            .zip(dm.residuals.iter().zip(&dy.residuals))
            .map(|((_, r), (&m, &y))| Record { m, v: r.v, y })
            .collect(),
    )?;
    let d = forecast(
        &set,
        m_star - dm.trend.at(t_star),
        v_star,
        plan.recalibrator,
        plan.bootstrap_k,
        seed,
        &plan.optimizer,
    )?;
    Ok(d.shifted(dy.trend.at(t_star)))
}

fn evaluate_fold(data: &TrainingSet, fold: &Fold, plan: &CvPlan) -> std::result::Result<FoldResult, FoldFailure> {
    let y = data.records()[fold.target].y;
    forecast_case(data, &fold.train, fold.target, plan)
        .and_then(|forecast| {
            let record = verification::verify(&forecast, y)?;
            Ok(FoldResult {
                index: fold.target,
                forecast,
                y,
                record,
            })
        })
        .map_err(|error| FoldFailure {
            index: fold.target,
            error,
        })
}

/// Out-of-sample evaluation of `plan.recalibrator` over every fold of
/// `plan.mode`. Failed folds are reported in `failures`, not dropped.
pub fn run_cv(data: &TrainingSet, plan: &CvPlan) -> Result<CvOutput> {
    plan.validate(data.len())?;
    let folds = fold_schedule(data.len(), plan.mode, plan.first_target);
    if folds.is_empty() {
        return Err(Error::Input("the plan produces no folds".into()));
    }
    let results: Vec<_> = if plan.parallel {
        folds.par_iter().map(|f| evaluate_fold(data, f, plan)).collect()
    } else {
        folds.iter().map(|f| evaluate_fold(data, f, plan)).collect()
    };
    let mut out = CvOutput::default();
    for r in results {
        match r {
            Ok(f) => out.folds.push(f),
            Err(e) => out.failures.push(e),
        }
    }
    Ok(out)
}

pub const DEFAULT_LEVELS: [f64; 2] = [0.5, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub folds: usize,
    pub failures: usize,
    pub mean_ignorance: f64,
    pub mean_crps: f64,
    pub pit_histogram: PitHistogram,
    /// `(level, fraction covered)` for each requested central interval.
    pub coverage: Vec<(f64, f64)>,
}

impl Summary {
    pub fn coverage_at(&self, level: f64) -> Option<f64> {
        self.coverage.iter().find(|(l, _)| *l == level).map(|(_, c)| *c)
    }
}

/// Arithmetic means over folds, summed in fold order.
pub fn aggregate(folds: &[FoldResult], failures: usize, levels: &[f64]) -> Result<Summary> {
    if folds.is_empty() {
        return Err(Error::EmptyResult { failures });
    }
    let n = folds.len() as f64;
    let mean_ignorance = folds.iter().map(|f| f.record.ignorance).sum::<f64>() / n;
    let mean_crps = folds.iter().map(|f| f.record.crps).sum::<f64>() / n;
    let pits: Vec<f64> = folds.iter().map(|f| f.record.pit).collect();
    let forecasts: Vec<PredictiveDist> = folds.iter().map(|f| f.forecast.clone()).collect();
    let ys: Vec<f64> = folds.iter().map(|f| f.y).collect();
    let coverage = levels
        .iter()
        .map(|&l| verification::interval_coverage(&forecasts, &ys, l).map(|c| (l, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Summary {
        folds: folds.len(),
        failures,
        mean_ignorance,
        mean_crps,
        pit_histogram: pit_histogram(&pits)?,
        coverage,
    })
}

impl CvOutput {
    pub fn summary(&self, levels: &[f64]) -> Result<Summary> {
        aggregate(&self.folds, self.failures.len(), levels)
    }
}

/// Comparison of two recalibrators on the folds where both succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub folds: usize,
    pub mean_ignorance_ref: f64,
    pub mean_ignorance_new: f64,
    pub mean_crps_ref: f64,
    pub mean_crps_new: f64,
    /// `mean_ignorance_ref - mean_ignorance_new`; positive favours `new`.
    pub ignorance_gain: f64,
    /// CRPS skill of `new` over `ref`.
    pub crpss: f64,
}

pub fn paired(reference: &CvOutput, new: &CvOutput) -> Result<PairedComparison> {
    let by_index: std::collections::BTreeMap<usize, &FoldResult> =
        new.folds.iter().map(|f| (f.index, f)).collect();
    let pairs: Vec<(&FoldResult, &FoldResult)> = reference
        .folds
        .iter()
        .filter_map(|r| by_index.get(&r.index).map(|n| (r, *n)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyResult {
            failures: reference.failures.len() + new.failures.len(),
        });
    }
    let k = pairs.len() as f64;
    let mean = |f: &dyn Fn(&(&FoldResult, &FoldResult)) -> f64| pairs.iter().map(f).sum::<f64>() / k;
    let ign_ref = mean(&|p| p.0.record.ignorance);
    let ign_new = mean(&|p| p.1.record.ignorance);
    let crps_ref = mean(&|p| p.0.record.crps);
    let crps_new = mean(&|p| p.1.record.crps);
    Ok(PairedComparison {
        folds: pairs.len(),
        mean_ignorance_ref: ign_ref,
        mean_ignorance_new: ign_new,
        mean_crps_ref: crps_ref,
        mean_crps_new: crps_new,
        ignorance_gain: ign_ref - ign_new,
        crpss: crpss(crps_ref, crps_new)?,
    })
}

/// Repeated independent experiments: for replication `r`, draw
/// `n_train + 1` cases from `template` with a seed derived from
/// `(base_seed, r)`, fit each recalibrator on the first `n_train` and score
/// the last case. Returns one output per recalibrator, with fold index `r`.
pub fn fresh_training_experiment(
    template: &SyntheticSpec,
    n_train: usize,
    replications: usize,
    recalibrators: &[Recalibrator],
    base_seed: u64,
    bootstrap_k: usize,
    optimizer: &SimplexSettings,
) -> Result<Vec<CvOutput>> {
    let per_rep: Vec<Vec<std::result::Result<FoldResult, FoldFailure>>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let spec = SyntheticSpec {
                n: n_train + 1,
                seed: derive_seed(base_seed, r as u64),
                ..*template
            };
            let data = generate_synthetic(&spec)?;
            let train = data.select(&(0..n_train).collect::<Vec<_>>());
            let star = data.records()[n_train];
            let fold_seed = derive_seed(base_seed ^ 0x5eed, r as u64);
            Ok(recalibrators
                .iter()
                .map(|&rc| {
                    forecast(&train, star.m, star.v, rc, bootstrap_k, fold_seed, optimizer)
                        .and_then(|d| {
                            let record = verification::verify(&d, star.y)?;
                            Ok(FoldResult {
                                index: r,
                                forecast: d,
                                y: star.y,
                                record,
                            })
                        })
                        .map_err(|error| FoldFailure { index: r, error })
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut outs = vec![CvOutput::default(); recalibrators.len()];
    for rep in per_rep {
        for (out, res) in outs.iter_mut().zip(rep) {
            match res {
                Ok(f) => out.folds.push(f),
                Err(e) => out.failures.push(e),
            }
        }
    }
    Ok(outs)
}

/// One row of a training-size sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub recalibrator: Recalibrator,
    pub window: usize,
    pub folds: usize,
    pub failures: usize,
    pub mean_ignorance: f64,
    pub mean_crps: f64,
}

/// Rolling-window evaluation for each window size and recalibrator. All
/// rows score the same targets: those after the largest window.
pub fn sweep(
    data: &TrainingSet,
    windows: &[usize],
    recalibrators: &[Recalibrator],
    template: &CvPlan,
) -> Result<Vec<SweepRow>> {
    let w_max = windows
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::Input("empty window list".into()))?;
    let mut rows = Vec::new();
    for &w in windows {
        let outputs: Vec<CvOutput> = recalibrators
            .iter()
            .map(|&rc| {
                let plan = CvPlan {
                    mode: CvMode::Rolling { window: w },
                    recalibrator: rc,
                    first_target: Some(w_max),
                    ..template.clone()
                };
                run_cv(data, &plan)
            })
            .collect::<Result<_>>()?;
        // Keep only targets every recalibrator scored, so rows pair exactly.
        let common: std::collections::BTreeSet<usize> = outputs
            .iter()
            .map(|o| o.folds.iter().map(|f| f.index).collect::<std::collections::BTreeSet<_>>())
            .reduce(|a, b| a.intersection(&b).copied().collect())
            .unwrap_or_default();
        for (&rc, out) in recalibrators.iter().zip(&outputs) {
            let kept: Vec<&FoldResult> = out.folds.iter().filter(|f| common.contains(&f.index)).collect();
            let k = kept.len().max(1) as f64;
            rows.push(SweepRow {
                recalibrator: rc,
                window: w,
                folds: kept.len(),
                failures: out.folds.len() - kept.len() + out.failures.len(),
                mean_ignorance: kept.iter().map(|f| f.record.ignorance).sum::<f64>() / k,
                mean_crps: kept.iter().map(|f| f.record.crps).sum::<f64>() / k,
            });
        }
    }
    Ok(rows)
}
