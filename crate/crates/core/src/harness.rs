//! Experiment harness: minimum shadow size searches, exponent fits, record
//! simulation and reconstruction runs.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::displaced::{extend_pnr_shadow, BeyondCutoff, PnrSample, PnrSimulator, TParams};
use crate::error::{invalid, Error, Result};
use crate::fock::{make_state, partial_trace, project, wigner, FockOperator, StateKind, StateSpec, WignerGridSpec};
use crate::homodyne::{extend_homodyne_shadow, HomodyneSample, HomodyneSimulator};
use crate::multimode::{entangled_cat, multimode_shadow, product_state, project_modes, MultimodeSimulator, ModeOutcome, MultimodeSample, Protocol, SnapshotBuilder};
use crate::quadrature::PatternEvaluator;
use crate::records::{self, PnrSummary, QuadratureSummary, RecordKind};
use crate::rng::{stream, tag, StreamRng};
use crate::shadow::Shadow;

pub const SCHEMA_VERSION: u32 = 1;

/// 100 trials put the standard error of δ̂ near 0.03 at δ = 0.1.
pub const DEFAULT_TRIALS: usize = 100;
pub const MIN_TRIALS: usize = 20;

const CHUNK: u64 = 4096;

/// Measurement protocol as written in configs and on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolSpec {
    Homodyne,
    Pnr {
        r: f64,
        /// Defaults to √(4N).
        #[serde(default)]
        alpha_max: Option<f64>,
        #[serde(default)]
        beyond_cutoff: Option<BeyondCutoff>,
    },
    /// PNR with r = 0.
    Parity {
        #[serde(default)]
        alpha_max: Option<f64>,
    },
}

impl ProtocolSpec {
    pub fn resolve(&self, n: usize) -> Result<Protocol> {
        let (r, alpha_max, policy) = match *self {
            ProtocolSpec::Homodyne => return Ok(Protocol::Homodyne),
            ProtocolSpec::Pnr { r, alpha_max, beyond_cutoff } => (r, alpha_max, beyond_cutoff),
            ProtocolSpec::Parity { alpha_max } => (0.0, alpha_max, None),
        };
        let mut p = match alpha_max {
            Some(a) => TParams::new(r, a)?,
            None => TParams::for_cutoff(r, n)?,
        };
        if let Some(policy) = policy {
            p = p.with_policy(policy);
        }
        Ok(Protocol::Pnr(p))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::Homodyne => "homodyne",
            ProtocolSpec::Pnr { .. } => "pnr",
            ProtocolSpec::Parity { .. } => "parity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TSearch {
    pub t_min: u64,
    pub t_max: u64,
    pub growth: f64,
    /// Bisection stops once hi − lo ≤ max(1, resolution · hi).
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_resolution() -> f64 {
    0.01
}

impl Default for TSearch {
    fn default() -> Self {
        Self {
            t_min: 16,
            t_max: 4_000_000,
            growth: 2.0,
            resolution: default_resolution(),
        }
    }
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_tenth() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub state: StateSpec,
    pub protocol: ProtocolSpec,
    pub n_list: Vec<usize>,
    #[serde(default = "default_tenth")]
    pub epsilon: f64,
    #[serde(default = "default_tenth")]
    pub delta: f64,
    #[serde(default = "default_trials")]
    pub trials_per_t: usize,
    #[serde(default)]
    pub t_search: TSearch,
    #[serde(default)]
    pub root_seed: u64,
}

impl ExperimentConfig {
    pub fn new(state: StateSpec, protocol: ProtocolSpec, n_list: Vec<usize>, root_seed: u64) -> Self {
        Self {
            state,
            protocol,
            n_list,
            epsilon: 0.1,
            delta: 0.1,
            trials_per_t: DEFAULT_TRIALS,
            t_search: TSearch::default(),
            root_seed,
        }
    }

    /// TOML, or JSON when the extension is `.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(invalid("n_list must hold positive cutoffs"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        if self.trials_per_t < MIN_TRIALS {
            return Err(invalid(format!("trials_per_t must be at least {MIN_TRIALS}")));
        }
        let s = &self.t_search;
        if s.t_min == 0 || s.t_max < s.t_min {
            return Err(invalid("need 0 < t_min ≤ t_max"));
        }
        if !(s.growth > 1.0) {
            return Err(invalid("growth factor must exceed 1"));
        }
        if !(s.resolution >= 0.0) {
            return Err(invalid("resolution must be non-negative"));
        }
        for &n in &self.n_list {
            self.protocol.resolve(n)?;
        }
        Ok(())
    }

    /// The state simulated at cutoff N. Random pure states are drawn on N
    /// levels; other states use max(cutoff, N).
    pub fn state_for(&self, n: usize) -> Result<FockOperator> {
        let mut spec = self.state.clone();
        spec.cutoff = match spec.kind {
            StateKind::RandomPure { .. } => n,
            StateKind::Custom { .. } => spec.cutoff,
            _ => spec.cutoff.max(n),
        };
        make_state(&spec)
    }
}

/// Draws samples for one (state, protocol) pair and folds them into shadows.
pub(crate) enum Sampler {
    Homodyne(HomodyneSimulator, PatternEvaluator),
    Pnr(PnrSimulator, TParams),
}

impl Sampler {
    pub(crate) fn new(rho: &FockOperator, protocol: Protocol, n: usize) -> Result<Self> {
        Ok(match protocol {
            Protocol::Homodyne => Sampler::Homodyne(HomodyneSimulator::new(rho)?, PatternEvaluator::new(n)?),
            Protocol::Pnr(p) => Sampler::Pnr(PnrSimulator::new(rho)?, p),
        })
    }

    pub(crate) fn extend(&self, shadow: &mut Shadow, rng: &mut StreamRng, mut count: u64) -> Result<()> {
        while count > 0 {
            let k = count.min(CHUNK);
            match self {
                Sampler::Homodyne(sim, ev) => {
                    let s = sim.draw(rng, k as usize)?;
                    extend_homodyne_shadow(shadow, &s, ev)?;
                }
                Sampler::Pnr(sim, p) => {
                    let d = sim.draw(p, shadow.dim(), rng, k as usize)?;
                    extend_pnr_shadow(shadow, &d.samples, d.discarded, p)?;
                }
            }
            count -= k;
        }
        Ok(())
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(failures: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let n = trials as f64;
    let p = failures as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// δ̂ at one shadow size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub failures: usize,
    pub trials: usize,
    pub delta_hat: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl Checkpoint {
    fn new(t: u64, errors: &[f64], epsilon: f64) -> Self {
        let failures = errors.iter().filter(|&&e| e > epsilon).count();
        let (lo, hi) = wilson_interval(failures, errors.len());
        Self {
            t,
            failures,
            trials: errors.len(),
            delta_hat: failures as f64 / errors.len() as f64,
            wilson_low: lo,
            wilson_high: hi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// δ̂ ≤ δ at `min_t` and δ̂ > δ one resolution step below.
    Found,
    /// Already δ̂ ≤ δ at t_min; the true minimum may be smaller.
    BelowTMin,
    /// δ̂ > δ at t_max; no minimum is reported.
    Censored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinTResult {
    pub n: usize,
    pub status: SearchStatus,
    pub min_t: Option<u64>,
    /// Every evaluated T, in evaluation order.
    pub checkpoints: Vec<Checkpoint>,
    /// Sorted per-trial ∞-norm errors at `min_t` (at t_max when censored).
    pub trial_errors: Vec<f64>,
}

#[derive(Clone)]
struct Trial {
    shadow: Shadow,
    rng: StreamRng,
}

fn fresh_trials(root: u64, stream_tag: u8, n: usize, count: usize) -> Vec<Trial> {
    (0..count)
        .map(|i| Trial {
            shadow: Shadow::new(n),
            rng: stream(root, stream_tag, n, i as u64),
        })
        .collect()
}

/// Extends every trial shadow by `count` samples and returns the errors.
fn advance(trials: &mut [Trial], sampler: &Sampler, target: &FockOperator, count: u64) -> Result<Vec<f64>> {
    trials
        .par_iter_mut()
        .map(|t| {
            sampler.extend(&mut t.shadow, &mut t.rng, count)?;
            Ok(t.shadow.estimate()?.sub(target)?.infinity_norm())
        })
        .collect()
}

struct Setup {
    sampler: Sampler,
    target: FockOperator,
}

fn setup(config: &ExperimentConfig, n: usize) -> Result<Setup> {
    let rho = config.state_for(n)?;
    let target = project(&rho, n)?;
    let sampler = Sampler::new(&rho, config.protocol.resolve(n)?, n)?;
    Ok(Setup { sampler, target })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Least T with δ̂(T) ≤ δ at cutoff N: geometric growth, then bisection.
/// Each trial shadow is a prefix average of its own stream, so moving to a
/// larger T only draws the extra samples.
pub fn find_min_t(config: &ExperimentConfig, n: usize) -> Result<MinTResult> {
    config.validate()?;
    let Setup { sampler, target } = setup(config, n)?;
    let s = config.t_search;
    let mut trials = fresh_trials(config.root_seed, tag::TRIAL, n, config.trials_per_t);
    let mut checkpoints = Vec::new();
    let mut done = 0u64;
    let mut t = s.t_min;
    let mut below: Option<(u64, Vec<Trial>)> = None;
    let pass = |c: &Checkpoint| c.delta_hat <= config.delta;

    let (mut hi, mut hi_errors) = loop {
        let errors = advance(&mut trials, &sampler, &target, t - done)?;
        done = t;
        let c = Checkpoint::new(t, &errors, config.epsilon);
        let ok = pass(&c);
        checkpoints.push(c);
        if ok {
            break (t, errors);
        }
        if t >= s.t_max {
            return Ok(MinTResult {
                n,
                status: SearchStatus::Censored,
                min_t: None,
                checkpoints,
                trial_errors: sorted(errors),
            });
        }
        below = Some((t, trials.clone()));
        t = ((t as f64 * s.growth).ceil() as u64).clamp(t + 1, s.t_max);
    };

    let Some((mut lo, mut lo_trials)) = below else {
        return Ok(MinTResult {
            n,
            status: SearchStatus::BelowTMin,
            min_t: Some(hi),
            checkpoints,
            trial_errors: sorted(hi_errors),
        });
    };
    while hi - lo > 1.max((s.resolution * hi as f64) as u64) {
        let mid = lo + (hi - lo) / 2;
        let mut probe = lo_trials.clone();
        let errors = advance(&mut probe, &sampler, &target, mid - lo)?;
        let c = Checkpoint::new(mid, &errors, config.epsilon);
        if pass(&c) {
            hi = mid;
            hi_errors = errors;
        } else {
            lo = mid;
            lo_trials = probe;
        }
        checkpoints.push(c);
    }
    Ok(MinTResult {
        n,
        status: SearchStatus::Found,
        min_t: Some(hi),
        checkpoints,
        trial_errors: sorted(hi_errors),
    })
}

/// δ̂ at each T of an increasing list, from one set of growing shadows.
pub fn failure_curve(config: &ExperimentConfig, n: usize, ts: &[u64]) -> Result<Vec<Checkpoint>> {
    config.validate()?;
    if ts.is_empty() || ts.windows(2).any(|w| w[1] <= w[0]) || ts[0] == 0 {
        return Err(invalid("T values must be positive and strictly increasing"));
    }
    let Setup { sampler, target } = setup(config, n)?;
    let mut trials = fresh_trials(config.root_seed, tag::CURVE, n, config.trials_per_t);
    let mut done = 0;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let errors = advance(&mut trials, &sampler, &target, t - done)?;
        done = t;
        out.push(Checkpoint::new(t, &errors, config.epsilon));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Slope of ln T against ln N.
    pub p: f64,
    pub intercept: f64,
    pub p_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Least squares of ln T on ln N.
pub fn fit_exponent(points: &[(usize, f64)]) -> Result<ExponentFit> {
    if points.len() < 3 {
        return Err(invalid("an exponent fit needs at least 3 cutoffs"));
    }
    if points.iter().any(|&(n, t)| n == 0 || !(t > 0.0 && t.is_finite())) {
        return Err(invalid("cutoffs and T values must be positive"));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, t)| t.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 1e-24 {
        return Err(Error::Degenerate("all cutoffs are equal".into()));
    }
    if syy <= 1e-24 {
        return Err(Error::Degenerate("all T values are equal".into()));
    }
    let p = sxy / sxx;
    let intercept = my - p * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - intercept - p * x).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let s2 = ssr / (k - 2.0);
    Ok(ExponentFit {
        p,
        intercept,
        p_stderr: (s2 / sxx).sqrt(),
        intercept_stderr: (s2 * (1.0 / k + mx * mx / sxx)).sqrt(),
        r_squared: 1.0 - ssr / syy,
        residuals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub results: Vec<MinTResult>,
    /// Fit over the `Found` cutoffs; absent when fewer than three exist.
    pub fit: Option<ExponentFit>,
    pub fit_note: Option<String>,
    pub started_at: String,
    pub finished_at: String,
}

impl ScalingReport {
    pub fn censored(&self) -> bool {
        self.results.iter().any(|r| r.status == SearchStatus::Censored)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn run_scaling(config: &ExperimentConfig) -> Result<ScalingReport> {
    config.validate()?;
    let started_at = now();
    let mut n_list = config.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let results = n_list.iter().map(|&n| find_min_t(config, n)).collect::<Result<Vec<_>>>()?;
    let points: Vec<(usize, f64)> = results
        .iter()
        .filter(|r| r.status == SearchStatus::Found)
        .filter_map(|r| r.min_t.map(|t| (r.n, t as f64)))
        .collect();
    let (fit, fit_note) = match fit_exponent(&points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(ScalingReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        results,
        fit,
        fit_note,
        started_at,
        finished_at: now(),
    })
}

/// How a simulated multimode state is assembled from `state`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    /// `state` on every mode.
    #[default]
    Product,
    /// (|α,α⟩ + |−α,−α⟩)/norm on two modes, α and cutoff taken from a
    /// coherent or cat `state`.
    EntangledCat,
    /// `state` is a custom matrix already on all modes.
    Full,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub state: StateSpec,
    #[serde(default = "one")]
    pub modes: usize,
    #[serde(default)]
    pub joint: Joint,
    pub samples: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn single(state: StateSpec, samples: usize, seed: u64) -> Self {
        Self {
            state,
            modes: 1,
            joint: Joint::Product,
            samples,
            seed,
        }
    }

    pub fn build_state(&self) -> Result<FockOperator> {
        if self.modes == 0 {
            return Err(invalid("need at least one mode"));
        }
        match self.joint {
            Joint::Product => {
                let one = make_state(&self.state)?;
                if self.modes == 1 {
                    Ok(one)
                } else {
                    product_state(&vec![one; self.modes])
                }
            }
            Joint::EntangledCat => {
                if self.modes != 2 {
                    return Err(invalid("the entangled cat is a two-mode state"));
                }
                let alpha = match self.state.kind {
                    StateKind::Coherent { re, im } | StateKind::Cat { re, im, .. } => num_complex::Complex64::new(re, im),
                    _ => return Err(invalid("entangled cat needs a coherent or cat amplitude")),
                };
                entangled_cat(alpha, self.state.cutoff)
            }
            Joint::Full => make_state(&self.state),
        }
    }
}

/// Outcomes in memory, in the same shape as a record file.
#[derive(Clone, Debug, PartialEq)]
pub enum RecordSet {
    Quadrature(Vec<HomodyneSample>),
    Pnr(Vec<PnrSample>),
    Multimode(Vec<MultimodeSample>),
}

impl RecordSet {
    pub fn len(&self) -> usize {
        match self {
            RecordSet::Quadrature(v) => v.len(),
            RecordSet::Pnr(v) => v.len(),
            RecordSet::Multimode(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn modes(&self) -> usize {
        match self {
            RecordSet::Multimode(v) => v.first().map_or(1, |s| s.modes()),
            _ => 1,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        match self {
            RecordSet::Quadrature(v) => records::write_quadrature(path, v),
            RecordSet::Pnr(v) => records::write_pnr(path, v),
            RecordSet::Multimode(v) => records::write_multimode(path, v),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(match records::detect_kind(path)? {
            RecordKind::Quadrature => RecordSet::Quadrature(records::read_quadrature(path)?),
            RecordKind::Pnr => RecordSet::Pnr(records::read_pnr(path)?),
            RecordKind::Heterodyne => {
                return Err(Error::Unsupported("heterodyne records carry no snapshot in this crate".into()))
            }
            RecordKind::MultimodeQuadrature { .. } | RecordKind::MultimodePnr { .. } => {
                RecordSet::Multimode(records::read_multimode(path)?)
            }
        })
    }

    pub fn summary(&self) -> Result<Option<RecordSummary>> {
        Ok(match self {
            RecordSet::Quadrature(v) => Some(RecordSummary::Quadrature(records::summarize_quadrature(v)?)),
            RecordSet::Pnr(v) => Some(RecordSummary::Pnr(records::summarize_pnr(v)?)),
            RecordSet::Multimode(_) => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordSummary {
    Quadrature(QuadratureSummary),
    Pnr(PnrSummary),
}

/// Simulated records. PNR outcomes are all kept, as a detector would
/// report them; the beyond-cutoff policy applies at reconstruction.
pub fn simulate_records(spec: &SimulationSpec, protocol: &ProtocolSpec, n: usize) -> Result<RecordSet> {
    if spec.samples == 0 {
        return Err(Error::EmptySamples);
    }
    let rho = spec.build_state()?;
    let protocol = match protocol.resolve(n)? {
        Protocol::Pnr(p) => Protocol::Pnr(p.with_policy(BeyondCutoff::Keep)),
        p => p,
    };
    let mut rng = stream(spec.seed, tag::SIMULATE, n, 0);
    if spec.modes > 1 {
        let d = MultimodeSimulator::new(&rho, spec.modes, protocol)?.draw(n, &mut rng, spec.samples)?;
        return Ok(RecordSet::Multimode(d.samples));
    }
    Ok(match protocol {
        Protocol::Homodyne => RecordSet::Quadrature(HomodyneSimulator::new(&rho)?.draw(&mut rng, spec.samples)?),
        Protocol::Pnr(p) => RecordSet::Pnr(PnrSimulator::new(&rho)?.draw(&p, n, &mut rng, spec.samples)?.samples),
    })
}

/// Shadow estimate at cutoff N (per mode). Returns the estimate and the
/// number of outcomes dropped by the beyond-cutoff policy.
pub fn estimate_from_records(set: &RecordSet, protocol: &ProtocolSpec, n: usize) -> Result<(FockOperator, u64)> {
    if set.is_empty() {
        return Err(Error::EmptySamples);
    }
    let protocol = protocol.resolve(n)?;
    let discard = |k: usize| matches!(protocol, Protocol::Pnr(p) if p.beyond_cutoff == BeyondCutoff::Discard && k >= n);
    let builder = SnapshotBuilder::new(protocol, n)?;
    let (shadow, dropped) = match set {
        RecordSet::Quadrature(v) => {
            let sample = |s: &HomodyneSample| MultimodeSample {
                per_mode: vec![ModeOutcome::Homodyne(*s)],
            };
            let all: Vec<MultimodeSample> = v.iter().map(sample).collect();
            (multimode_shadow(&all, 0, None, &builder)?, 0)
        }
        RecordSet::Pnr(v) => {
            let Protocol::Pnr(p) = protocol else {
                return Err(invalid("PNR records need a PNR or parity protocol"));
            };
            let kept: Vec<PnrSample> = v.iter().copied().filter(|s| !discard(s.n)).collect();
            let dropped = (v.len() - kept.len()) as u64;
            let mut shadow = Shadow::new(n);
            extend_pnr_shadow(&mut shadow, &kept, dropped, &p)?;
            (shadow, dropped)
        }
        RecordSet::Multimode(v) => {
            let beyond = |s: &MultimodeSample| {
                s.per_mode.iter().any(|o| matches!(o, ModeOutcome::Pnr(p) if discard(p.n)))
            };
            let kept: Vec<MultimodeSample> = v.iter().filter(|s| !beyond(s)).cloned().collect();
            let dropped = (v.len() - kept.len()) as u64;
            if kept.is_empty() {
                return Err(Error::Degenerate("every record was discarded".into()));
            }
            (multimode_shadow(&kept, dropped, None, &builder)?, dropped)
        }
    };
    Ok((shadow.estimate()?, dropped))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Records { path: PathBuf },
    Simulate(SimulationSpec),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub density: Option<PathBuf>,
    pub wigner: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ReconstructionRequest {
    pub source: Source,
    pub protocol: ProtocolSpec,
    pub n: usize,
    /// Defaults to the simulated state for simulator sources.
    pub reference: Option<FockOperator>,
    pub wigner_grid: Option<WignerGridSpec>,
    pub outputs: OutputPaths,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub schema_version: u32,
    pub protocol: ProtocolSpec,
    pub n: usize,
    pub modes: usize,
    /// Records read or simulated, discarded ones included.
    pub samples: u64,
    pub discarded: u64,
    /// ‖σ − P_N ρ_ref P_N‖_∞ when a reference is available.
    pub error_inf: Option<f64>,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub summary: Option<RecordSummary>,
    pub outputs: OutputPaths,
    pub created_at: String,
}

/// Estimate plus the report; writes whichever outputs are requested. For
/// several modes the Wigner grid is that of the mode-0 reduced estimate.
pub fn run_reconstruction(req: &ReconstructionRequest) -> Result<(FockOperator, ReconstructionReport)> {
    if req.n == 0 {
        return Err(invalid("cutoff must be positive"));
    }
    let (set, simulated) = match &req.source {
        Source::Records { path } => (RecordSet::read(path)?, None),
        Source::Simulate(spec) => (simulate_records(spec, &req.protocol, req.n)?, Some(spec.build_state()?)),
    };
    let modes = set.modes();
    let (estimate, discarded) = estimate_from_records(&set, &req.protocol, req.n)?;
    let error_inf = match req.reference.as_ref().or(simulated.as_ref()) {
        Some(r) => {
            let target = if modes == 1 {
                project(r, req.n)?
            } else {
                project_modes(r, modes, req.n)?
            };
            Some(estimate.sub(&target)?.infinity_norm())
        }
        None => None,
    };
    if let Some(p) = &req.outputs.density {
        estimate.write_json(p)?;
    }
    if let Some(p) = &req.outputs.wigner {
        let single = if modes == 1 {
            estimate.clone()
        } else {
            partial_trace(&estimate, &[0], &vec![req.n; modes])?
        };
        let grid = req.wigner_grid.clone().unwrap_or_else(|| WignerGridSpec::for_dim(req.n));
        wigner(&single, &grid)?.write_csv(p)?;
    }
    let report = ReconstructionReport {
        schema_version: SCHEMA_VERSION,
        protocol: req.protocol,
        n: req.n,
        modes,
        samples: set.len() as u64,
        discarded,
        error_inf,
        trace: estimate.trace().re,
        min_eigenvalue: estimate.min_eigenvalue()?,
        summary: set.summary()?,
        outputs: req.outputs.clone(),
        created_at: now(),
    };
    if let Some(p) = &req.outputs.report {
        write_json(p, &report)?;
    }
    Ok((estimate, report))
}
