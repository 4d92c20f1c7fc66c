//! Multimode shadows from local single-mode measurements.
//!
//! Joint outcomes are drawn by conditional chaining: mode 0 from its reduced
//! state, then each later mode from the state conditioned on the outcomes
//! already drawn. The state is carried as weighted (unnormalized) vectors,
//! so conditioning on one outcome costs one contraction per vector.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::displaced::{add_pnr_snapshot, uniform_disk, BeyondCutoff, PnrSample, PnrSimulator, TParams};
use crate::error::{invalid, Error, Result};
use crate::fock::{coherent_vector, partial_trace, tensor, FockOperator, PSD_TOL};
use crate::homodyne::{add_homodyne_snapshot, HomodyneSample, HomodyneSimulator};
use crate::quadrature::{default_x_max, PatternEvaluator, DEFAULT_GRID_POINTS};
use crate::shadow::Shadow;
use crate::special::{hermite_functions_into, DisplacedColumns};

/// Measurement applied to every mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Protocol {
    Homodyne,
    Pnr(TParams),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeOutcome {
    Homodyne(HomodyneSample),
    Pnr(PnrSample),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultimodeSample {
    pub per_mode: Vec<ModeOutcome>,
}

impl MultimodeSample {
    /// Rejects empty samples and samples mixing protocols across modes.
    pub fn new(per_mode: Vec<ModeOutcome>) -> Result<Self> {
        let Some(first) = per_mode.first() else {
            return Err(invalid("multimode sample needs at least one mode"));
        };
        let homodyne = matches!(first, ModeOutcome::Homodyne(_));
        if per_mode
            .iter()
            .any(|o| matches!(o, ModeOutcome::Homodyne(_)) != homodyne)
        {
            return Err(Error::Unsupported("mixed protocols across modes".into()));
        }
        Ok(Self { per_mode })
    }

    pub fn modes(&self) -> usize {
        self.per_mode.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultimodeDraw {
    pub samples: Vec<MultimodeSample>,
    /// Samples with some photon count ≥ N.
    pub beyond_cutoff: u64,
    /// Samples dropped under the discard policy; they count as zero snapshots.
    pub discarded: u64,
}

impl MultimodeDraw {
    pub fn total(&self) -> u64 {
        self.samples.len() as u64 + self.discarded
    }
}

/// Strictly increasing mode indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSubset {
    indices: Vec<usize>,
}

impl ModeSubset {
    pub fn new(indices: Vec<usize>, modes: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("mode subset is empty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("mode subset must be strictly increasing"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= modes) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                cutoff: modes,
            });
        }
        Ok(Self { indices })
    }

    pub fn all(modes: usize) -> Self {
        Self {
            indices: (0..modes).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Per-mode dimension d with d^modes = total.
pub fn mode_dim(total: usize, modes: usize) -> Result<usize> {
    if modes == 0 {
        return Err(invalid("need at least one mode"));
    }
    let d = (total as f64).powf(1.0 / modes as f64).round() as usize;
    if d == 0 || d.checked_pow(modes as u32) != Some(total) {
        return Err(Error::DimensionMismatch(format!(
            "dimension {total} is not a {modes}-th power"
        )));
    }
    Ok(d)
}

pub fn product_state(states: &[FockOperator]) -> Result<FockOperator> {
    let (first, rest) = states
        .split_first()
        .ok_or_else(|| invalid("product of zero states"))?;
    Ok(rest.iter().fold(first.clone(), |acc, s| tensor(&acc, s)))
}

/// (|α,α⟩ + |−α,−α⟩)/√(2(1 + e^{−4|α|²})) on a dim² space.
pub fn entangled_cat(alpha: C64, dim: usize) -> Result<FockOperator> {
    if dim == 0 {
        return Err(invalid("cutoff must be at least 1"));
    }
    let c = coherent_vector(alpha, dim);
    let norm = (2.0 * (1.0 + (-4.0 * alpha.norm_sqr()).exp())).sqrt();
    let mut v = vec![C64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        for k in 0..dim {
            if (j + k) % 2 == 0 {
                v[j * dim + k] = c[j] * c[k] * 2.0 / norm;
            }
        }
    }
    Ok(FockOperator::pure(&v))
}

/// P_N^{⊗M} ρ P_N^{⊗M} as an N^M-dimensional operator.
pub fn project_modes(rho: &FockOperator, modes: usize, n: usize) -> Result<FockOperator> {
    let d = mode_dim(rho.dim(), modes)?;
    if n > d {
        return Err(Error::DimensionMismatch(format!("cutoff {n} exceeds mode dimension {d}")));
    }
    let total = n.pow(modes as u32);
    let map: Vec<usize> = (0..total)
        .map(|mut i| {
            let mut flat = 0;
            let mut stride = 1;
            for _ in 0..modes {
                flat += (i % n) * stride;
                i /= n;
                stride *= d;
            }
            flat
        })
        .collect();
    let m = DMatrix::from_fn(total, total, |i, j| rho.get(map[i], map[j]));
    Ok(FockOperator::from_hermitian_unchecked(m))
}

/// Reduced state on `subset`.
pub fn reduced_state(rho: &FockOperator, modes: usize, subset: &ModeSubset) -> Result<FockOperator> {
    let d = mode_dim(rho.dim(), modes)?;
    partial_trace(rho, subset.indices(), &vec![d; modes])
}

type Components = Vec<(f64, Vec<C64>)>;

/// Homodyne sampler for conditional single-mode states.
///
/// Targets the same cell-averaged density as the inverse-CDF path, by
/// rejection from the mixture Σ_m √ρ_mm ψ_m², which dominates p(x,θ)
/// with constant Σ_m √ρ_mm.
#[derive(Clone, Debug)]
struct ConditionalQuadrature {
    dim: usize,
    x_min: f64,
    dx: f64,
    /// ψ_m at node i, [i * dim + m].
    psi: Vec<f64>,
    /// Cumulative cell masses of ψ_m², [m][cell + 1].
    cum: Vec<Vec<f64>>,
}

impl ConditionalQuadrature {
    fn new(dim: usize) -> Self {
        let x_max = default_x_max(dim);
        let points = DEFAULT_GRID_POINTS;
        let dx = 2.0 * x_max / (points - 1) as f64;
        let mut psi = vec![0.0; points * dim];
        for i in 0..points {
            let x = -x_max + i as f64 * dx;
            hermite_functions_into(x, &mut psi[i * dim..(i + 1) * dim]);
        }
        let cum = (0..dim)
            .map(|m| {
                let mut c = Vec::with_capacity(points);
                let mut acc = 0.0;
                c.push(0.0);
                for i in 0..points - 1 {
                    let (a, b) = (psi[i * dim + m], psi[(i + 1) * dim + m]);
                    acc += 0.5 * (a * a + b * b) * dx;
                    c.push(acc);
                }
                c
            })
            .collect();
        Self {
            dim,
            x_min: -x_max,
            dx,
            psi,
            cum,
        }
    }

    fn node_density(&self, i: usize, rho: &DMatrix<C64>, phases: &[C64]) -> f64 {
        let row = &self.psi[i * self.dim..(i + 1) * self.dim];
        let mut p = 0.0;
        for m in 0..self.dim {
            let am = phases[m] * row[m];
            let mut s = C64::new(0.0, 0.0);
            for n in 0..self.dim {
                s += rho[(m, n)] * (phases[n].conj() * row[n]);
            }
            p += (am * s).re;
        }
        p
    }

    fn sample<R: Rng + ?Sized>(&self, rho: &DMatrix<C64>, theta: f64, rng: &mut R) -> Result<f64> {
        let w: Vec<f64> = (0..self.dim).map(|m| rho[(m, m)].re.max(0.0).sqrt()).collect();
        let s: f64 = w.iter().sum();
        let mix: Vec<f64> = (0..self.dim)
            .scan(0.0, |acc, m| {
                *acc += w[m] * self.cum[m].last().unwrap();
                Some(*acc)
            })
            .collect();
        let total = *mix.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::Degenerate("conditional state has zero trace".into()));
        }
        let step = C64::from_polar(1.0, -theta);
        let phases: Vec<C64> = (0..self.dim)
            .scan(C64::new(1.0, 0.0), |p, _| {
                let out = *p;
                *p *= step;
                Some(out)
            })
            .collect();
        let envelope = |i: usize| -> f64 {
            let row = &self.psi[i * self.dim..(i + 1) * self.dim];
            row.iter().zip(&w).map(|(p, w)| w * p * p).sum()
        };
        for _ in 0..1_000_000 {
            let u = rng.gen::<f64>() * total;
            let m = mix.partition_point(|&c| c <= u).min(self.dim - 1);
            let cum = &self.cum[m];
            let v = rng.gen::<f64>() * cum.last().unwrap();
            let i = cum.partition_point(|&c| c <= v).clamp(1, cum.len() - 1) - 1;
            let t: f64 = rng.gen();
            let e = 0.5 * (envelope(i) + envelope(i + 1));
            let p = 0.5 * (self.node_density(i, rho, &phases) + self.node_density(i + 1, rho, &phases));
            if rng.gen::<f64>() * s * e < p {
                return Ok(self.x_min + (i as f64 + t) * self.dx);
            }
        }
        Err(Error::Degenerate("rejection sampler failed to accept".into()))
    }
}

#[derive(Clone, Debug)]
enum FirstMode {
    Homodyne(HomodyneSimulator),
    Pnr(PnrSimulator),
}

enum Drawn {
    Kept(MultimodeSample, bool),
    Discarded,
}

/// Joint sampler for an M-mode state under one protocol.
#[derive(Clone, Debug)]
pub struct MultimodeSimulator {
    protocol: Protocol,
    modes: usize,
    dim: usize,
    comps: Components,
    first: FirstMode,
    kernel: Option<ConditionalQuadrature>,
}

impl MultimodeSimulator {
    pub fn new(rho: &FockOperator, modes: usize, protocol: Protocol) -> Result<Self> {
        rho.require_hermitian()?;
        let dim = mode_dim(rho.dim(), modes)?;
        let eig = rho.matrix().clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
        let min = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.min(v));
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        let comps: Components = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 1e-15 * max)
            .map(|(k, &w)| (w, eig.eigenvectors.column(k).iter().copied().collect()))
            .collect();
        let rho0 = if modes == 1 {
            rho.clone()
        } else {
            partial_trace(rho, &[0], &vec![dim; modes])?
        };
        let first = match protocol {
            Protocol::Homodyne => FirstMode::Homodyne(HomodyneSimulator::new(&rho0)?),
            Protocol::Pnr(p) => {
                p.validate()?;
                FirstMode::Pnr(PnrSimulator::new(&rho0)?)
            }
        };
        let kernel = (modes > 1 && protocol == Protocol::Homodyne).then(|| ConditionalQuadrature::new(dim));
        Ok(Self {
            protocol,
            modes,
            dim,
            comps,
            first,
            kernel,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// ⟨μ|m⟩ for one outcome.
    fn amplitudes(&self, o: &ModeOutcome) -> Vec<C64> {
        match o {
            ModeOutcome::Homodyne(s) => {
                let mut psi = vec![0.0; self.dim];
                hermite_functions_into(s.x, &mut psi);
                let step = C64::from_polar(1.0, -s.theta);
                let mut ph = C64::new(1.0, 0.0);
                psi.iter()
                    .map(|&p| {
                        let v = ph * p;
                        ph *= step;
                        v
                    })
                    .collect()
            }
            ModeOutcome::Pnr(s) => {
                let mut col = vec![C64::new(0.0, 0.0); self.dim];
                DisplacedColumns::new(s.alpha, self.dim).column_into(s.n, &mut col);
                col.iter().map(|z| z.conj()).collect()
            }
        }
    }

    fn condition(&self, comps: &Components, a: &[C64]) -> Components {
        comps
            .iter()
            .map(|(w, v)| {
                let rest = v.len() / self.dim;
                let mut out = vec![C64::new(0.0, 0.0); rest];
                for (m, am) in a.iter().enumerate() {
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += am * v[m * rest + r];
                    }
                }
                (*w, out)
            })
            .collect()
    }

    /// Reduced state of the leading mode of `comps`, as components.
    fn leading_components(&self, comps: &Components) -> Components {
        let mut out = Vec::new();
        for (w, v) in comps {
            let rest = v.len() / self.dim;
            for r in 0..rest {
                out.push((*w, (0..self.dim).map(|m| v[m * rest + r]).collect()));
            }
        }
        out
    }

    fn leading_matrix(&self, comps: &Components) -> DMatrix<C64> {
        let mut rho = DMatrix::zeros(self.dim, self.dim);
        for (w, v) in comps {
            let rest = v.len() / self.dim;
            for m in 0..self.dim {
                for n in 0..self.dim {
                    let mut s = C64::new(0.0, 0.0);
                    for r in 0..rest {
                        s += v[m * rest + r] * v[n * rest + r].conj();
                    }
                    rho[(m, n)] += s * *w;
                }
            }
        }
        rho
    }

    fn draw_one<R: Rng + ?Sized>(&self, n_cut: usize, rng: &mut R) -> Result<Drawn> {
        let mut per_mode = Vec::with_capacity(self.modes);
        let mut beyond = false;
        let mut comps: Option<Components> = None;
        for k in 0..self.modes {
            let outcome = match (&self.first, self.protocol, k) {
                (FirstMode::Homodyne(sim), _, 0) => ModeOutcome::Homodyne(sim.draw_one(rng)?),
                (FirstMode::Pnr(sim), Protocol::Pnr(p), 0) => {
                    let alpha = uniform_disk(p.alpha_max, rng);
                    let n = sim.sample_count(alpha, rng)?;
                    ModeOutcome::Pnr(PnrSample { n, alpha })
                }
                (_, Protocol::Homodyne, _) => {
                    let c = comps.as_ref().expect("conditioned state");
                    let rho = self.leading_matrix(c);
                    let mut theta = rng.gen::<f64>() * PI;
                    if theta >= PI {
                        theta = 0.0;
                    }
                    let kernel = self.kernel.as_ref().expect("kernel for M > 1");
                    let x = kernel.sample(&rho, theta, rng)?;
                    ModeOutcome::Homodyne(HomodyneSample { theta, x })
                }
                (_, Protocol::Pnr(p), _) => {
                    let c = comps.as_ref().expect("conditioned state");
                    let sim = PnrSimulator::from_components(self.dim, self.leading_components(c))?;
                    let alpha = uniform_disk(p.alpha_max, rng);
                    let n = sim.sample_count(alpha, rng)?;
                    ModeOutcome::Pnr(PnrSample { n, alpha })
                }
            };
            if let (ModeOutcome::Pnr(s), Protocol::Pnr(p)) = (&outcome, self.protocol) {
                if s.n >= n_cut {
                    beyond = true;
                    if p.beyond_cutoff == BeyondCutoff::Discard {
                        return Ok(Drawn::Discarded);
                    }
                }
            }
            if k + 1 < self.modes {
                let a = self.amplitudes(&outcome);
                let next = self.condition(comps.as_ref().unwrap_or(&self.comps), &a);
                comps = Some(next);
            }
            per_mode.push(outcome);
        }
        Ok(Drawn::Kept(MultimodeSample { per_mode }, beyond))
    }

    /// `count` joint outcomes; `n_cut` is the snapshot cutoff used by the
    /// discard policy.
    pub fn draw<R: Rng + ?Sized>(&self, n_cut: usize, rng: &mut R, count: usize) -> Result<MultimodeDraw> {
        if count == 0 {
            return Err(invalid("sample count must be positive"));
        }
        let mut out = MultimodeDraw {
            samples: Vec::with_capacity(count),
            beyond_cutoff: 0,
            discarded: 0,
        };
        for _ in 0..count {
            match self.draw_one(n_cut, rng)? {
                Drawn::Kept(s, beyond) => {
                    out.beyond_cutoff += beyond as u64;
                    out.samples.push(s);
                }
                Drawn::Discarded => {
                    out.beyond_cutoff += 1;
                    out.discarded += 1;
                }
            }
        }
        Ok(out)
    }
}

pub fn draw_multimode<R: Rng + ?Sized>(
    rho: &FockOperator,
    modes: usize,
    protocol: Protocol,
    n_cut: usize,
    rng: &mut R,
    count: usize,
) -> Result<MultimodeDraw> {
    MultimodeSimulator::new(rho, modes, protocol)?.draw(n_cut, rng, count)
}

/// Builds per-mode and tensor snapshots at cutoff N.
#[derive(Clone, Debug)]
pub struct SnapshotBuilder {
    n: usize,
    protocol: Protocol,
    evaluator: Option<PatternEvaluator>,
}

impl SnapshotBuilder {
    pub fn new(protocol: Protocol, n: usize) -> Result<Self> {
        let evaluator = match protocol {
            Protocol::Homodyne => Some(PatternEvaluator::new(n)?),
            Protocol::Pnr(p) => {
                p.validate()?;
                None
            }
        };
        Ok(Self { n, protocol, evaluator })
    }

    pub fn with_evaluator(evaluator: PatternEvaluator) -> Self {
        Self {
            n: evaluator.cutoff(),
            protocol: Protocol::Homodyne,
            evaluator: Some(evaluator),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    fn mode_into(&self, o: &ModeOutcome, out: &mut DMatrix<C64>, scratch: &mut Vec<f64>) -> Result<()> {
        match (o, self.protocol, &self.evaluator) {
            (ModeOutcome::Homodyne(s), Protocol::Homodyne, Some(ev)) => {
                add_homodyne_snapshot(s, ev, self.n, 1.0, out, scratch)
            }
            (ModeOutcome::Pnr(s), Protocol::Pnr(p), _) => add_pnr_snapshot(s, &p, self.n, 1.0, out),
            _ => Err(invalid("outcome does not match the snapshot protocol")),
        }
    }

    pub fn mode_snapshot(&self, o: &ModeOutcome) -> Result<FockOperator> {
        let mut m = DMatrix::zeros(self.n, self.n);
        self.mode_into(o, &mut m, &mut Vec::new())?;
        Ok(FockOperator::from_hermitian_unchecked(m))
    }

    /// ⊗_{i ∈ subset} σ(μ^i); the full tensor when `subset` is None.
    pub fn snapshot(&self, sample: &MultimodeSample, subset: Option<&ModeSubset>) -> Result<FockOperator> {
        let mut scratch = Vec::new();
        Ok(FockOperator::from_hermitian_unchecked(self.snapshot_matrix(sample, subset, &mut scratch)?))
    }

    fn snapshot_matrix(
        &self,
        sample: &MultimodeSample,
        subset: Option<&ModeSubset>,
        scratch: &mut Vec<f64>,
    ) -> Result<DMatrix<C64>> {
        let all;
        let subset = match subset {
            Some(s) => {
                if let Some(&i) = s.indices().iter().find(|&&i| i >= sample.modes()) {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        cutoff: sample.modes(),
                    });
                }
                s
            }
            None => {
                all = ModeSubset::all(sample.modes());
                &all
            }
        };
        let mut acc: Option<DMatrix<C64>> = None;
        for &i in subset.indices() {
            let mut m = DMatrix::zeros(self.n, self.n);
            self.mode_into(&sample.per_mode[i], &mut m, scratch)?;
            acc = Some(match acc {
                None => m,
                Some(a) => a.kronecker(&m),
            });
        }
        acc.ok_or_else(|| invalid("mode subset is empty"))
    }
}

pub fn multimode_snapshot(sample: &MultimodeSample, builder: &SnapshotBuilder) -> Result<FockOperator> {
    builder.snapshot(sample, None)
}

/// Shadow over `subset` (all modes when None); discarded samples count as
/// zero snapshots.
pub fn multimode_shadow(
    samples: &[MultimodeSample],
    discarded: u64,
    subset: Option<&ModeSubset>,
    builder: &SnapshotBuilder,
) -> Result<Shadow> {
    let first = samples.first().ok_or(Error::EmptySamples)?;
    let k = subset.map_or(first.modes(), |s| s.len());
    let mut shadow = Shadow::new(builder.n.pow(k as u32));
    let mut scratch = Vec::new();
    for s in samples {
        if s.modes() != first.modes() {
            return Err(Error::DimensionMismatch("samples have different mode counts".into()));
        }
        let m = builder.snapshot_matrix(s, subset, &mut scratch)?;
        *shadow.sum_mut() += m;
        shadow.bump(1);
    }
    shadow.add_zeros(discarded);
    Ok(shadow)
}

/// Mean of the marginal snapshots on `subset`.
pub fn estimate_reduced(
    samples: &[MultimodeSample],
    discarded: u64,
    subset: &ModeSubset,
    builder: &SnapshotBuilder,
) -> Result<FockOperator> {
    multimode_shadow(samples, discarded, Some(subset), builder)?.estimate()
}
