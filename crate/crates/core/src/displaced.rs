//! T-operators, displaced Fock sampling (PNR and parity), PNR snapshots and
//! heterodyne sampling.
//!
//! T_s(α) = Σ_m λ_s^(m) |α,m⟩⟨α,m| with λ_s^(m) = 2(−1)^m (1−s)^m / (π(1+s)^{m+1}).
//! With these eigenvalues the duality reads
//!
//! ρ = π ∫ d²α Σ_n ⟨n,α|ρ|n,α⟩ λ_r^(n) T_{−r}(α),
//!
//! so for α uniform on a region of area A the unbiased single-shot
//! snapshot is π A λ_r^(n) P_N T_{−r}(α) P_N.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::FockOperator;
use crate::shadow::Shadow;
use crate::special::{displacement_matrix, laguerre_diagonal, DisplacedColumns};

/// Hard cap on photon counts explored past the classical turning point.
const PHOTON_MARGIN: usize = 2000;

/// What to do with photon counts n ≥ N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeyondCutoff {
    /// Keep them; their snapshots are bounded when r ≥ 0.
    Keep,
    /// Drop them and count them as zero snapshots, which reproduces the
    /// n < N truncated expansion.
    Discard,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TParams {
    pub r: f64,
    pub alpha_max: f64,
    pub beyond_cutoff: BeyondCutoff,
}

impl TParams {
    /// Disk of radius `alpha_max`. n ≥ N outcomes are kept for r ≥ 0 and
    /// discarded for r < 0, where λ_r^(n) grows without bound.
    pub fn new(r: f64, alpha_max: f64) -> Result<Self> {
        if !(r.abs() < 1.0) {
            return Err(invalid(format!("|r| must be < 1, got {r}")));
        }
        if !(alpha_max > 0.0 && alpha_max.is_finite()) {
            return Err(invalid("alpha_max must be positive"));
        }
        let beyond_cutoff = if r >= 0.0 {
            BeyondCutoff::Keep
        } else {
            BeyondCutoff::Discard
        };
        Ok(Self {
            r,
            alpha_max,
            beyond_cutoff,
        })
    }

    /// α_max² = 4N, so A = 4πN.
    pub fn for_cutoff(r: f64, n: usize) -> Result<Self> {
        Self::new(r, (4.0 * n as f64).sqrt())
    }

    pub fn with_policy(mut self, policy: BeyondCutoff) -> Self {
        self.beyond_cutoff = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.r, self.alpha_max).map(|_| ())
    }

    /// A = π α_max².
    pub fn area(&self) -> f64 {
        PI * self.alpha_max * self.alpha_max
    }
}

/// λ_s^(n) = 2(−1)^n (1−s)^n / (π (1+s)^{n+1}).
pub fn lambda(n: usize, s: f64) -> Result<f64> {
    if !(s.abs() < 1.0) {
        return Err(invalid(format!("|r| must be < 1, got {s}")));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let ln_mag = n as f64 * ((1.0 - s) / (1.0 + s)).ln() - (1.0 + s).ln();
    Ok(sign * 2.0 / PI * ln_mag.exp())
}

pub use crate::special::displaced_overlap;

/// P_N T_s(α) P_N from the normally ordered form
///
/// D(α)(−q)^{a†a}D(α)† = e^{−(1+q)|α|²} e^{βa†} (−q)^{a†a} e^{β* a},
/// β = (1+q)α, q = (1−s)/(1+s),
///
/// whose matrix elements are finite Laguerre sums. Summing the spectral
/// series instead cancels terms of size e^{(q−1)|α|²} when s < 0.
pub fn t_operator(alpha: C64, s: f64, n: usize) -> Result<FockOperator> {
    if !(s.abs() < 1.0) {
        return Err(invalid(format!("|r| must be < 1, got {s}")));
    }
    if n == 0 {
        return Err(invalid("cutoff must be positive"));
    }
    let q = (1.0 - s) / (1.0 + s);
    let pref = 2.0 / (PI * (1.0 + s));
    let beta = alpha * (1.0 + q);
    let y = beta.norm_sqr() / q;
    let ph = if beta.norm() > 0.0 {
        beta / beta.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let base = -(1.0 + q) * alpha.norm_sqr();
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut buf = vec![0.0; n];
    let mut ln_fact = 0.0;
    let mut phase = C64::new(1.0, 0.0);
    for d in 0..n {
        if d > 0 {
            ln_fact += (d as f64).ln();
            phase *= ph;
        }
        let ln_t0 = if d == 0 {
            base
        } else if beta.norm() == 0.0 {
            f64::NEG_INFINITY
        } else {
            base + d as f64 * beta.norm().ln() - 0.5 * ln_fact
        };
        // t_k = √(k!/(k+d)!) L_k^{(d)}(y) e^{base} |β|^d
        laguerre_diagonal(d, y, ln_t0, &mut buf[..n - d]);
        let mut qk = 1.0;
        for k in 0..n - d {
            let v = phase * (pref * qk * buf[k]);
            m[(k + d, k)] = v;
            m[(k, k + d)] = v.conj();
            qk *= -q;
        }
    }
    Ok(FockOperator::from_hermitian_unchecked(m))
}

/// P_N T_s(α) P_N by the truncated spectral sum Σ_m λ_s^(m) v_m v_m†,
/// v_m = P_N D(α)|m⟩. Reliable for s ≥ 0 or small |α|; used to
/// cross-check [`t_operator`].
pub fn t_operator_spectral(alpha: C64, s: f64, n: usize) -> Result<FockOperator> {
    let mut cols = DisplacedColumns::new(alpha, n);
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut m = DMatrix::<C64>::zeros(n, n);
    let turn = (alpha.norm() + (n as f64).sqrt()).powi(2).ceil() as usize;
    for k in 0..turn + PHOTON_MARGIN {
        cols.column_into(k, &mut v);
        let lam = lambda(k, s)?;
        let w: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] += v[i] * v[j].conj() * lam;
            }
        }
        if k > turn && (lam * w).abs() < 1e-16 {
            break;
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(j, i)] = m[(i, j)].conj();
        }
        m[(i, i)].im = 0.0;
    }
    Ok(FockOperator::from_hermitian_unchecked(m))
}

/// One PNR record: displacement α and detected photon count n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnrSample {
    pub n: usize,
    pub alpha: C64,
}

impl PnrSample {
    pub fn new(n: usize, alpha: C64) -> Result<Self> {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { n, alpha })
    }
}

/// Samples from one draw call, with the beyond-cutoff tally.
#[derive(Clone, Debug, PartialEq)]
pub struct PnrDraw {
    pub samples: Vec<PnrSample>,
    /// Outcomes with n ≥ N (kept or not, depending on the policy).
    pub beyond_cutoff: u64,
    /// Outcomes removed from `samples`; they count as zero snapshots.
    pub discarded: u64,
}

impl PnrDraw {
    pub fn total(&self) -> u64 {
        self.samples.len() as u64 + self.discarded
    }
    pub fn beyond_fraction(&self) -> f64 {
        self.beyond_cutoff as f64 / self.total().max(1) as f64
    }
}

/// Eigen-factorized state for fast ⟨n,α|ρ|n,α⟩ evaluation.
#[derive(Clone, Debug)]
pub struct PnrSimulator {
    weights: Vec<f64>,
    /// Conjugated eigenvectors, [k][j].
    vectors: Vec<Vec<C64>>,
    dim: usize,
    trace: f64,
}

impl PnrSimulator {
    pub fn new(rho: &FockOperator) -> Result<Self> {
        rho.require_hermitian()?;
        let dim = rho.dim();
        let eig = rho.matrix().clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
        let min = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.min(v));
        if min < -crate::fock::PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        let mut weights = Vec::new();
        let mut vectors = Vec::new();
        for (k, &w) in eig.eigenvalues.iter().enumerate() {
            if w > 1e-15 * max {
                weights.push(w);
                vectors.push(eig.eigenvectors.column(k).iter().map(|z| z.conj()).collect());
            }
        }
        let trace = weights.iter().sum();
        if !(trace > 0.0) {
            return Err(Error::Degenerate("state has zero trace".into()));
        }
        Ok(Self {
            weights,
            vectors,
            dim,
            trace,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// ρ = Σ_k w_k |v_k⟩⟨v_k| with unnormalized v_k.
    pub(crate) fn from_components(dim: usize, comps: Vec<(f64, Vec<C64>)>) -> Result<Self> {
        let mut weights = Vec::with_capacity(comps.len());
        let mut vectors = Vec::with_capacity(comps.len());
        let mut trace = 0.0;
        for (w, v) in comps {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!("component of length {} vs {dim}", v.len())));
            }
            trace += w * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            weights.push(w);
            vectors.push(v.iter().map(|z| z.conj()).collect());
        }
        if !(trace > 0.0) {
            return Err(Error::Degenerate("state has zero trace".into()));
        }
        Ok(Self {
            weights,
            vectors,
            dim,
            trace,
        })
    }

    fn prob(&self, col: &[C64]) -> f64 {
        let mut p = 0.0;
        for (w, v) in self.weights.iter().zip(&self.vectors) {
            let amp: C64 = v.iter().zip(col).map(|(a, b)| a * b).sum();
            p += w * amp.norm_sqr();
        }
        p
    }

    /// ⟨n,α|ρ|n,α⟩ for n = 0..count.
    pub fn photon_distribution(&self, alpha: C64, count: usize) -> Vec<f64> {
        let mut cols = DisplacedColumns::new(alpha, self.dim);
        let mut v = vec![C64::new(0.0, 0.0); self.dim];
        (0..count)
            .map(|n| {
                cols.column_into(n, &mut v);
                self.prob(&v)
            })
            .collect()
    }

    /// Photon count at fixed α by sequential inverse CDF.
    pub fn sample_count<R: Rng + ?Sized>(&self, alpha: C64, rng: &mut R) -> Result<usize> {
        let mut cols = DisplacedColumns::new(alpha, self.dim);
        let mut v = vec![C64::new(0.0, 0.0); self.dim];
        let turn = (alpha.norm() + (self.dim as f64).sqrt()).powi(2).ceil() as usize;
        let cap = turn + PHOTON_MARGIN;
        let mut probs: Vec<f64> = Vec::new();
        for _ in 0..64 {
            let u = rng.gen::<f64>() * self.trace;
            let mut acc = 0.0;
            for n in 0..cap {
                if n == probs.len() {
                    cols.column_into(n, &mut v);
                    probs.push(self.prob(&v));
                }
                acc += probs[n];
                if acc > u {
                    return Ok(n);
                }
            }
            // u fell into the round-off gap between Σ p_n and tr ρ: redraw.
        }
        Err(Error::Degenerate("photon-count distribution failed to normalize".into()))
    }

    /// α uniform on the disk, then n from ⟨n,α|ρ|n,α⟩/tr ρ.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        params: &TParams,
        n_cut: usize,
        rng: &mut R,
        count: usize,
    ) -> Result<PnrDraw> {
        params.validate()?;
        if count == 0 {
            return Err(invalid("sample count must be positive"));
        }
        let mut samples = Vec::with_capacity(count);
        let mut beyond = 0;
        let mut discarded = 0;
        for _ in 0..count {
            let alpha = uniform_disk(params.alpha_max, rng);
            let n = self.sample_count(alpha, rng)?;
            if n >= n_cut {
                beyond += 1;
                if params.beyond_cutoff == BeyondCutoff::Discard {
                    discarded += 1;
                    continue;
                }
            }
            samples.push(PnrSample { n, alpha });
        }
        Ok(PnrDraw {
            samples,
            beyond_cutoff: beyond,
            discarded,
        })
    }
}

pub fn uniform_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> C64 {
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = 2.0 * PI * rng.gen::<f64>();
    C64::from_polar(r, phi)
}

pub fn sample_pnr<R: Rng + ?Sized>(
    rho: &FockOperator,
    params: &TParams,
    n_cut: usize,
    rng: &mut R,
    count: usize,
) -> Result<PnrDraw> {
    PnrSimulator::new(rho)?.draw(params, n_cut, rng, count)
}

/// Adds `weight · π A λ_r^(n) P_N T_{−r}(α) P_N` into `out`.
pub fn add_pnr_snapshot(
    sample: &PnrSample,
    params: &TParams,
    n_cut: usize,
    weight: f64,
    out: &mut DMatrix<C64>,
) -> Result<()> {
    if sample.n >= n_cut && params.beyond_cutoff == BeyondCutoff::Discard {
        return Err(Error::IndexOutOfRange {
            index: sample.n,
            cutoff: n_cut,
        });
    }
    let scale = weight * PI * params.area() * lambda(sample.n, params.r)?;
    if params.r == 0.0 {
        // T_0(α) = (2/π) D(2α) Π
        let d = displacement_matrix(sample.alpha * 2.0, n_cut, n_cut);
        let c = scale * 2.0 / PI;
        for k in 0..n_cut {
            let sk = if k % 2 == 0 { c } else { -c };
            for j in k..n_cut {
                let v = d[(j, k)] * sk;
                out[(j, k)] += v;
                if j != k {
                    out[(k, j)] += v.conj();
                }
            }
        }
    } else {
        let t = t_operator(sample.alpha, -params.r, n_cut)?;
        *out += t.matrix() * C64::new(scale, 0.0);
    }
    Ok(())
}

pub fn pnr_snapshot(sample: &PnrSample, params: &TParams, n_cut: usize) -> Result<FockOperator> {
    let mut m = DMatrix::zeros(n_cut, n_cut);
    add_pnr_snapshot(sample, params, n_cut, 1.0, &mut m)?;
    Ok(FockOperator::from_hermitian_unchecked(m))
}

pub fn extend_pnr_shadow(
    shadow: &mut Shadow,
    samples: &[PnrSample],
    discarded: u64,
    params: &TParams,
) -> Result<()> {
    let n = shadow.dim();
    for s in samples {
        add_pnr_snapshot(s, params, n, 1.0, shadow.sum_mut())?;
        shadow.bump(1);
    }
    shadow.add_zeros(discarded);
    Ok(())
}

pub fn pnr_shadow(draw: &PnrDraw, params: &TParams, n: usize) -> Result<Shadow> {
    if draw.total() == 0 {
        return Err(Error::EmptySamples);
    }
    let mut shadow = Shadow::new(n);
    extend_pnr_shadow(&mut shadow, &draw.samples, draw.discarded, params)?;
    Ok(shadow)
}

/// Husimi-Q samples on the disk |α| ≤ alpha_max by rejection against the
/// uniform proposal, with bound ⟨α|ρ|α⟩ ≤ λ_max(ρ).
pub fn sample_heterodyne<R: Rng + ?Sized>(
    rho: &FockOperator,
    alpha_max: f64,
    rng: &mut R,
    count: usize,
) -> Result<Vec<C64>> {
    rho.require_hermitian()?;
    if count == 0 {
        return Err(invalid("sample count must be positive"));
    }
    if !(alpha_max > 0.0 && alpha_max.is_finite()) {
        return Err(invalid("alpha_max must be positive"));
    }
    let dim = rho.dim();
    let bound = rho.eigenvalues()?.last().copied().unwrap_or(0.0);
    if !(bound > 0.0) {
        return Err(Error::Degenerate("state has no positive eigenvalue".into()));
    }
    let mut out = Vec::with_capacity(count);
    let mut proposals: u64 = 0;
    let mut coh = vec![C64::new(0.0, 0.0); dim];
    while out.len() < count {
        proposals += 1;
        let alpha = uniform_disk(alpha_max, rng);
        coherent_amplitudes(alpha, &mut coh);
        let mut q = C64::new(0.0, 0.0);
        for j in 0..dim {
            let mut row = C64::new(0.0, 0.0);
            for k in 0..dim {
                row += rho.get(j, k) * coh[k];
            }
            q += coh[j].conj() * row;
        }
        if rng.gen::<f64>() * bound < q.re {
            out.push(alpha);
        }
        if proposals >= 100_000 && (out.len() as f64) < 1e-4 * proposals as f64 {
            return Err(Error::LowAcceptance(out.len() as f64 / proposals as f64));
        }
    }
    Ok(out)
}

/// ⟨j|α⟩ = e^{−|α|²/2} α^j/√j!.
fn coherent_amplitudes(alpha: C64, out: &mut [C64]) {
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for (j, o) in out.iter_mut().enumerate() {
        if j > 0 {
            c *= alpha / (j as f64).sqrt();
        }
        *o = c;
    }
}
