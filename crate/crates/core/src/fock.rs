//! Dense operators on a truncated Fock space.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::displacement_matrix;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

/// Square complex matrix on Fock levels 0..dim.
///
/// The `hermitian` flag is only set by constructors that guarantee it.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    mat: DMatrix<C64>,
    hermitian: bool,
}

impl FockOperator {
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() == 0 {
            return Err(invalid("operator dimension must be positive"));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            mat,
            hermitian: false,
        })
    }

    /// Accepts `mat` if it is Hermitian to [`HERMITIAN_TOL`] and symmetrizes
    /// away the residual.
    pub fn hermitian(mat: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::new(mat)?;
        let dev = op.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        op.mat = (&op.mat + op.mat.adjoint()) * C64::new(0.5, 0.0);
        op.hermitian = true;
        Ok(op)
    }

    /// Trusted constructor for matrices Hermitian by construction.
    pub(crate) fn from_hermitian_unchecked(mat: DMatrix<C64>) -> Self {
        Self {
            mat,
            hermitian: true,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_hermitian_unchecked(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_hermitian_unchecked(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = DMatrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self::from_hermitian_unchecked(m)
    }

    /// |ψ⟩⟨ψ| for an amplitude vector.
    pub fn pure(amplitudes: &[C64]) -> Self {
        let n = amplitudes.len();
        let m = DMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj());
        Self::from_hermitian_unchecked(m)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.mat[(m, n)]
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            return Ok(());
        }
        let dev = self.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            Err(Error::NotHermitian(dev))
        } else {
            Ok(())
        }
    }

    /// Eigenvalues in ascending order. Errors on non-Hermitian input.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        let mut ev: Vec<f64> = self.mat.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn is_psd(&self) -> bool {
        matches!(self.min_eigenvalue(), Ok(v) if v >= -PSD_TOL)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: &self.mat * C64::new(s, 0.0),
            hermitian: self.hermitian,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self {
            mat: &self.mat - &other.mat,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// Largest singular value.
    pub fn infinity_norm(&self) -> f64 {
        infinity_norm(self)
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        trace_norm(self)
    }

    /// P_N op P_N as an N×N matrix, not renormalized.
    pub fn project(&self, n: usize) -> Result<Self> {
        project(self, n)
    }

    /// Eigenvalue clipping onto the PSD cone. Not applied by default
    /// anywhere in the library; estimators are reported raw.
    pub fn clip_to_psd(&self) -> Result<Self> {
        self.require_hermitian()?;
        let eig = self.mat.clone().symmetric_eigen();
        let vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0), 0.0));
        let v = &eig.eigenvectors;
        let m = v * DMatrix::from_diagonal(&vals) * v.adjoint();
        Ok(Self::from_hermitian_unchecked(m))
    }

    pub fn to_json(&self) -> DensityMatrixFile {
        let n = self.dim();
        DensityMatrixFile {
            dim: n,
            re: (0..n).map(|i| (0..n).map(|j| self.mat[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| self.mat[(i, j)].im).collect()).collect(),
        }
    }

    pub fn from_json(file: &DensityMatrixFile) -> Result<Self> {
        let n = file.dim;
        if file.re.len() != n || file.im.len() != n {
            return Err(Error::DimensionMismatch(format!("expected {n} rows")));
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            if file.re[i].len() != n || file.im[i].len() != n {
                return Err(Error::DimensionMismatch(format!("row {i} must have {n} entries")));
            }
            for j in 0..n {
                m[(i, j)] = C64::new(file.re[i][j], file.im[i][j]);
            }
        }
        let op = Self::new(m)?;
        if op.hermiticity_deviation() <= HERMITIAN_TOL {
            Self::hermitian(op.mat)
        } else {
            Ok(op)
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, s).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: DensityMatrixFile = serde_json::from_str(&s)?;
        Self::from_json(&file)
    }
}

fn same_dim(a: &FockOperator, b: &FockOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// On-disk density matrix: `{"dim": N, "re": [[..]], "im": [[..]]}`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityMatrixFile {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

pub fn project(op: &FockOperator, n: usize) -> Result<FockOperator> {
    if n == 0 {
        return Err(invalid("projection cutoff must be positive"));
    }
    if n > op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot project dimension {} onto {n} levels",
            op.dim()
        )));
    }
    Ok(FockOperator {
        mat: op.mat.view((0, 0), (n, n)).into_owned(),
        hermitian: op.hermitian,
    })
}

pub fn infinity_norm(op: &FockOperator) -> f64 {
    if op.hermitian {
        op.mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0, |a: f64, v| a.max(v.abs()))
    } else {
        op.mat.clone().singular_values().max()
    }
}

pub fn trace_norm(op: &FockOperator) -> f64 {
    if op.hermitian {
        op.mat.clone().symmetric_eigenvalues().iter().map(|v| v.abs()).sum()
    } else {
        op.mat.clone().singular_values().sum()
    }
}

/// Kronecker product; `a` is the more significant mode.
pub fn tensor(a: &FockOperator, b: &FockOperator) -> FockOperator {
    FockOperator {
        mat: a.mat.kronecker(&b.mat),
        hermitian: a.hermitian && b.hermitian,
    }
}

/// Traces out every mode not in `keep`. Modes are ordered most significant
/// first, matching [`tensor`].
pub fn partial_trace(op: &FockOperator, keep: &[usize], dims: &[usize]) -> Result<FockOperator> {
    let total: usize = dims.iter().product();
    if total != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "mode dims multiply to {total}, operator has dimension {}",
            op.dim()
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(invalid("keep must be strictly increasing mode indices in range"));
    }
    let m = dims.len();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..m).filter(|i| !keep.contains(i)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let kd: usize = kept_dims.iter().product();
    let td: usize = traced_dims.iter().product();

    let mut strides = vec![1usize; m];
    for i in (0..m.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let expand = |sel: &[usize], sel_dims: &[usize], mut idx: usize| -> usize {
        let mut flat = 0;
        for k in (0..sel.len()).rev() {
            flat += (idx % sel_dims[k]) * strides[sel[k]];
            idx /= sel_dims[k];
        }
        flat
    };
    let kept_off: Vec<usize> = (0..kd).map(|i| expand(keep, &kept_dims, i)).collect();
    let traced_off: Vec<usize> = (0..td).map(|i| expand(&traced, &traced_dims, i)).collect();

    let mut out = DMatrix::<C64>::zeros(kd, kd);
    for (i, &ki) in kept_off.iter().enumerate() {
        for (j, &kj) in kept_off.iter().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for &t in &traced_off {
                s += op.mat[(ki + t, kj + t)];
            }
            out[(i, j)] = s;
        }
    }
    Ok(FockOperator {
        mat: out,
        hermitian: op.hermitian,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateKind {
    Vacuum,
    Fock { n: usize },
    Coherent { re: f64, im: f64 },
    Cat { re: f64, im: f64, parity: Parity },
    RandomPure { seed: u64 },
    Custom { matrix: DensityMatrixFile },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateSpec {
    #[serde(flatten)]
    pub kind: StateKind,
    pub cutoff: usize,
}

impl StateSpec {
    pub fn new(kind: StateKind, cutoff: usize) -> Self {
        Self { kind, cutoff }
    }
    pub fn vacuum(cutoff: usize) -> Self {
        Self::new(StateKind::Vacuum, cutoff)
    }
    pub fn fock(n: usize, cutoff: usize) -> Self {
        Self::new(StateKind::Fock { n }, cutoff)
    }
    pub fn coherent(alpha: C64, cutoff: usize) -> Self {
        Self::new(StateKind::Coherent { re: alpha.re, im: alpha.im }, cutoff)
    }
    pub fn cat(alpha: C64, parity: Parity, cutoff: usize) -> Self {
        Self::new(
            StateKind::Cat {
                re: alpha.re,
                im: alpha.im,
                parity,
            },
            cutoff,
        )
    }
    pub fn random_pure(seed: u64, cutoff: usize) -> Self {
        Self::new(StateKind::RandomPure { seed }, cutoff)
    }
}

/// ln of |α^n/√n!| times the phase, for n < cutoff.
fn poisson_amplitudes(alpha: C64, cutoff: usize, ln_norm: f64) -> Vec<C64> {
    let ln_abs = alpha.norm().ln();
    let ph = if alpha.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        alpha / alpha.norm()
    };
    let mut out = Vec::with_capacity(cutoff);
    let mut ln_fact = 0.0;
    let mut phase = C64::new(1.0, 0.0);
    for n in 0..cutoff {
        if n > 0 {
            ln_fact += (n as f64).ln();
            phase *= ph;
        }
        let ln_mag = if n == 0 { 0.0 } else { n as f64 * ln_abs - 0.5 * ln_fact };
        out.push(phase * (ln_mag - ln_norm).exp());
    }
    out
}

/// ⟨n|α⟩ for n < cutoff.
pub fn coherent_vector(alpha: C64, cutoff: usize) -> Vec<C64> {
    poisson_amplitudes(alpha, cutoff, 0.5 * alpha.norm_sqr())
}

/// ln cosh(y) and ln sinh(y) for y ≥ 0 without overflow.
fn ln_cosh(y: f64) -> f64 {
    y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2
}
fn ln_sinh(y: f64) -> f64 {
    y + (-(-2.0 * y).exp()).ln_1p() - std::f64::consts::LN_2
}

pub fn make_state(spec: &StateSpec) -> Result<FockOperator> {
    let n = spec.cutoff;
    if n == 0 {
        return Err(invalid("cutoff must be at least 1"));
    }
    let zero = C64::new(0.0, 0.0);
    match &spec.kind {
        StateKind::Vacuum => Ok(FockOperator::pure(&basis(0, n))),
        StateKind::Fock { n: k } => {
            if *k >= n {
                return Err(Error::IndexOutOfRange { index: *k, cutoff: n });
            }
            Ok(FockOperator::pure(&basis(*k, n)))
        }
        StateKind::Coherent { re, im } => {
            let a = C64::new(*re, *im);
            check_finite(a)?;
            Ok(FockOperator::pure(&poisson_amplitudes(a, n, 0.5 * a.norm_sqr())))
        }
        StateKind::Cat { re, im, parity } => {
            let a = C64::new(*re, *im);
            check_finite(a)?;
            let y = a.norm_sqr();
            let (start, ln_norm) = match parity {
                Parity::Even => (0, 0.5 * ln_cosh(y)),
                Parity::Odd => {
                    if y == 0.0 {
                        return Err(invalid("odd cat state needs nonzero amplitude"));
                    }
                    (1, 0.5 * ln_sinh(y))
                }
            };
            let mut c = poisson_amplitudes(a, n, ln_norm);
            for (k, v) in c.iter_mut().enumerate() {
                if k % 2 != start {
                    *v = zero;
                }
            }
            Ok(FockOperator::pure(&c))
        }
        StateKind::RandomPure { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut v: Vec<C64> = (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm);
            Ok(FockOperator::pure(&v))
        }
        StateKind::Custom { matrix } => {
            let op = FockOperator::from_json(matrix)?;
            if op.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "custom matrix has dimension {}, cutoff is {n}",
                    op.dim()
                )));
            }
            validate_density(&op)?;
            Ok(op)
        }
    }
}

/// Hermitian, PSD to [`PSD_TOL`], trace in (0, 1].
pub fn validate_density(op: &FockOperator) -> Result<()> {
    op.require_hermitian()?;
    let min = op.min_eigenvalue()?;
    if min < -PSD_TOL {
        return Err(Error::NotPositive(min));
    }
    let tr = op.trace().re;
    if !(tr > 0.0 && tr <= 1.0 + 1e-10) {
        return Err(invalid(format!("trace {tr} outside (0, 1]")));
    }
    Ok(())
}

fn check_finite(a: C64) -> Result<()> {
    if a.re.is_finite() && a.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn basis(k: usize, n: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[k] = C64::new(1.0, 0.0);
    v
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WignerGridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_points: usize,
    pub p_points: usize,
}

impl WignerGridSpec {
    /// Square grid [-half, half]² with `points` per axis.
    pub fn square(half: f64, points: usize) -> Self {
        Self {
            q_min: -half,
            q_max: half,
            p_min: -half,
            p_max: half,
            q_points: points,
            p_points: points,
        }
    }

    /// Grid that covers the classical region of a cutoff-`dim` operator.
    pub fn for_dim(dim: usize) -> Self {
        Self::square((2.0 * dim as f64).sqrt() + 4.0, 81)
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }
}

/// Wigner function in (q, p) units where the vacuum variance is 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub q_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// `values[i][j] = W(q_i, p_j)`.
    pub values: Vec<Vec<f64>>,
    /// Mass of the exact W outside the grid is at most this (from the
    /// Gaussian envelope of the highest Fock level).
    pub truncation_tolerance: f64,
}

impl WignerGrid {
    pub fn cell_area(&self) -> f64 {
        let dq = spacing(&self.q_values);
        let dp = spacing(&self.p_values);
        dq * dp
    }

    /// Cell-weighted (trapezoid) sum, approximates the trace.
    pub fn integrate(&self) -> f64 {
        let wq = trapezoid_weights(self.q_values.len());
        let wp = trapezoid_weights(self.p_values.len());
        let mut s = 0.0;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                s += wq[i] * wp[j] * v;
            }
        }
        s * self.cell_area()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["q", "p", "w"])?;
        for (i, q) in self.q_values.iter().enumerate() {
            for (j, p) in self.p_values.iter().enumerate() {
                w.write_record(&[q.to_string(), p.to_string(), self.values[i][j].to_string()])?;
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn spacing(v: &[f64]) -> f64 {
    if v.len() < 2 {
        1.0
    } else {
        v[1] - v[0]
    }
}

fn trapezoid_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    if n > 1 {
        w[0] = 0.5;
        w[n - 1] = 0.5;
    }
    w
}

/// W(q,p) = (1/π) Tr[op D(2α) Π], α = (q+ip)/√2, the displaced parity form.
pub fn wigner_at(op: &FockOperator, q: f64, p: f64) -> f64 {
    let n = op.dim();
    let alpha2 = C64::new(q, p) * std::f64::consts::SQRT_2;
    let d = displacement_matrix(alpha2, n, n);
    // Tr[ρ D Π] = Σ_{k,j} ρ_kj D_jk (−1)^k
    let mut s = C64::new(0.0, 0.0);
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut col = C64::new(0.0, 0.0);
        for j in 0..n {
            col += op.mat[(k, j)] * d[(j, k)];
        }
        s += col * sign;
    }
    s.re / std::f64::consts::PI
}

pub fn wigner(op: &FockOperator, spec: &WignerGridSpec) -> Result<WignerGrid> {
    op.require_hermitian()?;
    if spec.q_points == 0 || spec.p_points == 0 {
        return Err(invalid("grid needs at least one point per axis"));
    }
    let q_values = WignerGridSpec::axis(spec.q_min, spec.q_max, spec.q_points);
    let p_values = WignerGridSpec::axis(spec.p_min, spec.p_max, spec.p_points);
    let values = q_values
        .iter()
        .map(|&q| p_values.iter().map(|&p| wigner_at(op, q, p)).collect())
        .collect();
    // Level n is confined to radius √(2n+1) up to a Gaussian tail; the
    // coherences are bounded through the diagonal by Cauchy-Schwarz.
    let edge = spec
        .q_min
        .abs()
        .min(spec.q_max.abs())
        .min(spec.p_min.abs())
        .min(spec.p_max.abs());
    let root_sum: f64 = (0..op.dim())
        .map(|n| {
            let excess = (edge - (2.0 * n as f64 + 1.0).sqrt()).max(0.0);
            op.get(n, n).re.max(0.0).sqrt() * (-0.5 * excess * excess).exp()
        })
        .sum();
    let truncation_tolerance = (root_sum * root_sum).min(1.0);
    Ok(WignerGrid {
        q_values,
        p_values,
        values,
        truncation_tolerance,
    })
}
