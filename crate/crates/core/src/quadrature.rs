//! Quadrature wavefunctions, pattern functions and the homodyne outcome
//! density.
//!
//! Convention: X_θ = (a e^{−iθ} + a† e^{iθ})/√2, so ⟨x_θ|m⟩ = e^{−imθ}ψ_m(x)
//! and the outcome density is p(x,θ) = Σ ρ_mn e^{−i(m−n)θ} ψ_m(x)ψ_n(x).
//! Snapshots carry the opposite phase, F_mn = e^{i(m−n)θ} f_mn(x).
//!
//! Pattern functions are evaluated from
//!
//! f_mn(x) = ∫_0^∞ dk k g_mn(k) c_d(kx),  d = |m−n|,
//!
//! where g_mn(k) = |β|^d √(s!/l!) e^{−|β|²/2} L_s^{(d)}(|β|²), |β| = k/√2,
//! s = min(m,n), l = max(m,n), and c_d is (−1)^{d/2} cos for even d and
//! (−1)^{(d−1)/2} sin for odd d. The integrand is smooth and Gaussian
//! damped, so composite Gauss-Legendre converges to machine precision.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::special::{
    gauss_legendre, hermite_functions, hermite_functions_into, laguerre_diagonal, ln_factorial,
};

pub const DEFAULT_GRID_POINTS: usize = 4096;
/// Negative density values above this are treated as round-off.
pub const CLIP_TOL: f64 = 1e-9;
/// Largest density tolerated at the grid edges.
pub const EDGE_TOL: f64 = 1e-10;

/// Default grid half-width for a cutoff: turning point of level N plus margin.
pub fn default_x_max(cutoff: usize) -> f64 {
    (2.0 * cutoff as f64).sqrt() + 5.0
}

/// Index of the unordered pair {m, n} in triangular storage.
#[inline]
pub fn pair_index(m: usize, n: usize) -> usize {
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    hi * (hi + 1) / 2 + lo
}

pub fn pair_count(cutoff: usize) -> usize {
    cutoff * (cutoff + 1) / 2
}

/// ψ_m(x) by the stable three-term recurrence.
pub fn psi(m: usize, x: f64) -> f64 {
    hermite_functions(m + 1, x)[m]
}

struct KRule {
    k: Vec<f64>,
    /// Gauss weight times the k Jacobian.
    wk: Vec<f64>,
}

fn k_rule(cutoff: usize, x_reach: f64) -> KRule {
    let root_n = (cutoff.max(1) as f64).sqrt();
    let k_max = SQRT_2 * (2.0 * root_n + 8.0);
    let panel = 6.0 / (x_reach.abs() + 2.0 * root_n + 1.0);
    let panels = (k_max / panel).ceil() as usize;
    let h = k_max / panels as f64;
    let (t, w) = gauss_legendre(16);
    let mut k = Vec::with_capacity(panels * 16);
    let mut wk = Vec::with_capacity(panels * 16);
    for p in 0..panels {
        let a = p as f64 * h;
        for (ti, wi) in t.iter().zip(&w) {
            let kv = a + 0.5 * h * (ti + 1.0);
            k.push(kv);
            wk.push(0.5 * h * wi * kv);
        }
    }
    KRule { k, wk }
}

/// Signed Laguerre factors g_mn(k_q) (−1)^{⌊d/2⌋}, laid out [q][pair].
fn g_table(cutoff: usize, rule: &KRule) -> Vec<f64> {
    let np = pair_count(cutoff);
    let mut g = vec![0.0; rule.k.len() * np];
    let mut buf = vec![0.0; cutoff];
    let ln_fact: Vec<f64> = (0..cutoff).map(ln_factorial).collect();
    for (q, &k) in rule.k.iter().enumerate() {
        let beta = k / SQRT_2;
        let x = beta * beta;
        let row = &mut g[q * np..(q + 1) * np];
        for d in 0..cutoff {
            let len = cutoff - d;
            let ln_u0 = if d == 0 {
                -0.5 * x
            } else if beta == 0.0 {
                f64::NEG_INFINITY
            } else {
                d as f64 * beta.ln() - 0.5 * x - 0.5 * ln_fact[d]
            };
            laguerre_diagonal(d, x, ln_u0, &mut buf[..len]);
            let sign = if (d / 2) % 2 == 0 { 1.0 } else { -1.0 };
            for s in 0..len {
                row[pair_index(s, s + d)] = sign * buf[s];
            }
        }
    }
    g
}

/// f_mn(x) for all pairs with n < cutoff by direct quadrature. Slow; used
/// outside the tabulated grid and as an oracle.
pub fn pattern_functions_direct(cutoff: usize, x: f64) -> Vec<f64> {
    let rule = k_rule(cutoff, x);
    let g = g_table(cutoff, &rule);
    let np = pair_count(cutoff);
    let mut out = vec![0.0; np];
    for (q, (&k, &wk)) in rule.k.iter().zip(&rule.wk).enumerate() {
        let (s, c) = (k * x).sin_cos();
        let row = &g[q * np..(q + 1) * np];
        for n in 0..cutoff {
            for m in 0..=n {
                let p = pair_index(m, n);
                let trig = if (n - m) % 2 == 0 { c } else { s };
                out[p] += wk * row[p] * trig;
            }
        }
    }
    out
}

/// Single pattern function value by direct quadrature.
pub fn pattern_function(m: usize, n: usize, x: f64) -> f64 {
    pattern_functions_direct(m.max(n) + 1, x)[pair_index(m, n)]
}

/// Cached ψ_m and f_mn tables on a uniform grid.
#[derive(Clone, Debug)]
pub struct PatternEvaluator {
    cutoff: usize,
    x_max: f64,
    grid: Vec<f64>,
    dx: f64,
    /// [i * cutoff + m]
    psi: Vec<f64>,
    /// [i * pairs + pair_index(m, n)]
    pattern: Vec<f64>,
}

impl PatternEvaluator {
    pub fn new(cutoff: usize) -> Result<Self> {
        Self::with_grid(cutoff, default_x_max(cutoff), DEFAULT_GRID_POINTS)
    }

    pub fn with_grid(cutoff: usize, x_max: f64, grid_points: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidArgument("cutoff must be positive".into()));
        }
        if !(x_max > 0.0 && x_max.is_finite()) || grid_points < 2 {
            return Err(Error::InvalidArgument("grid needs x_max > 0 and at least 2 points".into()));
        }
        let grid = uniform_grid(x_max, grid_points);
        let dx = grid[1] - grid[0];
        let mut psi = vec![0.0; grid_points * cutoff];
        for (i, &x) in grid.iter().enumerate() {
            hermite_functions_into(x, &mut psi[i * cutoff..(i + 1) * cutoff]);
        }
        let pattern = tabulate_patterns(cutoff, &grid, x_max);
        Ok(Self {
            cutoff,
            x_max,
            grid,
            dx,
            psi,
            pattern,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn grid_points(&self) -> usize {
        self.grid.len()
    }
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn psi_node(&self, m: usize, i: usize) -> f64 {
        self.psi[i * self.cutoff + m]
    }

    /// All pair values at grid node i.
    pub fn pattern_node(&self, i: usize) -> &[f64] {
        let np = pair_count(self.cutoff);
        &self.pattern[i * np..(i + 1) * np]
    }

    fn check(&self, m: usize) -> Result<()> {
        if m >= self.cutoff {
            Err(Error::IndexOutOfRange {
                index: m,
                cutoff: self.cutoff,
            })
        } else {
            Ok(())
        }
    }

    /// f_mn(x), linearly interpolated inside the grid and evaluated directly
    /// outside it.
    pub fn pattern(&self, m: usize, n: usize, x: f64) -> Result<f64> {
        self.check(m)?;
        self.check(n)?;
        let mut buf = vec![0.0; pair_count(self.cutoff)];
        self.patterns_into(x, self.cutoff, &mut buf)?;
        Ok(buf[pair_index(m, n)])
    }

    /// Fills `out[pair_index(m, n)]` for m ≤ n < n_cut.
    pub fn patterns_into(&self, x: f64, n_cut: usize, out: &mut [f64]) -> Result<()> {
        if n_cut > self.cutoff {
            return Err(Error::IndexOutOfRange {
                index: n_cut - 1,
                cutoff: self.cutoff,
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite);
        }
        let np = pair_count(n_cut);
        let out = &mut out[..np];
        let pos = (x + self.x_max) / self.dx;
        let last = self.grid.len() - 1;
        if pos < 0.0 || pos > last as f64 {
            let direct = pattern_functions_direct(n_cut, x);
            out.copy_from_slice(&direct);
            return Ok(());
        }
        let i = (pos.floor() as usize).min(last - 1);
        let t = pos - i as f64;
        let a = &self.pattern_node(i)[..np];
        let b = &self.pattern_node(i + 1)[..np];
        for ((o, a), b) in out.iter_mut().zip(a).zip(b) {
            *o = a + t * (b - a);
        }
        Ok(())
    }

    /// Dumps the tables as CSV "m,n,x,f" (m ≤ n).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["m", "n", "x", "f"])?;
        for n in 0..self.cutoff {
            for m in 0..=n {
                let p = pair_index(m, n);
                for (i, x) in self.grid.iter().enumerate() {
                    w.write_record(&[
                        m.to_string(),
                        n.to_string(),
                        x.to_string(),
                        self.pattern_node(i)[p].to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn uniform_grid(x_max: f64, points: usize) -> Vec<f64> {
    let h = 2.0 * x_max / (points - 1) as f64;
    (0..points).map(|i| -x_max + i as f64 * h).collect()
}

/// Pattern tables at every grid node, point-major. Uses f(−x) = (−1)^d f(x)
/// on the symmetric grid and evaluates the k-integral as a matrix product.
fn tabulate_patterns(cutoff: usize, grid: &[f64], x_max: f64) -> Vec<f64> {
    let np = pair_count(cutoff);
    let points = grid.len();
    let rule = k_rule(cutoff, x_max);
    let g = g_table(cutoff, &rule);
    let nk = rule.k.len();

    let mut even = Vec::new();
    let mut odd = Vec::new();
    for n in 0..cutoff {
        for m in 0..=n {
            if (n - m) % 2 == 0 {
                even.push(pair_index(m, n));
            } else {
                odd.push(pair_index(m, n));
            }
        }
    }
    let weights = |pairs: &[usize]| {
        DMatrix::from_fn(pairs.len(), nk, |r, q| rule.wk[q] * g[q * np + pairs[r]])
    };
    let w_even = weights(&even);
    let w_odd = weights(&odd);

    let mut table = vec![0.0; points * np];
    let half: Vec<usize> = (points / 2..points).collect();
    for chunk in half.chunks(256) {
        let cos = DMatrix::from_fn(nk, chunk.len(), |q, c| (rule.k[q] * grid[chunk[c]]).cos());
        let sin = DMatrix::from_fn(nk, chunk.len(), |q, c| (rule.k[q] * grid[chunk[c]]).sin());
        let fe = &w_even * cos;
        let fo = &w_odd * sin;
        for (c, &i) in chunk.iter().enumerate() {
            let mirror = points - 1 - i;
            for (r, &p) in even.iter().enumerate() {
                let v = fe[(r, c)];
                table[i * np + p] = v;
                table[mirror * np + p] = v;
            }
            for (r, &p) in odd.iter().enumerate() {
                let v = fo[(r, c)];
                table[i * np + p] = v;
                if mirror != i {
                    table[mirror * np + p] = -v;
                } else {
                    table[i * np + p] = 0.0;
                }
            }
        }
    }
    table
}

/// Homodyne outcome density at a fixed phase, with its cumulative table.
#[derive(Clone, Debug)]
pub struct QuadratureDensity {
    pub theta: f64,
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    /// Trapezoid cumulative integral, `cumulative[0] = 0`.
    pub cumulative: Vec<f64>,
}

impl QuadratureDensity {
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    fn from_values(theta: f64, x_min: f64, dx: f64, mut values: Vec<f64>) -> Result<Self> {
        let mut worst: f64 = 0.0;
        for v in values.iter_mut() {
            if *v < 0.0 {
                worst = worst.min(*v);
                *v = 0.0;
            }
        }
        if worst < -CLIP_TOL {
            return Err(Error::NegativeDensity(worst));
        }
        let edge = values[0].max(*values.last().unwrap());
        if edge > EDGE_TOL {
            return Err(Error::GridTooNarrow(edge));
        }
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dx;
            cumulative.push(acc);
        }
        Ok(Self {
            theta,
            x_min,
            dx,
            values,
            cumulative,
        })
    }
}

/// Precomputed c_d(x) = Σ_{m−n=d} ρ_mn ψ_m(x)ψ_n(x) on a grid, so that
/// p(x,θ) = c_0(x) + 2 Re Σ_{d>0} c_d(x) e^{−idθ} costs O(dim) per node.
#[derive(Clone, Debug)]
pub struct DensityTables {
    dim: usize,
    x_min: f64,
    dx: f64,
    points: usize,
    /// [i * dim + d]
    coeff: Vec<C64>,
    /// E(x) = |c_0| + 2Σ|c_d| ≥ p(x,θ) for every θ, with its trapezoid CDF.
    envelope: Vec<f64>,
    envelope_cum: Vec<f64>,
    phase_invariant: Option<QuadratureDensity>,
}

impl DensityTables {
    /// Default grid for the state's own dimension.
    pub fn new(rho: &FockOperator) -> Result<Self> {
        Self::with_grid(rho, default_x_max(rho.dim()), DEFAULT_GRID_POINTS)
    }

    pub fn with_grid(rho: &FockOperator, x_max: f64, points: usize) -> Result<Self> {
        rho.require_hermitian()?;
        if points < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
        }
        let dim = rho.dim();
        let grid = uniform_grid(x_max, points);
        let mut coeff = vec![C64::new(0.0, 0.0); points * dim];
        let mut psi = vec![0.0; dim];
        let mut offdiag = false;
        for d in 1..dim {
            for n in 0..dim - d {
                if rho.get(n + d, n).norm() != 0.0 {
                    offdiag = true;
                }
            }
        }
        for (i, &x) in grid.iter().enumerate() {
            hermite_functions_into(x, &mut psi);
            let row = &mut coeff[i * dim..(i + 1) * dim];
            for d in 0..dim {
                let mut s = C64::new(0.0, 0.0);
                for n in 0..dim - d {
                    s += rho.get(n + d, n) * (psi[n + d] * psi[n]);
                }
                row[d] = s;
            }
        }
        let dx = grid[1] - grid[0];
        let envelope: Vec<f64> = coeff
            .chunks(dim)
            .map(|row| row[0].re.abs() + 2.0 * row[1..].iter().map(|c| c.norm()).sum::<f64>())
            .collect();
        let mut envelope_cum = vec![0.0];
        let mut acc = 0.0;
        for w in envelope.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dx;
            envelope_cum.push(acc);
        }
        let mut t = Self {
            dim,
            x_min: -x_max,
            dx,
            points,
            coeff,
            envelope,
            envelope_cum,
            phase_invariant: None,
        };
        if !offdiag {
            t.phase_invariant = Some(t.compute(0.0)?);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn compute(&self, theta: f64) -> Result<QuadratureDensity> {
        let phases = self.phases(theta);
        let values = (0..self.points).map(|i| self.node_value(i, &phases)).collect();
        QuadratureDensity::from_values(theta, self.x_min, self.dx, values)
    }

    /// p(x,θ) on the grid.
    pub fn density(&self, theta: f64) -> Result<QuadratureDensity> {
        match &self.phase_invariant {
            Some(d) => {
                let mut d = d.clone();
                d.theta = theta;
                Ok(d)
            }
            None => self.compute(theta),
        }
    }

    fn phases(&self, theta: f64) -> Vec<C64> {
        let step = C64::from_polar(1.0, -theta);
        let mut out = Vec::with_capacity(self.dim);
        let mut p = C64::new(1.0, 0.0);
        for _ in 0..self.dim {
            out.push(p);
            p *= step;
        }
        out
    }

    fn node_value(&self, i: usize, phases: &[C64]) -> f64 {
        let row = &self.coeff[i * self.dim..(i + 1) * self.dim];
        let mut s = 0.0;
        for d in 1..self.dim {
            s += row[d].re * phases[d].re - row[d].im * phases[d].im;
        }
        row[0].re + 2.0 * s
    }

    /// Draws one x at phase θ.
    ///
    /// Phase-invariant states reuse one cached inverse-CDF table. Otherwise
    /// x is drawn exactly from the piecewise-linear interpolant of p(·,θ)
    /// by rejection against the θ-independent envelope, which costs O(dim)
    /// per proposal instead of O(dim × grid) per draw.
    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<f64> {
        if let Some(d) = &self.phase_invariant {
            return sample_quadrature(d, rng);
        }
        let total = *self.envelope_cum.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::Degenerate("quadrature density integrates to zero".into()));
        }
        let phases = self.phases(theta);
        for _ in 0..1_000_000 {
            let u = rng.gen::<f64>() * total;
            let cum = &self.envelope_cum;
            let i = cum.partition_point(|&c| c <= u).clamp(1, cum.len() - 1) - 1;
            let (e0, e1) = (self.envelope[i], self.envelope[i + 1]);
            let mass = 0.5 * (e0 + e1);
            let v = if cum[i + 1] > cum[i] { (u - cum[i]) / (cum[i + 1] - cum[i]) } else { 0.5 };
            // Inverse CDF of the linear density on the cell.
            let root = (e0 * e0 + (e1 - e0) * v * 2.0 * mass).max(0.0).sqrt();
            let t = if e0 + root > 0.0 { (2.0 * v * mass / (e0 + root)).clamp(0.0, 1.0) } else { v };
            let env = e0 + t * (e1 - e0);
            let p0 = self.node_value(i, &phases);
            let p1 = self.node_value(i + 1, &phases);
            let p = p0 + t * (p1 - p0);
            if rng.gen::<f64>() * env < p {
                return Ok(self.x_min + (i as f64 + t) * self.dx);
            }
        }
        Err(Error::Degenerate("rejection sampler failed to accept".into()))
    }
}

/// ⟨x_θ|ρ|x_θ⟩ on the default grid for ρ's dimension.
pub fn quadrature_density(rho: &FockOperator, theta: f64) -> Result<QuadratureDensity> {
    if !(0.0..PI).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta {theta} outside [0, π)")));
    }
    DensityTables::new(rho)?.compute(theta)
}

/// Inverse-CDF draw with linear interpolation inside the located cell.
pub fn sample_quadrature<R: Rng + ?Sized>(density: &QuadratureDensity, rng: &mut R) -> Result<f64> {
    let total = density.total();
    if !(total > 0.0) {
        return Err(Error::Degenerate("quadrature density integrates to zero".into()));
    }
    let u = rng.gen::<f64>() * total;
    let cum = &density.cumulative;
    let i = cum.partition_point(|&c| c <= u).clamp(1, cum.len() - 1) - 1;
    let width = cum[i + 1] - cum[i];
    let t = if width > 0.0 { (u - cum[i]) / width } else { 0.5 };
    Ok(density.x(i) + t * density.dx)
}
