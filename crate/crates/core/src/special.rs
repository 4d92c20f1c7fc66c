//! Special functions: oscillator eigenfunctions, the irregular solutions,
//! displaced Fock overlaps and Gauss-Legendre rules.
//!
//! Everything is evaluated by three-term recurrences. No factorial ratios
//! are ever formed directly.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// π^{-1/4}, the peak of the ground-state wavefunction.
pub const PI_M14: f64 = 0.751_125_544_464_942_5;

const RESCALE_HI: f64 = 1e100;
const RESCALE_LN: f64 = 230.258_509_299_404_57; // ln(1e100)

/// Fills `out[m] = ψ_m(x)` for `m < out.len()`.
///
/// ψ_{m+1} = √(2/(m+1)) x ψ_m − √(m/(m+1)) ψ_{m−1}, forward stable
/// for the regular solution.
pub fn hermite_functions_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI_M14 * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for m in 1..out.len().saturating_sub(1) {
        let mf = m as f64;
        out[m + 1] = (2.0 / (mf + 1.0)).sqrt() * x * out[m] - (mf / (mf + 1.0)).sqrt() * out[m - 1];
    }
}

pub fn hermite_functions(count: usize, x: f64) -> Vec<f64> {
    let mut v = vec![0.0; count];
    hermite_functions_into(x, &mut v);
    v
}

/// ∫_0^x e^{y²} dy by its all-positive power series.
fn erfi_integral(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x; // x^{2k+1}/k!
    let mut sum = x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= x2 / k;
        let add = term / (2.0 * k + 1.0);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Irregular (non-normalizable) solutions φ_n of the oscillator equation,
/// normalized so that ψ_n φ_n' − ψ_n' φ_n = 2.
///
/// Forward recursion is only trustworthy for |x| ≲ 3 at moderate n; the
/// irregular solution is the dominant one there but becomes contaminated
/// once ψ_n enters its own forbidden region. Pattern tables use the
/// Fourier route in [`crate::quadrature`] instead.
pub fn irregular_functions(count: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    let pi14 = 1.0 / PI_M14;
    let g = erfi_integral(x);
    let e_minus = (-0.5 * x * x).exp();
    out[0] = 2.0 * pi14 * e_minus * g;
    if count > 1 {
        out[1] = std::f64::consts::SQRT_2 * pi14 * (2.0 * x * e_minus * g - 1.0 / e_minus);
    }
    for m in 1..count - 1 {
        let mf = m as f64;
        out[m + 1] = (2.0 / (mf + 1.0)).sqrt() * x * out[m] - (mf / (mf + 1.0)).sqrt() * out[m - 1];
    }
    out
}

/// Magnitudes u_n = |⟨n+d|D(α)|n⟩| (up to sign of the Laguerre factor)
/// along one diagonal, for n = 0..out.len().
///
/// u_n = |α|^d e^{-x/2} √(n!/(n+d)!) L_n^{(d)}(x), x = |α|², via the
/// normalized Laguerre recurrence with rescaling.
pub(crate) fn laguerre_diagonal(d: usize, x: f64, ln_u0: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    if ln_u0 == f64::NEG_INFINITY {
        out.fill(0.0);
        return;
    }
    let df = d as f64;
    let mut scale = ln_u0;
    let mut factor = scale.exp();
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = factor;
    for n in 0..out.len() - 1 {
        let nf = n as f64;
        let den = ((nf + 1.0) * (nf + df + 1.0)).sqrt();
        let next = ((2.0 * nf + 1.0 + df - x) * cur - (nf * (nf + df)).sqrt() * prev) / den;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_HI {
            cur /= RESCALE_HI;
            prev /= RESCALE_HI;
            scale += RESCALE_LN;
            factor = scale.exp();
        }
        out[n + 1] = cur * factor;
    }
}

fn unit_phase(alpha: C64) -> C64 {
    let r = alpha.norm();
    if r == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        alpha / r
    }
}

/// ⟨j|D(α)|m⟩ for a single pair of indices, O(min(j,m)).
pub fn displaced_overlap(j: usize, alpha: C64, m: usize) -> C64 {
    let x = alpha.norm_sqr();
    let (d, s) = if j >= m { (j - m, m) } else { (m - j, j) };
    let ln_abs = alpha.norm().ln();
    let ln_fact: f64 = (1..=d).map(|k| (k as f64).ln()).sum();
    let ln_u0 = if d == 0 {
        -0.5 * x
    } else if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        d as f64 * ln_abs - 0.5 * x - 0.5 * ln_fact
    };
    let mut buf = vec![0.0; s + 1];
    laguerre_diagonal(d, x, ln_u0, &mut buf);
    let u = buf[s];
    let ph = unit_phase(alpha).powu(d as u32);
    if j >= m {
        ph * u
    } else if d % 2 == 0 {
        ph.conj() * u
    } else {
        -ph.conj() * u
    }
}

fn diag_ln_u0(d: usize, x: f64, ln_abs: f64, ln_fact_d: f64) -> f64 {
    if d == 0 {
        -0.5 * x
    } else if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        d as f64 * ln_abs - 0.5 * x - 0.5 * ln_fact_d
    }
}

/// Block ⟨j|D(α)|m⟩ for j < rows, m < cols.
pub fn displacement_matrix(alpha: C64, rows: usize, cols: usize) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(rows, cols);
    let x = alpha.norm_sqr();
    let ln_abs = alpha.norm().ln();
    let ph = unit_phase(alpha);
    let mut buf = vec![0.0; rows.max(cols)];

    let mut ln_fact = 0.0;
    let mut phase = C64::new(1.0, 0.0);
    for d in 0..rows {
        if d > 0 {
            ln_fact += (d as f64).ln();
            phase *= ph;
        }
        let len = cols.min(rows - d);
        if len == 0 {
            break;
        }
        laguerre_diagonal(d, x, diag_ln_u0(d, x, ln_abs, ln_fact), &mut buf[..len]);
        for n in 0..len {
            out[(n + d, n)] = phase * buf[n];
        }
    }

    let mut ln_fact = 0.0;
    let mut phase = C64::new(1.0, 0.0);
    for d in 1..cols {
        ln_fact += (d as f64).ln();
        phase *= ph.conj();
        let len = rows.min(cols - d);
        if len == 0 {
            break;
        }
        laguerre_diagonal(d, x, diag_ln_u0(d, x, ln_abs, ln_fact), &mut buf[..len]);
        let p = if d % 2 == 0 { phase } else { -phase };
        for j in 0..len {
            out[(j, j + d)] = p * buf[j];
        }
    }
    out
}

/// Columns D(α)|n⟩ restricted to rows 0..rows, generated lazily in n.
///
/// Column n costs O(rows) once the previous columns exist, which is what
/// photon-count sampling needs when the tail index is not known upfront.
pub struct DisplacedColumns {
    rows: usize,
    x: f64,
    ln_abs: f64,
    ph: C64,
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
    upper_phase: Vec<C64>,
    ln_fact_upper: f64,
}

impl DisplacedColumns {
    pub fn new(alpha: C64, rows: usize) -> Self {
        let x = alpha.norm_sqr();
        let ln_abs = alpha.norm().ln();
        let mut lower = Vec::with_capacity(rows);
        let mut ln_fact = 0.0;
        for d in 0..rows {
            if d > 0 {
                ln_fact += (d as f64).ln();
            }
            let mut v = vec![0.0; rows - d];
            laguerre_diagonal(d, x, diag_ln_u0(d, x, ln_abs, ln_fact), &mut v);
            lower.push(v);
        }
        Self {
            rows,
            x,
            ln_abs,
            ph: unit_phase(alpha),
            lower,
            upper: vec![Vec::new()],
            upper_phase: vec![C64::new(1.0, 0.0)],
            ln_fact_upper: 0.0,
        }
    }

    fn extend_upper(&mut self, dmax: usize) {
        while self.upper.len() <= dmax {
            let d = self.upper.len();
            self.ln_fact_upper += (d as f64).ln();
            let mut v = vec![0.0; self.rows];
            laguerre_diagonal(
                d,
                self.x,
                diag_ln_u0(d, self.x, self.ln_abs, self.ln_fact_upper),
                &mut v,
            );
            self.upper.push(v);
            let p = self.upper_phase[d - 1] * self.ph.conj();
            self.upper_phase.push(p);
        }
    }

    /// Writes ⟨j|D(α)|n⟩ for j < rows into `out`.
    pub fn column_into(&mut self, n: usize, out: &mut [C64]) {
        assert_eq!(out.len(), self.rows);
        self.extend_upper(n);
        let mut lphase = C64::new(1.0, 0.0);
        for (j, o) in out.iter_mut().enumerate() {
            if j >= n {
                let d = j - n;
                if d > 0 {
                    lphase *= self.ph;
                }
                *o = lphase * self.lower[d][n];
            } else {
                let d = n - j;
                let p = self.upper_phase[d];
                let u = self.upper[d][j];
                *o = if d % 2 == 0 { p * u } else { -p * u };
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = z;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// ln(n!) by direct summation; only used for small n.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn expm_displacement(alpha: C64, dim: usize) -> DMatrix<C64> {
        // Taylor series of exp(α a† − α* a) in a large space, then cropped.
        let mut a = DMatrix::<C64>::zeros(dim, dim);
        for n in 1..dim {
            a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        let gen = a.adjoint() * alpha - &a * alpha.conj();
        let mut term = DMatrix::<C64>::identity(dim, dim);
        let mut sum = term.clone();
        for k in 1..200 {
            term = &term * &gen / C64::new(k as f64, 0.0);
            sum += &term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn psi_ground_state_and_parity() {
        let v = hermite_functions(2, 0.0);
        assert_abs_diff_eq!(v[0], PI_M14, epsilon = 1e-15);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn psi_matches_closed_form_second_state() {
        for &x in &[-2.3, -0.4, 0.0, 0.9, 3.1] {
            let v = hermite_functions(3, x);
            let exact = PI_M14 * (2.0 * x * x - 1.0) / 2f64.sqrt() * (-0.5 * x * x).exp();
            assert_abs_diff_eq!(v[2], exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn irregular_wronskian() {
        // ψ_n φ_n' − ψ_n' φ_n = 2 checked with centered differences.
        let h = 1e-5;
        for &x in &[-1.5, 0.3, 2.0] {
            for n in 0..6 {
                let p = |y: f64| hermite_functions(n + 1, y)[n];
                let f = |y: f64| irregular_functions(n + 1, y)[n];
                let dp = (p(x + h) - p(x - h)) / (2.0 * h);
                let df = (f(x + h) - f(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(p(x) * df - dp * f(x), 2.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn overlap_identity_and_vacuum() {
        assert_abs_diff_eq!(displaced_overlap(3, C64::new(0.0, 0.0), 3).re, 1.0);
        assert_eq!(displaced_overlap(2, C64::new(0.0, 0.0), 3).norm(), 0.0);
        let a = C64::new(0.7, -1.1);
        let v = displaced_overlap(0, a, 0);
        assert_abs_diff_eq!(v.re, (-0.5 * a.norm_sqr()).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn displacement_block_matches_matrix_exponential() {
        let alpha = C64::new(0.8, 0.45);
        let big = expm_displacement(alpha, 90);
        let d = displacement_matrix(alpha, 12, 9);
        for j in 0..12 {
            for m in 0..9 {
                assert_abs_diff_eq!(d[(j, m)].re, big[(j, m)].re, epsilon = 1e-12);
                assert_abs_diff_eq!(d[(j, m)].im, big[(j, m)].im, epsilon = 1e-12);
                let single = displaced_overlap(j, alpha, m);
                assert_abs_diff_eq!((single - d[(j, m)]).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn large_displacement_columns_are_unitary() {
        // Far outside where naive recurrences survive.
        let alpha = C64::from_polar(14.0, 0.3);
        let d = displacement_matrix(alpha, 700, 40);
        for m in 0..40 {
            let s: f64 = d.column(m).iter().map(|z| z.norm_sqr()).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn lazy_columns_agree_with_block() {
        let alpha = C64::new(-1.3, 2.2);
        let block = displacement_matrix(alpha, 7, 40);
        let mut cols = DisplacedColumns::new(alpha, 7);
        let mut buf = vec![C64::new(0.0, 0.0); 7];
        for n in 0..40 {
            cols.column_into(n, &mut buf);
            for j in 0..7 {
                assert_abs_diff_eq!((buf[j] - block[(j, n)]).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = w.iter().sum();
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-14);
        let i30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert_abs_diff_eq!(i30, 2.0 / 31.0, epsilon = 1e-14);
    }
}
