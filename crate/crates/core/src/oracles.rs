//! Deterministic cross-checks of the estimators against exact integrals.
//! Used by the `validate` command and the acceptance suite.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::displaced::t_operator;
use crate::error::{invalid, Result};
use crate::fock::{make_state, project, wigner_at, FockOperator, Parity, StateSpec};
use crate::homodyne::{add_homodyne_snapshot, HomodyneSample};
use crate::quadrature::{default_x_max, PatternEvaluator};
use crate::special::{gauss_legendre, hermite_functions_into};

/// E[F^(N)] for every basis operator |j⟩⟨k|, j, k < dim, by direct
/// quadrature of p(x,θ) F^(N)(x,θ). Entry `[j * dim + k]` holds the N×N mean.
///
/// θ uses the trapezoid rule on [0, π), exact for the trigonometric
/// polynomials involved; x uses the trapezoid rule on a grid not aligned
/// with the pattern tables, so interpolation error is included.
pub fn homodyne_means(dim: usize, n: usize, evaluator: &PatternEvaluator) -> Result<Vec<DMatrix<C64>>> {
    if dim == 0 || n == 0 || evaluator.cutoff() < n {
        return Err(invalid("need dim ≥ 1 and 1 ≤ N ≤ evaluator cutoff"));
    }
    let phases = dim + n;
    let x_max = default_x_max(dim.max(n)) + 1.0;
    let points = 6007;
    let dx = 2.0 * x_max / (points - 1) as f64;
    let mut psi = vec![0.0; dim];
    let mut out = vec![DMatrix::<C64>::zeros(n, n); dim * dim];
    let mut snap = DMatrix::<C64>::zeros(n, n);
    let mut scratch = Vec::new();
    for i in 0..points {
        let x = -x_max + i as f64 * dx;
        let wx = if i == 0 || i + 1 == points { 0.5 * dx } else { dx };
        hermite_functions_into(x, &mut psi);
        for t in 0..phases {
            let theta = PI * t as f64 / phases as f64;
            let w = wx / phases as f64;
            snap.fill(C64::new(0.0, 0.0));
            add_homodyne_snapshot(&HomodyneSample { theta, x }, evaluator, n, 1.0, &mut snap, &mut scratch)?;
            for j in 0..dim {
                for k in 0..dim {
                    // ⟨x_θ|j⟩⟨k|x_θ⟩
                    let g = C64::from_polar(w * psi[j] * psi[k], -((j as f64) - (k as f64)) * theta);
                    if g.norm() < 1e-300 {
                        continue;
                    }
                    out[j * dim + k] += &snap * g;
                }
            }
        }
    }
    Ok(out)
}

/// Largest entrywise deviation |E[F^(N)](H) − P_N H P_N| over the Hermitian
/// basis {E_jj, E_jk + E_kj, i(E_jk − E_kj)} on `dim` levels.
pub fn completeness_deviation(n: usize, dim: usize) -> Result<f64> {
    let ev = PatternEvaluator::new(n)?;
    let means = homodyne_means(dim, n, &ev)?;
    let mut worst: f64 = 0.0;
    let i = C64::new(0.0, 1.0);
    for j in 0..dim {
        for k in j..dim {
            let cases: Vec<(C64, C64)> = if j == k {
                vec![(C64::new(1.0, 0.0), C64::new(0.0, 0.0))]
            } else {
                vec![(C64::new(1.0, 0.0), C64::new(1.0, 0.0)), (i, -i)]
            };
            for (a, b) in cases {
                // H = a|j⟩⟨k| + b|k⟩⟨j|
                let mut h = DMatrix::<C64>::zeros(dim, dim);
                h[(j, k)] += a;
                h[(k, j)] += b;
                let mean = &means[j * dim + k] * a + &means[k * dim + j] * (if j == k { C64::new(0.0, 0.0) } else { b });
                let target = project(&FockOperator::new(h)?, n)?;
                let d = (mean - target.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                worst = worst.max(d);
            }
        }
    }
    Ok(worst)
}

/// π ∫_{|α| ≤ α_max} d²α Tr[ρ T_r(α)] P_N T_{−r}(α) P_N, Gauss–Legendre in
/// |α| and trapezoid in arg α. Tr[ρ T_r(α)] = Σ_n ⟨n,α|ρ|n,α⟩ λ_r^(n) summed
/// over every n.
pub fn duality_integral(
    rho: &FockOperator,
    n: usize,
    r: f64,
    alpha_max: f64,
    radial: usize,
    angular: usize,
) -> Result<FockOperator> {
    rho.require_hermitian()?;
    let dim = rho.dim();
    let (xs, ws) = gauss_legendre(radial);
    let mut acc = DMatrix::<C64>::zeros(n, n);
    for (&x, &w) in xs.iter().zip(&ws) {
        let rad = 0.5 * (x + 1.0) * alpha_max;
        let wr = 0.5 * w * alpha_max * rad * 2.0 * PI / angular as f64;
        for k in 0..angular {
            let alpha = C64::from_polar(rad, 2.0 * PI * k as f64 / angular as f64);
            let tr = t_operator(alpha, r, dim)?;
            let weight: f64 = (rho.matrix().component_mul(&tr.matrix().transpose())).sum().re;
            let dual = t_operator(alpha, -r, n)?;
            acc += dual.matrix() * C64::new(PI * wr * weight, 0.0);
        }
    }
    Ok(FockOperator::from_hermitian_unchecked(acc))
}

/// Largest |Tr[ρ T_0(α)] − 2W(q,p)| with α = (q + ip)/√2 on a square grid.
pub fn parity_wigner_deviation(rho: &FockOperator, half_width: f64, points: usize) -> Result<f64> {
    if points < 2 {
        return Err(invalid("grid needs at least 2 points"));
    }
    let dim = rho.dim();
    let mut worst: f64 = 0.0;
    for a in 0..points {
        for b in 0..points {
            let q = -half_width + 2.0 * half_width * a as f64 / (points - 1) as f64;
            let p = -half_width + 2.0 * half_width * b as f64 / (points - 1) as f64;
            let alpha = C64::new(q, p) / 2f64.sqrt();
            let t = t_operator(alpha, 0.0, dim)?;
            let parity: f64 = (rho.matrix().component_mul(&t.matrix().transpose())).sum().re;
            worst = worst.max((parity - 2.0 * wigner_at(rho, q, p)).abs());
        }
    }
    Ok(worst)
}

/// One oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn new(name: String, deviation: f64, tolerance: f64) -> Self {
        Self {
            name,
            deviation,
            tolerance,
            passed: deviation <= tolerance,
        }
    }
}

/// Completeness of the homodyne snapshots for N = 1..=max_n, on N + 2 levels.
pub fn completeness_suite(max_n: usize, tolerance: f64) -> Result<Vec<OracleCheck>> {
    (1..=max_n)
        .map(|n| {
            let d = completeness_deviation(n, n + 2)?;
            Ok(OracleCheck::new(format!("completeness N={n}"), d, tolerance))
        })
        .collect()
}

/// Duality integral against ρ^(N) for N = 1..=max_n, r ∈ {0, ±0.3}, on a
/// random pure state of N + 2 levels and α_max² = 4N.
pub fn duality_suite(max_n: usize, tolerance: f64) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        let rho = make_state(&StateSpec::random_pure(17 + n as u64, n + 2))?;
        let target = project(&rho, n)?;
        for r in [0.0, 0.3, -0.3] {
            let e = duality_integral(&rho, n, r, (4.0 * n as f64).sqrt(), 48, 48)?;
            let d = e.sub(&target)?.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
            out.push(OracleCheck::new(format!("duality N={n} r={r}"), d, tolerance));
        }
    }
    Ok(out)
}

/// Displaced parity against the Wigner function on a 21×21 grid over
/// [−3, 3]² for vacuum, |1⟩ and the even cat of amplitude √2.
pub fn parity_suite(tolerance: f64) -> Result<Vec<OracleCheck>> {
    let states = [
        ("vacuum", StateSpec::vacuum(8)),
        ("fock(1)", StateSpec::fock(1, 8)),
        ("cat(sqrt 2)", StateSpec::cat(C64::new(2f64.sqrt(), 0.0), Parity::Even, 30)),
    ];
    states
        .into_iter()
        .map(|(name, spec)| {
            let d = parity_wigner_deviation(&make_state(&spec)?, 3.0, 21)?;
            Ok(OracleCheck::new(format!("parity/wigner {name}"), d, tolerance))
        })
        .collect()
}
