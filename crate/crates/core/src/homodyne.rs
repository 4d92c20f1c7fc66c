//! Homodyne sampling, snapshots F^(N)(x,θ) and homodyne shadows.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::quadrature::{pair_count, pair_index, DensityTables, PatternEvaluator};
use crate::shadow::Shadow;

/// One homodyne record: LO phase θ ∈ [0, π) and calibrated quadrature x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneSample {
    pub theta: f64,
    pub x: f64,
}

impl HomodyneSample {
    pub fn new(theta: f64, x: f64) -> Result<Self> {
        if !(0.0..PI).contains(&theta) {
            return Err(Error::InvalidArgument(format!("theta {theta} outside [0, π)")));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { theta, x })
    }
}

/// Draws (θ, x) pairs from a fixed state.
#[derive(Clone, Debug)]
pub struct HomodyneSimulator {
    tables: DensityTables,
}

impl HomodyneSimulator {
    pub fn new(rho: &FockOperator) -> Result<Self> {
        rho.require_hermitian()?;
        Ok(Self {
            tables: DensityTables::new(rho)?,
        })
    }

    pub fn from_tables(tables: DensityTables) -> Self {
        Self { tables }
    }

    pub fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HomodyneSample> {
        let mut theta = rng.gen::<f64>() * PI;
        if theta >= PI {
            theta = 0.0;
        }
        let x = self.tables.sample(theta, rng)?;
        Ok(HomodyneSample { theta, x })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<HomodyneSample>> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        (0..count).map(|_| self.draw_one(rng)).collect()
    }
}

/// θ uniform on [0, π), x from ⟨x_θ|ρ|x_θ⟩.
pub fn draw_homodyne<R: Rng + ?Sized>(
    rho: &FockOperator,
    rng: &mut R,
    count: usize,
) -> Result<Vec<HomodyneSample>> {
    HomodyneSimulator::new(rho)?.draw(rng, count)
}

/// Adds `weight · F^(N)(x,θ)` into `out`. The one snapshot builder shared
/// by simulated and ingested records.
pub fn add_homodyne_snapshot(
    sample: &HomodyneSample,
    evaluator: &PatternEvaluator,
    n: usize,
    weight: f64,
    out: &mut DMatrix<C64>,
    scratch: &mut Vec<f64>,
) -> Result<()> {
    scratch.resize(pair_count(n), 0.0);
    evaluator.patterns_into(sample.x, n, scratch)?;
    let step = C64::from_polar(1.0, sample.theta);
    let mut phase = C64::new(weight, 0.0);
    for d in 0..n {
        for m in 0..n - d {
            let f = scratch[pair_index(m, m + d)];
            // F_{m+d, m} = e^{idθ} f, F_{m, m+d} its conjugate
            out[(m + d, m)] += phase * f;
            if d > 0 {
                out[(m, m + d)] += phase.conj() * f;
            }
        }
        phase *= step;
    }
    Ok(())
}

pub fn homodyne_snapshot(
    sample: &HomodyneSample,
    evaluator: &PatternEvaluator,
    n: usize,
) -> Result<FockOperator> {
    let mut m = DMatrix::zeros(n, n);
    add_homodyne_snapshot(sample, evaluator, n, 1.0, &mut m, &mut Vec::new())?;
    Ok(FockOperator::from_hermitian_unchecked(m))
}

/// Accumulates samples into an existing shadow.
pub fn extend_homodyne_shadow(
    shadow: &mut Shadow,
    samples: &[HomodyneSample],
    evaluator: &PatternEvaluator,
) -> Result<()> {
    let n = shadow.dim();
    let mut scratch = Vec::new();
    for s in samples {
        add_homodyne_snapshot(s, evaluator, n, 1.0, shadow.sum_mut(), &mut scratch)?;
        shadow.bump(1);
    }
    Ok(())
}

pub fn homodyne_shadow(
    samples: &[HomodyneSample],
    evaluator: &PatternEvaluator,
    n: usize,
) -> Result<Shadow> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut shadow = Shadow::new(n);
    extend_homodyne_shadow(&mut shadow, samples, evaluator)?;
    Ok(shadow)
}

/// Mean of the homodyne snapshots, σ_T^(N).
pub fn shadow_estimate(
    samples: &[HomodyneSample],
    evaluator: &PatternEvaluator,
    n: usize,
) -> Result<FockOperator> {
    homodyne_shadow(samples, evaluator, n)?.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_state, project, Parity, StateSpec};
    use crate::quadrature::quadrature_density;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_validation() {
        assert!(HomodyneSample::new(PI, 0.0).is_err());
        assert!(HomodyneSample::new(-0.1, 0.0).is_err());
        assert!(HomodyneSample::new(0.3, f64::NAN).is_err());
        assert!(HomodyneSample::new(0.3, -2.0).is_ok());
    }

    #[test]
    fn zero_count_is_an_error() {
        let rho = make_state(&StateSpec::vacuum(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(draw_homodyne(&rho, &mut rng, 0).is_err());
        let ev = PatternEvaluator::with_grid(2, 7.0, 64).unwrap();
        assert!(matches!(shadow_estimate(&[], &ev, 2), Err(Error::EmptySamples)));
    }

    #[test]
    fn vacuum_variance_in_every_theta_bin_and_uniform_theta() {
        let rho = make_state(&StateSpec::vacuum(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = draw_homodyne(&rho, &mut rng, 100_000).unwrap();
        let bins = 10;
        let mut counts = vec![0usize; bins];
        let mut sq = vec![0.0; bins];
        for h in &s {
            let b = ((h.theta / PI) * bins as f64) as usize;
            counts[b] += 1;
            sq[b] += h.x * h.x;
        }
        let expected = s.len() as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // χ² with 9 dof, 1% critical value 21.67
        assert!(chi2 < 21.67, "{chi2}");
        for b in 0..bins {
            assert!((sq[b] / counts[b] as f64 - 0.5).abs() < 0.01 * 2.5);
        }
    }

    #[test]
    fn rejection_sampler_matches_density_moments() {
        // Oracle: moments of the tabulated density at the same θ.
        let rho = make_state(&StateSpec::cat(C64::new(2.0f64.sqrt(), 0.0), Parity::Even, 20)).unwrap();
        let tables = DensityTables::new(&rho).unwrap();
        let theta = 0.4;
        let dens = quadrature_density(&rho, theta).unwrap();
        let moment = |k: i32| -> f64 {
            let s: f64 = (0..dens.values.len()).map(|i| dens.values[i] * dens.x(i).powi(k)).sum();
            s * dens.dx
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| tables.sample(theta, &mut rng).unwrap()).collect();
        for k in [1, 2, 4] {
            let emp = xs.iter().map(|x| x.powi(k)).sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| x.powi(2 * k)).sum::<f64>() / n as f64 - emp * emp;
            let se = (var / n as f64).sqrt();
            assert!((emp - moment(k)).abs() < 5.0 * se + 1e-4, "k={k}: {emp} vs {}", moment(k));
        }
    }

    #[test]
    fn snapshot_structure() {
        let ev = PatternEvaluator::with_grid(5, 8.2, 1025).unwrap();
        let s = homodyne_snapshot(&HomodyneSample::new(0.0, 0.37).unwrap(), &ev, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(s.get(i, j).im, 0.0);
                assert_eq!(s.get(i, j), s.get(j, i));
            }
        }
        assert!(homodyne_snapshot(&HomodyneSample::new(0.0, 0.37).unwrap(), &ev, 6).is_err());
    }

    #[test]
    fn vacuum_snapshot_mean_at_n3() {
        let rho = make_state(&StateSpec::vacuum(3)).unwrap();
        let ev = PatternEvaluator::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = draw_homodyne(&rho, &mut rng, 1_000_000).unwrap();
        let est = shadow_estimate(&samples, &ev, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((est.get(i, j) - C64::new(want, 0.0)).norm() < 0.02);
            }
        }
    }

    #[test]
    fn error_decreases_like_inverse_sqrt_t() {
        let rho = make_state(&StateSpec::vacuum(6)).unwrap();
        let ev = PatternEvaluator::new(6).unwrap();
        let target = project(&rho, 6).unwrap();
        // Average over independent repetitions to tame the ratio's noise.
        let mut errs = Vec::new();
        for &t in &[1_000usize, 10_000, 100_000] {
            let mut acc = 0.0;
            let reps = 6;
            for r in 0..reps {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + r);
                let s = draw_homodyne(&rho, &mut rng, t).unwrap();
                let est = shadow_estimate(&s, &ev, 6).unwrap();
                acc += est.sub(&target).unwrap().infinity_norm();
            }
            errs.push(acc / reps as f64);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.3, "{errs:?}");
        }
    }

    proptest! {
        #[test]
        fn snapshots_are_hermitian(theta in 0.0f64..PI, x in -6.0f64..6.0) {
            let ev = PatternEvaluator::with_grid(4, 7.9, 257).unwrap();
            let s = homodyne_snapshot(&HomodyneSample::new(theta, x).unwrap(), &ev, 4).unwrap();
            prop_assert!(s.hermiticity_deviation() <= 1e-12);
        }

        #[test]
        fn sampling_is_reproducible(seed in 0u64..1000) {
            let rho = make_state(&StateSpec::coherent(C64::new(0.6, 0.2), 8)).unwrap();
            let sim = HomodyneSimulator::new(&rho).unwrap();
            let a = sim.draw(&mut ChaCha8Rng::seed_from_u64(seed), 20).unwrap();
            let b = sim.draw(&mut ChaCha8Rng::seed_from_u64(seed), 20).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn half_shadows_merge_to_full() {
        let rho = make_state(&StateSpec::fock(1, 4)).unwrap();
        let ev = PatternEvaluator::with_grid(4, 7.9, 1025).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = draw_homodyne(&rho, &mut rng, 2000).unwrap();
        let full = homodyne_shadow(&s, &ev, 4).unwrap();
        let merged = homodyne_shadow(&s[..700], &ev, 4)
            .unwrap()
            .merge(&homodyne_shadow(&s[700..], &ev, 4).unwrap())
            .unwrap();
        assert_eq!(merged.count(), full.count());
        let d = merged.estimate().unwrap().sub(&full.estimate().unwrap()).unwrap();
        assert_abs_diff_eq!(d.infinity_norm(), 0.0, epsilon = 1e-13);
    }
}
