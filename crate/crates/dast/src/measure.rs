//! Linear measurement ensembles and the dictionary matrix.
//!
//! Three ensembles are supported: samples of the frequency response on the
//! unit circle, samples of the impulse response, and convolutions of the
//! impulse response with a known input sequence. Each is a linear
//! functional of the transfer function, so measuring every net atom yields
//! the `n x |net|` matrix whose columns are measured atoms; identification
//! then happens entirely in coefficient space.
//!
//! Noise conventions: frequency measurements are complex-valued, so noise
//! is circular complex Gaussian with independent real and imaginary parts
//! of variance `sigma^2 / 2` each (total variance `sigma^2`). Impulse and
//! convolution measurements are real-valued and receive real Gaussian
//! noise of variance `sigma^2`. This keeps `sigma` meaning the same thing
//! in the regularization rule across ensembles.

use crate::atoms::{self, AtomicModel, Pole};
use crate::net::EpsilonNet;
use crate::{C64, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Default cap on `n x |net|` dictionary entries.
pub const DEFAULT_ENTRY_CAP: usize = 200_000_000;

/// A declarative description of the linear functionals to measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementPlan {
    /// Frequency response at `theta_k = 2 pi k / n`, `k = 1..=n`.
    FrequencyUniform { n: usize },
    /// Frequency response at explicit angles.
    FrequencyList { thetas: Vec<f64> },
    /// Impulse response samples `g_(i_k)` at 1-based indices.
    ImpulseSamples { indices: Vec<usize> },
    /// Convolution of the impulse response (truncated at `truncation`
    /// terms) with `input`, observed at the given output times. Input
    /// values outside the recorded range are treated as zero.
    Convolution {
        input: Vec<f64>,
        output_times: Vec<usize>,
        truncation: usize,
    },
}

/// Which noise model a plan's measurements call for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Circular complex Gaussian, `E|w|^2 = sigma^2`.
    ComplexCircular,
    /// Real Gaussian with variance `sigma^2`.
    Real,
}

impl MeasurementPlan {
    /// Number of measurements the plan produces.
    pub fn len(&self) -> usize {
        match self {
            MeasurementPlan::FrequencyUniform { n } => *n,
            MeasurementPlan::FrequencyList { thetas } => thetas.len(),
            MeasurementPlan::ImpulseSamples { indices } => indices.len(),
            MeasurementPlan::Convolution { output_times, .. } => output_times.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The measurement angles for frequency plans.
    pub fn frequencies(&self) -> Option<Vec<f64>> {
        match self {
            MeasurementPlan::FrequencyUniform { n } => {
                Some((1..=*n).map(|k| TAU * k as f64 / *n as f64).collect())
            }
            MeasurementPlan::FrequencyList { thetas } => Some(thetas.clone()),
            _ => None,
        }
    }

    pub fn noise_kind(&self) -> NoiseKind {
        match self {
            MeasurementPlan::FrequencyUniform { .. } | MeasurementPlan::FrequencyList { .. } => {
                NoiseKind::ComplexCircular
            }
            _ => NoiseKind::Real,
        }
    }

    /// Checks the plan invariants: at least one measurement, impulse
    /// indices >= 1, and a convolution horizon covering every output time
    /// (so no response history is dropped). Experiment drivers call this;
    /// `apply_plan` itself tolerates shorter horizons and zero-pads, which
    /// is exercised by the truncation-error bound tests.
    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidInput("plan has no measurements".into()));
        }
        match self {
            MeasurementPlan::FrequencyUniform { .. } => Ok(()),
            MeasurementPlan::FrequencyList { thetas } => {
                if thetas.iter().all(|t| t.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidInput("non-finite frequency".into()))
                }
            }
            MeasurementPlan::ImpulseSamples { indices } => {
                if indices.iter().any(|&i| i == 0) {
                    return Err(Error::InvalidInput("impulse indices are 1-based".into()));
                }
                if indices.iter().any(|&i| i > u32::MAX as usize) {
                    return Err(Error::InvalidInput("impulse index too large".into()));
                }
                Ok(())
            }
            MeasurementPlan::Convolution {
                input,
                output_times,
                truncation,
            } => {
                if input.is_empty() {
                    return Err(Error::InvalidInput("empty convolution input".into()));
                }
                let max_t = output_times.iter().copied().max().unwrap_or(0);
                if *truncation < max_t {
                    return Err(Error::InvalidInput(format!(
                        "convolution truncation {truncation} below max output time {max_t}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("plan JSON: {e}")))
    }
}

/// The measured atom dictionary: entry `(i, j)` is the i-th functional
/// applied to the atom at the j-th net point.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    entries: DMatrix<C64>,
    plan: MeasurementPlan,
    net: EpsilonNet,
}

impl MeasurementMatrix {
    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn plan(&self) -> &MeasurementPlan {
        &self.plan
    }

    pub fn net(&self) -> &EpsilonNet {
        &self.net
    }

    pub fn n_measurements(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.entries.ncols()
    }

    /// Numerical rank: number of singular values above 1e-10 of the largest,
    /// computed on the small `n x n` Gram matrix of the rows.
    pub fn numerical_rank(&self) -> usize {
        let gram = &self.entries * self.entries.adjoint();
        let eigs = gram.symmetric_eigenvalues();
        let top = eigs.iter().fold(0.0_f64, |a, &b| a.max(b));
        if top <= 0.0 {
            return 0;
        }
        eigs.iter().filter(|&&e| e > top * 1e-20).count()
    }
}

/// Applies every functional of the plan to a model.
pub fn apply_plan(plan: &MeasurementPlan, m: &AtomicModel) -> Result<DVector<C64>> {
    match plan {
        MeasurementPlan::FrequencyUniform { .. } | MeasurementPlan::FrequencyList { .. } => {
            let thetas = plan.frequencies().expect("frequency plan");
            let mut y = DVector::zeros(thetas.len());
            for (i, &theta) in thetas.iter().enumerate() {
                y[i] = atoms::eval_model(m, C64::from_polar(1.0, theta))?;
            }
            Ok(y)
        }
        MeasurementPlan::ImpulseSamples { indices } => {
            let mut y = DVector::zeros(indices.len());
            for (k, &i) in indices.iter().enumerate() {
                if i == 0 {
                    return Err(Error::InvalidInput("impulse indices are 1-based".into()));
                }
                y[k] = impulse_sample(m.terms(), i);
            }
            Ok(y)
        }
        MeasurementPlan::Convolution {
            input,
            output_times,
            truncation,
        } => {
            if *truncation == 0 {
                return Err(Error::InvalidInput("truncation must be >= 1".into()));
            }
            let g = m.impulse_response(*truncation);
            Ok(convolve_at(&g, input, output_times))
        }
    }
}

fn impulse_sample(terms: &[(Pole, C64)], index: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (pole, coeff) in terms {
        let w = pole.value();
        acc += coeff * (1.0 - w.norm_sqr()) * w.powu((index - 1) as u32);
    }
    acc
}

/// `y_t = sum_(j=1..K) g_j u_(t-j)`, with `u` zero outside its recorded range.
fn convolve_at(g: &[C64], input: &[f64], output_times: &[usize]) -> DVector<C64> {
    let mut y = DVector::zeros(output_times.len());
    for (row, &t) in output_times.iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (j, gj) in g.iter().enumerate() {
            let lag = j + 1; // g[j] holds g_(j+1)
            if lag > t {
                break;
            }
            let u_index = t - lag;
            if u_index < input.len() {
                acc += gj * input[u_index];
            }
        }
        y[row] = acc;
    }
    y
}

/// Measures every net atom, producing the dictionary matrix.
pub fn build_matrix(plan: &MeasurementPlan, net: &EpsilonNet) -> Result<MeasurementMatrix> {
    build_matrix_capped(plan, net, DEFAULT_ENTRY_CAP)
}

/// Like [`build_matrix`] with an explicit entry cap.
pub fn build_matrix_capped(
    plan: &MeasurementPlan,
    net: &EpsilonNet,
    entry_cap: usize,
) -> Result<MeasurementMatrix> {
    plan.validate()?;
    let n = plan.len();
    let p = net.len();
    if n.saturating_mul(p) > entry_cap {
        return Err(Error::SizeLimit(format!(
            "dictionary would need {n} x {p} entries (cap {entry_cap})"
        )));
    }
    let columns: Vec<DVector<C64>> = net
        .points()
        .par_iter()
        .map(|pole| atom_column(plan, *pole))
        .collect();
    let mut entries = DMatrix::zeros(n, p);
    for (j, col) in columns.iter().enumerate() {
        entries.set_column(j, col);
    }
    Ok(MeasurementMatrix {
        entries,
        plan: plan.clone(),
        net: net.clone(),
    })
}

fn atom_column(plan: &MeasurementPlan, pole: Pole) -> DVector<C64> {
    let w = pole.value();
    match plan {
        MeasurementPlan::FrequencyUniform { .. } | MeasurementPlan::FrequencyList { .. } => {
            let thetas = plan.frequencies().expect("frequency plan");
            let scale = 1.0 - w.norm_sqr();
            DVector::from_iterator(
                thetas.len(),
                thetas
                    .iter()
                    .map(|&t| scale / (C64::from_polar(1.0, t) - w)),
            )
        }
        MeasurementPlan::ImpulseSamples { indices } => {
            let term = [(pole, C64::new(1.0, 0.0))];
            DVector::from_iterator(
                indices.len(),
                indices.iter().map(|&i| impulse_sample(&term, i)),
            )
        }
        MeasurementPlan::Convolution {
            input,
            output_times,
            truncation,
        } => {
            let g = atoms::atom_impulse_response(pole, *truncation);
            convolve_at(&g, input, output_times)
        }
    }
}

/// Adds i.i.d. Gaussian noise of total variance `sigma^2` per measurement.
/// Deterministic for a fixed seed; complex noise draws the real part first.
pub fn add_noise(y: &DVector<C64>, sigma: f64, kind: NoiseKind, seed: u64) -> DVector<C64> {
    if sigma == 0.0 {
        return y.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut out = y.clone();
    match kind {
        NoiseKind::ComplexCircular => {
            let component = sigma / std::f64::consts::SQRT_2;
            for v in out.iter_mut() {
                let re: f64 = normal.sample(&mut rng);
                let im: f64 = normal.sample(&mut rng);
                *v += C64::new(component * re, component * im);
            }
        }
        NoiseKind::Real => {
            for v in out.iter_mut() {
                let re: f64 = normal.sample(&mut rng);
                *v += C64::new(sigma * re, 0.0);
            }
        }
    }
    out
}

/// Per-sample bound `W * 2 rho^K / (1 - rho) * max|u|` on the output error
/// from truncating the convolution horizon of a radius-`rho` model at `K`.
pub fn convolution_truncation_bound(m: &AtomicModel, truncation: usize, input: &[f64]) -> f64 {
    let rho = m.rho();
    let max_u = input.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    atoms::decomposition_weight(m) * 2.0 * rho.powi(truncation as i32) / (1.0 - rho) * max_u
}

/// Writes an observation vector as CSV with columns `index,re,im`.
pub fn observations_to_csv(y: &DVector<C64>) -> String {
    let mut out = String::from("index,re,im\n");
    for (i, v) in y.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i, v.re, v.im));
    }
    out
}

/// Parses the CSV format produced by [`observations_to_csv`].
pub fn observations_from_csv(text: &str) -> Result<DVector<C64>> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "index,re,im" {
                return Err(Error::InvalidInput(format!(
                    "unexpected observation CSV header: {line}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::InvalidInput(format!("bad observation row: {line}")));
        }
        let re: f64 = fields[1]
            .parse()
            .map_err(|e| Error::InvalidInput(format!("bad re field: {e}")))?;
        let im: f64 = fields[2]
            .parse()
            .map_err(|e| Error::InvalidInput(format!("bad im field: {e}")))?;
        values.push(C64::new(re, im));
    }
    Ok(DVector::from_vec(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::build_net;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn pole(re: f64, im: f64) -> Pole {
        Pole::new(C64::new(re, im)).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_model(rng: &mut ChaCha8Rng, max_atoms: usize, rho: f64) -> AtomicModel {
        let n = 1 + rng.random_range(0..max_atoms);
        let terms = (0..n)
            .map(|_| {
                let r = rho * rng.random::<f64>().sqrt();
                let theta = TAU * rng.random::<f64>();
                (
                    Pole::new(C64::from_polar(r, theta)).unwrap(),
                    c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0),
                )
            })
            .collect();
        AtomicModel::new(terms, rho).unwrap()
    }

    #[test]
    fn zero_model_measures_to_zero() {
        let m = AtomicModel::empty(0.5).unwrap();
        for plan in [
            MeasurementPlan::FrequencyUniform { n: 5 },
            MeasurementPlan::ImpulseSamples { indices: vec![1, 4] },
            MeasurementPlan::Convolution {
                input: vec![1.0, -2.0, 0.5],
                output_times: vec![1, 2, 3],
                truncation: 3,
            },
        ] {
            let y = apply_plan(&plan, &m).unwrap();
            assert!(y.iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn uniform_frequency_plan_on_delay_atom() {
        // theta_k = pi k / 2 for k = 1..=4 evaluates 1/z at i, -1, -i, 1
        let m = AtomicModel::new(vec![(pole(0.0, 0.0), c(1.0, 0.0))], 0.5).unwrap();
        let y = apply_plan(&MeasurementPlan::FrequencyUniform { n: 4 }, &m).unwrap();
        let expected = [c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)];
        for (v, e) in y.iter().zip(expected) {
            assert!((v - e).norm() < 1e-14, "{v} vs {e}");
        }
    }

    #[test]
    fn impulse_samples_match_impulse_response() {
        let m = AtomicModel::new(vec![(pole(0.5, 0.0), c(1.0, 0.0))], 0.5).unwrap();
        let y = apply_plan(
            &MeasurementPlan::ImpulseSamples { indices: vec![1, 2, 3] },
            &m,
        )
        .unwrap();
        assert_abs_diff_eq!(y[0].re, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1].re, 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(y[2].re, 0.1875, epsilon = 1e-15);
    }

    #[test]
    fn convolution_with_unit_impulse_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(&mut rng, 3, 0.8);
        let plan = MeasurementPlan::Convolution {
            input: vec![1.0],
            output_times: (0..6).collect(),
            truncation: 6,
        };
        let y = apply_plan(&plan, &m).unwrap();
        let g = m.impulse_response(6);
        assert_eq!(y[0], c(0.0, 0.0)); // strictly proper: no feedthrough
        for t in 1..6 {
            assert!((y[t] - g[t - 1]).norm() < 1e-14);
        }
    }

    #[test]
    fn apply_plan_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
        let plans = [
            MeasurementPlan::FrequencyUniform { n: 7 },
            MeasurementPlan::ImpulseSamples { indices: vec![1, 3, 9] },
            MeasurementPlan::Convolution {
                input,
                output_times: (1..15).collect(),
                truncation: 40,
            },
        ];
        for plan in &plans {
            let m1 = random_model(&mut rng, 3, 0.85);
            let m2 = random_model(&mut rng, 3, 0.85);
            let alpha = c(1.3, -0.4);
            let beta = c(-0.2, 0.9);
            let lhs = apply_plan(plan, &atoms::combined(&m1, alpha, &m2, beta)).unwrap();
            let rhs =
                apply_plan(plan, &m1).unwrap() * alpha + apply_plan(plan, &m2).unwrap() * beta;
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn matrix_times_grid_coefficients_matches_apply_plan() {
        let net = build_net(0.8, 0.25).unwrap();
        let plan = MeasurementPlan::FrequencyUniform { n: 12 };
        let matrix = build_matrix(&plan, &net).unwrap();
        // an on-grid model: coefficients on a few net points
        let picks = [0usize, 3, net.len() - 1];
        let mut coeffs = DVector::<C64>::zeros(net.len());
        let mut terms = Vec::new();
        for (k, &j) in picks.iter().enumerate() {
            let coeff = c(0.5 + k as f64, -0.25 * k as f64);
            coeffs[j] = coeff;
            terms.push((net.points()[j], coeff));
        }
        let m = AtomicModel::new(terms, net.rho()).unwrap();
        let via_matrix = matrix.entries() * &coeffs;
        let via_plan = apply_plan(&plan, &m).unwrap();
        assert!((via_matrix - via_plan).norm() < 1e-12);
    }

    #[test]
    fn frequency_columns_bounded_and_lipschitz() {
        let net = build_net(0.9, 0.1).unwrap();
        let n = 64;
        let matrix = build_matrix(&MeasurementPlan::FrequencyUniform { n }, &net).unwrap();
        let rho = net.rho();
        let dtheta = TAU / n as f64;
        let lip = (1.0 + rho) / (1.0 - rho) * dtheta + 1e-12;
        for j in 0..matrix.n_atoms() {
            let col = matrix.entries().column(j);
            for i in 0..n {
                assert!(col[i].norm() <= 2.0 + 1e-12);
                if i + 1 < n {
                    assert!((col[i + 1] - col[i]).norm() <= lip);
                }
            }
        }
    }

    #[test]
    fn noise_is_deterministic_and_vanishes_at_zero_sigma() {
        let y = DVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.25)]);
        assert_eq!(add_noise(&y, 0.0, NoiseKind::ComplexCircular, 7), y);
        let a = add_noise(&y, 0.3, NoiseKind::ComplexCircular, 7);
        let b = add_noise(&y, 0.3, NoiseKind::ComplexCircular, 7);
        assert_eq!(a, b);
        let d = add_noise(&y, 0.3, NoiseKind::ComplexCircular, 8);
        assert_ne!(a, d);
        // real noise leaves imaginary parts untouched
        let r = add_noise(&y, 0.3, NoiseKind::Real, 7);
        assert_eq!(r[0].im, 2.0);
    }

    #[test]
    fn noise_has_requested_variance() {
        let sigma = 0.7;
        let zeros = DVector::from_element(100_000, c(0.0, 0.0));
        for kind in [NoiseKind::ComplexCircular, NoiseKind::Real] {
            let w = add_noise(&zeros, sigma, kind, 3);
            let var = w.iter().map(|v| v.norm_sqr()).sum::<f64>() / w.len() as f64;
            assert!(
                (var - sigma * sigma).abs() <= 0.02 * sigma * sigma,
                "{kind:?}: variance {var}"
            );
        }
    }

    // Output times beyond the truncation horizon drop genuine history; the
    // dropped tail is bounded by the documented formula. A doubled horizon
    // serves as the reference.
    #[test]
    fn truncation_error_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(&mut rng, 4, 0.8);
        let input: Vec<f64> = (0..60).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let times: Vec<usize> = (1..60).collect();
        let k = 12;
        let short = apply_plan(
            &MeasurementPlan::Convolution {
                input: input.clone(),
                output_times: times.clone(),
                truncation: k,
            },
            &m,
        )
        .unwrap();
        let long = apply_plan(
            &MeasurementPlan::Convolution {
                input: input.clone(),
                output_times: times.clone(),
                truncation: 2 * k,
            },
            &m,
        )
        .unwrap();
        let bound = convolution_truncation_bound(&m, k, &input);
        assert!(bound > 0.0);
        for i in 0..times.len() {
            assert!((short[i] - long[i]).norm() <= bound + 1e-12);
        }
        // the strict invariant rejects horizons below the last output time
        assert!(MeasurementPlan::Convolution {
            input,
            output_times: times,
            truncation: k,
        }
        .validate()
        .is_err());
    }

    #[test]
    fn plan_validation() {
        assert!(MeasurementPlan::FrequencyUniform { n: 0 }.validate().is_err());
        assert!(MeasurementPlan::ImpulseSamples { indices: vec![0] }
            .validate()
            .is_err());
        assert!(MeasurementPlan::ImpulseSamples { indices: vec![1] }
            .validate()
            .is_ok());
    }

    #[test]
    fn column_of_origin_net_under_two_frequencies() {
        let net = build_net(0.5, 2.0).unwrap();
        assert_eq!(net.len(), 1);
        let matrix = build_matrix(&MeasurementPlan::FrequencyUniform { n: 2 }, &net).unwrap();
        // 1/z at z = -1, 1
        assert!((matrix.entries()[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((matrix.entries()[(1, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn plan_json_has_kind_discriminator() {
        let plan = MeasurementPlan::Convolution {
            input: vec![0.5, 1.0],
            output_times: vec![1, 2],
            truncation: 2,
        };
        let text = plan.to_json();
        assert!(text.contains("\"kind\":\"convolution\""), "{text}");
        assert_eq!(MeasurementPlan::from_json(&text).unwrap(), plan);
        let plan = MeasurementPlan::FrequencyUniform { n: 3 };
        assert!(plan.to_json().contains("\"kind\":\"frequency_uniform\""));
    }

    #[test]
    fn observation_csv_round_trip() {
        let y = DVector::from_vec(vec![c(1.0 / 3.0, -2.0), c(0.125, 7e-17)]);
        let text = observations_to_csv(&y);
        assert!(text.starts_with("index,re,im\n"));
        let back = observations_from_csv(&text).unwrap();
        assert_eq!(y, back);
    }

    #[test]
    fn matrix_rank_of_spanning_dictionary() {
        let net = build_net(0.8, 0.2).unwrap();
        let matrix = build_matrix(&MeasurementPlan::FrequencyUniform { n: 8 }, &net).unwrap();
        assert_eq!(matrix.numerical_rank(), 8);
    }

    #[test]
    fn entry_cap_is_enforced() {
        let net = build_net(0.8, 0.1).unwrap();
        match build_matrix_capped(&MeasurementPlan::FrequencyUniform { n: 100 }, &net, 1000) {
            Err(Error::SizeLimit(_)) => {}
            other => panic!("expected size-limit error, got {other:?}"),
        }
    }
}
