//! Time-domain simulation and a Ho-Kalman subspace-identification
//! comparator.
//!
//! Atomic models simulate as diagonal state-space realizations (one state
//! per pole, unit input vector, output row carrying the normalized
//! coefficients). The comparator is the textbook pipeline: estimate
//! Markov parameters by least squares from input-output data, factor
//! their Hankel matrix by a rank-truncated SVD into a balanced
//! realization, read the system matrix off the shift structure, and
//! convert back to partial fractions through the eigenvalues. The
//! experiment drivers hand the comparator the true model order.

use crate::atoms::{AtomicModel, Pole};
use crate::{C64, Error, Result};
use nalgebra::{DMatrix, DVector, RowDVector};

/// Radius at which recovered poles are clipped back inside the disk.
const POLE_CLIP: f64 = 1.0 - 1e-8;

/// Relative Markov-parameter mismatch beyond which the realization is
/// treated as non-diagonalizable.
const DIAGONALIZABLE_TOL: f64 = 1e-6;

/// Diagonal state-space realization of an atomic model:
/// `A = diag(w_j)`, `B = 1`, `C_j = c_j (1 - |w_j|^2)`, `D = 0`.
#[derive(Debug, Clone)]
pub struct DiagonalRealization {
    a_diag: DVector<C64>,
    b: DVector<C64>,
    c_row: RowDVector<C64>,
    rho: f64,
}

impl DiagonalRealization {
    /// Builds the realization and verifies at construction that its first
    /// 20 Markov parameters reproduce the model's impulse response to
    /// 1e-10.
    pub fn from_model(m: &AtomicModel) -> Result<Self> {
        let d = m.degree();
        let a_diag = DVector::from_iterator(d, m.terms().iter().map(|(p, _)| p.value()));
        let b = DVector::from_element(d, C64::new(1.0, 0.0));
        let c_row = RowDVector::from_iterator(
            d,
            m.terms()
                .iter()
                .map(|(p, c)| c * (1.0 - p.value().norm_sqr())),
        );
        let real = DiagonalRealization {
            a_diag,
            b,
            c_row,
            rho: m.rho(),
        };
        let check_len = 20;
        let markov = real.markov(check_len);
        let g = m.impulse_response(check_len);
        for k in 0..check_len {
            if (markov[k] - g[k]).norm() > 1e-10 {
                return Err(Error::Numerical(format!(
                    "realization Markov parameter {k} deviates by {}",
                    (markov[k] - g[k]).norm()
                )));
            }
        }
        Ok(real)
    }

    pub fn order(&self) -> usize {
        self.a_diag.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a_diag.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }

    /// Markov parameters `g_k = C A^(k-1) B` for `k = 1..=len`.
    pub fn markov(&self, len: usize) -> Vec<C64> {
        let mut state = self.b.clone();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push((&self.c_row * &state)[(0, 0)]);
            state.zip_apply(&self.a_diag, |x, a| *x *= a);
        }
        out
    }
}

/// Simulates `y[t] = sum_(j=1..t) g_j u[t-j]` from a zero initial state.
///
/// The model must be conjugate-symmetric (a real system); the output's
/// imaginary residue must stay below 1e-10 and is discarded.
pub fn simulate_io(m: &AtomicModel, input: &[f64]) -> Result<Vec<f64>> {
    if input.is_empty() {
        return Err(Error::InvalidInput("empty input sequence".into()));
    }
    if !m.is_conjugate_symmetric() {
        return Err(Error::InvalidInput(
            "simulation requires a conjugate-symmetric model (real outputs)".into(),
        ));
    }
    let real = DiagonalRealization::from_model(m)?;
    let mut state = DVector::<C64>::zeros(real.order());
    let mut output = Vec::with_capacity(input.len());
    let scale = 1.0_f64.max(input.iter().fold(0.0_f64, |a, &b| a.max(b.abs())));
    for &u in input {
        let y = (&real.c_row * &state)[(0, 0)];
        if y.im.abs() > 1e-10 * scale {
            return Err(Error::Numerical(format!(
                "imaginary output residue {}",
                y.im
            )));
        }
        output.push(y.re);
        // x <- A x + B u
        state.zip_apply(&real.a_diag, |x, a| *x *= a);
        state.zip_apply(&real.b, |x, b| *x += b * u);
    }
    Ok(output)
}

/// Least-squares Markov parameters: fits `y[t] ~ sum_(j=1..K) g_j u[t-j]`
/// over every recorded output (inputs before time zero are zero because
/// the simulation starts at rest). Returns the minimum-norm solution when
/// the regression is underdetermined.
pub fn estimate_markov(input: &[f64], output: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    if input.len() != output.len() || output.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need matching nonempty sequences, got {} inputs and {} outputs",
            input.len(),
            output.len()
        )));
    }
    let rows = output.len();
    let design = DMatrix::<f64>::from_fn(rows, horizon, |t, j| {
        let lag = j + 1;
        if lag <= t && t - lag < input.len() {
            input[t - lag]
        } else {
            0.0
        }
    });
    let rhs = DVector::from_column_slice(output);
    let svd = design
        .try_svd_unordered(true, true, f64::EPSILON, 1000)
        .ok_or_else(|| Error::Numerical("SVD of the regression matrix failed".into()))?;
    let top = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let solution = svd
        .solve(&rhs, top * 1e-12)
        .map_err(|e| Error::Numerical(format!("least squares solve: {e}")))?;
    Ok(solution.iter().copied().collect())
}

/// Result of the subspace-identification comparator.
#[derive(Debug, Clone)]
pub struct HoKalmanEstimate {
    pub model: AtomicModel,
    /// Whether any recovered pole had to be clipped back inside the disk.
    pub poles_clipped: bool,
    /// Relative mismatch between the diagonal model and the balanced
    /// realization's Markov sequence; small unless `A` was defective.
    pub markov_fit_residual: f64,
}

/// Recovers an atomic model of the given order from Markov parameters
/// `g_1 .. g_(2T-1)` via Hankel factorization.
///
/// Fails with a numerical error when the recovered system matrix is not
/// diagonalizable within tolerance, in which case only state-space error
/// metrics are meaningful for the run.
pub fn ho_kalman(markov: &[f64], order: usize, t: usize) -> Result<HoKalmanEstimate> {
    if order == 0 {
        return Err(Error::InvalidInput("order must be >= 1".into()));
    }
    if t < order {
        return Err(Error::InvalidInput(format!(
            "Hankel size {t} must be at least the order {order}"
        )));
    }
    if markov.len() < 2 * t - 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} Markov parameters, got {}",
            2 * t - 1,
            markov.len()
        )));
    }

    let hankel = DMatrix::<f64>::from_fn(t, t, |j, k| markov[j + k]);
    let svd = hankel
        .try_svd_unordered(true, true, f64::EPSILON, 1000)
        .ok_or_else(|| Error::Numerical("Hankel SVD failed".into()))?;
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("finite singular values")
    });
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v");

    // balanced factors: observability O = U_r S^(1/2), controllability
    // Co = S^(1/2) V_r^T
    let mut obs = DMatrix::<f64>::zeros(t, order);
    let mut con = DMatrix::<f64>::zeros(order, t);
    for (r, &i) in idx.iter().take(order).enumerate() {
        let s_sqrt = svd.singular_values[i].max(0.0).sqrt();
        obs.set_column(r, &(u.column(i) * s_sqrt));
        con.set_row(r, &(vt.row(i) * s_sqrt));
    }

    // shift structure: O[1.., :] = O[..-1, :] A
    let upper = obs.rows(0, t - 1).into_owned();
    let lower = obs.rows(1, t - 1).into_owned();
    let upper_svd = upper
        .try_svd_unordered(true, true, f64::EPSILON, 1000)
        .ok_or_else(|| Error::Numerical("shift SVD failed".into()))?;
    let top = upper_svd
        .singular_values
        .iter()
        .copied()
        .fold(0.0_f64, f64::max);
    let a = upper_svd
        .solve(&lower, top * 1e-12)
        .map_err(|e| Error::Numerical(format!("shift solve: {e}")))?;
    let c_row = obs.row(0).into_owned();
    let b_col = con.column(0).into_owned();

    // poles from the eigenvalues, clipped radially into the disk
    let mut poles = a.complex_eigenvalues();
    let mut clipped = false;
    for lambda in poles.iter_mut() {
        let modulus = lambda.norm();
        if modulus > POLE_CLIP {
            *lambda *= POLE_CLIP / modulus;
            clipped = true;
        }
    }

    // reference Markov sequence of the balanced realization itself
    let horizon = (2 * t - 1).max(200);
    let mut reference = Vec::with_capacity(horizon);
    let mut state = b_col.clone();
    for _ in 0..horizon {
        reference.push((&c_row * &state)[(0, 0)]);
        state = &a * state;
    }

    // residues by least squares on the pole basis: exact iff A is
    // diagonalizable (up to the clip)
    let vander = DMatrix::<C64>::from_fn(horizon, order, |k, j| poles[j].powu(k as u32));
    let rhs = DVector::from_iterator(horizon, reference.iter().map(|&g| C64::new(g, 0.0)));
    let vander_svd = vander
        .clone()
        .try_svd_unordered(true, true, f64::EPSILON, 1000)
        .ok_or_else(|| Error::Numerical("pole-basis SVD failed".into()))?;
    let vtop = vander_svd
        .singular_values
        .iter()
        .copied()
        .fold(0.0_f64, f64::max);
    let residues = vander_svd
        .solve(&rhs, vtop * 1e-12)
        .map_err(|e| Error::Numerical(format!("residue solve: {e}")))?;
    let fit = (&vander * &residues - &rhs).norm();
    let scale = rhs.norm().max(f64::MIN_POSITIVE);
    let rel_residual = fit / scale;
    if rel_residual > DIAGONALIZABLE_TOL {
        return Err(Error::Numerical(format!(
            "system matrix is not diagonalizable within tolerance \
             (relative Markov mismatch {rel_residual:.3e})"
        )));
    }

    // symmetrize conjugate pairs exactly so the model is a real system
    let mut terms: Vec<(Pole, C64)> = Vec::with_capacity(order);
    let mut used = vec![false; order];
    for j in 0..order {
        if used[j] {
            continue;
        }
        used[j] = true;
        let lambda = poles[j];
        let coeff = residues[j] / (1.0 - lambda.norm_sqr());
        if lambda.im == 0.0 {
            terms.push((Pole::new(lambda)?, C64::new(coeff.re, 0.0)));
            continue;
        }
        match (j + 1..order).find(|&k| !used[k] && poles[k] == lambda.conj()) {
            Some(k) => {
                used[k] = true;
                let partner = residues[k] / (1.0 - poles[k].norm_sqr());
                let avg = (coeff + partner.conj()) * 0.5;
                terms.push((Pole::new(lambda)?, avg));
                terms.push((Pole::new(lambda.conj())?, avg.conj()));
            }
            None => {
                // eigenvalue pairing failed; keep the raw term
                terms.push((Pole::new(lambda)?, coeff));
            }
        }
    }
    let rho_model = terms
        .iter()
        .map(|(p, _)| p.modulus())
        .fold(0.0_f64, f64::max)
        .max(1e-6)
        .min(POLE_CLIP);
    let model = AtomicModel::new(terms, rho_model)?;
    Ok(HoKalmanEstimate {
        model,
        poles_clipped: clipped,
        markov_fit_residual: rel_residual,
    })
}

/// Default Markov horizon: all the data up to the decay horizon
/// `ceil(log 1e-8 / log rho)`.
pub fn markov_horizon(samples: usize, rho: f64) -> usize {
    samples.min(crate::atoms::decay_horizon(rho, 1e-8)).max(1)
}

/// Default Hankel size for a horizon of `k` Markov parameters:
/// the largest `T` with `2T - 1 <= k`.
pub fn baseline_hankel_size(k: usize) -> usize {
    ((k + 1) / 2).max(1)
}
