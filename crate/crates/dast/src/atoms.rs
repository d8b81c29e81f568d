//! Single-pole atoms and finite atomic models.
//!
//! An atom with pole `w` inside the unit disk is the transfer function
//! `phi_w(z) = (1 - |w|^2) / (z - w)`, normalized so that its Hankel
//! operator has unit norm. An [`AtomicModel`] is a finite linear
//! combination of atoms with complex coefficients; it represents both
//! ground-truth systems and recovered estimates.
//!
//! The H2 geometry of atoms is closed form: impulse responses are
//! geometric sequences and inner products are rational in the poles, so
//! model norms and errors never require quadrature.

use crate::{C64, Error, Result};
use serde::{Deserialize, Serialize};

/// Accept circle points whose floating-point modulus dips slightly below 1.
const Z_DOMAIN_TOL: f64 = 1e-12;

/// Poles closer than this are merged into a single term.
const POLE_MERGE_TOL: f64 = 1e-12;

/// Default tail tolerance for impulse-response truncation.
pub const DEFAULT_DECAY_TOL: f64 = 1e-9;

/// A pole strictly inside the unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole(C64);

impl Pole {
    /// Creates a pole, rejecting values on or outside the unit circle.
    pub fn new(value: C64) -> Result<Self> {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::InvalidInput("pole must be finite".into()));
        }
        if value.norm() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "pole modulus {} is not < 1",
                value.norm()
            )));
        }
        Ok(Pole(value))
    }

    pub fn value(&self) -> C64 {
        self.0
    }

    pub fn modulus(&self) -> f64 {
        self.0.norm()
    }

    pub fn conj(&self) -> Pole {
        Pole(self.0.conj())
    }

    pub fn is_real(&self) -> bool {
        self.0.im == 0.0
    }
}

/// A finite linear combination of single-pole atoms.
///
/// Terms are kept in insertion order; duplicate (and nearly duplicate)
/// poles are merged at construction by summing coefficients, which keeps
/// the H2 Gram matrix positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicModel {
    terms: Vec<(Pole, C64)>,
    rho: f64,
}

impl AtomicModel {
    /// Builds a model from (pole, coefficient) terms with stability radius `rho`.
    ///
    /// Every pole must satisfy `|w| <= rho` (up to a relative 1e-12 slack for
    /// poles constructed on the boundary ring in floating point). Terms whose
    /// coefficients cancel exactly during merging are dropped.
    pub fn new(terms: Vec<(Pole, C64)>, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidInput(format!(
                "stability radius {rho} must lie in (0, 1)"
            )));
        }
        let cap = rho * (1.0 + 1e-12);
        let mut merged: Vec<(Pole, C64)> = Vec::with_capacity(terms.len());
        for (pole, coeff) in terms {
            if pole.modulus() > cap {
                return Err(Error::InvalidInput(format!(
                    "pole modulus {} exceeds stability radius {rho}",
                    pole.modulus()
                )));
            }
            if !coeff.re.is_finite() || !coeff.im.is_finite() {
                return Err(Error::InvalidInput("coefficient must be finite".into()));
            }
            match merged
                .iter_mut()
                .find(|(p, _)| (p.value() - pole.value()).norm() < POLE_MERGE_TOL)
            {
                Some((_, c)) => *c += coeff,
                None => merged.push((pole, coeff)),
            }
        }
        merged.retain(|(_, c)| *c != C64::new(0.0, 0.0));
        Ok(AtomicModel { terms: merged, rho })
    }

    /// Builds a model that must represent a real system: terms closed under
    /// conjugation, with real coefficients at real poles.
    pub fn new_real_system(terms: Vec<(Pole, C64)>, rho: f64) -> Result<Self> {
        let model = Self::new(terms, rho)?;
        if !model.is_conjugate_symmetric() {
            return Err(Error::InvalidInput(
                "terms are not closed under conjugation".into(),
            ));
        }
        Ok(model)
    }

    pub fn empty(rho: f64) -> Result<Self> {
        Self::new(Vec::new(), rho)
    }

    pub fn terms(&self) -> &[(Pole, C64)] {
        &self.terms
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn degree(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Whether the model's transfer function is real on the real axis:
    /// complex-pole terms appear in conjugate pairs and real-pole
    /// coefficients are real. Pairing is checked exactly.
    pub fn is_conjugate_symmetric(&self) -> bool {
        self.terms.iter().all(|(pole, coeff)| {
            if pole.is_real() {
                coeff.im == 0.0
            } else {
                self.terms.iter().any(|(p, c)| {
                    p.value() == pole.value().conj() && *c == coeff.conj()
                })
            }
        })
    }

    /// Term-wise scaling by a complex factor.
    pub fn scaled(&self, factor: C64) -> AtomicModel {
        let terms = self
            .terms
            .iter()
            .map(|(p, c)| (*p, c * factor))
            .collect();
        AtomicModel::new(terms, self.rho).expect("scaling preserves validity")
    }

    /// Truncation length `K = ceil(log(tol)/log(rho))` after which the
    /// impulse-response tail of any atom in the model is below `tol`.
    pub fn decay_horizon(&self, tol: f64) -> usize {
        decay_horizon(self.rho, tol)
    }

    /// Impulse response `g_1..g_K` of the model.
    pub fn impulse_response(&self, len: usize) -> Vec<C64> {
        let mut g = vec![C64::new(0.0, 0.0); len];
        for (pole, coeff) in &self.terms {
            let a = pole.value();
            let mut power = C64::new(1.0, 0.0);
            let scale = coeff * (1.0 - a.norm_sqr());
            for gk in g.iter_mut() {
                *gk += scale * power;
                power *= a;
            }
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("model JSON: {e}")))
    }
}

/// Combines `c1 * m1 + c2 * m2` into a single model.
///
/// The stability radius of the result is the larger of the two inputs;
/// shared poles are merged, and exact cancellations drop out.
pub fn combined(m1: &AtomicModel, c1: C64, m2: &AtomicModel, c2: C64) -> AtomicModel {
    let rho = m1.rho().max(m2.rho());
    let mut terms: Vec<(Pole, C64)> = Vec::with_capacity(m1.degree() + m2.degree());
    terms.extend(m1.terms().iter().map(|(p, c)| (*p, c * c1)));
    terms.extend(m2.terms().iter().map(|(p, c)| (*p, c * c2)));
    AtomicModel::new(terms, rho).expect("terms already validated against max radius")
}

/// Evaluates the atom `phi_a(z) = (1 - |a|^2)/(z - a)` at a point on or
/// outside the unit circle.
///
/// Points with `|z|` within 1e-12 below 1 are accepted, since circle points
/// computed as `e^{i theta}` in floating point land on either side of the
/// circle.
pub fn eval_atom(a: Pole, z: C64) -> Result<C64> {
    if z.norm() < 1.0 - Z_DOMAIN_TOL {
        return Err(Error::InvalidInput(format!(
            "evaluation point modulus {} is inside the unit circle",
            z.norm()
        )));
    }
    let w = a.value();
    Ok((1.0 - w.norm_sqr()) / (z - w))
}

/// Impulse response `g_k = (1 - |a|^2) a^(k-1)` for `k = 1..=len`.
pub fn atom_impulse_response(a: Pole, len: usize) -> Vec<C64> {
    let w = a.value();
    let scale = C64::new(1.0 - w.norm_sqr(), 0.0);
    let mut g = Vec::with_capacity(len);
    let mut power = C64::new(1.0, 0.0);
    for _ in 0..len {
        g.push(scale * power);
        power *= w;
    }
    g
}

/// Evaluates a model at a point on or outside the unit circle.
pub fn eval_model(m: &AtomicModel, z: C64) -> Result<C64> {
    if z.norm() < 1.0 - Z_DOMAIN_TOL {
        return Err(Error::InvalidInput(format!(
            "evaluation point modulus {} is inside the unit circle",
            z.norm()
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (pole, coeff) in m.terms() {
        let w = pole.value();
        acc += coeff * (1.0 - w.norm_sqr()) / (z - w);
    }
    Ok(acc)
}

/// H2 inner product of two atoms:
/// `(1 - |a|^2)(1 - |b|^2) / (1 - a conj(b))`.
pub fn h2_inner(a: Pole, b: Pole) -> C64 {
    let (wa, wb) = (a.value(), b.value());
    let num = (1.0 - wa.norm_sqr()) * (1.0 - wb.norm_sqr());
    num / (C64::new(1.0, 0.0) - wa * wb.conj())
}

/// H2 norm of a model, computed exactly through the Gram matrix of its atoms.
///
/// Fails if the quadratic form comes out negative (or non-real) beyond
/// roundoff, which indicates nearly coincident poles that survived merging.
pub fn model_h2_norm(m: &AtomicModel) -> Result<f64> {
    let terms = m.terms();
    let mut q = C64::new(0.0, 0.0);
    for (pj, cj) in terms {
        for (pk, ck) in terms {
            q += cj * ck.conj() * h2_inner(*pj, *pk);
        }
    }
    let scale = 1.0_f64.max(terms.iter().map(|(_, c)| c.norm_sqr()).sum());
    if q.im.abs() > 1e-8 * scale || q.re < -1e-8 * scale {
        return Err(Error::Numerical(format!(
            "H2 Gram form is not positive semidefinite within tolerance (value {q})"
        )));
    }
    Ok(q.re.max(0.0).sqrt())
}

/// Total coefficient mass of a decomposition; an upper bound on the atomic
/// norm of the represented transfer function.
pub fn decomposition_weight(m: &AtomicModel) -> f64 {
    m.terms().iter().map(|(_, c)| c.norm()).sum()
}

/// Smallest `K` with `rho^K <= tol` (at least 1).
pub fn decay_horizon(rho: f64, tol: f64) -> usize {
    if rho <= 0.0 {
        return 1;
    }
    let k = (tol.ln() / rho.ln()).ceil();
    if k.is_finite() && k >= 1.0 {
        k as usize
    } else {
        1
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    re: f64,
    im: f64,
    cre: f64,
    cim: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    rho: f64,
    terms: Vec<TermRepr>,
}

impl Serialize for AtomicModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = ModelRepr {
            rho: self.rho,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| TermRepr {
                    re: p.value().re,
                    im: p.value().im,
                    cre: c.re,
                    cim: c.im,
                })
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AtomicModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ModelRepr::deserialize(deserializer)?;
        let terms = repr
            .terms
            .into_iter()
            .map(|t| Ok((Pole::new(C64::new(t.re, t.im))?, C64::new(t.cre, t.cim))))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        AtomicModel::new(terms, repr.rho).map_err(serde::de::Error::custom)
    }
}
