//! Covering grids of the stability disk.
//!
//! An [`EpsilonNet`] is a finite set of candidate poles such that every
//! point of the closed disk of radius `rho` lies within `eps` of some net
//! point. Nets are built from concentric polar rings with radial and arc
//! spacing both at most `eps / sqrt(2)`, which certifies the covering
//! radius by construction: the nearest ring is within half the radial
//! spacing and the nearest point on that ring within half the arc
//! spacing, so the total distance is at most `eps/(2 sqrt 2)` twice over.
//!
//! Rings are emitted mirror-symmetrically about the real axis, so the
//! point set is closed under complex conjugation bit-for-bit and real
//! systems are representable symmetrically. The ring at radius exactly
//! `rho` is always present, making boundary poles representable.

use crate::{C64, Error, Pole, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

/// Default cap on the number of net points.
pub const DEFAULT_POINT_CAP: usize = 1_000_000;

/// A finite covering grid of the disk of radius `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonNet {
    rho: f64,
    eps: f64,
    points: Vec<Pole>,
    covering_certified: bool,
}

impl EpsilonNet {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn points(&self) -> &[Pole] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether the covering radius is guaranteed by the construction
    /// geometry. Deserialized nets are not certified.
    pub fn covering_certified(&self) -> bool {
        self.covering_certified
    }

    /// For each point index, the index holding its complex conjugate.
    /// Real-axis points map to themselves. Exact bit-level pairing.
    pub fn conjugate_pairing(&self) -> Vec<usize> {
        let lookup: HashMap<(u64, u64), usize> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p.value().re.to_bits(), p.value().im.to_bits()), i))
            .collect();
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let key = (p.value().re.to_bits(), (-p.value().im).to_bits());
                *lookup.get(&key).unwrap_or(&i)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("net serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("net JSON: {e}")))
    }
}

/// Builds a certified net with the default point cap.
pub fn build_net(rho: f64, eps: f64) -> Result<EpsilonNet> {
    build_net_capped(rho, eps, DEFAULT_POINT_CAP)
}

/// Builds a certified net, failing if more than `cap` points would be needed.
pub fn build_net_capped(rho: f64, eps: f64, cap: usize) -> Result<EpsilonNet> {
    validate_rho_eps(rho, eps)?;
    let predicted = predicted_size(rho, eps);
    if predicted > cap {
        return Err(Error::SizeLimit(format!(
            "net for rho={rho}, eps={eps} needs {predicted} points (cap {cap})"
        )));
    }
    let mut points = Vec::with_capacity(predicted);
    points.push(Pole::new(C64::new(0.0, 0.0))?);
    if eps < rho {
        let (rings, dr, spacing) = ring_layout(rho, eps);
        for m in 1..=rings {
            let r = if m == rings { rho } else { m as f64 * dr };
            let count = ring_point_count(r, spacing);
            push_symmetric_ring(&mut points, r, count)?;
        }
    }
    Ok(EpsilonNet {
        rho,
        eps,
        points,
        covering_certified: true,
    })
}

/// Number of points `build_net` would produce, without building them.
pub fn predicted_size(rho: f64, eps: f64) -> usize {
    if eps >= rho {
        return 1;
    }
    let (rings, dr, spacing) = ring_layout(rho, eps);
    let mut total = 1usize;
    for m in 1..=rings {
        let r = if m == rings { rho } else { m as f64 * dr };
        total += ring_point_count(r, spacing);
    }
    total
}

fn validate_rho_eps(rho: f64, eps: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidInput(format!("rho {rho} must lie in (0, 1)")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps {eps} must be positive")));
    }
    Ok(())
}

fn ring_layout(rho: f64, eps: f64) -> (usize, f64, f64) {
    let spacing = eps / std::f64::consts::SQRT_2;
    let rings = (rho / spacing).ceil() as usize;
    let dr = rho / rings as f64;
    (rings, dr, spacing)
}

fn ring_point_count(r: f64, spacing: f64) -> usize {
    ((TAU * r / spacing).ceil() as usize).max(1)
}

/// Emits `count` equally spaced points on the radius-`r` circle so that the
/// set is exactly closed under conjugation: the real-axis points are written
/// with imaginary part literally zero and off-axis points as explicit
/// conjugate pairs.
fn push_symmetric_ring(points: &mut Vec<Pole>, r: f64, count: usize) -> Result<()> {
    points.push(Pole::new(C64::new(r, 0.0))?);
    let half = (count - 1) / 2;
    for j in 1..=half {
        let theta = TAU * j as f64 / count as f64;
        let p = C64::new(r * theta.cos(), r * theta.sin());
        points.push(Pole::new(p)?);
        points.push(Pole::new(p.conj())?);
    }
    if count % 2 == 0 {
        points.push(Pole::new(C64::new(-r, 0.0))?);
    }
    Ok(())
}

/// Grid resolution from the error-bound parameter:
/// `eps = pi (1 - rho) delta / (16 rho)`.
pub fn eps_from_delta(delta: f64, rho: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta {delta} must lie in (0, 1)")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidInput(format!("rho {rho} must lie in (0, 1)")));
    }
    Ok(PI * (1.0 - rho) * delta / (16.0 * rho))
}

/// Guaranteed lower equivalence constant between the discretized and exact
/// induced norms: `max(0, 1 - 16 rho eps / (pi (1 - rho)))`.
pub fn covering_constant(rho: f64, eps: f64) -> f64 {
    (1.0 - 16.0 * rho * eps / (PI * (1.0 - rho))).max(0.0)
}

/// Volume-argument upper bound on the size of a maximal packing,
/// `1024 rho^4 / (pi^2 (1-rho)^2 delta^2)`. Reported as a diagnostic next
/// to actual net cardinalities; the constructive net is not a packing, so
/// this is never asserted against `len()`.
pub fn packing_bound(rho: f64, delta: f64) -> f64 {
    1024.0 * rho.powi(4) / (PI * PI * (1.0 - rho).powi(2) * delta * delta)
}

/// Finds an `eps` whose net cardinality is as close as possible to `target`.
///
/// Cardinality is monotone in `eps`, so this is a bisection on
/// [`predicted_size`]. The covering certificate holds for whatever `eps`
/// is returned.
pub fn eps_for_target_size(rho: f64, target: usize) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidInput(format!("rho {rho} must lie in (0, 1)")));
    }
    if target == 0 {
        return Err(Error::InvalidInput("target size must be positive".into()));
    }
    let mut lo = 1e-4 * rho; // size(lo) is huge
    let mut hi = rho; // size(hi) == 1
    if predicted_size(rho, lo) < target {
        lo = 1e-6 * rho;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if predicted_size(rho, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (slo, shi) = (predicted_size(rho, lo), predicted_size(rho, hi));
    Ok(if slo.abs_diff(target) <= shi.abs_diff(target) {
        lo
    } else {
        hi
    })
}

/// Monte-Carlo estimate of the covering radius: the maximum over uniform
/// random disk samples of the distance to the nearest net point.
///
/// The sample stream is drawn sequentially from the seed, then distances
/// are evaluated in parallel, so the result does not depend on thread count.
pub fn covering_radius_estimate(net: &EpsilonNet, n_samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<C64> = (0..n_samples.max(1))
        .map(|_| {
            let r = net.rho * rng.random::<f64>().sqrt();
            let theta = TAU * rng.random::<f64>();
            C64::from_polar(r, theta)
        })
        .collect();
    samples
        .par_iter()
        .map(|w| {
            net.points
                .iter()
                .map(|p| (w - p.value()).norm_sqr())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

#[derive(Serialize, Deserialize)]
struct PointRepr {
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct NetRepr {
    rho: f64,
    eps: f64,
    points: Vec<PointRepr>,
}

impl Serialize for EpsilonNet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = NetRepr {
            rho: self.rho,
            eps: self.eps,
            points: self
                .points
                .iter()
                .map(|p| PointRepr {
                    re: p.value().re,
                    im: p.value().im,
                })
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EpsilonNet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = NetRepr::deserialize(deserializer)?;
        validate_rho_eps(repr.rho, repr.eps).map_err(serde::de::Error::custom)?;
        let points = repr
            .points
            .into_iter()
            .map(|p| Pole::new(C64::new(p.re, p.im)))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Ok(EpsilonNet {
            rho: repr.rho,
            eps: repr.eps,
            points,
            // covering cannot be certified for points of unknown provenance
            covering_certified: false,
        })
    }
}
