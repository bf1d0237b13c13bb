//! Beutler-Fano line shapes.
//!
//! Three families are provided: the single profile with scale and offset,
//! an additive pair of single profiles sharing one offset, and the form in
//! which a second resonance supplies an energy dependent asymmetry
//! parameter (with a background phase `delta`, and its `delta = pi`
//! simplification).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

/// `(E - E_R) / (Gamma / 2)`.
pub fn reduced_energy(energy: f64, e_r: f64, gamma: f64) -> f64 {
    2.0 * (energy - e_r) / gamma
}

/// `(eps + q)^2 / (eps^2 + 1)`.
pub fn beutler_fano(eps: f64, q: f64) -> f64 {
    (eps + q) * (eps + q) / (eps * eps + 1.0)
}

/// Inverse cotangent on the branch `(0, pi)`.
pub fn arccot(x: f64) -> f64 {
    FRAC_PI_2 - x.atan()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoSingleParams {
    pub e_r: f64,
    pub gamma: f64,
    pub q: f64,
    pub scale: f64,
    pub offset: f64,
}

impl FanoSingleParams {
    /// Same curve with `gamma > 0` and `scale >= 0`.
    ///
    /// `(gamma, q) -> (-gamma, -q)` leaves the profile unchanged, and a
    /// negative scale is absorbed by `q -> -1/q` through the identity
    /// `(eps + q)^2 + (q eps - 1)^2 = (1 + q^2)(eps^2 + 1)`.
    pub fn gauge_fixed(&self) -> Self {
        let mut p = *self;
        if p.gamma < 0.0 {
            p.gamma = -p.gamma;
            p.q = -p.q;
        }
        if p.scale < 0.0 && p.q != 0.0 {
            let q = p.q;
            p.offset += p.scale * (1.0 + q * q);
            p.scale = -p.scale * q * q;
            p.q = -1.0 / q;
        }
        p
    }
}

pub fn fano_single(energy: f64, p: &FanoSingleParams) -> f64 {
    p.offset + p.scale * beutler_fano(reduced_energy(energy, p.e_r, p.gamma), p.q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoDoubleParams {
    /// Its `offset` is ignored.
    pub first: FanoSingleParams,
    /// Its `offset` is ignored.
    pub second: FanoSingleParams,
    pub offset: f64,
}

impl FanoDoubleParams {
    /// Gauge-fix both profiles, move their offsets into the shared one and
    /// order them by resonance energy.
    pub fn gauge_fixed(&self) -> Self {
        let mut offset = self.offset;
        let mut fix = |s: &FanoSingleParams| {
            let g = FanoSingleParams { offset: 0.0, ..*s }.gauge_fixed();
            offset += g.offset;
            FanoSingleParams { offset: 0.0, ..g }
        };
        let a = fix(&self.first);
        let b = fix(&self.second);
        let (first, second) = if a.e_r <= b.e_r { (a, b) } else { (b, a) };
        Self {
            first,
            second,
            offset,
        }
    }
}

pub fn fano_double(energy: f64, p: &FanoDoubleParams) -> f64 {
    let part =
        |s: &FanoSingleParams| s.scale * beutler_fano(reduced_energy(energy, s.e_r, s.gamma), s.q);
    p.offset + part(&p.first) + part(&p.second)
}

/// Parameters of the energy dependent family. Widths may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoEnergyDepParams {
    pub e1: f64,
    pub gamma1: f64,
    pub e2: f64,
    pub gamma2: f64,
    pub delta: f64,
    pub scale: f64,
}

impl FanoEnergyDepParams {
    /// Order the two resonances by energy. The simplified form is symmetric
    /// under the exchange; the full form is not, so only use this for it.
    pub fn ordered(&self) -> Self {
        if self.e1 <= self.e2 {
            *self
        } else {
            Self {
                e1: self.e2,
                gamma1: self.gamma2,
                e2: self.e1,
                gamma2: self.gamma1,
                ..*self
            }
        }
    }
}

/// `eta(E) = delta - arccot(eps2)`.
pub fn phase_eta(energy: f64, p: &FanoEnergyDepParams) -> f64 {
    p.delta - arccot(reduced_energy(energy, p.e2, p.gamma2))
}

/// `q(E) = -cot(eta(E))`.
pub fn energy_dependent_q(energy: f64, p: &FanoEnergyDepParams) -> f64 {
    let eta = phase_eta(energy, p);
    -eta.cos() / eta.sin()
}

/// `scale * 4 sin^2(eta) (eps1 + q)^2 / (eps1^2 + 1)`, evaluated as
/// `4 (eps1 sin(eta) - cos(eta))^2 / (eps1^2 + 1)` so that `sin(eta) = 0`
/// needs no special case.
pub fn fano_energy_dependent(energy: f64, p: &FanoEnergyDepParams) -> f64 {
    let eps1 = reduced_energy(energy, p.e1, p.gamma1);
    let eps2 = reduced_energy(energy, p.e2, p.gamma2);
    // arccot(eps2) = theta with sin(theta) = 1/r, cos(theta) = eps2/r
    let r = eps2.hypot(1.0);
    let (sd, cd) = p.delta.sin_cos();
    let sin = (sd * eps2 - cd) / r;
    let cos = (cd * eps2 + sd) / r;
    let num = eps1 * sin - cos;
    p.scale * 4.0 * num * num / (eps1 * eps1 + 1.0)
}

/// `scale * (eps1 + eps2)^2 / ((eps1^2 + 1)(eps2^2 + 1))`; `delta` is ignored.
pub fn fano_simplified(energy: f64, p: &FanoEnergyDepParams) -> f64 {
    let eps1 = reduced_energy(energy, p.e1, p.gamma1);
    let eps2 = reduced_energy(energy, p.e2, p.gamma2);
    let sum = eps1 + eps2;
    p.scale * sum * sum / ((eps1 * eps1 + 1.0) * (eps2 * eps2 + 1.0))
}

/// Background phase at which the energy dependent form reduces to
/// four times the simplified one.
pub const NO_BACKGROUND_PHASE: f64 = PI;
