//! Coupled-oscillator data model: the frequency-domain dynamical matrix,
//! its Green's function and the channel cross sections derived from it.
//!
//! Two oscillators `x1`, `x2` with eigenfrequencies `omega1`, `omega2` and
//! damping rates `k1`, `k2` are joined by a spring `f` and a dashpot `g`:
//!
//! ```text
//! x1'' + 2 k1 x1' + omega1^2 x1 + f (x1 - x2) + 2 g (x1' - x2') = c1 e^{-i w t}
//! ```
//!
//! (and 1 <-> 2). The harmonic ansatz `x ~ e^{-i w t}` turns this into
//! `D(w) x = c` with the symmetric 2x2 matrix built by [`dynamical_matrix`].

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Complex frequency. Decaying resonances have a negative imaginary part.
pub type ComplexFreq = Complex64;

/// Inversion is refused when `|det|` falls below this fraction of the
/// magnitude of its two products.
pub const SINGULAR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub omega1: f64,
    pub omega2: f64,
    pub k1: f64,
    pub k2: f64,
}

impl OscillatorParams {
    pub fn new(omega1: f64, omega2: f64, k1: f64, k2: f64) -> Result<Self> {
        let ok = omega1.is_finite()
            && omega2.is_finite()
            && omega1 > 0.0
            && omega2 > 0.0
            && k1.is_finite()
            && k2.is_finite()
            && k1 >= 0.0
            && k2 >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "oscillators need omega > 0 and k >= 0, got omega1={omega1}, omega2={omega2}, k1={k1}, k2={k2}"
            )));
        }
        Ok(Self {
            omega1,
            omega2,
            k1,
            k2,
        })
    }

    pub fn undamped(omega1: f64, omega2: f64) -> Result<Self> {
        Self::new(omega1, omega2, 0.0, 0.0)
    }

    /// Relabel oscillator 1 as 2 and vice versa.
    pub fn swapped(&self) -> Self {
        Self {
            omega1: self.omega2,
            omega2: self.omega1,
            k1: self.k2,
            k2: self.k1,
        }
    }

    /// Frequency of the symmetric normal mode, `sqrt((omega1^2 + omega2^2) / 2)`.
    pub fn mean_frequency(&self) -> f64 {
        (0.5 * (self.omega1 * self.omega1 + self.omega2 * self.omega2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coupling {
    pub f: f64,
    pub g: f64,
}

impl Coupling {
    pub fn new(f: f64, g: f64) -> Result<Self> {
        if !(f.is_finite() && g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling must be finite, got f={f}, g={g}"
            )));
        }
        Ok(Self { f, g })
    }

    pub fn uncoupled() -> Self {
        Self { f: 0.0, g: 0.0 }
    }
}

/// Complex drive amplitudes of the two oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub c1: Complex64,
    pub c2: Complex64,
}

impl DriveConfig {
    pub fn new(c1: Complex64, c2: Complex64) -> Result<Self> {
        if c1.norm() == 0.0 && c2.norm() == 0.0 {
            return Err(Error::InvalidParameter(
                "drive amplitudes are both zero".into(),
            ));
        }
        Ok(Self { c1, c2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a11: Complex64,
    pub a12: Complex64,
    pub a21: Complex64,
    pub a22: Complex64,
}

impl Matrix2 {
    pub const fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn zeros() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self::new(zero, zero, zero, zero)
    }

    pub fn det(&self) -> Complex64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> Complex64 {
        self.a11 + self.a22
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.a11.norm_sqr() + self.a12.norm_sqr() + self.a21.norm_sqr() + self.a22.norm_sqr())
            .sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.a12 - self.a21).norm() <= tol * (1.0 + self.frobenius_norm())
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    /// `v^T A w` without conjugation.
    pub fn bilinear(&self, v: [Complex64; 2], w: [Complex64; 2]) -> Complex64 {
        let aw = self.apply(w);
        v[0] * aw[0] + v[1] * aw[1]
    }

    /// Cofactor inverse. `None` when the determinant is below
    /// [`SINGULAR_FLOOR`] relative to the products it is formed from.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        let magnitude = (self.a11 * self.a22).norm() + (self.a12 * self.a21).norm();
        if !det.is_finite() || det.norm() <= SINGULAR_FLOOR * magnitude.max(f64::MIN_POSITIVE) {
            return None;
        }
        let inv = det.inv();
        Some(Self::new(
            self.a22 * inv,
            -self.a12 * inv,
            -self.a21 * inv,
            self.a11 * inv,
        ))
    }
}

impl Add for Matrix2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }
}

impl Sub for Matrix2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }
}

impl Mul for Matrix2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

/// Which response is squared into a cross section.
///
/// `G11`..`G21` are matrix elements of the Green's function for unit drive.
/// `Anti` projects the Green's function on the antisymmetric normal mode
/// `(1, -1)/sqrt(2)`; its numerator vanishes at the symmetric-mode
/// frequency, which produces the transmission zero of a Fano profile.
/// `Effective` keeps only the two positive-frequency poles of `Anti`: the
/// reduced two-channel amplitude that is valid near an exceptional point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Channel {
    #[default]
    #[serde(rename = "11")]
    G11,
    #[serde(rename = "22")]
    G22,
    #[serde(rename = "12")]
    G12,
    #[serde(rename = "21")]
    G21,
    #[serde(rename = "anti")]
    Anti,
    #[serde(rename = "eff")]
    Effective,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::G11,
        Channel::G22,
        Channel::G12,
        Channel::G21,
        Channel::Anti,
        Channel::Effective,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Channel::G11 => "11",
            Channel::G22 => "22",
            Channel::G12 => "12",
            Channel::G21 => "21",
            Channel::Anti => "anti",
            Channel::Effective => "eff",
        }
    }

    /// Drive vector that excites this channel.
    pub fn drive(&self) -> DriveConfig {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Channel::G11 | Channel::G21 => DriveConfig { c1: one, c2: zero },
            Channel::G22 | Channel::G12 => DriveConfig { c1: zero, c2: one },
            Channel::Anti | Channel::Effective => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                DriveConfig { c1: h, c2: -h }
            }
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown channel '{s}' (expected 11, 22, 12, 21, anti or eff)"
                ))
            })
    }
}

/// `D(w)` for the coupled system.
pub fn dynamical_matrix(p: &OscillatorParams, c: &Coupling, omega: ComplexFreq) -> Matrix2 {
    let i = Complex64::i();
    let w2 = omega * omega;
    let d11 = p.omega1 * p.omega1 - w2 - 2.0 * i * omega * (p.k1 + c.g) + c.f;
    let d22 = p.omega2 * p.omega2 - w2 - 2.0 * i * omega * (p.k2 + c.g) + c.f;
    let d12 = -(c.f - 2.0 * i * omega * c.g);
    Matrix2::new(d11, d12, d12, d22)
}

/// `G(w) = D(w)^-1`.
pub fn green(p: &OscillatorParams, c: &Coupling, omega: ComplexFreq) -> Result<Matrix2> {
    dynamical_matrix(p, c, omega)
        .inverse()
        .ok_or(Error::SingularMatrix { omega })
}

/// Steady-state amplitudes `x = G c` for a drive `c`.
pub fn driven_response(
    p: &OscillatorParams,
    c: &Coupling,
    drive: &DriveConfig,
    omega: ComplexFreq,
) -> Result<[Complex64; 2]> {
    Ok(green(p, c, omega)?.apply([drive.c1, drive.c2]))
}

/// Antisymmetric-mode amplitude `u^T G u` with `u = (1, -1)/sqrt(2)`.
pub fn antisymmetric_amplitude(
    p: &OscillatorParams,
    c: &Coupling,
    omega: ComplexFreq,
) -> Result<Complex64> {
    let d = Channel::Anti.drive();
    let u = [d.c1, d.c2];
    Ok(green(p, c, omega)?.bilinear(u, u))
}

/// Reduced two-pole form of the antisymmetric amplitude,
///
/// ```text
/// T(w) = C (w - z) / ((w - p1) (w - p2))
/// ```
///
/// where `p1`, `p2` are the positive-frequency resonance poles, `z` the
/// positive-frequency zero of the antisymmetric numerator and `C` the
/// remaining (mirror pole) factor of the full amplitude frozen at `Re z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedAmplitude {
    pub zero: Complex64,
    pub poles: [Complex64; 2],
    pub norm: Complex64,
}

impl ReducedAmplitude {
    pub fn new(p: &OscillatorParams, c: &Coupling) -> Self {
        let roots = spectral::resonance_poles(p, c);
        // numerator of u^T G u is w0^2 - w^2 - i w (k1 + k2) = -(w - z+)(w - z-)
        let damping = p.k1 + p.k2;
        let w0sq = p.mean_frequency().powi(2);
        let disc = Complex64::new(4.0 * w0sq - damping * damping, 0.0).sqrt();
        let shift = Complex64::new(0.0, -0.5 * damping);
        let za = shift + 0.5 * disc;
        let zb = shift - 0.5 * disc;
        let (zero, mirror_zero) = if za.re >= zb.re { (za, zb) } else { (zb, za) };
        let reference = Complex64::new(zero.re, 0.0);
        let norm = -(reference - mirror_zero) / ((reference - roots[0]) * (reference - roots[1]));
        Self {
            zero,
            poles: [roots[2], roots[3]],
            norm,
        }
    }

    pub fn amplitude(&self, omega: ComplexFreq) -> Result<Complex64> {
        let den = (omega - self.poles[0]) * (omega - self.poles[1]);
        if den.norm() == 0.0 {
            return Err(Error::SingularMatrix { omega });
        }
        Ok(self.norm * (omega - self.zero) / den)
    }
}

/// Non-negative cross section `|T|^2` for a real frequency.
pub fn cross_section(
    p: &OscillatorParams,
    c: &Coupling,
    omega: f64,
    channel: Channel,
) -> Result<f64> {
    match channel {
        Channel::Effective => ReducedAmplitude::new(p, c)
            .amplitude(omega.into())
            .map(|t| t.norm_sqr()),
        _ => channel_amplitude(p, c, omega.into(), channel).map(|t| t.norm_sqr()),
    }
}

fn channel_amplitude(
    p: &OscillatorParams,
    c: &Coupling,
    omega: ComplexFreq,
    channel: Channel,
) -> Result<Complex64> {
    let g = green(p, c, omega)?;
    Ok(match channel {
        Channel::G11 => g.a11,
        Channel::G22 => g.a22,
        Channel::G12 => g.a12,
        Channel::G21 => g.a21,
        Channel::Anti => {
            let d = channel.drive();
            g.bilinear([d.c1, d.c2], [d.c1, d.c2])
        }
        Channel::Effective => unreachable!("reduced amplitude is evaluated separately"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: OscillatorParams,
    pub coupling: Coupling,
    pub drive: DriveConfig,
}

/// Sampled cross section on a strictly increasing real frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    energies: Vec<f64>,
    values: Vec<f64>,
    pub channel: Channel,
    pub provenance: Option<Provenance>,
}

impl SpectralCurve {
    pub fn new(energies: Vec<f64>, values: Vec<f64>, channel: Channel) -> Result<Self> {
        if energies.len() != values.len() {
            return Err(Error::InvalidCurve(format!(
                "{} energies but {} values",
                energies.len(),
                values.len()
            )));
        }
        if let Some(i) = energies.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidCurve(format!(
                "energies not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidCurve(format!(
                "non-finite energy at index {i}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidCurve(format!(
                "value at index {i} is negative or non-finite"
            )));
        }
        Ok(Self {
            energies,
            values,
            channel,
            provenance: None,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.energies
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Sub-curve with energies inside `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let (energies, values): (Vec<f64>, Vec<f64>) =
            self.points().filter(|(e, _)| *e >= lo && *e <= hi).unzip();
        if energies.is_empty() {
            return Err(Error::EmptyCurve);
        }
        Ok(Self {
            energies,
            values,
            channel: self.channel,
            provenance: self.provenance,
        })
    }

    /// Indices of strict interior local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
            .collect()
    }
}

/// Uniform inclusive grid of `points` samples on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || points < 2 {
        return Err(Error::InvalidWindow { lo, hi, points });
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    grid[points - 1] = hi;
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidWindow { lo, hi, points });
    }
    Ok(grid)
}

pub fn sample_curve(
    p: &OscillatorParams,
    c: &Coupling,
    window: (f64, f64),
    points: usize,
    channel: Channel,
) -> Result<SpectralCurve> {
    let energies = uniform_grid(window.0, window.1, points)?;
    let values = match channel {
        Channel::Effective => {
            let reduced = ReducedAmplitude::new(p, c);
            energies
                .iter()
                .map(|&e| reduced.amplitude(e.into()).map(|t| t.norm_sqr()))
                .collect::<Result<Vec<_>>>()?
        }
        _ => energies
            .iter()
            .map(|&e| cross_section(p, c, e, channel))
            .collect::<Result<Vec<_>>>()?,
    };
    let mut curve = SpectralCurve::new(energies, values, channel)?;
    curve.provenance = Some(Provenance {
        params: *p,
        coupling: *c,
        drive: channel.drive(),
    });
    Ok(curve)
}
