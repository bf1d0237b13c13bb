//! Characteristic quartic, resonance poles and contour residues of the
//! Green's function.

use nalgebra::{Matrix4, Matrix5, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dynamical_matrix, green, ComplexFreq, Coupling, Matrix2, OscillatorParams};

/// `c0 + c1 w + c2 w^2 + c3 w^3 + c4 w^4`, coefficients low to high.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticPoly {
    pub coeffs: [Complex64; 5],
}

impl QuarticPoly {
    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
    }

    pub fn eval_derivative(&self, w: Complex64) -> Complex64 {
        let c = &self.coeffs;
        ((4.0 * c[4] * w + 3.0 * c[3]) * w + 2.0 * c[2]) * w + c[1]
    }

    /// Scale for the root residual bound, `1 + |w|^4`.
    pub fn residual_scale(w: Complex64) -> f64 {
        1.0 + w.norm().powi(4)
    }
}

/// Coefficients of `det D(w)` by interpolation at five real nodes.
pub fn char_poly(p: &OscillatorParams, c: &Coupling) -> QuarticPoly {
    let s = p.omega1.max(p.omega2);
    let nodes = [0.0, s, -s, 2.0 * s, -2.0 * s];
    let vander = Matrix5::from_fn(|i, j| nodes[i].powi(j as i32));
    let dets: Vec<Complex64> = nodes
        .iter()
        .map(|&x| dynamical_matrix(p, c, Complex64::new(x, 0.0)).det())
        .collect();
    let lu = vander.lu();
    let re = lu
        .solve(&Vector5::from_iterator(dets.iter().map(|d| d.re)))
        .expect("Vandermonde nodes are distinct");
    let im = lu
        .solve(&Vector5::from_iterator(dets.iter().map(|d| d.im)))
        .expect("Vandermonde nodes are distinct");
    let lead = Complex64::new(re[4], im[4]);
    let mut coeffs = [Complex64::new(0.0, 0.0); 5];
    for (k, coeff) in coeffs.iter_mut().enumerate() {
        *coeff = Complex64::new(re[k], im[k]) / lead;
    }
    coeffs[4] = Complex64::new(1.0, 0.0);
    QuarticPoly { coeffs }
}

/// The four roots of `det D(w)`, sorted by real part then imaginary part.
pub fn resonance_poles(p: &OscillatorParams, c: &Coupling) -> [ComplexFreq; 4] {
    quartic_roots(&char_poly(p, c))
}

/// Roots of a monic quartic: companion-matrix eigenvalues followed by a
/// Newton polish on the undeflated polynomial.
pub fn quartic_roots(poly: &QuarticPoly) -> [Complex64; 4] {
    let c = &poly.coeffs;
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let companion = Matrix4::from_fn(|i, j| {
        if j == 3 {
            -c[i] / c[4]
        } else if i == j + 1 {
            one
        } else {
            zero
        }
    });
    let mut roots = match companion.eigenvalues() {
        Some(ev) if ev.iter().all(|z| z.is_finite()) => [ev[0], ev[1], ev[2], ev[3]],
        _ => durand_kerner(poly),
    };
    for r in roots.iter_mut() {
        *r = newton_polish(poly, *r, 100);
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

fn newton_polish(poly: &QuarticPoly, mut r: Complex64, iterations: usize) -> Complex64 {
    let mut value = poly.eval(r).norm();
    for _ in 0..iterations {
        if value == 0.0 {
            break;
        }
        let d = poly.eval_derivative(r);
        if d.norm() == 0.0 {
            break;
        }
        let next = r - poly.eval(r) / d;
        let next_value = poly.eval(next).norm();
        if !(next_value < value) {
            break;
        }
        r = next;
        value = next_value;
    }
    r
}

fn durand_kerner(poly: &QuarticPoly) -> [Complex64; 4] {
    let c = &poly.coeffs;
    let radius = 1.0 + c[..4].iter().map(|z| (z / c[4]).norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: [Complex64; 4] = std::array::from_fn(|k| radius * seed.powu(k as u32));
    for _ in 0..500 {
        let prev = z;
        for k in 0..4 {
            let mut den = c[4];
            for j in 0..4 {
                if j != k {
                    den *= z[k] - z[j];
                }
            }
            if den.norm() > 0.0 {
                z[k] -= poly.eval(z[k]) / den;
            }
        }
        if z.iter()
            .zip(prev.iter())
            .all(|(a, b)| (a - b).norm() <= 1e-15 * (1.0 + a.norm()))
        {
            break;
        }
    }
    z
}

/// Coefficients of the first- and second-order poles of `G` at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidueDecomposition {
    pub center: ComplexFreq,
    /// Multiplies `1/(w - center)`.
    pub r1: Matrix2,
    /// Multiplies `1/(w - center)^2`.
    pub r2: Matrix2,
    pub radius: f64,
    pub nodes: usize,
}

impl ResidueDecomposition {
    /// `|det R2| / ||R2||_F^2`; zero for a rank-one double-pole coefficient.
    pub fn rank_one_measure(&self) -> f64 {
        let n = self.r2.frobenius_norm();
        if n == 0.0 {
            return 0.0;
        }
        self.r2.det().norm() / (n * n)
    }
}

pub const DEFAULT_RESIDUE_RADIUS: f64 = 1e-3;
pub const DEFAULT_RESIDUE_NODES: usize = 64;

/// Trapezoidal contour integrals of `G` and `(w - center) G` on a circle.
///
/// Poles closer than `radius / 2` count as enclosed; any pole between
/// `radius / 2` and `2 radius` from the center is rejected.
pub fn double_pole_residues(
    p: &OscillatorParams,
    c: &Coupling,
    center: ComplexFreq,
    radius: f64,
    nodes: usize,
) -> Result<ResidueDecomposition> {
    if !(radius > 0.0 && radius.is_finite()) || nodes < 4 {
        return Err(Error::InvalidParameter(format!(
            "contour needs radius > 0 and >= 4 nodes, got {radius}, {nodes}"
        )));
    }
    for pole in resonance_poles(p, c) {
        let distance = (pole - center).norm();
        if distance >= 0.5 * radius && distance < 2.0 * radius {
            return Err(Error::PoleTooClose { distance, radius });
        }
    }
    let mut r1 = Matrix2::zeros();
    let mut r2 = Matrix2::zeros();
    for j in 0..nodes {
        let phase = Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / nodes as f64);
        let g = green(p, c, center + radius * phase)?;
        r1 = r1 + g.scale(phase);
        r2 = r2 + g.scale(phase * phase);
    }
    let w1 = Complex64::new(radius / nodes as f64, 0.0);
    let w2 = Complex64::new(radius * radius / nodes as f64, 0.0);
    Ok(ResidueDecomposition {
        center,
        r1: r1.scale(w1),
        r2: r2.scale(w2),
        radius,
        nodes,
    })
}
