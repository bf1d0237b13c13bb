//! Exceptional points: parameter values `(f, g)` and a complex frequency at
//! which `det D(w)` has a double root, i.e. `det D = d/dw det D = 0`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dynamical_matrix, ComplexFreq, Coupling, OscillatorParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalPoint {
    pub omega: ComplexFreq,
    pub f: f64,
    pub g: f64,
    /// `max(|det D|, |det D'|)` at the returned point.
    pub residual: f64,
    /// Newton iterations used; zero for the closed form.
    pub iterations: usize,
}

impl ExceptionalPoint {
    pub fn coupling(&self) -> Coupling {
        Coupling {
            f: self.f,
            g: self.g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpResidual {
    pub det: Complex64,
    pub det_prime: Complex64,
}

impl EpResidual {
    pub fn max_norm(&self) -> f64 {
        self.det.norm().max(self.det_prime.norm())
    }

    fn components(&self) -> Vector4<f64> {
        Vector4::new(
            self.det.re,
            self.det.im,
            self.det_prime.re,
            self.det_prime.im,
        )
    }
}

/// `det D(w)` and its frequency derivative.
pub fn ep_residual(p: &OscillatorParams, c: &Coupling, omega: ComplexFreq) -> EpResidual {
    let i = Complex64::i();
    let d = dynamical_matrix(p, c, omega);
    let d11p = -2.0 * omega - 2.0 * i * (p.k1 + c.g);
    let d22p = -2.0 * omega - 2.0 * i * (p.k2 + c.g);
    let d12p = 2.0 * i * c.g;
    EpResidual {
        det: d.det(),
        det_prime: d11p * d.a22 + d.a11 * d22p - 2.0 * d.a12 * d12p,
    }
}

/// Closed-form exceptional point of two undamped oscillators.
pub fn analytic_ep(omega1: f64, omega2: f64) -> ExceptionalPoint {
    let a = omega1 * omega1;
    let b = omega2 * omega2;
    let norm = 1.0 / (2.0 * std::f64::consts::SQRT_2);
    let re = norm * ((3.0 * a + b) * (a + 3.0 * b) / (a + b)).sqrt();
    let im = -norm * (a - b).abs() / (a + b).sqrt();
    let g = -im;
    let f = (a - b) * (a - b) / (4.0 * (a + b));
    let omega = Complex64::new(re, im);
    let p = OscillatorParams {
        omega1,
        omega2,
        k1: 0.0,
        k2: 0.0,
    };
    let residual = ep_residual(&p, &Coupling { f, g }, omega).max_norm();
    ExceptionalPoint {
        omega,
        f,
        g,
        residual,
        iterations: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpGuess {
    pub f: f64,
    pub g: f64,
    pub omega: ComplexFreq,
}

impl From<&ExceptionalPoint> for EpGuess {
    fn from(ep: &ExceptionalPoint) -> Self {
        Self {
            f: ep.f,
            g: ep.g,
            omega: ep.omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Converged when the sup norm of `(det, det')` drops below this.
    pub tolerance: f64,
    /// Relative step of the central-difference Jacobian.
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-11,
            fd_step: 1e-7,
            max_halvings: 20,
        }
    }
}

pub fn numeric_ep(p: &OscillatorParams, guess: EpGuess) -> Result<ExceptionalPoint> {
    numeric_ep_with(p, guess, &NewtonOptions::default())
}

/// Newton iteration on `(Re det, Im det, Re det', Im det')` over the
/// unknowns `(f, g, Re w, Im w)`.
pub fn numeric_ep_with(
    p: &OscillatorParams,
    guess: EpGuess,
    opts: &NewtonOptions,
) -> Result<ExceptionalPoint> {
    let values = [guess.f, guess.g, guess.omega.re, guess.omega.im];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "exceptional point guess must be finite".into(),
        ));
    }
    let eval = |x: &Vector4<f64>| -> Vector4<f64> {
        ep_residual(
            p,
            &Coupling { f: x[0], g: x[1] },
            Complex64::new(x[2], x[3]),
        )
        .components()
    };

    let mut x = Vector4::from(values);
    let mut fx = eval(&x);
    let mut norm = fx.amax();
    for iteration in 0..=opts.max_iterations {
        if !norm.is_finite() {
            break;
        }
        if norm < opts.tolerance {
            return Ok(ExceptionalPoint {
                omega: Complex64::new(x[2], x[3]),
                f: x[0],
                g: x[1],
                residual: norm,
                iterations: iteration,
            });
        }
        if iteration == opts.max_iterations {
            break;
        }

        let mut jac = Matrix4::zeros();
        for j in 0..4 {
            let h = opts.fd_step * x[j].abs().max(1.0);
            let mut plus = x;
            let mut minus = x;
            plus[j] += h;
            minus[j] -= h;
            jac.set_column(j, &((eval(&plus) - eval(&minus)) / (2.0 * h)));
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) || svd.singular_values.min() <= 1e-13 * smax {
            return Err(Error::JacobianSingular);
        }
        let step = svd
            .solve(&(-fx), 0.0)
            .map_err(|_| Error::JacobianSingular)?;

        let mut scale = 1.0;
        let mut trial = x + step;
        let mut f_trial = eval(&trial);
        let mut halvings = 0;
        while !(f_trial.amax() < norm) && halvings < opts.max_halvings {
            scale *= 0.5;
            trial = x + step * scale;
            f_trial = eval(&trial);
            halvings += 1;
        }
        x = trial;
        fx = f_trial;
        norm = fx.amax();
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values_for_2_and_2_1() {
        let ep = analytic_ep(2.0, 2.1);
        // printed values, each within one unit of its last digit
        assert!((ep.f - 0.005).abs() < 1e-3);
        assert!((ep.g - 0.0499).abs() < 1e-4);
        assert!((ep.omega.re - 2.0500).abs() < 1e-4);
        assert!((ep.omega.im + 0.04999).abs() < 1e-5);
        assert_eq!(ep.g, -ep.omega.im);
        assert!(ep.residual < 1e-8);
    }

    #[test]
    fn degenerate_oscillators_give_trivial_ep() {
        let ep = analytic_ep(2.0, 2.0);
        assert_eq!(ep.f, 0.0);
        assert_eq!(ep.g, 0.0);
        assert!((ep.omega - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn closed_form_for_2_and_3() {
        let ep = analytic_ep(2.0, 3.0);
        assert!((ep.f - 25.0 / 52.0).abs() < 1e-15);
        assert!((ep.g - 0.490290337845460).abs() < 1e-12);
        assert!((ep.omega.re - 2.501922337846518).abs() < 1e-12);
        assert!(ep.residual < 1e-10);
    }

    #[test]
    fn uncoupled_simple_root() {
        let p = OscillatorParams::undamped(2.0, 2.1).unwrap();
        let r = ep_residual(&p, &Coupling::uncoupled(), Complex64::new(2.0, 0.0));
        assert_eq!(r.det, Complex64::new(0.0, 0.0));
        let expected = -2.0 * 2.0 * (2.1f64.powi(2) - 4.0);
        assert!((r.det_prime - Complex64::new(expected, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let p = OscillatorParams::new(2.0, 2.7, 0.03, 0.01).unwrap();
        let c = Coupling::new(0.2, 0.07).unwrap();
        for w in [
            Complex64::new(1.3, -0.2),
            Complex64::new(2.4, 0.1),
            Complex64::new(-0.7, -1.0),
        ] {
            let h = 1e-6;
            let fd = (ep_residual(&p, &c, w + h).det - ep_residual(&p, &c, w - h).det) / (2.0 * h);
            let an = ep_residual(&p, &c, w).det_prime;
            assert!(
                (fd - an).norm() <= 1e-6 * an.norm().max(1.0),
                "{fd} vs {an}"
            );
        }
    }

    #[test]
    fn newton_recovers_closed_form() {
        let ep = analytic_ep(2.0, 2.1);
        let p = OscillatorParams::undamped(2.0, 2.1).unwrap();
        let guess = EpGuess {
            f: ep.f * 1.01,
            g: ep.g * 1.01,
            omega: ep.omega * 1.01,
        };
        let found = numeric_ep(&p, guess).unwrap();
        assert!((found.f - ep.f).abs() < 1e-8);
        assert!((found.g - ep.g).abs() < 1e-8);
        assert!((found.omega - ep.omega).norm() < 1e-8);
        assert!(found.residual < 1e-11);
    }

    #[test]
    fn newton_damped_case() {
        let ep = analytic_ep(2.0, 2.1);
        let p = OscillatorParams::new(2.0, 2.1, 0.01, 0.01).unwrap();
        let found = numeric_ep(&p, EpGuess::from(&ep)).unwrap();
        let c = found.coupling();
        assert!(ep_residual(&p, &c, found.omega).components().amax() < 1e-11);
    }

    #[test]
    fn far_guess_lands_on_a_mirror_ep() {
        // det is polynomial, so Newton reaches one of the symmetric copies
        // (g -> -g, w -> -conj(w)) of the closed-form point
        let p = OscillatorParams::undamped(2.0, 2.1).unwrap();
        let guess = EpGuess {
            f: 100.0,
            g: 100.0,
            omega: Complex64::new(100.0, 100.0),
        };
        let ep = analytic_ep(2.0, 2.1);
        let found = numeric_ep(&p, guess).unwrap();
        assert!(found.residual < 1e-11);
        assert!((found.f - ep.f).abs() < 1e-8);
        assert!((found.g.abs() - ep.g).abs() < 1e-8);
        assert!((found.omega.re.abs() - ep.omega.re).abs() < 1e-8);
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let p = OscillatorParams::undamped(2.0, 2.1).unwrap();
        let guess = EpGuess {
            f: 100.0,
            g: 100.0,
            omega: Complex64::new(100.0, 100.0),
        };
        let opts = NewtonOptions {
            max_iterations: 3,
            ..NewtonOptions::default()
        };
        assert!(matches!(
            numeric_ep_with(&p, guess, &opts),
            Err(Error::NoConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn non_finite_guess_rejected() {
        let p = OscillatorParams::undamped(2.0, 2.1).unwrap();
        let guess = EpGuess {
            f: f64::NAN,
            g: 0.0,
            omega: Complex64::new(2.0, 0.0),
        };
        assert!(matches!(
            numeric_ep(&p, guess),
            Err(Error::InvalidParameter(_))
        ));
    }
}
