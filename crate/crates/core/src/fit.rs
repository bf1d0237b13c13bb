//! Levenberg-Marquardt least squares for the Fano families, with
//! pole-seeded initial guesses and seeded multistart.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fano::{
    fano_double, fano_energy_dependent, fano_simplified, fano_single, FanoDoubleParams,
    FanoEnergyDepParams, FanoSingleParams,
};
use crate::model::SpectralCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Single,
    Double,
    EnergyDep,
    Simplified,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Single,
        ModelKind::Double,
        ModelKind::EnergyDep,
        ModelKind::Simplified,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Single => "single",
            ModelKind::Double => "double",
            ModelKind::EnergyDep => "energy-dep",
            ModelKind::Simplified => "simplified",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FanoParams {
    Single(FanoSingleParams),
    Double(FanoDoubleParams),
    EnergyDep(FanoEnergyDepParams),
    /// `delta` is carried along but never used.
    Simplified(FanoEnergyDepParams),
}

impl FanoParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            FanoParams::Single(_) => ModelKind::Single,
            FanoParams::Double(_) => ModelKind::Double,
            FanoParams::EnergyDep(_) => ModelKind::EnergyDep,
            FanoParams::Simplified(_) => ModelKind::Simplified,
        }
    }

    pub fn eval(&self, energy: f64) -> f64 {
        match self {
            FanoParams::Single(p) => fano_single(energy, p),
            FanoParams::Double(p) => fano_double(energy, p),
            FanoParams::EnergyDep(p) => fano_energy_dependent(energy, p),
            FanoParams::Simplified(p) => fano_simplified(energy, p),
        }
    }

    /// All parameters in a fixed order, see [`FanoParams::names`].
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            FanoParams::Single(p) => vec![p.e_r, p.gamma, p.q, p.scale, p.offset],
            FanoParams::Double(p) => vec![
                p.first.e_r,
                p.first.gamma,
                p.first.q,
                p.first.scale,
                p.second.e_r,
                p.second.gamma,
                p.second.q,
                p.second.scale,
                p.offset,
            ],
            FanoParams::EnergyDep(p) => vec![p.e1, p.gamma1, p.e2, p.gamma2, p.delta, p.scale],
            FanoParams::Simplified(p) => vec![p.e1, p.gamma1, p.e2, p.gamma2, p.scale],
        }
    }

    pub fn from_vec(kind: ModelKind, v: &[f64]) -> Self {
        match kind {
            ModelKind::Single => FanoParams::Single(FanoSingleParams {
                e_r: v[0],
                gamma: v[1],
                q: v[2],
                scale: v[3],
                offset: v[4],
            }),
            ModelKind::Double => FanoParams::Double(FanoDoubleParams {
                first: FanoSingleParams {
                    e_r: v[0],
                    gamma: v[1],
                    q: v[2],
                    scale: v[3],
                    offset: 0.0,
                },
                second: FanoSingleParams {
                    e_r: v[4],
                    gamma: v[5],
                    q: v[6],
                    scale: v[7],
                    offset: 0.0,
                },
                offset: v[8],
            }),
            ModelKind::EnergyDep => FanoParams::EnergyDep(FanoEnergyDepParams {
                e1: v[0],
                gamma1: v[1],
                e2: v[2],
                gamma2: v[3],
                delta: v[4],
                scale: v[5],
            }),
            ModelKind::Simplified => FanoParams::Simplified(FanoEnergyDepParams {
                e1: v[0],
                gamma1: v[1],
                e2: v[2],
                gamma2: v[3],
                delta: PI,
                scale: v[4],
            }),
        }
    }

    pub fn names(kind: ModelKind) -> &'static [&'static str] {
        match kind {
            ModelKind::Single => &["e_r", "gamma", "q", "scale", "offset"],
            ModelKind::Double => &[
                "e1", "gamma1", "q1", "scale1", "e2", "gamma2", "q2", "scale2", "offset",
            ],
            ModelKind::EnergyDep => &["e1", "gamma1", "e2", "gamma2", "delta", "scale"],
            ModelKind::Simplified => &["e1", "gamma1", "e2", "gamma2", "scale"],
        }
    }

    /// `(energy index, width index)` of every resonance.
    fn resonances(kind: ModelKind) -> &'static [(usize, usize)] {
        match kind {
            ModelKind::Single => &[(0, 1)],
            ModelKind::Double => &[(0, 1), (4, 5)],
            ModelKind::EnergyDep | ModelKind::Simplified => &[(0, 1), (2, 3)],
        }
    }

    /// Canonical representative of the family's exact symmetries:
    /// positive widths and scales for the single and double profiles,
    /// resonances ordered by energy for the pairs, a positive first width
    /// for the energy dependent forms and `delta` in `[pi/2, 3pi/2)`.
    pub fn gauge_fixed(&self) -> Self {
        match self {
            FanoParams::Single(p) => FanoParams::Single(p.gauge_fixed()),
            FanoParams::Double(p) => FanoParams::Double(p.gauge_fixed()),
            FanoParams::EnergyDep(p) | FanoParams::Simplified(p) => {
                let mut g = p.ordered();
                // (gamma1, gamma2, delta) -> (-gamma1, -gamma2, -delta) is a symmetry
                if g.gamma1 < 0.0 {
                    g.gamma1 = -g.gamma1;
                    g.gamma2 = -g.gamma2;
                    g.delta = -g.delta;
                }
                if let FanoParams::Simplified(_) = self {
                    g.delta = PI;
                    FanoParams::Simplified(g)
                } else {
                    // delta only enters through sin^2, so it is defined mod pi
                    g.delta = (g.delta - 0.5 * PI).rem_euclid(PI) + 0.5 * PI;
                    FanoParams::EnergyDep(g)
                }
            }
        }
    }

    fn widths_nonzero(&self) -> bool {
        let v = self.to_vec();
        Self::resonances(self.kind())
            .iter()
            .all(|&(_, w)| v[w] != 0.0 && v[w].is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub cost_tolerance: f64,
    pub param_tolerance: f64,
    pub fd_step: f64,
    pub multistart: usize,
    pub seed: u64,
    /// Keep `delta` of the energy dependent family at its initial value.
    pub hold_delta: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            cost_tolerance: 1e-12,
            param_tolerance: 1e-10,
            fd_step: 1e-7,
            multistart: 8,
            seed: 0,
            hold_delta: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub params: FanoParams,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Names of the free parameters, in the order of `sensitivities`.
    pub free_parameters: Vec<String>,
    /// Standard-error estimates from the final finite-difference Jacobian;
    /// `None` where the normal matrix is singular.
    pub sensitivities: Vec<Option<f64>>,
    /// Sum of squared residuals after every accepted step, starting with the
    /// initial point.
    #[serde(skip_serializing, default)]
    pub cost_history: Vec<f64>,
}

/// Free-parameter view of a family: which entries of the full vector move.
struct Problem<'a> {
    kind: ModelKind,
    template: Vec<f64>,
    free: Vec<usize>,
    energies: &'a [f64],
    values: &'a [f64],
}

impl<'a> Problem<'a> {
    fn new(curve: &'a SpectralCurve, init: &FanoParams, hold_delta: bool) -> Self {
        let kind = init.kind();
        let template = init.to_vec();
        let free = (0..template.len())
            .filter(|&i| !(hold_delta && kind == ModelKind::EnergyDep && i == 4))
            .collect();
        Self {
            kind,
            template,
            free,
            energies: curve.energies(),
            values: curve.values(),
        }
    }

    fn params(&self, x: &DVector<f64>) -> FanoParams {
        let mut full = self.template.clone();
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = x[k];
        }
        FanoParams::from_vec(self.kind, &full)
    }

    fn start(&self) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| self.template[i]))
    }

    /// Residuals `model - data`, or `None` if the point is not admissible.
    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let p = self.params(x);
        if !p.widths_nonzero() {
            return None;
        }
        let r = DVector::from_iterator(
            self.energies.len(),
            self.energies
                .iter()
                .zip(self.values)
                .map(|(&e, &y)| p.eval(e) - y),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self, x: &DVector<f64>, fd_step: f64) -> Option<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.energies.len(), x.len());
        for j in 0..x.len() {
            let h = fd_step * if x[j] != 0.0 { x[j].abs() } else { 1.0 };
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[j] += h;
            minus[j] -= h;
            let col = (self.residuals(&plus)? - self.residuals(&minus)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        Some(jac)
    }
}

/// Central-difference Jacobian of the residuals at `params` for the free
/// parameters of its family.
pub fn residual_jacobian(
    curve: &SpectralCurve,
    params: &FanoParams,
    fd_step: f64,
) -> Option<DMatrix<f64>> {
    let problem = Problem::new(curve, params, false);
    problem.jacobian(&problem.start(), fd_step)
}

fn check_init(curve: &SpectralCurve, init: &FanoParams, free: usize) -> Result<()> {
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if curve.len() < free + 1 {
        return Err(Error::InsufficientData {
            points: curve.len(),
            parameters: free,
        });
    }
    let v = init.to_vec();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "initial parameters must be finite".into(),
        ));
    }
    if !init.widths_nonzero() {
        return Err(Error::DegenerateInit);
    }
    Ok(())
}

/// Levenberg-Marquardt minimization of the summed squared residuals,
/// starting at `init`.
pub fn fit(curve: &SpectralCurve, init: &FanoParams, opts: &FitOptions) -> Result<FitResult> {
    let problem = Problem::new(curve, init, opts.hold_delta);
    check_init(curve, init, problem.free.len())?;

    let mut x = problem.start();
    let mut r = problem.residuals(&x).ok_or(Error::NonFinite)?;
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = opts.lambda0;
    let mut iterations = 0;
    let mut converged = false;
    let mut jac = problem.jacobian(&x, opts.fd_step).ok_or(Error::NonFinite)?;

    'outer: while iterations < opts.max_iterations {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let gradient = &jt * &r;
        let diag_floor = 1e-15 * normal.diagonal().max().max(f64::MIN_POSITIVE);

        loop {
            iterations += 1;
            let mut damped = normal.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * normal[(i, i)].max(diag_floor);
            }
            let step = damped.cholesky().map(|ch| ch.solve(&(-&gradient)));
            let trial = step.as_ref().and_then(|s| {
                let xn = &x + s;
                problem.residuals(&xn).map(|rn| (xn, rn))
            });
            match (step, trial) {
                (Some(step), Some((xn, rn))) if rn.norm_squared() < cost => {
                    let cost_new = rn.norm_squared();
                    let predicted = cost - (&r + &jac * &step).norm_squared();
                    let actual = cost - cost_new;
                    let small_cost = actual <= opts.cost_tolerance * cost
                        && predicted.abs() <= opts.cost_tolerance * cost;
                    let small_step =
                        step.norm() <= opts.param_tolerance * (xn.norm() + opts.param_tolerance);
                    x = xn;
                    r = rn;
                    cost = cost_new;
                    history.push(cost);
                    lambda = (lambda / opts.lambda_down).max(1e-20);
                    if small_cost || small_step || cost == 0.0 {
                        converged = true;
                        break 'outer;
                    }
                    match problem.jacobian(&x, opts.fd_step) {
                        Some(j) => jac = j,
                        None => break 'outer,
                    }
                    continue 'outer;
                }
                _ => {
                    lambda *= opts.lambda_up;
                    if lambda > 1e16 {
                        // no descent direction left at working precision
                        converged = true;
                        break 'outer;
                    }
                    if iterations >= opts.max_iterations {
                        break 'outer;
                    }
                }
            }
        }
    }

    let params = problem.params(&x);
    let m = curve.len();
    let n = x.len();
    let sensitivities = standard_errors(&jac, cost, m, n);
    let names = FanoParams::names(problem.kind);
    Ok(FitResult {
        model: problem.kind,
        params: params.gauge_fixed(),
        rms: (cost / m as f64).sqrt(),
        iterations,
        converged,
        free_parameters: problem.free.iter().map(|&i| names[i].to_string()).collect(),
        sensitivities,
        cost_history: history,
    })
}

fn standard_errors(jac: &DMatrix<f64>, cost: f64, m: usize, n: usize) -> Vec<Option<f64>> {
    let normal = jac.transpose() * jac;
    let variance = if m > n {
        cost / (m - n) as f64
    } else {
        f64::NAN
    };
    match normal.try_inverse() {
        Some(inv) => (0..n)
            .map(|i| {
                let v = inv[(i, i)] * variance;
                (v.is_finite() && v >= 0.0).then(|| v.sqrt())
            })
            .collect(),
        None => vec![None; n],
    }
}

/// Linear interpolation of the curve at `e`, clamped to its ends.
fn interpolate(curve: &SpectralCurve, e: f64) -> f64 {
    let x = curve.energies();
    let y = curve.values();
    match x.partition_point(|&v| v < e) {
        0 => y[0],
        k if k >= x.len() => y[x.len() - 1],
        k => {
            let t = (e - x[k - 1]) / (x[k] - x[k - 1]);
            y[k - 1] + t * (y[k] - y[k - 1])
        }
    }
}

/// Full width at half prominence around sample `peak`.
fn half_prominence_width(curve: &SpectralCurve, peak: usize) -> f64 {
    let x = curve.energies();
    let y = curve.values();
    let floor = y.iter().copied().fold(f64::INFINITY, f64::min);
    let level = floor + 0.5 * (y[peak] - floor);
    let left = (0..peak)
        .rev()
        .find(|&i| y[i] <= level)
        .map_or(x[0], |i| x[i]);
    let right = (peak + 1..y.len())
        .find(|&i| y[i] <= level)
        .map_or(x[x.len() - 1], |i| x[i]);
    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1).max(1) as f64;
    (right - left).max(2.0 * step)
}

/// Least-squares amplitudes `y ~ sum_k a_k basis_k`.
fn linear_amplitudes(curve: &SpectralCurve, basis: &[&dyn Fn(f64) -> f64]) -> Option<Vec<f64>> {
    let m = curve.len();
    let a = DMatrix::from_fn(m, basis.len(), |i, j| basis[j](curve.energies()[i]));
    let y = DVector::from_column_slice(curve.values());
    let sol = a.svd(true, true).solve(&y, 1e-14).ok()?;
    sol.iter()
        .all(|v| v.is_finite())
        .then(|| sol.iter().copied().collect())
}

fn single_with_amplitudes(curve: &SpectralCurve, e_r: f64, gamma: f64, q: f64) -> FanoSingleParams {
    let shape = FanoSingleParams {
        e_r,
        gamma,
        q,
        scale: 1.0,
        offset: 0.0,
    };
    let f = |e: f64| fano_single(e, &shape);
    let one = |_: f64| 1.0;
    match linear_amplitudes(curve, &[&f, &one]) {
        Some(a) if a[0] > 0.0 => FanoSingleParams {
            scale: a[0],
            offset: a[1],
            ..shape
        },
        _ => {
            let (lo, hi) = value_range(curve);
            FanoSingleParams {
                scale: (hi - lo) / (1.0 + q * q),
                offset: lo,
                ..shape
            }
        }
    }
}

fn value_range(curve: &SpectralCurve) -> (f64, f64) {
    curve
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}

/// Two coalesced poles: their separation is small against their widths.
pub fn poles_coalesced(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-3 * (a.im.abs() + b.im.abs())
}

/// Resonance `(energy, width)` pairs to seed from.
fn seed_resonances(curve: &SpectralCurve, poles: Option<&[Complex64]>) -> Vec<(f64, f64)> {
    let x = curve.energies();
    let span = x[x.len() - 1] - x[0];
    let mut out: Vec<(f64, f64)> = poles
        .unwrap_or(&[])
        .iter()
        .map(|p| (p.re, 2.0 * p.im.abs()))
        .filter(|(e, w)| e.is_finite() && w.is_finite())
        .map(|(e, w)| (e, if w > 0.0 { w } else { span / 100.0 }))
        .collect();
    if out.is_empty() {
        let (lo, hi) = value_range(curve);
        if !(hi > lo) {
            out.push((0.5 * (x[0] + x[x.len() - 1]), span / 10.0));
        } else {
            let y = curve.values();
            let mut peaks = curve.local_maxima();
            peaks.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
            if peaks.is_empty() {
                peaks.push(argmax(y));
            }
            for &pk in peaks.iter().take(2) {
                out.push((x[pk], half_prominence_width(curve, pk)));
            }
        }
    }
    out
}

/// Starting points for `kind`, most plausible first.
///
/// With poles, resonance energies and widths come from `Re p` and
/// `2 |Im p|`; otherwise from the highest local maxima and their widths at
/// half prominence. When two supplied poles coincide (an exceptional point)
/// the energy dependent families start from widths of opposite sign.
pub fn init_guess(
    kind: ModelKind,
    curve: &SpectralCurve,
    poles: Option<&[Complex64]>,
) -> Result<Vec<FanoParams>> {
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let seeds = seed_resonances(curve, poles);
    let (e1, w1) = seeds[0];
    let side = |e: f64, w: f64| -> f64 {
        if interpolate(curve, e + w) > interpolate(curve, e - w) {
            1.0
        } else {
            -1.0
        }
    };
    let coalesced = match poles {
        Some([a, b, ..]) => poles_coalesced(*a, *b),
        _ => seeds.len() < 2,
    };

    let starts = match kind {
        ModelKind::Single => {
            let s = side(e1, w1);
            [3.0, 1.0, 0.3, 10.0, -1.0, -0.3]
                .iter()
                .map(|&m| FanoParams::Single(single_with_amplitudes(curve, e1, w1, s * m)))
                .collect()
        }
        ModelKind::Double => {
            let (e2, w2) = seeds.get(1).copied().unwrap_or((e1 + 5.0 * w1, w1));
            let (s1, s2) = (side(e1, w1), side(e2, w2));
            let mut starts = Vec::new();
            for (m1, m2) in [(3.0, 3.0), (1.0, 1.0), (3.0, -3.0), (0.3, 10.0)] {
                let a = FanoSingleParams {
                    e_r: e1,
                    gamma: w1,
                    q: s1 * m1,
                    scale: 1.0,
                    offset: 0.0,
                };
                let b = FanoSingleParams {
                    e_r: e2,
                    gamma: w2,
                    q: s2 * m2,
                    scale: 1.0,
                    offset: 0.0,
                };
                let fa = |e: f64| fano_single(e, &a);
                let fb = |e: f64| fano_single(e, &b);
                let one = |_: f64| 1.0;
                let (sa, sb, off) = match linear_amplitudes(curve, &[&fa, &fb, &one]) {
                    Some(c) => (c[0], c[1], c[2]),
                    None => {
                        let (lo, hi) = value_range(curve);
                        (
                            (hi - lo) / (1.0 + a.q * a.q),
                            (hi - lo) / (1.0 + b.q * b.q),
                            lo,
                        )
                    }
                };
                starts.push(FanoParams::Double(
                    FanoDoubleParams {
                        first: FanoSingleParams { scale: sa, ..a },
                        second: FanoSingleParams { scale: sb, ..b },
                        offset: off,
                    }
                    .gauge_fixed(),
                ));
            }
            starts
        }
        ModelKind::EnergyDep | ModelKind::Simplified => {
            let shapes: Vec<(f64, f64, f64, f64)> = if coalesced {
                let e = match poles {
                    Some([a, b, ..]) => 0.5 * (a.re + b.re),
                    _ => e1,
                };
                let w = match poles {
                    Some([a, b, ..]) => a.im.abs() + b.im.abs(),
                    _ => w1,
                };
                // the exact representation is only reached as gamma2 -> -gamma1,
                // and unequal magnitudes lead into that valley
                let mut v: Vec<(f64, f64, f64, f64)> = [
                    (0.01, 0.8),
                    (-0.01, 1.2),
                    (0.01, 1.2),
                    (-0.01, 0.8),
                    (0.1, 0.8),
                    (-0.1, 1.2),
                ]
                .iter()
                .map(|&(d, r)| (e - d * w, w, e + d * w, -r * w))
                .collect();
                v.push((e - 0.1 * w, w, e + 0.1 * w, w));
                v
            } else {
                let (e2, w2) = seeds.get(1).copied().unwrap_or((e1 + 5.0 * w1, w1));
                vec![(e1, w1, e2, w2), (e1, w1, e2, -w2)]
            };
            shapes
                .into_iter()
                .map(|(e1, g1, e2, g2)| {
                    let shape = FanoEnergyDepParams {
                        e1,
                        gamma1: g1,
                        e2,
                        gamma2: g2,
                        delta: PI,
                        scale: 1.0,
                    };
                    let unit = |e: f64| match kind {
                        ModelKind::EnergyDep => fano_energy_dependent(e, &shape),
                        _ => fano_simplified(e, &shape),
                    };
                    let scale = match linear_amplitudes(curve, &[&unit]) {
                        Some(a) if a[0] > 0.0 => a[0],
                        _ => 1.0,
                    };
                    let p = FanoEnergyDepParams { scale, ..shape };
                    match kind {
                        ModelKind::EnergyDep => FanoParams::EnergyDep(p),
                        _ => FanoParams::Simplified(p),
                    }
                })
                .collect()
        }
    };
    Ok(starts)
}

/// Random relative perturbation by up to `+-20%`. Energies move by up to
/// 20% of their resonance width instead, since a fraction of the absolute
/// energy would leave the fitting window.
fn perturb(base: &FanoParams, rng: &mut ChaCha8Rng) -> FanoParams {
    let kind = base.kind();
    let mut v = base.to_vec();
    let resonances = FanoParams::resonances(kind);
    let energies: Vec<usize> = resonances.iter().map(|r| r.0).collect();
    for (i, x) in v.iter_mut().enumerate() {
        if !energies.contains(&i) {
            *x *= 1.0 + rng.random_range(-0.2..0.2);
        }
    }
    for &(e, w) in resonances {
        v[e] += v[w].abs() * rng.random_range(-0.2..0.2);
    }
    FanoParams::from_vec(kind, &v)
}

/// Best fit over `init_guess` starts and seeded perturbations of them.
/// Runs `opts.multistart` starts in total; ties go to the earlier start.
pub fn fit_multistart(
    kind: ModelKind,
    curve: &SpectralCurve,
    poles: Option<&[Complex64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let variants = init_guess(kind, curve, poles)?;
    fit_from_starts(curve, &variants, opts)
}

/// Multistart driver over explicit base starts.
pub fn fit_from_starts(
    curve: &SpectralCurve,
    variants: &[FanoParams],
    opts: &FitOptions,
) -> Result<FitResult> {
    if variants.is_empty() {
        return Err(Error::InvalidParameter("no starting points".into()));
    }
    let count = opts.multistart.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<FanoParams> = (0..count)
        .map(|k| {
            if k < variants.len() {
                variants[k]
            } else {
                perturb(&variants[k % variants.len()], &mut rng)
            }
        })
        .collect();

    let mut best: Option<FitResult> = None;
    let mut first_error = None;
    for start in &starts {
        match fit(curve, start, opts) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.rms < b.rms) {
                    best = Some(res);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_error.unwrap_or(Error::NonFinite))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Channel;

    fn synthetic(p: &FanoParams, lo: f64, hi: f64, n: usize) -> SpectralCurve {
        let energies: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let values = energies.iter().map(|&e| p.eval(e)).collect();
        SpectralCurve::new(energies, values, Channel::G11).unwrap()
    }

    fn truth() -> FanoParams {
        FanoParams::Single(FanoSingleParams {
            e_r: 2.05,
            gamma: 0.01,
            q: -3.0,
            scale: 1.0,
            offset: 0.1,
        })
    }

    #[test]
    fn zero_width_rejected() {
        let curve = synthetic(&truth(), 2.0, 2.1, 200);
        let bad = FanoParams::Single(FanoSingleParams {
            e_r: 2.05,
            gamma: 0.0,
            q: -3.0,
            scale: 1.0,
            offset: 0.1,
        });
        assert!(matches!(
            fit(&curve, &bad, &FitOptions::default()),
            Err(Error::DegenerateInit)
        ));
    }

    #[test]
    fn too_few_points_rejected() {
        let curve = synthetic(&truth(), 2.0, 2.1, 5);
        assert!(matches!(
            fit(&curve, &truth(), &FitOptions::default()),
            Err(Error::InsufficientData {
                points: 5,
                parameters: 5
            })
        ));
    }

    #[test]
    fn accepted_costs_strictly_decrease() {
        let curve = synthetic(&truth(), 2.0, 2.1, 400);
        let init = FanoParams::Single(FanoSingleParams {
            e_r: 2.052,
            gamma: 0.012,
            q: -2.5,
            scale: 0.8,
            offset: 0.0,
        });
        let res = fit(&curve, &init, &FitOptions::default()).unwrap();
        assert!(res.cost_history.len() > 2);
        assert!(res.cost_history.windows(2).all(|w| w[1] < w[0]));
        assert!(res.iterations <= FitOptions::default().max_iterations);
    }

    #[test]
    fn hold_delta_keeps_phase() {
        let p = FanoEnergyDepParams {
            e1: 2.0,
            gamma1: 0.05,
            e2: 2.2,
            gamma2: 0.2,
            delta: PI,
            scale: 2.0,
        };
        let curve = synthetic(&FanoParams::EnergyDep(p), 1.7, 2.6, 300);
        let init = FanoParams::EnergyDep(FanoEnergyDepParams {
            e1: 2.01,
            gamma1: 0.06,
            ..p
        });
        let opts = FitOptions {
            hold_delta: true,
            ..FitOptions::default()
        };
        let res = fit(&curve, &init, &opts).unwrap();
        assert_eq!(res.free_parameters.len(), 5);
        match res.params {
            FanoParams::EnergyDep(q) => assert_eq!(q.delta, PI),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_curve_falls_back_to_window_center() {
        let curve =
            SpectralCurve::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![2.0; 5], Channel::G11).unwrap();
        let starts = init_guess(ModelKind::Single, &curve, None).unwrap();
        match starts[0] {
            FanoParams::Single(p) => {
                assert_eq!(p.e_r, 3.0);
                assert!(p.gamma > 0.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn pole_seeded_widths() {
        let curve = synthetic(&truth(), 1.8, 3.2, 500);
        let poles = [
            Complex64::new(2.046, -0.0012),
            Complex64::new(2.495, -0.0995),
        ];
        let starts = init_guess(ModelKind::Simplified, &curve, Some(&poles)).unwrap();
        match starts[0] {
            FanoParams::Simplified(p) => {
                assert!((p.e1 - 2.046).abs() < 1e-15 && (p.e2 - 2.495).abs() < 1e-15);
                assert!((p.gamma1 - 0.0024).abs() < 1e-15 && (p.gamma2 - 0.199).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn coalesced_poles_seed_opposite_widths() {
        let curve = synthetic(&truth(), 1.8, 2.3, 500);
        let ep = Complex64::new(2.05, -0.05);
        let starts = init_guess(ModelKind::Simplified, &curve, Some(&[ep, ep])).unwrap();
        match starts[0] {
            FanoParams::Simplified(p) => assert!(p.gamma1 > 0.0 && p.gamma2 < 0.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn model_tags_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.tag().parse::<ModelKind>().unwrap(), k);
        }
    }

    #[test]
    fn energy_dep_gauge_keeps_curve() {
        let p = FanoEnergyDepParams {
            e1: 2.3,
            gamma1: -0.1,
            e2: 2.0,
            gamma2: 0.05,
            delta: 5.0,
            scale: 1.0,
        };
        let a = FanoParams::EnergyDep(p);
        let b = a.gauge_fixed();
        match b {
            FanoParams::EnergyDep(g) => {
                assert!(g.e1 <= g.e2 && g.gamma1 > 0.0);
                assert!(g.delta >= 0.5 * PI && g.delta < 1.5 * PI);
            }
            _ => unreachable!(),
        }
        for k in 0..60 {
            let e = 1.7 + 0.01 * k as f64;
            assert!((a.eval(e) - b.eval(e)).abs() < 1e-12 * a.eval(e).max(1.0));
        }
    }
}
