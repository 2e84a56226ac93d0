//! Discrete `L_q` norms of evolved fields, log-log decay fits, and the
//! theoretical decay exponents they are compared against.

use serde::{Deserialize, Serialize};

use crate::data::InitialData;
use crate::error::{invalid, LabError, Result};
use crate::lopatinskii::CalibrationReport;
use crate::semigroup::{to_physical, DataPart, Derivative, Evolver, EvolutionRequest, FieldSnapshot, Grid, Operator, Part};
use crate::symbols::PhysicalParams;

/// Which estimate an exponent comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Total low-frequency part `S₀, Π₀, T₀`.
    Main,
    /// Residue piece `σ = 0`.
    Gam0,
    /// Arc piece `σ = 1`.
    Gam1,
    /// Segment piece `σ = 2`.
    Gam2,
    /// Far ray piece `σ = 3`; exponential.
    Gam3Exponential,
    /// High-frequency part; exponential.
    HighExponential,
}

/// Measured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    /// `∂_t^k D_{x'}^{α'} D_N^ℓ S`.
    Velocity,
    /// `∇^k S` with `k ∈ {1, 2}` (stored in `ExponentSpec::k`).
    VelocityGradient,
    PressureGradient,
    /// `∇^{1+ℓ} E(T)` together with `|α|` extra derivatives.
    ExtensionGradient,
    /// `∇^k ∂_t E(T)` (`k` stored in `alpha`).
    ExtensionTimeDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataSource {
    F,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSpec {
    pub theorem: Theorem,
    pub observable: Observable,
    pub data: DataSource,
    /// `f64::INFINITY` for `q = ∞`.
    pub q: f64,
    pub r: f64,
    pub k: u8,
    pub ell: u8,
    pub alpha: u32,
}

impl ExponentSpec {
    pub fn main(observable: Observable, q: f64, r: f64) -> Self {
        Self { theorem: Theorem::Main, observable, data: DataSource::D, q, r, k: 0, ell: 0, alpha: 0 }
    }
}

/// Decay law `(t + 1)^{-rate}` or `e^{-δt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Algebraic(f64),
    Exponential(Option<f64>),
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// `m(q, r) = (N-1)/2 (1/r - 1/q) + 1/2 (1/2 - 1/q)`.
pub fn m_exponent(q: f64, r: f64, n: usize) -> f64 {
    (n as f64 - 1.0) / 2.0 * (inv(r) - inv(q)) + 0.5 * (0.5 - inv(q))
}

/// `n(q, r) = (N-1)/2 (1/r - 1/q) + min{(1/r - 1/q)/2, (2 - 1/q)/8}`.
pub fn n_exponent(q: f64, r: f64, n: usize) -> f64 {
    let d = inv(r) - inv(q);
    (n as f64 - 1.0) / 2.0 * d + (0.5 * d).min((2.0 - inv(q)) / 8.0)
}

fn out_of_scope<T>(msg: &str) -> Result<T> {
    Err(LabError::OutOfScope(msg.to_string()))
}

/// Decay exponent of the estimate named by `spec` in dimension `n`.
pub fn theoretical_exponent(spec: &ExponentSpec, n: usize) -> Result<Exponent> {
    let (q, r) = (spec.q, spec.r);
    if !(1.0 <= r && r <= 2.0 && 2.0 <= q) {
        return out_of_scope("requires 1 <= r <= 2 <= q <= infinity");
    }
    if spec.k > 1 && spec.observable != Observable::VelocityGradient {
        return out_of_scope("time derivative order must be 0 or 1");
    }
    if spec.ell > 2 {
        return out_of_scope("normal derivative order must be at most 2");
    }
    let m = m_exponent(q, r, n);
    let nn = n_exponent(q, r, n);
    let heat = n as f64 / 2.0 * (inv(r) - inv(q));
    let k = spec.k as f64;
    let ell = spec.ell as f64;
    let al = spec.alpha as f64;
    let is22 = q == 2.0 && r == 2.0;
    use DataSource::*;
    use Observable::*;
    let rate = match spec.theorem {
        Theorem::Gam3Exponential | Theorem::HighExponential => return Ok(Exponent::Exponential(None)),
        Theorem::Main => match spec.observable {
            Velocity if spec.k == 0 && spec.ell == 0 && spec.alpha == 0 => {
                if is22 {
                    return out_of_scope("excluded pair (q,r) = (2,2)");
                }
                m
            }
            Velocity if spec.k == 1 && spec.ell == 0 && spec.alpha == 0 => m + 0.25,
            Velocity => return out_of_scope("use VelocityGradient for spatial derivatives of S0"),
            VelocityGradient => {
                if !(1..=2).contains(&spec.k) {
                    return out_of_scope("gradient order must be 1 or 2");
                }
                nn + k / 8.0
            }
            PressureGradient => m + 0.25,
            ExtensionGradient => m + 0.25 + ell / 2.0,
            ExtensionTimeDerivative => {
                if spec.alpha == 0 {
                    if is22 {
                        return out_of_scope("excluded pair (q,r) = (2,2)");
                    }
                    m
                } else if spec.alpha <= 2 {
                    m + al / 2.0
                } else {
                    return out_of_scope("gradient order must be at most 2");
                }
            }
        },
        Theorem::Gam0 => match (spec.observable, spec.data) {
            (Velocity, F) => heat + k / 4.0 + al / 2.0 + ell / 8.0,
            (Velocity, D) if spec.ell == 0 => m + k / 4.0 + al / 2.0,
            (Velocity, D) => (n as f64 - 1.0) / 2.0 * (inv(r) - inv(q)) + (2.0 - inv(q)) / 8.0 + k / 4.0 + al / 2.0 + ell / 8.0,
            (PressureGradient, F) => heat + 0.25,
            (PressureGradient, D) => m + 0.25,
            (ExtensionGradient, F) => heat + 0.25 + al / 2.0,
            (ExtensionGradient, D) => m + 0.25 + al / 2.0,
            (ExtensionTimeDerivative, F) => heat + al / 2.0,
            _ => return out_of_scope("no estimate for this observable on the residue piece"),
        },
        Theorem::Gam1 => match (spec.observable, spec.data) {
            (Velocity, F) => heat + (2.0 * k + al + ell) / 2.0,
            (Velocity, D) => m + 0.75 + (2.0 * k + al + ell) / 2.0,
            (PressureGradient, F) => heat + 1.0,
            (PressureGradient, D) => m + 1.75,
            (ExtensionGradient, F) => heat + 1.0 + al / 2.0,
            (ExtensionTimeDerivative, F) => heat + 1.5 + al / 2.0,
            (ExtensionGradient, D) => m + 1.75 + al / 2.0,
            _ => return out_of_scope("no estimate for this observable on the arc piece"),
        },
        Theorem::Gam2 => match (spec.observable, spec.data) {
            (Velocity, src) => {
                let base = if src == F { heat } else { m };
                if spec.k == 0 && spec.ell == 0 && spec.alpha == 0 {
                    if is22 {
                        return out_of_scope("excluded pair (q,r) = (2,2)");
                    }
                    base
                } else {
                    base + k + (al + ell) / 2.0
                }
            }
            (PressureGradient, F) => heat + 0.25,
            (PressureGradient, D) => m + 1.0,
            _ => return out_of_scope("no estimate for this observable on the segment piece"),
        },
    };
    Ok(Exponent::Algebraic(rate))
}

/// Discrete `L_q` norm of the pointwise Euclidean magnitude over all components
/// of all snapshots (which must share a grid). `q = ∞` returns the grid maximum.
pub fn lq_norm_combined(snaps: &[&FieldSnapshot], x_weights: &[f64], q: f64) -> Result<f64> {
    let Some(first) = snaps.first() else {
        return invalid("no snapshot given");
    };
    let np = first.points();
    let nx = first.x_nodes.len();
    if np == 0 || nx == 0 {
        return invalid("empty grid");
    }
    if snaps.iter().any(|s| s.points() != np || s.x_nodes.len() != nx) {
        return invalid("snapshots live on different grids");
    }
    if x_weights.len() != nx {
        return invalid("x_N weights do not match the snapshot");
    }
    if !(q >= 1.0) {
        return invalid("q must be at least 1");
    }
    let cell = first.lattice.dx().powi(first.lattice.axes() as i32);
    let mut acc = 0.0f64;
    for p in 0..np {
        for ix in 0..nx {
            let mag2: f64 = snaps
                .iter()
                .map(|s| (0..s.ncomp).map(|c| s.get(c, p, ix).powi(2)).sum::<f64>())
                .sum();
            let mag = mag2.sqrt();
            if q.is_infinite() {
                acc = acc.max(mag);
            } else {
                acc += mag.powf(q) * x_weights[ix] * cell;
            }
        }
    }
    Ok(if q.is_infinite() { acc } else { acc.powf(1.0 / q) })
}

pub fn lq_norm(snap: &FieldSnapshot, x_weights: &[f64], q: f64) -> Result<f64> {
    lq_norm_combined(&[snap], x_weights, q)
}

/// Least-squares line `y = c + s x`; returns `(s, rms residual)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let s = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let res = (x.iter().zip(y).map(|(a, b)| (b - my - s * (a - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (s, res)
}

/// Interior local maxima of a series; all points when fewer than three exist.
pub fn envelope_mask(norms: &[f64]) -> Vec<bool> {
    let n = norms.len();
    let mut mask = vec![false; n];
    for i in 1..n.saturating_sub(1) {
        mask[i] = norms[i] >= norms[i - 1] && norms[i] >= norms[i + 1];
    }
    if mask.iter().filter(|m| **m).count() < 3 {
        mask.iter_mut().for_each(|m| *m = true);
    }
    mask
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub spec: ExponentSpec,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub envelope: Vec<bool>,
    /// `d log‖·‖ / d log(t+1)` for algebraic specs, `d log‖·‖ / dt` for exponential ones.
    pub fitted_slope: f64,
    pub fit_residual: f64,
    pub theoretical: Exponent,
    pub window: (f64, f64),
}

/// Fit a series on `window`: envelope maxima against `log(t+1)` for algebraic
/// laws, all points against `t` for exponential ones.
pub fn fit_series(spec: ExponentSpec, times: &[f64], norms: &[f64], theoretical: Exponent, window: (f64, f64)) -> Result<DecaySeries> {
    if times.len() != norms.len() || times.len() < 2 {
        return invalid("series needs at least two matching times and norms");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("times must be strictly increasing");
    }
    if norms.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return invalid("norms must be positive");
    }
    let inside: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= window.0 && times[i] <= window.1).collect();
    if inside.len() < 2 {
        return invalid("fewer than two samples inside the fit window");
    }
    let mut envelope = vec![false; times.len()];
    let (x, y): (Vec<f64>, Vec<f64>) = match theoretical {
        Exponent::Algebraic(_) => {
            let sub: Vec<f64> = inside.iter().map(|&i| norms[i]).collect();
            let mask = envelope_mask(&sub);
            inside
                .iter()
                .zip(mask)
                .filter(|(_, m)| *m)
                .map(|(&i, _)| {
                    envelope[i] = true;
                    ((times[i] + 1.0).ln(), norms[i].ln())
                })
                .unzip()
        }
        Exponent::Exponential(_) => inside
            .iter()
            .map(|&i| {
                envelope[i] = true;
                (times[i], norms[i].ln())
            })
            .unzip(),
    };
    let (slope, res) = least_squares(&x, &y);
    Ok(DecaySeries {
        spec,
        times: times.to_vec(),
        norms: norms.to_vec(),
        envelope,
        fitted_slope: slope,
        fit_residual: res,
        theoretical,
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub fitted_slope: f64,
    /// Slope bound the fit is compared against.
    pub bound: f64,
    pub tolerance: f64,
    pub window: (f64, f64),
}

/// Upper-bound comparison: algebraic laws pass when `slope ≤ -rate + tol`,
/// exponential ones when `slope ≤ -0.8 δ`.
pub fn compare(series: &DecaySeries, tolerance: f64) -> Result<Verdict> {
    let bound = match series.theoretical {
        Exponent::Algebraic(rate) => -rate + tolerance,
        Exponent::Exponential(Some(delta)) => -0.8 * delta,
        Exponent::Exponential(None) => return invalid("exponential law without a rate"),
    };
    Ok(Verdict {
        pass: series.fitted_slope <= bound,
        fitted_slope: series.fitted_slope,
        bound,
        tolerance,
        window: series.window,
    })
}

/// Shared inputs for norm measurements.
pub struct DecaySetup<'a> {
    pub params: &'a PhysicalParams,
    pub calib: &'a CalibrationReport,
    pub data: &'a InitialData,
    pub grid: &'a Grid,
    pub tol: f64,
}

/// Norms `[observable][time]`; each observable is a set of derivatives whose
/// pointwise magnitudes are combined.
pub fn measure_observables(
    setup: &DecaySetup,
    operator: Operator,
    part: Part,
    data_part: DataPart,
    observables: &[Vec<Derivative>],
    times: &[f64],
    q: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut derivs: Vec<Derivative> = Vec::new();
    let slots: Vec<Vec<usize>> = observables
        .iter()
        .map(|obs| {
            obs.iter()
                .map(|d| {
                    if let Some(i) = derivs.iter().position(|e| e == d) {
                        i
                    } else {
                        derivs.push(d.clone());
                        derivs.len() - 1
                    }
                })
                .collect()
        })
        .collect();
    let req = EvolutionRequest::new(operator, part, data_part, times.to_vec(), setup.tol);
    let ev = Evolver::new(setup.params, setup.calib, setup.data, &req, &setup.grid.x_nodes)?;
    let weights = if operator == Operator::T { vec![1.0] } else { setup.grid.x_weights.clone() };
    let mut out = vec![Vec::with_capacity(times.len()); observables.len()];
    for &t in times {
        let fields = ev.evolve_lattice(&setup.grid.lattice, &[t], &derivs)?.remove(0);
        let snaps: Vec<FieldSnapshot> = fields.iter().map(to_physical).collect::<Result<_>>()?;
        for (o, sl) in slots.iter().enumerate() {
            let refs: Vec<&FieldSnapshot> = sl.iter().map(|&i| &snaps[i]).collect();
            out[o].push(lq_norm_combined(&refs, &weights, q)?);
        }
    }
    Ok(out)
}

/// Evolve, measure and fit one request against the exponent of `spec`.
pub fn decay_series(
    setup: &DecaySetup,
    req: &EvolutionRequest,
    spec: ExponentSpec,
    window: (f64, f64),
) -> Result<DecaySeries> {
    let mut theoretical = theoretical_exponent(&spec, setup.params.dim)?;
    if let Exponent::Exponential(None) = theoretical {
        let delta = match spec.theorem {
            Theorem::Gam3Exponential => setup.calib.gamma0,
            _ => setup.calib.gamma_infty,
        };
        theoretical = Exponent::Exponential(Some(delta));
    }
    let norms = measure_observables(setup, req.operator, req.part, req.data_part, &[vec![req.derivative.clone()]], &req.times, spec.q)?
        .remove(0);
    fit_series(spec, &req.times, &norms, theoretical, window)
}

/// Operator, part, data part and derivative set measured for `spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservablePlan {
    pub operator: Operator,
    pub part: Part,
    pub data_part: DataPart,
    pub derivatives: Vec<Derivative>,
}

pub fn observable_plan(spec: &ExponentSpec, dim: usize) -> Result<ObservablePlan> {
    let part = match spec.theorem {
        Theorem::Main => Part::Low,
        Theorem::Gam0 => Part::Piece(0),
        Theorem::Gam1 => Part::Piece(1),
        Theorem::Gam2 => Part::Piece(2),
        Theorem::Gam3Exponential => Part::Piece(3),
        Theorem::HighExponential => Part::High,
    };
    let data_part = match spec.data {
        DataSource::F => DataPart::F,
        DataSource::D => DataPart::D,
    };
    let gradient = |order: u32, time: u8| -> Result<Vec<Derivative>> {
        if !(1..=2).contains(&order) {
            return out_of_scope("gradient order must be 1 or 2");
        }
        Ok(gradient_derivatives(order as u8, dim, time))
    };
    let (operator, derivatives) = match spec.observable {
        Observable::Velocity => {
            let mut d = Derivative { k: spec.k, alpha: vec![], ell: spec.ell };
            if spec.alpha > 0 {
                d.alpha = vec![0; dim - 1];
                d.alpha[0] = spec.alpha;
            }
            (Operator::S, vec![d])
        }
        Observable::VelocityGradient => (Operator::S, gradient(spec.k as u32, 0)?),
        Observable::PressureGradient => (Operator::Pi, gradient(1, 0)?),
        Observable::ExtensionGradient => (Operator::ET, gradient(1 + spec.ell as u32 + spec.alpha, 0)?),
        Observable::ExtensionTimeDerivative if spec.alpha == 0 => (Operator::ET, vec![Derivative::time(1)]),
        Observable::ExtensionTimeDerivative => (Operator::ET, gradient(spec.alpha, 1)?),
    };
    Ok(ObservablePlan { operator, part, data_part, derivatives })
}

/// Gradient of order 1 or 2 of a scalar field as a list of derivatives (mixed
/// second derivatives appear twice, matching the Frobenius norm).
pub fn gradient_derivatives(order: u8, dim: usize, time: u8) -> Vec<Derivative> {
    let tang = dim - 1;
    let unit = |i: usize| -> Derivative {
        let mut d = Derivative::time(time);
        if i < tang {
            d.alpha = vec![0; tang];
            d.alpha[i] = 1;
        } else {
            d.ell = 1;
        }
        d
    };
    let first: Vec<Derivative> = (0..dim).map(unit).collect();
    if order <= 1 {
        return first;
    }
    let mut out = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            let mut d = unit(i);
            let e = unit(j);
            if d.alpha.is_empty() {
                d.alpha = vec![0; tang];
            }
            for (a, b) in d.alpha.iter_mut().zip(e.alpha.iter().chain(std::iter::repeat(&0))) {
                *a += b;
            }
            d.ell += e.ell;
            out.push(d);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::{Lattice, SpectralField};
    use approx::assert_relative_eq;

    #[test]
    fn exponent_examples() {
        assert_relative_eq!(m_exponent(f64::INFINITY, 1.0, 2), 0.75);
        assert_relative_eq!(n_exponent(f64::INFINITY, 1.0, 3), 1.25);
        let s = ExponentSpec::main(Observable::Velocity, 2.0, 2.0);
        assert!(matches!(theoretical_exponent(&s, 2), Err(LabError::OutOfScope(_))));
        let s = ExponentSpec::main(Observable::Velocity, 4.0, 3.0);
        match theoretical_exponent(&s, 2) {
            Err(LabError::OutOfScope(msg)) => assert!(msg.contains("r <= 2")),
            other => panic!("{other:?}"),
        }
        let mut s = ExponentSpec::main(Observable::ExtensionGradient, f64::INFINITY, 1.0);
        let a = theoretical_exponent(&s, 2).unwrap();
        s.ell = 1;
        let b = theoretical_exponent(&s, 2).unwrap();
        match (a, b) {
            (Exponent::Algebraic(x), Exponent::Algebraic(y)) => assert_relative_eq!(y - x, 0.5),
            _ => panic!(),
        }
    }

    #[test]
    fn synthetic_fits() {
        let times: Vec<f64> = (0..30).map(|i| 10f64.powf(1.0 + 2.0 * i as f64 / 29.0)).collect();
        let spec = ExponentSpec::main(Observable::Velocity, f64::INFINITY, 1.0);
        let norms: Vec<f64> = times.iter().map(|t| (t + 1.0f64).powf(-0.75)).collect();
        let s = fit_series(spec, &times, &norms, Exponent::Algebraic(0.75), (10.0, 1e3)).unwrap();
        assert!((s.fitted_slope + 0.75).abs() < 1e-3);
        let flat = vec![2.0; times.len()];
        let s = fit_series(spec, &times, &flat, Exponent::Algebraic(0.75), (10.0, 1e3)).unwrap();
        assert!(s.fitted_slope.abs() < 1e-12);
        assert!(fit_series(spec, &[1.0, 1.0], &[1.0, 1.0], Exponent::Algebraic(0.75), (0.0, 2.0)).is_err());
    }

    #[test]
    fn oscillating_series_uses_maxima() {
        let times: Vec<f64> = (0..400).map(|i| 10.0 + i as f64 * 2.5).collect();
        let norms: Vec<f64> = times.iter().map(|t| (t + 1.0f64).powf(-0.75) * (1.5 + (0.7 * t).cos())).collect();
        let spec = ExponentSpec::main(Observable::Velocity, f64::INFINITY, 1.0);
        let s = fit_series(spec, &times, &norms, Exponent::Algebraic(0.75), (10.0, 1e4)).unwrap();
        assert!((s.fitted_slope + 0.75).abs() < 0.05, "{}", s.fitted_slope);
    }

    #[test]
    fn verdicts() {
        let spec = ExponentSpec::main(Observable::Velocity, f64::INFINITY, 1.0);
        let mk = |slope: f64, th: Exponent| DecaySeries {
            spec,
            times: vec![],
            norms: vec![],
            envelope: vec![],
            fitted_slope: slope,
            fit_residual: 0.0,
            theoretical: th,
            window: (1.0, 10.0),
        };
        assert!(compare(&mk(-0.8, Exponent::Algebraic(0.75)), 0.15).unwrap().pass);
        assert!(!compare(&mk(-0.5, Exponent::Algebraic(0.75)), 0.15).unwrap().pass);
        assert!(compare(&mk(-0.01, Exponent::Exponential(Some(0.01))), 0.0).unwrap().pass);
        assert!(!compare(&mk(-0.007, Exponent::Exponential(Some(0.01))), 0.0).unwrap().pass);
    }

    fn gaussian_snapshot(n: usize, dxi: f64, xs: Vec<f64>, amp: f64) -> FieldSnapshot {
        let lat = Lattice::new(2, n, dxi).unwrap();
        let f = SpectralField::zeros(lat, xs.clone(), 1, 1.0);
        let mut s = to_physical(&f).unwrap();
        for p in 0..lat.n {
            for (ix, y) in xs.iter().enumerate() {
                let x = s.x_axis[p];
                s.values[p * xs.len() + ix] = amp * (-(x * x + y * y) / 2.0).exp();
            }
        }
        s
    }

    #[test]
    fn gaussian_norms() {
        let (mut xs, mut ws) = crate::gauss::composite(0.0, 12.0, 12, 16);
        xs.insert(0, 0.0);
        ws.insert(0, 0.0);
        let s = gaussian_snapshot(256, 0.25, xs.clone(), 1.0);
        let l2 = lq_norm(&s, &ws, 2.0).unwrap();
        assert_relative_eq!(l2, (PI_2).sqrt(), epsilon = 1e-10);
        assert_relative_eq!(lq_norm(&s, &ws, f64::INFINITY).unwrap(), 1.0, epsilon = 1e-15);
        let s3 = gaussian_snapshot(256, 0.25, xs, -3.0);
        assert_relative_eq!(lq_norm(&s3, &ws, 4.0).unwrap(), 3.0 * lq_norm(&s, &ws, 4.0).unwrap(), epsilon = 1e-12);
    }

    const PI_2: f64 = std::f64::consts::FRAC_PI_2;

    #[test]
    fn gradient_lists() {
        assert_eq!(gradient_derivatives(1, 2, 0).len(), 2);
        let g2 = gradient_derivatives(2, 2, 0);
        assert_eq!(g2.len(), 4);
        assert_eq!(g2[1], Derivative { k: 0, alpha: vec![1], ell: 1 });
        assert_eq!(g2[3], Derivative { k: 0, alpha: vec![0], ell: 2 });
    }

    #[test]
    fn plans_follow_the_observable() {
        let mut spec = ExponentSpec::main(Observable::ExtensionGradient, f64::INFINITY, 1.0);
        spec.ell = 1;
        let p = observable_plan(&spec, 2).unwrap();
        assert_eq!((p.operator, p.part, p.data_part), (Operator::ET, Part::Low, DataPart::D));
        assert_eq!(p.derivatives, gradient_derivatives(2, 2, 0));
        spec.ell = 2;
        assert!(observable_plan(&spec, 2).is_err());
        let v = ExponentSpec { theorem: Theorem::Gam1, data: DataSource::F, k: 1, alpha: 2, ..ExponentSpec::main(Observable::Velocity, 4.0, 1.0) };
        let p = observable_plan(&v, 3).unwrap();
        assert_eq!(p.part, Part::Piece(1));
        assert_eq!(p.derivatives, vec![Derivative { k: 1, alpha: vec![2, 0], ell: 0 }]);
    }
}
