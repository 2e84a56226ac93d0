//! Fourier-space solution `(v̂, π̂, ĥ)` of the resolvent problem with a free
//! surface, assembled from the multiplier tables and the kernel moments of the
//! volume data.
//!
//! Every output is a combination of three one-point kernels in `x_N`:
//! `v̂_J = c_{J,B} e^{-Bx_N} + c_{J,M} M(x_N)`, `π̂ = c_π e^{-Ax_N}`, and `ĥ` is a
//! scalar. [`kernel_coefficients`] computes the `c`'s; evaluation on a grid and
//! normal derivatives then come for free.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::symbols::{
    d_symbol, eval_multipliers, l_symbol, m_kernel, PhysicalParams, SpectralPoint, D_FLOOR, M_SWITCH,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Volume data `f̂_K(ξ', y_N)` sampled on a quadrature rule in `y_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub xi_prime: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `values[K][i]` is `f̂_K` at `nodes[i]`; the last component is normal.
    pub values: Vec<Vec<C64>>,
}

impl SpectralProfile {
    pub fn new(xi_prime: Vec<f64>, nodes: Vec<f64>, weights: Vec<f64>, values: Vec<Vec<C64>>) -> Result<Self> {
        if nodes.len() != weights.len() || values.iter().any(|v| v.len() != nodes.len()) {
            return invalid("profile nodes, weights and values must have equal lengths");
        }
        if values.len() != xi_prime.len() + 1 {
            return invalid("profile needs N components");
        }
        if weights.iter().any(|w| !(*w > 0.0)) || nodes.iter().any(|y| !(*y >= 0.0)) {
            return invalid("profile weights must be positive and nodes nonnegative");
        }
        Ok(Self { xi_prime, nodes, weights, values })
    }

    /// Profile sampled from `f(K, y)` on a given rule.
    pub fn from_fn(xi_prime: &[f64], nodes: &[f64], weights: &[f64], f: impl Fn(usize, f64) -> C64) -> Result<Self> {
        let n = xi_prime.len() + 1;
        let values = (0..n).map(|k| nodes.iter().map(|&y| f(k, y)).collect()).collect();
        Self::new(xi_prime.to_vec(), nodes.to_vec(), weights.to_vec(), values)
    }

    pub fn zero(xi_prime: &[f64]) -> Self {
        Self { xi_prime: xi_prime.to_vec(), nodes: vec![], weights: vec![], values: vec![vec![]; xi_prime.len() + 1] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|z| *z == ZERO))
    }

    /// `e^{-A y}` at every node; independent of `λ`.
    pub fn exp_a(&self, a: f64) -> Vec<f64> {
        self.nodes.iter().map(|y| (-a * y).exp()).collect()
    }
}

/// `∫ e^{-Ay} f̂_K`, `∫ e^{-By} f̂_K` and `∫ M(y) f̂_K` for every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub ia: Vec<C64>,
    pub ib: Vec<C64>,
    pub im: Vec<C64>,
}

/// Kernel moments at `(A, B)`. `exp_a` may carry precomputed `e^{-Ay}` values.
pub fn moments(profile: &SpectralProfile, a: f64, b: C64, exp_a: Option<&[f64]>) -> Moments {
    let n = profile.dim();
    let mut ia = vec![ZERO; n];
    let mut ib = vec![ZERO; n];
    let mut im = vec![ZERO; n];
    let owned;
    let ea = match exp_a {
        Some(e) => e,
        None => {
            owned = profile.exp_a(a);
            &owned
        }
    };
    let gap = b - a;
    for (i, (&y, &w)) in profile.nodes.iter().zip(&profile.weights).enumerate() {
        let eb = (-b * y).exp();
        let m = if gap.norm() * y >= M_SWITCH { (eb - ea[i]) / gap } else { m_kernel(a, b, y, 0) };
        for k in 0..n {
            let fv = profile.values[k][i] * w;
            ia[k] += fv * ea[i];
            ib[k] += fv * eb;
            im[k] += fv * m;
        }
    }
    Moments { ia, ib, im }
}

/// Which of the two equivalent displays of the boundary trace `ŵ_N(ξ', 0, λ)` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceForm {
    /// Kernels `e^{-By}` and `M(y)`.
    BForm,
    /// Kernels `e^{-Ay}` and `M(y)`.
    AForm,
}

fn checked_d(sp: &SpectralPoint) -> Result<C64> {
    let d = d_symbol(sp.a, sp.b);
    if !(d.norm() > D_FLOOR) {
        return Err(LabError::Singular { a: sp.a, lambda: sp.lambda, what: "D(A,B) vanishes".into() });
    }
    Ok(d)
}

fn checked_l(sp: &SpectralPoint, params: &PhysicalParams) -> Result<C64> {
    let l = l_symbol(sp.a, sp.b, params);
    if !(l.norm() > D_FLOOR) {
        return Err(LabError::Singular { a: sp.a, lambda: sp.lambda, what: "L(A,B) vanishes".into() });
    }
    Ok(l)
}

/// Normal component at the boundary of the no-surface solution.
pub fn wn_trace_from_moments(sp: &SpectralPoint, m: &Moments, form: TraceForm) -> Result<C64> {
    let (a, b) = (sp.a, sp.b);
    let d = checked_d(sp)?;
    let nn = sp.xi_prime.len();
    let q = b * b + a * a;
    let i = C64::i();
    let mut s = ZERO;
    match form {
        TraceForm::BForm => {
            for k in 0..nn {
                s += i * sp.xi_prime[k] * ((b - a) * m.ib[k] - q * m.im[k]);
            }
            s += a * ((b + a) * m.ib[nn] - q * m.im[nn]);
        }
        TraceForm::AForm => {
            for k in 0..nn {
                s += i * sp.xi_prime[k] * ((b - a) * m.ia[k] - 2.0 * a * b * m.im[k]);
            }
            s += a * (b + a) * m.ia[nn] - 2.0 * a * a * a * m.im[nn];
        }
    }
    Ok(s / d)
}

pub fn wn_trace(sp: &SpectralPoint, profile: &SpectralProfile, form: TraceForm) -> Result<C64> {
    if profile.dim() != sp.xi_prime.len() + 1 {
        return invalid("profile and spectral point dimensions differ");
    }
    wn_trace_from_moments(sp, &moments(profile, sp.a, sp.b, None), form)
}

/// Coefficients of one data part in the kernel basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCoefficients {
    /// Coefficient of `e^{-Bx_N}` in `v̂_J`.
    pub vb: Vec<C64>,
    /// Coefficient of `M(x_N)` in `v̂_J`.
    pub vm: Vec<C64>,
    /// Coefficient of `e^{-Ax_N}` in `π̂`.
    pub pi: C64,
    pub h: C64,
}

impl KernelCoefficients {
    fn zero(n: usize) -> Self {
        Self { vb: vec![ZERO; n], vm: vec![ZERO; n], pi: ZERO, h: ZERO }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            vb: self.vb.iter().zip(&other.vb).map(|(x, y)| x + y).collect(),
            vm: self.vm.iter().zip(&other.vm).map(|(x, y)| x + y).collect(),
            pi: self.pi + other.pi,
            h: self.h + other.h,
        }
    }

    pub fn scale(&mut self, s: C64) {
        self.vb.iter_mut().chain(self.vm.iter_mut()).for_each(|x| *x *= s);
        self.pi *= s;
        self.h *= s;
    }

    /// `∂^ℓ_{x_N} v̂_J(x_N)` for every `J`.
    pub fn velocity(&self, a: f64, b: C64, x: f64, ell: u8) -> Vec<C64> {
        let eb = (-b * x).exp() * (-b).powu(ell as u32);
        let m = m_kernel(a, b, x, ell);
        self.vb.iter().zip(&self.vm).map(|(cb, cm)| cb * eb + cm * m).collect()
    }

    /// `∂^ℓ_{x_N} π̂(x_N)`.
    pub fn pressure(&self, a: f64, x: f64, ell: u8) -> C64 {
        self.pi * (-a * x).exp() * (-a).powi(ell as i32)
    }
}

/// Kernel coefficients of the `f`- and `d`-parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventParts {
    pub f: KernelCoefficients,
    pub d: KernelCoefficients,
}

impl ResolventParts {
    pub fn total(&self) -> KernelCoefficients {
        self.f.add(&self.d)
    }
}

/// Kernel coefficients at `sp`. With `numerator = true` every coefficient is
/// multiplied by `L(A, B)`, which leaves a function analytic near the zeros of `L`.
pub fn kernel_coefficients(
    sp: &SpectralPoint,
    mom: Option<&Moments>,
    dhat: C64,
    params: &PhysicalParams,
    numerator: bool,
) -> Result<ResolventParts> {
    let n = sp.xi_prime.len() + 1;
    if n != params.dim {
        return invalid("spectral point dimension does not match parameters");
    }
    let mut f = KernelCoefficients::zero(n);
    let mut dpart = KernelCoefficients::zero(n);
    if sp.a == 0.0 {
        return Ok(ResolventParts { f, d: dpart });
    }
    let (a, b) = (sp.a, sp.b);
    let big_d = checked_d(sp)?;
    let inv_l = if numerator { C64::new(1.0, 0.0) } else { 1.0 / checked_l(sp, params)? };
    let r = params.restoring(a);
    let rl = r * inv_l;
    let q = b * b + a * a;
    let bpa = b + a;
    let i = C64::i();
    let nn = n - 1;

    if let Some(m) = mom {
        let t = eval_multipliers(sp, params)?;
        for j in 0..n {
            let mut cb = ZERO;
            let mut cm = ZERO;
            for k in 0..n {
                let id = t.idx(j, k);
                cb += t.v_bb[id] * m.ib[k] + t.v_bm[id] * m.im[k];
                cm += t.v_mb[id] * m.ib[k] + t.v_mm[id] * m.im[k];
            }
            f.vb[j] = cb * rl;
            f.vm[j] = cm * rl;
        }
        let mut p = ZERO;
        for k in 0..n {
            p += t.p_aa[k] * m.ia[k] + t.p_am[k] * m.im[k];
        }
        f.pi = p * rl;
        let mut h = ZERO;
        for k in 0..nn {
            let ixk = i * sp.xi_prime[k];
            h += -ixk * (b - a) / bpa * m.ia[k] + 2.0 * ixk * a * b / bpa * m.im[k];
        }
        h += -a * m.ia[nn] + 2.0 * a * a * a / bpa * m.im[nn];
        f.h = h * inv_l;
    }

    if dhat != ZERO {
        let c = rl / bpa * dhat;
        for j in 0..nn {
            let ixj = i * sp.xi_prime[j];
            dpart.vb[j] = -ixj * (b - a) * c;
            dpart.vm[j] = ixj * q * c;
        }
        dpart.vb[nn] = a * bpa * c;
        dpart.vm[nn] = -a * q * c;
        dpart.pi = q * rl * dhat;
        dpart.h = big_d / bpa * inv_l * dhat;
    }
    Ok(ResolventParts { f, d: dpart })
}

/// `(ĥ^f, ĥ^d)`.
pub fn hhat(sp: &SpectralPoint, profile: &SpectralProfile, dhat: C64, params: &PhysicalParams) -> Result<(C64, C64)> {
    let mom = if profile.is_zero() { None } else { Some(moments(profile, sp.a, sp.b, None)) };
    let parts = kernel_coefficients(sp, mom.as_ref(), dhat, params, false)?;
    Ok((parts.f.h, parts.d.h))
}

/// Assembled resolvent solution on a set of `x_N` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSolution {
    pub xi_prime: Vec<f64>,
    pub lambda: C64,
    pub x_nodes: Vec<f64>,
    /// `vhat[J][i]` at `x_nodes[i]`.
    pub vhat: Vec<Vec<C64>>,
    pub pihat: Vec<C64>,
    pub hhat: C64,
    pub hhat_f: C64,
    pub hhat_d: C64,
}

pub fn resolve(
    sp: &SpectralPoint,
    profile: &SpectralProfile,
    dhat: C64,
    params: &PhysicalParams,
    x_nodes: &[f64],
) -> Result<ResolventSolution> {
    if x_nodes.iter().any(|x| !(*x >= 0.0)) {
        return invalid("x_N nodes must be nonnegative");
    }
    let mom = if profile.is_zero() { None } else { Some(moments(profile, sp.a, sp.b, None)) };
    let parts = kernel_coefficients(sp, mom.as_ref(), dhat, params, false)?;
    let tot = parts.total();
    let n = params.dim;
    let mut vhat = vec![Vec::with_capacity(x_nodes.len()); n];
    let mut pihat = Vec::with_capacity(x_nodes.len());
    for &x in x_nodes {
        for (j, v) in tot.velocity(sp.a, sp.b, x, 0).into_iter().enumerate() {
            vhat[j].push(v);
        }
        pihat.push(tot.pressure(sp.a, x, 0));
    }
    let out = ResolventSolution {
        xi_prime: sp.xi_prime.clone(),
        lambda: sp.lambda,
        x_nodes: x_nodes.to_vec(),
        vhat,
        pihat,
        hhat: tot.h,
        hhat_f: parts.f.h,
        hhat_d: parts.d.h,
    };
    let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
    if !(out.vhat.iter().flatten().all(finite) && out.pihat.iter().all(finite) && finite(&out.hhat)) {
        return Err(LabError::Singular { a: sp.a, lambda: sp.lambda, what: "non-finite resolvent entry".into() });
    }
    Ok(out)
}

/// Residual of the kinematic boundary condition `λĥ + v̂_N(0) + ŵ_N(0) - d̂`,
/// relative to the largest term.
pub fn kinematic_residual(
    sp: &SpectralPoint,
    profile: &SpectralProfile,
    dhat: C64,
    params: &PhysicalParams,
) -> Result<f64> {
    let sol = resolve(sp, profile, dhat, params, &[0.0])?;
    let w = if profile.is_zero() { ZERO } else { wn_trace(sp, profile, TraceForm::BForm)? };
    let vn = sol.vhat[params.dim - 1][0];
    let terms = [sp.lambda * sol.hhat, vn, w, dhat];
    let scale = terms.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    Ok((terms[0] + terms[1] + terms[2] - terms[3]).norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::composite;
    use crate::symbols::make_spectral_point;
    use approx::assert_relative_eq;

    fn exp_profile(xi: &[f64], comp: usize) -> SpectralProfile {
        let (y, w) = composite(0.0, 60.0, 60, 16);
        SpectralProfile::from_fn(xi, &y, &w, |k, y| if k == comp { C64::new((-y).exp(), 0.0) } else { ZERO }).unwrap()
    }

    #[test]
    fn trace_examples() {
        let p = PhysicalParams::unit();
        let sp = make_spectral_point(&[1.0], C64::new(3.0, 0.0), &p).unwrap();
        let prof = exp_profile(&[1.0], 1);
        for form in [TraceForm::BForm, TraceForm::AForm] {
            let w = wn_trace(&sp, &prof, form).unwrap();
            assert_relative_eq!(w.re, 11.0 / 102.0, epsilon = 1e-13);
            assert!(w.im.abs() < 1e-14);
        }
        assert_eq!(wn_trace(&sp, &SpectralProfile::zero(&[1.0]), TraceForm::BForm).unwrap(), ZERO);
    }

    #[test]
    fn hhat_examples() {
        let p = PhysicalParams::unit();
        let sp = make_spectral_point(&[1.0], C64::new(3.0, 0.0), &p).unwrap();
        let (hf, hd) = hhat(&sp, &SpectralProfile::zero(&[1.0]), C64::new(1.0, 0.0), &p).unwrap();
        assert_eq!(hf, ZERO);
        assert_relative_eq!(hd.re, 17.0 / 57.0, epsilon = 1e-15);
        let (hf, hd) = hhat(&sp, &exp_profile(&[1.0], 1), ZERO, &p).unwrap();
        assert_relative_eq!(hf.re, -11.0 / 342.0, epsilon = 1e-14);
        assert_eq!(hd, ZERO);
    }

    #[test]
    fn d_part_examples() {
        let p = PhysicalParams::unit();
        let sp = make_spectral_point(&[1.0], C64::new(3.0, 0.0), &p).unwrap();
        let xs = [0.0, 0.5, 2.0];
        let sol = resolve(&sp, &SpectralProfile::zero(&[1.0]), C64::new(1.0, 0.0), &p, &xs).unwrap();
        for (i, x) in xs.iter().enumerate() {
            assert_relative_eq!(sol.pihat[i].re, 10.0 / 19.0 * (-x).exp(), epsilon = 1e-15);
        }
        assert_relative_eq!(sol.vhat[1][0].re, 2.0 / 19.0, epsilon = 1e-15);
        let zero = resolve(&sp, &SpectralProfile::zero(&[1.0]), ZERO, &p, &xs).unwrap();
        assert!(zero.vhat.iter().flatten().all(|z| *z == ZERO) && zero.hhat == ZERO);
    }

    #[test]
    fn kinematic_condition_holds() {
        let p = PhysicalParams::unit();
        let (y, w) = composite(0.0, 40.0, 40, 16);
        for (xi, lam) in [(0.3, C64::new(0.2, 1.5)), (2.0, C64::new(-0.5, 4.0)), (0.05, C64::new(1.0, -0.3))] {
            let sp = make_spectral_point(&[xi], lam, &p).unwrap();
            let prof = SpectralProfile::from_fn(&[xi], &y, &w, |k, y| {
                C64::new((1.0 + k as f64) * (-y).exp() * y, 0.3 * (-2.0 * y).exp())
            })
            .unwrap();
            let r = kinematic_residual(&sp, &prof, C64::new(0.7, -0.2), &p).unwrap();
            assert!(r < 1e-12, "{r}");
        }
    }

    #[test]
    fn numerator_mode_is_l_times_coefficients() {
        let p = PhysicalParams::unit();
        let sp = make_spectral_point(&[0.4], C64::new(0.1, 0.9), &p).unwrap();
        let prof = exp_profile(&[0.4], 0);
        let m = moments(&prof, sp.a, sp.b, None);
        let full = kernel_coefficients(&sp, Some(&m), C64::new(1.0, 0.0), &p, false).unwrap().total();
        let num = kernel_coefficients(&sp, Some(&m), C64::new(1.0, 0.0), &p, true).unwrap().total();
        let l = l_symbol(sp.a, sp.b, &p);
        assert!((num.h - full.h * l).norm() < 1e-13 * num.h.norm());
        assert!((num.vb[1] - full.vb[1] * l).norm() < 1e-13 * num.vb[1].norm());
    }

    #[test]
    fn three_dimensional_trace_forms_agree() {
        let p = PhysicalParams::new(2.0, 0.5, 3).unwrap();
        let (y, w) = composite(0.0, 30.0, 30, 16);
        let xi = [0.6, -0.3];
        let sp = make_spectral_point(&xi, C64::new(-0.1, 2.0), &p).unwrap();
        let prof = SpectralProfile::from_fn(&xi, &y, &w, |k, y| C64::new(y * y, k as f64) * (-1.5 * y).exp()).unwrap();
        let wb = wn_trace(&sp, &prof, TraceForm::BForm).unwrap();
        let wa = wn_trace(&sp, &prof, TraceForm::AForm).unwrap();
        assert!((wb - wa).norm() < 1e-12 * wb.norm());
        assert!(kinematic_residual(&sp, &prof, C64::new(0.1, 0.0), &p).unwrap() < 1e-12);
    }
}
