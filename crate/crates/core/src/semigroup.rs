//! Time evolution by contour integration of the resolvent, mode by mode on a
//! tangential Fourier lattice.
//!
//! For each lattice mode `ξ'` the integral `(1/2πi)∫ e^{λt} φ_a(ξ') û(ξ', λ) dλ` is
//! evaluated on the deformed contours of its frequency band (`Γ₀…Γ₃` below the
//! cut-off, `Γ₄, Γ₅` above it), with `Γ₀` replaced by its residue. Real data give
//! conjugate-symmetric fields, so only half of the lattice is computed.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::contours::{build_contour, gamma0_residue_weight, integrate_vec, ContourKind, Sign};
use crate::data::InitialData;
use crate::error::{invalid, LabError, Result};
use crate::lopatinskii::{solve_roots, CalibrationReport};
use crate::resolvent::{kernel_coefficients, moments, KernelCoefficients, SpectralProfile};
use crate::symbols::{m_kernel, make_spectral_point, PhysicalParams, SpectralPoint, M_SWITCH};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    /// Velocity `S(t)F`.
    S,
    /// Pressure `Π(t)F`.
    Pi,
    /// Surface height `T(t)F`.
    T,
    /// Harmonic extension `E(T(t)F)` of the height.
    ET,
}

impl Operator {
    pub fn components(self, dim: usize) -> usize {
        if self == Operator::S {
            dim
        } else {
            1
        }
    }
}

/// Which contour weights `φ₀`/`φ∞` apply to the undeformed validation integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectWeight {
    Low,
    High,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    /// One deformed piece: `0..=3` low frequency, `4..=5` high frequency.
    Piece(u8),
    /// `Σ_{σ=0..3}`.
    Low,
    /// `Σ_{σ=4,5}`.
    High,
    Total,
    /// Undeformed validation contour with the given weight.
    Direct(DirectWeight),
}

impl Part {
    fn pieces(self) -> Vec<u8> {
        match self {
            Part::Piece(s) => vec![s],
            Part::Low => vec![0, 1, 2, 3],
            Part::High => vec![4, 5],
            Part::Total => vec![0, 1, 2, 3, 4, 5],
            Part::Direct(_) => vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataPart {
    F,
    D,
    Both,
}

/// `∂_t^k D_{x'}^{α'} D_N^ℓ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Derivative {
    pub k: u8,
    pub alpha: Vec<u32>,
    pub ell: u8,
}

impl Derivative {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn time(k: u8) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn normal(ell: u8) -> Self {
        Self { ell, ..Self::default() }
    }

    pub fn tangential(alpha: Vec<u32>) -> Self {
        Self { alpha, ..Self::default() }
    }

    /// `(iξ')^{α'}`.
    fn tangential_factor(&self, xi: &[f64]) -> C64 {
        self.alpha.iter().zip(xi).fold(C64::new(1.0, 0.0), |acc, (&p, &x)| acc * C64::new(0.0, x).powu(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRequest {
    pub operator: Operator,
    pub part: Part,
    pub data_part: DataPart,
    pub derivative: Derivative,
    pub times: Vec<f64>,
    pub tol: f64,
}

impl EvolutionRequest {
    pub fn new(operator: Operator, part: Part, data_part: DataPart, times: Vec<f64>, tol: f64) -> Self {
        Self { operator, part, data_part, derivative: Derivative::none(), times, tol }
    }

    pub fn with_derivative(mut self, d: Derivative) -> Self {
        self.derivative = d;
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return invalid("times must be positive");
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return invalid("tolerance must lie in (0, 1)");
        }
        if let Part::Piece(s) = self.part {
            if s > 5 {
                return invalid("piece index must be 0..=5");
            }
        }
        validate_derivative(&self.derivative, self.operator, dim)
    }
}

fn validate_derivative(d: &Derivative, op: Operator, dim: usize) -> Result<()> {
    if d.k > 1 {
        return invalid("time derivative order must be 0 or 1");
    }
    if d.ell > 2 {
        return invalid("normal derivative order must be at most 2");
    }
    if d.alpha.len() > dim - 1 {
        return invalid("tangential multi-index longer than N - 1");
    }
    if op == Operator::T && d.ell > 0 {
        return invalid("the height has no normal derivative; use ET");
    }
    Ok(())
}

/// Tangential Fourier lattice `ξ' = dξ·k`, `k ∈ [-n/2, n/2)^{N-1}`, in FFT order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub n: usize,
    pub dxi: f64,
}

impl Lattice {
    pub fn new(dim: usize, n: usize, dxi: f64) -> Result<Self> {
        if dim < 2 || dim > 3 {
            return Err(LabError::Grid("only N = 2 and N = 3 are supported".into()));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(LabError::Grid(format!("lattice size {n} must be a power of two >= 4")));
        }
        if !(dxi > 0.0 && dxi.is_finite()) {
            return Err(LabError::Grid("lattice spacing must be positive".into()));
        }
        Ok(Self { dim, n, dxi })
    }

    pub fn axes(&self) -> usize {
        self.dim - 1
    }

    pub fn n_modes(&self) -> usize {
        self.n.pow(self.axes() as u32)
    }

    fn signed(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    fn indices(&self, m: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes()];
        let mut r = m;
        for o in out.iter_mut().rev() {
            *o = r % self.n;
            r /= self.n;
        }
        out
    }

    pub fn xi(&self, m: usize) -> Vec<f64> {
        self.indices(m).into_iter().map(|i| self.signed(i) as f64 * self.dxi).collect()
    }

    /// Zero mode and Nyquist modes carry no weight.
    pub fn excluded(&self, m: usize) -> bool {
        let idx = self.indices(m);
        idx.iter().all(|&i| i == 0) || idx.iter().any(|&i| i == self.n / 2)
    }

    pub fn negate(&self, m: usize) -> usize {
        self.indices(m).into_iter().fold(0, |acc, i| acc * self.n + (self.n - i) % self.n)
    }

    /// Representative of each `±ξ'` pair: first nonzero signed index positive.
    pub fn canonical(&self, m: usize) -> bool {
        self.indices(m).into_iter().map(|i| self.signed(i)).find(|&k| k != 0).is_some_and(|k| k > 0)
    }

    /// Physical spacing `2π/(n dξ)`.
    pub fn dx(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dxi)
    }

    /// Centered physical axis `(p - n/2)·dx`.
    pub fn x_axis(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|p| (p as f64 - (self.n / 2) as f64) * dx).collect()
    }

    pub fn max_frequency(&self) -> f64 {
        (self.n / 2 - 1) as f64 * self.dxi * (self.axes() as f64).sqrt()
    }
}

/// Lattice plus `x_N` nodes and their quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lattice: Lattice,
    pub x_nodes: Vec<f64>,
    pub x_weights: Vec<f64>,
}

impl Grid {
    /// `{0}` (zero weight) followed by a composite Gauss rule on `[0, x_max]`.
    pub fn with_gauss(lattice: Lattice, x_max: f64, panels: usize, order: usize) -> Result<Self> {
        if !(x_max > 0.0) || panels == 0 || order == 0 {
            return Err(LabError::Grid("x_N rule needs x_max > 0 and at least one node".into()));
        }
        let (mut x, mut w) = crate::gauss::composite(0.0, x_max, panels, order);
        x.insert(0, 0.0);
        w.insert(0, 0.0);
        Ok(Self { lattice, x_nodes: x, x_weights: w })
    }

    /// Only the boundary node.
    pub fn boundary(lattice: Lattice) -> Self {
        Self { lattice, x_nodes: vec![0.0], x_weights: vec![0.0] }
    }
}

/// Values per `(component, mode, x_N node)` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub lattice: Lattice,
    pub x_nodes: Vec<f64>,
    pub ncomp: usize,
    pub t: f64,
    pub values: Vec<C64>,
}

impl SpectralField {
    pub fn zeros(lattice: Lattice, x_nodes: Vec<f64>, ncomp: usize, t: f64) -> Self {
        let len = ncomp * lattice.n_modes() * x_nodes.len();
        Self { lattice, x_nodes, ncomp, t, values: vec![ZERO; len] }
    }

    #[inline]
    pub fn index(&self, c: usize, m: usize, ix: usize) -> usize {
        (c * self.lattice.n_modes() + m) * self.x_nodes.len() + ix
    }

    pub fn get(&self, c: usize, m: usize, ix: usize) -> C64 {
        self.values[self.index(c, m, ix)]
    }
}

/// Physical field on the centered lattice and the `x_N` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub lattice: Lattice,
    pub x_axis: Vec<f64>,
    pub x_nodes: Vec<f64>,
    pub ncomp: usize,
    /// `values[(c·points + p)·nx + ix]`, `p` row-major over the centered lattice.
    pub values: Vec<f64>,
    /// `max|Im| / max|value|` after the inverse transform.
    pub imag_residue: f64,
    /// Set for `t < 1`, outside the range covered by the decay theory.
    pub extrapolation: bool,
    pub request: Option<EvolutionRequest>,
}

impl FieldSnapshot {
    pub fn points(&self) -> usize {
        self.lattice.n_modes()
    }

    pub fn get(&self, c: usize, p: usize, ix: usize) -> f64 {
        self.values[(c * self.points() + p) * self.x_nodes.len() + ix]
    }
}

/// Multiply boundary values by `e^{-A x_N}`.
pub fn harmonic_extension(hhat: &[C64], lattice: &Lattice, x_nodes: &[f64]) -> Result<SpectralField> {
    if hhat.len() != lattice.n_modes() {
        return Err(LabError::Grid("boundary values do not match the lattice".into()));
    }
    let mut out = SpectralField::zeros(*lattice, x_nodes.to_vec(), 1, 0.0);
    for (m, h) in hhat.iter().enumerate() {
        let a = crate::symbols::norm(&lattice.xi(m));
        for (ix, x) in x_nodes.iter().enumerate() {
            let id = out.index(0, m, ix);
            out.values[id] = h * (-a * x).exp();
        }
    }
    Ok(out)
}

/// Inverse transform `(dξ/2π)^{N-1} Σ e^{ix'·ξ'} û` on the centered lattice.
pub fn to_physical(field: &SpectralField) -> Result<FieldSnapshot> {
    let lat = field.lattice;
    let n = lat.n;
    let nx = field.x_nodes.len();
    let np = lat.n_modes();
    let scale = (lat.dxi / (2.0 * PI)).powi(lat.axes() as i32);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    let mut values = vec![0.0; field.ncomp * np * nx];
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    let mut buf = vec![ZERO; np];
    let centered = |i: usize| (i + n / 2) % n;
    for c in 0..field.ncomp {
        for ix in 0..nx {
            for (m, b) in buf.iter_mut().enumerate() {
                *b = field.get(c, m, ix);
            }
            if lat.axes() == 1 {
                fft.process(&mut buf);
            } else {
                for row in buf.chunks_mut(n) {
                    fft.process(row);
                }
                let mut col = vec![ZERO; n];
                for j in 0..n {
                    for i in 0..n {
                        col[i] = buf[i * n + j];
                    }
                    fft.process(&mut col);
                    for i in 0..n {
                        buf[i * n + j] = col[i];
                    }
                }
            }
            for (m, v) in buf.iter().enumerate() {
                let p = if lat.axes() == 1 { centered(m) } else { centered(m / n) * n + centered(m % n) };
                let z = v * scale;
                values[(c * np + p) * nx + ix] = z.re;
                max_re = max_re.max(z.re.abs());
                max_im = max_im.max(z.im.abs());
            }
        }
    }
    let x_axis = lat.x_axis();
    Ok(FieldSnapshot {
        t: field.t,
        lattice: lat,
        x_axis,
        x_nodes: field.x_nodes.clone(),
        ncomp: field.ncomp,
        values,
        imag_residue: if max_re > 0.0 { max_im / max_re } else { max_im },
        extrapolation: field.t < 1.0,
        request: None,
    })
}

/// Everything needed to evaluate the time-domain integrals at a single mode.
pub struct Evolver<'a> {
    pub params: &'a PhysicalParams,
    pub calib: &'a CalibrationReport,
    pub data: &'a InitialData,
    pub operator: Operator,
    pub part: Part,
    pub data_part: DataPart,
    pub tol: f64,
    /// Nodes used inside the `λ` integral (only the velocity depends on `B` in `x_N`).
    inner_x: Vec<f64>,
    /// Nodes of the output.
    x_nodes: Vec<f64>,
    rule: (Vec<f64>, Vec<f64>),
    tables: (Vec<f64>, Vec<f64>),
}

struct ModeData {
    xi: Vec<f64>,
    a: f64,
    dhat: C64,
    profile: Option<SpectralProfile>,
    exp_a_y: Vec<f64>,
    exp_a_x: Vec<f64>,
}

impl<'a> Evolver<'a> {
    pub fn new(
        params: &'a PhysicalParams,
        calib: &'a CalibrationReport,
        data: &'a InitialData,
        req: &EvolutionRequest,
        x_nodes: &[f64],
    ) -> Result<Self> {
        req.validate(params.dim)?;
        if data.dim != params.dim {
            return invalid("initial data and parameters disagree on the dimension");
        }
        let x_nodes = if req.operator == Operator::T { vec![0.0] } else { x_nodes.to_vec() };
        if x_nodes.is_empty() || x_nodes.iter().any(|x| !(*x >= 0.0)) {
            return invalid("x_N nodes must be nonnegative and nonempty");
        }
        let inner_x = if req.operator == Operator::S { x_nodes.clone() } else { vec![0.0] };
        let rule = data.y_rule();
        let tables = data.y_tables(&rule.0);
        Ok(Self {
            params,
            calib,
            data,
            operator: req.operator,
            part: req.part,
            data_part: req.data_part,
            tol: req.tol,
            inner_x,
            x_nodes,
            rule,
            tables,
        })
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    fn mode_data(&self, xi: &[f64]) -> ModeData {
        let a = crate::symbols::norm(xi);
        let use_f = self.data_part != DataPart::D && self.data.has_f();
        let use_d = self.data_part != DataPart::F && self.data.has_d();
        let profile = if use_f { self.data.f_profile(xi, &self.rule, &self.tables) } else { None };
        let exp_a_y = profile.as_ref().map_or(vec![], |p| p.exp_a(a));
        let exp_a_x = self.inner_x.iter().map(|x| (-a * x).exp()).collect();
        let dhat = if use_d { self.data.dhat(xi) } else { ZERO };
        ModeData { xi: xi.to_vec(), a, dhat, profile, exp_a_y, exp_a_x }
    }

    fn coefficients(&self, md: &ModeData, sp: &SpectralPoint, numerator: bool) -> Result<KernelCoefficients> {
        let mom = md.profile.as_ref().map(|p| moments(p, sp.a, sp.b, Some(&md.exp_a_y)));
        let parts = kernel_coefficients(sp, mom.as_ref(), md.dhat, self.params, numerator)?;
        Ok(match self.data_part {
            DataPart::F => parts.f,
            DataPart::D => parts.d,
            DataPart::Both => parts.total(),
        })
    }

    fn inner_len(&self, nd: usize) -> usize {
        nd * self.operator.components(self.params.dim) * self.inner_x.len()
    }

    /// Integrand values (without `e^{λt}`) laid out as `[deriv][component][inner x]`.
    fn fill(&self, md: &ModeData, sp: &SpectralPoint, numerator: bool, derivs: &[Derivative], out: &mut [C64]) -> Result<()> {
        let c = self.coefficients(md, sp, numerator)?;
        let (a, b, lam) = (sp.a, sp.b, sp.lambda);
        let nxi = self.inner_x.len();
        let ncomp = self.operator.components(self.params.dim);
        match self.operator {
            Operator::S => {
                let gap = b - a;
                for (ix, &x) in self.inner_x.iter().enumerate() {
                    let eb = (-b * x).exp();
                    let ea = md.exp_a_x[ix];
                    let m0 = if gap.norm() * x >= M_SWITCH { (eb - ea) / gap } else { m_kernel(a, b, x, 0) };
                    for (id, d) in derivs.iter().enumerate() {
                        let (kb, km) = match d.ell {
                            0 => (eb, m0),
                            1 => (-b * eb, -(eb + a * m0)),
                            _ => (b * b * eb, (b + a) * eb + a * a * m0),
                        };
                        let fac = lam.powu(d.k as u32) * d.tangential_factor(&md.xi);
                        for j in 0..ncomp {
                            out[(id * ncomp + j) * nxi + ix] = fac * (c.vb[j] * kb + c.vm[j] * km);
                        }
                    }
                }
            }
            Operator::Pi | Operator::T | Operator::ET => {
                let base = if self.operator == Operator::Pi { c.pi } else { c.h };
                for (id, d) in derivs.iter().enumerate() {
                    out[id] = base * lam.powu(d.k as u32) * d.tangential_factor(&md.xi);
                }
            }
        }
        Ok(())
    }

    fn integrate(&self, md: &ModeData, kind: ContourKind, t: f64, tol: f64, derivs: &[Derivative]) -> Result<Vec<C64>> {
        let a = match kind {
            ContourKind::Gamma1(_) | ContourKind::Gamma2(_) | ContourKind::Gamma3(_) | ContourKind::Gamma0(_) => Some(md.a),
            _ => None,
        };
        let contour = build_contour(kind, a, t, self.calib, self.calib.eps0, self.params)?;
        let err: RefCell<Option<LabError>> = RefCell::new(None);
        let len = self.inner_len(derivs.len());
        let v = integrate_vec(&contour, t, tol, len, |lam, out| {
            let sp = match make_spectral_point(&md.xi, lam, self.params) {
                Ok(sp) => sp,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    out.fill(ZERO);
                    return;
                }
            };
            if let Err(e) = self.fill(md, &sp, false, derivs, out) {
                err.borrow_mut().get_or_insert(e);
                out.fill(ZERO);
            }
        })?;
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// `(1/2πi)(∫_{Γ₀⁺} - ∫_{Γ₀⁻}) e^{λt} κ/L dλ` in closed form.
    fn residue(&self, md: &ModeData, t: f64, derivs: &[Derivative]) -> Result<Vec<C64>> {
        let roots = solve_roots(md.a, self.params)?;
        let len = self.inner_len(derivs.len());
        let mut total = vec![ZERO; len];
        let mut kappa = vec![ZERO; len];
        for (sign, plus) in [(Sign::Plus, true), (Sign::Minus, false)] {
            let b = roots.low(1, plus)?;
            let lam = b * b - md.a * md.a;
            let sp = SpectralPoint::with_b(md.xi.clone(), lam, b);
            self.fill(md, &sp, true, derivs, &mut kappa)?;
            let w = gamma0_residue_weight(sign, C64::new(1.0, 0.0), t, &roots)? * sign.value() / (2.0 * PI * C64::i());
            for (tv, k) in total.iter_mut().zip(&kappa) {
                *tv += w * k;
            }
        }
        Ok(total)
    }

    fn piece(&self, md: &ModeData, s: u8, t: f64, derivs: &[Derivative]) -> Result<Vec<C64>> {
        if s == 0 {
            return self.residue(md, t, derivs);
        }
        let kinds = |sg: Sign| match s {
            1 => ContourKind::Gamma1(sg),
            2 => ContourKind::Gamma2(sg),
            3 => ContourKind::Gamma3(sg),
            4 => ContourKind::Gamma4(sg),
            _ => ContourKind::Gamma5(sg),
        };
        let mut p = self.integrate(md, kinds(Sign::Plus), t, self.tol, derivs)?;
        let m = self.integrate(md, kinds(Sign::Minus), t, self.tol, derivs)?;
        for (x, y) in p.iter_mut().zip(&m) {
            *x += y;
        }
        Ok(p)
    }

    /// Inner values of the requested part at one mode, per time.
    pub fn mode_inner(&self, xi: &[f64], times: &[f64], derivs: &[Derivative]) -> Result<Vec<Vec<C64>>> {
        let md = self.mode_data(xi);
        let len = self.inner_len(derivs.len());
        let cut = self.calib.cutoff();
        let (w0, winf) = (cut.phi0(md.a), cut.phi_inf(md.a));
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let mut acc = vec![ZERO; len];
            if md.a == 0.0 {
                out.push(acc);
                continue;
            }
            if let Part::Direct(w) = self.part {
                let weight = match w {
                    DirectWeight::Low => w0,
                    DirectWeight::High => winf,
                    DirectWeight::One => 1.0,
                };
                if weight > 0.0 {
                    let tol = (self.tol * 1e-3).max(1e-14);
                    let v = self.integrate(&md, ContourKind::Validation, t, tol, derivs)?;
                    for (x, y) in acc.iter_mut().zip(&v) {
                        *x += weight * y;
                    }
                }
            } else {
                for s in self.part.pieces() {
                    let weight = if s <= 3 { w0 } else { winf };
                    if weight == 0.0 {
                        continue;
                    }
                    let v = self.piece(&md, s, t, derivs)?;
                    for (x, y) in acc.iter_mut().zip(&v) {
                        *x += weight * y;
                    }
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Output values at one mode, per time, laid out `[deriv][component][x node]`.
    pub fn mode_values(&self, xi: &[f64], times: &[f64], derivs: &[Derivative]) -> Result<Vec<Vec<C64>>> {
        for d in derivs {
            validate_derivative(d, self.operator, self.params.dim)?;
        }
        let inner = self.mode_inner(xi, times, derivs)?;
        if self.operator == Operator::S || self.operator == Operator::T {
            return Ok(inner);
        }
        // Pressure and extended height: apply (-A)^ℓ e^{-A x_N} after the time integral.
        let a = crate::symbols::norm(xi);
        let nx = self.x_nodes.len();
        Ok(inner
            .into_iter()
            .map(|v| {
                let mut o = Vec::with_capacity(derivs.len() * nx);
                for (id, d) in derivs.iter().enumerate() {
                    let ell = if self.operator == Operator::ET || self.operator == Operator::Pi { d.ell } else { 0 };
                    for &x in &self.x_nodes {
                        o.push(v[id] * (-a).powi(ell as i32) * (-a * x).exp());
                    }
                }
                o
            })
            .collect())
    }

    /// Spectral fields `[time][deriv]` over the whole lattice.
    pub fn evolve_lattice(&self, lattice: &Lattice, times: &[f64], derivs: &[Derivative]) -> Result<Vec<Vec<SpectralField>>> {
        if lattice.dim != self.params.dim {
            return Err(LabError::Grid("lattice dimension differs from the parameters".into()));
        }
        let modes: Vec<usize> = (0..lattice.n_modes()).filter(|&m| lattice.canonical(m) && !lattice.excluded(m)).collect();
        let results: Vec<(usize, Vec<Vec<C64>>)> = modes
            .par_iter()
            .map(|&m| self.mode_values(&lattice.xi(m), times, derivs).map(|v| (m, v)))
            .collect::<Result<_>>()?;
        let ncomp = self.operator.components(self.params.dim);
        let nx = self.x_nodes.len();
        let mut out = Vec::with_capacity(times.len());
        for (it, &t) in times.iter().enumerate() {
            let mut fields: Vec<SpectralField> =
                derivs.iter().map(|_| SpectralField::zeros(*lattice, self.x_nodes.clone(), ncomp, t)).collect();
            for (m, vals) in &results {
                let neg = lattice.negate(*m);
                let v = &vals[it];
                for (id, f) in fields.iter_mut().enumerate() {
                    for c in 0..ncomp {
                        for ix in 0..nx {
                            let z = v[(id * ncomp + c) * nx + ix];
                            let i1 = f.index(c, *m, ix);
                            let i2 = f.index(c, neg, ix);
                            f.values[i1] = z;
                            f.values[i2] = z.conj();
                        }
                    }
                }
            }
            out.push(fields);
        }
        Ok(out)
    }
}

/// Evaluate one request (any part) and return physical snapshots, one per time.
pub fn evolve_piece(
    req: &EvolutionRequest,
    data: &InitialData,
    calib: &CalibrationReport,
    params: &PhysicalParams,
    grid: &Grid,
) -> Result<Vec<FieldSnapshot>> {
    let ev = Evolver::new(params, calib, data, req, &grid.x_nodes)?;
    let fields = ev.evolve_lattice(&grid.lattice, &req.times, std::slice::from_ref(&req.derivative))?;
    fields
        .into_iter()
        .map(|mut f| {
            let mut s = to_physical(&f.remove(0))?;
            s.request = Some(req.clone());
            Ok(s)
        })
        .collect()
}

/// Sum of all deformed pieces.
pub fn evolve(
    req: &EvolutionRequest,
    data: &InitialData,
    calib: &CalibrationReport,
    params: &PhysicalParams,
    grid: &Grid,
) -> Result<Vec<FieldSnapshot>> {
    let mut r = req.clone();
    r.part = Part::Total;
    evolve_piece(&r, data, calib, params, grid)
}

/// Discrete `L²` norm over lattice points and `x_N` nodes (unit node weights).
pub fn discrete_l2(s: &FieldSnapshot) -> f64 {
    s.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative discrete `L²` distance.
pub fn relative_l2(a: &FieldSnapshot, b: &FieldSnapshot) -> f64 {
    let num: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    num / discrete_l2(b).max(f64::MIN_POSITIVE)
}

/// Decomposition-versus-direct discrepancy at each time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub t: f64,
    pub low_relative: f64,
    pub high_relative: f64,
}

/// Compare `Σ_{σ≤3}` with the `φ₀`-weighted undeformed integral and `Σ_{σ=4,5}`
/// with the `φ∞`-weighted one.
pub fn decomposition_check(
    operator: Operator,
    data_part: DataPart,
    times: &[f64],
    tol: f64,
    data: &InitialData,
    calib: &CalibrationReport,
    params: &PhysicalParams,
    grid: &Grid,
) -> Result<Vec<DecompositionReport>> {
    let run = |part| evolve_piece(&EvolutionRequest::new(operator, part, data_part, times.to_vec(), tol), data, calib, params, grid);
    let low = run(Part::Low)?;
    let dlow = run(Part::Direct(DirectWeight::Low))?;
    let high = run(Part::High)?;
    let dhigh = run(Part::Direct(DirectWeight::High))?;
    Ok((0..times.len())
        .map(|i| DecompositionReport {
            t: times[i],
            low_relative: relative_l2(&low[i], &dlow[i]),
            high_relative: relative_l2(&high[i], &dhigh[i]),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::PhysicalParams;

    fn calib() -> CalibrationReport {
        crate::lopatinskii::calibrate_a0(&PhysicalParams::unit()).unwrap()
    }

    #[test]
    fn lattice_bookkeeping() {
        let l = Lattice::new(2, 8, 0.5).unwrap();
        assert_eq!(l.xi(7), vec![-0.5]);
        assert!(l.excluded(0) && l.excluded(4));
        assert_eq!(l.negate(3), 5);
        assert!(l.canonical(3) && !l.canonical(5));
        let l3 = Lattice::new(3, 4, 1.0).unwrap();
        let m = 1 * 4 + 3;
        assert_eq!(l3.xi(m), vec![1.0, -1.0]);
        assert_eq!(l3.xi(l3.negate(m)), vec![-1.0, 1.0]);
        assert!(Lattice::new(2, 12, 1.0).is_err());
    }

    #[test]
    fn extension_examples() {
        let l = Lattice::new(2, 8, 1.0).unwrap();
        let h: Vec<C64> = (0..8).map(|m| C64::new(m as f64, 1.0)).collect();
        let f = harmonic_extension(&h, &l, &[0.0, 2f64.ln()]).unwrap();
        assert_eq!(f.get(0, 3, 0), h[3]);
        assert!((f.get(0, 1, 1) - h[1] * 0.5).norm() < 1e-15);
    }

    #[test]
    fn single_mode_gives_cosine() {
        let l = Lattice::new(2, 64, 0.25).unwrap();
        let mut f = SpectralField::zeros(l, vec![0.0], 1, 1.0);
        f.values[3] = C64::new(1.0, 0.0);
        f.values[l.negate(3)] = C64::new(1.0, 0.0);
        let s = to_physical(&f).unwrap();
        let c = 0.25 / (2.0 * PI);
        for (p, x) in s.x_axis.iter().enumerate() {
            assert!((s.get(0, p, 0) - 2.0 * c * (0.75 * x).cos()).abs() < 1e-14);
        }
        assert!(s.imag_residue < 1e-12);
    }

    #[test]
    fn gaussian_transform_round_trip() {
        let data = InitialData::surface_only(2, 1.0);
        let l = Lattice::new(2, 256, 0.1).unwrap();
        let mut f = SpectralField::zeros(l, vec![0.0], 1, 1.0);
        for m in 0..l.n_modes() {
            if !l.excluded(m) {
                f.values[m] = data.dhat(&l.xi(m));
            }
        }
        let s = to_physical(&f).unwrap();
        // The zero mode is excluded, so the mean dξ/(2π)·d̂(0) is missing.
        let missing = 0.1 / (2.0 * PI) * data.dhat(&[0.0]).re;
        for (p, x) in s.x_axis.iter().enumerate() {
            assert!((s.get(0, p, 0) + missing - data.d_physical(&[*x])).abs() < 1e-8);
        }
        let sum_sq: f64 = (0..l.n_modes()).map(|m| f.values[m].norm_sqr()).sum::<f64>();
        let parseval = sum_sq * l.dxi / (2.0 * PI);
        let phys = s.values.iter().map(|v| v * v).sum::<f64>() * l.dx();
        assert!((parseval - phys).abs() < 1e-12 * phys);
    }

    #[test]
    fn residue_matches_circle_quadrature() {
        let p = PhysicalParams::unit();
        let c = calib();
        let data = InitialData::surface_only(2, 1.0);
        let req = EvolutionRequest::new(Operator::T, Part::Piece(0), DataPart::D, vec![1.0], 1e-10);
        let ev = Evolver::new(&p, &c, &data, &req, &[0.0]).unwrap();
        let xi = [0.05];
        let closed = ev.mode_values(&xi, &[2.0], &[Derivative::none()]).unwrap()[0][0];
        let md = ev.mode_data(&xi);
        let mut quad = ZERO;
        for s in [Sign::Plus, Sign::Minus] {
            quad += ev.integrate(&md, ContourKind::Gamma0(s), 2.0, 1e-12, &[Derivative::none()]).unwrap()[0];
        }
        assert!((closed - quad).norm() < 1e-8 * closed.norm(), "{closed} {quad}");
    }

    #[test]
    fn pieces_match_direct_integral_per_mode() {
        let p = PhysicalParams::unit();
        let c = calib();
        let data = InitialData::default_library(2);
        let xs = [0.0, 0.7, 3.0];
        for (op, xi) in [(Operator::T, 0.03), (Operator::S, 0.2), (Operator::Pi, 0.11), (Operator::S, 0.9)] {
            for t in [1.0, 5.0] {
                let run = |part| {
                    let req = EvolutionRequest::new(op, part, DataPart::Both, vec![t], 1e-10);
                    Evolver::new(&p, &c, &data, &req, &xs).unwrap().mode_values(&[xi], &[t], &[Derivative::none()]).unwrap()
                };
                let dec = run(Part::Total).remove(0);
                let dir = run(Part::Direct(DirectWeight::One)).remove(0);
                let scale = dir.iter().map(|z| z.norm()).fold(0.0, f64::max);
                for (x, y) in dec.iter().zip(&dir) {
                    assert!((x - y).norm() < 1e-7 * scale, "{op:?} xi={xi} t={t}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn zero_data_and_linearity() {
        let p = PhysicalParams::unit();
        let c = calib();
        let data = InitialData::default_library(2);
        let zero = data.scaled(0.0);
        let req = EvolutionRequest::new(Operator::S, Part::Low, DataPart::Both, vec![1.5], 1e-10);
        let v0 = Evolver::new(&p, &c, &zero, &req, &[0.5]).unwrap().mode_values(&[0.1], &[1.5], &[Derivative::none()]).unwrap();
        assert!(v0[0].iter().all(|z| *z == ZERO));
        let v1 = Evolver::new(&p, &c, &data, &req, &[0.5]).unwrap().mode_values(&[0.1], &[1.5], &[Derivative::none()]).unwrap();
        let d2 = data.scaled(2.0);
        let v2 = Evolver::new(&p, &c, &d2, &req, &[0.5]).unwrap().mode_values(&[0.1], &[1.5], &[Derivative::none()]).unwrap();
        for (a, b) in v1[0].iter().zip(&v2[0]) {
            assert!((2.0 * a - b).norm() <= 1e-12 * b.norm());
        }
    }

    #[test]
    fn time_derivative_matches_differences() {
        let p = PhysicalParams::unit();
        let c = calib();
        let data = InitialData::default_library(2);
        let req = EvolutionRequest::new(Operator::S, Part::Total, DataPart::Both, vec![3.0], 1e-11);
        let ev = Evolver::new(&p, &c, &data, &req, &[0.4]).unwrap();
        let h = 1e-3;
        for xi in [0.04, 0.3] {
            let v = ev.mode_values(&[xi], &[3.0 - h, 3.0, 3.0 + h], &[Derivative::none(), Derivative::time(1)]).unwrap();
            for j in 0..2 {
                let fd = (v[2][j] - v[0][j]) / (2.0 * h);
                let exact = v[1][2 + j];
                assert!((fd - exact).norm() < 1e-4 * exact.norm().max(1e-12), "{fd} {exact}");
            }
        }
    }

    #[test]
    fn real_data_give_real_fields() {
        let p = PhysicalParams::unit();
        let c = calib();
        let data = InitialData::default_library(2);
        let l = Lattice::new(2, 32, 0.05).unwrap();
        let g = Grid::with_gauss(l, 4.0, 1, 3).unwrap();
        let req = EvolutionRequest::new(Operator::S, Part::Total, DataPart::Both, vec![1.0], 1e-8);
        let s = evolve(&req, &data, &c, &p, &g).unwrap();
        assert!(s[0].imag_residue < 1e-10, "{}", s[0].imag_residue);
        assert!(!s[0].extrapolation);
    }

    #[test]
    fn height_oscillates_at_capillary_gravity_frequency() {
        let p = PhysicalParams::unit();
        let c = calib();
        let data = InitialData::surface_only(2, 1.0);
        let a = 0.04;
        let req = EvolutionRequest::new(Operator::T, Part::Piece(0), DataPart::D, vec![1.0], 1e-10);
        let ev = Evolver::new(&p, &c, &data, &req, &[0.0]).unwrap();
        let times: Vec<f64> = (0..4000).map(|i| 1.0 + 0.025 * i as f64).collect();
        let v = ev.mode_values(&[a], &times, &[Derivative::none()]).unwrap();
        let crossings: Vec<f64> = (1..times.len())
            .filter(|&i| v[i - 1][0].re.signum() != v[i][0].re.signum())
            .map(|i| {
                let (y0, y1) = (v[i - 1][0].re, v[i][0].re);
                times[i - 1] + 0.025 * y0 / (y0 - y1)
            })
            .collect();
        assert!(crossings.len() > 4);
        let spacing = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let expected = PI / a.sqrt();
        assert!((spacing - expected).abs() < 0.05 * expected, "{spacing} vs {expected}");
    }
}
