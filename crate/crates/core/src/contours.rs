//! Integration paths for the inverse Laplace representation of the semigroup,
//! composite quadrature on them, and the closed-form residue around `λ_±`.
//!
//! Every family is stored with the parametrization of its `+` and `-` halves.
//! `-` halves carry orientation `-1`, so that the sum of the two
//! [`contour_integrate`] results is the contribution `(1/2πi)(∫_{Γ⁺} - ∫_{Γ⁻})`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::gauss::gl16;
use crate::lopatinskii::{solve_roots, CalibrationReport, RootSet};
use crate::symbols::PhysicalParams;

/// Maximum number of panel doublings before giving up.
pub const MAX_DOUBLINGS: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContourKind {
    /// `λ̃₀(ε) + s e^{±i(π-ε)}` with `λ̃₀(ε) = 2λ₀(ε)/sin ε`.
    GammaEps,
    /// Same shape with the calibrated validation anchor and opening.
    Validation,
    Gamma0(Sign),
    Gamma1(Sign),
    Gamma2(Sign),
    Gamma3(Sign),
    Gamma4(Sign),
    Gamma5(Sign),
}

impl std::fmt::Display for ContourKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = |x: &Sign| if *x == Sign::Plus { "+" } else { "-" };
        match self {
            ContourKind::GammaEps => write!(f, "Gamma(eps)"),
            ContourKind::Validation => write!(f, "Gamma(validation)"),
            ContourKind::Gamma0(x) => write!(f, "Gamma0{}", s(x)),
            ContourKind::Gamma1(x) => write!(f, "Gamma1{}", s(x)),
            ContourKind::Gamma2(x) => write!(f, "Gamma2{}", s(x)),
            ContourKind::Gamma3(x) => write!(f, "Gamma3{}", s(x)),
            ContourKind::Gamma4(x) => write!(f, "Gamma4{}", s(x)),
            ContourKind::Gamma5(x) => write!(f, "Gamma5{}", s(x)),
        }
    }
}

/// Geometric piece of a contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// `from + u (to - from)`, `u ∈ [0, 1]`.
    Line { from: C64, to: C64 },
    /// `start + u·dir`, `u ∈ [0, ∞)`, `|dir| = 1`.
    Ray { start: C64, dir: C64 },
    /// `center + radius·e^{iθ}`, `θ` from `theta0` to `theta1`.
    Arc { center: C64, radius: f64, theta0: f64, theta1: f64 },
}

impl Shape {
    pub fn point(&self, u: f64) -> C64 {
        match *self {
            Shape::Line { from, to } => from + (to - from) * u,
            Shape::Ray { start, dir } => start + dir * u,
            Shape::Arc { center, radius, .. } => center + C64::from_polar(radius, u),
        }
    }

    fn derivative(&self, u: f64) -> C64 {
        match *self {
            Shape::Line { from, to } => to - from,
            Shape::Ray { dir, .. } => dir,
            Shape::Arc { radius, .. } => C64::from_polar(radius, u) * C64::i(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub shape: Shape,
    /// `+1` or `-1`; see the module documentation.
    pub orient: f64,
    /// Length scale (in `λ`) of integrand features next to the segment start.
    pub grade: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub kind: ContourKind,
    pub a: Option<f64>,
    pub t_hint: f64,
    pub segments: Vec<Segment>,
}

/// Radius `g^{1/2} A^{1/2} / 4` of the circle around `λ_±`.
pub fn gamma0_radius(a: f64, gravity: f64) -> f64 {
    0.25 * gravity.sqrt() * a.sqrt()
}

fn point_segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let u = (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (p - (a + d * u)).norm()
}

fn point_ray_distance(p: C64, s: C64, dir: C64) -> f64 {
    let u = ((p - s) * dir.conj()).re.max(0.0);
    (p - (s + dir * u)).norm()
}

/// Relative clearance of the circle around `λ₊` from the deformed path
/// `Γ₁⁺ ∪ Γ₂⁺ ∪ Γ₃⁺` and from the real axis; positive when the circle is
/// disjoint from both with a 25% margin and lies on the right of the path.
pub fn gamma0_clearance(a: f64, lambda_plus: C64, gravity: f64, gamma0: f64, gamma0_tilde: f64) -> f64 {
    let r = gamma0_radius(a, gravity);
    let a2 = a * a;
    let e0 = crate::lopatinskii::eps0();
    let p2s = C64::new(-a2, a2 / 4.0);
    let p2e = C64::new(-gamma0, gamma0_tilde);
    let dir3 = C64::from_polar(1.0, PI - e0);
    let mut dist = point_segment_distance(lambda_plus, p2s, p2e).min(point_ray_distance(lambda_plus, p2e, dir3));
    for k in 0..=64 {
        let u = 0.5 * PI * k as f64 / 64.0;
        dist = dist.min((lambda_plus - C64::new(-a2, 0.0) - C64::from_polar(a2 / 4.0, u)).norm());
    }
    let y = lambda_plus.im;
    let x_path = if y <= a2 / 4.0 {
        -a2 + ((a2 / 4.0).powi(2) - y * y).max(0.0).sqrt()
    } else if y <= gamma0_tilde {
        let u = (y - a2 / 4.0) / (gamma0_tilde - a2 / 4.0);
        -(a2 * (1.0 - u) + gamma0 * u)
    } else {
        -gamma0 - (y - gamma0_tilde) / e0.tan()
    };
    let m_dist = dist / (1.25 * r) - 1.0;
    let m_axis = y / (1.25 * r) - 1.0;
    let m_side = (lambda_plus.re - x_path) / r;
    m_dist.min(m_axis).min(m_side)
}

/// Build one contour family (or half of it) from the calibration constants.
pub fn build_contour(
    kind: ContourKind,
    a: Option<f64>,
    t_hint: f64,
    calib: &CalibrationReport,
    eps: f64,
    params: &PhysicalParams,
) -> Result<Contour> {
    let needs_a = matches!(
        kind,
        ContourKind::Gamma0(_) | ContourKind::Gamma1(_) | ContourKind::Gamma2(_) | ContourKind::Gamma3(_)
    );
    let a = match (needs_a, a) {
        (true, Some(a)) => {
            if !(a > 0.0 && a <= 2.0 / 3.0 * calib.a0 * (1.0 + 1e-12)) {
                return invalid(format!("{kind} needs A in (0, 2A0/3], got {a}"));
            }
            Some(a)
        }
        (true, None) => return invalid(format!("{kind} needs a frequency A")),
        (false, Some(_)) => return invalid(format!("{kind} does not depend on A")),
        (false, None) => None,
    };
    let seg = |shape: Shape, sign: Sign, grade: f64| Segment { shape, orient: sign.value(), grade };
    let mut segments = Vec::new();
    match kind {
        ContourKind::GammaEps | ContourKind::Validation => {
            let (eps, anchor) = if kind == ContourKind::Validation {
                (calib.direct_eps, calib.direct_anchor)
            } else {
                if !(eps > 0.0 && eps < PI / 2.0) {
                    return invalid("epsilon must lie in (0, pi/2)");
                }
                let l0 = if eps >= calib.eps0 {
                    calib.gamma0
                } else if eps >= calib.eps_infty {
                    calib.lambda0_infty
                } else {
                    return invalid("no lambda0 estimate for epsilon below eps_infty");
                };
                (eps, 2.0 * l0 / eps.sin())
            };
            for s in [Sign::Plus, Sign::Minus] {
                let dir = C64::from_polar(1.0, s.value() * (PI - eps));
                segments.push(seg(Shape::Ray { start: C64::new(anchor, 0.0), dir }, s, 0.25 * anchor.max(0.1)));
            }
        }
        ContourKind::Gamma0(s) => {
            let a = a.unwrap_or_default();
            let roots = solve_roots(a, params)?;
            let (_, lam) = roots
                .get(crate::lopatinskii::RootLabel::Low { j: 1, plus: s == Sign::Plus })
                .ok_or_else(|| LabError::InvalidInput("low-regime roots required".into()))?;
            let r = gamma0_radius(a, params.gravity);
            let theta1 = s.value() * 2.0 * PI;
            segments.push(seg(Shape::Arc { center: lam, radius: r, theta0: 0.0, theta1 }, s, r));
        }
        ContourKind::Gamma1(s) => {
            let a = a.unwrap_or_default();
            let a2 = a * a;
            let shape = Shape::Arc { center: C64::new(-a2, 0.0), radius: a2 / 4.0, theta0: 0.0, theta1: s.value() * PI / 2.0 };
            segments.push(seg(shape, s, a2 / 4.0));
        }
        ContourKind::Gamma2(s) => {
            let a = a.unwrap_or_default();
            let a2 = a * a;
            let from = C64::new(-a2, s.value() * a2 / 4.0);
            let to = C64::new(-calib.gamma0, s.value() * calib.gamma0_tilde);
            segments.push(seg(Shape::Line { from, to }, s, a2 / 4.0));
        }
        ContourKind::Gamma3(s) => {
            let start = C64::new(-calib.gamma0, s.value() * calib.gamma0_tilde);
            let dir = C64::from_polar(1.0, s.value() * (PI - calib.eps0));
            segments.push(seg(Shape::Ray { start, dir }, s, 0.25 * calib.gamma0));
        }
        ContourKind::Gamma4(s) => {
            let from = C64::new(-calib.gamma_infty, 0.0);
            let to = C64::new(-calib.gamma_infty, s.value() * calib.gamma_infty_tilde);
            segments.push(seg(Shape::Line { from, to }, s, calib.gamma_infty));
        }
        ContourKind::Gamma5(s) => {
            let start = C64::new(-calib.gamma_infty, s.value() * calib.gamma_infty_tilde);
            let dir = C64::from_polar(1.0, s.value() * (PI - calib.eps_infty));
            segments.push(seg(Shape::Ray { start, dir }, s, 0.25 * calib.gamma_infty_tilde));
        }
    }
    Ok(Contour { kind, a, t_hint, segments })
}

/// Nodes and weights for `∫ g(λ) dλ`; weights include `λ'(u) du` and the orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
    /// `U_max` of each infinite segment (0 for finite ones).
    pub truncation: Vec<f64>,
    pub target_tol: f64,
    pub t: f64,
}

/// Truncation length `2 (ln(1/tol) + max(0, Re(start)·t)) / (cos ε · t)` of a ray.
pub fn ray_truncation(start: C64, dir: C64, t: f64, tol: f64) -> f64 {
    let c = -dir.re;
    2.0 * ((1.0 / tol).ln() + (start.re * t).max(0.0)) / (c * t)
}

fn graded_breaks(len: f64, first: f64, cap: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut w = first.clamp(len * 2f64.powi(-40), len);
    let cap = cap.max(w);
    let mut x = 0.0;
    while x < len {
        let step = w.min(len - x);
        x += step;
        if len - x < 1e-12 * len {
            x = len;
        }
        b.push(x);
        if w < cap {
            w = (2.0 * w).min(cap);
        }
    }
    b
}

/// Panel structure and nodes of one segment at refinement `level`.
fn segment_nodes(seg: &Segment, t: f64, tol: f64, level: u32) -> (Vec<C64>, Vec<C64>, f64) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let sub = 1usize << level;
    let window = 2.0 * (1.0 / tol).ln();
    let rule = gl16();
    let mut push_panels = |breaks: &[f64], map: &dyn Fn(f64) -> f64, shape: &Shape| {
        for w2 in breaks.windows(2) {
            let h = (w2[1] - w2[0]) / sub as f64;
            for s in 0..sub {
                let lo = w2[0] + h * s as f64;
                for (x, w) in rule.mapped(lo, lo + h) {
                    let u = map(x);
                    nodes.push(shape.point(u));
                    weights.push(seg.orient * w * shape.derivative(u));
                }
            }
        }
    };
    let mut trunc = 0.0;
    match seg.shape {
        Shape::Ray { start, dir } => {
            let umax = ray_truncation(start, dir, t, tol);
            trunc = umax;
            let cap = 8.0 / (t * (-dir.re).max(1e-3));
            let breaks = graded_breaks(umax, seg.grade, cap);
            push_panels(&breaks, &|u| u, &seg.shape);
        }
        Shape::Line { from, to } => {
            let len = (to - from).norm();
            let (r0, r1) = (from.re, to.re);
            let slope = (r1 - r0).abs();
            let reversed = r1 > r0;
            let ueff = if slope * t > window { window / (slope * t) } else { 1.0 };
            let cap = if slope > 0.0 { 8.0 / (t * slope) } else { 0.25 };
            let breaks = graded_breaks(ueff, seg.grade / len, cap.min(ueff));
            if reversed {
                push_panels(&breaks, &|u| 1.0 - u, &seg.shape);
                for w in weights.iter_mut() {
                    *w = -*w;
                }
            } else {
                push_panels(&breaks, &|u| u, &seg.shape);
            }
        }
        Shape::Arc { radius, theta0, theta1, .. } => {
            let closed = (theta1 - theta0).abs() >= 2.0 * PI - 1e-12;
            if closed {
                let n = 32 * sub;
                let h = (theta1 - theta0) / n as f64;
                for k in 0..n {
                    let u = theta0 + h * k as f64;
                    nodes.push(seg.shape.point(u));
                    weights.push(seg.orient * h * seg.shape.derivative(u));
                }
            } else {
                let _ = radius;
                let panels = 4.0;
                let breaks: Vec<f64> = (0..=4).map(|k| theta0 + (theta1 - theta0) * k as f64 / panels).collect();
                push_panels(&breaks, &|u| u, &seg.shape);
            }
        }
    }
    (nodes, weights, trunc)
}

fn max_re(seg: &Segment, t: f64, tol: f64) -> f64 {
    match seg.shape {
        Shape::Ray { start, .. } => start.re,
        Shape::Line { from, to } => from.re.max(to.re),
        Shape::Arc { center, radius, .. } => {
            let _ = (t, tol);
            center.re + radius
        }
    }
}

/// Segments whose factor `e^{λt}` stays below this bound are skipped.
const NEGLIGIBLE_LOG: f64 = -140.0;

/// Rule calibrated on the integrand `e^{λt}` alone.
pub fn quadrature(contour: &Contour, t: f64, tol: f64) -> Result<QuadratureRule> {
    if !(t > 0.0 && tol > 0.0) {
        return invalid("quadrature needs t > 0 and tol > 0");
    }
    let mut rule = QuadratureRule { nodes: vec![], weights: vec![], truncation: vec![], target_tol: tol, t };
    for seg in &contour.segments {
        let mut prev: Option<C64> = None;
        let mut done = false;
        for level in 0..=MAX_DOUBLINGS {
            let (n, w, tr) = segment_nodes(seg, t, tol, level);
            let (s, mass) = n.iter().zip(&w).fold((C64::new(0.0, 0.0), 0.0), |(s, m), (l, wt)| {
                let v = wt * (l * t).exp();
                (s + v, m + v.norm())
            });
            if let Some(p) = prev {
                if (s - p).norm() <= tol * mass.max(f64::MIN_POSITIVE) {
                    rule.nodes.extend(n);
                    rule.weights.extend(w);
                    rule.truncation.push(tr);
                    done = true;
                    break;
                }
            }
            prev = Some(s);
        }
        if !done {
            return Err(LabError::Quadrature {
                contour: contour.kind.to_string(),
                doublings: MAX_DOUBLINGS,
                change: f64::NAN,
                target: tol,
            });
        }
    }
    Ok(rule)
}

/// `(1/2πi) ∫ e^{λt} f(λ) dλ` for a vector-valued `f` of length `m`, refined by
/// panel doubling per segment until successive levels agree to `tol` relative to
/// the absolute mass of the integrand.
pub fn integrate_vec<F>(contour: &Contour, t: f64, tol: f64, m: usize, f: F) -> Result<Vec<C64>>
where
    F: Fn(C64, &mut [C64]),
{
    if !(t > 0.0 && tol > 0.0) {
        return invalid("integration needs t > 0 and tol > 0");
    }
    let mut total = vec![C64::new(0.0, 0.0); m];
    let mut buf = vec![C64::new(0.0, 0.0); m];
    let scale = 1.0 / (2.0 * PI * C64::i());
    for seg in &contour.segments {
        if max_re(seg, t, tol) * t < NEGLIGIBLE_LOG {
            continue;
        }
        let mut prev: Option<Vec<C64>> = None;
        let mut last_change = f64::NAN;
        let mut done = false;
        for level in 0..=MAX_DOUBLINGS {
            let (nodes, weights, _) = segment_nodes(seg, t, tol, level);
            let mut acc = vec![C64::new(0.0, 0.0); m];
            let mut abs = vec![0.0f64; m];
            for (l, w) in nodes.iter().zip(&weights) {
                let e = w * (l * t).exp();
                if e.norm() == 0.0 {
                    continue;
                }
                f(*l, &mut buf);
                for ((a, s), v) in acc.iter_mut().zip(abs.iter_mut()).zip(&buf) {
                    let c = e * v;
                    *a += c;
                    *s += c.norm();
                }
            }
            let mass = abs.iter().cloned().fold(0.0, f64::max);
            if let Some(p) = &prev {
                let change = acc.iter().zip(p).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                let size = acc.iter().map(|x| x.norm()).fold(0.0, f64::max);
                last_change = change;
                if change <= tol * size.max(mass) || (size == 0.0 && mass == 0.0) {
                    for (tv, a) in total.iter_mut().zip(&acc) {
                        *tv += a * scale;
                    }
                    done = true;
                    break;
                }
            }
            prev = Some(acc);
        }
        if !done {
            return Err(LabError::Quadrature {
                contour: contour.kind.to_string(),
                doublings: MAX_DOUBLINGS,
                change: last_change,
                target: tol,
            });
        }
    }
    Ok(total)
}

/// Scalar version of [`integrate_vec`].
pub fn contour_integrate<F>(contour: &Contour, integrand: F, t: f64, tol: f64) -> Result<C64>
where
    F: Fn(C64) -> C64,
{
    integrate_vec(contour, t, tol, 1, |l, out| out[0] = integrand(l)).map(|v| v[0])
}

/// Apply a prebuilt rule: `(1/2πi) Σ w e^{λt} f(λ)`.
pub fn apply_rule<F>(rule: &QuadratureRule, integrand: F) -> C64
where
    F: Fn(C64) -> C64,
{
    let s: C64 = rule.nodes.iter().zip(&rule.weights).map(|(l, w)| w * (l * rule.t).exp() * integrand(*l)).sum();
    s / (2.0 * PI * C64::i())
}

/// Closed-form value of `∫_{Γ₀^±} e^{λt} κ(λ) / L(A, B(λ)) dλ` along the
/// parametrization `λ_± + r e^{±iu}`, `u: 0 → 2π`, for `κ` analytic inside the circle:
/// `±4πi e^{λ_± t} κ(λ_±) B₁^± / ((B₁^± - B₁^∓)(B₁^± - B₂^±)(B₁^± - B₂^∓))`.
pub fn gamma0_residue_weight(sign: Sign, kappa: C64, t: f64, roots: &RootSet) -> Result<C64> {
    let plus = sign == Sign::Plus;
    let b = roots.low(1, plus)?;
    let o1 = roots.low(1, !plus)?;
    let o2 = roots.low(2, plus)?;
    let o3 = roots.low(2, !plus)?;
    let (d1, d2, d3) = (b - o1, b - o2, b - o3);
    if d1.norm().min(d2.norm()).min(d3.norm()) < 1e-14 {
        return Err(LabError::Singular {
            a: roots.a,
            lambda: b * b - roots.a * roots.a,
            what: "degenerate root separation".into(),
        });
    }
    let lam = b * b - roots.a * roots.a;
    let w = 4.0 * PI * C64::i() * (lam * t).exp() * kappa * b / (d1 * d2 * d3);
    Ok(if plus { w } else { -w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lopatinskii::gamma0_tilde;
    use approx::assert_relative_eq;

    fn calib() -> CalibrationReport {
        CalibrationReport {
            a0: 0.25,
            eps0: crate::lopatinskii::eps0(),
            gamma0: 1.0,
            gamma0_tilde: gamma0_tilde(1.0),
            lambda_infty: 0.01,
            eps_infty: 0.05,
            lambda0_infty: 3.0,
            gamma_infty: 0.001,
            gamma_infty_tilde: 6.0,
            a_infty: 8.0,
            direct_anchor: 0.6,
            direct_eps: PI / 4.0,
            check_log: vec![],
        }
    }

    #[test]
    fn contour_examples() {
        let p = PhysicalParams::unit();
        let c = calib();
        let g0 = build_contour(ContourKind::Gamma0(Sign::Plus), Some(0.01), 1.0, &c, c.eps0, &p).unwrap();
        match g0.segments[0].shape {
            Shape::Arc { radius, center, .. } => {
                assert_relative_eq!(radius, 0.025, epsilon = 1e-15);
                assert!((center.im - 0.1).abs() < 1e-4);
            }
            _ => panic!("circle expected"),
        }
        let g1 = build_contour(ContourKind::Gamma1(Sign::Plus), Some(0.1), 1.0, &c, c.eps0, &p).unwrap();
        let end = g1.segments[0].shape.point(PI / 2.0);
        assert!((end - C64::new(-0.01, 0.0025)).norm() < 1e-15);
        let ge = build_contour(ContourKind::GammaEps, None, 1.0, &c, c.eps0, &p).unwrap();
        match ge.segments[0].shape {
            Shape::Ray { start, .. } => assert_relative_eq!(start.re, 2.0 * 65f64.sqrt(), epsilon = 1e-12),
            _ => panic!("ray expected"),
        }
        assert!(build_contour(ContourKind::Gamma2(Sign::Plus), None, 1.0, &c, c.eps0, &p).is_err());
        assert!(build_contour(ContourKind::Gamma4(Sign::Plus), Some(1.0), 1.0, &c, c.eps0, &p).is_err());
        assert!(build_contour(ContourKind::Gamma1(Sign::Plus), Some(0.5), 1.0, &c, c.eps0, &p).is_err());
    }

    #[test]
    fn truncation_example() {
        let dir = C64::from_polar(1.0, PI - crate::lopatinskii::eps0());
        let u = ray_truncation(C64::new(0.0, 0.0), dir, 1.0, 1e-10);
        assert_relative_eq!(u / 2.0, 23.205, epsilon = 2e-3);
    }

    #[test]
    fn cauchy_formula_on_circle() {
        let p = PhysicalParams::unit();
        let c = calib();
        for s in [Sign::Plus, Sign::Minus] {
            let g0 = build_contour(ContourKind::Gamma0(s), Some(0.01), 1.0, &c, c.eps0, &p).unwrap();
            let center = match g0.segments[0].shape {
                Shape::Arc { center, .. } => center,
                _ => unreachable!(),
            };
            let v = contour_integrate(&g0, |l| 1.0 / (l - center), 1.0, 1e-12).unwrap();
            assert!((v - center.exp()).norm() < 1e-12, "{v}");
        }
    }

    #[test]
    fn inverse_laplace_of_reciprocal() {
        let p = PhysicalParams::unit();
        let c = calib();
        let ge = build_contour(ContourKind::GammaEps, None, 1.0, &c, PI / 4.0, &p).unwrap();
        let v = contour_integrate(&ge, |l| 1.0 / l, 1.0, 1e-10).unwrap();
        assert!((v - 1.0).norm() < 1e-8, "{v}");
        let z = contour_integrate(&ge, |_| C64::new(1.0, 0.0), 1.0, 1e-10).unwrap();
        assert!(z.norm() < 1e-8, "{z}");
    }

    #[test]
    fn rules_at_two_tolerances_agree() {
        let p = PhysicalParams::unit();
        let c = calib();
        let g0 = build_contour(ContourKind::Gamma0(Sign::Plus), Some(0.01), 1.0, &c, c.eps0, &p).unwrap();
        let center = match g0.segments[0].shape {
            Shape::Arc { center, .. } => center,
            _ => unreachable!(),
        };
        let loose = quadrature(&g0, 1.0, 1e-4).unwrap();
        let tight = quadrature(&g0, 1.0, 1e-10).unwrap();
        assert!(loose.nodes.len() <= tight.nodes.len());
        let f = |l: C64| 1.0 / (l - center);
        assert!((apply_rule(&loose, f) - apply_rule(&tight, f)).norm() < 1e-4);
        assert!(tight.nodes.len() <= 64);
    }

    #[test]
    fn residue_weight_matches_circle() {
        let p = PhysicalParams::unit();
        let c = calib();
        let a = 0.01;
        let roots = solve_roots(a, &p).unwrap();
        for s in [Sign::Plus, Sign::Minus] {
            let w = gamma0_residue_weight(s, C64::new(1.0, 0.0), 1.0, &roots).unwrap();
            let g0 = build_contour(ContourKind::Gamma0(s), Some(a), 1.0, &c, c.eps0, &p).unwrap();
            let raw = contour_integrate(
                &g0,
                |l| {
                    let b = crate::symbols::principal_sqrt(l + a * a);
                    1.0 / crate::symbols::l_symbol(a, b, &p)
                },
                1.0,
                1e-13,
            )
            .unwrap();
            // contour_integrate applies the orientation and 1/(2πi).
            let expected = w * s.value() / (2.0 * PI * C64::i());
            assert!((raw - expected).norm() / expected.norm() < 1e-8, "{raw} vs {expected}");
        }
        let wp = gamma0_residue_weight(Sign::Plus, C64::new(0.3, 0.2), 1.0, &roots).unwrap();
        let wm = gamma0_residue_weight(Sign::Minus, C64::new(0.3, -0.2), 1.0, &roots).unwrap();
        assert!((wm - wp.conj()).norm() < 1e-12 * wp.norm());
        assert_eq!(gamma0_residue_weight(Sign::Plus, C64::new(0.0, 0.0), 1.0, &roots).unwrap(), C64::new(0.0, 0.0));
    }
}
