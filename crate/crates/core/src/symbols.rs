//! Scalar symbols of the free-surface Stokes resolvent and the multiplier tables
//! built from them.
//!
//! With `A = |ξ'|` and `B = sqrt(λ + A²)` (principal branch):
//!
//! * `M(a) = (e^{-Ba} - e^{-Aa}) / (B - A)`
//! * `D(A, B) = B³ + AB² + 3A²B - A³`
//! * `L(A, B) = (B - A) D(A, B) + A (g + σA²)`

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::gauss::gl16;

/// Below this value of `|B - A| a` the difference quotient for `M` is replaced by
/// its integral representation.
pub const M_SWITCH: f64 = 1e-3;

/// Absolute floor under which `|D|` is treated as singular.
pub const D_FLOOR: f64 = 1e-200;

/// Gravity, surface tension and spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub gravity: f64,
    pub surface_tension: f64,
    pub dim: usize,
}

impl PhysicalParams {
    pub fn new(gravity: f64, surface_tension: f64, dim: usize) -> Result<Self> {
        if !(gravity.is_finite() && gravity > 0.0) {
            return invalid("gravity must be positive");
        }
        if !(surface_tension.is_finite() && surface_tension > 0.0) {
            return invalid("surface tension must be positive");
        }
        if dim < 2 {
            return invalid("dimension must be at least 2");
        }
        Ok(Self { gravity, surface_tension, dim })
    }

    /// `g = σ = 1`, `N = 2`.
    pub fn unit() -> Self {
        Self { gravity: 1.0, surface_tension: 1.0, dim: 2 }
    }

    /// `g + σA²`.
    #[inline]
    pub fn restoring(&self, a: f64) -> f64 {
        self.gravity + self.surface_tension * a * a
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::unit()
    }
}

/// A node `(ξ', λ)` together with `A` and `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub xi_prime: Vec<f64>,
    pub lambda: C64,
    pub a: f64,
    pub b: C64,
}

impl SpectralPoint {
    /// Point with an explicitly supplied `B`, used on contours where `B` is known
    /// in closed form (root points, arcs).
    pub fn with_b(xi_prime: Vec<f64>, lambda: C64, b: C64) -> Self {
        let a = norm(&xi_prime);
        Self { xi_prime, lambda, a, b }
    }

    /// Synthetic point carrying only `(A, B)`; `ξ'` is placed on the first axis.
    pub fn from_ab(a: f64, b: C64, dim: usize) -> Self {
        let mut xi = vec![0.0; dim.saturating_sub(1).max(1)];
        xi[0] = a;
        Self { xi_prime: xi, lambda: b * b - a * a, a, b }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Principal square root with `Re ≥ 0`; on the negative real axis the root on the
/// positive imaginary axis is returned.
#[inline]
pub fn principal_sqrt(z: C64) -> C64 {
    if z.im == 0.0 {
        if z.re >= 0.0 {
            return C64::new(z.re.sqrt(), 0.0);
        }
        return C64::new(0.0, (-z.re).sqrt());
    }
    let r = z.sqrt();
    if r.re < 0.0 {
        -r
    } else {
        r
    }
}

/// Build a spectral point, computing `A = |ξ'|` and the principal `B`.
pub fn make_spectral_point(xi_prime: &[f64], lambda: C64, params: &PhysicalParams) -> Result<SpectralPoint> {
    if xi_prime.len() + 1 != params.dim {
        return invalid(format!(
            "xi' has {} components but the dimension is {}",
            xi_prime.len(),
            params.dim
        ));
    }
    if !xi_prime.iter().all(|x| x.is_finite()) || !lambda.re.is_finite() || !lambda.im.is_finite() {
        return invalid("non-finite spectral point");
    }
    let a = norm(xi_prime);
    let b = principal_sqrt(lambda + a * a);
    Ok(SpectralPoint { xi_prime: xi_prime.to_vec(), lambda, a, b })
}

/// `M(x)` and its first two derivatives in `x`, for `x ≥ 0`.
#[inline]
pub fn m_kernel(a: f64, b: C64, x: f64, order: u8) -> C64 {
    let eb = (-b * x).exp();
    let m0 = m_value(a, b, x, eb);
    match order {
        0 => m0,
        1 => -(eb + a * m0),
        _ => (b + a) * eb + a * a * m0,
    }
}

/// `M(x)` given a precomputed `e^{-Bx}`.
#[inline]
pub(crate) fn m_value(a: f64, b: C64, x: f64, eb: C64) -> C64 {
    if x == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let diff = b - a;
    if diff.norm() * x < M_SWITCH {
        let rule = gl16();
        let mut s = C64::new(0.0, 0.0);
        for (th, w) in rule.mapped(0.0, 1.0) {
            s += w * (-(b * th + a * (1.0 - th)) * x).exp();
        }
        -x * s
    } else {
        (eb - (-a * x).exp()) / diff
    }
}

/// `∂_a^ℓ M(a)` for `ℓ ∈ {0, 1, 2}` and `a > 0`.
pub fn eval_m(sp: &SpectralPoint, a: f64, order: u8) -> Result<C64> {
    if !(a > 0.0) || !a.is_finite() {
        return invalid("M is evaluated at positive arguments only");
    }
    if order > 2 {
        return invalid("M derivative order must be 0, 1 or 2");
    }
    Ok(m_kernel(sp.a, sp.b, a, order))
}

#[inline]
pub fn d_symbol(a: f64, b: C64) -> C64 {
    let b2 = b * b;
    b2 * b + a * b2 + 3.0 * a * a * b - a * a * a
}

#[inline]
pub fn l_symbol(a: f64, b: C64, params: &PhysicalParams) -> C64 {
    (b - a) * d_symbol(a, b) + a * params.restoring(a)
}

/// Expanded quartic `B⁴ + 2A²B² - 4A³B + A⁴ + A(g + σA²)`.
#[inline]
pub fn l_quartic(a: f64, b: C64, params: &PhysicalParams) -> C64 {
    let b2 = b * b;
    let a2 = a * a;
    b2 * b2 + 2.0 * a2 * b2 - 4.0 * a2 * a * b + a2 * a2 + a * params.restoring(a)
}

pub fn eval_d(sp: &SpectralPoint) -> C64 {
    d_symbol(sp.a, sp.b)
}

pub fn eval_l(sp: &SpectralPoint, params: &PhysicalParams) -> C64 {
    l_symbol(sp.a, sp.b, params)
}

/// Multiplier tables `V^{BB}, V^{BM}, V^{MB}, V^{MM}` (row-major `N × N`, the last
/// index is the normal direction) and `P^{AA}, P^{AM}` (length `N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierTable {
    pub n: usize,
    pub v_bb: Vec<C64>,
    pub v_bm: Vec<C64>,
    pub v_mb: Vec<C64>,
    pub v_mm: Vec<C64>,
    pub p_aa: Vec<C64>,
    pub p_am: Vec<C64>,
}

impl MultiplierTable {
    fn zeros(n: usize) -> Self {
        let z = C64::new(0.0, 0.0);
        Self {
            n,
            v_bb: vec![z; n * n],
            v_bm: vec![z; n * n],
            v_mb: vec![z; n * n],
            v_mm: vec![z; n * n],
            p_aa: vec![z; n],
            p_am: vec![z; n],
        }
    }

    #[inline]
    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * self.n + k
    }
}

/// Evaluate every multiplier entry at `sp`. All entries vanish at `A = 0`.
pub fn eval_multipliers(sp: &SpectralPoint, params: &PhysicalParams) -> Result<MultiplierTable> {
    let n = params.dim;
    if sp.xi_prime.len() + 1 != n {
        return invalid("spectral point dimension does not match parameters");
    }
    let mut t = MultiplierTable::zeros(n);
    if sp.a == 0.0 {
        return Ok(t);
    }
    let (a, b) = (sp.a, sp.b);
    let d = d_symbol(a, b);
    if !(d.norm() > D_FLOOR) {
        return Err(LabError::Singular { a, lambda: sp.lambda, what: "D(A,B) vanishes".into() });
    }
    let i = C64::i();
    let bma = b - a;
    let bpa = b + a;
    let q = b * b + a * a;
    let inv_d = 1.0 / d;
    let inv_pd = 1.0 / (bpa * d);
    let nn = n - 1;
    let xi = &sp.xi_prime;
    for j in 0..nn {
        for k in 0..nn {
            let xx = xi[j] * xi[k];
            let id = t.idx(j, k);
            t.v_bb[id] = -xx * bma * bma * inv_pd;
            t.v_bm[id] = xx * bma * q * inv_pd;
            t.v_mb[id] = xx * bma * q * inv_pd;
            t.v_mm[id] = -xx * q * q * inv_pd;
        }
        let jn = t.idx(j, nn);
        let nj = t.idx(nn, j);
        let ixa = i * xi[j] * a;
        t.v_bb[jn] = ixa * bma * inv_d;
        t.v_bb[nj] = -ixa * bma * inv_d;
        t.v_bm[jn] = -ixa * bma * q * inv_pd;
        t.v_bm[nj] = ixa * q * inv_d;
        t.v_mb[jn] = -ixa * q * inv_d;
        t.v_mb[nj] = ixa * bma * q * inv_pd;
        t.v_mm[jn] = ixa * q * q * inv_pd;
        t.v_mm[nj] = -ixa * q * q * inv_pd;
        t.p_aa[j] = -i * xi[j] * bma * q * inv_d;
        t.p_am[j] = 2.0 * i * xi[j] * a * b * q * inv_d;
    }
    let last = t.idx(nn, nn);
    t.v_bb[last] = -a * a * bpa * inv_d;
    t.v_bm[last] = a * a * q * inv_d;
    t.v_mb[last] = a * a * q * inv_d;
    t.v_mm[last] = -a * a * q * q * inv_pd;
    t.p_aa[nn] = -a * bpa * q * inv_d;
    t.p_am[nn] = 2.0 * a * a * a * q * inv_d;
    Ok(t)
}

/// Smooth cut-off pair `φ₀(ξ') = φ(ξ'/A₀)`, `φ∞ = 1 - φ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair {
    pub a0: f64,
}

impl CutoffPair {
    pub fn new(a0: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0 < 1.0) {
            return invalid("A0 must lie in (0, 1)");
        }
        Ok(Self { a0 })
    }

    pub fn phi0(&self, a: f64) -> f64 {
        base_profile(a / self.a0)
    }

    pub fn phi_inf(&self, a: f64) -> f64 {
        1.0 - self.phi0(a)
    }
}

/// `φ(s)`: 1 for `s ≤ 1/3`, 0 for `s ≥ 2/3`, smooth in between.
pub fn base_profile(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 / 3.0 {
        return 1.0;
    }
    if s >= 2.0 / 3.0 {
        return 0.0;
    }
    let tau = 3.0 * s - 1.0;
    let up = bump_tail(tau);
    let down = bump_tail(1.0 - tau);
    down / (up + down)
}

fn bump_tail(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - (1.0 - x) * (1.0 - x))).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn spectral_point_examples() {
        let p3 = PhysicalParams::new(1.0, 1.0, 3).unwrap();
        let sp = make_spectral_point(&[3.0, 4.0], c(-9.0, 0.0), &p3).unwrap();
        assert_eq!(sp.a, 5.0);
        assert_relative_eq!(sp.b.re, 4.0, epsilon = 1e-15);
        let sp = make_spectral_point(&[0.0, 1.0], c(0.0, 2.0), &p3).unwrap();
        assert_relative_eq!(sp.b.re, 1.272_019_649_514_069, epsilon = 1e-12);
        assert_relative_eq!(sp.b.im, 0.786_151_377_757_423_3, epsilon = 1e-12);
        assert!((sp.b * sp.b - c(1.0, 2.0)).norm() < 1e-14);
        let sp = make_spectral_point(&[0.0, 0.0], c(0.0, 0.0), &p3).unwrap();
        assert_eq!(sp.b, c(0.0, 0.0));
        assert!(make_spectral_point(&[f64::NAN, 0.0], c(0.0, 0.0), &p3).is_err());
    }

    #[test]
    fn negative_axis_tie_break() {
        assert_eq!(principal_sqrt(c(-4.0, 0.0)), c(0.0, 2.0));
        assert_eq!(principal_sqrt(c(-4.0, -0.0)), c(0.0, 2.0));
        assert!(principal_sqrt(c(-4.0, -1e-300)).im < 0.0);
    }

    #[test]
    fn m_examples() {
        let sp = SpectralPoint::from_ab(1.0, c(1.0, 0.0), 2);
        assert_relative_eq!(eval_m(&sp, 2.0, 0).unwrap().re, -2.0 * (-2f64).exp(), epsilon = 1e-15);
        let sp = SpectralPoint::from_ab(5.0, c(4.0, 0.0), 2);
        assert_relative_eq!(eval_m(&sp, 1.0, 0).unwrap().re, -0.011_577_691_889_648_712, epsilon = 1e-15);
        assert_relative_eq!(eval_m(&sp, 1.0, 1).unwrap().re, 0.039_572_820_559_509_38, epsilon = 1e-15);
        assert!(eval_m(&sp, 0.0, 0).is_err());
        assert!(eval_m(&sp, -1.0, 0).is_err());
    }

    #[test]
    fn m_small_gap_is_continuous_across_switch() {
        let a = 0.7;
        let x = 3.0;
        let below = m_kernel(a, c(a + 0.99e-3 / x, 1e-6), x, 0);
        let above = m_kernel(a, c(a + 1.01e-3 / x, 1e-6), x, 0);
        assert!((below - above).norm() / below.norm() < 1e-3);
        let exact_limit = -x * (-a * x).exp();
        assert!((m_kernel(a, c(a, 0.0), x, 0).re - exact_limit).abs() < 1e-15);
    }

    #[test]
    fn d_and_l_examples() {
        let p = PhysicalParams::unit();
        assert_eq!(d_symbol(5.0, c(4.0, 0.0)), c(319.0, 0.0));
        assert_eq!(d_symbol(2.0, c(2.0, 0.0)), c(32.0, 0.0));
        let z = c(0.3, -1.2);
        assert!((d_symbol(0.0, z) - z * z * z).norm() < 1e-15);
        assert_eq!(l_symbol(1.0, c(1.0, 0.0), &p), c(2.0, 0.0));
        assert_eq!(l_symbol(5.0, c(4.0, 0.0), &p), c(-189.0, 0.0));
        assert!((l_symbol(0.0, z, &p) - z * z * z * z).norm() < 1e-15);
    }

    #[test]
    fn multiplier_examples() {
        let p3 = PhysicalParams::new(1.0, 1.0, 3).unwrap();
        let sp = make_spectral_point(&[3.0, 4.0], c(-9.0, 0.0), &p3).unwrap();
        let t = eval_multipliers(&sp, &p3).unwrap();
        let nn = t.idx(2, 2);
        assert_relative_eq!(t.v_bb[nn].re, -225.0 / 319.0, epsilon = 1e-14);
        assert_relative_eq!(t.v_bb[t.idx(0, 2)].im, -15.0 / 319.0, epsilon = 1e-14);
        assert_relative_eq!(t.p_aa[2].re, -5.0 * 9.0 * 41.0 / 319.0, epsilon = 1e-13);
        let origin = SpectralPoint::from_ab(0.0, c(0.0, 0.0), 3);
        let t0 = eval_multipliers(&origin, &p3).unwrap();
        assert!(t0.v_mm.iter().chain(&t0.p_am).all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn singular_d_is_reported() {
        let p = PhysicalParams::unit();
        // D = 0 at B = r·A where r is the real root of r³ + r² + 3r - 1.
        let r = 0.295_597_742_522_084_8;
        let sp = SpectralPoint::from_ab(1.0, c(r, 0.0), 2);
        match eval_multipliers(&sp, &p) {
            Ok(t) => assert!(t.v_bb.iter().any(|z| z.norm() > 1e12)),
            Err(e) => assert!(matches!(e, LabError::Singular { .. })),
        }
    }

    #[test]
    fn cutoff_partition() {
        let cp = CutoffPair::new(0.25).unwrap();
        for k in 0..1000 {
            let a = k as f64 * 2e-4;
            assert_eq!(cp.phi0(a) + cp.phi_inf(a), 1.0);
        }
        assert_eq!(cp.phi0(0.25 / 3.0), 1.0);
        assert_eq!(cp.phi0(0.25 * 2.0 / 3.0), 0.0);
        assert_eq!(cp.phi_inf(0.08), 0.0);
        assert!(CutoffPair::new(1.0).is_err());
    }
}
