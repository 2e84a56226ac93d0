//! Roots of the Lopatinskii determinant `L(A, ·)` viewed as a quartic in `B`,
//! their asymptotic expansions, the spectral stability scan, and calibration of
//! the frequency split `A₀` and the contour constants derived from the root locus.

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contours;
use crate::error::{invalid, LabError, Result};
use crate::symbols::{l_quartic, l_symbol, m_kernel, PhysicalParams};

/// `ε₀ = arctan(1/8)`, the opening of the low-frequency rays.
pub fn eps0() -> f64 {
    (1.0f64 / 8.0).atan()
}

/// Coefficients `(1, 0, 2A², -4A³, A⁴ + A(g + σA²))` of `L` as a monic quartic in `B`.
pub fn quartic_coefficients(a: f64, params: &PhysicalParams) -> [f64; 5] {
    let a2 = a * a;
    [1.0, 0.0, 2.0 * a2, -4.0 * a2 * a, a2 * a2 + a * params.restoring(a)]
}

/// Branch tag of a root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootLabel {
    /// `B_j^±` of the small-`A` expansion; `j ∈ {1, 2}`, `plus` selects the sign.
    Low { j: u8, plus: bool },
    /// `B_j` following `a_j A` for large `A`; `j ∈ 1..=4`.
    High { j: u8 },
}

impl std::fmt::Display for RootLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RootLabel::Low { j, plus } => write!(f, "B{}{}", j, if *plus { "+" } else { "-" }),
            RootLabel::High { j } => write!(f, "B{}", j),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Low,
    High,
}

/// The four roots of `L(A, ·)` at one `A`, labeled, with `λ = B² - A²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub a: f64,
    pub regime: Regime,
    pub roots: [C64; 4],
    pub labels: [RootLabel; 4],
    pub lambdas: [C64; 4],
}

impl RootSet {
    pub fn get(&self, label: RootLabel) -> Option<(C64, C64)> {
        self.labels.iter().position(|l| *l == label).map(|i| (self.roots[i], self.lambdas[i]))
    }

    /// `B_j^±` in the low regime.
    pub fn low(&self, j: u8, plus: bool) -> Result<C64> {
        self.get(RootLabel::Low { j, plus })
            .map(|x| x.0)
            .ok_or_else(|| LabError::InvalidInput(format!("root set at A = {} is not in the low regime", self.a)))
    }

    /// Roots with `Re B ≥ 0`, i.e. zeros of `L(A, sqrt(λ + A²))` on the principal branch.
    pub fn physical(&self) -> Vec<(RootLabel, C64, C64)> {
        (0..4)
            .filter(|&i| self.roots[i].re >= 0.0)
            .map(|i| (self.labels[i], self.roots[i], self.lambdas[i]))
            .collect()
    }

    /// Residual scale `max(1, A⁴ + A(g + σA²))`.
    pub fn scale(&self, params: &PhysicalParams) -> f64 {
        1f64.max(quartic_coefficients(self.a, params)[4])
    }
}

fn raw_roots(a: f64, params: &PhysicalParams) -> [C64; 4] {
    let c = quartic_coefficients(a, params);
    let s = (1..5)
        .map(|k| c[k].abs().powf(1.0 / k as f64))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let m = Matrix4::new(
        0.0, 0.0, 0.0, -c[4] / s.powi(4),
        1.0, 0.0, 0.0, -c[3] / s.powi(3),
        0.0, 1.0, 0.0, -c[2] / s.powi(2),
        0.0, 0.0, 1.0, -c[1] / s,
    );
    let ev = m.complex_eigenvalues();
    let mut out = [C64::new(0.0, 0.0); 4];
    for (o, e) in out.iter_mut().zip(ev.iter()) {
        *o = C64::new(e.re * s, e.im * s);
    }
    out
}

fn polish(a: f64, params: &PhysicalParams, mut b: C64) -> C64 {
    let a2 = a * a;
    let mut res = l_quartic(a, b, params).norm();
    for _ in 0..3 {
        let dl = 4.0 * b * b * b + 4.0 * a2 * b - 4.0 * a2 * a;
        if dl.norm() == 0.0 {
            break;
        }
        let next = b - l_quartic(a, b, params) / dl;
        let r = l_quartic(a, next, params).norm();
        if r < res {
            b = next;
            res = r;
        } else {
            break;
        }
    }
    b
}

/// Roots polished by Newton steps and closed under conjugation.
fn conjugate_closed_roots(a: f64, params: &PhysicalParams) -> [C64; 4] {
    let raw = raw_roots(a, params);
    let upper: Vec<C64> = raw.iter().copied().filter(|z| z.im > 0.0).collect();
    let lower = raw.iter().filter(|z| z.im < 0.0).count();
    let mut out = Vec::with_capacity(4);
    if upper.len() == lower {
        for z in &upper {
            let p = polish(a, params, *z);
            let p = if p.im > 0.0 { p } else { *z };
            out.push(p);
            out.push(p.conj());
        }
        for z in raw.iter().filter(|z| z.im == 0.0) {
            let p = polish(a, params, *z);
            out.push(C64::new(p.re, 0.0));
        }
    } else {
        out.extend(raw.iter().map(|z| polish(a, params, *z)));
    }
    [out[0], out[1], out[2], out[3]]
}

/// Real root of `x³ + x² + 3x - 1` in `(0, 1/2)`.
pub fn a2_root() -> f64 {
    let f = |x: f64| ((x + 1.0) * x + 3.0) * x - 1.0;
    bisect(f, 0.0, 0.5)
}

/// The numbers `a_j` with `x⁴ + 2x² - 4x + 1 = (x - 1)(x³ + x² + 3x - 1)`.
pub fn a_coefficients() -> [C64; 4] {
    let a2 = a2_root();
    // Remaining pair: sum -1 - a2, product 1/a2.
    let re = (-1.0 - a2) / 2.0;
    let im = (1.0 / a2 - re * re).sqrt();
    [C64::new(1.0, 0.0), C64::new(a2, 0.0), C64::new(re, im), C64::new(re, -im)]
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn templates(a: f64, params: &PhysicalParams, regime: Regime) -> ([C64; 4], [RootLabel; 4]) {
    match regime {
        Regime::Low => {
            let r = params.gravity.powf(0.25) * a.powf(0.25);
            let q = std::f64::consts::FRAC_PI_4;
            (
                [
                    C64::from_polar(r, q),
                    C64::from_polar(r, -q),
                    C64::from_polar(r, 3.0 * q),
                    C64::from_polar(r, -3.0 * q),
                ],
                [
                    RootLabel::Low { j: 1, plus: true },
                    RootLabel::Low { j: 1, plus: false },
                    RootLabel::Low { j: 2, plus: true },
                    RootLabel::Low { j: 2, plus: false },
                ],
            )
        }
        Regime::High => {
            let aj = a_coefficients();
            let s = params.surface_tension;
            let t = aj.map(|x| x * a + s / (4.0 * (1.0 - x - x * x * x)));
            (t, [1u8, 2, 3, 4].map(|j| RootLabel::High { j }))
        }
    }
}

const PERMS: [[usize; 4]; 24] = {
    let mut out = [[0usize; 4]; 24];
    let mut n = 0;
    let mut i = 0;
    while i < 4 {
        let mut j = 0;
        while j < 4 {
            let mut k = 0;
            while k < 4 {
                if i != j && j != k && i != k {
                    out[n] = [i, j, k, 6 - i - j - k];
                    n += 1;
                }
                k += 1;
            }
            j += 1;
        }
        i += 1;
    }
    out
};

/// Solve `L(A, B) = 0` and label the four roots.
///
/// Labels follow the small-`A` quadrant templates for `A < 1` and the large-`A`
/// templates `a_j A + σ/(4(1 - a_j - a_j³))` otherwise, by minimal total distance.
/// Ties produced purely by conjugation symmetry are broken by giving the earlier
/// label the root with the larger imaginary part, then the larger real part.
pub fn solve_roots(a: f64, params: &PhysicalParams) -> Result<RootSet> {
    if !(a > 0.0) || !a.is_finite() {
        return invalid("solve_roots needs A > 0");
    }
    let roots = conjugate_closed_roots(a, params);
    let regime = if a < 1.0 { Regime::Low } else { Regime::High };
    let (tpl, labels) = templates(a, params, regime);
    let cost = |p: &[usize; 4]| -> f64 { (0..4).map(|i| (roots[p[i]] - tpl[i]).norm()).sum() };
    let mut scored: Vec<(f64, [usize; 4])> = PERMS.iter().map(|p| (cost(p), *p)).collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));
    let best = scored[0].0;
    let tol = 1e-9 * (best + roots.iter().map(|r| r.norm()).fold(0.0, f64::max));
    let tied: Vec<[usize; 4]> = scored.iter().take_while(|s| s.0 - best <= tol).map(|s| s.1).collect();
    let chosen = if tied.len() == 1 {
        tied[0]
    } else {
        // Accept only ties that map into each other under conjugation of the
        // roots together with the conjugate pairing of the templates.
        let mirror: [usize; 4] = std::array::from_fn(|i| {
            (0..4)
                .min_by(|&x, &y| (tpl[x] - tpl[i].conj()).norm().total_cmp(&(tpl[y] - tpl[i].conj()).norm()))
                .unwrap_or(i)
        });
        let near = |x: C64, y: C64| (x - y).norm() <= 1e-12 * x.norm().max(1e-300);
        let conj_equiv = |p: &[usize; 4], q: &[usize; 4]| {
            (0..4).all(|i| {
                let (x, y) = (roots[p[i]], roots[q[i]]);
                near(x, y) || near(x, y.conj())
            }) || (0..4).all(|i| near(roots[q[i]], roots[p[mirror[i]]].conj()))
        };
        if let Some(bad) = tied.iter().find(|q| !conj_equiv(&tied[0], q)) {
            return Err(LabError::Classification {
                a,
                first: format!("{:?}", tied[0].map(|i| roots[i])),
                second: format!("{:?}", bad.map(|i| roots[i])),
            });
        }
        *tied
            .iter()
            .max_by(|p, q| {
                let kp = p.map(|i| (roots[i].im, roots[i].re));
                let kq = q.map(|i| (roots[i].im, roots[i].re));
                kp.partial_cmp(&kq).unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty tie set")
    };
    let r = chosen.map(|i| roots[i]);
    let lambdas = r.map(|b| b * b - a * a);
    Ok(RootSet { a, regime, roots: r, labels, lambdas })
}

/// `λ_± = ±i g^{1/2} A^{1/2} - 2A² ± i σ g^{-1/2} A^{5/2} / 2`.
///
/// The third coefficient follows from `(λ + 2A²)² = -gA - σA³ + 4A³B`; the
/// remainder is `O(A^{11/4})`.
pub fn lambda_low_asymptotic(a: f64, params: &PhysicalParams) -> (C64, C64) {
    let g = params.gravity;
    let s = params.surface_tension;
    let plus = C64::new(-2.0 * a * a, g.sqrt() * a.sqrt() + 0.5 * s / g.sqrt() * a.powf(2.5));
    (plus, plus.conj())
}

/// `λ₁ ≈ -σA/2 - 3σ²/16` and `λ₂ ≈ -(1 - a₂²)A² + a₂σA / (2(1 - a₂ - a₂³))`.
pub fn lambda_high_asymptotic(a: f64, params: &PhysicalParams) -> (C64, C64) {
    let s = params.surface_tension;
    let a2 = a2_root();
    let l1 = -s * a / 2.0 - 3.0 * s * s / 16.0;
    let l2 = -(1.0 - a2 * a2) * a * a + a2 * s / (2.0 * (1.0 - a2 - a2 * a2 * a2)) * a;
    (C64::new(l1, 0.0), C64::new(l2, 0.0))
}

/// Roots of `z³ + 2z² + 12z - 8`: the real root in `(0, 1)` and the complex pair.
pub fn cubic_lemma_roots() -> (f64, C64, C64) {
    let f = |x: f64| ((x + 2.0) * x + 12.0) * x - 8.0;
    let alpha = bisect(f, 0.0, 1.0);
    // Deflate: z² + (2 + α) z + 8/α.
    let p = 2.0 + alpha;
    let q = 8.0 / alpha;
    let disc = C64::new(p * p - 4.0 * q, 0.0).sqrt();
    let b1 = (-p + disc) / 2.0;
    let b2 = (-p - disc) / 2.0;
    (alpha, b1, b2)
}

/// Outcome of a stability scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityMargin {
    /// Minimum over the grid of `-max Re λ` among physical roots.
    pub margin: f64,
    pub worst_a: f64,
    /// Largest residual `|L(A, B)| / scale` met during the scan.
    pub max_residual: f64,
}

/// Check that every physical root has `Re λ < 0` on the grid.
pub fn stability_scan(a_grid: &[f64], params: &PhysicalParams) -> Result<StabilityMargin> {
    if a_grid.is_empty() || a_grid.iter().any(|a| !(*a > 0.0)) {
        return invalid("stability scan needs a nonempty grid of positive A");
    }
    let local: Vec<Result<(f64, f64, f64)>> = a_grid
        .par_iter()
        .map(|&a| {
            let rs = solve_roots(a, params)?;
            let phys = rs.physical();
            if phys.is_empty() {
                return Err(LabError::Stability { a, re_lambda: f64::NAN });
            }
            let max_re = phys.iter().map(|p| p.2.re).fold(f64::NEG_INFINITY, f64::max);
            let scale = rs.scale(params);
            let res = rs.roots.iter().map(|b| l_symbol(a, *b, params).norm() / scale).fold(0.0, f64::max);
            Ok((a, -max_re, res))
        })
        .collect();
    let mut best = StabilityMargin { margin: f64::INFINITY, worst_a: f64::NAN, max_residual: 0.0 };
    for r in local {
        let (a, m, res) = r?;
        if !(m > 0.0) {
            return Err(LabError::Stability { a, re_lambda: -m });
        }
        if m < best.margin {
            best.margin = m;
            best.worst_a = a;
        }
        best.max_residual = best.max_residual.max(res);
    }
    Ok(best)
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    let mut out: Vec<f64> = (0..n).map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()).collect();
    out[0] = lo;
    out[n - 1] = hi;
    out
}

/// One logged inequality: its worst relative margin and where it was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub id: String,
    pub worst_margin: f64,
    pub at: f64,
}

/// Constants fixing the contour families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub a0: f64,
    pub eps0: f64,
    pub gamma0: f64,
    pub gamma0_tilde: f64,
    pub lambda_infty: f64,
    pub eps_infty: f64,
    /// Estimate of `λ₀(ε∞)` used for the anchor of the high-frequency rays.
    pub lambda0_infty: f64,
    pub gamma_infty: f64,
    pub gamma_infty_tilde: f64,
    pub a_infty: f64,
    /// Anchor and opening of the undeformed validation contour.
    pub direct_anchor: f64,
    pub direct_eps: f64,
    pub check_log: Vec<CheckEntry>,
}

impl CalibrationReport {
    pub fn cutoff(&self) -> crate::symbols::CutoffPair {
        crate::symbols::CutoffPair { a0: self.a0 }
    }

    /// Report assembled from explicit values, deriving the dependent constants.
    pub fn from_overrides(params: &PhysicalParams, a0: f64, gamma0: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0 < 1.0) {
            return invalid("A0 must lie in (0, 1)");
        }
        if !(gamma0 >= 1.0) {
            return invalid("gamma0 must be at least 1");
        }
        let mut log = Vec::new();
        finish_calibration(params, a0, gamma0, &mut log)
    }
}

/// `γ̃₀ = (1 + 2√65) γ₀ / 8`.
pub fn gamma0_tilde(gamma0: f64) -> f64 {
    (1.0 + 2.0 * 65f64.sqrt()) * gamma0 / 8.0
}

/// Normalized lower bound `|L| / {|λ|(|λ|^{1/2} + A)² + A(g + σA²)}`.
pub fn l_ratio(lambda: C64, a: f64, params: &PhysicalParams) -> f64 {
    let b = crate::symbols::principal_sqrt(lambda + a * a);
    let m = lambda.norm();
    let den = m * (m.sqrt() + a).powi(2) + a * params.restoring(a);
    l_symbol(a, b, params).norm() / den
}

/// Empirical `λ₀(ε)`: the smallest `λ₀ ≥ 1` on a geometric ladder for which the
/// infimum of [`l_ratio`] over `Σ_ε ∩ {|λ| ≥ λ₀}` is at least half of the
/// infimum over `|λ| ≥ 100`.
pub fn estimate_lambda0(eps: f64, params: &PhysicalParams) -> f64 {
    let radii = logspace(1e-2, 1e4, 241);
    let a_grid = logspace(1e-4, 1e4, 97);
    let nth = 120;
    let th_max = std::f64::consts::PI - eps;
    // Infimum over (θ, A) for each radius.
    let per_radius: Vec<f64> = radii
        .par_iter()
        .map(|&r| {
            let mut m = f64::INFINITY;
            for k in 0..=nth {
                let th = th_max * k as f64 / (nth as f64 + 0.5);
                let lam = C64::from_polar(r, th);
                for &a in &a_grid {
                    m = m.min(l_ratio(lam, a, params));
                }
            }
            m
        })
        .collect();
    let inf_from = |l0: f64| -> f64 {
        radii.iter().zip(&per_radius).filter(|(r, _)| **r >= l0).map(|(_, m)| *m).fold(f64::INFINITY, f64::min)
    };
    let reference = inf_from(100.0);
    let mut l0 = 1.0;
    while l0 < 100.0 {
        if inf_from(l0) >= 0.5 * reference {
            return l0;
        }
        l0 *= 1.1;
    }
    100.0
}

fn push(log: &mut Vec<CheckEntry>, id: &str, worst: (f64, f64)) {
    log.push(CheckEntry { id: id.to_string(), worst_margin: worst.0, at: worst.1 });
}

fn worse(cur: (f64, f64), m: f64, at: f64) -> (f64, f64) {
    if m < cur.0 {
        (m, at)
    } else {
        cur
    }
}

/// Check the small-frequency inequalities on a 200-point log grid in `(0, A₀]`.
/// Returns the per-inequality worst margins; admissible iff all are positive.
pub fn admissibility(a0: f64, gamma0: f64, params: &PhysicalParams) -> Result<Vec<CheckEntry>> {
    let c = 0.5;
    let g = params.gravity;
    let grid = logspace(a0 * 1e-6, a0, 200);
    let g0t = gamma0_tilde(gamma0);
    let a_samples = logspace(1e-3, 1e3, 49);
    let mut re_l = (f64::INFINITY, 0.0);
    let mut sep = (f64::INFINITY, 0.0);
    let mut mb = (f64::INFINITY, 0.0);
    let mut geo = (f64::INFINITY, 0.0);
    for &a in &grid {
        let rs = solve_roots(a, params)?;
        let b1p = rs.low(1, true)?;
        let b1m = rs.low(1, false)?;
        let b2p = rs.low(2, true)?;
        let b2m = rs.low(2, false)?;
        let lp = b1p * b1p - a * a;
        re_l = worse(re_l, (-lp.re - a * a) / (a * a), a);
        let need = c * 2f64.sqrt() * g.powf(0.25) * a.powf(0.25);
        let s = (b1p - b1m).norm().min((b1p - b2p).norm()).min((b1p - b2m).norm());
        sep = worse(sep, s / need - 1.0, a);
        for b in [b1p, b1m] {
            for &x in &a_samples {
                let x = x / a.powf(0.25);
                let bound = 2.0 * (g * a).powf(-0.25) * (-a * x).exp();
                let v = m_kernel(a, b, x, 0).norm();
                if bound > 0.0 && bound.is_finite() {
                    mb = worse(mb, 1.0 - v / bound, a);
                }
            }
        }
        if a <= 2.0 / 3.0 * a0 {
            let m = contours::gamma0_clearance(a, lp, g, gamma0, g0t);
            geo = worse(geo, m, a);
        }
    }
    let mut log = Vec::new();
    push(&mut log, "re_lambda_le_minus_a2", re_l);
    push(&mut log, "root_separation", sep);
    push(&mut log, "m_bound", mb);
    push(&mut log, "gamma0_clearance", geo);
    Ok(log)
}

fn admissible(a0: f64, gamma0: f64, params: &PhysicalParams) -> bool {
    match admissibility(a0, gamma0, params) {
        Ok(log) => log.iter().all(|e| e.worst_margin > 0.0),
        Err(_) => false,
    }
}

/// Calibrate `A₀`, `γ₀`, `γ∞` and the contour constants for `params`.
pub fn calibrate_a0(params: &PhysicalParams) -> Result<CalibrationReport> {
    let gamma0 = estimate_lambda0(eps0(), params);
    let mut lo = None;
    for k in 1..=20 {
        let cand = 0.5f64.powi(k);
        if admissible(cand, gamma0, params) {
            lo = Some(cand);
            break;
        }
    }
    let mut lo = lo.ok_or_else(|| LabError::Calibration("no admissible A0 down to 2^-20".into()))?;
    let mut hi = (2.0 * lo).min(1.0);
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        if mid < 1.0 && admissible(mid, gamma0, params) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut log = admissibility(lo, gamma0, params)?;
    finish_calibration(params, lo, gamma0, &mut log)
}

fn finish_calibration(
    params: &PhysicalParams,
    a0: f64,
    gamma0: f64,
    log: &mut Vec<CheckEntry>,
) -> Result<CalibrationReport> {
    let eps_0 = eps0();
    let g0t = gamma0_tilde(gamma0);
    // Root locus over the support of φ∞.
    let locus = logspace(a0 / 3.0, 1e4, 400);
    let mut max_re = f64::NEG_INFINITY;
    let mut max_arg = 0.0f64;
    let mut max_im = 0.0f64;
    let mut at_im = a0 / 3.0;
    for &a in &locus {
        for (_, _, lam) in solve_roots(a, params)?.physical() {
            max_re = max_re.max(lam.re);
            max_arg = max_arg.max((-lam).arg().abs());
            if lam.im.abs() > max_im {
                max_im = lam.im.abs();
                at_im = a;
            }
        }
    }
    if !(max_re < 0.0) {
        return Err(LabError::Calibration("root with nonnegative real part in supp phi_inf".into()));
    }
    let lambda_infty = 0.9 * (-max_re);
    let eps_infty = 0.9 * (std::f64::consts::FRAC_PI_2 - max_arg);
    let gamma_infty = lambda_infty.min(0.25 * (a0 / 6.0).powi(2));
    let lambda0_infty = estimate_lambda0(eps_infty, params);
    let anchor_infty = 2.0 * lambda0_infty / eps_infty.sin();
    let gamma_infty_tilde = eps_infty.tan() * (anchor_infty + gamma_infty);
    push(log, "gamma4_encloses_roots", ((gamma_infty_tilde - max_im) / gamma_infty_tilde, at_im));
    push(log, "gamma4_right_of_roots", ((-max_re - gamma_infty) / gamma_infty, 0.0));

    let a_infty = estimate_a_infty(params, gamma_infty, gamma_infty_tilde);
    push(
        log,
        "a_infty_sufficient",
        ((a_infty * a_infty - 2.0 * gamma_infty - gamma_infty_tilde) / (a_infty * a_infty), a_infty),
    );

    let direct_eps = std::f64::consts::FRAC_PI_4;
    let direct_anchor = estimate_direct_anchor(params, a0, direct_eps)?;

    Ok(CalibrationReport {
        a0,
        eps0: eps_0,
        gamma0,
        gamma0_tilde: g0t,
        lambda_infty,
        eps_infty,
        lambda0_infty,
        gamma_infty,
        gamma_infty_tilde,
        a_infty,
        direct_anchor,
        direct_eps,
        check_log: log.clone(),
    })
}

/// Worst relative margin of the three high-frequency inequalities on the
/// vertical segment `λ = -γ∞ + iu`, `0 ≤ u ≤ γ̃∞`, at frequency `A`.
pub fn gamma4_margin(a: f64, params: &PhysicalParams, gamma_infty: f64, gamma_infty_tilde: f64) -> f64 {
    let mut worst = f64::INFINITY;
    let s = params.surface_tension;
    for k in 0..=64 {
        let u = gamma_infty_tilde * k as f64 / 64.0;
        let lam = C64::new(-gamma_infty, u);
        let b = crate::symbols::principal_sqrt(lam + a * a);
        worst = worst.min(b.re / (0.5 * a) - 1.0);
        worst = worst.min(1.0 - b.norm() / (2.0 * a));
        worst = worst.min(crate::symbols::d_symbol(a, b).norm() / a.powi(3) - 1.0);
        let lb = s / 16.0 * (a / 8.0).powi(3);
        worst = worst.min(l_symbol(a, b, params).norm() / lb - 1.0);
    }
    worst
}

/// Smallest dyadic `A∞` with `A∞² ≥ 2γ∞ + γ̃∞` at which the segment
/// inequalities hold on `[A∞, 10⁴A∞]`.
fn estimate_a_infty(params: &PhysicalParams, gi: f64, git: f64) -> f64 {
    for k in -6..=30 {
        let cand = 2f64.powi(k);
        if cand * cand < 2.0 * gi + git {
            continue;
        }
        let ok = logspace(cand, cand * 1e4, 60).iter().all(|&a| gamma4_margin(a, params, gi, git) > 0.0);
        if ok {
            return cand;
        }
    }
    f64::INFINITY
}

/// Anchor of the validation contour `λ̃ + s e^{±i(π-ε)}` enclosing every physical
/// root (and, for `A ≤ 2A₀/3`, every residue circle) with margin.
fn estimate_direct_anchor(params: &PhysicalParams, a0: f64, eps: f64) -> Result<f64> {
    let cot = 1.0 / eps.tan();
    let mut need = 0.0f64;
    for a in logspace(1e-6, 1e4, 600) {
        let rs = solve_roots(a, params)?;
        let r = if a <= 2.0 / 3.0 * a0 { contours::gamma0_radius(a, params.gravity) } else { 0.0 };
        for (_, _, lam) in rs.physical() {
            need = need.max(lam.re + r + (lam.im.abs() + r) * cot);
        }
    }
    Ok(need + 0.25f64.max(0.25 * need))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn overdamped_pair_is_labeled() {
        let p = PhysicalParams::new(0.1, 0.1, 2).unwrap();
        let rs = solve_roots(0.88, &p).unwrap();
        let (bp, bm) = (rs.low(1, true).unwrap(), rs.low(1, false).unwrap());
        assert_eq!((bp.im, bm.im), (0.0, 0.0));
        assert!(bp.re > bm.re && bm.re > 0.0);
    }

    #[test]
    fn coefficients() {
        let p = PhysicalParams::unit();
        assert_eq!(quartic_coefficients(0.0, &p), [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(quartic_coefficients(1.0, &p), [1.0, 0.0, 2.0, -4.0, 3.0]);
        assert_eq!(quartic_coefficients(2.0, &p), [1.0, 0.0, 8.0, -32.0, 26.0]);
    }

    #[test]
    fn small_a_root_matches_leading_term() {
        let p = PhysicalParams::unit();
        let rs = solve_roots(1e-4, &p).unwrap();
        let b = rs.low(1, true).unwrap();
        let lead = C64::from_polar(0.1, std::f64::consts::FRAC_PI_4);
        assert!((b - lead).norm() < 10.0 * 1e-4f64.powf(1.75));
        assert!(b.re > 0.0 && b.im > 0.0);
    }

    #[test]
    fn large_a_root_matches_expansion() {
        let p = PhysicalParams::unit();
        let rs = solve_roots(1000.0, &p).unwrap();
        let (b1, _) = rs.get(RootLabel::High { j: 1 }).unwrap();
        assert!((b1.re - 999.75).abs() < 1e-3);
        assert!(b1.im == 0.0);
    }

    #[test]
    fn residuals_and_conjugate_closure() {
        let p = PhysicalParams::unit();
        for a in logspace(1e-4, 1e4, 300) {
            let rs = solve_roots(a, &p).unwrap();
            let scale = rs.scale(&p);
            for b in rs.roots {
                assert!(l_symbol(a, b, &p).norm() <= 1e-9 * scale, "A={a} b={b}");
                assert!(rs.roots.iter().any(|c| (c - b.conj()).norm() <= 1e-12 * b.norm()));
            }
            assert_eq!(rs.physical().len(), 2, "A={a}");
        }
    }

    #[test]
    fn low_expansion_order() {
        let p = PhysicalParams::unit();
        let e: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&a| {
                let rs = solve_roots(a, &p).unwrap();
                let b = rs.low(1, true).unwrap();
                ((b * b - a * a) - lambda_low_asymptotic(a, &p).0).norm() / a.powf(2.75)
            })
            .collect();
        let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
        assert!(hi / lo < 4.0, "{e:?}");
        assert!(hi < 10.0);
    }

    #[test]
    fn low_expansion_examples() {
        let p = PhysicalParams::unit();
        let (lp, lm) = lambda_low_asymptotic(1e-4, &p);
        assert_relative_eq!(lp.im, 0.01, epsilon = 1e-9);
        assert_relative_eq!(lp.re, -2e-8, epsilon = 1e-20);
        assert_eq!(lm, lp.conj());
    }

    #[test]
    fn high_expansion_examples() {
        let p = PhysicalParams::unit();
        let (l1, l2) = lambda_high_asymptotic(100.0, &p);
        assert_relative_eq!(l1.re, -50.1875, epsilon = 1e-12);
        assert_relative_eq!(a2_root(), 0.295_597_742_522_084_76, epsilon = 1e-14);
        let rs = solve_roots(100.0, &p).unwrap();
        let (_, exact2) = rs.get(RootLabel::High { j: 2 }).unwrap();
        assert!((exact2.re - l2.re).abs() < 5.0, "{exact2} vs {l2}");
        assert!((l2.re + 9104.4).abs() < 0.5);
    }

    #[test]
    fn cubic_lemma() {
        let (alpha, b1, b2) = cubic_lemma_roots();
        assert!((alpha - 0.5912).abs() < 1e-4);
        assert_relative_eq!(b1.re, (-2.0 - alpha) / 2.0, epsilon = 1e-12);
        assert_eq!(b1, b2.conj());
        assert!(b1.re < 0.0);
    }

    #[test]
    fn stability_examples() {
        let p = PhysicalParams::unit();
        let m = stability_scan(&[1e-4], &p).unwrap();
        assert_relative_eq!(m.margin, 2e-8, max_relative = 1e-3);
        let m = stability_scan(&[100.0], &p).unwrap();
        assert!((m.margin - 50.19).abs() < 0.01);
        assert!(stability_scan(&[], &p).is_err());
    }

    #[test]
    fn gamma0_tilde_factor() {
        assert_relative_eq!(gamma0_tilde(1.0), 2.140_564_2, epsilon = 1e-6);
    }
}
