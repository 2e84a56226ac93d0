//! Initial data library: a Gaussian surface bump `d` and a divergence-free
//! velocity `f` generated by a stream function with compact support in `x_N`.
//!
//! `ψ(x', x_N) = amp · G(x') · Y(x_N)` with `G` Gaussian and `Y` the bump
//! `exp(-1/(1 - z²))`, `z = (x_N - c)/r`. The velocity is
//! `f = (∂_N ψ, 0, …, 0, -∂_1 ψ)`, so `div f = 0` and `f` vanishes near the boundary.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gauss::composite;
use crate::resolvent::SpectralProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSurface {
    pub amp: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamVortex {
    pub amp: f64,
    /// Gaussian width in `x'`.
    pub width: f64,
    /// Center `c` and radius `r` of the support in `x_N`.
    pub center: f64,
    pub radius: f64,
}

/// `Y(z) = exp(-1/(1 - z²))` on `|z| < 1` and its derivative in `z`.
fn bump(z: f64) -> (f64, f64) {
    if z.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - z * z;
    let y = (-1.0 / s).exp();
    (y, y * (-2.0 * z / (s * s)))
}

/// Fourier transform of `exp(-|x'|²/(2w²))` in `N - 1` variables.
fn gaussian_hat(width: f64, xi: &[f64]) -> f64 {
    let a2: f64 = xi.iter().map(|x| x * x).sum();
    (2.0 * std::f64::consts::PI * width * width).powf(xi.len() as f64 / 2.0) * (-0.5 * width * width * a2).exp()
}

fn gaussian(width: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (-0.5 * r2 / (width * width)).exp()
}

/// Initial data `F = (f, d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub dim: usize,
    pub surface: Option<GaussianSurface>,
    pub vortex: Option<StreamVortex>,
    /// Panels of the 16-point rule across the support of `Y`.
    pub y_panels: usize,
}

impl InitialData {
    pub fn new(dim: usize, surface: Option<GaussianSurface>, vortex: Option<StreamVortex>) -> Result<Self> {
        if dim < 2 {
            return invalid("dimension must be at least 2");
        }
        if let Some(s) = surface {
            if !(s.width > 0.0 && s.amp.is_finite()) {
                return invalid("surface bump needs a positive width");
            }
        }
        if let Some(v) = vortex {
            if !(v.width > 0.0 && v.radius > 0.0 && v.center >= v.radius && v.amp.is_finite()) {
                return invalid("vortex needs positive widths and support inside x_N > 0");
            }
        }
        Ok(Self { dim, surface, vortex, y_panels: 16 })
    }

    /// Unit surface bump of width 1 plus a unit vortex centered at depth 2.
    pub fn default_library(dim: usize) -> Self {
        Self {
            dim,
            surface: Some(GaussianSurface { amp: 1.0, width: 1.0 }),
            vortex: Some(StreamVortex { amp: 1.0, width: 1.0, center: 2.0, radius: 1.0 }),
            y_panels: 16,
        }
    }

    pub fn surface_only(dim: usize, width: f64) -> Self {
        Self { dim, surface: Some(GaussianSurface { amp: 1.0, width }), vortex: None, y_panels: 16 }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        if let Some(s) = out.surface.as_mut() {
            s.amp *= c;
        }
        if let Some(v) = out.vortex.as_mut() {
            v.amp *= c;
        }
        out
    }

    pub fn has_f(&self) -> bool {
        self.vortex.is_some_and(|v| v.amp != 0.0)
    }

    pub fn has_d(&self) -> bool {
        self.surface.is_some_and(|s| s.amp != 0.0)
    }

    /// Radius in `x'` outside which every Gaussian factor is below `1e-10` of its peak.
    pub fn support_radius(&self) -> f64 {
        let k = (2.0 * 1e10f64.ln()).sqrt();
        let ws = self.surface.map_or(0.0, |s| s.width);
        let wv = self.vortex.map_or(0.0, |v| v.width);
        k * ws.max(wv)
    }

    pub fn dhat(&self, xi: &[f64]) -> C64 {
        match self.surface {
            Some(s) => C64::new(s.amp * gaussian_hat(s.width, xi), 0.0),
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn d_physical(&self, x: &[f64]) -> f64 {
        self.surface.map_or(0.0, |s| s.amp * gaussian(s.width, x))
    }

    /// Quadrature rule in `x_N` over the support of `Y`.
    pub fn y_rule(&self) -> (Vec<f64>, Vec<f64>) {
        match self.vortex {
            Some(v) => composite(v.center - v.radius, v.center + v.radius, self.y_panels, 16),
            None => (vec![], vec![]),
        }
    }

    /// `(Y, dY/dx_N)` on the rule nodes, scaled by `amp`.
    pub fn y_tables(&self, nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let Some(v) = self.vortex else {
            return (vec![0.0; nodes.len()], vec![0.0; nodes.len()]);
        };
        nodes
            .iter()
            .map(|&y| {
                let (b, db) = bump((y - v.center) / v.radius);
                (v.amp * b, v.amp * db / v.radius)
            })
            .unzip()
    }

    /// `f̂(ξ', ·)` sampled on the rule: `f̂_1 = Ĝ Y'`, `f̂_N = -iξ_1 Ĝ Y`.
    pub fn f_profile(&self, xi: &[f64], rule: &(Vec<f64>, Vec<f64>), tables: &(Vec<f64>, Vec<f64>)) -> Option<SpectralProfile> {
        let v = self.vortex?;
        let g = gaussian_hat(v.width, xi);
        let n = self.dim;
        let mut values = vec![vec![C64::new(0.0, 0.0); rule.0.len()]; n];
        for i in 0..rule.0.len() {
            values[0][i] = C64::new(g * tables.1[i], 0.0);
            values[n - 1][i] = C64::new(0.0, -xi[0] * g * tables.0[i]);
        }
        Some(SpectralProfile { xi_prime: xi.to_vec(), nodes: rule.0.clone(), weights: rule.1.clone(), values })
    }

    /// `f(x', x_N)` in physical space.
    pub fn f_physical(&self, x: &[f64], y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if let Some(v) = self.vortex {
            let (b, db) = bump((y - v.center) / v.radius);
            let g = gaussian(v.width, x);
            let dg1 = -x[0] / (v.width * v.width) * g;
            out[0] = v.amp * g * db / v.radius;
            out[self.dim - 1] = -v.amp * dg1 * b;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_is_divergence_free() {
        let data = InitialData::default_library(2);
        let h = 1e-5;
        for &(x, y) in &[(0.3, 1.7), (-1.1, 2.4), (0.0, 2.0)] {
            let dx = (data.f_physical(&[x + h], y)[0] - data.f_physical(&[x - h], y)[0]) / (2.0 * h);
            let dy = (data.f_physical(&[x], y + h)[1] - data.f_physical(&[x], y - h)[1]) / (2.0 * h);
            assert!((dx + dy).abs() < 1e-8, "{}", dx + dy);
        }
        assert_eq!(data.f_physical(&[0.0], 0.5), vec![0.0, 0.0]);
    }

    #[test]
    fn surface_transform_matches_quadrature() {
        let data = InitialData::surface_only(2, 1.3);
        let (x, w) = composite(-20.0, 20.0, 40, 16);
        for xi in [0.0, 0.7, 2.0] {
            let num: f64 = x.iter().zip(&w).map(|(x, w)| w * (xi * x).cos() * data.d_physical(&[*x])).sum();
            assert!((num - data.dhat(&[xi]).re).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_matches_physical_transform() {
        let data = InitialData::default_library(2);
        let rule = data.y_rule();
        let tab = data.y_tables(&rule.0);
        let xi = 0.8;
        let prof = data.f_profile(&[xi], &rule, &tab).unwrap();
        let (x, w) = composite(-15.0, 15.0, 30, 16);
        let i = 100;
        let y = rule.0[i];
        for k in 0..2 {
            let num: C64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| C64::from_polar(*w, -xi * x) * data.f_physical(&[*x], y)[k])
                .sum();
            assert!((num - prof.values[k][i]).norm() < 1e-10);
        }
    }
}
