//! Integration regions: rectangles in coordinates rotated 45° anticlockwise,
//! the uniform weight on them, and midpoint grids for Riemann sums.
//!
//! A point `(x, y)` maps to `u = (x + y)/√2` along the diagonal and
//! `v = (y − x)/√2` across it. Membership is half-open: `u_min ≤ u < u_max`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_stationary, simulate_path, DiffusionModel, ParamVector};
use crate::numerics::Rng;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Maps `(x, y)` to rotated coordinates `(u, v)`.
#[inline]
pub fn to_rotated(x: f64, y: f64) -> (f64, f64) {
    ((x + y) * SQRT_HALF, (y - x) * SQRT_HALF)
}

/// Maps rotated coordinates back to `(x, y)`.
#[inline]
pub fn from_rotated(u: f64, v: f64) -> (f64, f64) {
    ((u - v) * SQRT_HALF, (u + v) * SQRT_HALF)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// One midpoint cell of a region grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub area: f64,
}

/// Monte Carlo coverage estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub probability: f64,
    pub std_error: f64,
}

impl Region {
    /// Rectangle `[u_min, u_max) × [v_min, v_max)` in rotated coordinates.
    /// An empty interval (`min == max`) is allowed and gives an empty region.
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64) -> Result<Self> {
        let ok = [u_min, u_max, v_min, v_max].iter().all(|v| v.is_finite()) && u_min <= u_max && v_min <= v_max;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "region needs finite bounds with min <= max, got u [{u_min}, {u_max}], v [{v_min}, {v_max}]"
            )));
        }
        Ok(Region { u_min, u_max, v_min, v_max })
    }

    pub fn area(&self) -> f64 {
        (self.u_max - self.u_min) * (self.v_max - self.v_min)
    }

    pub fn is_empty(&self) -> bool {
        !(self.area() > 0.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = to_rotated(x, y);
        self.u_min <= u && u < self.u_max && self.v_min <= v && v < self.v_max
    }

    /// `ω(x, y) = |S|^{-1} 1{(x, y) ∈ S}`.
    pub fn uniform_weight(&self, x: f64, y: f64) -> f64 {
        if self.contains(x, y) {
            1.0 / self.area()
        } else {
            0.0
        }
    }

    /// `∬ω² = |S|^{-1}` for the uniform weight.
    pub fn weight_square_integral(&self) -> f64 {
        1.0 / self.area()
    }

    /// Midpoint grid with `m_u × m_v` cells in rotated coordinates, ordered
    /// with `v` varying fastest.
    pub fn grid(&self, m_u: usize, m_v: usize) -> Result<Vec<GridPoint>> {
        if m_u < 2 || m_v < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2x2 cells, got {m_u}x{m_v}")));
        }
        if self.is_empty() {
            return Err(Error::InvalidInput("grid over an empty region".into()));
        }
        let du = (self.u_max - self.u_min) / m_u as f64;
        let dv = (self.v_max - self.v_min) / m_v as f64;
        let area = self.area() / (m_u * m_v) as f64;
        let mut out = Vec::with_capacity(m_u * m_v);
        for i in 0..m_u {
            let u = self.u_min + (i as f64 + 0.5) * du;
            for j in 0..m_v {
                let v = self.v_min + (j as f64 + 0.5) * dv;
                let (x, y) = from_rotated(u, v);
                out.push(GridPoint { x, y, area });
            }
        }
        Ok(out)
    }

    /// Rotated bounding box of the middle 95% of the pair coordinates.
    pub fn auto(values: &[f64]) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidInput("need at least 3 observations for an automatic region".into()));
        }
        let (mut us, mut vs): (Vec<f64>, Vec<f64>) = values.windows(2).map(|w| to_rotated(w[0], w[1])).unzip();
        us.sort_by(f64::total_cmp);
        vs.sort_by(f64::total_cmp);
        let q = |s: &[f64], p: f64| {
            let pos = p * (s.len() - 1) as f64;
            let (i, f) = (pos.floor() as usize, pos.fract());
            if i + 1 < s.len() {
                s[i] + f * (s[i + 1] - s[i])
            } else {
                s[i]
            }
        };
        let r = Region::new(q(&us, 0.025), q(&us, 0.975), q(&vs, 0.025), q(&vs, 0.975))?;
        if r.is_empty() {
            return Err(Error::InvalidInput("automatic region is degenerate (constant data?)".into()));
        }
        Ok(r)
    }

    /// Fraction of consecutive pairs of a simulated stationary path that fall in the region.
    pub fn coverage_probability(
        &self,
        model: &DiffusionModel,
        theta: &ParamVector,
        delta: f64,
        n_mc: usize,
        rng: &mut Rng,
    ) -> Result<Coverage> {
        if n_mc < 1000 {
            return Err(Error::InvalidInput(format!("coverage needs n_mc >= 1000, got {n_mc}")));
        }
        let x0 = sample_stationary(model, theta, rng)?;
        let path = simulate_path(model, theta, n_mc, delta, x0, rng)?;
        let hits = path.pairs().filter(|&(x, y)| self.contains(x, y)).count();
        let p = hits as f64 / n_mc as f64;
        Ok(Coverage {
            probability: p,
            std_error: (p * (1.0 - p) / n_mc as f64).sqrt(),
        })
    }
}

/// Regions used in the simulation designs and the case study.
pub mod presets {
    use super::Region;

    const fn rect(u_min: f64, u_max: f64, v_half: f64) -> Region {
        Region {
            u_min,
            u_max,
            v_min: -v_half,
            v_max: v_half,
        }
    }

    pub const VASICEK_M2: Region = rect(0.035, 0.25, 0.03);
    pub const VASICEK_0: Region = rect(0.03, 0.22, 0.02);
    pub const VASICEK_2: Region = rect(0.02, 0.22, 0.009);
    pub const CIR_0: Region = rect(0.015, 0.25, 0.015);
    pub const CIR_1: Region = rect(0.015, 0.25, 0.012);
    pub const CIR_2: Region = rect(0.015, 0.25, 0.008);
    /// Power design (CIR 0 truth) uses the CIR 0 region.
    pub const POWER: Region = CIR_0;
    pub const CASE_STUDY: Region = rect(0.005, 0.4, 0.03);
}
