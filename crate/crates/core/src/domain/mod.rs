//! Punctured-ball domains `B_R(0) \ (B_1 ∪ ... ∪ B_J)` and the checks that
//! make them admissible for the degree argument.

mod example;
mod verify;

pub use example::{example_system, ExampleField, ExampleParams};
pub use verify::{sup_norm_estimate, tau_star, verify_inward, InwardReport, SamplingOptions, TauStar};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, euclid, parity_sign};
use crate::sampling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Where a point sits relative to the domain, with tolerance `tol_geo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    Interior,
    Exterior,
    OuterBoundary,
    /// On the boundary of the hole with this (zero-based) index.
    HoleBoundary(usize),
}

/// Which boundary component a sample lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Outer,
    Hole(usize),
}

#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub component: Component,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuncturedBall {
    dim: usize,
    radius: f64,
    holes: Vec<Hole>,
}

impl PuncturedBall {
    pub fn new(dim: usize, radius: f64, holes: Vec<Hole>) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain needs dim > 0 and R > 0 (dim = {dim}, R = {radius})"
            )));
        }
        for (j, h) in holes.iter().enumerate() {
            if h.center.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: h.center.len(),
                });
            }
            if !(h.radius > 0.0) {
                return Err(Error::InvalidParameter(format!("hole {j} has non-positive radius")));
            }
            if euclid(&h.center) + h.radius >= radius {
                return Err(Error::InvalidParameter(format!(
                    "hole {j} is not strictly inside the outer ball"
                )));
            }
            for (i, o) in holes[..j].iter().enumerate() {
                if dist(&h.center, &o.center) <= h.radius + o.radius {
                    return Err(Error::InvalidParameter(format!("holes {i} and {j} overlap")));
                }
            }
        }
        Ok(Self { dim, radius, holes })
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, radius, Vec::new())
    }

    /// Holes of a shared radius `eta` around the given centres.
    pub fn with_common_hole_radius(dim: usize, radius: f64, centers: &[Vec<f64>], eta: f64) -> Result<Self> {
        Self::new(
            dim,
            radius,
            centers
                .iter()
                .map(|c| Hole {
                    center: c.clone(),
                    radius: eta,
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }
    pub fn hole_count(&self) -> usize {
        self.holes.len()
    }
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
    pub fn tol_geo(&self) -> f64 {
        1e-9 * self.radius
    }

    pub fn classify(&self, x: &[f64]) -> PointClass {
        let tol = self.tol_geo();
        let r = euclid(x) - self.radius;
        if r > tol {
            return PointClass::Exterior;
        }
        for (j, h) in self.holes.iter().enumerate() {
            let d = dist(x, &h.center) - h.radius;
            if d < -tol {
                return PointClass::Exterior;
            }
            if d.abs() <= tol {
                return PointClass::HoleBoundary(j);
            }
        }
        if r.abs() <= tol {
            PointClass::OuterBoundary
        } else {
            PointClass::Interior
        }
    }

    /// `x` in the closure of the domain.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        self.classify(x) != PointClass::Exterior
    }

    /// Outer unit normal of the domain at a boundary point. On a hole it
    /// points into the hole.
    pub fn normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.classify(x) {
            PointClass::OuterBoundary => {
                let n = euclid(x);
                Ok(x.iter().map(|v| v / n).collect())
            }
            PointClass::HoleBoundary(j) => {
                let c = &self.holes[j].center;
                let n = dist(x, c);
                Ok(x.iter().zip(c).map(|(v, cv)| -(v - cv) / n).collect())
            }
            _ => Err(Error::NotOnBoundary),
        }
    }

    /// Euler characteristic of the ball minus `J` closed balls:
    /// `1 - J (-1)^N`. Equal to `1 - J` in even dimension.
    pub fn euler_characteristic(&self) -> i64 {
        1 - self.holes.len() as i64 * parity_sign(self.dim) as i64
    }

    /// Distance from `x` (inside the domain) to the boundary.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.holes
            .iter()
            .map(|h| dist(x, &h.center) - h.radius)
            .fold(self.radius - euclid(x), f64::min)
    }

    /// Deterministic samples of every boundary component, `per_component`
    /// points each (dimension 1 uses the two endpoints of each interval).
    pub fn boundary_samples(&self, per_component: usize) -> Vec<BoundaryPoint> {
        let dirs = sampling::sphere_directions(self.dim, per_component.max(1));
        let mut out = Vec::with_capacity(dirs.len() * (1 + self.holes.len()));
        for d in &dirs {
            out.push(BoundaryPoint {
                point: d.iter().map(|v| v * self.radius).collect(),
                normal: d.clone(),
                component: Component::Outer,
            });
        }
        for (j, h) in self.holes.iter().enumerate() {
            for d in &dirs {
                out.push(BoundaryPoint {
                    point: h.center.iter().zip(d).map(|(c, v)| c + h.radius * v).collect(),
                    normal: d.iter().map(|v| -v).collect(),
                    component: Component::Hole(j),
                });
            }
        }
        out
    }

    /// Low-discrepancy points of the closed domain drawn from the bounding
    /// box, skipping points within `margin` of a hole.
    pub fn interior_samples(&self, count: usize, margin: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut index = 1u64;
        let max_index = 1000 * count as u64 + 1000;
        while out.len() < count && index < max_index {
            let x: Vec<f64> = sampling::halton(index, self.dim)
                .into_iter()
                .map(|q| (2.0 * q - 1.0) * self.radius)
                .collect();
            index += 1;
            if self.admits_sample(&x, margin) {
                out.push(x);
            }
        }
        out
    }

    /// Like [`interior_samples`](Self::interior_samples), but each Halton
    /// point `x` is followed by its reflection `-x` when that is admissible
    /// too, so point-symmetric domains are covered symmetrically.
    pub fn antithetic_samples(&self, count: usize, margin: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut index = 1u64;
        let max_index = 1000 * count as u64 + 1000;
        while out.len() < count && index < max_index {
            let x: Vec<f64> = sampling::halton(index, self.dim)
                .into_iter()
                .map(|q| (2.0 * q - 1.0) * self.radius)
                .collect();
            index += 1;
            if !self.admits_sample(&x, margin) {
                continue;
            }
            let mirror: Vec<f64> = x.iter().map(|v| -v).collect();
            out.push(x);
            if out.len() < count && self.admits_sample(&mirror, margin) {
                out.push(mirror);
            }
        }
        out
    }

    fn admits_sample(&self, x: &[f64], margin: f64) -> bool {
        self.contains_closed(x) && self.holes.iter().all(|h| dist(x, &h.center) >= h.radius + margin)
    }
}
