//! Canonical domain families with membership, boundary sampling, outward
//! normals and volume queries.
//!
//! Every variant is an open set `D = {g < 0}` with a piecewise-quadratic
//! defining function `g`, which makes line sections exactly solvable; the
//! quadrature module builds its clipped iterated integration on top of
//! [`DomainSpec::section_last`] and [`DomainSpec::proj_range`].
//!
//! JSON schema (`domain.v1`): a tagged object `{"variant": "...", ...}` via
//! serde, e.g. `{"variant":"ellipsoid","center":[0,0],"semiaxes":[2,1]}` or
//! `{"variant":"half_space","normal":[0,-1],"offset":0}`.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm, sub};
use crate::{Error, Result};

/// Width of the boundary band in the defining function.
pub const BOUNDARY_BAND: f64 = 1e-12;

/// Membership classification of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

/// Description of a canonical domain.
///
/// `Ellipsoid` is bounded; all other geometric variants are unbounded.
/// `AxisBox` is a test-control shape (its internal potential is *not*
/// quadratic); `WholeSpace` is the degenerate "all of ℝⁿ" flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DomainSpec {
    /// `Σ ((x_i - c_i)/α_i)² < 1`
    Ellipsoid { center: Vec<f64>, semiaxes: Vec<f64> },
    /// `ν·x < offset` with `|ν| = 1`
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// `lower < ν·x < upper` with `|ν| = 1`
    Strip {
        normal: Vec<f64>,
        lower: f64,
        upper: f64,
    },
    /// `x_axis - vertex_offset > Σ_{i≠axis} (x_i/α_i)²`; `semiaxes` map to the
    /// non-axis coordinates in increasing coordinate order
    Paraboloid {
        semiaxes: Vec<f64>,
        axis: usize,
        vertex_offset: f64,
    },
    /// base ellipsoid (centered at the origin) over the first `k = semiaxes.len()`
    /// coordinates, free in the remaining `dim - k`
    CylinderOverEllipsoid { semiaxes: Vec<f64>, dim: usize },
    /// base paraboloid over the first `k = semiaxes.len() + 1` coordinates with
    /// axis coordinate `k - 1`, free in the remaining `dim - k`
    CylinderOverParaboloid {
        semiaxes: Vec<f64>,
        dim: usize,
        vertex_offset: f64,
    },
    /// `|x_i - c_i| < h_i` for all `i` (bounded, non-canonical control shape)
    AxisBox {
        center: Vec<f64>,
        half_widths: Vec<f64>,
    },
    /// all of ℝⁿ
    WholeSpace { dim: usize },
}

/// One quadrature point on `∂D` with its outward normal (pointing into the
/// complement) and a surface-measure weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundarySample {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub patch_weight: f64,
}

/// Section of a line `{prefix} × ℝ` with a domain, before clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum AxisSection {
    Empty,
    All,
    /// open interval (a, b)
    Interval(f64, f64),
    /// half line (-∞, b)
    Below(f64),
    /// half line (a, ∞)
    Above(f64),
}

impl AxisSection {
    /// Intersect with a bounded interval, producing at most one interval.
    pub(crate) fn clip(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let (a, b) = match *self {
            AxisSection::Empty => return None,
            AxisSection::All => (lo, hi),
            AxisSection::Interval(a, b) => (a.max(lo), b.min(hi)),
            AxisSection::Below(b) => (lo, b.min(hi)),
            AxisSection::Above(a) => (a.max(lo), hi),
        };
        if a < b {
            Some((a, b))
        } else {
            None
        }
    }
}

impl DomainSpec {
    // ----- constructors with validation -----

    pub fn ellipsoid(center: &[f64], semiaxes: &[f64]) -> Result<Self> {
        let d = DomainSpec::Ellipsoid {
            center: center.to_vec(),
            semiaxes: semiaxes.to_vec(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn half_space(normal: &[f64], offset: f64) -> Result<Self> {
        let n = norm(normal);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidDomain("half-space normal must be nonzero".into()));
        }
        let d = DomainSpec::HalfSpace {
            normal: normal.iter().map(|v| v / n).collect(),
            offset,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn strip(normal: &[f64], lower: f64, upper: f64) -> Result<Self> {
        let n = norm(normal);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidDomain("strip normal must be nonzero".into()));
        }
        let d = DomainSpec::Strip {
            normal: normal.iter().map(|v| v / n).collect(),
            lower,
            upper,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn paraboloid(semiaxes: &[f64], axis: usize, vertex_offset: f64) -> Result<Self> {
        let d = DomainSpec::Paraboloid {
            semiaxes: semiaxes.to_vec(),
            axis,
            vertex_offset,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn cylinder_over_ellipsoid(semiaxes: &[f64], dim: usize) -> Result<Self> {
        let d = DomainSpec::CylinderOverEllipsoid {
            semiaxes: semiaxes.to_vec(),
            dim,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn cylinder_over_paraboloid(semiaxes: &[f64], dim: usize, vertex_offset: f64) -> Result<Self> {
        let d = DomainSpec::CylinderOverParaboloid {
            semiaxes: semiaxes.to_vec(),
            dim,
            vertex_offset,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn axis_box(center: &[f64], half_widths: &[f64]) -> Result<Self> {
        let d = DomainSpec::AxisBox {
            center: center.to_vec(),
            half_widths: half_widths.to_vec(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn whole_space(dim: usize) -> Result<Self> {
        let d = DomainSpec::WholeSpace { dim };
        d.validate()?;
        Ok(d)
    }

    /// Unit disk in the plane.
    pub fn unit_disk() -> Self {
        DomainSpec::ellipsoid(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    /// Unit ball in 3-space.
    pub fn unit_ball() -> Self {
        DomainSpec::ellipsoid(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: &[f64], what: &str| -> Result<()> {
            if v.is_empty() {
                return Err(Error::InvalidDomain(format!("{what} must be nonempty")));
            }
            if v.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
                return Err(Error::InvalidDomain(format!("{what} must be positive, got {v:?}")));
            }
            Ok(())
        };
        match self {
            DomainSpec::Ellipsoid { center, semiaxes } => {
                positive(semiaxes, "semiaxes")?;
                if center.len() != semiaxes.len() {
                    return Err(Error::InvalidDomain("center/semiaxes length mismatch".into()));
                }
                if center.len() < 1 {
                    return Err(Error::InvalidDomain("ellipsoid needs dimension ≥ 1".into()));
                }
            }
            DomainSpec::HalfSpace { normal, offset } => {
                if normal.len() < 2 {
                    return Err(Error::InvalidDomain("half-space needs dimension ≥ 2".into()));
                }
                if (norm(normal) - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidDomain("half-space normal must be unit".into()));
                }
                if !offset.is_finite() {
                    return Err(Error::InvalidDomain("half-space offset must be finite".into()));
                }
            }
            DomainSpec::Strip { normal, lower, upper } => {
                if normal.len() < 2 {
                    return Err(Error::InvalidDomain("strip needs dimension ≥ 2".into()));
                }
                if (norm(normal) - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidDomain("strip normal must be unit".into()));
                }
                if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                    return Err(Error::InvalidDomain(format!(
                        "strip requires finite lower < upper, got [{lower}, {upper}]"
                    )));
                }
            }
            DomainSpec::Paraboloid {
                semiaxes,
                axis,
                vertex_offset,
            } => {
                positive(semiaxes, "semiaxes")?;
                let n = semiaxes.len() + 1;
                if *axis >= n {
                    return Err(Error::InvalidDomain(format!("paraboloid axis {axis} out of range for dim {n}")));
                }
                if !vertex_offset.is_finite() {
                    return Err(Error::InvalidDomain("vertex offset must be finite".into()));
                }
            }
            DomainSpec::CylinderOverEllipsoid { semiaxes, dim } => {
                positive(semiaxes, "semiaxes")?;
                if semiaxes.len() >= *dim {
                    return Err(Error::InvalidDomain(
                        "cylinder base dimension must be < ambient dimension".into(),
                    ));
                }
            }
            DomainSpec::CylinderOverParaboloid {
                semiaxes,
                dim,
                vertex_offset,
            } => {
                positive(semiaxes, "semiaxes")?;
                if semiaxes.len() + 1 >= *dim {
                    return Err(Error::InvalidDomain(
                        "cylinder base dimension must be < ambient dimension".into(),
                    ));
                }
                if !vertex_offset.is_finite() {
                    return Err(Error::InvalidDomain("vertex offset must be finite".into()));
                }
            }
            DomainSpec::AxisBox { center, half_widths } => {
                positive(half_widths, "half widths")?;
                if center.len() != half_widths.len() {
                    return Err(Error::InvalidDomain("center/half_widths length mismatch".into()));
                }
            }
            DomainSpec::WholeSpace { dim } => {
                if *dim < 2 {
                    return Err(Error::InvalidDomain("whole space needs dimension ≥ 2".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ellipsoid { center, .. } => center.len(),
            DomainSpec::HalfSpace { normal, .. } => normal.len(),
            DomainSpec::Strip { normal, .. } => normal.len(),
            DomainSpec::Paraboloid { semiaxes, .. } => semiaxes.len() + 1,
            DomainSpec::CylinderOverEllipsoid { dim, .. } => *dim,
            DomainSpec::CylinderOverParaboloid { dim, .. } => *dim,
            DomainSpec::AxisBox { center, .. } => center.len(),
            DomainSpec::WholeSpace { dim } => *dim,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, DomainSpec::Ellipsoid { .. } | DomainSpec::AxisBox { .. })
    }

    /// Base dimension `k` for cylinder variants.
    pub fn cylinder_base_dim(&self) -> Option<usize> {
        match self {
            DomainSpec::CylinderOverEllipsoid { semiaxes, .. } => Some(semiaxes.len()),
            DomainSpec::CylinderOverParaboloid { semiaxes, .. } => Some(semiaxes.len() + 1),
            _ => None,
        }
    }

    /// Semiaxis attached to transverse coordinate `i` of a paraboloid.
    fn parab_semiaxis(semiaxes: &[f64], axis: usize, i: usize) -> f64 {
        if i < axis {
            semiaxes[i]
        } else {
            semiaxes[i - 1]
        }
    }

    /// Defining function `g` with `D = {g < 0}`, `∂D = {g = 0}`.
    pub fn defining_value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            DomainSpec::Ellipsoid { center, semiaxes } => {
                let mut s = 0.0;
                for i in 0..x.len() {
                    let t = (x[i] - center[i]) / semiaxes[i];
                    s += t * t;
                }
                s - 1.0
            }
            DomainSpec::HalfSpace { normal, offset } => dot(normal, x) - offset,
            DomainSpec::Strip { normal, lower, upper } => {
                let s = dot(normal, x);
                (lower - s).max(s - upper)
            }
            DomainSpec::Paraboloid {
                semiaxes,
                axis,
                vertex_offset,
            } => {
                let mut s = 0.0;
                for i in 0..x.len() {
                    if i == *axis {
                        continue;
                    }
                    let t = x[i] / Self::parab_semiaxis(semiaxes, *axis, i);
                    s += t * t;
                }
                s - (x[*axis] - vertex_offset)
            }
            DomainSpec::CylinderOverEllipsoid { semiaxes, .. } => {
                let mut s = 0.0;
                for i in 0..semiaxes.len() {
                    let t = x[i] / semiaxes[i];
                    s += t * t;
                }
                s - 1.0
            }
            DomainSpec::CylinderOverParaboloid {
                semiaxes,
                vertex_offset,
                ..
            } => {
                let k = semiaxes.len() + 1;
                let mut s = 0.0;
                for i in 0..k - 1 {
                    let t = x[i] / semiaxes[i];
                    s += t * t;
                }
                s - (x[k - 1] - vertex_offset)
            }
            DomainSpec::AxisBox { center, half_widths } => {
                let mut g = f64::NEG_INFINITY;
                for i in 0..x.len() {
                    g = g.max((x[i] - center[i]).abs() - half_widths[i]);
                }
                g
            }
            DomainSpec::WholeSpace { .. } => -1.0,
        }
    }

    /// Gradient of the defining function (outward direction on `∂D`).
    pub fn defining_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        match self {
            DomainSpec::Ellipsoid { center, semiaxes } => (0..n)
                .map(|i| 2.0 * (x[i] - center[i]) / (semiaxes[i] * semiaxes[i]))
                .collect(),
            DomainSpec::HalfSpace { normal, .. } => normal.clone(),
            DomainSpec::Strip { normal, lower, upper } => {
                let s = dot(normal, x);
                if s - upper >= lower - s {
                    normal.clone()
                } else {
                    normal.iter().map(|v| -v).collect()
                }
            }
            DomainSpec::Paraboloid {
                semiaxes,
                axis,
                vertex_offset: _,
            } => (0..n)
                .map(|i| {
                    if i == *axis {
                        -1.0
                    } else {
                        let a = Self::parab_semiaxis(semiaxes, *axis, i);
                        2.0 * x[i] / (a * a)
                    }
                })
                .collect(),
            DomainSpec::CylinderOverEllipsoid { semiaxes, .. } => (0..n)
                .map(|i| {
                    if i < semiaxes.len() {
                        2.0 * x[i] / (semiaxes[i] * semiaxes[i])
                    } else {
                        0.0
                    }
                })
                .collect(),
            DomainSpec::CylinderOverParaboloid { semiaxes, .. } => {
                let k = semiaxes.len() + 1;
                (0..n)
                    .map(|i| {
                        if i < k - 1 {
                            2.0 * x[i] / (semiaxes[i] * semiaxes[i])
                        } else if i == k - 1 {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            DomainSpec::AxisBox { center, half_widths } => {
                let mut imax = 0;
                let mut gmax = f64::NEG_INFINITY;
                for i in 0..n {
                    let g = (x[i] - center[i]).abs() - half_widths[i];
                    if g > gmax {
                        gmax = g;
                        imax = i;
                    }
                }
                let mut grad = vec![0.0; n];
                grad[imax] = (x[imax] - center[imax]).signum();
                grad
            }
            DomainSpec::WholeSpace { .. } => vec![0.0; n],
        }
    }

    /// Membership with a boundary band of width `1e-12` in the defining
    /// function.
    pub fn contains(&self, x: &[f64]) -> Location {
        let g = self.defining_value(x);
        if g.abs() <= BOUNDARY_BAND {
            Location::Boundary
        } else if g < 0.0 {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    /// Outward unit normal at a boundary point (pointing into the complement).
    pub fn outward_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.contains(x) != Location::Boundary {
            return Err(Error::NotOnBoundary);
        }
        let g = self.defining_gradient(x);
        let m = norm(&g);
        if m == 0.0 {
            return Err(Error::NotOnBoundary);
        }
        Ok(g.iter().map(|v| v / m).collect())
    }

    /// Distance from an interior point to `∂D`.
    ///
    /// For the quadratic variants this bisects the exact maximum of the
    /// defining function over spheres around `x`; for the piecewise-linear
    /// variants it is a closed form.
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64> {
        if self.contains(x) != Location::Inside {
            return Err(Error::NotInterior);
        }
        match self {
            DomainSpec::HalfSpace { normal, offset } => Ok(offset - dot(normal, x)),
            DomainSpec::Strip { normal, lower, upper } => {
                let s = dot(normal, x);
                Ok((s - lower).min(upper - s))
            }
            DomainSpec::AxisBox { center, half_widths } => {
                let mut d = f64::INFINITY;
                for i in 0..x.len() {
                    d = d.min(half_widths[i] - (x[i] - center[i]).abs());
                }
                Ok(d)
            }
            DomainSpec::WholeSpace { .. } => Ok(f64::INFINITY),
            _ => {
                let (a, w0, g0) = self.quadratic_data(x);
                // find r with max_{|z|=r} g(x+z) = 0 by bisection
                let mut hi = 1.0;
                let mut iter = 0;
                while sphere_max_quadratic(&a, &w0, g0, hi) < 0.0 {
                    hi *= 2.0;
                    iter += 1;
                    if iter > 200 {
                        return Ok(f64::INFINITY);
                    }
                }
                let mut lo = 0.0;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if sphere_max_quadratic(&a, &w0, g0, mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(lo)
            }
        }
    }

    /// Diagonal quadratic expansion `g(x + z) = Σ a_i z_i² + Σ w_i z_i + g0`
    /// for the quadratic variants.
    fn quadratic_data(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.dim();
        let g0 = self.defining_value(x);
        let w = self.defining_gradient(x);
        let mut a = vec![0.0; n];
        match self {
            DomainSpec::Ellipsoid { semiaxes, .. } => {
                for i in 0..n {
                    a[i] = 1.0 / (semiaxes[i] * semiaxes[i]);
                }
            }
            DomainSpec::Paraboloid { semiaxes, axis, .. } => {
                for i in 0..n {
                    if i != *axis {
                        let s = Self::parab_semiaxis(semiaxes, *axis, i);
                        a[i] = 1.0 / (s * s);
                    }
                }
            }
            DomainSpec::CylinderOverEllipsoid { semiaxes, .. } => {
                for i in 0..semiaxes.len() {
                    a[i] = 1.0 / (semiaxes[i] * semiaxes[i]);
                }
            }
            DomainSpec::CylinderOverParaboloid { semiaxes, .. } => {
                for i in 0..semiaxes.len() {
                    a[i] = 1.0 / (semiaxes[i] * semiaxes[i]);
                }
            }
            _ => unreachable!("quadratic_data called on non-quadratic variant"),
        }
        (a, w, g0)
    }

    // ----- sections for clipped iterated quadrature -----

    /// Section of the line `{(prefix, t) : t ∈ ℝ}` (remaining coordinates
    /// after the prefix collapse to the single last one; only valid when
    /// `prefix.len() == dim - 1`).
    pub(crate) fn section_last(&self, prefix: &[f64]) -> AxisSection {
        let n = self.dim();
        debug_assert_eq!(prefix.len(), n - 1);
        self.coord_range(prefix, false)
    }

    /// Range of coordinate `k = prefix.len()` over points of `D` whose first
    /// `k` coordinates equal `prefix`, minimizing over the remaining (tail)
    /// coordinates. May over-cover; used to bound outer integration loops.
    pub(crate) fn proj_range(&self, prefix: &[f64]) -> AxisSection {
        self.coord_range(prefix, true)
    }

    /// Shared implementation: constraint on coordinate `k = prefix.len()`,
    /// with tail coordinates (`k+1..n`) either absent (`relax = false`, the
    /// section case) or minimized over (`relax = true`, the projection case).
    fn coord_range(&self, prefix: &[f64], relax: bool) -> AxisSection {
        let k = prefix.len();
        let n = self.dim();
        debug_assert!(k < n);
        match self {
            DomainSpec::Ellipsoid { center, semiaxes } => {
                // tail coordinates minimize at the center
                let mut s = 0.0;
                for i in 0..k {
                    let t = (prefix[i] - center[i]) / semiaxes[i];
                    s += t * t;
                }
                let rem = 1.0 - s;
                if rem <= 0.0 {
                    return AxisSection::Empty;
                }
                let h = semiaxes[k] * rem.sqrt();
                AxisSection::Interval(center[k] - h, center[k] + h)
            }
            DomainSpec::HalfSpace { normal, offset } => {
                if relax && normal[k + 1..].iter().any(|&v| v != 0.0) {
                    return AxisSection::All;
                }
                linear_constraint_range(normal, *offset, prefix, k)
            }
            DomainSpec::Strip { normal, lower, upper } => {
                if relax && normal[k + 1..].iter().any(|&v| v != 0.0) {
                    return AxisSection::All;
                }
                // lower < ν·x and ν·x < upper
                let below = linear_constraint_range(normal, *upper, prefix, k);
                let neg: Vec<f64> = normal.iter().map(|v| -v).collect();
                let above = linear_constraint_range(&neg, -lower, prefix, k);
                intersect_sections(below, above)
            }
            DomainSpec::Paraboloid {
                semiaxes,
                axis,
                vertex_offset,
            } => {
                // transverse sum over fixed prefix coordinates
                let mut s = 0.0;
                let mut axis_fixed = None;
                for i in 0..k {
                    if i == *axis {
                        axis_fixed = Some(prefix[i]);
                    } else {
                        let a = Self::parab_semiaxis(semiaxes, *axis, i);
                        s += (prefix[i] / a) * (prefix[i] / a);
                    }
                }
                if k == *axis {
                    // coordinate k is the axis; tail transverse coords minimize at 0
                    AxisSection::Above(vertex_offset + s)
                } else if *axis > k && relax {
                    // axis is free in the tail: any transverse value admissible
                    AxisSection::All
                } else {
                    // coordinate k is transverse; axis coordinate already fixed
                    let h2 = axis_fixed.expect("axis fixed before transverse section") - vertex_offset - s;
                    if h2 <= 0.0 {
                        return AxisSection::Empty;
                    }
                    let a = Self::parab_semiaxis(semiaxes, *axis, k);
                    let h = a * h2.sqrt();
                    AxisSection::Interval(-h, h)
                }
            }
            DomainSpec::CylinderOverEllipsoid { semiaxes, .. } => {
                let kb = semiaxes.len();
                if k >= kb {
                    return AxisSection::All;
                }
                let mut s = 0.0;
                for i in 0..k {
                    let t = prefix[i] / semiaxes[i];
                    s += t * t;
                }
                let rem = 1.0 - s;
                if rem <= 0.0 {
                    return AxisSection::Empty;
                }
                let h = semiaxes[k] * rem.sqrt();
                AxisSection::Interval(-h, h)
            }
            DomainSpec::CylinderOverParaboloid {
                semiaxes,
                vertex_offset,
                ..
            } => {
                let kb = semiaxes.len() + 1;
                if k >= kb {
                    return AxisSection::All;
                }
                let mut s = 0.0;
                for i in 0..k.min(kb - 1) {
                    let t = prefix[i] / semiaxes[i];
                    s += t * t;
                }
                if k == kb - 1 {
                    AxisSection::Above(vertex_offset + s)
                } else if relax {
                    // base axis coordinate kb-1 still free in the tail
                    AxisSection::All
                } else {
                    unreachable!("cylinder base sections follow prefix ordering")
                }
            }
            DomainSpec::AxisBox { center, half_widths } => {
                for i in 0..k {
                    if (prefix[i] - center[i]).abs() >= half_widths[i] {
                        return AxisSection::Empty;
                    }
                }
                AxisSection::Interval(center[k] - half_widths[k], center[k] + half_widths[k])
            }
            DomainSpec::WholeSpace { .. } => AxisSection::All,
        }
    }

    // ----- boundary sampling -----

    /// Quasi-uniform boundary samples with surface weights.
    ///
    /// `extent` bounds the sampled patch for unbounded boundaries: distance
    /// along each flat/free direction, or the transverse parameter range for
    /// paraboloids.
    pub fn boundary_samples(&self, count: usize, extent: Option<f64>) -> Result<Vec<BoundarySample>> {
        if count < 4 {
            return Err(Error::InvalidInput(format!("need count ≥ 4, got {count}")));
        }
        if !self.is_bounded() && extent.is_none() {
            return Err(Error::MissingExtent);
        }
        if let Some(e) = extent {
            if !(e > 0.0) {
                return Err(Error::InvalidInput(format!("extent must be positive, got {e}")));
            }
        }
        match self {
            DomainSpec::Ellipsoid { center, semiaxes } => match self.dim() {
                2 => Ok(ellipse_samples(center, semiaxes, count)),
                3 => Ok(ellipsoid_samples(center, semiaxes, count)),
                d => Err(Error::InvalidInput(format!("boundary sampling unsupported in dim {d}"))),
            },
            DomainSpec::HalfSpace { normal, offset } => {
                Ok(plane_samples(normal, *offset, normal, count, extent.unwrap())?)
            }
            DomainSpec::Strip { normal, lower, upper } => {
                let half = count / 2;
                let mut out = plane_samples(normal, *upper, normal, half, extent.unwrap())?;
                let neg: Vec<f64> = normal.iter().map(|v| -v).collect();
                out.extend(plane_samples(normal, *lower, &neg, count - half, extent.unwrap())?);
                Ok(out)
            }
            DomainSpec::Paraboloid {
                semiaxes,
                axis,
                vertex_offset,
            } => match self.dim() {
                2 => Ok(parabola_samples(semiaxes[0], *axis, *vertex_offset, count, extent.unwrap())),
                3 => Ok(paraboloid_samples_3d(semiaxes, *axis, *vertex_offset, count, extent.unwrap())),
                d => Err(Error::InvalidInput(format!("boundary sampling unsupported in dim {d}"))),
            },
            DomainSpec::CylinderOverEllipsoid { semiaxes, dim } => {
                let k = semiaxes.len();
                cylinder_samples(k, *dim, count, extent.unwrap(), |cnt| {
                    if k == 1 {
                        // two hyperplane faces x₀ = ±α₀
                        let mut v = Vec::new();
                        for sgn in [1.0, -1.0] {
                            v.push((vec![sgn * semiaxes[0]], vec![sgn]));
                        }
                        FaceSet::Flat(v)
                    } else {
                        FaceSet::Curve(ellipse_samples(&[0.0; 2], semiaxes, cnt))
                    }
                })
            }
            DomainSpec::CylinderOverParaboloid {
                semiaxes,
                dim,
                vertex_offset,
            } => {
                let ext = extent.unwrap();
                let k = semiaxes.len() + 1;
                cylinder_samples(k, *dim, count, ext, |cnt| {
                    FaceSet::Curve(parabola_samples(semiaxes[0], 1, *vertex_offset, cnt, ext))
                })
            }
            DomainSpec::AxisBox { center, half_widths } => match self.dim() {
                2 => Ok(box_samples_2d(center, half_widths, count)),
                d => Err(Error::InvalidInput(format!("box boundary sampling unsupported in dim {d}"))),
            },
            DomainSpec::WholeSpace { .. } => {
                Err(Error::InvalidDomain("whole space has no boundary".into()))
            }
        }
    }

    /// Intersection of the ray `{p0 + t u : t ≥ 0}` with the (convex) domain,
    /// as a parameter interval clipped to `[0, t_max]`. `u` need not be unit.
    pub(crate) fn ray_section(&self, p0: &[f64], u: &[f64], t_max: f64) -> Option<(f64, f64)> {
        match self {
            DomainSpec::WholeSpace { .. } => Some((0.0, t_max)),
            DomainSpec::HalfSpace { normal, offset } => {
                let du = dot(normal, u);
                let c = dot(normal, p0) - offset;
                linear_ray_interval(du, c, t_max)
            }
            DomainSpec::Strip { normal, lower, upper } => {
                let du = dot(normal, u);
                let s0 = dot(normal, p0);
                let a = linear_ray_interval(du, s0 - upper, t_max)?;
                let b = linear_ray_interval(-du, lower - s0, t_max)?;
                let lo = a.0.max(b.0);
                let hi = a.1.min(b.1);
                if lo < hi {
                    Some((lo, hi))
                } else {
                    None
                }
            }
            DomainSpec::AxisBox { center, half_widths } => {
                let mut lo = 0.0f64;
                let mut hi = t_max;
                for i in 0..p0.len() {
                    let a = linear_ray_interval(u[i], p0[i] - center[i] - half_widths[i], t_max)?;
                    let b = linear_ray_interval(-u[i], center[i] - half_widths[i] - p0[i], t_max)?;
                    lo = lo.max(a.0).max(b.0);
                    hi = hi.min(a.1).min(b.1);
                    if lo >= hi {
                        return None;
                    }
                }
                Some((lo, hi))
            }
            _ => {
                // quadratic variants: g(p0 + t u) = A t² + B t + C with A ≥ 0
                let g0 = self.defining_value(p0);
                let gp = {
                    let x: Vec<f64> = p0.iter().zip(u).map(|(p, v)| p + v).collect();
                    self.defining_value(&x)
                };
                let gm = {
                    let x: Vec<f64> = p0.iter().zip(u).map(|(p, v)| p - v).collect();
                    self.defining_value(&x)
                };
                let a = 0.5 * (gp + gm) - g0;
                let b = 0.5 * (gp - gm);
                quadratic_ray_interval(a, b, g0, t_max)
            }
        }
    }

    /// A well-centered interior point, used as the gauge anchor and as the
    /// seed for interior sampling: ellipsoid/box center; a point one width
    /// inside a half-space or strip; the paraboloid vertex shifted inward by
    /// one semiaxis along the axis.
    pub fn reference_interior_point(&self) -> Vec<f64> {
        match self {
            DomainSpec::Ellipsoid { center, .. } => center.clone(),
            DomainSpec::HalfSpace { normal, offset } => {
                normal.iter().map(|v| v * (offset - 1.0)).collect()
            }
            DomainSpec::Strip { normal, lower, upper } => {
                let mid = 0.5 * (lower + upper);
                normal.iter().map(|v| v * mid).collect()
            }
            DomainSpec::Paraboloid {
                semiaxes,
                axis,
                vertex_offset,
            } => {
                let mut p = vec![0.0; self.dim()];
                p[*axis] = vertex_offset + semiaxes[0];
                p
            }
            DomainSpec::CylinderOverEllipsoid { dim, .. } => vec![0.0; *dim],
            DomainSpec::CylinderOverParaboloid {
                semiaxes,
                dim,
                vertex_offset,
            } => {
                let mut p = vec![0.0; *dim];
                p[semiaxes.len()] = vertex_offset + semiaxes[0];
                p
            }
            DomainSpec::AxisBox { center, .. } => center.clone(),
            DomainSpec::WholeSpace { dim } => vec![0.0; *dim],
        }
    }

    /// Deterministic interior samples with clearance from the boundary
    /// (distance at least a few percent of the local scale), drawn from a
    /// seeded generator over a variant-specific probe box of size `spread`.
    pub fn interior_samples(&self, count: usize, seed: u64, spread: f64) -> Vec<Vec<f64>> {
        use rand::{Rng, SeedableRng};
        let n = self.dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi): (Vec<f64>, Vec<f64>) = match self {
            DomainSpec::Ellipsoid { center, semiaxes } => (
                center.iter().zip(semiaxes).map(|(c, a)| c - a).collect(),
                center.iter().zip(semiaxes).map(|(c, a)| c + a).collect(),
            ),
            DomainSpec::AxisBox { center, half_widths } => (
                center.iter().zip(half_widths).map(|(c, a)| c - a).collect(),
                center.iter().zip(half_widths).map(|(c, a)| c + a).collect(),
            ),
            DomainSpec::HalfSpace { normal, offset } => {
                let c: Vec<f64> = normal.iter().map(|v| v * (offset - 0.5 * spread)).collect();
                (
                    c.iter().map(|v| v - 0.5 * spread).collect(),
                    c.iter().map(|v| v + 0.5 * spread).collect(),
                )
            }
            DomainSpec::Strip { normal, lower, upper } => {
                let mid = 0.5 * (lower + upper);
                let c: Vec<f64> = normal.iter().map(|v| v * mid).collect();
                (
                    c.iter().map(|v| v - spread).collect(),
                    c.iter().map(|v| v + spread).collect(),
                )
            }
            DomainSpec::Paraboloid {
                semiaxes,
                axis,
                vertex_offset,
            } => {
                let amax = semiaxes.iter().cloned().fold(0.0, f64::max);
                let w = amax * spread.sqrt();
                let mut lo = vec![-w; n];
                let mut hi = vec![w; n];
                lo[*axis] = vertex_offset + 0.05 * spread;
                hi[*axis] = vertex_offset + spread;
                (lo, hi)
            }
            DomainSpec::CylinderOverEllipsoid { semiaxes, dim } => {
                let mut lo = vec![-spread; *dim];
                let mut hi = vec![spread; *dim];
                for i in 0..semiaxes.len() {
                    lo[i] = -semiaxes[i];
                    hi[i] = semiaxes[i];
                }
                (lo, hi)
            }
            DomainSpec::CylinderOverParaboloid {
                semiaxes,
                dim,
                vertex_offset,
            } => {
                let amax = semiaxes.iter().cloned().fold(0.0, f64::max);
                let w = amax * spread.sqrt();
                let k = semiaxes.len();
                let mut lo = vec![-spread; *dim];
                let mut hi = vec![spread; *dim];
                for i in 0..k {
                    lo[i] = -w;
                    hi[i] = w;
                }
                lo[k] = vertex_offset + 0.05 * spread;
                hi[k] = vertex_offset + spread;
                (lo, hi)
            }
            DomainSpec::WholeSpace { dim } => (vec![-spread; *dim], vec![spread; *dim]),
        };
        let clearance = match self {
            DomainSpec::WholeSpace { .. } => 0.0,
            _ => {
                0.02 * (0..n)
                    .map(|i| hi[i] - lo[i])
                    .fold(f64::INFINITY, f64::min)
            }
        };
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < 100_000 {
            attempts += 1;
            let x: Vec<f64> = (0..n).map(|i| lo[i] + rng.gen::<f64>() * (hi[i] - lo[i])).collect();
            if self.contains(&x) != Location::Inside {
                continue;
            }
            if clearance > 0.0 {
                match self.distance_to_boundary(&x) {
                    Ok(d) if d >= clearance => {}
                    _ => continue,
                }
            }
            out.push(x);
        }
        out
    }

    /// Lebesgue measure of `D ∩ B_ρ(0)`.
    ///
    /// Closed forms for whole space, half-space (spherical cap), and an
    /// ellipsoid entirely inside/containing the ball; everything else goes
    /// through clipped adaptive quadrature.
    pub fn volume_in_ball(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {rho}")));
        }
        let n = self.dim();
        let ball = ball_volume(n, rho);
        match self {
            DomainSpec::WholeSpace { .. } => Ok(ball),
            DomainSpec::HalfSpace { normal, offset } => {
                // signed distance of the plane from the origin along ν
                let d = *offset;
                let _ = normal;
                Ok(cap_volume(n, rho, d))
            }
            DomainSpec::Ellipsoid { center, semiaxes } => {
                let far = norm(center) + semiaxes.iter().cloned().fold(0.0, f64::max);
                if far <= rho {
                    return Ok(ellipsoid_volume(semiaxes));
                }
                if self.contains(&vec![0.0; n]) == Location::Inside {
                    if let Ok(d) = self.distance_to_boundary(&vec![0.0; n]) {
                        if rho <= d {
                            return Ok(ball);
                        }
                    }
                }
                crate::quadrature::domain_ball_volume(self, rho)
            }
            _ => crate::quadrature::domain_ball_volume(self, rho),
        }
    }
}

/// `{t ∈ [0, t_max] : d t + c < 0}`
fn linear_ray_interval(d: f64, c: f64, t_max: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        return if c < 0.0 { Some((0.0, t_max)) } else { None };
    }
    let root = -c / d;
    let (lo, hi) = if d > 0.0 {
        (0.0, root.min(t_max))
    } else {
        (root.max(0.0), t_max)
    };
    if lo < hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// `{t ∈ [0, t_max] : a t² + b t + c < 0}` with `a ≥ 0` (convex sections).
fn quadratic_ray_interval(a: f64, b: f64, c: f64, t_max: f64) -> Option<(f64, f64)> {
    if a.abs() < 1e-300 {
        return linear_ray_interval(b, c, t_max);
    }
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // numerically stable root pair
    let q = -0.5 * (b + b.signum() * sq);
    let (mut r0, mut r1) = if b == 0.0 {
        let r = (sq / (2.0 * a)).abs();
        (-r, r)
    } else {
        (q / a, c / q)
    };
    if r0 > r1 {
        std::mem::swap(&mut r0, &mut r1);
    }
    let lo = r0.max(0.0);
    let hi = r1.min(t_max);
    if lo < hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Exact maximum of `Σ a_i z_i² + Σ w_i z_i + g0` over the sphere `|z| = r`
/// for diagonal `a` (trust-region style secular equation).
fn sphere_max_quadratic(a: &[f64], w: &[f64], g0: f64, r: f64) -> f64 {
    let n = a.len();
    let amax = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eig_tol = 1e-13 * (1.0 + amax.abs());
    let at_max: Vec<bool> = a.iter().map(|&ai| amax - ai <= eig_tol).collect();
    let w_max_norm2: f64 = (0..n).filter(|&i| at_max[i]).map(|i| w[i] * w[i]).sum();
    let psi = |lam: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            let d = lam - a[i];
            s += w[i] * w[i] / (4.0 * d * d);
        }
        s
    };
    if w_max_norm2 == 0.0 {
        // the multiplier may stick at amax with leftover mass in its eigenspace
        let mut s0 = 0.0;
        for i in 0..n {
            if !at_max[i] {
                let d = amax - a[i];
                s0 += w[i] * w[i] / (4.0 * d * d);
            }
        }
        if s0 <= r * r {
            let mut val = g0 + amax * (r * r - s0);
            for i in 0..n {
                if !at_max[i] && w[i] != 0.0 {
                    let z = w[i] / (2.0 * (amax - a[i]));
                    val += a[i] * z * z + w[i] * z;
                }
            }
            return val;
        }
    }
    // ψ is decreasing on (amax, ∞) with ψ(lo) ≥ r² ≥ ψ(hi)
    let wnorm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut lo = amax + 1e-14 * (1.0 + amax.abs());
    let mut hi = amax + (wnorm / (2.0 * r)).max(1e-12);
    while psi(hi) > r * r {
        hi = amax + 2.0 * (hi - amax);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if psi(mid) > r * r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    let mut val = g0;
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let z = w[i] / (2.0 * (lam - a[i]));
        val += a[i] * z * z + w[i] * z;
    }
    val
}

fn intersect_sections(a: AxisSection, b: AxisSection) -> AxisSection {
    use AxisSection::*;
    let to_pair = |s: AxisSection| match s {
        Empty => None,
        All => Some((f64::NEG_INFINITY, f64::INFINITY)),
        Interval(x, y) => Some((x, y)),
        Below(y) => Some((f64::NEG_INFINITY, y)),
        Above(x) => Some((x, f64::INFINITY)),
    };
    match (to_pair(a), to_pair(b)) {
        (Some((a0, a1)), Some((b0, b1))) => {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo >= hi {
                Empty
            } else if lo.is_infinite() && hi.is_infinite() {
                All
            } else if lo.is_infinite() {
                Below(hi)
            } else if hi.is_infinite() {
                Above(lo)
            } else {
                Interval(lo, hi)
            }
        }
        _ => Empty,
    }
}

/// Range of coordinate `k` under `ν·x < c` with coordinates `0..k` fixed and
/// no free tail coordinates beyond `k` (callers handle that case).
fn linear_constraint_range(nu: &[f64], c: f64, prefix: &[f64], k: usize) -> AxisSection {
    let mut rhs = c;
    for i in 0..k {
        rhs -= nu[i] * prefix[i];
    }
    let tail_active = nu[k + 1..].iter().any(|&v| v != 0.0);
    let nk = nu[k];
    if nk == 0.0 {
        if tail_active {
            // remaining coordinates can always satisfy a nondegenerate linear bound
            return AxisSection::All;
        }
        return if rhs > 0.0 { AxisSection::All } else { AxisSection::Empty };
    }
    if tail_active {
        return AxisSection::All;
    }
    if nk > 0.0 {
        AxisSection::Below(rhs / nk)
    } else {
        AxisSection::Above(rhs / nk)
    }
}

pub(crate) fn ball_volume(n: usize, rho: f64) -> f64 {
    use std::f64::consts::PI;
    match n {
        2 => PI * rho * rho,
        3 => 4.0 / 3.0 * PI * rho * rho * rho,
        _ => {
            let dim = crate::kernel::Dimension::new(n).unwrap();
            dim.sphere_area() * rho.powi(n as i32) / n as f64
        }
    }
}

pub(crate) fn ellipsoid_volume(semiaxes: &[f64]) -> f64 {
    ball_volume(semiaxes.len(), 1.0) * semiaxes.iter().product::<f64>()
}

/// Volume of `{ν·x < d} ∩ B_ρ(0)` (spherical cap complement geometry).
fn cap_volume(n: usize, rho: f64, d: f64) -> f64 {
    use std::f64::consts::PI;
    if d <= -rho {
        return 0.0;
    }
    if d >= rho {
        return ball_volume(n, rho);
    }
    match n {
        2 => {
            // circular segment above the chord at signed distance d
            let seg = rho * rho * (d / rho).acos() - d * (rho * rho - d * d).sqrt();
            PI * rho * rho - seg
        }
        3 => {
            // spherical cap of height h = ρ - d removed
            let h = rho - d;
            let cap = PI * h * h * (3.0 * rho - h) / 3.0;
            4.0 / 3.0 * PI * rho.powi(3) - cap
        }
        _ => unreachable!("cap volume only needed in dims 2 and 3"),
    }
}

// ----- boundary samplers -----

fn ellipse_samples(center: &[f64], semiaxes: &[f64], count: usize) -> Vec<BoundarySample> {
    use std::f64::consts::PI;
    let (a, b) = (semiaxes[0], semiaxes[1]);
    let speed = |th: f64| -> f64 {
        let (s, c) = th.sin_cos();
        (a * a * s * s + b * b * c * c).sqrt()
    };
    // cumulative arc length on a fine composite-Simpson grid
    let m = 16 * 1024;
    let h = 2.0 * PI / m as f64;
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for j in 0..m {
        let t0 = j as f64 * h;
        acc += h / 6.0 * (speed(t0) + 4.0 * speed(t0 + 0.5 * h) + speed(t0 + h));
        cum.push(acc);
    }
    let total = acc;
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let target = total * (j as f64 + 0.5) / count as f64;
        // invert the cumulative table
        let idx = cum.partition_point(|&v| v < target).max(1) - 1;
        let frac = (target - cum[idx]) / (cum[idx + 1] - cum[idx]);
        let th = (idx as f64 + frac) * h;
        let (s, c) = th.sin_cos();
        let point = vec![center[0] + a * c, center[1] + b * s];
        let mut nrm = vec![c / a, s / b];
        let nn = norm(&nrm);
        nrm.iter_mut().for_each(|v| *v /= nn);
        out.push(BoundarySample {
            point,
            normal: nrm,
            patch_weight: total / count as f64,
        });
    }
    out
}

fn ellipsoid_samples(center: &[f64], semiaxes: &[f64], count: usize) -> Vec<BoundarySample> {
    use std::f64::consts::PI;
    let (a, b, c) = (semiaxes[0], semiaxes[1], semiaxes[2]);
    let mu = ((count as f64 / 2.0).sqrt().round() as usize).max(2);
    let mv = 2 * mu;
    // surface element of (a sinθ cosφ, b sinθ sinφ, c cosθ)
    let elem = |th: f64, ph: f64| -> f64 {
        let (st, ct) = th.sin_cos();
        let (sp, cp) = ph.sin_cos();
        let nx = b * c * st * st * cp;
        let ny = a * c * st * st * sp;
        let nz = a * b * st * ct;
        (nx * nx + ny * ny + nz * nz).sqrt()
    };
    let mut out = Vec::with_capacity(mu * mv);
    let (hu, hv) = (PI / mu as f64, 2.0 * PI / mv as f64);
    let gauss = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
    for iu in 0..mu {
        for iv in 0..mv {
            let th0 = iu as f64 * hu;
            let ph0 = iv as f64 * hv;
            // 2×2 Gauss per cell for the weight
            let mut w = 0.0;
            for gu in gauss {
                for gv in gauss {
                    w += elem(th0 + gu * hu, ph0 + gv * hv);
                }
            }
            w *= hu * hv / 4.0;
            let (th, ph) = (th0 + 0.5 * hu, ph0 + 0.5 * hv);
            let (st, ct) = th.sin_cos();
            let (sp, cp) = ph.sin_cos();
            let point = vec![
                center[0] + a * st * cp,
                center[1] + b * st * sp,
                center[2] + c * ct,
            ];
            let mut nrm = vec![st * cp / a, st * sp / b, ct / c];
            let nn = norm(&nrm);
            nrm.iter_mut().for_each(|v| *v /= nn);
            out.push(BoundarySample {
                point,
                normal: nrm,
                patch_weight: w,
            });
        }
    }
    out
}

/// Orthonormal tangent basis completing a unit normal.
fn tangent_basis(normal: &[f64]) -> Vec<Vec<f64>> {
    let n = normal.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        // Gram-Schmidt against the normal and previous tangents
        let mut v = sub(&e, &normal.iter().map(|&m| m * dot(normal, &e)).collect::<Vec<_>>());
        for t in &basis {
            let p = dot(t, &v);
            for (vi, ti) in v.iter_mut().zip(t) {
                *vi -= p * ti;
            }
        }
        let m = norm(&v);
        if m > 1e-9 {
            v.iter_mut().for_each(|x| *x /= m);
            basis.push(v);
            if basis.len() == n - 1 {
                break;
            }
        }
    }
    basis
}

fn plane_samples(
    plane_normal: &[f64],
    plane_offset: f64,
    outward: &[f64],
    count: usize,
    extent: f64,
) -> Result<Vec<BoundarySample>> {
    let n = plane_normal.len();
    let origin: Vec<f64> = plane_normal.iter().map(|v| v * plane_offset).collect();
    let tangents = tangent_basis(plane_normal);
    let mut out = Vec::with_capacity(count);
    match n {
        2 => {
            let h = 2.0 * extent / count as f64;
            for j in 0..count {
                let t = -extent + (j as f64 + 0.5) * h;
                let mut point = origin.clone();
                for (pi, ti) in point.iter_mut().zip(&tangents[0]) {
                    *pi += t * ti;
                }
                out.push(BoundarySample {
                    point,
                    normal: outward.to_vec(),
                    patch_weight: h,
                });
            }
        }
        3 => {
            let m = (count as f64).sqrt().round().max(2.0) as usize;
            let h = 2.0 * extent / m as f64;
            for j0 in 0..m {
                for j1 in 0..m {
                    let t0 = -extent + (j0 as f64 + 0.5) * h;
                    let t1 = -extent + (j1 as f64 + 0.5) * h;
                    let mut point = origin.clone();
                    for i in 0..3 {
                        point[i] += t0 * tangents[0][i] + t1 * tangents[1][i];
                    }
                    out.push(BoundarySample {
                        point,
                        normal: outward.to_vec(),
                        patch_weight: h * h,
                    });
                }
            }
        }
        d => return Err(Error::InvalidInput(format!("plane sampling unsupported in dim {d}"))),
    }
    Ok(out)
}

fn parabola_samples(
    alpha: f64,
    axis: usize,
    vertex_offset: f64,
    count: usize,
    extent: f64,
) -> Vec<BoundarySample> {
    // curve (s, v + (s/α)²) in (transverse, axis) coordinates, arc-length
    // equi-partition over s ∈ [-extent, extent]
    let speed = |s: f64| (1.0 + 4.0 * s * s / (alpha * alpha * alpha * alpha)).sqrt();
    let m = 16 * 1024;
    let h = 2.0 * extent / m as f64;
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for j in 0..m {
        let s0 = -extent + j as f64 * h;
        acc += h / 6.0 * (speed(s0) + 4.0 * speed(s0 + 0.5 * h) + speed(s0 + h));
        cum.push(acc);
    }
    let total = acc;
    let tr = 1 - axis; // transverse coordinate index in 2D
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let target = total * (j as f64 + 0.5) / count as f64;
        let idx = cum.partition_point(|&v| v < target).max(1) - 1;
        let frac = (target - cum[idx]) / (cum[idx + 1] - cum[idx]);
        let s = -extent + (idx as f64 + frac) * h;
        let mut point = vec![0.0; 2];
        point[tr] = s;
        point[axis] = vertex_offset + (s / alpha) * (s / alpha);
        let mut nrm = vec![0.0; 2];
        nrm[tr] = 2.0 * s / (alpha * alpha);
        nrm[axis] = -1.0;
        let nn = norm(&nrm);
        nrm.iter_mut().for_each(|v| *v /= nn);
        out.push(BoundarySample {
            point,
            normal: nrm,
            patch_weight: total / count as f64,
        });
    }
    out
}

fn paraboloid_samples_3d(
    semiaxes: &[f64],
    axis: usize,
    vertex_offset: f64,
    count: usize,
    extent: f64,
) -> Vec<BoundarySample> {
    // graph x_axis = v + Σ (x_t/α_t)² over the transverse square [-e, e]²
    let m = (count as f64).sqrt().round().max(2.0) as usize;
    let h = 2.0 * extent / m as f64;
    let trs: Vec<usize> = (0..3).filter(|&i| i != axis).collect();
    let (a0, a1) = (semiaxes[0], semiaxes[1]);
    let elem = |s0: f64, s1: f64| -> f64 {
        let g0 = 2.0 * s0 / (a0 * a0);
        let g1 = 2.0 * s1 / (a1 * a1);
        (1.0 + g0 * g0 + g1 * g1).sqrt()
    };
    let gauss = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
    let mut out = Vec::with_capacity(m * m);
    for j0 in 0..m {
        for j1 in 0..m {
            let s0c = -extent + j0 as f64 * h;
            let s1c = -extent + j1 as f64 * h;
            let mut w = 0.0;
            for g0 in gauss {
                for g1 in gauss {
                    w += elem(s0c + g0 * h, s1c + g1 * h);
                }
            }
            w *= h * h / 4.0;
            let (s0, s1) = (s0c + 0.5 * h, s1c + 0.5 * h);
            let mut point = vec![0.0; 3];
            point[trs[0]] = s0;
            point[trs[1]] = s1;
            point[axis] = vertex_offset + (s0 / a0) * (s0 / a0) + (s1 / a1) * (s1 / a1);
            let mut nrm = vec![0.0; 3];
            nrm[trs[0]] = 2.0 * s0 / (a0 * a0);
            nrm[trs[1]] = 2.0 * s1 / (a1 * a1);
            nrm[axis] = -1.0;
            let nn = norm(&nrm);
            nrm.iter_mut().for_each(|v| *v /= nn);
            out.push(BoundarySample {
                point,
                normal: nrm,
                patch_weight: w,
            });
        }
    }
    out
}

enum FaceSet {
    /// flat faces of a 1-D base: (base point, base outward normal)
    Flat(Vec<(Vec<f64>, Vec<f64>)>),
    Curve(Vec<BoundarySample>),
}

/// Extrude base boundary samples along the free coordinate of a cylinder.
fn cylinder_samples(
    base_dim: usize,
    dim: usize,
    count: usize,
    extent: f64,
    base: impl Fn(usize) -> FaceSet,
) -> Result<Vec<BoundarySample>> {
    let free = dim - base_dim;
    if free != 1 {
        return Err(Error::InvalidInput(
            "cylinder boundary sampling implemented for one free coordinate".into(),
        ));
    }
    let m_free = ((count as f64).sqrt().round() as usize).max(2);
    let m_base = (count / m_free).max(4);
    let h = 2.0 * extent / m_free as f64;
    let mut out = Vec::new();
    let push = |out: &mut Vec<BoundarySample>, bp: &[f64], bn: &[f64], w: f64| {
        for jf in 0..m_free {
            let t = -extent + (jf as f64 + 0.5) * h;
            let mut point = bp.to_vec();
            point.push(t);
            let mut normal = bn.to_vec();
            normal.push(0.0);
            out.push(BoundarySample {
                point,
                normal,
                patch_weight: w * h,
            });
        }
    };
    match base(m_base) {
        FaceSet::Flat(v) => {
            for (bp, bn) in v {
                push(&mut out, &bp, &bn, 1.0);
            }
        }
        FaceSet::Curve(samples) => {
            for s in samples {
                push(&mut out, &s.point, &s.normal, s.patch_weight);
            }
        }
    }
    Ok(out)
}

fn box_samples_2d(center: &[f64], half_widths: &[f64], count: usize) -> Vec<BoundarySample> {
    let per_edge = (count / 4).max(1);
    let mut out = Vec::with_capacity(4 * per_edge);
    // edges: (fixed coord, sign, varying coord)
    for (fix, sgn) in [(0usize, 1.0f64), (0, -1.0), (1, 1.0), (1, -1.0)] {
        let var = 1 - fix;
        let len = 2.0 * half_widths[var];
        let h = len / per_edge as f64;
        for j in 0..per_edge {
            let t = -half_widths[var] + (j as f64 + 0.5) * h;
            let mut point = center.to_vec();
            point[fix] += sgn * half_widths[fix];
            point[var] += t;
            let mut normal = vec![0.0; 2];
            normal[fix] = sgn;
            out.push(BoundarySample {
                point,
                normal,
                patch_weight: h,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn contains_examples() {
        let disk = DomainSpec::unit_disk();
        assert_eq!(disk.contains(&[0.5, 0.0]), Location::Inside);
        let hs = DomainSpec::half_space(&[0.0, -1.0], 0.0).unwrap(); // {x₂ > 0}
        assert_eq!(hs.contains(&[7.0, -1.0]), Location::Outside);
        assert_eq!(hs.contains(&[7.0, 1.0]), Location::Inside);
        let par = DomainSpec::paraboloid(&[1.0], 1, 0.0).unwrap(); // {x₂ > x₁²}
        assert_eq!(par.contains(&[1.0, 1.0]), Location::Boundary);
        assert_eq!(par.contains(&[1.0, 1.5]), Location::Inside);
        assert_eq!(par.contains(&[1.0, 0.5]), Location::Outside);
    }

    #[test]
    fn outward_normals() {
        let disk = DomainSpec::unit_disk();
        let n = disk.outward_normal(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(n[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(n[1], 0.0, epsilon = 1e-12);

        let hs = DomainSpec::half_space(&[0.0, -1.0], 0.0).unwrap(); // {x₂ > 0}
        let n = hs.outward_normal(&[3.0, 0.0]).unwrap();
        assert_eq!(n, vec![0.0, -1.0]);

        let par = DomainSpec::paraboloid(&[1.0], 1, 0.0).unwrap();
        let n = par.outward_normal(&[1.0, 1.0]).unwrap();
        let exp = [2.0 / 5.0f64.sqrt(), -1.0 / 5.0f64.sqrt()];
        assert_relative_eq!(n[0], exp[0], epsilon = 1e-12);
        assert_relative_eq!(n[1], exp[1], epsilon = 1e-12);

        // finite-difference cross-check of the defining gradient
        let h = 1e-6;
        for (i, &ni) in n.iter().enumerate() {
            let mut xp = vec![1.0, 1.0];
            xp[i] += h;
            let mut xm = vec![1.0, 1.0];
            xm[i] -= h;
            let fd = (par.defining_value(&xp) - par.defining_value(&xm)) / (2.0 * h);
            let gnorm = norm(&par.defining_gradient(&[1.0, 1.0]));
            assert_relative_eq!(ni, fd / gnorm, epsilon = 1e-6);
        }
    }

    #[test]
    fn circle_weights_sum_to_perimeter() {
        let disk = DomainSpec::unit_disk();
        let s = disk.boundary_samples(360, None).unwrap();
        let total: f64 = s.iter().map(|b| b.patch_weight).sum();
        assert!((total - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn ellipse_weights_match_arc_length_oracle() {
        // oracle: adaptive 1D integration of the ellipse speed, independent
        // of the Simpson table used by the sampler
        let (a, b) = (2.0, 1.0);
        let speed = |th: f64| -> f64 {
            let (s, c) = th.sin_cos();
            (a * a * s * s + b * b * c * c).sqrt()
        };
        // composite Gauss-7 on 512 panels (different rule family than the sampler)
        let gauss_x = [
            -0.949107912342759,
            -0.741531185599394,
            -0.405845151377397,
            0.0,
            0.405845151377397,
            0.741531185599394,
            0.949107912342759,
        ];
        let gauss_w = [
            0.129484966168870,
            0.279705391489277,
            0.381830050505119,
            0.417959183673469,
            0.381830050505119,
            0.279705391489277,
            0.129484966168870,
        ];
        let m = 512;
        let h = 2.0 * PI / m as f64;
        let mut per = 0.0;
        for j in 0..m {
            let mid = (j as f64 + 0.5) * h;
            for (x, w) in gauss_x.iter().zip(gauss_w) {
                per += w * speed(mid + 0.5 * h * x);
            }
        }
        per *= h / 2.0;
        assert_relative_eq!(per, 9.688448, epsilon = 1e-5);

        let ell = DomainSpec::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let s = ell.boundary_samples(2048, None).unwrap();
        let total: f64 = s.iter().map(|b| b.patch_weight).sum();
        assert_relative_eq!(total, per, epsilon = 1e-7);
    }

    #[test]
    fn strip_weights_sum_exactly() {
        let strip = DomainSpec::strip(&[0.0, 1.0], -1.0, 1.0).unwrap();
        let s = strip.boundary_samples(64, Some(10.0)).unwrap();
        let total: f64 = s.iter().map(|b| b.patch_weight).sum();
        assert!((total - 40.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn missing_extent_is_an_error() {
        let hs = DomainSpec::half_space(&[0.0, -1.0], 0.0).unwrap();
        assert!(matches!(hs.boundary_samples(16, None), Err(Error::MissingExtent)));
    }

    #[test]
    fn normal_consistency_all_variants() {
        // x + εη outside, x - εη inside
        let eps = 1e-6;
        let variants: Vec<DomainSpec> = vec![
            DomainSpec::ellipsoid(&[0.2, -0.1], &[2.0, 1.0]).unwrap(),
            DomainSpec::half_space(&[0.6, -0.8], 0.3).unwrap(),
            DomainSpec::strip(&[0.0, 1.0], -1.0, 2.0).unwrap(),
            DomainSpec::paraboloid(&[1.5], 1, -0.5).unwrap(),
            DomainSpec::cylinder_over_ellipsoid(&[2.0, 1.0], 3).unwrap(),
            DomainSpec::cylinder_over_paraboloid(&[1.0], 3, 0.0).unwrap(),
            DomainSpec::ellipsoid(&[0.0, 0.0, 0.0], &[1.0, 2.0, 0.5]).unwrap(),
            DomainSpec::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
        ];
        for d in &variants {
            let samples = d.boundary_samples(100, Some(5.0)).unwrap();
            assert!(samples.len() >= 50);
            for s in samples.iter() {
                assert!(
                    d.defining_value(&s.point).abs() <= 1e-9,
                    "{d:?}: sample off boundary: g = {}",
                    d.defining_value(&s.point)
                );
                assert_relative_eq!(norm(&s.normal), 1.0, epsilon = 1e-12);
                let outp: Vec<f64> = s.point.iter().zip(&s.normal).map(|(p, n)| p + eps * n).collect();
                let inp: Vec<f64> = s.point.iter().zip(&s.normal).map(|(p, n)| p - eps * n).collect();
                assert_eq!(d.contains(&outp), Location::Outside, "{d:?} at {:?}", s.point);
                assert_eq!(d.contains(&inp), Location::Inside, "{d:?} at {:?}", s.point);
            }
        }
    }

    #[test]
    fn distance_to_boundary_spot_values() {
        let disk = DomainSpec::unit_disk();
        assert_relative_eq!(disk.distance_to_boundary(&[0.3, 0.0]).unwrap(), 0.7, epsilon = 1e-10);
        let ell = DomainSpec::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        assert_relative_eq!(ell.distance_to_boundary(&[0.0, 0.0]).unwrap(), 1.0, epsilon = 1e-10);
        let hs = DomainSpec::half_space(&[0.0, -1.0], 0.0).unwrap();
        assert_relative_eq!(hs.distance_to_boundary(&[5.0, 2.0]).unwrap(), 2.0, epsilon = 1e-12);
        let par = DomainSpec::paraboloid(&[1.0], 1, 0.0).unwrap();
        // vertex clearance at (0, 1): nearest boundary points are (±√(1/2), 1/2)
        let d = par.distance_to_boundary(&[0.0, 1.0]).unwrap();
        assert_relative_eq!(d, (3.0f64 / 4.0).sqrt(), epsilon = 1e-9);
        // interior ball certified: points at distance d(1-ε) along axes stay inside
        assert_eq!(par.contains(&[0.0, 1.0 - d * 0.999_999]), Location::Inside);
    }

    #[test]
    fn volume_in_ball_examples() {
        // half-space through the origin: half the ball, any radius
        let hs = DomainSpec::half_space(&[0.6, 0.8], 0.0).unwrap();
        for rho in [0.5, 1.0, 3.0] {
            assert_relative_eq!(
                hs.volume_in_ball(rho).unwrap(),
                0.5 * PI * rho * rho,
                max_relative = 1e-12
            );
        }
        // unit disk inside B_2
        let disk = DomainSpec::unit_disk();
        assert_relative_eq!(disk.volume_in_ball(2.0).unwrap(), PI, max_relative = 1e-12);
        // ball fully inside the ellipsoid
        let ell = DomainSpec::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        assert_relative_eq!(ell.volume_in_ball(0.5).unwrap(), 0.25 * PI, max_relative = 1e-12);
        // 3D: half-space offset cap
        let hs3 = DomainSpec::half_space(&[0.0, 0.0, 1.0], 0.0).unwrap();
        assert_relative_eq!(
            hs3.volume_in_ball(2.0).unwrap(),
            0.5 * 4.0 / 3.0 * PI * 8.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn json_round_trip() {
        let variants: Vec<DomainSpec> = vec![
            DomainSpec::ellipsoid(&[0.0, 0.5], &[2.0, 1.0]).unwrap(),
            DomainSpec::half_space(&[0.0, -1.0], 0.25).unwrap(),
            DomainSpec::strip(&[1.0, 0.0], -1.0, 1.0).unwrap(),
            DomainSpec::paraboloid(&[1.0], 1, 0.0).unwrap(),
            DomainSpec::cylinder_over_ellipsoid(&[2.0, 1.0], 3).unwrap(),
            DomainSpec::whole_space(2).unwrap(),
            DomainSpec::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
        ];
        for d in &variants {
            let js = serde_json::to_string(d).unwrap();
            let back: DomainSpec = serde_json::from_str(&js).unwrap();
            assert_eq!(*d, back);
        }
        // spot-check the tag naming
        let js = serde_json::to_string(&variants[0]).unwrap();
        assert!(js.contains("\"variant\":\"ellipsoid\""), "{js}");
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(DomainSpec::ellipsoid(&[0.0, 0.0], &[-1.0, 1.0]).is_err());
        assert!(DomainSpec::strip(&[0.0, 1.0], 2.0, 1.0).is_err());
        assert!(DomainSpec::half_space(&[0.0, 0.0], 0.0).is_err());
        assert!(DomainSpec::paraboloid(&[1.0], 2, 0.0).is_err());
        assert!(DomainSpec::cylinder_over_ellipsoid(&[1.0, 1.0], 2).is_err());
    }
}
