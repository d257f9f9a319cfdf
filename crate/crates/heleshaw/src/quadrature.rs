//! Adaptive multidimensional integration over [`DomainSpec`] regions.
//!
//! The engine is iterated 1-D adaptive Gauss-Kronrod (7/15 pair with the
//! QUADPACK error rescale): the outermost coordinates run over projection
//! ranges of the region and the innermost coordinate integrates over exact
//! line sections. Because every domain variant has piecewise-quadratic
//! defining functions, sections against the domain, a truncation ball and an
//! excised ball are closed-form interval arithmetic; no indicator functions
//! ever enter the integrand.
//!
//! Integrable point singularities (the kernel itself) are integrated in
//! polar/spherical coordinates over a small ball around the singular point,
//! where `r^{n-1} J` is bounded; non-integrable singularities (third and
//! fourth kernel derivatives at interior points) must go through
//! [`integrate_with_excision`].

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::domains::{AxisSection, DomainSpec, Location};
use crate::{Error, Result};

/// Tolerances and budgets for one integration call.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of Gauss-Kronrod panels across the whole call tree.
    pub max_subdivisions: usize,
    /// Radius of the truncation ball (centered at the origin) for unbounded
    /// domains; the caller pairs it with an explicit tail bound.
    pub truncation_radius: Option<f64>,
    /// Excision ball radius; when unset, half the distance to the boundary.
    pub excision_radius: Option<f64>,
}

impl QuadratureConfig {
    /// Spec defaults: relative 1e-8 in the plane, 1e-6 in space.
    pub fn for_dim(n: usize) -> Self {
        QuadratureConfig {
            rel_tol: if n <= 2 { 1e-8 } else { 1e-6 },
            abs_tol: 1e-10,
            max_subdivisions: 1_000_000,
            truncation_radius: None,
            excision_radius: None,
        }
    }

    pub fn with_rel_tol(mut self, rel: f64) -> Self {
        self.rel_tol = rel;
        self
    }

    pub fn with_abs_tol(mut self, abs: f64) -> Self {
        self.abs_tol = abs;
        self
    }

    pub fn with_truncation(mut self, radius: f64) -> Self {
        self.truncation_radius = Some(radius);
        self
    }
}

/// Value and a conservative error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// Integrand with a singularity annotation.
pub struct Integrand<'a> {
    f: Box<dyn Fn(&[f64]) -> f64 + 'a>,
    singularity: Singularity,
}

#[derive(Debug, Clone)]
enum Singularity {
    None,
    /// integrable like the kernel itself (`log r` in 2-D, `1/r` in 3-D)
    Integrable(Vec<f64>),
    /// worse than `r^{-n}`: requires excision
    NonIntegrable(Vec<f64>),
}

impl<'a> Integrand<'a> {
    pub fn smooth(f: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        Integrand {
            f: Box::new(f),
            singularity: Singularity::None,
        }
    }

    pub fn singular_integrable(f: impl Fn(&[f64]) -> f64 + 'a, at: &[f64]) -> Self {
        Integrand {
            f: Box::new(f),
            singularity: Singularity::Integrable(at.to_vec()),
        }
    }

    pub fn singular_nonintegrable(f: impl Fn(&[f64]) -> f64 + 'a, at: &[f64]) -> Self {
        Integrand {
            f: Box::new(f),
            singularity: Singularity::NonIntegrable(at.to_vec()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

// ----- regions -----

#[derive(Debug, Clone)]
pub(crate) struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: &[f64], radius: f64) -> Self {
        Ball {
            center: center.to_vec(),
            radius,
        }
    }

    /// Section of the line `{(prefix, t)}` with the ball; prefix covers the
    /// first `len` coordinates and `t` is coordinate `len`.
    fn section(&self, prefix: &[f64]) -> AxisSection {
        let k = prefix.len();
        let mut rem = self.radius * self.radius;
        for i in 0..k {
            let d = prefix[i] - self.center[i];
            rem -= d * d;
        }
        if rem <= 0.0 {
            return AxisSection::Empty;
        }
        let h = rem.sqrt();
        AxisSection::Interval(self.center[k] - h, self.center[k] + h)
    }
}

/// `(base ∩ clip_ball) ∖ minus_domain ∖ minus_ball`
pub(crate) struct Region<'a> {
    pub dim: usize,
    pub base: Option<&'a DomainSpec>,
    pub clip_ball: Option<Ball>,
    pub minus_domain: Option<&'a DomainSpec>,
    pub minus_ball: Option<Ball>,
}

impl<'a> Region<'a> {
    pub fn domain(d: &'a DomainSpec) -> Self {
        Region {
            dim: d.dim(),
            base: Some(d),
            clip_ball: None,
            minus_domain: None,
            minus_ball: None,
        }
    }

    pub fn clipped(mut self, ball: Ball) -> Self {
        self.clip_ball = Some(ball);
        self
    }

    pub fn minus_ball(mut self, ball: Ball) -> Self {
        self.minus_ball = Some(ball);
        self
    }

    /// Complement region `(B ∖ D)` for exterior integrals.
    pub fn complement_in_ball(d: &'a DomainSpec, ball: Ball) -> Self {
        Region {
            dim: d.dim(),
            base: None,
            clip_ball: Some(ball),
            minus_domain: Some(d),
            minus_ball: None,
        }
    }

    fn ensure_bounded(&self) -> Result<()> {
        let bounded = self.clip_ball.is_some()
            || self.base.map(|d| d.is_bounded()).unwrap_or(false);
        if !bounded {
            return Err(Error::InvalidInput(
                "unbounded integration region requires a truncation radius".into(),
            ));
        }
        Ok(())
    }

    /// Outer bounds for coordinate `prefix.len()`; `None` when the region is
    /// empty above the prefix. May over-cover.
    fn proj_range(&self, prefix: &[f64]) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let mut apply = |s: AxisSection| -> bool {
            match s.clip(f64::NEG_INFINITY, f64::INFINITY) {
                None => false,
                Some((a, b)) => {
                    lo = lo.max(a);
                    hi = hi.min(b);
                    lo < hi
                }
            }
        };
        if let Some(d) = self.base {
            if !apply(d.proj_range(prefix)) {
                return None;
            }
        }
        if let Some(ball) = &self.clip_ball {
            if !apply(ball.section(prefix)) {
                return None;
            }
        }
        if lo.is_infinite() || hi.is_infinite() {
            return None;
        }
        Some((lo, hi))
    }

    /// Exact section intervals of the region along the last coordinate.
    fn section_intervals(&self, prefix: &[f64]) -> Vec<(f64, f64)> {
        debug_assert_eq!(prefix.len(), self.dim - 1);
        // positive part: base ∩ clip ball
        let base_sec = match self.base {
            Some(d) => d.section_last(prefix),
            None => AxisSection::All,
        };
        let first = match &self.clip_ball {
            Some(ball) => match ball.section(prefix) {
                AxisSection::Interval(a, b) => base_sec.clip(a, b),
                AxisSection::Empty => None,
                _ => unreachable!(),
            },
            None => base_sec.clip(f64::NEG_INFINITY, f64::INFINITY),
        };
        let mut list: Vec<(f64, f64)> = match first {
            Some((a, b)) if a.is_finite() && b.is_finite() => vec![(a, b)],
            Some(_) => panic!("unbounded section escaped ensure_bounded"),
            None => return Vec::new(),
        };
        // subtractions
        if let Some(d) = self.minus_domain {
            list = subtract_section(&list, d.section_last(prefix));
        }
        if let Some(ball) = &self.minus_ball {
            list = subtract_section(&list, ball.section(prefix));
        }
        list
    }
}

fn subtract_section(list: &[(f64, f64)], cut: AxisSection) -> Vec<(f64, f64)> {
    let (c, d) = match cut {
        AxisSection::Empty => return list.to_vec(),
        AxisSection::All => return Vec::new(),
        AxisSection::Interval(c, d) => (c, d),
        AxisSection::Below(d) => (f64::NEG_INFINITY, d),
        AxisSection::Above(c) => (c, f64::INFINITY),
    };
    let mut out = Vec::with_capacity(list.len() + 1);
    for &(a, b) in list {
        if d <= a || c >= b {
            out.push((a, b));
            continue;
        }
        if a < c {
            out.push((a, c.min(b)));
        }
        if d < b {
            out.push((d.max(a), b));
        }
    }
    out
}

// ----- Gauss-Kronrod 7/15 -----

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7/15 panel; returns (kronrod value, error estimate).
fn gk15(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = g(center);
    let mut res_g = f_center * WG[3];
    let mut res_k = f_center * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv = [0.0f64; 14];
    for j in 0..7 {
        let absc = half * XGK[j];
        let f1 = g(center - absc);
        let f2 = g(center + absc);
        fv[j] = f1;
        fv[j + 7] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[j + 7] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    // QUADPACK rescale: sharpen smooth panels, keep rough ones conservative
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

struct EngineState {
    panels: usize,
    max_panels: usize,
    exhausted: bool,
}

struct HeapItem {
    err: f64,
    id: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.id == other.id
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on error, deterministic tie-break on id
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Adaptive 1-D integration with optional pre-split hints.
fn adaptive_1d(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel: f64,
    abs: f64,
    hints: &[f64],
    st: &RefCell<EngineState>,
) -> (f64, f64) {
    if !(b > a) {
        return (0.0, 0.0);
    }
    // initial breakpoints: endpoints, interior hints, and a uniform split
    let mut pts: Vec<f64> = vec![a, b];
    for &h in hints {
        if h > a && h < b {
            pts.push(h);
        }
    }
    let initial = 4;
    for j in 1..initial {
        pts.push(a + (b - a) * j as f64 / initial as f64);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    struct Panel {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
        leaf: bool,
    }
    let mut arena: Vec<Panel> = Vec::new();
    let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
    let mut push = |arena: &mut Vec<Panel>, heap: &mut BinaryHeap<HeapItem>, lo: f64, hi: f64| {
        let (val, err) = gk15(g, lo, hi);
        let id = arena.len();
        arena.push(Panel {
            a: lo,
            b: hi,
            val,
            err,
            leaf: true,
        });
        heap.push(HeapItem { err, id });
    };
    {
        let mut stc = st.borrow_mut();
        stc.panels += pts.len() - 1;
        if stc.panels > stc.max_panels {
            stc.exhausted = true;
        }
    }
    for w in pts.windows(2) {
        push(&mut arena, &mut heap, w[0], w[1]);
    }

    let per_call_cap = 20_000;
    loop {
        let (mut tot, mut terr) = (0.0, 0.0);
        for p in arena.iter().filter(|p| p.leaf) {
            tot += p.val;
            terr += p.err;
        }
        if terr <= abs.max(rel * tot.abs()) {
            break;
        }
        if arena.len() >= per_call_cap || st.borrow().exhausted {
            st.borrow_mut().exhausted = true;
            break;
        }
        // split worst panel
        let worst = loop {
            match heap.pop() {
                Some(item) if arena[item.id].leaf => break Some(item.id),
                Some(_) => continue,
                None => break None,
            }
        };
        let Some(idx) = worst else { break };
        let (lo, hi) = (arena[idx].a, arena[idx].b);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval at floating-point resolution; accept as-is
            continue;
        }
        arena[idx].leaf = false;
        {
            let mut stc = st.borrow_mut();
            stc.panels += 2;
            if stc.panels > stc.max_panels {
                stc.exhausted = true;
            }
        }
        push(&mut arena, &mut heap, lo, mid);
        push(&mut arena, &mut heap, mid, hi);
    }

    // deterministic summation in arena (creation) order
    let (mut tot, mut terr) = (0.0, 0.0);
    for p in arena.iter().filter(|p| p.leaf) {
        tot += p.val;
        terr += p.err;
    }
    (tot, terr)
}

/// Hint coordinates per level, harvested from region structure.
fn region_hints(region: &Region) -> Vec<Vec<f64>> {
    let mut hints: Vec<Vec<f64>> = vec![Vec::new(); region.dim];
    let mut add_ball = |hints: &mut Vec<Vec<f64>>, b: &Ball| {
        for (lvl, h) in hints.iter_mut().enumerate() {
            if lvl < b.center.len() {
                let c = b.center[lvl];
                h.extend_from_slice(&[c - b.radius, c, c + b.radius]);
                h.extend_from_slice(&[c - 4.0 * b.radius, c + 4.0 * b.radius]);
            }
        }
    };
    if let Some(b) = &region.minus_ball {
        add_ball(&mut hints, b);
    }
    if let Some(b) = &region.clip_ball {
        add_ball(&mut hints, b);
    }
    if let Some(d) = region.base.or(region.minus_domain) {
        if let DomainSpec::Ellipsoid { center, semiaxes } = d {
            for (lvl, h) in hints.iter_mut().enumerate() {
                h.push(center[lvl]);
                h.push(center[lvl] - semiaxes[lvl]);
                h.push(center[lvl] + semiaxes[lvl]);
            }
        }
        if let DomainSpec::Paraboloid { axis, vertex_offset, .. } = d {
            hints[*axis].push(*vertex_offset);
        }
    }
    hints
}

fn integrate_levels(
    f: &dyn Fn(&[f64]) -> f64,
    region: &Region,
    level: usize,
    prefix: [f64; 3],
    rel: f64,
    abs: f64,
    hints: &[Vec<f64>],
    st: &RefCell<EngineState>,
) -> (f64, f64) {
    let dim = region.dim;
    if level == dim - 1 {
        let ivs = region.section_intervals(&prefix[..level]);
        let mut tot = 0.0;
        let mut terr = 0.0;
        for (a, b) in ivs {
            let g = |t: f64| {
                let mut x = prefix;
                x[level] = t;
                f(&x[..dim])
            };
            let (v, e) = adaptive_1d(&g, a, b, rel, abs, &hints[level], st);
            tot += v;
            terr += e;
        }
        (tot, terr)
    } else {
        let Some((lo, hi)) = region.proj_range(&prefix[..level]) else {
            return (0.0, 0.0);
        };
        let width = hi - lo;
        let child_abs = (abs / (4.0 * width)).max(1e-18);
        let child_rel = (rel / 2.0).max(1e-14);
        let g = |t: f64| {
            let mut p = prefix;
            p[level] = t;
            integrate_levels(f, region, level + 1, p, child_rel, child_abs, hints, st).0
        };
        let (v, e) = adaptive_1d(&g, lo, hi, rel, abs / 2.0, &hints[level], st);
        // children were budgeted abs/4 in aggregate plus their relative slack
        (v, e + abs / 4.0 + child_rel * v.abs())
    }
}

/// Integrate `f` over a region with the iterated adaptive engine.
pub(crate) fn integrate_region(
    f: &dyn Fn(&[f64]) -> f64,
    region: &Region,
    rel: f64,
    abs: f64,
    max_panels: usize,
    extra_hints: &[Vec<f64>],
) -> Result<QuadResult> {
    region.ensure_bounded()?;
    if region.dim < 2 || region.dim > 3 {
        return Err(Error::InvalidInput(format!(
            "region integration supports n ∈ {{2,3}}, got {}",
            region.dim
        )));
    }
    let mut hints = region_hints(region);
    for (lvl, extra) in extra_hints.iter().enumerate() {
        if lvl < hints.len() {
            hints[lvl].extend_from_slice(extra);
        }
    }
    let st = RefCell::new(EngineState {
        panels: 0,
        max_panels,
        exhausted: false,
    });
    let (value, error_estimate) =
        integrate_levels(f, region, 0, [0.0; 3], rel, abs, &hints, &st);
    let exhausted = st.borrow().exhausted;
    if exhausted && error_estimate > abs.max(rel * value.abs()) {
        return Err(Error::NonConvergence {
            value,
            error_estimate,
        });
    }
    Ok(QuadResult {
        value,
        error_estimate,
    })
}

/// Polar/spherical integral of `f` over the ball `B(center, radius)`;
/// `r^{n-1} f` must be bounded (integrable point singularity at the center).
pub(crate) fn polar_ball_integral(
    f: &dyn Fn(&[f64]) -> f64,
    center: &[f64],
    radius: f64,
    rel: f64,
    abs: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    let n = center.len();
    let st = RefCell::new(EngineState {
        panels: 0,
        max_panels,
        exhausted: false,
    });
    let radial_abs = (abs / (4.0 * 2.0 * PI * radius.max(1.0))).max(1e-18);
    let (value, err) = match n {
        2 => {
            let g = |th: f64| {
                let (s, c) = th.sin_cos();
                let h = |r: f64| {
                    let x = [center[0] + r * c, center[1] + r * s];
                    r * f(&x)
                };
                adaptive_1d(&h, 0.0, radius, rel / 2.0, radial_abs, &[], &st).0
            };
            adaptive_1d(&g, 0.0, 2.0 * PI, rel, abs / 2.0, &[], &st)
        }
        3 => {
            let g = |th: f64| {
                let (st_, ct) = th.sin_cos();
                let h = |ph: f64| {
                    let (sp, cp) = ph.sin_cos();
                    let rr = |r: f64| {
                        let x = [
                            center[0] + r * st_ * cp,
                            center[1] + r * st_ * sp,
                            center[2] + r * ct,
                        ];
                        r * r * f(&x)
                    };
                    adaptive_1d(&rr, 0.0, radius, rel / 2.0, radial_abs / 4.0, &[], &st).0
                };
                st_ * adaptive_1d(&h, 0.0, 2.0 * PI, rel / 2.0, radial_abs, &[], &st).0
            };
            adaptive_1d(&g, 0.0, PI, rel, abs / 2.0, &[], &st)
        }
        d => {
            return Err(Error::InvalidInput(format!(
                "polar integration supports n ∈ {{2,3}}, got {d}"
            )))
        }
    };
    let exhausted = st.borrow().exhausted;
    if exhausted && err > abs.max(rel * value.abs()) {
        return Err(Error::NonConvergence {
            value,
            error_estimate: err,
        });
    }
    Ok(QuadResult {
        value,
        error_estimate: err + abs / 2.0,
    })
}

/// Integral over the unit sphere of directions: `∫_{S^{n-1}} g(u) dσ(u)`.
/// `g` receives a unit vector; polar-ray integrands (potentials of convex
/// domains around an interior point) are smooth here, with no section kinks.
pub(crate) fn sphere_integral(
    g: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    rel: f64,
    abs: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    let st = RefCell::new(EngineState {
        panels: 0,
        max_panels,
        exhausted: false,
    });
    let (value, err) = match dim {
        2 => {
            let h = |th: f64| {
                let (s, c) = th.sin_cos();
                g(&[c, s])
            };
            adaptive_1d(&h, 0.0, 2.0 * PI, rel, abs / 2.0, &[], &st)
        }
        3 => {
            let child_abs = (abs / (8.0 * PI)).max(1e-18);
            let h = |th: f64| {
                let (st_, ct) = th.sin_cos();
                let p = |ph: f64| {
                    let (sp, cp) = ph.sin_cos();
                    g(&[st_ * cp, st_ * sp, ct])
                };
                st_ * adaptive_1d(&p, 0.0, 2.0 * PI, rel / 2.0, child_abs, &[], &st).0
            };
            let (v, e) = adaptive_1d(&h, 0.0, PI, rel, abs / 2.0, &[], &st);
            (v, e + abs / 4.0 + rel / 2.0 * v.abs())
        }
        d => {
            return Err(Error::InvalidInput(format!(
                "sphere integral supports n ∈ {{2,3}}, got {d}"
            )))
        }
    };
    let exhausted = st.borrow().exhausted;
    if exhausted && err > abs.max(rel * value.abs()) {
        return Err(Error::NonConvergence {
            value,
            error_estimate: err,
        });
    }
    Ok(QuadResult {
        value,
        error_estimate: err,
    })
}

/// Plain 1-D adaptive integration (used for elliptic integrals, arc-length
/// oracles and boundary-parameter integrals).
pub(crate) fn integrate_1d(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel: f64,
    abs: f64,
    hints: &[f64],
) -> (f64, f64) {
    let st = RefCell::new(EngineState {
        panels: 0,
        max_panels: 200_000,
        exhausted: false,
    });
    adaptive_1d(g, a, b, rel, abs, hints, &st)
}

/// Integrate a (possibly singular-integrable) integrand over a domain.
///
/// Unbounded domains need `cfg.truncation_radius`; the tail estimate is the
/// caller's responsibility (see `potential::truncation_tail_bound`).
pub fn integrate(f: &Integrand, d: &DomainSpec, cfg: &QuadratureConfig) -> Result<QuadResult> {
    let mut region = Region::domain(d);
    if !d.is_bounded() {
        let radius = cfg
            .truncation_radius
            .ok_or_else(|| Error::InvalidInput("unbounded domain requires truncation_radius".into()))?;
        region = region.clipped(Ball::new(&vec![0.0; d.dim()], radius));
    }
    match &f.singularity {
        Singularity::None => integrate_region(
            &|x| f.eval(x),
            &region,
            cfg.rel_tol,
            cfg.abs_tol,
            cfg.max_subdivisions,
            &[],
        ),
        Singularity::Integrable(x0) => {
            if d.contains(x0) == Location::Inside {
                // split off a polar ball around the singular point
                let rs = 0.5 * d.distance_to_boundary(x0)?;
                let rs = match &region.clip_ball {
                    Some(ball) => {
                        let gap = ball.radius - crate::linalg::norm(&crate::linalg::sub(x0, &ball.center));
                        rs.min(0.5 * gap.max(0.0))
                    }
                    None => rs,
                };
                if rs <= 0.0 {
                    return Err(Error::InvalidInput(
                        "singular point too close to the truncation sphere".into(),
                    ));
                }
                let region = region.minus_ball(Ball::new(x0, rs));
                let outer = integrate_region(
                    &|x| f.eval(x),
                    &region,
                    cfg.rel_tol,
                    cfg.abs_tol / 2.0,
                    cfg.max_subdivisions,
                    &[],
                )?;
                let inner = polar_ball_integral(
                    &|x| f.eval(x),
                    x0,
                    rs,
                    cfg.rel_tol,
                    cfg.abs_tol / 2.0,
                    cfg.max_subdivisions,
                )?;
                Ok(QuadResult {
                    value: outer.value + inner.value,
                    error_estimate: outer.error_estimate + inner.error_estimate,
                })
            } else {
                integrate_region(
                    &|x| f.eval(x),
                    &region,
                    cfg.rel_tol,
                    cfg.abs_tol,
                    cfg.max_subdivisions,
                    &[x0.clone(), x0.clone(), x0.clone()][..d.dim()].to_vec().as_slice(),
                )
            }
        }
        Singularity::NonIntegrable(x0) => {
            if d.contains(x0) == Location::Outside {
                integrate_region(
                    &|x| f.eval(x),
                    &region,
                    cfg.rel_tol,
                    cfg.abs_tol,
                    cfg.max_subdivisions,
                    &[],
                )
            } else {
                Err(Error::InvalidInput(
                    "non-integrable singularity inside the domain requires integrate_with_excision".into(),
                ))
            }
        }
    }
}

/// Integrate over `D ∖ B(x0, r₀)` with `x0` interior; `r₀` comes from
/// `cfg.excision_radius` (validated against `dist(x0, ∂D)/2`) or defaults to
/// half the boundary distance.
pub fn integrate_with_excision(
    f: &Integrand,
    d: &DomainSpec,
    x0: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    if d.contains(x0) != Location::Inside {
        return Err(Error::NotInterior);
    }
    let dist = d.distance_to_boundary(x0)?;
    let r0 = match cfg.excision_radius {
        Some(r) => {
            if r > 0.5 * dist * (1.0 + 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "excision radius {r} exceeds dist(x0, ∂D)/2 = {}",
                    0.5 * dist
                )));
            }
            r
        }
        None => (0.5 * dist).min(1e6),
    };
    let mut region = Region::domain(d).minus_ball(Ball::new(x0, r0));
    if !d.is_bounded() {
        let radius = cfg
            .truncation_radius
            .ok_or_else(|| Error::InvalidInput("unbounded domain requires truncation_radius".into()))?;
        region = region.clipped(Ball::new(&vec![0.0; d.dim()], radius));
    }
    integrate_region(
        &|x| f.eval(x),
        &region,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_subdivisions,
        &[],
    )
}

/// Measure of `D ∩ B_ρ(0)` by clipped quadrature (relative 1e-7).
pub(crate) fn domain_ball_volume(d: &DomainSpec, rho: f64) -> Result<f64> {
    let region = Region::domain(d).clipped(Ball::new(&vec![0.0; d.dim()], rho));
    let r = integrate_region(&|_x| 1.0, &region, 1e-7, 1e-12, 2_000_000, &[])?;
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_value, Dimension};
    use approx::assert_relative_eq;

    fn cfg2() -> QuadratureConfig {
        QuadratureConfig::for_dim(2).with_abs_tol(1e-11)
    }

    #[test]
    fn area_of_unit_disk() {
        let d = DomainSpec::unit_disk();
        let r = integrate(&Integrand::smooth(|_| 1.0), &d, &cfg2()).unwrap();
        assert!((r.value - std::f64::consts::PI).abs() <= 1e-9, "{}", r.value);
    }

    #[test]
    fn area_of_ellipse() {
        let d = DomainSpec::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let r = integrate(&Integrand::smooth(|_| 1.0), &d, &cfg2()).unwrap();
        assert!((r.value - 2.0 * std::f64::consts::PI).abs() <= 1e-9);
    }

    #[test]
    fn kernel_over_unit_disk_at_center() {
        // radial closed form gives V(0) = 1/4
        let d = DomainSpec::unit_disk();
        let dim = Dimension::new(2).unwrap();
        let f = Integrand::singular_integrable(
            move |y: &[f64]| kernel_value(y, dim).unwrap_or(0.0),
            &[0.0, 0.0],
        );
        let r = integrate(&f, &d, &cfg2()).unwrap();
        assert!((r.value - 0.25).abs() <= 1e-9, "got {}", r.value);
        assert!((r.value - 0.25).abs() <= r.error_estimate.max(1e-12));
    }

    #[test]
    fn excision_examples() {
        let d = DomainSpec::unit_disk();
        // area difference with r₀ = 1/2 around the origin
        let cfg = QuadratureConfig {
            excision_radius: Some(0.5),
            ..cfg2()
        };
        let r = integrate_with_excision(&Integrand::smooth(|_| 1.0), &d, &[0.0, 0.0], &cfg).unwrap();
        assert!((r.value - 0.75 * std::f64::consts::PI).abs() <= 1e-9);

        // third kernel derivative at the center of the disk: exact zero by symmetry
        let dim = Dimension::new(2).unwrap();
        let alpha = crate::kernel::MultiIndex::new(&[3, 0]).unwrap();
        let dk = crate::kernel::KernelDerivative::new(&alpha, dim).unwrap();
        let x0 = [0.0, 0.0];
        let f = Integrand::singular_nonintegrable(
            move |y: &[f64]| dk.eval(&[x0[0] - y[0], x0[1] - y[1]]),
            &x0,
        );
        let r = integrate_with_excision(&f, &d, &x0, &cfg2()).unwrap();
        assert!(r.value.abs() <= 1e-7, "got {}", r.value);

        // ellipse minus off-center ball
        let e = DomainSpec::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let cfg = QuadratureConfig {
            excision_radius: Some(0.2),
            ..cfg2()
        };
        let r = integrate_with_excision(&Integrand::smooth(|_| 1.0), &e, &[1.0, 0.0], &cfg).unwrap();
        assert!((r.value - (2.0 - 0.04) * std::f64::consts::PI).abs() <= 1e-9);
    }

    #[test]
    fn nonintegrable_without_excision_rejected() {
        let d = DomainSpec::unit_disk();
        let f = Integrand::singular_nonintegrable(|_| 0.0, &[0.0, 0.0]);
        assert!(integrate(&f, &d, &cfg2()).is_err());
    }

    #[test]
    fn excision_radius_validated() {
        let d = DomainSpec::unit_disk();
        let cfg = QuadratureConfig {
            excision_radius: Some(0.6), // dist/2 = 0.35 at (0.3, 0)
            ..cfg2()
        };
        assert!(integrate_with_excision(&Integrand::smooth(|_| 1.0), &d, &[0.3, 0.0], &cfg).is_err());
    }

    /// 20-integrand corpus with closed forms: estimated error must bound the
    /// true error, and tightening rel_tol must not increase the true error.
    fn corpus() -> Vec<(&'static str, DomainSpec, Integrand<'static>, f64)> {
        use std::f64::consts::PI;
        let disk = DomainSpec::unit_disk();
        let ellipse = DomainSpec::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let ball = DomainSpec::unit_ball();
        let square = DomainSpec::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let d2 = Dimension::new(2).unwrap();
        let d3 = Dimension::new(3).unwrap();
        vec![
            ("disk:1", disk.clone(), Integrand::smooth(|_| 1.0), PI),
            ("ellipse:1", ellipse.clone(), Integrand::smooth(|_| 1.0), 2.0 * PI),
            ("ball:1", ball.clone(), Integrand::smooth(|_| 1.0), 4.0 * PI / 3.0),
            ("disk:x0^2", disk.clone(), Integrand::smooth(|x| x[0] * x[0]), PI / 4.0),
            ("disk:x1^2", disk.clone(), Integrand::smooth(|x| x[1] * x[1]), PI / 4.0),
            ("disk:r^2", disk.clone(), Integrand::smooth(|x| x[0] * x[0] + x[1] * x[1]), PI / 2.0),
            ("disk:x0^2x1^2", disk.clone(), Integrand::smooth(|x| x[0] * x[0] * x[1] * x[1]), PI / 24.0),
            ("square:1", square.clone(), Integrand::smooth(|_| 1.0), 4.0),
            ("square:x0^2", square.clone(), Integrand::smooth(|x| x[0] * x[0]), 4.0 / 3.0),
            (
                "square:exp",
                square.clone(),
                Integrand::smooth(|x: &[f64]| x[0].exp()),
                2.0 * (std::f64::consts::E - 1.0 / std::f64::consts::E),
            ),
            ("ellipse:x0^2", ellipse.clone(), Integrand::smooth(|x| x[0] * x[0]), 2.0 * PI),
            ("ball:x2^2", ball.clone(), Integrand::smooth(|x| x[2] * x[2]), 4.0 * PI / 15.0),
            ("ball:r^2", ball.clone(), Integrand::smooth(|x| x.iter().map(|v| v * v).sum()), 4.0 * PI / 5.0),
            (
                "disk:J@0",
                disk.clone(),
                Integrand::singular_integrable(move |y: &[f64]| kernel_value(y, d2).unwrap_or(0.0), &[0.0, 0.0]),
                0.25,
            ),
            (
                "disk:J@(2,0)",
                disk.clone(),
                Integrand::smooth(move |y: &[f64]| {
                    kernel_value(&[2.0 - y[0], -y[1]], d2).unwrap()
                }),
                -0.5 * 2.0f64.ln(),
            ),
            (
                "ball:J@0",
                ball.clone(),
                Integrand::singular_integrable(move |y: &[f64]| kernel_value(y, d3).unwrap_or(0.0), &[0.0, 0.0, 0.0]),
                0.5,
            ),
            (
                "ball:J@(0,0,2)",
                ball.clone(),
                Integrand::smooth(move |y: &[f64]| {
                    kernel_value(&[-y[0], -y[1], 2.0 - y[2]], d3).unwrap()
                }),
                1.0 / 6.0,
            ),
            (
                "halfplane:gauss",
                DomainSpec::half_space(&[0.0, -1.0], 0.0).unwrap(),
                Integrand::smooth(|x: &[f64]| (-x[0] * x[0] - x[1] * x[1]).exp()),
                PI / 2.0,
            ),
            ("disk:x0^4", disk.clone(), Integrand::smooth(|x| x[0].powi(4)), PI / 8.0),
            (
                "disk:cos",
                disk,
                Integrand::smooth(|x: &[f64]| (x[0] + x[1]).cos()),
                // rotation invariance: ∫_disk cos(x₀+x₁) = ∫_{-1}^{1} cos(√2 u) 2√(1-u²) du,
                // evaluated by the 1-D Simpson oracle below
                cos_diag_disk_oracle(),
            ),
        ]
    }

    /// Independent 1-D oracle for ∫_disk cos(x₀+x₁): composite Simpson on a
    /// fine grid of the radially reduced integrand.
    fn cos_diag_disk_oracle() -> f64 {
        let g = |u: f64| (2.0f64.sqrt() * u).cos() * 2.0 * (1.0 - u * u).max(0.0).sqrt();
        let m = 2_000_000;
        let h = 2.0 / m as f64;
        let mut acc = 0.0;
        for j in 0..m {
            let u0 = -1.0 + j as f64 * h;
            acc += h / 6.0 * (g(u0) + 4.0 * g(u0 + 0.5 * h) + g(u0 + h));
        }
        acc
    }

    #[test]
    fn corpus_error_estimates_bound_true_error() {
        for (name, d, f, exact) in corpus() {
            let mut cfg = QuadratureConfig::for_dim(d.dim()).with_abs_tol(1e-11);
            if !d.is_bounded() {
                // Gaussian integrand: tail beyond r = 6 is ~e^{-36}
                cfg = cfg.with_truncation(6.0);
            }
            let r = integrate(&f, &d, &cfg).unwrap();
            let true_err = (r.value - exact).abs();
            assert!(
                true_err <= r.error_estimate.max(1e-12),
                "{name}: true err {true_err:e} > estimate {:e}",
                r.error_estimate
            );
            assert!(
                true_err <= cfg.rel_tol * exact.abs() + cfg.abs_tol + 1e-12,
                "{name}: true err {true_err:e} above tolerance"
            );
        }
    }

    #[test]
    fn halving_tolerance_never_hurts() {
        for (name, d, f, exact) in corpus() {
            let mut loose = QuadratureConfig::for_dim(d.dim());
            loose.rel_tol = 1e-5;
            loose.abs_tol = 1e-8;
            let mut tight = loose.clone();
            tight.rel_tol /= 2.0;
            tight.abs_tol /= 2.0;
            if !d.is_bounded() {
                loose = loose.with_truncation(6.0);
                tight = tight.with_truncation(6.0);
            }
            let e_loose = (integrate(&f, &d, &loose).unwrap().value - exact).abs();
            let e_tight = (integrate(&f, &d, &tight).unwrap().value - exact).abs();
            // tightening must not degrade the error beyond the tight tolerance
            let floor = tight.rel_tol * exact.abs() + tight.abs_tol;
            assert!(
                e_tight <= e_loose.max(floor) + 1e-14 * exact.abs().max(1.0),
                "{name}: tight {e_tight:e} > loose {e_loose:e}"
            );
        }
    }

    #[test]
    fn refinement_concentrates_near_singularity() {
        use std::cell::Cell;
        let d = DomainSpec::unit_disk();
        let dim = Dimension::new(2).unwrap();
        let near_02 = Cell::new(0usize);
        let near_005 = Cell::new(0usize);
        let total = Cell::new(0usize);
        let x0 = [0.3, 0.2];
        {
            let f = Integrand::singular_integrable(
                |y: &[f64]| {
                    total.set(total.get() + 1);
                    let r = ((y[0] - 0.3f64).powi(2) + (y[1] - 0.2f64).powi(2)).sqrt();
                    if r < 0.2 {
                        near_02.set(near_02.get() + 1);
                    }
                    if r < 0.05 {
                        near_005.set(near_005.get() + 1);
                    }
                    kernel_value(&[0.3 - y[0], 0.2 - y[1]], dim).unwrap_or(0.0)
                },
                &x0,
            );
            integrate(&f, &d, &cfg2()).unwrap();
        }
        // evaluation density (count/area) must grow toward the singular point
        let density_02 = near_02.get() as f64 / (0.2f64 * 0.2);
        let density_005 = near_005.get() as f64 / (0.05f64 * 0.05);
        let density_all = total.get() as f64 / 1.0;
        assert!(
            density_005 > 2.0 * density_02 && density_005 > 5.0 * density_all,
            "densities: all {density_all:.0}, 0.2 {density_02:.0}, 0.05 {density_005:.0}"
        );
    }

    #[test]
    fn budget_exhaustion_reports_nonconvergence_with_value() {
        let d = DomainSpec::unit_disk();
        let cfg = QuadratureConfig {
            rel_tol: 1e-14,
            abs_tol: 1e-16,
            max_subdivisions: 8,
            truncation_radius: None,
            excision_radius: None,
        };
        // oscillatory integrand so 8 panels cannot possibly converge
        let f = Integrand::smooth(|x: &[f64]| (40.0 * x[0]).sin() * (33.0 * x[1]).cos() + 1.0);
        match integrate(&f, &d, &cfg) {
            Err(Error::NonConvergence { value, error_estimate }) => {
                assert!(value.is_finite());
                assert!(error_estimate > 0.0);
                // best value still lands in the right ballpark of π
                assert!((value - std::f64::consts::PI).abs() < 1.0);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn determinism_bitwise() {
        let d = DomainSpec::ellipsoid(&[0.1, -0.2], &[1.5, 0.7]).unwrap();
        let f1 = Integrand::smooth(|x: &[f64]| (x[0] * 3.0).sin() + x[1] * x[1]);
        let f2 = Integrand::smooth(|x: &[f64]| (x[0] * 3.0).sin() + x[1] * x[1]);
        let a = integrate(&f1, &d, &cfg2()).unwrap();
        let b = integrate(&f2, &d, &cfg2()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.error_estimate.to_bits(), b.error_estimate.to_bits());
    }

    #[test]
    fn truncated_halfplane_area() {
        // {x₂ > 0} ∩ B_2(0) = half the disk of radius 2
        let hs = DomainSpec::half_space(&[0.0, -1.0], 0.0).unwrap();
        let cfg = cfg2().with_truncation(2.0);
        let r = integrate(&Integrand::smooth(|_| 1.0), &hs, &cfg).unwrap();
        assert_relative_eq!(r.value, 2.0 * std::f64::consts::PI, epsilon = 1e-8);
    }

    #[test]
    fn strip_in_ball_volume() {
        // {|x₂| < 1} ∩ B_3: 2 ∫₀¹ 2 √(9 - y²) dy
        let strip = DomainSpec::strip(&[0.0, 1.0], -1.0, 1.0).unwrap();
        let exact = 2.0 * (8.0f64.sqrt() + 9.0 * (1.0f64 / 3.0).asin());
        let v = strip.volume_in_ball(3.0).unwrap();
        assert_relative_eq!(v, exact, max_relative = 1e-6);
    }

    #[test]
    fn whole_space_ball_volume() {
        let ws = DomainSpec::whole_space(2).unwrap();
        assert_relative_eq!(
            ws.volume_in_ball(2.0).unwrap(),
            4.0 * std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn paraboloid_volume_against_monte_carlo() {
        // D = {x₂ > x₁²} ∩ B_4, Monte-Carlo oracle with 10⁷ seeded samples
        use rand::{Rng, SeedableRng};
        let d = DomainSpec::paraboloid(&[1.0], 1, 0.0).unwrap();
        let v = d.volume_in_ball(4.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xbeef);
        let (n, mut hits) = (10_000_000u64, 0u64);
        for _ in 0..n {
            let x = rng.gen::<f64>() * 8.0 - 4.0;
            let y = rng.gen::<f64>() * 8.0 - 4.0;
            if x * x + y * y < 16.0 && y > x * x {
                hits += 1;
            }
        }
        let mc = 64.0 * hits as f64 / n as f64;
        // 3 significant digits
        assert!((v - mc).abs() / mc < 1e-3, "quad {v} vs mc {mc}");
    }
}
