//! Periodic unit cells built from phase geometries and materials.
//!
//! A lattice is an ordered list of phases painted onto the unit cell: phase 0
//! is the matrix (full cell), later shapes override earlier ones where they
//! overlap. All geometry lives in cell-normalized coordinates `ς ∈ [0,1)²`;
//! the physical cell is `a1 × a2` (orthogonal, rectangular). Painter order
//! plus the "nested or disjoint" rule below is enough for coated inclusions
//! without constructive-solid-geometry machinery.
//!
//! Overlapping shapes must be nested or disjoint (a laminar family). The
//! constructor verifies this analytically where it can and rejects the rest,
//! so the exact filling fractions and chord bookkeeping stay exact.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Coordinate axis of the 2D cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X1 => Axis::X2,
            Axis::X2 => Axis::X1,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X1 => write!(f, "x1"),
            Axis::X2 => write!(f, "x2"),
        }
    }
}

/// Isotropic phase constants: shear modulus (Pa) and density (kg/m^3).
///
/// `mu = 0` is allowed (solid/air composites) as long as some phase keeps a
/// positive modulus; `rho` must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub mu: f64,
    pub rho: f64,
}

impl Material {
    pub fn new(mu: f64, rho: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidMaterial(format!(
                "shear modulus must be finite and nonnegative, got {mu}"
            )));
        }
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::InvalidMaterial(format!(
                "density must be finite and positive, got {rho}"
            )));
        }
        Ok(Material { mu, rho })
    }
}

/// Inclusion geometry in cell-normalized coordinates.
///
/// Each shape must fit within one periodic copy of the cell (no self-overlap
/// across images); centers may sit anywhere in `[0,1)` and shapes may wrap
/// around the cell boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// The whole cell; only valid for the matrix phase.
    FullCell,
    /// Axis-aligned square of side `side`.
    AxisSquare { side: f64, center: [f64; 2] },
    /// Square of side `side` rotated by 45 degrees; equivalently the L1 ball
    /// of radius `side / sqrt(2)`.
    RotatedSquare45 { side: f64, center: [f64; 2] },
    Circle { radius: f64, center: [f64; 2] },
    /// Ring between `inner` and `outer` radii.
    Annulus { inner: f64, outer: f64, center: [f64; 2] },
    /// Layer normal to `axis`: occupies `|ς_axis - center| <= width/2` and
    /// spans the full cell along the other axis. Realizes 1D laminates.
    Slab { axis: Axis, width: f64, center: f64 },
}

const GEOM_EPS: f64 = 1e-12;

fn wrap_delta(d: f64) -> f64 {
    d - d.round()
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        match *self {
            Shape::FullCell => Ok(()),
            Shape::AxisSquare { side, .. } => {
                if !(0.0..=1.0).contains(&side) {
                    return bad(format!("axis square side {side} outside [0, 1]"));
                }
                Ok(())
            }
            Shape::RotatedSquare45 { side, .. } => {
                let max = std::f64::consts::SQRT_2 / 2.0;
                if !(0.0..=max + GEOM_EPS).contains(&side) {
                    return bad(format!(
                        "rotated square side {side} exceeds sqrt(2)/2; it would overlap periodic images"
                    ));
                }
                Ok(())
            }
            Shape::Circle { radius, .. } => {
                if !(0.0..=0.5).contains(&radius) {
                    return bad(format!("circle radius {radius} outside [0, 1/2]"));
                }
                Ok(())
            }
            Shape::Annulus { inner, outer, .. } => {
                if !(0.0..=0.5).contains(&outer) || inner < 0.0 || inner >= outer {
                    return bad(format!(
                        "annulus radii ({inner}, {outer}) must satisfy 0 <= inner < outer <= 1/2"
                    ));
                }
                Ok(())
            }
            Shape::Slab { width, .. } => {
                if !(0.0..=1.0).contains(&width) {
                    return bad(format!("slab width {width} outside [0, 1]"));
                }
                Ok(())
            }
        }
    }

    /// Cell-normalized area (filling fraction of the raw shape).
    pub fn area(&self) -> f64 {
        match *self {
            Shape::FullCell => 1.0,
            Shape::AxisSquare { side, .. } | Shape::RotatedSquare45 { side, .. } => side * side,
            Shape::Circle { radius, .. } => PI * radius * radius,
            Shape::Annulus { inner, outer, .. } => PI * (outer * outer - inner * inner),
            Shape::Slab { width, .. } => width,
        }
    }

    /// Closed-set point membership with periodic wrapping.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Shape::FullCell => true,
            Shape::AxisSquare { side, center } => {
                let dx = wrap_delta(p[0] - center[0]).abs();
                let dy = wrap_delta(p[1] - center[1]).abs();
                dx <= side / 2.0 && dy <= side / 2.0
            }
            Shape::RotatedSquare45 { side, center } => {
                let dx = wrap_delta(p[0] - center[0]).abs();
                let dy = wrap_delta(p[1] - center[1]).abs();
                dx + dy <= side / std::f64::consts::SQRT_2
            }
            Shape::Circle { radius, center } => {
                let dx = wrap_delta(p[0] - center[0]);
                let dy = wrap_delta(p[1] - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
            Shape::Annulus { inner, outer, center } => {
                let dx = wrap_delta(p[0] - center[0]);
                let dy = wrap_delta(p[1] - center[1]);
                let r2 = dx * dx + dy * dy;
                r2 >= inner * inner && r2 <= outer * outer
            }
            Shape::Slab { axis, width, center } => {
                wrap_delta(p[axis.index()] - center).abs() <= width / 2.0
            }
        }
    }

    /// Intervals (unwrapped, along `axis`) covered by the shape on the line
    /// where the other coordinate is `coord`. At most two intervals.
    pub fn chord(&self, axis: Axis, coord: f64) -> Vec<(f64, f64)> {
        let run = axis.index();
        let fix = axis.other().index();
        match *self {
            Shape::FullCell => vec![(0.0, 1.0)],
            Shape::AxisSquare { side, center } => {
                if side == 0.0 {
                    return vec![];
                }
                let d = wrap_delta(coord - center[fix]).abs();
                if d > side / 2.0 {
                    vec![]
                } else {
                    vec![(center[run] - side / 2.0, center[run] + side / 2.0)]
                }
            }
            Shape::RotatedSquare45 { side, center } => {
                if side == 0.0 {
                    return vec![];
                }
                let h = side / std::f64::consts::SQRT_2;
                let d = wrap_delta(coord - center[fix]).abs();
                if d >= h {
                    vec![]
                } else {
                    vec![(center[run] - (h - d), center[run] + (h - d))]
                }
            }
            Shape::Circle { radius, center } => {
                if radius == 0.0 {
                    return vec![];
                }
                let d = wrap_delta(coord - center[fix]).abs();
                if d >= radius {
                    vec![]
                } else {
                    let half = (radius * radius - d * d).sqrt();
                    vec![(center[run] - half, center[run] + half)]
                }
            }
            Shape::Annulus { inner, outer, center } => {
                let out = Shape::Circle { radius: outer, center }.chord(axis, coord);
                let inn = Shape::Circle { radius: inner, center }.chord(axis, coord);
                match (out.first(), inn.first()) {
                    (None, _) => vec![],
                    (Some(&o), None) => vec![o],
                    (Some(&(a, b)), Some(&(p, q))) => vec![(a, p), (q, b)],
                }
            }
            Shape::Slab { axis: ax, width, center } => {
                if width == 0.0 {
                    return vec![];
                }
                if ax == axis {
                    vec![(center - width / 2.0, center + width / 2.0)]
                } else if wrap_delta(coord - center).abs() <= width / 2.0 {
                    vec![(0.0, 1.0)]
                } else {
                    vec![]
                }
            }
        }
    }

    /// Kink coordinates of the chord functions as the *other* coordinate
    /// varies along `outer_axis`; returns (breakpoints, singular subset).
    /// Circular tangency points are singular (square-root kinks).
    fn outer_breakpoints(&self, outer_axis: Axis) -> (Vec<f64>, Vec<f64>) {
        let fix = outer_axis.index();
        let wrap = |x: f64| x - x.floor();
        match *self {
            Shape::FullCell => (vec![], vec![]),
            Shape::AxisSquare { side, center } => {
                if side == 0.0 {
                    return (vec![], vec![]);
                }
                let c = center[fix];
                (vec![wrap(c - side / 2.0), wrap(c + side / 2.0)], vec![])
            }
            Shape::RotatedSquare45 { side, center } => {
                if side == 0.0 {
                    return (vec![], vec![]);
                }
                let h = side / std::f64::consts::SQRT_2;
                let c = center[fix];
                (vec![wrap(c - h), wrap(c), wrap(c + h)], vec![])
            }
            Shape::Circle { radius, center } => {
                if radius == 0.0 {
                    return (vec![], vec![]);
                }
                let c = center[fix];
                let pts = vec![wrap(c - radius), wrap(c + radius)];
                (pts.clone(), pts)
            }
            Shape::Annulus { inner, outer, center } => {
                let c = center[fix];
                let mut pts = vec![wrap(c - outer), wrap(c + outer)];
                if inner > 0.0 {
                    pts.push(wrap(c - inner));
                    pts.push(wrap(c + inner));
                }
                (pts.clone(), pts)
            }
            Shape::Slab { axis, width, center } => {
                if width == 0.0 || axis == outer_axis {
                    // varies along the slab axis only
                    if axis.index() == fix && width > 0.0 {
                        return (
                            vec![wrap(center - width / 2.0), wrap(center + width / 2.0)],
                            vec![],
                        );
                    }
                    (vec![], vec![])
                } else {
                    (vec![], vec![])
                }
            }
        }
    }
}

/// Pairwise arrangement of two shapes. `Partial` (or unprovable) overlap is
/// rejected by the lattice constructor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relation {
    Disjoint,
    /// Second shape inside the first.
    Contains,
    /// First shape inside the second.
    Inside,
    Partial,
}

/// Toroidal interval relation helper: intervals given as (center, half-width).
fn interval_relation(c1: f64, h1: f64, c2: f64, h2: f64) -> Relation {
    let d = wrap_delta(c2 - c1).abs();
    if d >= h1 + h2 - GEOM_EPS {
        Relation::Disjoint
    } else if d + h2 <= h1 + GEOM_EPS {
        Relation::Contains
    } else if d + h1 <= h2 + GEOM_EPS {
        Relation::Inside
    } else {
        Relation::Partial
    }
}

fn combine_axes(r1: Relation, r2: Relation) -> Relation {
    use Relation::*;
    match (r1, r2) {
        (Disjoint, _) | (_, Disjoint) => Disjoint,
        (Contains, Contains) => Contains,
        (Inside, Inside) => Inside,
        _ => Partial,
    }
}

/// Minimal toroidal distance from a point offset to an axis box of half
/// widths (h1, h2) centered at the origin.
fn point_box_distance(d: [f64; 2], h: [f64; 2]) -> f64 {
    let dx = (wrap_delta(d[0]).abs() - h[0]).max(0.0);
    let dy = (wrap_delta(d[1]).abs() - h[1]).max(0.0);
    (dx * dx + dy * dy).sqrt()
}

fn euclid(d: [f64; 2]) -> f64 {
    let dx = wrap_delta(d[0]);
    let dy = wrap_delta(d[1]);
    (dx * dx + dy * dy).sqrt()
}

fn l1(d: [f64; 2]) -> f64 {
    wrap_delta(d[0]).abs() + wrap_delta(d[1]).abs()
}

fn shape_relation(a: &Shape, b: &Shape) -> Relation {
    use Relation::*;
    use Shape::*;
    if a.area() == 0.0 || b.area() == 0.0 {
        return Disjoint;
    }
    match (*a, *b) {
        (FullCell, _) => Contains,
        (_, FullCell) => Inside,
        (AxisSquare { side: s1, center: c1 }, AxisSquare { side: s2, center: c2 }) => combine_axes(
            interval_relation(c1[0], s1 / 2.0, c2[0], s2 / 2.0),
            interval_relation(c1[1], s1 / 2.0, c2[1], s2 / 2.0),
        ),
        (Slab { axis: ax1, width: w1, center: cc1 }, Slab { axis: ax2, width: w2, center: cc2 }) => {
            if ax1 == ax2 {
                interval_relation(cc1, w1 / 2.0, cc2, w2 / 2.0)
            } else {
                Partial
            }
        }
        (Slab { axis, width, center }, AxisSquare { side, center: cb }) => {
            match interval_relation(center, width / 2.0, cb[axis.index()], side / 2.0) {
                Disjoint => Disjoint,
                Contains => Contains,
                _ => Partial,
            }
        }
        (AxisSquare { side, center: cb }, Slab { axis, width, center }) => {
            match interval_relation(center, width / 2.0, cb[axis.index()], side / 2.0) {
                Disjoint => Disjoint,
                Contains => Inside,
                _ => Partial,
            }
        }
        (Circle { radius: r1, center: c1 }, Circle { radius: r2, center: c2 }) => {
            let d = euclid([c2[0] - c1[0], c2[1] - c1[1]]);
            if d >= r1 + r2 - GEOM_EPS {
                Disjoint
            } else if d + r2 <= r1 + GEOM_EPS {
                Contains
            } else if d + r1 <= r2 + GEOM_EPS {
                Inside
            } else {
                Partial
            }
        }
        (Annulus { inner, outer, center: c1 }, Circle { radius, center: c2 }) => {
            let d = euclid([c2[0] - c1[0], c2[1] - c1[1]]);
            if d + radius <= inner + GEOM_EPS || d >= outer + radius - GEOM_EPS {
                Disjoint // inside the hole or outside the ring
            } else if d + radius <= outer + GEOM_EPS && d - radius >= inner - GEOM_EPS {
                Contains
            } else {
                Partial
            }
        }
        (Circle { radius, center: c1 }, Annulus { outer, center: c2, .. }) => {
            let d = euclid([c2[0] - c1[0], c2[1] - c1[1]]);
            if d >= radius + outer - GEOM_EPS {
                Disjoint
            } else if d + outer <= radius + GEOM_EPS {
                Contains
            } else {
                Partial
            }
        }
        (Annulus { inner: i1, outer: o1, center: c1 }, Annulus { inner: i2, outer: o2, center: c2 }) => {
            let d = euclid([c2[0] - c1[0], c2[1] - c1[1]]);
            if d >= o1 + o2 - GEOM_EPS || d + o2 <= i1 + GEOM_EPS {
                Disjoint
            } else if d < GEOM_EPS && i2 >= i1 - GEOM_EPS && o2 <= o1 + GEOM_EPS {
                Contains
            } else if d < GEOM_EPS && i1 >= i2 - GEOM_EPS && o1 <= o2 + GEOM_EPS {
                Inside
            } else {
                Partial
            }
        }
        (RotatedSquare45 { side: s1, center: c1 }, RotatedSquare45 { side: s2, center: c2 }) => {
            let (h1, h2) = (s1 / std::f64::consts::SQRT_2, s2 / std::f64::consts::SQRT_2);
            let d = l1([c2[0] - c1[0], c2[1] - c1[1]]);
            if d >= h1 + h2 - GEOM_EPS {
                Disjoint
            } else if d + h2 <= h1 + GEOM_EPS {
                Contains
            } else if d + h1 <= h2 + GEOM_EPS {
                Inside
            } else {
                Partial
            }
        }
        (AxisSquare { side, center: cb }, Circle { radius, center: cc }) => {
            let h = side / 2.0;
            let off = [cc[0] - cb[0], cc[1] - cb[1]];
            if wrap_delta(off[0]).abs() + radius <= h + GEOM_EPS
                && wrap_delta(off[1]).abs() + radius <= h + GEOM_EPS
            {
                Contains
            } else if point_box_distance(off, [h, h]) >= radius - GEOM_EPS {
                Disjoint
            } else if corners(cb, h).iter().all(|p| euclid([p[0] - cc[0], p[1] - cc[1]]) <= radius + GEOM_EPS) {
                Inside
            } else {
                Partial
            }
        }
        (Circle { radius, center: cc }, AxisSquare { side, center: cb }) => {
            flip(shape_relation(
                &AxisSquare { side, center: cb },
                &Circle { radius, center: cc },
            ))
        }
        (AxisSquare { side, center: cb }, Annulus { inner, outer, center: cc }) => {
            let h = side / 2.0;
            let off = [cc[0] - cb[0], cc[1] - cb[1]];
            // annulus inside box iff its outer disk is
            if wrap_delta(off[0]).abs() + outer <= h + GEOM_EPS
                && wrap_delta(off[1]).abs() + outer <= h + GEOM_EPS
            {
                Contains
            } else if point_box_distance(off, [h, h]) >= outer - GEOM_EPS {
                Disjoint
            } else {
                // box fully in the hole counts as disjoint
                let in_hole = corners(cb, h)
                    .iter()
                    .all(|p| euclid([p[0] - cc[0], p[1] - cc[1]]) <= inner + GEOM_EPS);
                if in_hole {
                    Disjoint
                } else {
                    let in_ring = corners(cb, h).iter().all(|p| {
                        let d = euclid([p[0] - cc[0], p[1] - cc[1]]);
                        d <= outer + GEOM_EPS && d >= inner - GEOM_EPS
                    }) && point_box_distance(off, [h, h]) >= inner - GEOM_EPS;
                    if in_ring {
                        Inside
                    } else {
                        Partial
                    }
                }
            }
        }
        (Annulus { inner, outer, center }, AxisSquare { side, center: cb }) => flip(shape_relation(
            &AxisSquare { side, center: cb },
            &Annulus { inner, outer, center },
        )),
        (RotatedSquare45 { side, center: cr }, Circle { radius, center: cc }) => {
            let h = side / std::f64::consts::SQRT_2;
            let d1 = l1([cc[0] - cr[0], cc[1] - cr[1]]);
            let de = euclid([cc[0] - cr[0], cc[1] - cr[1]]);
            if d1 + radius * std::f64::consts::SQRT_2 <= h + GEOM_EPS {
                Contains
            } else if de >= h + radius - GEOM_EPS {
                Disjoint
            } else if diamond_corners(cr, h)
                .iter()
                .all(|p| euclid([p[0] - cc[0], p[1] - cc[1]]) <= radius + GEOM_EPS)
            {
                Inside
            } else {
                Partial
            }
        }
        (Circle { radius, center: cc }, RotatedSquare45 { side, center: cr }) => {
            flip(shape_relation(
                &RotatedSquare45 { side, center: cr },
                &Circle { radius, center: cc },
            ))
        }
        (RotatedSquare45 { side: sr, center: cr }, AxisSquare { side: sb, center: cb }) => {
            let h = sr / std::f64::consts::SQRT_2;
            if corners(cb, sb / 2.0).iter().all(|p| l1([p[0] - cr[0], p[1] - cr[1]]) <= h + GEOM_EPS) {
                Contains
            } else if diamond_corners(cr, h).iter().all(|p| {
                wrap_delta(p[0] - cb[0]).abs() <= sb / 2.0 + GEOM_EPS
                    && wrap_delta(p[1] - cb[1]).abs() <= sb / 2.0 + GEOM_EPS
            }) {
                Inside
            } else if euclid([cb[0] - cr[0], cb[1] - cr[1]])
                >= h + sb * std::f64::consts::SQRT_2 / 2.0 - GEOM_EPS
            {
                Disjoint
            } else {
                Partial
            }
        }
        (AxisSquare { side: sb, center: cb }, RotatedSquare45 { side: sr, center: cr }) => {
            flip(shape_relation(
                &RotatedSquare45 { side: sr, center: cr },
                &AxisSquare { side: sb, center: cb },
            ))
        }
        // remaining slab/round combinations: prove disjoint via extents, else reject
        (Slab { axis, width, center }, other) | (other, Slab { axis, width, center }) => {
            let (oc, oh) = match other {
                Circle { radius, center } => (center[axis.index()], radius),
                Annulus { outer, center, .. } => (center[axis.index()], outer),
                RotatedSquare45 { side, center } => {
                    (center[axis.index()], side / std::f64::consts::SQRT_2)
                }
                _ => unreachable!(),
            };
            match interval_relation(center, width / 2.0, oc, oh) {
                Disjoint => Disjoint,
                Contains => {
                    if matches!(a, Slab { .. }) {
                        Contains
                    } else {
                        Inside
                    }
                }
                _ => Partial,
            }
        }
    }
}

fn flip(r: Relation) -> Relation {
    match r {
        Relation::Contains => Relation::Inside,
        Relation::Inside => Relation::Contains,
        other => other,
    }
}

fn corners(c: [f64; 2], h: f64) -> [[f64; 2]; 4] {
    [
        [c[0] - h, c[1] - h],
        [c[0] - h, c[1] + h],
        [c[0] + h, c[1] - h],
        [c[0] + h, c[1] + h],
    ]
}

fn diamond_corners(c: [f64; 2], h: f64) -> [[f64; 2]; 4] {
    [
        [c[0] - h, c[1]],
        [c[0] + h, c[1]],
        [c[0], c[1] - h],
        [c[0], c[1] + h],
    ]
}

/// One painted phase: material plus the region it occupies.
#[derive(Debug, Clone)]
pub struct Phase {
    pub material: Material,
    pub shape: Shape,
}

/// Which pointwise quantity a line average integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageKind {
    Mu,
    InvMu,
}

/// Exact cell moments of the coefficient fields.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub mu_mean: f64,
    pub mu_sq_mean: f64,
    pub rho_mean: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Moments {
    /// Midpoint of the modulus range, the reference shift of Eq.-style
    /// series schemes.
    pub fn mu_mid(&self) -> f64 {
        0.5 * (self.mu_max + self.mu_min)
    }

    pub fn variance(&self) -> f64 {
        self.mu_sq_mean - self.mu_mean * self.mu_mean
    }
}

/// A periodic two-dimensional cell of painted phases.
#[derive(Debug, Clone)]
pub struct Lattice {
    a1: f64,
    a2: f64,
    phases: Vec<Phase>,
    /// Innermost earlier phase containing each shape (0 = matrix).
    parents: Vec<usize>,
    fractions: Vec<f64>,
}

impl Lattice {
    /// Validates materials, shape dimensions, and the nested-or-disjoint
    /// painter structure, then precomputes exact filling fractions.
    pub fn new(a1: f64, a2: f64, phases: Vec<Phase>) -> Result<Self> {
        if !(a1.is_finite() && a1 > 0.0 && a2.is_finite() && a2 > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "cell lengths must be positive, got ({a1}, {a2})"
            )));
        }
        if phases.is_empty() {
            return Err(Error::InvalidGeometry("lattice needs at least one phase".into()));
        }
        if phases[0].shape != Shape::FullCell {
            return Err(Error::InvalidGeometry(
                "phase 0 must be the matrix (full-cell shape)".into(),
            ));
        }
        for (i, p) in phases.iter().enumerate() {
            Material::new(p.material.mu, p.material.rho)?;
            p.shape.validate()?;
            if i > 0 && p.shape == Shape::FullCell {
                return Err(Error::InvalidGeometry(
                    "only the matrix phase may use the full-cell shape".into(),
                ));
            }
        }

        let n = phases.len();
        let mut rel = vec![vec![Relation::Disjoint; n]; n];
        for i in 1..n {
            for k in (i + 1)..n {
                let r = shape_relation(&phases[i].shape, &phases[k].shape);
                if r == Relation::Partial {
                    return Err(Error::InvalidGeometry(format!(
                        "phases {i} and {k} overlap partially (or unprovably); \
                         painted shapes must be nested or disjoint"
                    )));
                }
                rel[i][k] = r;
                rel[k][i] = flip(r);
            }
        }

        // innermost earlier container of each shape
        let mut parents = vec![0usize; n];
        for i in 1..n {
            let mut best = 0usize;
            for k in 1..i {
                if rel[k][i] == Relation::Contains
                    && (best == 0 || rel[best][k] == Relation::Contains)
                {
                    best = k;
                }
            }
            parents[i] = best;
        }

        // painted area = own area minus directly covering children
        let mut fractions: Vec<f64> = phases.iter().map(|p| p.shape.area()).collect();
        for i in 1..n {
            // a later shape containing an earlier one erases it entirely
            for k in (i + 1)..n {
                if rel[k][i] == Relation::Contains {
                    fractions[i] = 0.0;
                }
            }
        }
        for i in (1..n).rev() {
            if fractions[i] > 0.0 {
                fractions[parents[i]] -= phases[i].shape.area();
            }
        }
        for (i, f) in fractions.iter().enumerate() {
            if *f < -1e-12 {
                return Err(Error::InvalidGeometry(format!(
                    "phase {i} ends up with negative filling fraction {f}"
                )));
            }
        }
        let fractions: Vec<f64> = fractions.iter().map(|f| f.max(0.0)).collect();

        if !phases
            .iter()
            .zip(&fractions)
            .any(|(p, &f)| f > 0.0 && p.material.mu > 0.0)
        {
            return Err(Error::InvalidMaterial(
                "maximum shear modulus over the cell must be positive".into(),
            ));
        }

        Ok(Lattice { a1, a2, phases, parents, fractions })
    }

    /// Square unit cell shortcut.
    pub fn square_cell(phases: Vec<Phase>) -> Result<Self> {
        Lattice::new(1.0, 1.0, phases)
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Painter parent of each phase (innermost earlier shape containing it).
    pub fn parent_of(&self, phase: usize) -> usize {
        self.parents[phase]
    }

    /// Index of the phase visible at the normalized point; later shapes
    /// override earlier ones, boundary points belong to the shapes (closed).
    pub fn phase_at(&self, p: [f64; 2]) -> usize {
        let mut hit = 0;
        for (i, ph) in self.phases.iter().enumerate().skip(1) {
            if ph.shape.contains(p) {
                hit = i;
            }
        }
        hit
    }

    /// Exact per-phase filling fractions; they sum to 1.
    pub fn filling_fractions(&self) -> &[f64] {
        &self.fractions
    }

    /// Exact area-weighted moments. Phases with zero painted area do not
    /// contribute to the modulus range.
    pub fn moments(&self) -> Moments {
        let mut mu_mean = 0.0;
        let mut mu_sq = 0.0;
        let mut rho = 0.0;
        let mut mu_min = f64::INFINITY;
        let mut mu_max = 0.0f64;
        for (p, &f) in self.phases.iter().zip(&self.fractions) {
            mu_mean += f * p.material.mu;
            mu_sq += f * p.material.mu * p.material.mu;
            rho += f * p.material.rho;
            if f > 0.0 {
                mu_min = mu_min.min(p.material.mu);
                mu_max = mu_max.max(p.material.mu);
            }
        }
        Moments { mu_mean, mu_sq_mean: mu_sq, rho_mean: rho, mu_min, mu_max }
    }

    /// Painted segments `(length, phase)` covering the line along `axis`
    /// with the other coordinate fixed at `coord`. Lengths sum to 1.
    pub fn line_segments(&self, axis: Axis, coord: f64) -> Vec<(f64, usize)> {
        let mut cuts = vec![0.0, 1.0];
        for ph in self.phases.iter().skip(1) {
            for (a, b) in ph.shape.chord(axis, coord) {
                cuts.push(a - a.floor());
                cuts.push(b - b.floor());
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut segs = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len < 1e-14 {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let point = match axis {
                Axis::X1 => [mid, coord],
                Axis::X2 => [coord, mid],
            };
            segs.push((len, self.phase_at(point)));
        }
        segs
    }

    /// Per-phase covered length of the line (the indicator line fractions
    /// entering the piecewise monodromy formula).
    pub fn line_fractions(&self, axis: Axis, coord: f64) -> Vec<f64> {
        let mut fr = vec![0.0; self.phases.len()];
        for (len, ph) in self.line_segments(axis, coord) {
            fr[ph] += len;
        }
        fr
    }

    /// Exact 1D average of `mu` or `1/mu` along the line. A zero-modulus
    /// segment makes the harmonic average degenerate and is reported as an
    /// error; callers realizing the insulating limit map it to 0.
    pub fn line_average(&self, axis: Axis, coord: f64, kind: AverageKind) -> Result<f64> {
        let segs = self.line_segments(axis, coord);
        match kind {
            AverageKind::Mu => Ok(segs
                .iter()
                .map(|&(len, ph)| len * self.phases[ph].material.mu)
                .sum()),
            AverageKind::InvMu => {
                let mut acc = 0.0;
                for &(len, ph) in &segs {
                    let mu = self.phases[ph].material.mu;
                    if mu == 0.0 {
                        return Err(Error::ZeroModulusLine { axis, coord });
                    }
                    acc += len / mu;
                }
                Ok(1.0 / acc)
            }
        }
    }

    /// Breakpoints of the inner-line averages as functions of the outer
    /// coordinate: (all kinks, square-root-singular subset). `outer_axis`
    /// is the coordinate being integrated over by the caller.
    pub fn outer_breakpoints(&self, outer_axis: Axis) -> (Vec<f64>, Vec<f64>) {
        let mut pts = Vec::new();
        let mut sing = Vec::new();
        for ph in self.phases.iter().skip(1) {
            let (p, s) = ph.shape.outer_breakpoints(outer_axis);
            pts.extend(p);
            sing.extend(s);
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        (pts, sing)
    }
}

/// Uniformly sampled coefficient fields over the cell, for graded media and
/// DFT cross-checks. Sample `(i1, i2)` sits at `ς = (i1/m, i2/m)`.
#[derive(Debug, Clone)]
pub struct SampledField {
    m: usize,
    mu: Vec<f64>,
    rho: Vec<f64>,
}

impl SampledField {
    pub fn new(m: usize, mu: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidGeometry(format!("need at least 2 samples per axis, got {m}")));
        }
        if mu.len() != m * m || rho.len() != m * m {
            return Err(Error::InvalidGeometry(format!(
                "sample buffers must hold {} values",
                m * m
            )));
        }
        for &v in &mu {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidMaterial(format!("sampled mu must be >= 0, got {v}")));
            }
        }
        for &v in &rho {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidMaterial(format!("sampled rho must be > 0, got {v}")));
            }
        }
        Ok(SampledField { m, mu, rho })
    }

    pub fn from_fn<F: Fn([f64; 2]) -> (f64, f64)>(m: usize, f: F) -> Result<Self> {
        let mut mu = Vec::with_capacity(m * m);
        let mut rho = Vec::with_capacity(m * m);
        for i1 in 0..m {
            for i2 in 0..m {
                let (a, b) = f([i1 as f64 / m as f64, i2 as f64 / m as f64]);
                mu.push(a);
                rho.push(b);
            }
        }
        SampledField::new(m, mu, rho)
    }

    /// Pointwise sampling of a piecewise lattice ( Gibbs-limited for
    /// discontinuous coefficients; see the fourier module ).
    pub fn from_lattice(lat: &Lattice, m: usize) -> Result<Self> {
        SampledField::from_fn(m, |p| {
            let mat = &lat.phases()[lat.phase_at(p)].material;
            (mat.mu, mat.rho)
        })
    }

    pub fn samples_per_axis(&self) -> usize {
        self.m
    }

    pub fn mu_at(&self, i1: usize, i2: usize) -> f64 {
        self.mu[i1 * self.m + i2]
    }

    pub fn rho_at(&self, i1: usize, i2: usize) -> f64 {
        self.rho[i1 * self.m + i2]
    }

    pub fn mu_samples(&self) -> &[f64] {
        &self.mu
    }

    /// Sample means (the periodic trapezoid rule).
    pub fn moments(&self) -> Moments {
        let n = (self.m * self.m) as f64;
        let mu_mean = self.mu.iter().sum::<f64>() / n;
        let mu_sq = self.mu.iter().map(|v| v * v).sum::<f64>() / n;
        let rho = self.rho.iter().sum::<f64>() / n;
        let mu_min = self.mu.iter().cloned().fold(f64::INFINITY, f64::min);
        let mu_max = self.mu.iter().cloned().fold(0.0f64, f64::max);
        Moments { mu_mean, mu_sq_mean: mu_sq, rho_mean: rho, mu_min, mu_max }
    }

    fn bilinear_mu(&self, p: [f64; 2]) -> f64 {
        let m = self.m as f64;
        let x = (p[0] - p[0].floor()) * m;
        let y = (p[1] - p[1].floor()) * m;
        let (i, j) = (x.floor() as usize % self.m, y.floor() as usize % self.m);
        let (fx, fy) = (x - x.floor(), y - y.floor());
        let (i1, j1) = ((i + 1) % self.m, (j + 1) % self.m);
        let v00 = self.mu_at(i, j);
        let v01 = self.mu_at(i, j1);
        let v10 = self.mu_at(i1, j);
        let v11 = self.mu_at(i1, j1);
        v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
    }

    /// Line average of the bilinear interpolant, integrated per sample
    /// interval (subdivision at the sample points).
    pub fn line_average(&self, axis: Axis, coord: f64, kind: AverageKind) -> Result<f64> {
        let (gx, gw) = crate::quadrature::gauss_legendre(4);
        let m = self.m;
        let mut acc = 0.0;
        for i in 0..m {
            let (lo, hi) = (i as f64 / m as f64, (i + 1) as f64 / m as f64);
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for (x, w) in gx.iter().zip(&gw) {
                let t = mid + half * x;
                let p = match axis {
                    Axis::X1 => [t, coord],
                    Axis::X2 => [coord, t],
                };
                let mu = self.bilinear_mu(p);
                match kind {
                    AverageKind::Mu => acc += half * w * mu,
                    AverageKind::InvMu => {
                        if mu == 0.0 {
                            return Err(Error::ZeroModulusLine { axis, coord });
                        }
                        acc += half * w / mu;
                    }
                }
            }
        }
        match kind {
            AverageKind::Mu => Ok(acc),
            AverageKind::InvMu => Ok(1.0 / acc),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const GPA: f64 = 1e9;

    fn st() -> Material {
        Material { mu: 80.0 * GPA, rho: 7800.0 }
    }

    fn ep() -> Material {
        Material { mu: 1.48 * GPA, rho: 1140.0 }
    }

    fn matrix(m: Material) -> Phase {
        Phase { material: m, shape: Shape::FullCell }
    }

    fn square_lattice(m: Material, inc: Material, side: f64) -> Lattice {
        Lattice::square_cell(vec![
            matrix(m),
            Phase { material: inc, shape: Shape::AxisSquare { side, center: [0.5, 0.5] } },
        ])
        .unwrap()
    }

    #[test]
    fn phase_at_homogeneous_and_center() {
        let hom = Lattice::square_cell(vec![matrix(st())]).unwrap();
        assert_eq!(hom.phase_at([0.3, 0.9]), 0);

        let lat = square_lattice(ep(), st(), 0.5);
        assert_eq!(lat.phase_at([0.5, 0.5]), 1);
        assert_eq!(lat.phase_at([0.1, 0.1]), 0);
    }

    #[test]
    fn phase_at_annulus_point() {
        let lat = Lattice::square_cell(vec![
            matrix(st()),
            Phase {
                material: ep(),
                shape: Shape::Annulus { inner: 0.2, outer: 0.3, center: [0.5, 0.5] },
            },
        ])
        .unwrap();
        // distance 0.25 from the center lies in the ring
        assert_eq!(lat.phase_at([0.5, 0.75]), 1);
        assert_eq!(lat.phase_at([0.5, 0.6]), 0); // in the hole
    }

    #[test]
    fn phase_at_is_periodic() {
        let lat = square_lattice(st(), ep(), 0.4);
        for p in [[0.37, 0.78], [0.5, 0.5], [0.05, 0.91]] {
            let q = [p[0] + 3.0, p[1] - 2.0];
            let qw = [q[0] - q[0].floor(), q[1] - q[1].floor()];
            assert_eq!(lat.phase_at(p), lat.phase_at(qw));
        }
    }

    #[test]
    fn filling_fractions_square_and_circle() {
        let lat = square_lattice(st(), ep(), 0.5);
        assert_abs_diff_eq!(lat.filling_fractions()[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(lat.filling_fractions()[1], 0.25, epsilon = 1e-15);

        let lat = Lattice::square_cell(vec![
            matrix(st()),
            Phase { material: ep(), shape: Shape::Circle { radius: 0.25, center: [0.5, 0.5] } },
        ])
        .unwrap();
        assert_relative_eq!(lat.filling_fractions()[1], PI / 16.0, max_relative = 1e-15);
        let total: f64 = lat.filling_fractions().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coated_annulus_fractions() {
        // skin = alpha*f ring, core = (1-alpha)*f disk with alpha = 4/9
        let f = 0.45;
        let alpha = 4.0 / 9.0;
        let r2 = (f / PI).sqrt();
        let r1 = ((1.0 - alpha) * f / PI).sqrt();
        let lat = Lattice::square_cell(vec![
            matrix(ep()),
            Phase { material: st(), shape: Shape::Annulus { inner: r1, outer: r2, center: [0.5, 0.5] } },
            Phase { material: ep(), shape: Shape::Circle { radius: r1, center: [0.5, 0.5] } },
        ])
        .unwrap();
        let fr = lat.filling_fractions();
        assert_relative_eq!(fr[0], 1.0 - f, max_relative = 1e-13);
        assert_relative_eq!(fr[1], alpha * f, max_relative = 1e-13);
        assert_relative_eq!(fr[2], (1.0 - alpha) * f, max_relative = 1e-13);
    }

    #[test]
    fn coated_square_fractions_use_painter_order() {
        let s2 = 0.6;
        let s1 = 0.4;
        let lat = Lattice::square_cell(vec![
            matrix(st()),
            Phase { material: ep(), shape: Shape::AxisSquare { side: s2, center: [0.5, 0.5] } },
            Phase { material: st(), shape: Shape::AxisSquare { side: s1, center: [0.5, 0.5] } },
        ])
        .unwrap();
        let fr = lat.filling_fractions();
        assert_relative_eq!(fr[1], s2 * s2 - s1 * s1, max_relative = 1e-14);
        assert_relative_eq!(fr[2], s1 * s1, max_relative = 1e-14);
        assert_eq!(lat.parent_of(2), 1);
    }

    #[test]
    fn partial_overlap_is_rejected() {
        let err = Lattice::square_cell(vec![
            matrix(st()),
            Phase { material: ep(), shape: Shape::AxisSquare { side: 0.4, center: [0.4, 0.4] } },
            Phase { material: ep(), shape: Shape::AxisSquare { side: 0.4, center: [0.6, 0.6] } },
        ]);
        assert!(matches!(err, Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn cell_moments_al_pb() {
        let al = Material { mu: 26.0 * GPA, rho: 2700.0 };
        let pb = Material { mu: 14.9 * GPA, rho: 11600.0 };
        let lat = square_lattice(al, pb, 0.5f64.sqrt());
        let m = lat.moments();
        assert_relative_eq!(m.rho_mean, 7150.0, max_relative = 1e-12);
        assert_relative_eq!(m.mu_mean, 20.45 * GPA, max_relative = 1e-12);
    }

    #[test]
    fn homogeneous_variance_vanishes() {
        let lat = Lattice::square_cell(vec![matrix(st())]).unwrap();
        assert_abs_diff_eq!(lat.moments().variance(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn two_phase_variance_identity() {
        // f1 f2 (mu1 - mu2)^2 for St/Ep at f = 0.5
        let lat = square_lattice(st(), ep(), 0.5f64.sqrt());
        let m = lat.moments();
        let expect = 0.25 * (78.52 * GPA) * (78.52 * GPA);
        assert_relative_eq!(m.variance(), expect, max_relative = 1e-10);
    }

    #[test]
    fn zero_area_phase_does_not_affect_modulus_range() {
        let lat = square_lattice(st(), ep(), 0.0);
        let m = lat.moments();
        assert_eq!(m.mu_min, 80.0 * GPA);
        assert_eq!(m.mu_max, 80.0 * GPA);
    }

    #[test]
    fn line_average_through_square_center() {
        // St square (side 0.5) in Ep: the center line is half in each phase
        let lat = square_lattice(ep(), st(), 0.5);
        let arith = lat.line_average(Axis::X1, 0.5, AverageKind::Mu).unwrap();
        assert_relative_eq!(arith, 40.74 * GPA, max_relative = 1e-13);
        let harm = lat.line_average(Axis::X1, 0.5, AverageKind::InvMu).unwrap();
        assert_relative_eq!(harm, 2.9062346588119787 * GPA, max_relative = 1e-13);
    }

    #[test]
    fn line_average_homogeneous() {
        let lat = Lattice::square_cell(vec![matrix(st())]).unwrap();
        for coord in [0.0, 0.31, 0.99] {
            let v = lat.line_average(Axis::X2, coord, AverageKind::Mu).unwrap();
            assert_relative_eq!(v, 80.0 * GPA, max_relative = 1e-15);
        }
    }

    #[test]
    fn line_average_bounded_by_extremes() {
        let lat = Lattice::square_cell(vec![
            matrix(st()),
            Phase { material: ep(), shape: Shape::Circle { radius: 0.3, center: [0.4, 0.6] } },
        ])
        .unwrap();
        let m = lat.moments();
        for i in 0..40 {
            let c = i as f64 / 40.0;
            let v = lat.line_average(Axis::X1, c, AverageKind::Mu).unwrap();
            assert!(v >= m.mu_min - 1e-6 && v <= m.mu_max + 1e-6);
        }
    }

    #[test]
    fn zero_modulus_line_errors() {
        let air = Material { mu: 0.0, rho: 1.2 };
        let lat = square_lattice(st(), air, 0.5);
        let err = lat.line_average(Axis::X1, 0.5, AverageKind::InvMu);
        assert!(matches!(err, Err(Error::ZeroModulusLine { .. })));
        // a line missing the inclusion is fine
        assert!(lat.line_average(Axis::X1, 0.1, AverageKind::InvMu).is_ok());
    }

    #[test]
    fn integrated_line_average_recovers_cell_mean() {
        // interface-aligned graded panels integrate the chord kinks of the
        // circle to quadrature accuracy
        let lat = Lattice::square_cell(vec![
            matrix(st()),
            Phase { material: ep(), shape: Shape::Circle { radius: 0.3, center: [0.5, 0.5] } },
        ])
        .unwrap();
        let m = lat.moments();
        let (pts, sing) = lat.outer_breakpoints(Axis::X2);
        let rule = crate::quadrature::PanelRule::default();
        let val = rule.integrate(&pts, &sing, |t| {
            lat.line_average(Axis::X1, t, AverageKind::Mu).unwrap()
        });
        assert_relative_eq!(val, m.mu_mean, max_relative = 1e-10);
    }

    #[test]
    fn rotated_square_chord_matches_membership() {
        let lat = Lattice::square_cell(vec![
            matrix(st()),
            Phase { material: ep(), shape: Shape::RotatedSquare45 { side: 0.5, center: [0.5, 0.5] } },
        ])
        .unwrap();
        for coord in [0.23, 0.5, 0.61, 0.82] {
            let fr = lat.line_fractions(Axis::X1, coord)[1];
            let mut count = 0usize;
            let n = 20000;
            for i in 0..n {
                let p = [(i as f64 + 0.5) / n as f64, coord];
                if lat.phase_at(p) == 1 {
                    count += 1;
                }
            }
            assert_abs_diff_eq!(fr, count as f64 / n as f64, epsilon = 2e-4);
        }
    }

    #[test]
    fn sampled_field_constant_moments() {
        let f = SampledField::from_fn(16, |_| (3.0, 2.0)).unwrap();
        let m = f.moments();
        assert_relative_eq!(m.mu_mean, 3.0);
        assert_relative_eq!(m.rho_mean, 2.0);
        assert_relative_eq!(
            f.line_average(Axis::X1, 0.37, AverageKind::Mu).unwrap(),
            3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn slab_makes_a_laminate() {
        let lat = Lattice::square_cell(vec![
            matrix(st()),
            Phase { material: ep(), shape: Shape::Slab { axis: Axis::X2, width: 0.5, center: 0.5 } },
        ])
        .unwrap();
        assert_abs_diff_eq!(lat.filling_fractions()[1], 0.5, epsilon = 1e-15);
        // lines along x1 are single-phase
        assert_relative_eq!(
            lat.line_average(Axis::X1, 0.5, AverageKind::Mu).unwrap(),
            1.48 * GPA,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            lat.line_average(Axis::X1, 0.05, AverageKind::Mu).unwrap(),
            80.0 * GPA,
            max_relative = 1e-15
        );
        // lines along x2 mix the layers
        assert_relative_eq!(
            lat.line_average(Axis::X2, 0.3, AverageKind::Mu).unwrap(),
            40.74 * GPA,
            max_relative = 1e-13
        );
    }
}
