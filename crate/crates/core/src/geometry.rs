//! Planar geometry primitives: points, boxes, polylines and polygons.
//!
//! All distances are Euclidean in the coordinate plane. Geographic inputs are
//! expected to be pre-scaled (see [`crate::pn::PnSpace::meters_per_unit`]).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Point2D, f: f64) -> Point2D {
        Point2D::new(
            self.x + (other.x - self.x) * f,
            self.y + (other.y - self.y) * f,
        )
    }
}

impl From<(f64, f64)> for Point2D {
    fn from((x, y): (f64, f64)) -> Self {
        Point2D::new(x, y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point2D,
    pub max: Point2D,
}

impl BoundingBox {
    pub fn new(min: Point2D, max: Point2D) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point2D>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut bb = BoundingBox::new(first, first);
        for p in it {
            bb.expand(p);
        }
        Some(bb)
    }

    pub fn expand(&mut self, p: &Point2D) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        let mut out = *self;
        out.expand(&other.min);
        out.expand(&other.max);
        out
    }

    pub fn contains(&self, p: &Point2D) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: &Point2D, a: &Point2D, b: &Point2D) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point2D::new(a.x + t * dx, a.y + t * dy))
}

fn orient(a: &Point2D, b: &Point2D, c: &Point2D) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: &Point2D, b: &Point2D, p: &Point2D) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Whether closed segments `p1`–`p2` and `q1`–`q2` share at least one point.
pub fn segments_intersect(p1: &Point2D, p2: &Point2D, q1: &Point2D, q2: &Point2D) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Minimum distance between two closed segments.
pub fn segment_segment_distance(p1: &Point2D, p2: &Point2D, q1: &Point2D, q2: &Point2D) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<Point2D>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point2D>) -> Self {
        Self { vertices }
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Point2D, &Point2D)> {
        self.vertices.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn length(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    pub fn distance(&self, p: &Point2D) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn start(&self) -> Point2D {
        self.vertices[0]
    }

    pub fn end(&self) -> Point2D {
        *self.vertices.last().expect("polyline has vertices")
    }

    /// Point at arc-length fraction `f` in `[0, 1]` from the start.
    pub fn point_at_fraction(&self, f: f64) -> Point2D {
        let total = self.length();
        let target = f.clamp(0.0, 1.0) * total;
        let mut walked = 0.0;
        for (a, b) in self.edges() {
            let len = a.distance(b);
            if walked + len >= target && len > 0.0 {
                return a.lerp(b, (target - walked) / len);
            }
            walked += len;
        }
        self.end()
    }

    pub fn reversed(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline::new(v)
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_points(&self.vertices).expect("polyline has vertices")
    }

    pub fn distance_to_polyline(&self, other: &Polyline) -> f64 {
        let mut best = f64::INFINITY;
        for (a, b) in self.edges() {
            for (c, d) in other.edges() {
                best = best.min(segment_segment_distance(a, b, c, d));
            }
        }
        best
    }
}

/// A polygon given by an exterior ring followed by optional hole rings.
///
/// Rings are stored open (the closing vertex is not repeated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub rings: Vec<Vec<Point2D>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<Point2D>>) -> Self {
        let rings = rings
            .into_iter()
            .map(|mut r| {
                if r.len() > 1 && r.first() == r.last() {
                    r.pop();
                }
                r
            })
            .collect();
        Self { rings }
    }

    pub fn from_exterior(ring: Vec<Point2D>) -> Self {
        Self::new(vec![ring])
    }

    /// Axis-aligned square of side `side` centred at `c`.
    pub fn square(c: Point2D, side: f64) -> Self {
        let h = side / 2.0;
        Self::from_exterior(vec![
            Point2D::new(c.x - h, c.y - h),
            Point2D::new(c.x + h, c.y - h),
            Point2D::new(c.x + h, c.y + h),
            Point2D::new(c.x - h, c.y + h),
        ])
    }

    pub fn exterior(&self) -> &[Point2D] {
        &self.rings[0]
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Point2D, &Point2D)> {
        self.rings.iter().flat_map(|r| {
            (0..r.len()).map(move |i| (&r[i], &r[(i + 1) % r.len()]))
        })
    }

    /// Even-odd containment over all rings. Boundary points may land on
    /// either side; [`Polygon::distance`] reports 0 for them regardless.
    pub fn contains(&self, p: &Point2D) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: &Point2D) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// 0 inside or on the boundary, otherwise the distance to the boundary.
    pub fn distance(&self, p: &Point2D) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.boundary_distance(p)
        }
    }

    fn ring_signed_area(ring: &[Point2D]) -> f64 {
        let n = ring.len();
        (0..n)
            .map(|i| {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    pub fn area(&self) -> f64 {
        let mut iter = self.rings.iter();
        let outer = iter.next().map(|r| Self::ring_signed_area(r).abs()).unwrap_or(0.0);
        outer - iter.map(|r| Self::ring_signed_area(r).abs()).sum::<f64>()
    }

    /// Area centroid (holes subtract).
    pub fn centroid(&self) -> Point2D {
        let mut ax = 0.0;
        let mut ay = 0.0;
        let mut total = 0.0;
        for (k, ring) in self.rings.iter().enumerate() {
            let signed = Self::ring_signed_area(ring);
            // orient every ring so the exterior adds and holes subtract
            let sign = if (k == 0) == (signed >= 0.0) { 1.0 } else { -1.0 };
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                let cross = a.x * b.y - b.x * a.y;
                ax += sign * (a.x + b.x) * cross;
                ay += sign * (a.y + b.y) * cross;
            }
            total += sign * signed;
        }
        if total.abs() < f64::MIN_POSITIVE {
            let ext = self.exterior();
            let n = ext.len() as f64;
            return Point2D::new(
                ext.iter().map(|p| p.x).sum::<f64>() / n,
                ext.iter().map(|p| p.y).sum::<f64>() / n,
            );
        }
        Point2D::new(ax / (6.0 * total), ay / (6.0 * total))
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_points(self.exterior()).expect("polygon has vertices")
    }

    /// Checks that every ring has at least three vertices, the polygon has
    /// positive area, and no two non-adjacent edges touch.
    pub fn validate(&self) -> Result<(), String> {
        if self.rings.is_empty() {
            return Err("polygon has no rings".into());
        }
        for ring in &self.rings {
            if ring.len() < 3 {
                return Err("ring has fewer than 3 vertices".into());
            }
            if ring.iter().any(|p| !p.is_finite()) {
                return Err("non-finite coordinate".into());
            }
        }
        if !(self.area() > 0.0) {
            return Err("polygon has zero area".into());
        }
        let edges: Vec<(usize, usize, Point2D, Point2D)> = self
            .rings
            .iter()
            .enumerate()
            .flat_map(|(r, ring)| {
                (0..ring.len()).map(move |i| (r, i, ring[i], ring[(i + 1) % ring.len()]))
            })
            .collect();
        for (x, &(ra, ia, a1, a2)) in edges.iter().enumerate() {
            if a1 == a2 {
                return Err("repeated vertex".into());
            }
            for &(rb, ib, b1, b2) in &edges[x + 1..] {
                if ra == rb {
                    let n = self.rings[ra].len();
                    let adjacent = (ia + 1) % n == ib || (ib + 1) % n == ia;
                    if adjacent {
                        // adjacent edges may only share their common vertex
                        let shared = if (ia + 1) % n == ib { a2 } else { a1 };
                        let (p, q) = if (ia + 1) % n == ib { (a1, b2) } else { (a2, b1) };
                        let dot = (p.x - shared.x) * (q.x - shared.x)
                            + (p.y - shared.y) * (q.y - shared.y);
                        if n > 3 && orient(&p, &shared, &q) == 0.0 && dot > 0.0 {
                            return Err("ring folds back on itself".into());
                        }
                        continue;
                    }
                }
                if segments_intersect(&a1, &a2, &b1, &b2) {
                    return Err("polygon is self-intersecting".into());
                }
            }
        }
        Ok(())
    }
}
