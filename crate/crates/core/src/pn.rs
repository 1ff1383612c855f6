//! The polygon-network (PN) space: polygons and road segments indexed for
//! nearest-entity queries.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use rstar::{PointDistance, RTree, RTreeObject, AABB};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Point2D, Polygon, Polyline};

/// Stable entity identifier.
///
/// Ordering is "natural": runs of digits compare numerically, so `S2 < S10`
/// and `3 < 7 < 10`. This order drives every deterministic tie-break.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(s: impl Into<String>) -> Self {
        EntityId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(s)
    }
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut ai, mut bi) = (a.as_bytes(), b.as_bytes());
    loop {
        match (ai.first(), bi.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let na = ai.iter().take_while(|c| c.is_ascii_digit()).count();
                let nb = bi.iter().take_while(|c| c.is_ascii_digit()).count();
                let da = trim_zeros(&ai[..na]);
                let db = trim_zeros(&bi[..nb]);
                let ord = da.len().cmp(&db.len()).then_with(|| da.cmp(db));
                if ord != Ordering::Equal {
                    return ord;
                }
                ai = &ai[na..];
                bi = &bi[nb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                ai = &ai[1..];
                bi = &bi[1..];
            }
        }
    }
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let k = d.iter().take_while(|&&c| c == b'0').count();
    &d[k..]
}

impl Ord for EntityId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for EntityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Polygon,
    Segment,
}

impl EntityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::Polygon => "polygon",
            EntityKind::Segment => "segment",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "polygon" | "a" => Ok(EntityKind::Polygon),
            "segment" | "road" | "polyline" | "linestring" | "l" => Ok(EntityKind::Segment),
            other => Err(Error::Parse(format!("unknown entity kind `{other}`"))),
        }
    }
}

/// Entity geometry. Polygon entities may be composites of several parts
/// (produced by polygon aggregation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Polygon(Vec<Polygon>),
    Polyline(Polyline),
}

impl Geometry {
    pub fn distance(&self, p: &Point2D) -> f64 {
        match self {
            Geometry::Polygon(parts) => {
                let mut best = f64::INFINITY;
                for part in parts {
                    best = best.min(part.distance(p));
                    if best == 0.0 {
                        break;
                    }
                }
                best
            }
            Geometry::Polyline(line) => line.distance(p),
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        match self {
            Geometry::Polygon(parts) => parts
                .iter()
                .map(Polygon::bbox)
                .reduce(|a, b| a.union(&b))
                .expect("polygon entity has parts"),
            Geometry::Polyline(line) => line.bbox(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub geometry: Geometry,
    /// Nonnegative weight used by weight-constrained activity spaces.
    pub weight: f64,
    /// Original ids folded into this entity by polygon aggregation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<EntityId>,
}

impl Entity {
    pub fn polygon(id: impl Into<EntityId>, polygon: Polygon) -> Self {
        Self {
            id: id.into(),
            geometry: Geometry::Polygon(vec![polygon]),
            weight: 1.0,
            members: Vec::new(),
        }
    }

    pub fn segment(id: impl Into<EntityId>, line: Polyline) -> Self {
        Self {
            id: id.into(),
            geometry: Geometry::Polyline(line),
            weight: 1.0,
            members: Vec::new(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn kind(&self) -> EntityKind {
        match self.geometry {
            Geometry::Polygon(_) => EntityKind::Polygon,
            Geometry::Polyline(_) => EntityKind::Segment,
        }
    }

    pub fn as_polyline(&self) -> Option<&Polyline> {
        match &self.geometry {
            Geometry::Polyline(l) => Some(l),
            Geometry::Polygon(_) => None,
        }
    }

    pub fn polygons(&self) -> &[Polygon] {
        match &self.geometry {
            Geometry::Polygon(parts) => parts,
            Geometry::Polyline(_) => &[],
        }
    }

    /// Area centroid over all polygon parts, or the arc-length midpoint of a
    /// polyline.
    pub fn centroid(&self) -> Point2D {
        match &self.geometry {
            Geometry::Polygon(parts) => {
                let total: f64 = parts.iter().map(Polygon::area).sum();
                let (mut x, mut y) = (0.0, 0.0);
                for part in parts {
                    let c = part.centroid();
                    let a = part.area();
                    x += c.x * a;
                    y += c.y * a;
                }
                Point2D::new(x / total, y / total)
            }
            Geometry::Polyline(line) => line.point_at_fraction(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::geometry(&self.id.0, "weight must be finite and nonnegative"));
        }
        match &self.geometry {
            Geometry::Polygon(parts) => {
                if parts.is_empty() {
                    return Err(Error::geometry(&self.id.0, "no polygon parts"));
                }
                for part in parts {
                    part.validate().map_err(|r| Error::geometry(&self.id.0, r))?;
                }
            }
            Geometry::Polyline(line) => {
                if line.vertices.len() < 2 {
                    return Err(Error::geometry(&self.id.0, "polyline needs at least 2 vertices"));
                }
                if line.vertices.iter().any(|p| !p.is_finite()) {
                    return Err(Error::geometry(&self.id.0, "non-finite coordinate"));
                }
                if line.edges().any(|(a, b)| a == b) {
                    return Err(Error::geometry(&self.id.0, "zero-length segment"));
                }
            }
        }
        Ok(())
    }
}

/// Distance from `p` to an entity: 0 inside a polygon or on a polyline.
pub fn distance_point_to_entity(p: &Point2D, e: &Entity) -> f64 {
    e.geometry.distance(p)
}

struct IndexedGeometry {
    ix: usize,
    geometry: Geometry,
    envelope: AABB<[f64; 2]>,
}

impl RTreeObject for IndexedGeometry {
    type Envelope = AABB<[f64; 2]>;

    fn envelope(&self) -> Self::Envelope {
        self.envelope
    }
}

impl PointDistance for IndexedGeometry {
    fn distance_2(&self, point: &[f64; 2]) -> f64 {
        let d = self.geometry.distance(&Point2D::new(point[0], point[1]));
        d * d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    /// Position of the entity in [`PnSpace::entities`].
    pub ix: usize,
    pub distance: f64,
}

/// The indexed collection of entities `E = A ∪ L`.
///
/// Entities are kept sorted by id, so an entity's index doubles as its rank
/// in the tie-break order. Immutable after construction.
pub struct PnSpace {
    entities: Vec<Entity>,
    by_id: HashMap<EntityId, usize>,
    tree: RTree<IndexedGeometry>,
    meters_per_unit: f64,
}

impl fmt::Debug for PnSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PnSpace")
            .field("entities", &self.entities.len())
            .field("meters_per_unit", &self.meters_per_unit)
            .finish()
    }
}

impl PnSpace {
    pub fn new(mut entities: Vec<Entity>, meters_per_unit: f64) -> Result<Self> {
        if entities.is_empty() {
            return Err(Error::EmptySpace);
        }
        if !(meters_per_unit > 0.0 && meters_per_unit.is_finite()) {
            return Err(Error::param("meters_per_unit", "must be positive"));
        }
        for e in &entities {
            e.validate()?;
        }
        entities.sort_by(|a, b| a.id.cmp(&b.id));
        for w in entities.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateId(w[0].id.0.clone()));
            }
        }
        let by_id = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
        let items = entities
            .iter()
            .enumerate()
            .map(|(ix, e)| {
                let bb = e.geometry.bbox();
                IndexedGeometry {
                    ix,
                    geometry: e.geometry.clone(),
                    envelope: AABB::from_corners([bb.min.x, bb.min.y], [bb.max.x, bb.max.y]),
                }
            })
            .collect();
        Ok(Self {
            entities,
            by_id,
            tree: RTree::bulk_load(items),
            meters_per_unit,
        })
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, ix: usize) -> &Entity {
        &self.entities[ix]
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn index_of(&self, id: &EntityId) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn meters_per_unit(&self) -> f64 {
        self.meters_per_unit
    }

    pub fn meters_to_units(&self, meters: f64) -> f64 {
        meters / self.meters_per_unit
    }

    pub fn distance(&self, p: &Point2D, ix: usize) -> f64 {
        self.entities[ix].geometry.distance(p)
    }

    pub fn bbox(&self) -> BoundingBox {
        self.entities
            .iter()
            .map(|e| e.geometry.bbox())
            .reduce(|a, b| a.union(&b))
            .expect("nonempty")
    }

    /// The `k` nearest entities ordered by (distance, id).
    fn nearest_k(&self, p: &Point2D, k: usize) -> Vec<Nearest> {
        let mut found: Vec<(usize, f64)> = Vec::with_capacity(k + 2);
        let mut kth_d2 = f64::INFINITY;
        for (item, d2) in self.tree.nearest_neighbor_iter_with_distance_2([p.x, p.y]) {
            // squared distances can collide after rounding; keep going a hair
            // past the k-th so exact distances settle the order
            if found.len() >= k && d2 > kth_d2 * (1.0 + 1e-9) + f64::MIN_POSITIVE {
                break;
            }
            found.push((item.ix, d2));
            if found.len() == k {
                kth_d2 = d2;
            }
        }
        let mut out: Vec<Nearest> = found
            .into_iter()
            .map(|(ix, _)| Nearest {
                ix,
                distance: self.distance(p, ix),
            })
            .collect();
        out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.ix.cmp(&b.ix)));
        out.truncate(k);
        out
    }

    /// Nearest entity; ties go to the smallest id.
    pub fn nearest(&self, p: &Point2D) -> Nearest {
        self.nearest_k(p, 1)[0]
    }

    /// Nearest entity together with its [`voronoi_margin`](Self::voronoi_margin),
    /// from a single index query.
    pub fn nearest_with_margin(&self, p: &Point2D) -> (Nearest, f64) {
        let two = self.nearest_k(p, 2);
        let margin = match two.get(1) {
            Some(second) => (second.distance - two[0].distance) / 2.0,
            None => f64::INFINITY,
        };
        (two[0], margin)
    }

    /// Half the gap between the nearest and second-nearest entity distances:
    /// a lower bound on the distance from `p` to the assignment boundary.
    pub fn voronoi_margin(&self, p: &Point2D) -> f64 {
        let two = self.nearest_k(p, 2);
        if two.len() < 2 {
            return f64::INFINITY;
        }
        (two[1].distance - two[0].distance) / 2.0
    }
}

/// Upper bound `min(1, exp(-margin² / 2σ²))` on the probability that an
/// isotropic Gaussian error of scale `sigma` moves a point across a boundary
/// at distance `margin`.
pub fn misclassification_bound(margin: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    if margin.is_nan() || margin < 0.0 {
        return Err(Error::param("margin", "must be nonnegative"));
    }
    Ok((-(margin * margin) / (2.0 * sigma * sigma)).exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(id: &str, x: f64, y: f64) -> Entity {
        // tiny segment standing in for a point site
        Entity::segment(
            id,
            Polyline::new(vec![Point2D::new(x, y), Point2D::new(x, y + 1e-12)]),
        )
    }

    #[test]
    fn natural_order() {
        let mut ids: Vec<EntityId> = ["S10", "S2", "P1", "10", "3", "7", "a02", "a1"]
            .iter()
            .map(|s| EntityId::from(*s))
            .collect();
        ids.sort();
        let got: Vec<&str> = ids.iter().map(|i| i.as_str()).collect();
        assert_eq!(got, ["3", "7", "10", "P1", "S2", "S10", "a1", "a02"]);
    }

    #[test]
    fn single_entity_is_always_nearest() {
        let pn = PnSpace::new(vec![dot("only", 0.0, 0.0)], 1.0).unwrap();
        assert_eq!(pn.nearest(&Point2D::new(40.0, -3.0)).ix, 0);
        assert_eq!(pn.voronoi_margin(&Point2D::new(1.0, 1.0)), f64::INFINITY);
    }

    #[test]
    fn equidistant_tie_goes_to_smallest_id() {
        let a = Entity::segment(
            "7",
            Polyline::new(vec![Point2D::new(-10.0, 5.0), Point2D::new(10.0, 5.0)]),
        );
        let b = Entity::segment(
            "3",
            Polyline::new(vec![Point2D::new(-10.0, -5.0), Point2D::new(10.0, -5.0)]),
        );
        let pn = PnSpace::new(vec![a, b], 1.0).unwrap();
        for _ in 0..5 {
            let n = pn.nearest(&Point2D::new(0.0, 0.0));
            assert_eq!(pn.entity(n.ix).id.as_str(), "3");
            assert_eq!(n.distance, 5.0);
        }
    }

    #[test]
    fn margin_for_point_sites() {
        let pn = PnSpace::new(vec![dot("a", 0.0, 0.0), dot("b", 10.0, 0.0)], 1.0).unwrap();
        assert!((pn.voronoi_margin(&Point2D::new(2.0, 0.0)) - 3.0).abs() < 1e-9);
        assert!(pn.voronoi_margin(&Point2D::new(5.0, 0.0)).abs() < 1e-9);
    }

    #[test]
    fn bound_values() {
        assert_eq!(misclassification_bound(0.0, 1.0).unwrap(), 1.0);
        let sigma = 2.5;
        let m = sigma * (2.0 * 20f64.ln()).sqrt();
        assert!((misclassification_bound(m, sigma).unwrap() - 0.05).abs() < 1e-12);
        assert!(misclassification_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(PnSpace::new(vec![], 1.0), Err(Error::EmptySpace)));
        let zero = Entity::segment(
            "z",
            Polyline::new(vec![Point2D::new(0.0, 0.0), Point2D::new(0.0, 0.0)]),
        );
        assert!(PnSpace::new(vec![zero], 1.0).is_err());
        let dup = vec![dot("x", 0.0, 0.0), dot("x", 1.0, 0.0)];
        assert!(matches!(PnSpace::new(dup, 1.0), Err(Error::DuplicateId(_))));
    }
}
