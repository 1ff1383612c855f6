//! GPS parsing and the GIS selection pipeline: study-area search, road
//! coverage, polygon selection and aggregation, and privacy-preserving
//! rendering layers.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use chrono::{NaiveDateTime, NaiveTime, Timelike};
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rstar::{RTree, AABB};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Point2D, Polygon};
use crate::pn::{Entity, EntityId, EntityKind, Geometry, PnSpace};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsRecord {
    pub day: i64,
    /// Time of day rescaled to `[0, 1]`.
    pub t: f64,
    pub point: Point2D,
    pub accuracy: Option<f64>,
}

/// One day's observations, strictly increasing in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsDay {
    pub day: i64,
    pub records: Vec<GpsRecord>,
}

impl GpsDay {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn points(&self) -> Vec<Point2D> {
        self.records.iter().map(|r| r.point).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedGps {
    pub days: Vec<GpsDay>,
    /// Human-readable notes about dropped rows and rejected days.
    pub diagnostics: Vec<String>,
}

impl ParsedGps {
    pub fn record_count(&self) -> usize {
        self.days.iter().map(GpsDay::len).sum()
    }

    pub fn all_points(&self) -> Vec<Point2D> {
        self.days.iter().flat_map(|d| d.points()).collect()
    }
}

/// Parses a raw timestamp into seconds since the start of its day.
///
/// Accepts plain seconds, `HH:MM[:SS[.fff]]` clock times, and ISO date-times
/// (only the time of day is kept).
pub fn parse_timestamp(raw: &str) -> Result<f64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    if s == "24:00" || s == "24:00:00" {
        return Ok(SECONDS_PER_DAY);
    }
    let tod = |t: NaiveTime| t.num_seconds_from_midnight() as f64 + t.nanosecond() as f64 * 1e-9;
    for fmt in ["%H:%M:%S%.f", "%H:%M"] {
        if let Ok(t) = NaiveTime::parse_from_str(s, fmt) {
            return Ok(tod(t));
        }
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Ok(tod(dt.time()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(tod(dt.time()));
        }
    }
    Err(Error::Parse(format!("unrecognized timestamp `{raw}`")))
}

/// Reads GPS CSV (`day,timestamp,x,y[,accuracy]`), grouping by the day
/// column and rescaling each day to `[0, 1]` (midnight ↦ 0, end of day ↦ 1).
///
/// Identical timestamps within a day keep their first record. A day whose
/// timestamps are not increasing in file order is rejected with a
/// diagnostic; days left without records are dropped.
pub fn parse_gps(reader: impl Read) -> Result<ParsedGps> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (day_c, ts_c, x_c, y_c) = match (col("day"), col("timestamp"), col("x"), col("y")) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => {
            return Err(Error::Data(
                "GPS CSV needs columns day, timestamp, x, y".into(),
            ))
        }
    };
    let acc_c = col("accuracy");

    let mut out = ParsedGps::default();
    let mut raw: BTreeMap<i64, Vec<GpsRecord>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        let parsed = (|| -> Result<GpsRecord> {
            let day = field(day_c)
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("bad day `{}`", field(day_c))))?;
            let secs = parse_timestamp(field(ts_c))?;
            let x: f64 = field(x_c).parse().map_err(|_| Error::Parse("bad x".into()))?;
            let y: f64 = field(y_c).parse().map_err(|_| Error::Parse("bad y".into()))?;
            let accuracy = match acc_c.map(field).filter(|s| !s.is_empty()) {
                Some(a) => Some(a.parse::<f64>().map_err(|_| Error::Parse("bad accuracy".into()))?),
                None => None,
            };
            let point = Point2D::new(x, y);
            if !point.is_finite() {
                return Err(Error::Parse("non-finite coordinate".into()));
            }
            Ok(GpsRecord {
                day,
                t: secs / SECONDS_PER_DAY,
                point,
                accuracy,
            })
        })();
        match parsed {
            Ok(r) => raw.entry(r.day).or_default().push(r),
            Err(e) => {
                let msg = format!("row {row}: skipped ({e})");
                warn!("{msg}");
                out.diagnostics.push(msg);
            }
        }
    }

    for (day, recs) in raw {
        let mut seen = HashSet::new();
        let mut kept: Vec<GpsRecord> = Vec::with_capacity(recs.len());
        for r in recs {
            if seen.insert(r.t.to_bits()) {
                kept.push(r);
            }
        }
        if kept.is_empty() {
            let msg = format!("day {day}: no records, dropped");
            warn!("{msg}");
            out.diagnostics.push(msg);
            continue;
        }
        if let Some(bad) = kept.iter().find(|r| !(0.0..=1.0).contains(&r.t)) {
            let msg = format!("day {day}: timestamp {} outside the day, rejected", bad.t);
            warn!("{msg}");
            out.diagnostics.push(msg);
            continue;
        }
        if kept.windows(2).any(|w| w[1].t <= w[0].t) {
            let msg = format!("day {day}: timestamps not increasing, rejected");
            warn!("{msg}");
            out.diagnostics.push(msg);
            continue;
        }
        out.days.push(GpsDay { day, records: kept });
    }
    Ok(out)
}

/// Writes days in the same CSV layout [`parse_gps`] reads, timestamps as
/// seconds since midnight.
pub fn write_gps_csv(days: &[GpsDay], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_acc = days
        .iter()
        .any(|d| d.records.iter().any(|r| r.accuracy.is_some()));
    if with_acc {
        w.write_record(["day", "timestamp", "x", "y", "accuracy"])?;
    } else {
        w.write_record(["day", "timestamp", "x", "y"])?;
    }
    for d in days {
        for r in &d.records {
            let mut row = vec![
                d.day.to_string(),
                (r.t * SECONDS_PER_DAY).to_string(),
                r.point.x.to_string(),
                r.point.y.to_string(),
            ];
            if with_acc {
                row.push(r.accuracy.map(|a| a.to_string()).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSearch {
    pub bbox: BoundingBox,
    /// Total weight inside the box.
    pub weight: f64,
    /// `weight` divided by the total weight of all records.
    pub fraction: f64,
}

/// Grid search for the `θ × θ` box holding the most weight.
///
/// Candidate corners sit on an `r`-lattice anchored at the data's minimum
/// corner. A box spans `k = ⌊θ/r⌋` lattice cells per axis (so its side never
/// exceeds `θ`); a point belongs to the box when its lattice cell does. Ties
/// go to the smallest corner (x first, then y).
pub fn bounding_box_search(
    points: &[Point2D],
    weights: Option<&[f64]>,
    theta: f64,
    r: f64,
) -> Result<BoxSearch> {
    if !(theta > 0.0) {
        return Err(Error::param("theta", "must be positive"));
    }
    if !(r > 0.0) {
        return Err(Error::param("r", "must be positive"));
    }
    if r > theta {
        return Err(Error::param("r", "must not exceed theta"));
    }
    if points.is_empty() {
        return Err(Error::Data("no records for the bounding-box search".into()));
    }
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(Error::param("weights", "length differs from points"));
        }
        if w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("weights", "must be nonnegative"));
        }
    }
    let grid = LatticeGrid::new(points, r);
    let k = (theta / r + 1e-9).floor() as usize;
    let (nx, ny) = (grid.nx, grid.ny);
    if (nx + 1).saturating_mul(ny + 1) > 50_000_000 {
        return Err(Error::param(
            "r",
            format!("grid of {nx}×{ny} cells is too fine for the data extent"),
        ));
    }
    let mut prefix = vec![0.0f64; (nx + 1) * (ny + 1)];
    let at = |i: usize, j: usize| i * (ny + 1) + j;
    for (n, p) in points.iter().enumerate() {
        let (i, j) = grid.cell(p);
        prefix[at(i + 1, j + 1)] += weights.map_or(1.0, |w| w[n]);
    }
    for i in 1..=nx {
        for j in 1..=ny {
            prefix[at(i, j)] += prefix[at(i - 1, j)] + prefix[at(i, j - 1)] - prefix[at(i - 1, j - 1)];
        }
    }
    let total = prefix[at(nx, ny)];
    let tol = 1e-12 * total.max(1.0);
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for i in 0..nx {
        let i1 = (i + k).min(nx);
        for j in 0..ny {
            let j1 = (j + k).min(ny);
            let w = prefix[at(i1, j1)] - prefix[at(i, j1)] - prefix[at(i1, j)] + prefix[at(i, j)];
            if w > best.0 + tol {
                best = (w, i, j);
            }
        }
    }
    let (w, i, j) = best;
    let min = Point2D::new(grid.origin.x + i as f64 * r, grid.origin.y + j as f64 * r);
    let side = k as f64 * r;
    Ok(BoxSearch {
        bbox: BoundingBox::new(min, Point2D::new(min.x + side, min.y + side)),
        weight: w,
        fraction: if total > 0.0 { w / total } else { 0.0 },
    })
}

/// The `r`-lattice used by [`bounding_box_search`].
#[derive(Debug, Clone, Copy)]
pub struct LatticeGrid {
    pub origin: Point2D,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
}

impl LatticeGrid {
    pub fn new(points: &[Point2D], step: f64) -> Self {
        let bb = BoundingBox::from_points(points).expect("nonempty");
        let mut g = LatticeGrid {
            origin: bb.min,
            step,
            nx: 0,
            ny: 0,
        };
        for p in points {
            let (i, j) = g.cell(p);
            g.nx = g.nx.max(i + 1);
            g.ny = g.ny.max(j + 1);
        }
        g
    }

    pub fn cell(&self, p: &Point2D) -> (usize, usize) {
        (
            ((p.x - self.origin.x) / self.step).floor().max(0.0) as usize,
            ((p.y - self.origin.y) / self.step).floor().max(0.0) as usize,
        )
    }
}

/// Fraction of records within `d0` of the nearest network entity.
pub fn road_coverage(points: &[Point2D], network: &[Entity], d0: f64) -> Result<f64> {
    if !(d0 > 0.0) {
        return Err(Error::param("d0", "must be positive"));
    }
    if points.is_empty() {
        return Err(Error::Data("coverage of zero records is undefined".into()));
    }
    if network.is_empty() {
        return Ok(0.0);
    }
    let pn = PnSpace::new(network.to_vec(), 1.0)?;
    let covered = points
        .iter()
        .filter(|p| pn.nearest(p).distance <= d0)
        .count();
    Ok(covered as f64 / points.len() as f64)
}

/// Keeps the polygons that are the nearest polygon of at least one record
/// lying within `d0` of it. Output is in id order.
pub fn select_polygons(points: &[Point2D], polygons: &[Entity], d0: f64) -> Result<Vec<Entity>> {
    if !(d0 > 0.0) {
        return Err(Error::param("d0", "must be positive"));
    }
    if polygons.is_empty() {
        return Ok(Vec::new());
    }
    let pn = PnSpace::new(polygons.to_vec(), 1.0)?;
    let mut keep = vec![false; pn.len()];
    for p in points {
        let n = pn.nearest(p);
        if n.distance <= d0 {
            keep[n.ix] = true;
        }
    }
    Ok(pn
        .entities()
        .iter()
        .zip(keep)
        .filter_map(|(e, k)| k.then(|| e.clone()))
        .collect())
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage aggregation of polygons whose centroids lie closer than
/// `cutoff`. Each multi-member cluster becomes one composite entity named
/// after its smallest member id, carrying every part and the member list.
pub fn aggregate_polygons(polygons: &[Entity], cutoff: f64) -> Result<Vec<Entity>> {
    if !(cutoff >= 0.0) {
        return Err(Error::param("cutoff", "must be nonnegative"));
    }
    if let Some(e) = polygons.iter().find(|e| e.kind() != EntityKind::Polygon) {
        return Err(Error::param("polygons", format!("`{}` is not a polygon", e.id)));
    }
    let mut sorted: Vec<&Entity> = polygons.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let centroids: Vec<Point2D> = sorted.iter().map(|e| e.centroid()).collect();
    let n = sorted.len();
    let mut ds = DisjointSet::new(n);
    let mut by_x: Vec<usize> = (0..n).collect();
    by_x.sort_by(|&a, &b| centroids[a].x.total_cmp(&centroids[b].x));
    for (pos, &a) in by_x.iter().enumerate() {
        for &b in &by_x[pos + 1..] {
            if centroids[b].x - centroids[a].x >= cutoff {
                break;
            }
            if centroids[a].distance(&centroids[b]) < cutoff {
                ds.union(a, b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = ds.find(i);
        groups.entry(root).or_default().push(i);
    }
    let mut out = Vec::with_capacity(groups.len());
    for members in groups.into_values() {
        if members.len() == 1 {
            out.push(sorted[members[0]].clone());
            continue;
        }
        let mut parts = Vec::new();
        let mut ids = Vec::new();
        let mut weight = 0.0;
        for &m in &members {
            let e = sorted[m];
            parts.extend(e.polygons().iter().cloned());
            if e.members.is_empty() {
                ids.push(e.id.clone());
            } else {
                ids.extend(e.members.iter().cloned());
            }
            weight += e.weight;
        }
        ids.sort();
        out.push(Entity {
            id: sorted[members[0]].id.clone(),
            geometry: Geometry::Polygon(parts),
            weight,
            members: ids,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThinningDecision {
    Kept,
    Removed,
}

impl ThinningDecision {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThinningDecision::Kept => "kept",
            ThinningDecision::Removed => "removed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Thinning {
    /// One decision per input segment, in id order.
    pub decisions: Vec<(EntityId, ThinningDecision)>,
    /// The segments left for display.
    pub displayed: Vec<Entity>,
}

impl Thinning {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["segment_id", "decision"])?;
        for (id, d) in &self.decisions {
            w.write_record([id.as_str(), d.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn point_tree(points: &[Point2D]) -> RTree<[f64; 2]> {
    RTree::bulk_load(points.iter().map(|p| [p.x, p.y]).collect())
}

fn near_any_point(tree: &RTree<[f64; 2]>, e: &Entity, r0: f64) -> bool {
    let bb = e.geometry.bbox();
    let env = AABB::from_corners([bb.min.x - r0, bb.min.y - r0], [bb.max.x + r0, bb.max.y + r0]);
    tree.locate_in_envelope(env)
        .any(|q| e.geometry.distance(&Point2D::new(q[0], q[1])) <= r0)
}

fn remove_fraction(mut eligible: Vec<EntityId>, q: f64, seed: u64) -> HashSet<EntityId> {
    eligible.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    let n_remove = (q * eligible.len() as f64).round() as usize;
    eligible.into_iter().take(n_remove).collect()
}

/// Display-only road thinning: segments farther than `r0` from every record
/// are eligible, and a seeded fraction `q` of them is removed.
pub fn privacy_thin_roads(
    network: &[Entity],
    points: &[Point2D],
    r0: f64,
    q: f64,
    seed: u64,
) -> Result<Thinning> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param("q", "must lie in [0, 1]"));
    }
    if !(r0 >= 0.0) {
        return Err(Error::param("r0", "must be nonnegative"));
    }
    let tree = point_tree(points);
    let mut sorted: Vec<&Entity> = network.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let eligible: Vec<EntityId> = sorted
        .iter()
        .filter(|e| !near_any_point(&tree, e, r0))
        .map(|e| e.id.clone())
        .collect();
    let removed = remove_fraction(eligible, q, seed);
    Ok(build_thinning(sorted, |e| removed.contains(&e.id)))
}

fn build_thinning(sorted: Vec<&Entity>, mut is_removed: impl FnMut(&Entity) -> bool) -> Thinning {
    let mut decisions = Vec::with_capacity(sorted.len());
    let mut displayed = Vec::new();
    for e in sorted {
        if is_removed(e) {
            decisions.push((e.id.clone(), ThinningDecision::Removed));
        } else {
            decisions.push((e.id.clone(), ThinningDecision::Kept));
            displayed.push(e.clone());
        }
    }
    Thinning {
        decisions,
        displayed,
    }
}

/// Whether `other` runs along `primary`: at least half of a dense sample of
/// `other` lies within `tol` of `primary`.
fn overlaps(other: &Entity, primary: &Entity, tol: f64) -> bool {
    let (Some(a), Some(b)) = (other.as_polyline(), primary.as_polyline()) else {
        return false;
    };
    const SAMPLES: usize = 20;
    let close = (0..=SAMPLES)
        .filter(|&k| b.distance(&a.point_at_fraction(k as f64 / SAMPLES as f64)) <= tol)
        .count();
    2 * close >= SAMPLES + 1
}

/// Applies primary-layer decisions to another road layer so removed segments
/// never reappear: overlap with a removed primary segment removes, overlap
/// with kept ones only keeps, and the rest are thinned like the primary.
pub fn thin_secondary_layer(
    layer: &[Entity],
    primary: &[Entity],
    primary_thinning: &Thinning,
    points: &[Point2D],
    r0: f64,
    q: f64,
    overlap_tol: f64,
    seed: u64,
) -> Result<Thinning> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::param("q", "must lie in [0, 1]"));
    }
    let removed_primary: HashSet<&EntityId> = primary_thinning
        .decisions
        .iter()
        .filter(|(_, d)| *d == ThinningDecision::Removed)
        .map(|(id, _)| id)
        .collect();
    let tree = point_tree(points);
    let mut sorted: Vec<&Entity> = layer.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut forced_remove = HashSet::new();
    let mut forced_keep = HashSet::new();
    let mut eligible = Vec::new();
    for e in &sorted {
        let hits: Vec<&Entity> = primary.iter().filter(|p| overlaps(e, p, overlap_tol)).collect();
        if hits.iter().any(|p| removed_primary.contains(&p.id)) {
            forced_remove.insert(e.id.clone());
        } else if !hits.is_empty() {
            forced_keep.insert(e.id.clone());
        } else if !near_any_point(&tree, e, r0) {
            eligible.push(e.id.clone());
        }
    }
    let random_removed = remove_fraction(eligible, q, seed);
    Ok(build_thinning(sorted, |e| {
        forced_remove.contains(&e.id) || (!forced_keep.contains(&e.id) && random_removed.contains(&e.id))
    }))
}

/// Replaces each polygon with an axis-aligned square of side `side` centred
/// at its centroid. Ids, weights and member lists are preserved.
pub fn privacy_reshape_polygons(polygons: &[Entity], side: f64) -> Result<Vec<Entity>> {
    if !(side > 0.0) {
        return Err(Error::param("side", "must be positive"));
    }
    polygons
        .iter()
        .map(|e| {
            if e.kind() != EntityKind::Polygon {
                return Err(Error::param("polygons", format!("`{}` is not a polygon", e.id)));
            }
            Ok(Entity {
                id: e.id.clone(),
                geometry: Geometry::Polygon(vec![Polygon::square(e.centroid(), side)]),
                weight: e.weight,
                members: e.members.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polyline;

    fn sq(id: &str, cx: f64, cy: f64, side: f64) -> Entity {
        Entity::polygon(id, Polygon::square(Point2D::new(cx, cy), side))
    }

    fn seg(id: &str, a: (f64, f64), b: (f64, f64)) -> Entity {
        Entity::segment(id, Polyline::new(vec![a.into(), b.into()]))
    }

    #[test]
    fn clock_times_rescale_linearly() {
        let csv = "day,timestamp,x,y\n1,00:00,0,0\n1,12:00,1,1\n1,18:00,2,2\n";
        let parsed = parse_gps(csv.as_bytes()).unwrap();
        assert_eq!(parsed.days.len(), 1);
        assert_eq!(parsed.days[0].times(), vec![0.0, 0.5, 0.75]);
    }

    #[test]
    fn timestamp_forms() {
        assert_eq!(parse_timestamp("43200").unwrap(), 43200.0);
        assert_eq!(parse_timestamp("2024-03-01T06:00:00").unwrap(), 21600.0);
        assert_eq!(parse_timestamp("2024-03-01T06:00:00+02:00").unwrap(), 21600.0);
        assert_eq!(parse_timestamp("24:00").unwrap(), SECONDS_PER_DAY);
        assert!(parse_timestamp("noon").is_err());
    }

    #[test]
    fn duplicates_collapse_and_disorder_rejects() {
        let csv = "day,timestamp,x,y\n1,10,0,0\n1,10,5,5\n1,20,1,1\n2,30,0,0\n2,20,0,0\n";
        let parsed = parse_gps(csv.as_bytes()).unwrap();
        assert_eq!(parsed.days.len(), 1);
        assert_eq!(parsed.days[0].len(), 2);
        assert_eq!(parsed.days[0].records[0].point, Point2D::new(0.0, 0.0));
        assert!(parsed.diagnostics.iter().any(|d| d.starts_with("day 2")));
    }

    #[test]
    fn empty_day_dropped_and_missing_columns_error() {
        let csv = "day,timestamp,x,y\n3,abc,0,0\n4,10,0,0\n";
        let parsed = parse_gps(csv.as_bytes()).unwrap();
        assert_eq!(parsed.days.len(), 1);
        assert_eq!(parsed.days[0].day, 4);
        assert!(parse_gps("day,t,x,y\n".as_bytes()).is_err());
    }

    #[test]
    fn box_search_single_cluster() {
        let pts: Vec<Point2D> = (0..50)
            .map(|i| Point2D::new(10.0 + (i % 7) as f64 * 0.001, 20.0 + (i / 7) as f64 * 0.001))
            .collect();
        let res = bounding_box_search(&pts, None, 0.05, 0.001).unwrap();
        assert_eq!(res.fraction, 1.0);
        assert!(res.bbox.width() <= 0.05 + 1e-12);
    }

    #[test]
    fn box_search_rejects_bad_params() {
        let pts = [Point2D::new(0.0, 0.0)];
        assert!(bounding_box_search(&pts, None, 0.0, 0.1).is_err());
        assert!(bounding_box_search(&pts, None, 1.0, -0.1).is_err());
        assert!(bounding_box_search(&pts, None, 0.5, 0.8).is_err());
    }

    #[test]
    fn coverage_conventions() {
        let net = vec![seg("s", (0.0, 0.0), (10.0, 0.0))];
        let on: Vec<Point2D> = (0..5).map(|i| Point2D::new(i as f64, 0.0)).collect();
        assert_eq!(road_coverage(&on, &net, 0.1).unwrap(), 1.0);
        assert_eq!(road_coverage(&on, &[], 0.1).unwrap(), 0.0);
        assert!(road_coverage(&[], &net, 0.1).is_err());
    }

    #[test]
    fn polygon_selection() {
        let polys = vec![sq("a", 0.0, 0.0, 1.0), sq("b", 10.0, 0.0, 1.0)];
        let kept = select_polygons(&[Point2D::new(0.1, 0.1)], &polys, 0.5).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id.as_str(), "a");
    }

    #[test]
    fn aggregation_cases() {
        let polys = vec![
            sq("A", 0.0, 0.0, 0.0002),
            sq("B", 0.0008, 0.0, 0.0002),
            sq("C", 0.0016, 0.0, 0.0002),
        ];
        assert_eq!(aggregate_polygons(&polys, 0.0).unwrap().len(), 3);
        let merged = aggregate_polygons(&polys, 0.001).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].members.len(), 3);
        assert_eq!(merged[0].polygons().len(), 3);

        let pair = vec![sq("x", 0.0, 0.0, 0.0001), sq("y", 0.0005, 0.0, 0.0001)];
        assert_eq!(aggregate_polygons(&pair, 0.001).unwrap().len(), 1);
    }

    #[test]
    fn thinning_edge_cases() {
        let net: Vec<Entity> = (0..10)
            .map(|i| seg(&format!("s{i}"), (i as f64 * 100.0, 0.0), (i as f64 * 100.0 + 50.0, 0.0)))
            .collect();
        let far = [Point2D::new(0.0, 1e6)];
        let none = privacy_thin_roads(&net, &far, 50.0, 0.0, 1).unwrap();
        assert_eq!(none.displayed.len(), 10);

        let near: Vec<Point2D> = net.iter().map(|e| e.centroid()).collect();
        let all_near = privacy_thin_roads(&net, &near, 50.0, 1.0, 1).unwrap();
        assert_eq!(all_near.displayed.len(), 10);

        let a = privacy_thin_roads(&net, &far, 50.0, 0.85, 9).unwrap();
        let b = privacy_thin_roads(&net, &far, 50.0, 0.85, 9).unwrap();
        assert_eq!(a.decisions, b.decisions);
        assert_eq!(a.displayed.len(), 10 - 9);
    }

    #[test]
    fn secondary_layer_follows_primary() {
        let primary = vec![seg("p1", (0.0, 0.0), (10.0, 0.0)), seg("p2", (0.0, 5.0), (10.0, 5.0))];
        let thin = Thinning {
            decisions: vec![
                (EntityId::from("p1"), ThinningDecision::Removed),
                (EntityId::from("p2"), ThinningDecision::Kept),
            ],
            displayed: vec![primary[1].clone()],
        };
        let layer = vec![
            seg("o1", (1.0, 0.01), (9.0, 0.01)),
            seg("o2", (1.0, 5.0), (9.0, 5.0)),
        ];
        let out = thin_secondary_layer(&layer, &primary, &thin, &[], 0.5, 1.0, 0.1, 3).unwrap();
        assert_eq!(out.decisions[0].1, ThinningDecision::Removed);
        assert_eq!(out.decisions[1].1, ThinningDecision::Kept);
    }

    #[test]
    fn reshape_keeps_centroid_and_id() {
        let out = privacy_reshape_polygons(&[sq("u", 0.5, 0.5, 1.0)], 2.0).unwrap();
        assert_eq!(out[0].id.as_str(), "u");
        let p = &out[0].polygons()[0];
        assert!((p.area() - 4.0).abs() < 1e-12);
        assert_eq!(p.centroid(), Point2D::new(0.5, 0.5));
    }
}
