//! Marks, nearest-entity assignment, boundary adjustment and the three
//! time-use estimators.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2D;
use crate::ingest::GpsDay;
use crate::pn::{EntityId, EntityKind, PnSpace};

/// Dwell-time marks for strictly increasing times in `[0, 1]`.
///
/// Interior observations get half the gap between their neighbours; the
/// first one also owns the time since midnight and the last the time until
/// the end of the day. A single observation owns the whole day.
pub fn compute_marks(t: &[f64]) -> Result<Vec<f64>> {
    let m = t.len();
    if m == 0 {
        return Err(Error::Data("cannot mark an empty day".into()));
    }
    if t.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Data("timestamps must lie in [0, 1]".into()));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Data("timestamps must be strictly increasing".into()));
    }
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let mut w = Vec::with_capacity(m);
    w.push((t[0] + t[1]) / 2.0);
    for j in 1..m - 1 {
        w.push((t[j + 1] - t[j - 1]) / 2.0);
    }
    w.push(1.0 - (t[m - 2] + t[m - 1]) / 2.0);
    Ok(w)
}

/// One day of observations with marks and (once assigned) entity labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedDay {
    pub day: i64,
    pub t: Vec<f64>,
    pub points: Vec<Point2D>,
    pub marks: Vec<f64>,
    /// Index into [`PnSpace::entities`] per observation; empty until assigned.
    pub labels: Vec<usize>,
    /// Voronoi margin per observation; empty until assigned.
    pub margins: Vec<f64>,
}

impl MarkedDay {
    pub fn new(day: i64, t: Vec<f64>, points: Vec<Point2D>) -> Result<Self> {
        if t.len() != points.len() {
            return Err(Error::Data(format!(
                "day {day}: {} timestamps but {} points",
                t.len(),
                points.len()
            )));
        }
        let marks = compute_marks(&t)?;
        Ok(Self {
            day,
            t,
            points,
            marks,
            labels: Vec::new(),
            margins: Vec::new(),
        })
    }

    pub fn from_gps(day: &GpsDay) -> Result<Self> {
        Self::new(day.day, day.times(), day.points())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn is_assigned(&self) -> bool {
        !self.is_empty() && self.labels.len() == self.len()
    }
}

/// Labels every observation with its nearest entity and records margins.
pub fn assign(mut day: MarkedDay, pn: &PnSpace) -> MarkedDay {
    let (labels, margins) = day
        .points
        .iter()
        .map(|p| {
            let (n, margin) = pn.nearest_with_margin(p);
            (n.ix, margin)
        })
        .unzip();
    day.labels = labels;
    day.margins = margins;
    day
}

/// Builds and assigns marked days from parsed GPS, in parallel over days.
pub fn mark_and_assign(days: &[GpsDay], pn: &PnSpace) -> Result<Vec<MarkedDay>> {
    days.par_iter()
        .map(|d| MarkedDay::from_gps(d).map(|m| assign(m, pn)))
        .collect()
}

/// One left-to-right pass of the polygon/road override rules.
///
/// When both neighbours of an observation carry the same label `e`, the
/// observation's own label is of the other kind, and the observation lies
/// closer than `threshold` to `e`, it is relabelled `e`. Labels are updated
/// in place, so later triples see earlier changes. The end observations are
/// never touched.
pub fn adjust_assignments(mut day: MarkedDay, pn: &PnSpace, threshold: f64) -> Result<MarkedDay> {
    if !(threshold >= 0.0) {
        return Err(Error::param("threshold", "must be nonnegative"));
    }
    if !day.is_assigned() {
        return Err(Error::Data(format!("day {} has no assignments", day.day)));
    }
    for j in 1..day.len().saturating_sub(1) {
        let e = day.labels[j - 1];
        if day.labels[j + 1] != e {
            continue;
        }
        let cur = day.labels[j];
        if pn.entity(cur).kind() == pn.entity(e).kind() {
            continue;
        }
        if pn.distance(&day.points[j], e) < threshold {
            day.labels[j] = e;
        }
    }
    Ok(day)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Estimator {
    /// Every observation weighs `1/m`.
    Naive,
    /// Observations weigh their marks.
    Weighted,
    /// Marks after [`adjust_assignments`] with the given threshold.
    Adjusted { threshold: f64 },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::Weighted => "weighted",
            Estimator::Adjusted { .. } => "adjusted",
        }
    }

    /// Parses `naive`, `weighted` or `adjusted`; the latter takes `threshold`.
    pub fn parse(name: &str, threshold: Option<f64>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "naive" => Ok(Estimator::Naive),
            "weighted" => Ok(Estimator::Weighted),
            "adjusted" => threshold
                .map(|threshold| Estimator::Adjusted { threshold })
                .ok_or_else(|| Error::param("threshold", "adjusted mode needs a threshold")),
            other => Err(Error::param("mode", format!("unknown estimator `{other}`"))),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    /// `adjusted` alone uses the default threshold of 0.1 units.
    fn from_str(s: &str) -> Result<Self> {
        Estimator::parse(s, Some(DEFAULT_ADJUST_THRESHOLD))
    }
}

pub const DEFAULT_ADJUST_THRESHOLD: f64 = 0.1;

/// Per-entity time share of a single day, indexed like the PN space.
pub fn day_vector(day: &MarkedDay, pn: &PnSpace, estimator: Estimator) -> Result<Vec<f64>> {
    if !day.is_assigned() {
        return Err(Error::Data(format!("day {} has no assignments", day.day)));
    }
    let mut v = vec![0.0; pn.len()];
    match estimator {
        Estimator::Naive => {
            let w = 1.0 / day.len() as f64;
            for &l in &day.labels {
                v[l] += w;
            }
        }
        Estimator::Weighted => {
            for (&l, &w) in day.labels.iter().zip(&day.marks) {
                v[l] += w;
            }
        }
        Estimator::Adjusted { threshold } => {
            let adj = adjust_assignments(day.clone(), pn, threshold)?;
            for (&l, &w) in adj.labels.iter().zip(&adj.marks) {
                v[l] += w;
            }
        }
    }
    Ok(v)
}

/// Per-day vectors for all days, in input order.
pub fn day_vectors(days: &[MarkedDay], pn: &PnSpace, estimator: Estimator) -> Result<Vec<Vec<f64>>> {
    days.par_iter().map(|d| day_vector(d, pn, estimator)).collect()
}

/// Mean of per-day vectors, summed in day order.
pub fn mean_vector(vectors: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = vectors.first() else {
        return Vec::new();
    };
    let mut acc = vec![0.0; first.len()];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Mean time-use table over `days`.
pub fn estimate(days: &[MarkedDay], pn: &PnSpace, estimator: Estimator) -> Result<TimeUseTable> {
    if days.is_empty() {
        return Err(Error::Data("no days to estimate from".into()));
    }
    let vectors = day_vectors(days, pn, estimator)?;
    Ok(TimeUseTable::from_vector(pn, &mean_vector(&vectors)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeUseEntry {
    pub id: EntityId,
    pub kind: EntityKind,
    pub proportion: f64,
}

/// Mean share of time per entity, sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeUseTable {
    pub entries: Vec<TimeUseEntry>,
}

impl TimeUseTable {
    pub fn new(mut entries: Vec<TimeUseEntry>) -> Result<Self> {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        for w in entries.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateId(w[0].id.0.clone()));
            }
        }
        if let Some(e) = entries.iter().find(|e| !(e.proportion >= 0.0)) {
            return Err(Error::Data(format!("negative proportion for `{}`", e.id)));
        }
        Ok(Self { entries })
    }

    pub fn from_vector(pn: &PnSpace, values: &[f64]) -> Self {
        let entries = pn
            .entities()
            .iter()
            .zip(values)
            .map(|(e, &p)| TimeUseEntry {
                id: e.id.clone(),
                kind: e.kind(),
                proportion: p,
            })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &EntityId) -> Option<f64> {
        self.entries
            .binary_search_by(|e| e.id.cmp(id))
            .ok()
            .map(|i| self.entries[i].proportion)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.proportion).sum()
    }

    pub fn class_total(&self, kind: EntityKind) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.proportion)
            .sum()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.proportion).collect()
    }

    /// CSV rows of `entity_id,kind,proportion,normalized_proportion`, the last
    /// column being the share within the entity's own class.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let totals = [
            self.class_total(EntityKind::Polygon),
            self.class_total(EntityKind::Segment),
        ];
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["entity_id", "kind", "proportion", "normalized_proportion"])?;
        for e in &self.entries {
            let total = totals[(e.kind == EntityKind::Segment) as usize];
            let norm = if total > 0.0 { e.proportion / total } else { 0.0 };
            w.write_record([
                e.id.as_str(),
                e.kind.as_str(),
                &e.proportion.to_string(),
                &norm.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            entries.push(TimeUseEntry {
                id: EntityId::from(field(0)),
                kind: field(1).parse()?,
                proportion: field(2)
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad proportion `{}`", field(2))))?,
            });
        }
        Self::new(entries)
    }
}

/// Class-normalized tables; `None` marks a class with zero total time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTables {
    pub polygons: Option<TimeUseTable>,
    pub roads: Option<TimeUseTable>,
}

fn normalize_class(table: &TimeUseTable, kind: EntityKind) -> Option<TimeUseTable> {
    let total = table.class_total(kind);
    if !(total > 0.0) {
        return None;
    }
    let entries = table
        .entries
        .iter()
        .filter(|e| e.kind == kind)
        .map(|e| TimeUseEntry {
            proportion: e.proportion / total,
            ..e.clone()
        })
        .collect();
    Some(TimeUseTable { entries })
}

/// Splits a table into polygon and road tables, each rescaled to sum to 1.
pub fn normalize_by_class(table: &TimeUseTable) -> ClassTables {
    ClassTables {
        polygons: normalize_class(table, EntityKind::Polygon),
        roads: normalize_class(table, EntityKind::Segment),
    }
}
