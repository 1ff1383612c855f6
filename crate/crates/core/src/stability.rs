//! Cumulative activity spaces and last-crossing times.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity_space::{level_space, SpaceClass};
use crate::error::{Error, Result};
use crate::estimation::{day_vectors, estimate, normalize_by_class, Estimator, MarkedDay, TimeUseTable};
use crate::pn::{EntityId, PnSpace};

/// Time-use table from the first `d` days.
pub fn cumulative_table(days: &[MarkedDay], pn: &PnSpace, d: usize, estimator: Estimator) -> Result<TimeUseTable> {
    if d < 1 || d > days.len() {
        return Err(Error::param("d", format!("must lie in 1..={}", days.len())));
    }
    estimate(&days[..d], pn, estimator)
}

/// `|S Δ S_final| / |S_final|`, or 0 when `s_final` is empty.
pub fn sym_diff_ratio(s: &[EntityId], s_final: &[EntityId]) -> f64 {
    if s_final.is_empty() {
        return 0.0;
    }
    let a: BTreeSet<&EntityId> = s.iter().collect();
    let b: BTreeSet<&EntityId> = s_final.iter().collect();
    a.symmetric_difference(&b).count() as f64 / b.len() as f64
}

/// Last day whose ratio exceeds `xi` (1-based), or 0 if none does.
pub fn lct(ratios: &[f64], xi: f64) -> Result<usize> {
    if !(xi >= 0.0) {
        return Err(Error::param("xi", "must be nonnegative"));
    }
    Ok(ratios.iter().rposition(|&r| r > xi).map_or(0, |k| k + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySeries {
    pub class: SpaceClass,
    pub c: f64,
    /// Activity space of the first `D` days at index `D - 1`.
    pub members: Vec<Vec<EntityId>>,
    pub ratios: Vec<f64>,
}

impl StabilitySeries {
    pub fn lct(&self, xi: f64) -> Result<usize> {
        lct(&self.ratios, xi)
    }
}

fn check_class(class: SpaceClass) -> Result<crate::pn::EntityKind> {
    match class {
        SpaceClass::Polygon => Ok(crate::pn::EntityKind::Polygon),
        SpaceClass::Road => Ok(crate::pn::EntityKind::Segment),
        _ => Err(Error::param("class", "stability is defined for polygon or road spaces")),
    }
}

/// Per-day vectors with running means, so every prefix table comes from one
/// pass over the days.
pub struct Cumulative<'a> {
    pn: &'a PnSpace,
    means: Vec<Vec<f64>>,
}

impl<'a> Cumulative<'a> {
    pub fn new(days: &[MarkedDay], pn: &'a PnSpace, estimator: Estimator) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::Data("no days".into()));
        }
        let vectors = day_vectors(days, pn, estimator)?;
        let mut acc = vec![0.0; pn.len()];
        let means = vectors
            .iter()
            .enumerate()
            .map(|(k, v)| {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
                let d = (k + 1) as f64;
                acc.iter().map(|a| a / d).collect()
            })
            .collect();
        Ok(Self { pn, means })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Table over the first `d` days.
    pub fn table(&self, d: usize) -> TimeUseTable {
        TimeUseTable::from_vector(self.pn, &self.means[d - 1])
    }

    /// Activity-space series at level `c` for one class.
    pub fn series(&self, class: SpaceClass, c: f64) -> Result<StabilitySeries> {
        check_class(class)?;
        let members = (1..=self.len())
            .map(|d| {
                let tables = normalize_by_class(&self.table(d));
                let t = match class {
                    SpaceClass::Polygon => tables.polygons,
                    _ => tables.roads,
                };
                match t {
                    Some(t) => level_space(&t, c, class).map(|s| s.members),
                    None => Ok(Vec::new()),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let last = members.last().expect("nonempty").clone();
        let ratios = members.iter().map(|s| sym_diff_ratio(s, &last)).collect();
        Ok(StabilitySeries {
            class,
            c,
            members,
            ratios,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LctPoint {
    pub class: SpaceClass,
    pub c: f64,
    pub xi: f64,
    pub lct: usize,
}

/// Series for every level, parallel over levels.
pub fn stability_series(
    days: &[MarkedDay],
    pn: &PnSpace,
    estimator: Estimator,
    class: SpaceClass,
    levels: &[f64],
) -> Result<Vec<StabilitySeries>> {
    let cum = Cumulative::new(days, pn, estimator)?;
    levels.par_iter().map(|&c| cum.series(class, c)).collect()
}

/// LCT per coverage level.
pub fn lct_curve(
    days: &[MarkedDay],
    pn: &PnSpace,
    estimator: Estimator,
    class: SpaceClass,
    levels: &[f64],
    xi: f64,
) -> Result<Vec<LctPoint>> {
    stability_series(days, pn, estimator, class, levels)?
        .iter()
        .map(|s| {
            Ok(LctPoint {
                class,
                c: s.c,
                xi,
                lct: s.lct(xi)?,
            })
        })
        .collect()
}

fn class_name(class: SpaceClass) -> &'static str {
    match class {
        SpaceClass::All => "all",
        SpaceClass::Polygon => "polygon",
        SpaceClass::Road => "road",
        SpaceClass::Composed => "composed",
    }
}

/// Rows `class, c, D, ratio`.
pub fn write_series_csv(series: &[StabilitySeries], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["class", "c", "D", "ratio"])?;
    for s in series {
        for (k, r) in s.ratios.iter().enumerate() {
            w.write_record([class_name(s.class).to_string(), s.c.to_string(), (k + 1).to_string(), r.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `class, c, xi, lct`.
pub fn write_lct_csv(points: &[LctPoint], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["class", "c", "xi", "lct"])?;
    for p in points {
        w.write_record([class_name(p.class).to_string(), p.c.to_string(), p.xi.to_string(), p.lct.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_lct_csv(reader: impl std::io::Read) -> Result<Vec<LctPoint>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse("short LCT row".into()));
        let class = match field(0)? {
            "polygon" => SpaceClass::Polygon,
            "road" => SpaceClass::Road,
            other => return Err(Error::Parse(format!("unknown class {other}"))),
        };
        let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|e| Error::Parse(format!("{e}"))) };
        out.push(LctPoint {
            class,
            c: num(1)?,
            xi: num(2)?,
            lct: field(3)?.parse().map_err(|e| Error::Parse(format!("lct: {e}")))?,
        });
    }
    Ok(out)
}
