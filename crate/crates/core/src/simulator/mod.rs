//! Map-based generator of synthetic GPS studies with exact ground truth.
//!
//! A day picks an activity pattern for its day type, draws step durations,
//! lays the steps out on the map as a [`Schedule`], then observes the
//! schedule at generated timestamps with Gaussian location noise. Each
//! `(seed, replicate, day)` triple owns an independent random stream, so
//! days can be generated in any order or in parallel.

mod scenario;
mod timestamps;

pub use scenario::{Action, DayType, Leg, PatternSpec, Scenario, ScenarioFile, Step, TimestampMode};
pub use timestamps::{
    even_timestamps, make_strictly_increasing, realistic_timestamps, silverman_bandwidth,
    ReferenceLibrary,
};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::MarkedDay;
use crate::geometry::{Point2D, Polygon, Polyline};
use crate::ingest::{GpsDay, GpsRecord};
use crate::pn::{EntityKind, PnSpace};

/// Random stream for one simulated day.
pub fn day_rng(seed: u64, replicate: u64, day: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 32) ^ day);
    rng
}

/// Picks a pattern for the day type by its selection probability.
pub fn sample_day_pattern<R: Rng + ?Sized>(
    day_type: DayType,
    patterns: &[PatternSpec],
    rng: &mut R,
) -> Result<usize> {
    let candidates: Vec<usize> = (0..patterns.len())
        .filter(|&i| patterns[i].day_type == day_type)
        .collect();
    if candidates.is_empty() {
        return Err(Error::Data(format!("no pattern for {day_type:?}")));
    }
    let total: f64 = candidates.iter().map(|&i| patterns[i].probability).sum();
    let mut u = rng.random::<f64>() * total;
    for &i in &candidates {
        u -= patterns[i].probability;
        if u < 0.0 {
            return Ok(i);
        }
    }
    Ok(*candidates.last().expect("nonempty"))
}

/// One draw from `N(mean, sd²)` truncated to the open interval
/// `(mean - half_width, mean + half_width)`, by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, half_width: f64, rng: &mut R) -> f64 {
    if sd <= 0.0 || half_width <= 0.0 {
        return mean;
    }
    let normal = Normal::new(mean, sd).expect("positive sd");
    loop {
        let x = normal.sample(rng);
        if x > mean - half_width && x < mean + half_width {
            return x;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Durations {
    /// Day fractions per step, summing to 1.
    pub z: Vec<f64>,
    /// Whole-day redraws caused by a negative remainder.
    pub redraws: u32,
}

/// Step durations as day fractions. The last step takes what is left; a
/// negative remainder redraws the whole day.
pub fn sample_durations<R: Rng + ?Sized>(pattern: &PatternSpec, rng: &mut R) -> Result<Durations> {
    let n = pattern.steps.len();
    let mut redraws = 0;
    loop {
        let mut z: Vec<f64> = pattern.steps[..n - 1]
            .iter()
            .map(|s| truncated_normal(s.mean_hours, s.sd_hours, s.half_width_hours, rng) / 24.0)
            .collect();
        let rest = 1.0 - z.iter().sum::<f64>();
        if rest >= 0.0 {
            z.push(rest);
            return Ok(Durations { z, redraws });
        }
        redraws += 1;
        if redraws > 10_000 {
            return Err(Error::Infeasible(format!(
                "pattern `{}` keeps overrunning the day",
                pattern.name
            )));
        }
    }
}

/// Mean durations (the final step absorbing the rest).
pub fn mean_durations(pattern: &PatternSpec) -> Vec<f64> {
    let n = pattern.steps.len();
    let mut z: Vec<f64> = pattern.steps[..n - 1].iter().map(|s| s.mean_hours / 24.0).collect();
    z.push(1.0 - z.iter().sum::<f64>());
    z
}

/// What happens during a piece of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Motion {
    /// Free movement inside a polygon.
    Stay,
    /// Constant-speed travel along the path, start to end.
    Path(Polyline),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    /// Index into the PN space.
    pub entity: usize,
    pub motion: Motion,
}

/// A day laid out on the map as consecutive pieces covering `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub pieces: Vec<Piece>,
}

enum Anchor<'a> {
    None,
    Point(Point2D),
    Polygons(&'a [Polygon]),
}

impl Anchor<'_> {
    fn distance(&self, p: &Point2D) -> f64 {
        match self {
            Anchor::None => 0.0,
            Anchor::Point(q) => q.distance(p),
            Anchor::Polygons(parts) => parts.iter().map(|g| g.distance(p)).fold(f64::INFINITY, f64::min),
        }
    }
}

impl Schedule {
    /// Lays out `pattern` with step durations `z`.
    ///
    /// Travel time is split between dwell legs (by their shares) and road
    /// segments (by length). Each segment is walked from whichever end lies
    /// closer to where the previous piece finished.
    pub fn build(pattern: &PatternSpec, z: &[f64], pn: &PnSpace) -> Result<Self> {
        if z.len() != pattern.steps.len() {
            return Err(Error::param("z", "one duration per step"));
        }
        let lookup = |id: &crate::pn::EntityId| {
            pn.index_of(id).ok_or_else(|| Error::UnknownEntity(id.0.clone()))
        };
        let mut pieces: Vec<Piece> = Vec::new();
        let mut clock = 0.0;
        let mut anchor = Anchor::None;
        for (step, &dur) in pattern.steps.iter().zip(z) {
            match &step.action {
                Action::Stay { polygon } => {
                    let ix = lookup(polygon)?;
                    push_piece(&mut pieces, clock, clock + dur, ix, Motion::Stay);
                    anchor = Anchor::Polygons(pn.entity(ix).polygons());
                }
                Action::Travel { legs } => {
                    let dwell_share: f64 = legs
                        .iter()
                        .map(|l| match l {
                            Leg::Dwell { share, .. } => *share,
                            Leg::Segment { .. } => 0.0,
                        })
                        .sum();
                    let mut lines = Vec::new();
                    for leg in legs {
                        if let Leg::Segment { id } = leg {
                            let e = pn.entity(lookup(id)?);
                            lines.push(e.as_polyline().expect("validated segment").length());
                        }
                    }
                    let road_len: f64 = lines.iter().sum();
                    let road_time = dur * (1.0 - dwell_share);
                    let mut t = clock;
                    for leg in legs {
                        match leg {
                            Leg::Dwell { id, share } => {
                                let ix = lookup(id)?;
                                push_piece(&mut pieces, t, t + dur * share, ix, Motion::Stay);
                                t += dur * share;
                                anchor = Anchor::Polygons(pn.entity(ix).polygons());
                            }
                            Leg::Segment { id } => {
                                let ix = lookup(id)?;
                                let line = pn.entity(ix).as_polyline().expect("validated segment");
                                let oriented = if anchor.distance(&line.end()) < anchor.distance(&line.start()) {
                                    line.reversed()
                                } else {
                                    line.clone()
                                };
                                let span = road_time * line.length() / road_len;
                                anchor = Anchor::Point(oriented.end());
                                push_piece(&mut pieces, t, t + span, ix, Motion::Path(oriented));
                                t += span;
                            }
                        }
                    }
                }
            }
            clock += dur;
        }
        if let Some(last) = pieces.last_mut() {
            last.end = 1.0;
        }
        Ok(Schedule { pieces })
    }

    /// Index of the piece active at time `t` (pieces are half-open except
    /// the last, which includes 1).
    pub fn piece_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::param("t", "must lie in [0, 1]"));
        }
        let k = self.pieces.partition_point(|p| p.end <= t);
        Ok(k.min(self.pieces.len() - 1))
    }

    /// True position at `t` and the entity occupied.
    ///
    /// During a stay this is a fresh uniform draw inside the polygon; during
    /// travel the point at the elapsed fraction of the path's length.
    pub fn position<R: Rng + ?Sized>(&self, t: f64, pn: &PnSpace, rng: &mut R) -> Result<(Point2D, usize)> {
        let piece = &self.pieces[self.piece_at(t)?];
        let p = match &piece.motion {
            Motion::Stay => uniform_in_polygons(pn.entity(piece.entity).polygons(), rng),
            Motion::Path(line) => {
                let span = piece.end - piece.start;
                let f = if span > 0.0 { (t - piece.start) / span } else { 0.0 };
                line.point_at_fraction(f)
            }
        };
        Ok((p, piece.entity))
    }
}

fn push_piece(pieces: &mut Vec<Piece>, start: f64, end: f64, entity: usize, motion: Motion) {
    if end > start {
        pieces.push(Piece {
            start,
            end,
            entity,
            motion,
        });
    }
}

/// Uniform point in a union of disjoint polygons: pick a part by area, then
/// rejection-sample its bounding box.
pub fn uniform_in_polygons<R: Rng + ?Sized>(parts: &[Polygon], rng: &mut R) -> Point2D {
    let areas: Vec<f64> = parts.iter().map(Polygon::area).collect();
    let total: f64 = areas.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut part = &parts[parts.len() - 1];
    for (p, a) in parts.iter().zip(&areas) {
        if u < *a {
            part = p;
            break;
        }
        u -= a;
    }
    let bb = part.bbox();
    loop {
        let p = Point2D::new(
            bb.min.x + rng.random::<f64>() * bb.width(),
            bb.min.y + rng.random::<f64>() * bb.height(),
        );
        if part.contains(&p) {
            return p;
        }
    }
}

/// Adds independent `N(0, sigma²)` noise to each coordinate.
pub fn add_noise<R: Rng + ?Sized>(points: &[Point2D], sigma: f64, rng: &mut R) -> Result<Vec<Point2D>> {
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", "must be nonnegative"));
    }
    if sigma == 0.0 {
        return Ok(points.to_vec());
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    Ok(points
        .iter()
        .map(|p| Point2D::new(p.x + normal.sample(rng), p.y + normal.sample(rng)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Time share per entity, indexed like the PN space; sums to 1.
    pub occupation: Vec<f64>,
    /// Number of separate visits per entity.
    pub visits: Vec<u32>,
    /// Boundary crossings per entity (an entry and an exit for every visit
    /// that does not touch the start or end of the day).
    pub crossings: Vec<u32>,
}

/// Exact occupation of each entity under a schedule.
pub fn ground_truth(schedule: &Schedule, n_entities: usize) -> GroundTruth {
    let mut occupation = vec![0.0; n_entities];
    let mut visits = vec![0; n_entities];
    let mut crossings = vec![0; n_entities];
    let mut prev: Option<usize> = None;
    for p in &schedule.pieces {
        occupation[p.entity] += p.end - p.start;
        if prev != Some(p.entity) {
            visits[p.entity] += 1;
            if let Some(q) = prev {
                crossings[q] += 1;
                crossings[p.entity] += 1;
            }
        }
        prev = Some(p.entity);
    }
    GroundTruth {
        occupation,
        visits,
        crossings,
    }
}

/// A visit that no observation fell into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissedVisit {
    pub entity: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDay {
    pub day: usize,
    pub pattern: usize,
    pub durations: Durations,
    pub schedule: Schedule,
    pub t: Vec<f64>,
    pub true_points: Vec<Point2D>,
    pub true_entities: Vec<usize>,
    pub observed: Vec<Point2D>,
    pub truth: GroundTruth,
    pub missed_visits: Vec<MissedVisit>,
}

impl SimDay {
    pub fn to_gps(&self) -> GpsDay {
        GpsDay {
            day: self.day as i64,
            records: self
                .t
                .iter()
                .zip(&self.observed)
                .map(|(&t, &point)| GpsRecord {
                    day: self.day as i64,
                    t,
                    point,
                    accuracy: None,
                })
                .collect(),
        }
    }

    pub fn to_marked(&self) -> Result<MarkedDay> {
        MarkedDay::new(self.day as i64, self.t.clone(), self.observed.clone())
    }
}

/// Visits (maximal runs of one entity) containing no observation time.
pub fn missed_visits(schedule: &Schedule, t: &[f64]) -> Vec<MissedVisit> {
    let mut runs: Vec<MissedVisit> = Vec::new();
    for p in &schedule.pieces {
        match runs.last_mut() {
            Some(r) if r.entity == p.entity => r.end = p.end,
            _ => runs.push(MissedVisit {
                entity: p.entity,
                start: p.start,
                end: p.end,
            }),
        }
    }
    let last = runs.len().saturating_sub(1);
    runs.into_iter()
        .enumerate()
        .filter(|(k, r)| {
            let lo = t.partition_point(|&x| x < r.start);
            let seen = if *k == last {
                lo < t.len()
            } else {
                lo < t.len() && t[lo] < r.end
            };
            !seen
        })
        .map(|(_, r)| r)
        .collect()
}

/// Everything needed to simulate days of one study replicate.
pub struct Simulator<'a> {
    pub scenario: &'a Scenario,
    pub pn: &'a PnSpace,
    pub library: Option<&'a ReferenceLibrary>,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario, pn: &'a PnSpace, library: Option<&'a ReferenceLibrary>) -> Result<Self> {
        if scenario.timestamps == TimestampMode::Realistic && library.is_none() {
            return Err(Error::param("library", "realistic timestamps need a reference library"));
        }
        Ok(Self { scenario, pn, library })
    }

    pub fn timestamps<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self.scenario.timestamps {
            TimestampMode::Even => Ok(even_timestamps(self.scenario.m)),
            TimestampMode::Realistic => {
                let lib = self.library.expect("checked in new");
                realistic_timestamps(lib.pick(rng), self.scenario.m, rng)
            }
        }
    }

    pub fn day(&self, replicate: u64, day: usize) -> Result<SimDay> {
        let s = self.scenario;
        let mut rng = day_rng(s.seed, replicate, day as u64);
        let pattern = sample_day_pattern(DayType::of_day(day), &s.patterns, &mut rng)?;
        let durations = sample_durations(&s.patterns[pattern], &mut rng)?;
        let schedule = Schedule::build(&s.patterns[pattern], &durations.z, self.pn)?;
        let t = self.timestamps(&mut rng)?;
        let mut true_points = Vec::with_capacity(t.len());
        let mut true_entities = Vec::with_capacity(t.len());
        for &ti in &t {
            let (p, e) = schedule.position(ti, self.pn, &mut rng)?;
            true_points.push(p);
            true_entities.push(e);
        }
        let observed = add_noise(&true_points, s.sigma, &mut rng)?;
        let truth = ground_truth(&schedule, self.pn.len());
        let missed = missed_visits(&schedule, &t);
        Ok(SimDay {
            day,
            pattern,
            durations,
            schedule,
            t,
            true_points,
            true_entities,
            observed,
            truth,
            missed_visits: missed,
        })
    }

    pub fn study(&self, replicate: u64) -> Result<SimStudy> {
        let days = (0..self.scenario.n_days)
            .into_par_iter()
            .map(|d| self.day(replicate, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimStudy {
            seed: self.scenario.seed,
            replicate,
            days,
        })
    }
}

/// The reference library a scenario uses: synthetic, seeded from the
/// scenario seed, unless the caller supplies one.
pub fn standard_library(scenario: &Scenario) -> ReferenceLibrary {
    let mut rng = day_rng(scenario.seed, u32::MAX as u64, u32::MAX as u64);
    ReferenceLibrary::synthetic(60, scenario.m, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudy {
    pub seed: u64,
    pub replicate: u64,
    pub days: Vec<SimDay>,
}

impl SimStudy {
    pub fn gps_days(&self) -> Vec<GpsDay> {
        self.days.iter().map(SimDay::to_gps).collect()
    }

    pub fn marked_days(&self) -> Result<Vec<MarkedDay>> {
        self.days.iter().map(SimDay::to_marked).collect()
    }

    /// Realized mean occupation over the study's days.
    pub fn realized_truth(&self) -> Vec<f64> {
        let vs: Vec<Vec<f64>> = self.days.iter().map(|d| d.truth.occupation.clone()).collect();
        crate::estimation::mean_vector(&vs)
    }

    /// Ground-truth CSV: one row per (day, entity) with positive time or
    /// crossings.
    pub fn write_truth_csv(&self, pn: &PnSpace, scenario: &Scenario, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["day", "pattern", "entity_id", "kind", "proportion", "visits", "crossings"])?;
        for d in &self.days {
            for (ix, e) in pn.entities().iter().enumerate() {
                let occ = d.truth.occupation[ix];
                if occ == 0.0 && d.truth.crossings[ix] == 0 {
                    continue;
                }
                w.write_record([
                    d.day.to_string(),
                    scenario.patterns[d.pattern].name.clone(),
                    e.id.0.clone(),
                    e.kind().as_str().to_string(),
                    occ.to_string(),
                    d.truth.visits[ix].to_string(),
                    d.truth.crossings[ix].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_missed_visits_csv(&self, pn: &PnSpace, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["day", "entity_id", "start", "end"])?;
        for d in &self.days {
            for v in &d.missed_visits {
                w.write_record([
                    d.day.to_string(),
                    pn.entity(v.entity).id.0.clone(),
                    v.start.to_string(),
                    v.end.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Expected occupation of each entity on a day of the given type.
///
/// Occupation is linear in the step durations and every duration law is
/// symmetric about its mean, so this is the occupation of the mean-duration
/// schedule averaged over the day type's patterns.
pub fn expected_day_truth(scenario: &Scenario, pn: &PnSpace, day_type: DayType) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; pn.len()];
    let total: f64 = scenario
        .patterns
        .iter()
        .filter(|p| p.day_type == day_type)
        .map(|p| p.probability)
        .sum();
    for p in scenario.patterns.iter().filter(|p| p.day_type == day_type) {
        let sched = Schedule::build(p, &mean_durations(p), pn)?;
        let truth = ground_truth(&sched, pn.len());
        for (a, v) in acc.iter_mut().zip(&truth.occupation) {
            *a += p.probability / total * v;
        }
    }
    Ok(acc)
}

/// Expected mean occupation over days `0..n_days` of the scenario calendar.
pub fn expected_truth(scenario: &Scenario, pn: &PnSpace, n_days: usize) -> Result<Vec<f64>> {
    let weekday = expected_day_truth(scenario, pn, DayType::Weekday)?;
    let weekend = expected_day_truth(scenario, pn, DayType::Weekend)?;
    let n_weekday = (0..n_days).filter(|&d| DayType::of_day(d) == DayType::Weekday).count() as f64;
    let n_weekend = n_days as f64 - n_weekday;
    Ok(weekday
        .iter()
        .zip(&weekend)
        .map(|(a, b)| (a * n_weekday + b * n_weekend) / n_days as f64)
        .collect())
}

/// Entities of a kind, as indices.
pub fn indices_of_kind(pn: &PnSpace, kind: EntityKind) -> Vec<usize> {
    (0..pn.len()).filter(|&i| pn.entity(i).kind() == kind).collect()
}
