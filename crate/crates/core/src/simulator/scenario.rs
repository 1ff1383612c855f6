//! Scenario description: the synthetic map, daily activity patterns, and
//! sampling settings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{Point2D, Polygon, Polyline};
use crate::gis;
use crate::pn::{Entity, EntityId, EntityKind, PnSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    /// Days `0..5` of every week are weekdays, `5` and `6` weekend days.
    pub fn of_day(day: usize) -> Self {
        if day % 7 < 5 {
            DayType::Weekday
        } else {
            DayType::Weekend
        }
    }
}

/// One piece of a travel route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Leg {
    /// Traverse a road segment end to end.
    Segment { id: EntityId },
    /// Pause inside a polygon for `share` of the travel step's duration.
    Dwell { id: EntityId, share: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Action {
    Stay { polygon: EntityId },
    Travel { legs: Vec<Leg> },
}

/// A step of an activity pattern; durations in hours.
///
/// Non-final steps draw from a normal law with the given mean and standard
/// deviation truncated to `mean ± half_width`. The final step takes the rest
/// of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub label: String,
    pub action: Action,
    pub mean_hours: f64,
    #[serde(default)]
    pub sd_hours: f64,
    #[serde(default)]
    pub half_width_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub name: String,
    pub day_type: DayType,
    /// Selection probability among patterns of the same day type.
    pub probability: f64,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampMode {
    /// `m` timestamps at `j / (m + 1)`.
    Even,
    /// Resampled from reference days, augmented by a kernel density
    /// estimate when a reference day is short.
    Realistic,
}

/// Scenario as stored on disk. The map is a GeoJSON feature collection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub map: Value,
    #[serde(default = "default_scale")]
    pub meters_per_unit: f64,
    #[serde(default)]
    pub names: BTreeMap<EntityId, String>,
    pub patterns: Vec<PatternSpec>,
    pub n_days: usize,
    pub m: usize,
    pub sigma: f64,
    pub timestamps: TimestampMode,
    pub seed: u64,
}

fn default_scale() -> f64 {
    1.0
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub entities: Vec<Entity>,
    pub meters_per_unit: f64,
    pub names: BTreeMap<EntityId, String>,
    pub patterns: Vec<PatternSpec>,
    pub n_days: usize,
    pub m: usize,
    pub sigma: f64,
    pub timestamps: TimestampMode,
    pub seed: u64,
}

const PROB_TOL: f64 = 1e-9;

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let entities = gis::entities_from_geojson(&file.map.to_string())?;
        let s = Scenario {
            entities,
            meters_per_unit: file.meters_per_unit,
            names: file.names,
            patterns: file.patterns,
            n_days: file.n_days,
            m: file.m,
            sigma: file.sigma,
            timestamps: file.timestamps,
            seed: file.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            map: gis::entities_to_geojson(&self.entities),
            meters_per_unit: self.meters_per_unit,
            names: self.names.clone(),
            patterns: self.patterns.clone(),
            n_days: self.n_days,
            m: self.m,
            sigma: self.sigma,
            timestamps: self.timestamps,
            seed: self.seed,
        }
    }

    pub fn pn_space(&self) -> Result<PnSpace> {
        PnSpace::new(self.entities.clone(), self.meters_per_unit)
    }

    pub fn validate(&self) -> Result<()> {
        let pn = self.pn_space()?;
        if self.n_days == 0 {
            return Err(Error::param("n_days", "must be positive"));
        }
        if self.m < 1 {
            return Err(Error::param("m", "must be positive"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param("sigma", "must be finite and nonnegative"));
        }
        let kind_of = |id: &EntityId| -> Result<EntityKind> {
            pn.index_of(id)
                .map(|ix| pn.entity(ix).kind())
                .ok_or_else(|| Error::UnknownEntity(id.0.clone()))
        };
        let mut totals: BTreeMap<DayType, f64> = BTreeMap::new();
        for p in &self.patterns {
            if !(p.probability >= 0.0) {
                return Err(Error::param("probability", format!("pattern `{}`", p.name)));
            }
            *totals.entry(p.day_type).or_default() += p.probability;
            if p.steps.is_empty() {
                return Err(Error::Data(format!("pattern `{}` has no steps", p.name)));
            }
            let last = p.steps.len() - 1;
            for (k, step) in p.steps.iter().enumerate() {
                let where_ = || format!("pattern `{}` step `{}`", p.name, step.label);
                if k < last {
                    let lo = step.mean_hours - step.half_width_hours;
                    if !(lo > 0.0 && step.sd_hours >= 0.0 && step.half_width_hours >= 0.0) {
                        return Err(Error::Data(format!(
                            "{}: duration window must be positive",
                            where_()
                        )));
                    }
                }
                match &step.action {
                    Action::Stay { polygon } => {
                        if kind_of(polygon)? != EntityKind::Polygon {
                            return Err(Error::Data(format!("{}: `{polygon}` is not a polygon", where_())));
                        }
                    }
                    Action::Travel { legs } => {
                        if legs.is_empty() {
                            return Err(Error::Data(format!("{}: empty route", where_())));
                        }
                        let mut share = 0.0;
                        let mut segments = 0;
                        for leg in legs {
                            match leg {
                                Leg::Segment { id } => {
                                    segments += 1;
                                    if kind_of(id)? != EntityKind::Segment {
                                        return Err(Error::Data(format!("{}: `{id}` is not a segment", where_())));
                                    }
                                }
                                Leg::Dwell { id, share: s } => {
                                    share += s;
                                    if kind_of(id)? != EntityKind::Polygon || !(*s > 0.0) {
                                        return Err(Error::Data(format!("{}: bad dwell leg", where_())));
                                    }
                                }
                            }
                        }
                        if segments == 0 || share >= 1.0 {
                            return Err(Error::Data(format!(
                                "{}: route needs a segment and dwell shares below 1",
                                where_()
                            )));
                        }
                    }
                }
            }
        }
        for day_type in [DayType::Weekday, DayType::Weekend] {
            let total = totals.get(&day_type).copied().unwrap_or(0.0);
            let needed = (0..self.n_days.min(7)).any(|d| DayType::of_day(d) == day_type);
            if needed && (total - 1.0).abs() > PROB_TOL {
                return Err(Error::Data(format!(
                    "{day_type:?} pattern probabilities sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }

    pub fn display_name(&self, id: &EntityId) -> String {
        self.names.get(id).cloned().unwrap_or_else(|| id.0.clone())
    }

    /// The built-in six-polygon, twelve-segment map with its five patterns.
    pub fn standard() -> Self {
        let (entities, names) = standard_map();
        Scenario {
            entities,
            meters_per_unit: 1.0,
            names,
            patterns: standard_patterns(),
            n_days: 90,
            m: 479,
            sigma: 0.1,
            timestamps: TimestampMode::Realistic,
            seed: 1,
        }
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::from_exterior(vec![
        Point2D::new(x0, y0),
        Point2D::new(x1, y0),
        Point2D::new(x1, y1),
        Point2D::new(x0, y1),
    ])
}

fn road(id: &str, a: (f64, f64), b: (f64, f64)) -> Entity {
    Entity::segment(id, Polyline::new(vec![a.into(), b.into()]))
}

fn standard_map() -> (Vec<Entity>, BTreeMap<EntityId, String>) {
    let polygons = [
        ("P1", "home", rect(-0.5, -0.5, 0.5, 0.5)),
        ("P2", "restaurant", rect(3.6, -1.0, 4.4, -0.2)),
        ("P3", "office", rect(3.5, 0.5, 4.5, 1.5)),
        ("P4", "supermarket", rect(1.0, -3.0, 2.0, -2.0)),
        ("P5", "beach", rect(-3.5, -1.0, -2.0, 1.0)),
        ("P6", "park", rect(0.8, 2.0, 2.2, 3.0)),
    ];
    let junctions = [(1.5, 0.0), (2.5, 1.0), (2.5, -0.5), (1.5, 1.5), (1.5, -1.5)];
    let [j1, j2, j3, j4, j5] = junctions;
    let mut entities: Vec<Entity> = Vec::new();
    let mut names = BTreeMap::new();
    for (id, name, poly) in polygons {
        entities.push(Entity::polygon(id, poly));
        names.insert(EntityId::from(id), name.to_string());
    }
    entities.extend([
        road("S1", j4, (1.5, 2.0)),
        road("S2", j1, j4),
        road("S3", (0.5, 0.0), j1),
        road("S4", (3.6, -0.6), j3),
        road("S5", j3, j1),
        road("S6", (4.0, 0.5), (4.0, -0.2)),
        road("S7", j2, j3),
        road("S8", j2, (3.5, 1.0)),
        road("S9", j1, j2),
        road("S10", j1, j5),
        road("S11", j5, (1.5, -2.0)),
        road("S12", (-0.5, 0.0), (-2.0, 0.0)),
    ]);
    (entities, names)
}

fn seg(id: &str) -> Leg {
    Leg::Segment { id: id.into() }
}

fn route(ids: &[&str]) -> Action {
    Action::Travel {
        legs: ids.iter().map(|id| seg(id)).collect(),
    }
}

fn stay(id: &str) -> Action {
    Action::Stay { polygon: id.into() }
}

fn step(label: &str, action: Action, mean: f64, sd: f64, half_width: f64) -> Step {
    Step {
        label: label.to_string(),
        action,
        mean_hours: mean,
        sd_hours: sd,
        half_width_hours: half_width,
    }
}

fn last(label: &str, action: Action, mean: f64) -> Step {
    step(label, action, mean, 0.0, 0.0)
}

fn park_loop() -> Action {
    Action::Travel {
        legs: vec![
            seg("S3"),
            seg("S2"),
            seg("S1"),
            Leg::Dwell {
                id: "P6".into(),
                share: 0.5,
            },
            seg("S1"),
            seg("S2"),
            seg("S3"),
        ],
    }
}

fn standard_patterns() -> Vec<PatternSpec> {
    let to_office = || route(&["S3", "S9", "S8"]);
    let to_home = || route(&["S8", "S7", "S5", "S3"]);
    let cafe_hop = || route(&["S6"]);
    vec![
        PatternSpec {
            name: "pattern 1".into(),
            day_type: DayType::Weekday,
            probability: 0.75,
            steps: vec![
                step("at home", stay("P1"), 9.0, 0.15, 0.5),
                step("home to office", to_office(), 0.5, 0.08, 0.25),
                step("at office", stay("P3"), 2.5, 0.15, 0.5),
                step("office to cafe", cafe_hop(), 0.1, 0.03, 0.05),
                step("at cafe", stay("P2"), 0.5, 0.15, 0.05),
                step("cafe to office", cafe_hop(), 0.1, 0.03, 0.05),
                step("at office", stay("P3"), 4.8, 0.15, 0.5),
                step("office to home", to_home(), 0.6, 0.08, 0.25),
                step("at home", stay("P1"), 2.0, 0.2, 0.6),
                step("park loop", park_loop(), 1.0, 0.06, 0.15),
                last("at home", stay("P1"), 2.9),
            ],
        },
        PatternSpec {
            name: "pattern 2".into(),
            day_type: DayType::Weekday,
            probability: 0.25,
            steps: vec![
                step("at home", stay("P1"), 8.5, 0.15, 0.5),
                step("home to office", to_office(), 0.5, 0.08, 0.25),
                step("at office", stay("P3"), 3.0, 0.15, 0.5),
                step("office to cafe", cafe_hop(), 0.1, 0.03, 0.05),
                step("at cafe", stay("P2"), 0.5, 0.15, 0.05),
                step("cafe to office", cafe_hop(), 0.1, 0.03, 0.05),
                step("at office", stay("P3"), 4.3, 0.15, 0.5),
                step("office to restaurant", cafe_hop(), 0.75, 0.08, 0.25),
                step("at restaurant", stay("P2"), 1.0, 0.08, 0.25),
                step("restaurant to home", route(&["S4", "S5", "S3"]), 0.4, 0.08, 0.25),
                step("at home", stay("P1"), 0.95, 0.1, 0.3),
                step("park loop", park_loop(), 1.0, 0.06, 0.15),
                last("at home", stay("P1"), 2.9),
            ],
        },
        PatternSpec {
            name: "pattern 3".into(),
            day_type: DayType::Weekend,
            probability: 0.5,
            steps: vec![
                step("at home", stay("P1"), 11.0, 0.3, 1.0),
                step("home to supermarket", route(&["S3", "S10", "S11"]), 0.75, 0.15, 0.45),
                step("at supermarket", stay("P4"), 2.5, 0.3, 1.0),
                step("supermarket to home", route(&["S11", "S10", "S3"]), 0.75, 0.15, 0.45),
                last("at home", stay("P1"), 9.0),
            ],
        },
        PatternSpec {
            name: "pattern 4".into(),
            day_type: DayType::Weekend,
            probability: 0.125,
            steps: vec![
                step("at home", stay("P1"), 10.0, 0.3, 1.0),
                step("home to beach", route(&["S12"]), 0.8, 0.3, 0.7),
                step("at beach", stay("P5"), 5.7, 0.35, 1.0),
                step("beach to home", route(&["S12"]), 0.8, 0.3, 0.7),
                last("at home", stay("P1"), 6.7),
            ],
        },
        PatternSpec {
            name: "pattern 5".into(),
            day_type: DayType::Weekend,
            probability: 0.375,
            steps: vec![last("at home", stay("P1"), 24.0)],
        },
    ]
}
