//! Subcommand pipelines. Each writes its outputs and a manifest into the
//! output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use actspace::activity_space::{composed_space, level_space, weighted_level_space, SpaceClass};
use actspace::clustering::{
    day_patterns, distance_matrix, flag_outliers, read_labels_csv, single_linkage, write_labels_csv,
    write_patterns_csv, Cut, Dendrogram, MatchCost, DEFAULT_OUTLIER_ALPHA,
};
use actspace::estimation::{compute_marks, estimate, mark_and_assign, normalize_by_class, Estimator, MarkedDay};
use actspace::eval::{convergence_check, run_comparison, ExperimentGrid};
use actspace::gis::{read_layer, write_geojson};
use actspace::ingest::{
    aggregate_polygons, bounding_box_search, parse_gps, privacy_reshape_polygons, privacy_thin_roads,
    road_coverage, select_polygons, thin_secondary_layer, write_gps_csv, GpsDay, ParsedGps,
};
use actspace::plot;
use actspace::simulator::{standard_library, Scenario, Simulator, TimestampMode};
use actspace::stability::{read_lct_csv, stability_series, write_lct_csv, write_series_csv, LctPoint};
use actspace::{Entity, EntityKind, Error, PnSpace, TimeUseTable};
use anyhow::Context;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{required, RunConfig};
use crate::UsageError;

/// Map-unit defaults for degree-scaled GIS data.
const DEFAULT_THETA: f64 = 0.05;
const DEFAULT_R: f64 = 0.001;
const DEFAULT_D0: f64 = 0.00135;
const DEFAULT_CUTOFF: f64 = 0.001;
const DEFAULT_R0: f64 = 0.00045;
const DEFAULT_Q: f64 = 0.85;
const DEFAULT_SIDE: f64 = 0.0005;
const DEFAULT_TAU: f64 = 0.01;
const DEFAULT_K: usize = 5;

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf) -> anyhow::Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.dir.join(name);
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(&path).map_err(Error::from)?))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    fn text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        fs::write(self.dir.join(name), text).map_err(Error::from)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn manifest(mut self, command: &str, cfg: &RunConfig, seed: Option<u64>) -> anyhow::Result<()> {
        let canonical = serde_json::to_string(cfg)?;
        let hash: String = Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        let outputs = std::mem::take(&mut self.files);
        self.json(
            "manifest.json",
            &json!({
                "command": command,
                "config": cfg,
                "config_sha256": hash,
                "seed": seed,
                "versions": { "actspace": env!("CARGO_PKG_VERSION") },
                "outputs": outputs,
            }),
        )
    }
}

pub fn run(command: &str, cfg: &RunConfig) -> anyhow::Result<()> {
    let mut out = Outputs::new(cfg.out_dir())?;
    let seed = match command {
        "ingest" => ingest(cfg, &mut out).map(|_| None),
        "estimate" => estimate_cmd(cfg, &mut out).map(|_| None),
        "activity-space" => activity_space(cfg, &mut out).map(|_| None),
        "cluster" => cluster(cfg, &mut out).map(|_| None),
        "stability" => stability(cfg, &mut out).map(|_| None),
        "simulate" => simulate(cfg, &mut out).map(Some),
        "evaluate" => evaluate(cfg, &mut out).map(Some),
        "privacy-render" => privacy_render(cfg, &mut out).map(Some),
        "plot" => plot_cmd(cfg, &mut out).map(|_| None),
        other => Err(UsageError(format!("unknown command {other}")).into()),
    }?;
    out.manifest(command, cfg, seed)
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path)
        .map_err(Error::from)
        .with_context(|| format!("opening {}", path.display()))
}

fn read_gps(path: &Path) -> anyhow::Result<ParsedGps> {
    let parsed = parse_gps(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    for d in &parsed.diagnostics {
        log::warn!("{d}");
    }
    if parsed.days.is_empty() {
        return Err(Error::Data(format!("{} holds no usable days", path.display())).into());
    }
    Ok(parsed)
}

fn read_entities(path: &Path) -> anyhow::Result<Vec<Entity>> {
    read_layer(path).with_context(|| format!("reading {}", path.display()))
}

fn load_days(cfg: &RunConfig) -> anyhow::Result<(PnSpace, Vec<MarkedDay>)> {
    let entities = read_entities(required(&cfg.entities, "entities")?)?;
    let pn = PnSpace::new(entities, 1.0)?;
    let gps = read_gps(required(&cfg.gps, "gps")?)?;
    let days = mark_and_assign(&gps.days, &pn)?;
    Ok((pn, days))
}

fn estimator(cfg: &RunConfig, default: &str) -> anyhow::Result<Estimator> {
    let name = cfg.mode.as_deref().unwrap_or(default);
    if cfg.epsilon.is_some() && name != "adjusted" {
        log::warn!("--epsilon only affects the adjusted estimator");
    }
    let eps = cfg.epsilon.unwrap_or(actspace::estimation::DEFAULT_ADJUST_THRESHOLD);
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: "must be nonnegative".into() }.into());
    }
    Ok(Estimator::parse(name, Some(eps))?)
}

fn ingest(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let gps = read_gps(required(&cfg.gps, "gps")?)?;
    let layers = cfg
        .gis
        .as_ref()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| UsageError("missing required input --gis".into()))?;
    let theta = cfg.theta.unwrap_or(DEFAULT_THETA);
    let r = cfg.r.unwrap_or(DEFAULT_R);
    let d0 = cfg.d0.unwrap_or(DEFAULT_D0);
    let cutoff = cfg.cutoff.unwrap_or(DEFAULT_CUTOFF);

    let mut points = Vec::new();
    let mut weights = Vec::new();
    for day in &gps.days {
        points.extend(day.points());
        weights.extend(compute_marks(&day.times())?);
    }
    let search = bounding_box_search(&points, Some(&weights), theta, r)?;
    let kept: Vec<GpsDay> = gps
        .days
        .iter()
        .map(|d| GpsDay {
            day: d.day,
            records: d.records.iter().filter(|rec| search.bbox.contains(&rec.point)).cloned().collect(),
        })
        .filter(|d| !d.records.is_empty())
        .collect();
    let kept_points: Vec<_> = kept.iter().flat_map(|d| d.points()).collect();
    if kept_points.is_empty() {
        return Err(Error::Data("no records inside the study box".into()).into());
    }

    let mut polygons = Vec::new();
    let mut roads: Vec<Entity> = Vec::new();
    let mut coverage = Vec::new();
    for path in layers {
        let layer = read_entities(path)?;
        let (p, s): (Vec<Entity>, Vec<Entity>) = layer.into_iter().partition(|e| e.kind() == EntityKind::Polygon);
        polygons.extend(p);
        if !s.is_empty() {
            roads.extend(s);
            coverage.push(json!({
                "layer": path.display().to_string(),
                "cumulative_coverage": road_coverage(&kept_points, &roads, d0)?,
            }));
        }
    }
    let selected = select_polygons(&kept_points, &polygons, d0)?;
    let aggregated = aggregate_polygons(&selected, cutoff)?;
    let mut entities = aggregated.clone();
    entities.extend(roads);
    PnSpace::new(entities.clone(), 1.0)?;

    write_gps_csv(&kept, out.create("gps_clean.csv")?)?;
    write_geojson(out.dir.join("entities.geojson"), &entities)?;
    out.files.push("entities.geojson".into());
    out.json(
        "ingest_report.json",
        &json!({
            "records_read": gps.record_count(),
            "records_kept": kept_points.len(),
            "days": kept.len(),
            "diagnostics": gps.diagnostics,
            "bounding_box": search.bbox,
            "box_weight_fraction": search.fraction,
            "road_coverage": coverage,
            "polygons_selected": selected.len(),
            "polygons_after_aggregation": aggregated.len(),
        }),
    )
}

fn estimate_cmd(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let est = estimator(cfg, "weighted")?;
    let (pn, days) = load_days(cfg)?;
    let table = estimate(&days, &pn, est)?;
    table.write_csv(out.create("time_use.csv")?)?;
    let classes = normalize_by_class(&table);
    if let Some(t) = &classes.polygons {
        t.write_csv(out.create("time_use_polygons.csv")?)?;
    }
    if let Some(t) = &classes.roads {
        t.write_csv(out.create("time_use_roads.csv")?)?;
    }
    Ok(())
}

fn parse_class(s: &str) -> anyhow::Result<SpaceClass> {
    Ok(match s {
        "all" => SpaceClass::All,
        "polygon" => SpaceClass::Polygon,
        "road" => SpaceClass::Road,
        "composed" => SpaceClass::Composed,
        other => return Err(UsageError(format!("unknown class {other}")).into()),
    })
}

fn class_table(table: &TimeUseTable, class: SpaceClass) -> anyhow::Result<TimeUseTable> {
    let classes = normalize_by_class(table);
    let t = match class {
        SpaceClass::All => Some(table.clone()),
        SpaceClass::Polygon => classes.polygons,
        SpaceClass::Road => classes.roads,
        SpaceClass::Composed => unreachable!("handled by the caller"),
    };
    t.ok_or_else(|| Error::Data(format!("the table has no {class:?} time")).into())
}

fn activity_space(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let path = required(&cfg.table, "table")?;
    let table = TimeUseTable::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    let gammas = cfg.gamma.clone().unwrap_or_else(|| vec![0.5, 0.8, 0.9, 0.95]);
    let class = parse_class(cfg.class.as_deref().unwrap_or("all"))?;
    if cfg.weighted.unwrap_or(false) {
        if class == SpaceClass::Composed {
            return Err(UsageError("weighted spaces are not defined for the composed class".into()).into());
        }
        let entities = read_entities(required(&cfg.entities, "entities")?)?;
        let t = class_table(&table, class)?;
        let weights = t
            .entries
            .iter()
            .map(|e| {
                entities
                    .iter()
                    .find(|x| x.id == e.id)
                    .map(|x| x.weight)
                    .ok_or_else(|| Error::UnknownEntity(e.id.0.clone()))
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        let spaces = gammas
            .iter()
            .map(|&g| weighted_level_space(&t, &weights, g))
            .collect::<Result<Vec<_>, Error>>()?;
        return out.json("activity_space.json", &spaces);
    }
    let spaces = gammas
        .iter()
        .map(|&g| match class {
            SpaceClass::Composed => Ok(composed_space(&normalize_by_class(&table), g)?),
            c => Ok(level_space(&class_table(&table, c)?, g, c)?),
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    out.json("activity_space.json", &spaces)
}

fn cluster(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let (pn, days) = load_days(cfg)?;
    let tau = cfg.tau.unwrap_or(DEFAULT_TAU);
    let eps = cfg.epsilon.unwrap_or(actspace::estimation::DEFAULT_ADJUST_THRESHOLD);
    let match_cost = match cfg.match_cost.as_deref().unwrap_or("zero") {
        "zero" => MatchCost::Zero,
        "dwell-difference" => MatchCost::DwellDifference,
        other => return Err(UsageError(format!("unknown match cost {other}")).into()),
    };
    let cut = match (cfg.k, cfg.height) {
        (Some(_), Some(_)) => return Err(UsageError("give either k or height, not both".into()).into()),
        (_, Some(h)) => Cut::Height(h),
        (k, None) => Cut::Clusters(k.unwrap_or(DEFAULT_K).min(days.len())),
    };
    let patterns = day_patterns(&days, &pn, (eps > 0.0).then_some(eps), tau)?;
    let matrix = distance_matrix(&patterns, match_cost)?;
    let (labels, tree) = single_linkage(&matrix, cut)?;
    let outliers = if patterns.len() >= 3 {
        flag_outliers(&matrix, cfg.alpha.unwrap_or(DEFAULT_OUTLIER_ALPHA))?
    } else {
        vec![false; patterns.len()]
    };
    let day_ids: Vec<i64> = patterns.iter().map(|p| p.day).collect();
    write_patterns_csv(&patterns, out.create("patterns.csv")?)?;
    matrix.write_csv(&day_ids, out.create("distance_matrix.csv")?)?;
    let mut tree_json = tree.to_json()?;
    tree_json.push('\n');
    out.text("merge_tree.json", &tree_json)?;
    write_labels_csv(&day_ids, &labels, &outliers, out.create("labels.csv")?)?;
    Ok(())
}

fn stability(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let est = estimator(cfg, "weighted")?;
    let (pn, days) = load_days(cfg)?;
    let classes = match cfg.class.as_deref() {
        None => vec![SpaceClass::Polygon, SpaceClass::Road],
        Some(c) => vec![parse_class(c)?],
    };
    let levels = cfg
        .levels
        .clone()
        .unwrap_or_else(|| (1..=20).map(|k| k as f64 / 20.0).collect());
    let xi = cfg.xi.unwrap_or(0.0);
    let mut series = Vec::new();
    let mut points = Vec::new();
    for class in classes {
        let kind = if class == SpaceClass::Road { EntityKind::Segment } else { EntityKind::Polygon };
        if !pn.entities().iter().any(|e| e.kind() == kind) {
            continue;
        }
        for s in stability_series(&days, &pn, est, class, &levels)? {
            points.push(LctPoint {
                class,
                c: s.c,
                xi,
                lct: s.lct(xi)?,
            });
            series.push(s);
        }
    }
    write_series_csv(&series, out.create("stability_series.csv")?)?;
    write_lct_csv(&points, out.create("lct.csv")?)?;
    Ok(())
}

fn parse_mode(s: &str) -> anyhow::Result<TimestampMode> {
    match s {
        "even" => Ok(TimestampMode::Even),
        "realistic" => Ok(TimestampMode::Realistic),
        other => Err(UsageError(format!("unknown timestamp mode {other}")).into()),
    }
}

fn single<T: Copy>(v: &Option<Vec<T>>, flag: &str) -> anyhow::Result<Option<T>> {
    match v.as_deref() {
        None => Ok(None),
        Some([x]) => Ok(Some(*x)),
        Some(_) => Err(UsageError(format!("--{flag} takes a single value here")).into()),
    }
}

fn load_scenario(cfg: &RunConfig) -> anyhow::Result<Scenario> {
    match &cfg.scenario {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(Error::from)
                .with_context(|| format!("reading {}", p.display()))?;
            Scenario::from_json(&text).with_context(|| format!("scenario {}", p.display()))
        }
        None => Ok(Scenario::standard()),
    }
}

fn simulate(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<u64> {
    let mut s = load_scenario(cfg)?;
    if let Some(n) = single(&cfg.n, "n")? {
        s.n_days = n;
    }
    if let Some(m) = single(&cfg.m, "m")? {
        s.m = m;
    }
    if let Some(sigma) = cfg.sigma {
        s.sigma = sigma;
    }
    if let Some(seed) = cfg.seed {
        s.seed = seed;
    }
    if let Some(t) = cfg.timestamps.as_deref() {
        match t {
            [t] => s.timestamps = parse_mode(t)?,
            _ => return Err(UsageError("--timestamps takes a single value here".into()).into()),
        }
    }
    s.validate()?;
    let pn = s.pn_space()?;
    let library = standard_library(&s);
    let study = Simulator::new(&s, &pn, Some(&library))?.study(0)?;
    write_gps_csv(&study.gps_days(), out.create("gps.csv")?)?;
    study.write_truth_csv(&pn, &s, out.create("truth.csv")?)?;
    study.write_missed_visits_csv(&pn, out.create("missed_visits.csv")?)?;
    write_geojson(out.dir.join("entities.geojson"), &s.entities)?;
    out.files.push("entities.geojson".into());
    out.json("scenario.json", &s.to_file())?;
    Ok(s.seed)
}

fn evaluate(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<u64> {
    let base = load_scenario(cfg)?;
    let defaults = ExperimentGrid::default();
    let grid = ExperimentGrid {
        ns: cfg.n.clone().unwrap_or(defaults.ns),
        ms: cfg.m.clone().unwrap_or(defaults.ms),
        modes: match &cfg.timestamps {
            Some(v) => v.iter().map(|t| parse_mode(t)).collect::<anyhow::Result<_>>()?,
            None => defaults.modes,
        },
        epsilons: vec![cfg.epsilon.unwrap_or(actspace::estimation::DEFAULT_ADJUST_THRESHOLD)],
        sigma: cfg.sigma.unwrap_or(defaults.sigma),
        replicates: cfg.replicates.unwrap_or(defaults.replicates),
        seed: cfg.seed.unwrap_or(defaults.seed),
    };
    grid.validate()?;
    if cfg.convergence.unwrap_or(false) && grid.ns.len() < 3 {
        return Err(UsageError("--convergence needs at least three values of --n".into()).into());
    }
    let res = run_comparison(&base, &grid)?;
    res.write_results_csv(out.create("results.csv")?)?;
    res.write_crossings_csv(out.create("crossings.csv")?)?;
    if cfg.convergence.unwrap_or(false) {
        let s = Scenario {
            m: grid.ms[0],
            sigma: grid.sigma,
            timestamps: grid.modes[0],
            seed: grid.seed,
            ..base
        };
        let conv = convergence_check(&s, &grid.ns, Estimator::Weighted, grid.replicates)?;
        out.json("convergence.json", &conv)?;
    }
    Ok(grid.seed)
}

fn privacy_render(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<u64> {
    let entities = read_entities(required(&cfg.entities, "entities")?)?;
    let points = read_gps(required(&cfg.gps, "gps")?)?.all_points();
    let r0 = cfg.r0.unwrap_or(DEFAULT_R0);
    let q = cfg.q.unwrap_or(DEFAULT_Q);
    let side = cfg.side.unwrap_or(DEFAULT_SIDE);
    let seed = cfg.seed.unwrap_or(0);
    let (polygons, roads): (Vec<Entity>, Vec<Entity>) =
        entities.into_iter().partition(|e| e.kind() == EntityKind::Polygon);
    let thinning = privacy_thin_roads(&roads, &points, r0, q, seed)?;
    thinning.write_csv(out.create("road_thinning.csv")?)?;
    write_geojson(out.dir.join("display_roads.geojson"), &thinning.displayed)?;
    out.files.push("display_roads.geojson".into());
    if let Some(path) = &cfg.secondary {
        let layer = read_entities(path)?;
        let tol = cfg.overlap_tol.unwrap_or(r0 / 10.0);
        let second = thin_secondary_layer(&layer, &roads, &thinning, &points, r0, q, tol, seed)?;
        second.write_csv(out.create("secondary_thinning.csv")?)?;
        write_geojson(out.dir.join("display_secondary.geojson"), &second.displayed)?;
        out.files.push("display_secondary.geojson".into());
    }
    let squares = privacy_reshape_polygons(&polygons, side)?;
    write_geojson(out.dir.join("display_polygons.geojson"), &squares)?;
    out.files.push("display_polygons.geojson".into());
    Ok(seed)
}

fn plot_cmd(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let mut drew = false;
    if let Some(path) = &cfg.table {
        let table = TimeUseTable::read_csv(open(path)?)?;
        out.text("time_use_bars.svg", &plot::time_use_bars(&table, "log(1 + p) by entity"))?;
        if let Some(e) = &cfg.entities {
            let entities = read_entities(e)?;
            out.text("time_use_map.svg", &plot::time_use_map(&entities, &table, "log(1 + p)"))?;
        }
        drew = true;
    }
    if let Some(path) = &cfg.tree {
        let tree = Dendrogram::from_json(&fs::read_to_string(path).map_err(Error::from)?)?;
        let (names, labels): (Vec<String>, Option<Vec<usize>>) = match &cfg.labels {
            Some(l) => {
                let (days, labels, _) = read_labels_csv(open(l)?)?;
                (days.iter().map(|d| d.to_string()).collect(), Some(labels))
            }
            None => ((0..tree.n).map(|i| i.to_string()).collect(), None),
        };
        if labels.as_ref().is_some_and(|l| l.len() != tree.n) {
            return Err(Error::Data("labels and merge tree disagree on the number of days".into()).into());
        }
        out.text("dendrogram.svg", &plot::dendrogram(&tree, &names, labels.as_deref(), "single linkage"))?;
        drew = true;
    }
    if let Some(path) = &cfg.lct {
        let points = read_lct_csv(open(path)?)?;
        out.text("lct_curves.svg", &plot::lct_curves(&points, None, "last-crossing time"))?;
        drew = true;
    }
    if !drew {
        return Err(UsageError("plot needs at least one of --table, --tree, --lct".into()).into());
    }
    Ok(())
}
