//! Acceptance suite. Runs every criterion, prints one line each and exits
//! nonzero if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use actspace::activity_space::{level_space, weighted_level_space, SpaceClass};
use actspace::clustering::{
    adjusted_rand_index, day_patterns, distance_matrix, single_linkage, tw_edit_distance, Cut, DayPattern, MatchCost,
};
use actspace::estimation::{assign, compute_marks, estimate, mark_and_assign, normalize_by_class, Estimator, MarkedDay};
use actspace::eval::{convergence_check, rmise_from_errors, run_cell, run_comparison, ExperimentGrid};
use actspace::geometry::{Point2D, Polygon, Polyline};
use actspace::ingest::{parse_gps, write_gps_csv};
use actspace::pn::{distance_point_to_entity, Entity, EntityId, EntityKind, PnSpace};
use actspace::simulator::{standard_library, DayType, Scenario, Simulator, TimestampMode};
use actspace::stability::{write_series_csv, Cumulative};
use actspace::{TimeUseEntry, TimeUseTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_times(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let mut t: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        t.sort_by(f64::total_cmp);
        if t.windows(2).all(|w| w[1] > w[0]) {
            return t;
        }
    }
}

fn c1_marks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.random_range(2..=50);
        let w = compute_marks(&random_times(&mut rng, m)).expect("valid times");
        worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
    }
    outcome(worst <= 1e-12, format!("1000 days, max |sum W - 1| = {worst:.2e}"))
}

fn comparison(mode: TimestampMode) -> (f64, f64, f64, f64, f64, f64) {
    let grid = ExperimentGrid {
        ns: vec![30],
        ms: vec![479],
        modes: vec![mode],
        epsilons: vec![0.1],
        sigma: 0.1,
        replicates: 50,
        seed: 2024,
    };
    let res = run_comparison(&Scenario::standard(), &grid).expect("comparison runs");
    let r = &res.rows[0];
    (
        r.naive.value,
        r.weighted.value,
        r.adjusted.value,
        r.naive.se,
        r.weighted.se,
        r.adjusted.se,
    )
}

fn c2_realistic() -> Outcome {
    let (naive, weighted, adjusted, ..) = comparison(TimestampMode::Realistic);
    let ratio = naive / weighted;
    outcome(
        ratio >= 3.0 && adjusted <= weighted,
        format!("naive {naive:.4}, weighted {weighted:.4}, adjusted {adjusted:.4}, naive/weighted {ratio:.2}"),
    )
}

fn c3_even() -> Outcome {
    let (naive, weighted, adjusted, _, se_w, _) = comparison(TimestampMode::Even);
    outcome(
        (naive - weighted).abs() <= 0.01 && adjusted <= weighted + 2.0 * se_w,
        format!("naive {naive:.4}, weighted {weighted:.4} (se {se_w:.4}), adjusted {adjusted:.4}"),
    )
}

fn c4_convergence() -> Outcome {
    let base = Scenario {
        m: 1439,
        sigma: 0.01,
        timestamps: TimestampMode::Even,
        seed: 2024,
        ..Scenario::standard()
    };
    let c = convergence_check(&base, &[7, 30, 90], Estimator::Weighted, 50).expect("convergence runs");
    let values: Vec<String> = c.rmise.iter().map(|r| format!("{:.4}", r.value)).collect();
    outcome(
        (-0.65..=-0.35).contains(&c.slope),
        format!("RMISE at n=7,30,90: {}; slope {:.3}", values.join(", "), c.slope),
    )
}

fn pattern(labels: &[usize], z: &[f64]) -> DayPattern {
    DayPattern {
        day: 0,
        labels: labels.iter().map(|l| EntityId::new(format!("E{l}"))).collect(),
        z: z.to_vec(),
    }
}

#[derive(Clone, Copy)]
enum Op {
    Delete,
    Insert,
    Pair,
}

/// Every edit script turning a sequence of length `n` into one of length `m`.
fn scripts(n: usize, m: usize) -> Vec<Vec<Op>> {
    if n == 0 && m == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut extend = |op: Op, rest: Vec<Vec<Op>>| {
        for mut s in rest {
            s.insert(0, op);
            out.push(s);
        }
    };
    if n > 0 {
        extend(Op::Delete, scripts(n - 1, m));
    }
    if m > 0 {
        extend(Op::Insert, scripts(n, m - 1));
    }
    if n > 0 && m > 0 {
        extend(Op::Pair, scripts(n - 1, m - 1));
    }
    out
}

/// Applies a script to `a`, checks the result spells `b`, and returns its cost.
fn script_cost(a: &DayPattern, b: &DayPattern, script: &[Op]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut cost = 0.0;
    let mut produced = Vec::new();
    for op in script {
        match op {
            Op::Delete => {
                cost += a.z[i];
                i += 1;
            }
            Op::Insert => {
                cost += b.z[j];
                produced.push(b.labels[j].clone());
                j += 1;
            }
            Op::Pair => {
                if a.labels[i] != b.labels[j] {
                    cost += a.z[i] + b.z[j];
                }
                produced.push(b.labels[j].clone());
                i += 1;
                j += 1;
            }
        }
    }
    assert_eq!(produced, b.labels);
    cost
}

fn random_dwell(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn random_pattern(rng: &mut ChaCha8Rng) -> DayPattern {
    let len = rng.random_range(1..=5);
    let mut labels: Vec<usize> = Vec::new();
    while labels.len() < len {
        let l = rng.random_range(0..4);
        if labels.last() != Some(&l) {
            labels.push(l);
        }
    }
    let z = random_dwell(rng, len);
    pattern(&labels, &z)
}

fn c5_edit_distance() -> Outcome {
    let mut seqs: Vec<Vec<usize>> = Vec::new();
    for len in 1..=3usize {
        for code in 0..3usize.pow(len as u32) {
            let s: Vec<usize> = (0..len).map(|k| code / 3usize.pow(k as u32) % 3).collect();
            if s.windows(2).all(|w| w[0] != w[1]) {
                seqs.push(s);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut oracle_mismatch = 0usize;
    let mut asymmetric = 0usize;
    let mut pairs = 0usize;
    for _ in 0..200 {
        let pats: Vec<DayPattern> = seqs.iter().map(|s| pattern(s, &random_dwell(&mut rng, s.len()))).collect();
        for a in &pats {
            for b in &pats {
                pairs += 1;
                let dp = tw_edit_distance(a, b, MatchCost::Zero);
                let brute = scripts(a.len(), b.len())
                    .iter()
                    .map(|s| script_cost(a, b, s))
                    .fold(f64::INFINITY, f64::min);
                if (dp - brute).abs() > 1e-12 {
                    oracle_mismatch += 1;
                }
                if dp != tw_edit_distance(b, a, MatchCost::Zero) {
                    asymmetric += 1;
                }
            }
        }
    }
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    let mut variant_violations = 0usize;
    for _ in 0..10_000 {
        let (a, b, c) = (random_pattern(&mut rng), random_pattern(&mut rng), random_pattern(&mut rng));
        let d = |x: &DayPattern, y: &DayPattern| tw_edit_distance(x, y, MatchCost::Zero);
        let excess = d(&a, &c) - d(&a, &b) - d(&b, &c);
        if excess > 1e-9 {
            violations += 1;
            worst = worst.max(excess);
        }
        let v = |x: &DayPattern, y: &DayPattern| tw_edit_distance(x, y, MatchCost::DwellDifference);
        if v(&a, &c) > v(&a, &b) + v(&b, &c) + 1e-9 {
            variant_violations += 1;
        }
    }
    outcome(
        oracle_mismatch == 0 && asymmetric == 0 && violations == 0,
        format!(
            "{pairs} pairs vs script enumeration: {oracle_mismatch} mismatches, {asymmetric} asymmetric; \
             triangle inequality violated on {violations}/10000 triples (worst excess {worst:.3}); \
             |z-z'| match-cost variant: {variant_violations} violations"
        ),
    )
}

fn random_table(rng: &mut ChaCha8Rng, k: usize) -> TimeUseTable {
    let raw: Vec<f64> = (0..k)
        .map(|_| match rng.random_range(0..5) {
            0 => 0.0,
            1 => rng.random_range(1..4) as f64,
            _ => rng.random_range(0.0..3.0),
        })
        .collect();
    let mut raw = raw;
    if raw.iter().all(|&x| x == 0.0) {
        raw[0] = 1.0;
    }
    let s: f64 = raw.iter().sum();
    TimeUseTable::new(
        raw.iter()
            .enumerate()
            .map(|(i, &x)| TimeUseEntry {
                id: EntityId::new(format!("E{i}")),
                kind: EntityKind::Polygon,
                proportion: x / s,
            })
            .collect(),
    )
    .expect("valid table")
}

/// Best subset under (primary ascending, mass descending, ids ascending).
fn enumerate_best(
    table: &TimeUseTable,
    allowed: &[usize],
    target: f64,
    primary: impl Fn(&[usize]) -> f64,
) -> Option<(Vec<EntityId>, f64)> {
    let mut best: Option<(f64, f64, Vec<EntityId>)> = None;
    for mask in 0u32..(1 << allowed.len()) {
        let set: Vec<usize> = (0..allowed.len()).filter(|b| mask >> b & 1 == 1).map(|b| allowed[b]).collect();
        let mass: f64 = set.iter().map(|&i| table.entries[i].proportion).sum();
        if mass < target {
            continue;
        }
        let p = primary(&set);
        let mut ids: Vec<EntityId> = set.iter().map(|&i| table.entries[i].id.clone()).collect();
        ids.sort();
        let better = match &best {
            None => true,
            Some((bp, bm, bids)) => {
                if (p - bp).abs() > 1e-12 {
                    p < *bp
                } else if (mass - bm).abs() > 1e-12 {
                    mass > *bm
                } else {
                    ids < *bids
                }
            }
        };
        if better {
            best = Some((p, mass, ids));
        }
    }
    best.map(|(_, m, ids)| (ids, m))
}

fn c6_level_sets() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut plain_bad = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=12);
        let table = random_table(&mut rng, k);
        let gamma = rng.random_range(0.01..=1.0);
        let got = level_space(&table, gamma, SpaceClass::All).expect("valid input");
        let positive: Vec<usize> = (0..k).filter(|&i| table.entries[i].proportion > 0.0).collect();
        let want = enumerate_best(&table, &positive, gamma * table.total() - 1e-9, |s| s.len() as f64)
            .expect("table reaches every gamma");
        if got.members != want.0 || (got.mass - want.1).abs() > 1e-12 {
            plain_bad += 1;
        }
    }
    let mut weighted_bad = 0;
    for _ in 0..500 {
        let k = rng.random_range(1..=12);
        let table = random_table(&mut rng, k);
        let weights: Vec<f64> = (0..k)
            .map(|_| match rng.random_range(0..5) {
                0 => 0.0,
                1 => rng.random_range(1..4) as f64,
                _ => rng.random_range(0.0..3.0),
            })
            .collect();
        let gamma = rng.random_range(0.01..=1.0);
        let got = weighted_level_space(&table, &weights, gamma).expect("feasible");
        let positive: Vec<usize> = (0..k).filter(|&i| table.entries[i].proportion > 0.0).collect();
        let want = enumerate_best(&table, &positive, gamma - 1e-9, |s| s.iter().map(|&i| weights[i]).sum())
            .expect("feasible");
        if !got.exact || got.space.members != want.0 || (got.space.mass - want.1).abs() > 1e-12 {
            weighted_bad += 1;
        }
    }
    outcome(
        plain_bad == 0 && weighted_bad == 0,
        format!("level_space {plain_bad}/1000 mismatches, weighted_level_space {weighted_bad}/500 mismatches"),
    )
}

fn assigned_study(scenario: &Scenario, replicate: u64) -> (Vec<MarkedDay>, Vec<usize>, PnSpace) {
    let pn = scenario.pn_space().expect("standard map");
    let library = standard_library(scenario);
    let sim = Simulator::new(scenario, &pn, Some(&library)).expect("simulator");
    let study = sim.study(replicate).expect("study");
    let days = study
        .marked_days()
        .expect("marked")
        .into_iter()
        .map(|d| assign(d, &pn))
        .collect();
    let patterns = study.days.iter().map(|d| d.pattern).collect();
    (days, patterns, pn)
}

fn c7_clustering() -> Outcome {
    let mut aris: Vec<f64> = (0..10u64)
        .map(|seed| {
            let scenario = Scenario {
                n_days: 90,
                timestamps: TimestampMode::Even,
                seed,
                ..Scenario::standard()
            };
            let (days, truth, pn) = assigned_study(&scenario, 0);
            let pats = day_patterns(&days, &pn, Some(0.1), 0.01).expect("patterns");
            let dm = distance_matrix(&pats, MatchCost::Zero).expect("matrix");
            let (labels, _) = single_linkage(&dm, Cut::Clusters(5)).expect("k=5");
            adjusted_rand_index(&labels, &truth).expect("same length")
        })
        .collect();
    aris.sort_by(f64::total_cmp);
    let median = (aris[4] + aris[5]) / 2.0;
    outcome(
        median >= 0.9,
        format!("median ARI {median:.3} over 10 seeds (min {:.3})", aris[0]),
    )
}

/// Spreads `b` evenly through `a`.
fn interleave(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = a
        .iter()
        .enumerate()
        .map(|(k, &d)| ((k as f64 + 0.5) / a.len() as f64, d))
        .chain(b.iter().enumerate().map(|(k, &d)| ((k as f64 + 0.5) / b.len() as f64, d)))
        .collect();
    keyed.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    keyed.into_iter().map(|(_, d)| d).collect()
}

fn c8_stability() -> Outcome {
    let levels: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
    let office = EntityId::new("P3");
    let mut details = Vec::new();
    let mut pass = true;
    for seed in 1..=3u64 {
        let scenario = Scenario {
            n_days: 90,
            timestamps: TimestampMode::Even,
            seed,
            ..Scenario::standard()
        };
        let (days, _, pn) = assigned_study(&scenario, 0);
        let full = normalize_by_class(&estimate(&days, &pn, Estimator::Weighted).expect("table"));
        let polygons = full.polygons.expect("polygon time");
        let c = *levels
            .iter()
            .find(|&&c| level_space(&polygons, c, SpaceClass::Polygon).expect("valid").contains(&office))
            .expect("office enters by c = 1");
        let weekend: Vec<usize> = (0..days.len()).filter(|&d| DayType::of_day(d) == DayType::Weekend).collect();
        let weekday: Vec<usize> = (0..days.len()).filter(|&d| DayType::of_day(d) == DayType::Weekday).collect();
        let blocked: Vec<usize> = weekend.iter().chain(&weekday).copied().collect();
        let alternating = interleave(&weekday, &weekend);
        let lct_of = |order: &[usize]| {
            let ordered: Vec<MarkedDay> = order.iter().map(|&d| days[d].clone()).collect();
            Cumulative::new(&ordered, &pn, Estimator::Weighted)
                .expect("days")
                .series(SpaceClass::Polygon, c)
                .expect("series")
                .lct(0.0)
                .expect("xi")
        };
        let (lb, la) = (lct_of(&blocked), lct_of(&alternating));
        pass &= lb >= la;
        details.push(format!("seed {seed}: c={c:.2} blocked {lb} alternating {la}"));
    }
    let scenario = Scenario {
        n_days: 1,
        timestamps: TimestampMode::Even,
        ..Scenario::standard()
    };
    let (one, _, pn) = assigned_study(&scenario, 0);
    let repeated: Vec<MarkedDay> = (0..30).map(|_| one[0].clone()).collect();
    let cum = Cumulative::new(&repeated, &pn, Estimator::Weighted).expect("days");
    let mut identical_max = 0;
    for class in [SpaceClass::Polygon, SpaceClass::Road] {
        for &c in &levels {
            identical_max = identical_max.max(cum.series(class, c).expect("series").lct(0.0).expect("xi"));
        }
    }
    pass &= identical_max == 0;
    details.push(format!("identical days: max LCT {identical_max}"));
    outcome(pass, details.join("; "))
}

fn random_space(rng: &mut ChaCha8Rng) -> PnSpace {
    let k = rng.random_range(2..=12);
    let entities = (0..k)
        .map(|i| {
            let c = Point2D::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            if rng.random_bool(0.5) {
                let (w, h) = (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
                Entity::polygon(
                    format!("A{i}"),
                    Polygon::from_exterior(vec![
                        Point2D::new(c.x - w, c.y - h),
                        Point2D::new(c.x + w, c.y - h),
                        Point2D::new(c.x + w, c.y + h),
                        Point2D::new(c.x - w, c.y + h),
                    ]),
                )
            } else {
                let n = rng.random_range(2..=4);
                let mut v = vec![c];
                for _ in 1..n {
                    let last = *v.last().unwrap();
                    v.push(Point2D::new(last.x + rng.random_range(-4.0..4.0), last.y + rng.random_range(-4.0..4.0)));
                }
                Entity::segment(format!("L{i}"), Polyline::new(v))
            }
        })
        .collect();
    PnSpace::new(entities, 1.0).expect("random space")
}

fn linear_nearest(pn: &PnSpace, p: &Point2D) -> (f64, Vec<usize>) {
    let d: Vec<f64> = pn.entities().iter().map(|e| distance_point_to_entity(p, e)).collect();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    (min, (0..d.len()).filter(|&i| d[i] == min).collect())
}

fn c9_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut nearest_bad = 0;
    let mut pn = random_space(&mut rng);
    for q in 0..10_000 {
        if q % 100 == 0 {
            pn = random_space(&mut rng);
        }
        let p = Point2D::new(rng.random_range(-14.0..14.0), rng.random_range(-14.0..14.0));
        let n = pn.nearest(&p);
        let (min, argmins) = linear_nearest(&pn, &p);
        if (n.distance - min).abs() > 1e-12 || !argmins.contains(&n.ix) {
            nearest_bad += 1;
        }
    }
    let mut margin_bad = 0;
    let mut checked = 0;
    for _ in 0..1000 {
        let pn = random_space(&mut rng);
        let p = Point2D::new(rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0));
        let margin = pn.voronoi_margin(&p);
        let (_, own) = linear_nearest(&pn, &p);
        let differs = |q: &Point2D| {
            let (_, at) = linear_nearest(&pn, q);
            !at.iter().any(|i| own.contains(i))
        };
        let mut closest = f64::INFINITY;
        for k in 0..64 {
            let a = k as f64 * std::f64::consts::TAU / 64.0;
            let dir = Point2D::new(a.cos(), a.sin());
            let at = |r: f64| Point2D::new(p.x + r * dir.x, p.y + r * dir.y);
            let mut lo = 0.0;
            let mut hi = None;
            let mut r = 0.1;
            while r < 40.0 && r < closest {
                if differs(&at(r)) {
                    hi = Some(r);
                    break;
                }
                lo = r;
                r += 0.1;
            }
            if let Some(mut hi) = hi {
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if differs(&at(mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                closest = closest.min(hi);
            }
        }
        if closest.is_finite() {
            checked += 1;
            if margin > closest + 1e-9 {
                margin_bad += 1;
            }
        }
    }
    outcome(
        nearest_bad == 0 && margin_bad == 0 && checked > 900,
        format!(
            "nearest vs linear scan: {nearest_bad}/10000 mismatches; margin above sampled boundary: {margin_bad}/{checked}"
        ),
    )
}

/// Serialized outputs of a seeded end-to-end run.
fn pipeline_bytes() -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for mode in [TimestampMode::Even, TimestampMode::Realistic] {
        let scenario = Scenario {
            n_days: 14,
            m: 200,
            timestamps: mode,
            seed: 7,
            ..Scenario::standard()
        };
        let pn = scenario.pn_space().unwrap();
        let library = standard_library(&scenario);
        let sim = Simulator::new(&scenario, &pn, Some(&library)).unwrap();
        let study = sim.study(0).unwrap();
        let mut gps = Vec::new();
        write_gps_csv(&study.gps_days(), &mut gps).unwrap();
        let mut truth = Vec::new();
        study.write_truth_csv(&pn, &scenario, &mut truth).unwrap();
        let parsed = parse_gps(gps.as_slice()).unwrap();
        let days = mark_and_assign(&parsed.days, &pn).unwrap();
        for est in [Estimator::Naive, Estimator::Weighted, Estimator::Adjusted { threshold: 0.1 }] {
            let mut t = Vec::new();
            estimate(&days, &pn, est).unwrap().write_csv(&mut t).unwrap();
            out.push((format!("{mode:?}/table_{}", est.name()), t));
        }
        let table = estimate(&days, &pn, Estimator::Weighted).unwrap();
        let space = level_space(&table, 0.9, SpaceClass::All).unwrap();
        out.push((format!("{mode:?}/space"), serde_json::to_vec(&space).unwrap()));
        let pats = day_patterns(&days, &pn, Some(0.1), 0.01).unwrap();
        let dm = distance_matrix(&pats, MatchCost::Zero).unwrap();
        let day_ids: Vec<i64> = pats.iter().map(|p| p.day).collect();
        let mut m = Vec::new();
        dm.write_csv(&day_ids, &mut m).unwrap();
        let (labels, tree) = single_linkage(&dm, Cut::Clusters(3)).unwrap();
        out.push((format!("{mode:?}/matrix"), m));
        out.push((format!("{mode:?}/tree"), tree.to_json().unwrap().into_bytes()));
        out.push((format!("{mode:?}/labels"), format!("{labels:?}").into_bytes()));
        let series = actspace::stability::stability_series(
            &days,
            &pn,
            Estimator::Weighted,
            SpaceClass::Polygon,
            &[0.5, 0.8, 0.95],
        )
        .unwrap();
        let mut s = Vec::new();
        write_series_csv(&series, &mut s).unwrap();
        out.push((format!("{mode:?}/stability"), s));
        out.push((format!("{mode:?}/gps"), gps));
        out.push((format!("{mode:?}/truth"), truth));
        let run = run_cell(&scenario, &pn, &[Estimator::Naive, Estimator::Weighted], 3).unwrap();
        let r: Vec<String> = run
            .errors
            .iter()
            .map(|e| format!("{:?}", rmise_from_errors(e).unwrap()))
            .collect();
        out.push((format!("{mode:?}/rmise"), r.join("\n").into_bytes()));
    }
    out
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn c10_determinism() -> Outcome {
    let a = in_pool(1, pipeline_bytes);
    let b = in_pool(1, pipeline_bytes);
    let c = in_pool(4, pipeline_bytes);
    let differing: BTreeSet<&str> = a
        .iter()
        .zip(&b)
        .zip(&c)
        .filter(|((x, y), z)| x.1 != y.1 || x.1 != z.1)
        .map(|((x, _), _)| x.0.as_str())
        .collect();
    outcome(
        differing.is_empty() && a.len() == c.len(),
        format!("{} artifacts compared across 2 runs and 1 vs 4 threads; differing: {:?}", a.len(), differing),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 mark normalization", c1_marks),
        ("2 estimator comparison, realistic spacing", c2_realistic),
        ("3 estimator comparison, even spacing", c3_even),
        ("4 convergence rate", c4_convergence),
        ("5 weighted edit distance oracle", c5_edit_distance),
        ("6 level-gamma oracle", c6_level_sets),
        ("7 clustering recovery", c7_clustering),
        ("8 stability regimes", c8_stability),
        ("9 geometry oracles", c9_geometry),
        ("10 determinism", c10_determinism),
    ];
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let start = Instant::now();
                    let o = f();
                    (o, start.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut failed = 0;
    for ((name, _), (o, secs)) in criteria.iter().zip(&results) {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {tag} ({secs:.1}s) {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
