//! Level-γ activity spaces and their weight-constrained variant.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{ClassTables, TimeUseTable};
use crate::pn::EntityId;

/// Slack allowed when comparing accumulated mass with a target.
pub const MASS_TOL: f64 = 1e-9;

/// Tables passed to [`level_space`] must sum to 1 within this tolerance.
pub const TABLE_SUM_TOL: f64 = 1e-6;

/// Upper size for the exact weighted solver.
pub const EXACT_LIMIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceClass {
    All,
    Polygon,
    Road,
    Composed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySpace {
    pub gamma: f64,
    pub class: SpaceClass,
    /// Member ids in ascending id order.
    pub members: Vec<EntityId>,
    /// Time share covered by the members. For a composed space this is the
    /// smaller of the two class-normalized masses.
    pub mass: f64,
}

impl ActivitySpace {
    pub fn contains(&self, id: &EntityId) -> bool {
        self.members.binary_search(id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("gamma", "must lie in (0, 1]"))
    }
}

/// Entity ranks by proportion descending, ties by id ascending.
fn rank(table: &TimeUseTable) -> Vec<usize> {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&table.entries[a], &table.entries[b]);
        eb.proportion
            .total_cmp(&ea.proportion)
            .then_with(|| ea.id.cmp(&eb.id))
    });
    order
}

/// Smallest entity set reaching share `gamma`: the shortest prefix of the
/// ranking by proportion. Among sets of that size it has the largest mass.
pub fn level_space(table: &TimeUseTable, gamma: f64, class: SpaceClass) -> Result<ActivitySpace> {
    check_gamma(gamma)?;
    let total = table.total();
    if (total - 1.0).abs() > TABLE_SUM_TOL {
        return Err(Error::Data(format!("table sums to {total}, expected 1")));
    }
    let target = gamma * total - MASS_TOL;
    let mut members = Vec::new();
    let mut mass = 0.0;
    for ix in rank(table) {
        if mass >= target {
            break;
        }
        let e = &table.entries[ix];
        if e.proportion <= 0.0 {
            break;
        }
        members.push(e.id.clone());
        mass += e.proportion;
    }
    members.sort();
    Ok(ActivitySpace {
        gamma,
        class,
        members,
        mass,
    })
}

/// Union of the polygon and road level-γ spaces. A missing side contributes
/// nothing.
pub fn composed_space(tables: &ClassTables, gamma: f64) -> Result<ActivitySpace> {
    check_gamma(gamma)?;
    let mut members = Vec::new();
    let mut mass = f64::INFINITY;
    for (table, class) in [
        (&tables.polygons, SpaceClass::Polygon),
        (&tables.roads, SpaceClass::Road),
    ] {
        if let Some(t) = table {
            let s = level_space(t, gamma, class)?;
            mass = mass.min(s.mass);
            members.extend(s.members);
        }
    }
    members.sort();
    members.dedup();
    Ok(ActivitySpace {
        gamma,
        class: SpaceClass::Composed,
        members,
        mass: if mass.is_finite() { mass } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSpace {
    pub space: ActivitySpace,
    pub total_weight: f64,
    /// Whether the solution is proven optimal.
    pub exact: bool,
    /// For heuristic answers, `total_weight` minus a lower bound on the
    /// optimum. Zero when exact.
    pub gap: f64,
}

struct Item {
    ix: usize,
    t: f64,
    w: f64,
}

/// Compares candidate solutions: lighter first, then heavier mass, then the
/// lexicographically smaller id list.
fn better(
    a: (f64, f64, &[EntityId]),
    b: (f64, f64, &[EntityId]),
) -> bool {
    let tol = 1e-12;
    if a.0 < b.0 - tol {
        return true;
    }
    if a.0 > b.0 + tol {
        return false;
    }
    if a.1 > b.1 + tol {
        return true;
    }
    if a.1 < b.1 - tol {
        return false;
    }
    a.2.cmp(b.2) == Ordering::Less
}

/// Minimum extra weight needed to add `deficit` mass using items
/// `items[from..]` fractionally. Items must be sorted by density.
fn lp_bound(items: &[Item], from: usize, deficit: f64) -> f64 {
    if deficit <= 0.0 {
        return 0.0;
    }
    let mut need = deficit;
    let mut w = 0.0;
    for it in &items[from..] {
        if it.t >= need {
            return w + it.w * need / it.t;
        }
        need -= it.t;
        w += it.w;
    }
    f64::INFINITY
}

struct Search<'a> {
    items: &'a [Item],
    ids: &'a [EntityId],
    target: f64,
    base: Vec<usize>,
    chosen: Vec<usize>,
    best: Option<(f64, f64, Vec<EntityId>)>,
    nodes: u64,
    node_limit: u64,
}

impl Search<'_> {
    fn ids_of(&self, extra: &[usize]) -> Vec<EntityId> {
        let mut v: Vec<EntityId> = self
            .base
            .iter()
            .chain(extra.iter().map(|&k| &self.items[k].ix))
            .map(|&ix| self.ids[ix].clone())
            .collect();
        v.sort();
        v
    }

    fn dfs(&mut self, k: usize, w: f64, mass: f64) {
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return;
        }
        if mass >= self.target {
            let ids = self.ids_of(&self.chosen);
            let cand = (w, mass, ids);
            let replace = match &self.best {
                None => true,
                Some(b) => better((cand.0, cand.1, &cand.2), (b.0, b.1, &b.2)),
            };
            if replace {
                self.best = Some(cand);
            }
            // adding more items never lowers weight; it may only raise mass,
            // and only zero-weight items do that for free (already in base)
            return;
        }
        if k == self.items.len() {
            return;
        }
        let bound = w + lp_bound(self.items, k, self.target - mass);
        if let Some(b) = &self.best {
            if bound > b.0 + 1e-12 {
                return;
            }
        }
        self.chosen.push(k);
        self.dfs(k + 1, w + self.items[k].w, mass + self.items[k].t);
        self.chosen.pop();
        self.dfs(k + 1, w, mass);
    }
}

/// Minimum-weight entity set whose share reaches `gamma`.
///
/// `weights` align with `table.entries`. Up to [`EXACT_LIMIT`] candidates
/// are solved exactly by branch and bound with a fractional-knapsack bound;
/// larger inputs use a greedy density rule and report the optimality gap.
/// Ties go to the larger mass, then to the lexicographically smaller id list.
pub fn weighted_level_space(
    table: &TimeUseTable,
    weights: &[f64],
    gamma: f64,
) -> Result<WeightedSpace> {
    check_gamma(gamma)?;
    if weights.len() != table.len() {
        return Err(Error::param("weights", "length differs from the table"));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::param("weights", "must be finite and nonnegative"));
    }
    let target = gamma - MASS_TOL;
    let ids: Vec<EntityId> = table.entries.iter().map(|e| e.id.clone()).collect();

    let mut base = Vec::new();
    let mut base_mass = 0.0;
    let mut items = Vec::new();
    for (ix, (e, &w)) in table.entries.iter().zip(weights).enumerate() {
        if e.proportion <= 0.0 {
            continue;
        }
        if w == 0.0 {
            base.push(ix);
            base_mass += e.proportion;
        } else {
            items.push(Item {
                ix,
                t: e.proportion,
                w,
            });
        }
    }
    let reachable = base_mass + items.iter().map(|i| i.t).sum::<f64>();
    if reachable < target {
        return Err(Error::Infeasible(format!(
            "total share {reachable} cannot reach gamma {gamma}"
        )));
    }
    items.sort_by(|a, b| {
        (b.t / b.w)
            .total_cmp(&(a.t / a.w))
            .then(b.t.total_cmp(&a.t))
            .then_with(|| ids[a.ix].cmp(&ids[b.ix]))
    });

    let finish = |members: Vec<EntityId>, weight: f64, mass: f64, exact: bool, gap: f64| WeightedSpace {
        space: ActivitySpace {
            gamma,
            class: SpaceClass::All,
            members,
            mass,
        },
        total_weight: weight,
        exact,
        gap,
    };

    if items.len() <= EXACT_LIMIT {
        let mut search = Search {
            items: &items,
            ids: &ids,
            target,
            base: base.clone(),
            chosen: Vec::new(),
            best: None,
            nodes: 0,
            node_limit: 200_000_000,
        };
        search.dfs(0, 0.0, base_mass);
        let exact = search.nodes <= search.node_limit;
        if let Some((w, mass, members)) = search.best {
            let gap = if exact {
                0.0
            } else {
                (w - lp_bound(&items, 0, target - base_mass)).max(0.0)
            };
            return Ok(finish(members, w, mass, exact, gap));
        }
    }

    // greedy by density, then drop members that turned out redundant
    let mut chosen: Vec<usize> = Vec::new();
    let mut mass = base_mass;
    for (k, it) in items.iter().enumerate() {
        if mass >= target {
            break;
        }
        chosen.push(k);
        mass += it.t;
    }
    let mut by_weight = chosen.clone();
    by_weight.sort_by(|&a, &b| items[b].w.total_cmp(&items[a].w));
    for k in by_weight {
        if mass - items[k].t >= target {
            mass -= items[k].t;
            chosen.retain(|&c| c != k);
        }
    }
    let weight: f64 = chosen.iter().map(|&k| items[k].w).sum();
    let mut members: Vec<EntityId> = base
        .iter()
        .chain(chosen.iter().map(|&k| &items[k].ix))
        .map(|&ix| ids[ix].clone())
        .collect();
    members.sort();
    let gap = (weight - lp_bound(&items, 0, target - base_mass)).max(0.0);
    Ok(finish(members, weight, mass, false, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::TimeUseEntry;
    use crate::pn::EntityKind;
    use proptest::prelude::*;

    fn table(pairs: &[(&str, f64)]) -> TimeUseTable {
        TimeUseTable::new(
            pairs
                .iter()
                .map(|&(id, p)| TimeUseEntry {
                    id: id.into(),
                    kind: EntityKind::Polygon,
                    proportion: p,
                })
                .collect(),
        )
        .unwrap()
    }

    fn names(s: &ActivitySpace) -> Vec<&str> {
        s.members.iter().map(EntityId::as_str).collect()
    }

    #[test]
    fn three_entity_level_space() {
        let t = table(&[("e1", 0.6), ("e2", 0.3), ("e3", 0.1)]);
        let s = level_space(&t, 0.8, SpaceClass::All).unwrap();
        assert_eq!(names(&s), ["e1", "e2"]);
        assert!((s.mass - 0.9).abs() < 1e-12);
        let all = level_space(&t, 1.0, SpaceClass::All).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn full_level_skips_zero_entities() {
        let t = table(&[("a", 0.7), ("b", 0.3), ("c", 0.0)]);
        assert_eq!(names(&level_space(&t, 1.0, SpaceClass::All).unwrap()), ["a", "b"]);
    }

    #[test]
    fn level_space_rejects_bad_inputs() {
        let t = table(&[("a", 0.5)]);
        assert!(level_space(&t, 0.5, SpaceClass::All).is_err());
        let ok = table(&[("a", 1.0)]);
        assert!(level_space(&ok, 0.0, SpaceClass::All).is_err());
        assert!(level_space(&ok, 1.5, SpaceClass::All).is_err());
    }

    #[test]
    fn composed_with_missing_side() {
        let poly = table(&[("a", 0.7), ("b", 0.3)]);
        let tables = ClassTables {
            polygons: Some(poly.clone()),
            roads: None,
        };
        let c = composed_space(&tables, 0.9).unwrap();
        let p = level_space(&poly, 0.9, SpaceClass::Polygon).unwrap();
        assert_eq!(c.members, p.members);
    }

    #[test]
    fn weighted_prefers_two_light_entities() {
        let t = table(&[("e1", 0.45), ("e2", 0.45), ("e3", 0.10)]);
        let s = weighted_level_space(&t, &[10.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(names(&s.space), ["e2", "e3"]);
        assert_eq!(s.total_weight, 2.0);
        assert!((s.space.mass - 0.55).abs() < 1e-12);
        assert!(s.exact);
    }

    #[test]
    fn weighted_infeasible() {
        let t = TimeUseTable::new(vec![TimeUseEntry {
            id: "a".into(),
            kind: EntityKind::Polygon,
            proportion: 0.4,
        }])
        .unwrap();
        assert!(matches!(
            weighted_level_space(&t, &[1.0], 0.5),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn weighted_greedy_flags_large_inputs() {
        let n = 40;
        let pairs: Vec<(String, f64)> = (0..n).map(|i| (format!("e{i}"), 1.0 / n as f64)).collect();
        let refs: Vec<(&str, f64)> = pairs.iter().map(|(s, p)| (s.as_str(), *p)).collect();
        let t = table(&refs);
        let w: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let s = weighted_level_space(&t, &w, 0.5).unwrap();
        assert!(!s.exact);
        assert!(s.space.mass >= 0.5 - MASS_TOL);
        assert!(s.gap >= 0.0);
    }

    /// Enumeration oracle: every nonempty subset ordered by the key.
    fn brute_force(t: &TimeUseTable, w: &[f64], target: f64) -> Option<(f64, f64, Vec<EntityId>)> {
        let n = t.len();
        let mut best: Option<(f64, f64, Vec<EntityId>)> = None;
        for mask in 0u32..(1 << n) {
            let (mut wt, mut mass, mut ids) = (0.0, 0.0, Vec::new());
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    wt += w[i];
                    mass += t.entries[i].proportion;
                    ids.push(t.entries[i].id.clone());
                }
            }
            // entities with no share never enter a candidate set
            let has_zero = (0..n).any(|i| mask & (1 << i) != 0 && t.entries[i].proportion == 0.0);
            if mass < target || has_zero {
                continue;
            }
            ids.sort();
            let replace = match &best {
                None => true,
                Some(b) => better((wt, mass, &ids), (b.0, b.1, &b.2)),
            };
            if replace {
                best = Some((wt, mass, ids));
            }
        }
        best
    }

    fn arb_table() -> impl Strategy<Value = TimeUseTable> {
        proptest::collection::vec(0u32..20, 1..=10).prop_map(|raw| {
            let total: u32 = raw.iter().sum::<u32>().max(1);
            let pairs: Vec<(String, f64)> = raw
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let p = if total == 0 { 1.0 } else { r as f64 / total as f64 };
                    (format!("e{i}"), p)
                })
                .collect();
            let mut t = TimeUseTable::new(
                pairs
                    .into_iter()
                    .map(|(id, proportion)| TimeUseEntry {
                        id: id.into(),
                        kind: EntityKind::Polygon,
                        proportion,
                    })
                    .collect(),
            )
            .unwrap();
            if t.total() == 0.0 {
                t.entries[0].proportion = 1.0;
            }
            t
        })
    }

    proptest! {
        #[test]
        fn level_space_matches_enumeration(t in arb_table(), gamma in 0.01f64..=1.0) {
            let s = level_space(&t, gamma, SpaceClass::All).unwrap();
            let unit = vec![1.0; t.len()];
            let (_, mass, ids) = brute_force(&t, &unit, gamma * t.total() - MASS_TOL).unwrap();
            prop_assert_eq!(&s.members, &ids);
            prop_assert!((s.mass - mass).abs() < 1e-9);
        }

        #[test]
        fn level_space_is_monotone(t in arb_table(), g1 in 0.01f64..=1.0, g2 in 0.01f64..=1.0) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let a = level_space(&t, lo, SpaceClass::All).unwrap();
            let b = level_space(&t, hi, SpaceClass::All).unwrap();
            prop_assert!(a.members.iter().all(|m| b.contains(m)));
        }

        #[test]
        fn weighted_matches_enumeration(
            t in arb_table(),
            raw_w in proptest::collection::vec(0u32..6, 10),
            gamma in 0.01f64..=1.0,
        ) {
            let w: Vec<f64> = raw_w[..t.len()].iter().map(|&x| x as f64).collect();
            let got = weighted_level_space(&t, &w, gamma).unwrap();
            let (bw, bm, ids) = brute_force(&t, &w, gamma - MASS_TOL).unwrap();
            prop_assert!(got.exact);
            prop_assert!((got.total_weight - bw).abs() < 1e-9);
            prop_assert!((got.space.mass - bm).abs() < 1e-9);
            prop_assert_eq!(got.space.members, ids);
        }
    }
}
