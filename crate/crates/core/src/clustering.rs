//! Daily activity patterns, dwell-weighted edit distance and single-linkage
//! clustering of days.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{adjust_assignments, MarkedDay};
use crate::pn::{EntityId, PnSpace};

/// A compressed day: visited entities in order with their dwell fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPattern {
    pub day: i64,
    pub labels: Vec<EntityId>,
    pub z: Vec<f64>,
}

impl DayPattern {
    /// Run-length aggregation of `(label, weight)` records.
    pub fn from_records(day: i64, records: impl IntoIterator<Item = (EntityId, f64)>) -> Result<Self> {
        let mut labels: Vec<EntityId> = Vec::new();
        let mut z: Vec<f64> = Vec::new();
        for (id, w) in records {
            if labels.last() == Some(&id) {
                *z.last_mut().expect("same length") += w;
            } else {
                labels.push(id);
                z.push(w);
            }
        }
        if labels.is_empty() {
            return Err(Error::Data(format!("day {day} has no observations")));
        }
        Ok(Self { day, labels, z })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.z.iter().sum()
    }
}

/// Compresses an assigned day into its action and dwell vectors.
pub fn compress(day: &MarkedDay, pn: &PnSpace) -> Result<DayPattern> {
    if !day.is_assigned() {
        return Err(Error::Data(format!("day {} has no assignments", day.day)));
    }
    DayPattern::from_records(
        day.day,
        day.labels
            .iter()
            .zip(&day.marks)
            .map(|(&l, &w)| (pn.entity(l).id.clone(), w)),
    )
}

/// Collapses short excursions `e, x1..xr, e` whose interior mass is at most
/// `tau` into a single visit of `e`, repeating until nothing changes.
pub fn remove_jitter_loops(pattern: &DayPattern, tau: f64) -> Result<DayPattern> {
    if !(tau >= 0.0) {
        return Err(Error::param("tau", "must be nonnegative"));
    }
    let mut p = pattern.clone();
    'outer: loop {
        for i in 0..p.len() {
            let mut interior = 0.0;
            let mut end = None;
            for j in i + 1..p.len() {
                if j > i + 1 && p.labels[j] == p.labels[i] {
                    if interior <= tau {
                        end = Some(j);
                    }
                }
                interior += p.z[j];
                if interior > tau {
                    break;
                }
            }
            if let Some(j) = end {
                let merged: f64 = p.z[i..=j].iter().sum();
                let records: Vec<(EntityId, f64)> = p.labels[..i]
                    .iter()
                    .cloned()
                    .zip(p.z[..i].iter().copied())
                    .chain(std::iter::once((p.labels[i].clone(), merged)))
                    .chain(p.labels[j + 1..].iter().cloned().zip(p.z[j + 1..].iter().copied()))
                    .collect();
                p = DayPattern::from_records(p.day, records)?;
                continue 'outer;
            }
        }
        return Ok(p);
    }
}

/// How matched equal labels are charged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchCost {
    /// Equal labels match for free.
    #[default]
    Zero,
    /// Equal labels cost the difference of their dwell fractions.
    DwellDifference,
}

/// Dwell-weighted edit distance between two patterns.
///
/// Deleting `e` from `a` costs its dwell in `a`, inserting `e'` from `b`
/// costs its dwell in `b`, and substituting costs both.
pub fn tw_edit_distance(a: &DayPattern, b: &DayPattern, match_cost: MatchCost) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut prev: Vec<f64> = Vec::with_capacity(m + 1);
    prev.push(0.0);
    for j in 0..m {
        prev.push(prev[j] + b.z[j]);
    }
    let mut cur = vec![0.0; m + 1];
    for i in 0..n {
        cur[0] = prev[0] + a.z[i];
        for j in 0..m {
            let diag = if a.labels[i] == b.labels[j] {
                match match_cost {
                    MatchCost::Zero => 0.0,
                    MatchCost::DwellDifference => (a.z[i] - b.z[j]).abs(),
                }
            } else {
                a.z[i] + b.z[j]
            };
            let del = prev[j + 1] + a.z[i];
            let ins = cur[j] + b.z[j];
            let sub = prev[j] + diag;
            cur[j + 1] = del.min(ins).min(sub);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Symmetric matrix with a zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds from a full row-major matrix, checking symmetry and the diagonal.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Data("distance matrix is not square".into()));
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::Data(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if rows[i][j] != rows[j][i] || !(rows[i][j] >= 0.0) {
                    return Err(Error::Data(format!("bad entry at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// CSV with a header of day indices and one row per day.
    pub fn write_csv(&self, days: &[i64], writer: impl Write) -> Result<()> {
        if days.len() != self.n {
            return Err(Error::param("days", "length differs from the matrix"));
        }
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = std::iter::once("day".to_string())
            .chain(days.iter().map(|d| d.to_string()))
            .collect();
        w.write_record(&header)?;
        for (i, d) in days.iter().enumerate() {
            let rec: Vec<String> = std::iter::once(d.to_string())
                .chain(self.row(i).iter().map(|x| x.to_string()))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(reader: impl std::io::Read) -> Result<(Vec<i64>, Self)> {
        let mut r = csv::Reader::from_reader(reader);
        let mut days = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut it = rec.iter();
            let day = it
                .next()
                .ok_or_else(|| Error::Parse("empty matrix row".into()))?
                .parse::<i64>()
                .map_err(|e| Error::Parse(format!("day: {e}")))?;
            let row = it
                .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(format!("distance: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            days.push(day);
            rows.push(row);
        }
        Ok((days, Self::from_rows(rows)?))
    }
}

/// Pairwise distances, each unordered pair computed once.
pub fn distance_matrix(patterns: &[DayPattern], match_cost: MatchCost) -> Result<DistanceMatrix> {
    let n = patterns.len();
    if n < 2 {
        return Err(Error::Data("need at least two patterns".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let d: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| tw_edit_distance(&patterns[i], &patterns[j], match_cost))
        .collect();
    let mut data = vec![0.0; n * n];
    for (&(i, j), &x) in pairs.iter().zip(&d) {
        data[i * n + j] = x;
        data[j * n + i] = x;
    }
    Ok(DistanceMatrix { n, data })
}

/// One agglomeration step. Leaves are `0..n`; the cluster formed by merge
/// `k` gets id `n + k`. `left` is the smaller of the two ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

/// Where to cut the tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    Clusters(usize),
    Height(f64),
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
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

    /// Keeps the smaller root so each root is its cluster's smallest member.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
    }
}

impl Dendrogram {
    /// Single-linkage agglomeration. Equal distances are processed in
    /// order of the smaller, then larger, member index.
    pub fn single_linkage(matrix: &DistanceMatrix) -> Self {
        let n = matrix.len();
        let mut edges: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (matrix.get(i, j), i, j))
            .collect();
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut uf = UnionFind::new(n);
        // node id and size of the cluster rooted at each representative
        let mut node: Vec<usize> = (0..n).collect();
        let mut size = vec![1usize; n];
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        for (h, i, j) in edges {
            let (ri, rj) = (uf.find(i), uf.find(j));
            if ri == rj {
                continue;
            }
            let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
            let merged = size[lo] + size[hi];
            merges.push(Merge {
                left: node[lo].min(node[hi]),
                right: node[lo].max(node[hi]),
                height: h,
                size: merged,
            });
            uf.union(lo, hi);
            node[lo] = n + merges.len() - 1;
            size[lo] = merged;
            if merges.len() + 1 == n {
                break;
            }
        }
        Self { n, merges }
    }

    /// Flat labels after cutting. Clusters are numbered from 0 in order of
    /// their smallest member.
    pub fn cut(&self, cut: Cut) -> Result<Vec<usize>> {
        let n = self.n;
        let applied = match cut {
            Cut::Clusters(k) => {
                if k < 1 || k > n {
                    return Err(Error::param("k", format!("must lie in 1..={n}")));
                }
                n - k
            }
            Cut::Height(h) => self.merges.iter().take_while(|m| m.height <= h).count(),
        };
        let mut uf = UnionFind::new(2 * n);
        for (k, m) in self.merges.iter().take(applied).enumerate() {
            uf.parent[m.left] = n + k;
            uf.parent[m.right] = n + k;
        }
        let mut ids: Vec<Option<usize>> = vec![None; 2 * n];
        let mut next = 0;
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let r = uf.find(i);
            let l = *ids[r].get_or_insert_with(|| {
                next += 1;
                next - 1
            });
            labels.push(l);
        }
        Ok(labels)
    }

    /// Merge tree as a JSON array of `[left, right, height]` triples.
    pub fn to_json(&self) -> Result<String> {
        let triples: Vec<(usize, usize, f64)> =
            self.merges.iter().map(|m| (m.left, m.right, m.height)).collect();
        Ok(serde_json::to_string_pretty(&triples)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let triples: Vec<(usize, usize, f64)> = serde_json::from_str(s)?;
        let n = triples.len() + 1;
        let mut size = vec![1usize; n];
        let mut merges = Vec::with_capacity(triples.len());
        for (k, (left, right, height)) in triples.into_iter().enumerate() {
            if left >= n + k || right >= n + k {
                return Err(Error::Parse(format!("merge {k} refers to a later cluster")));
            }
            let s = size[left] + size[right];
            size.push(s);
            merges.push(Merge {
                left,
                right,
                height,
                size: s,
            });
        }
        Ok(Self { n, merges })
    }

    /// Leaf order for drawing, left subtree first.
    pub fn leaf_order(&self) -> Vec<usize> {
        if self.n == 0 {
            return Vec::new();
        }
        let Some(last) = self.merges.len().checked_sub(1) else {
            return vec![0];
        };
        let mut out = Vec::with_capacity(self.n);
        let mut stack = vec![self.n + last];
        while let Some(id) = stack.pop() {
            if id < self.n {
                out.push(id);
            } else {
                let m = &self.merges[id - self.n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out
    }
}

/// Single-linkage labels at a cut, together with the merge tree.
pub fn single_linkage(matrix: &DistanceMatrix, cut: Cut) -> Result<(Vec<usize>, Dendrogram)> {
    let tree = Dendrogram::single_linkage(matrix);
    let labels = tree.cut(cut)?;
    Ok((labels, tree))
}

pub const DEFAULT_OUTLIER_ALPHA: f64 = 2.0;

/// Days whose mean distance to the others exceeds the mean of those means
/// by more than `alpha` standard deviations.
pub fn flag_outliers(matrix: &DistanceMatrix, alpha: f64) -> Result<Vec<bool>> {
    let n = matrix.len();
    if n < 3 {
        return Err(Error::Data("outlier flags need at least three days".into()));
    }
    let means: Vec<f64> = (0..n)
        .map(|i| matrix.row(i).iter().sum::<f64>() / (n - 1) as f64)
        .collect();
    let mu = means.iter().sum::<f64>() / n as f64;
    let sd = (means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    Ok(means.iter().map(|&x| x > mu + alpha * sd).collect())
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::param("labels", "labelings differ in length"));
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Pattern extraction as used before clustering: optional assignment
/// adjustment, compression, then jitter-loop removal.
pub fn day_patterns(
    days: &[MarkedDay],
    pn: &PnSpace,
    adjust: Option<f64>,
    tau: f64,
) -> Result<Vec<DayPattern>> {
    days.par_iter()
        .map(|d| {
            let p = match adjust {
                Some(eps) => compress(&adjust_assignments(d.clone(), pn, eps)?, pn)?,
                None => compress(d, pn)?,
            };
            remove_jitter_loops(&p, tau)
        })
        .collect()
}

/// Labels CSV: `day, cluster, outlier`.
pub fn write_labels_csv(days: &[i64], labels: &[usize], outliers: &[bool], writer: impl Write) -> Result<()> {
    if labels.len() != days.len() || outliers.len() != days.len() {
        return Err(Error::param("labels", "lengths differ"));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["day", "cluster", "outlier"])?;
    for ((d, l), o) in days.iter().zip(labels).zip(outliers) {
        w.write_record([d.to_string(), l.to_string(), o.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a labels CSV written by [`write_labels_csv`].
pub fn read_labels_csv(reader: impl std::io::Read) -> Result<(Vec<i64>, Vec<usize>, Vec<bool>)> {
    let mut r = csv::Reader::from_reader(reader);
    let (mut days, mut labels, mut outliers) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse("short labels row".into()));
        days.push(field(0)?.parse().map_err(|e| Error::Parse(format!("day: {e}")))?);
        labels.push(field(1)?.parse().map_err(|e| Error::Parse(format!("cluster: {e}")))?);
        outliers.push(field(2)?.parse().map_err(|e| Error::Parse(format!("outlier: {e}")))?);
    }
    Ok((days, labels, outliers))
}

/// Patterns as CSV rows `day, position, entity_id, dwell`.
pub fn write_patterns_csv(patterns: &[DayPattern], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["day", "position", "entity_id", "dwell"])?;
    for p in patterns {
        for (k, (id, z)) in p.labels.iter().zip(&p.z).enumerate() {
            w.write_record([p.day.to_string(), k.to_string(), id.0.clone(), z.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pat(labels: &[&str], z: &[f64]) -> DayPattern {
        DayPattern {
            day: 0,
            labels: labels.iter().map(|s| EntityId::new(*s)).collect(),
            z: z.to_vec(),
        }
    }

    #[test]
    fn compress_runs() {
        let p = DayPattern::from_records(
            0,
            [("e1", 0.375), ("e1", 0.25), ("e2", 0.375)]
                .into_iter()
                .map(|(a, b)| (EntityId::new(a), b)),
        )
        .unwrap();
        assert_eq!(p, pat(&["e1", "e2"], &[0.625, 0.375]));
        assert!(DayPattern::from_records(0, std::iter::empty()).is_err());
    }

    #[test]
    fn jitter_loop_collapses() {
        let rest = 1.0 - 9.0 / 24.0 - 1.0 / 480.0;
        let p = pat(&["P1", "S2", "P1"], &[9.0 / 24.0, 1.0 / 480.0, rest]);
        let q = remove_jitter_loops(&p, 0.01).unwrap();
        assert_eq!(q.labels, vec![EntityId::new("P1")]);
        assert!((q.z[0] - 1.0).abs() < 1e-12);
        let wide = pat(&["P1", "S2", "P1"], &[0.4, 0.2, 0.4]);
        assert_eq!(remove_jitter_loops(&wide, 0.01).unwrap(), wide);
    }

    #[test]
    fn nested_jitter_reaches_fixpoint() {
        // the inner loop S1,S2,S1 collapses first, exposing P1,S1,P1
        let p = pat(&["P1", "S1", "S2", "S1", "P1", "P2"], &[0.3, 0.002, 0.001, 0.002, 0.3, 0.395]);
        let q = remove_jitter_loops(&p, 0.006).unwrap();
        assert_eq!(q.labels, vec![EntityId::new("P1"), EntityId::new("P2")]);
        assert!((q.total() - 1.0).abs() < 1e-12);
        assert_eq!(remove_jitter_loops(&q, 0.006).unwrap(), q);
    }

    #[test]
    fn distance_examples() {
        let a = pat(&["P1", "S1", "P2"], &[0.5, 0.1, 0.4]);
        let b = pat(&["P1", "P2"], &[0.6, 0.4]);
        assert!((tw_edit_distance(&a, &b, MatchCost::Zero) - 0.1).abs() < 1e-12);
        assert_eq!(tw_edit_distance(&pat(&["P1"], &[1.0]), &pat(&["P2"], &[1.0]), MatchCost::Zero), 2.0);
        let c = pat(&["P1", "S1", "P2"], &[0.2, 0.3, 0.5]);
        assert_eq!(tw_edit_distance(&a, &c, MatchCost::Zero), 0.0);
        assert!(tw_edit_distance(&a, &c, MatchCost::DwellDifference) > 0.0);
    }

    #[test]
    fn three_point_linkage() {
        let m = DistanceMatrix::from_rows(vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 4.0],
            vec![5.0, 4.0, 0.0],
        ])
        .unwrap();
        let (labels, tree) = single_linkage(&m, Cut::Clusters(2)).unwrap();
        assert_eq!(labels, vec![0, 0, 1]);
        assert_eq!(tree.merges[0], Merge { left: 0, right: 1, height: 1.0, size: 2 });
        assert_eq!(tree.merges[1], Merge { left: 2, right: 3, height: 4.0, size: 3 });
        assert_eq!(tree.cut(Cut::Clusters(3)).unwrap(), vec![0, 1, 2]);
        assert_eq!(tree.cut(Cut::Height(1.0)).unwrap(), vec![0, 0, 1]);
        assert!(tree.cut(Cut::Clusters(0)).is_err());
        assert!(tree.cut(Cut::Clusters(4)).is_err());
        let back = Dendrogram::from_json(&tree.to_json().unwrap()).unwrap();
        assert_eq!(back, tree);
        assert_eq!(tree.leaf_order().len(), 3);
    }

    #[test]
    fn outlier_statistic() {
        let n = 8;
        let mut rows = vec![vec![0.1; n]; n];
        for i in 0..n {
            rows[i][i] = 0.0;
            if i != 0 {
                rows[0][i] = 10.0;
                rows[i][0] = 10.0;
            }
        }
        let m = DistanceMatrix::from_rows(rows).unwrap();
        let flags = flag_outliers(&m, 2.0).unwrap();
        assert!(flags[0]);
        assert!(flags[1..].iter().all(|f| !f));
        let same = DistanceMatrix::from_rows(vec![vec![0.0; 4]; 4]).unwrap();
        assert!(flag_outliers(&same, 2.0).unwrap().iter().all(|f| !f));
    }

    #[test]
    fn ari_known_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        // sklearn: adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        assert!((v - 4.0 / 7.0).abs() < 1e-12);
    }

    fn arb_pattern() -> impl Strategy<Value = DayPattern> {
        prop::collection::vec((0usize..4, 0.01f64..1.0), 1..6).prop_map(|v| {
            let total: f64 = v.iter().map(|x| x.1).sum();
            DayPattern::from_records(0, v.into_iter().map(|(l, w)| (EntityId::new(format!("E{l}")), w / total)))
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn distance_symmetric(a in arb_pattern(), b in arb_pattern()) {
            for mc in [MatchCost::Zero, MatchCost::DwellDifference] {
                prop_assert_eq!(tw_edit_distance(&a, &b, mc), tw_edit_distance(&b, &a, mc));
            }
            prop_assert_eq!(tw_edit_distance(&a, &a, MatchCost::Zero), 0.0);
        }

        #[test]
        fn dwell_difference_variant_is_a_metric(a in arb_pattern(), b in arb_pattern(), c in arb_pattern()) {
            let d = |x: &DayPattern, y: &DayPattern| tw_edit_distance(x, y, MatchCost::DwellDifference);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        }

        #[test]
        fn jitter_preserves_mass(p in arb_pattern(), tau in 0.0f64..0.3) {
            let q = remove_jitter_loops(&p, tau).unwrap();
            prop_assert!((q.total() - p.total()).abs() < 1e-9);
            prop_assert!(q.labels.windows(2).all(|w| w[0] != w[1]));
            prop_assert_eq!(remove_jitter_loops(&q, tau).unwrap(), q);
        }

        #[test]
        fn linkage_heights_nondecreasing(rows in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 7), 7)) {
            let n = rows.len();
            let mut full = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..i {
                    full[i][j] = rows[i][j];
                    full[j][i] = rows[i][j];
                }
            }
            let m = DistanceMatrix::from_rows(full).unwrap();
            let tree = Dendrogram::single_linkage(&m);
            prop_assert_eq!(tree.merges.len(), n - 1);
            prop_assert!(tree.merges.windows(2).all(|w| w[0].height <= w[1].height));
            prop_assert_eq!(tree.merges.last().unwrap().size, n);
        }

        #[test]
        fn outliers_permutation_invariant(rows in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 6), 6), rot in 0usize..6) {
            let n = rows.len();
            let mut full = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..i {
                    full[i][j] = rows[i][j];
                    full[j][i] = rows[i][j];
                }
            }
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| full[i][j]).collect()).collect();
            let f = flag_outliers(&DistanceMatrix::from_rows(full).unwrap(), 1.0).unwrap();
            let g = flag_outliers(&DistanceMatrix::from_rows(permuted).unwrap(), 1.0).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(g[k], f[i]);
            }
        }
    }
}
