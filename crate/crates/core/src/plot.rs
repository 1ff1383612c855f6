//! Static SVG figures built from serialized outputs.

use std::fmt::Write as _;

use crate::clustering::Dendrogram;
use crate::estimation::TimeUseTable;
use crate::geometry::{BoundingBox, Point2D};
use crate::pn::{Entity, EntityKind, Geometry};
use crate::stability::LctPoint;

const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// White-to-dark-red ramp for `v` in `[0, 1]`.
fn shade(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let g = (255.0 * (1.0 - v)).round() as u8;
    let r = (255.0 - 90.0 * v).round() as u8;
    format!("#{r:02x}{g:02x}{g:02x}")
}

/// Horizontal bars of `log(1 + p)` per entity, largest first.
pub fn time_use_bars(table: &TimeUseTable, title: &str) -> String {
    let mut rows: Vec<(&str, EntityKind, f64)> = table
        .entries
        .iter()
        .map(|e| (e.id.as_str(), e.kind, (1.0 + e.proportion).ln()))
        .collect();
    rows.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(b.0)));
    let max = rows.iter().map(|r| r.2).fold(0.0, f64::max).max(1e-12);
    let (left, bar_w, row_h) = (90.0, 360.0, 16.0);
    let h = 40.0 + rows.len() as f64 * row_h + 20.0;
    let mut out = String::new();
    header(&mut out, left + bar_w + 80.0, h);
    let _ = writeln!(out, r#"<text x="10" y="20" font-size="13">{}</text>"#, escape(title));
    for (k, (id, kind, v)) in rows.iter().enumerate() {
        let y = 36.0 + k as f64 * row_h;
        let fill = if *kind == EntityKind::Polygon { PALETTE[0] } else { PALETTE[1] };
        let w = bar_w * v / max;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text><rect x="{left}" y="{:.1}" width="{w:.2}" height="{:.1}" fill="{fill}"/><text x="{:.1}" y="{:.1}">{v:.4}</text>"#,
            left - 6.0,
            y + 11.0,
            escape(id),
            y + 2.0,
            row_h - 4.0,
            left + w + 4.0,
            y + 11.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Map of the entities shaded by `log(1 + p)`: polygons filled, roads
/// stroked.
pub fn time_use_map(entities: &[Entity], table: &TimeUseTable, title: &str) -> String {
    let bbox = entities
        .iter()
        .map(|e| e.geometry.bbox())
        .reduce(|a, b| a.union(&b))
        .unwrap_or_else(|| BoundingBox::new(Point2D::new(0.0, 0.0), Point2D::new(1.0, 1.0)));
    let (size, pad) = (520.0, 30.0);
    let span = bbox.width().max(bbox.height()).max(1e-12);
    let scale = size / span;
    let tx = |p: &Point2D| (pad + (p.x - bbox.min.x) * scale, pad + 20.0 + (bbox.max.y - p.y) * scale);
    let values: Vec<f64> = entities
        .iter()
        .map(|e| (1.0 + table.get(&e.id).unwrap_or(0.0)).ln())
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max).max(1e-12);
    let mut out = String::new();
    header(&mut out, bbox.width() * scale + 2.0 * pad, bbox.height() * scale + 2.0 * pad + 20.0);
    let _ = writeln!(out, r#"<text x="10" y="18" font-size="13">{}</text>"#, escape(title));
    let path = |pts: &[Point2D], close: bool| {
        let mut d = String::new();
        for (k, p) in pts.iter().enumerate() {
            let (x, y) = tx(p);
            let _ = write!(d, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
        }
        if close {
            d.push('Z');
        }
        d
    };
    // polygons below roads
    for pass in [EntityKind::Polygon, EntityKind::Segment] {
        for (e, v) in entities.iter().zip(&values) {
            if e.kind() != pass {
                continue;
            }
            let colour = shade(v / max);
            match &e.geometry {
                Geometry::Polygon(parts) => {
                    for poly in parts {
                        let d: String = poly.rings.iter().map(|r| path(r, true)).collect();
                        let _ = writeln!(
                            out,
                            r##"<path d="{d}" fill="{colour}" fill-rule="evenodd" stroke="#444" stroke-width="0.8"><title>{} {v:.4}</title></path>"##,
                            escape(e.id.as_str())
                        );
                    }
                }
                Geometry::Polyline(line) => {
                    let _ = writeln!(
                        out,
                        r##"<path d="{}" fill="none" stroke="{colour}" stroke-width="4" stroke-linecap="round"><title>{} {v:.4}</title></path>"##,
                        path(&line.vertices, false),
                        escape(e.id.as_str())
                    );
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Dendrogram with leaves along the x axis and merge height upwards.
/// Leaves may be coloured by a flat labelling.
pub fn dendrogram(tree: &Dendrogram, leaf_names: &[String], labels: Option<&[usize]>, title: &str) -> String {
    let n = tree.n;
    let order = tree.leaf_order();
    let (left, top, w, h) = (50.0, 40.0, (12.0 * n as f64).max(300.0), 300.0);
    let max_h = tree.merges.iter().map(|m| m.height).fold(0.0, f64::max).max(1e-12);
    let step = w / n.max(1) as f64;
    let mut x = vec![0.0; n + tree.merges.len()];
    for (k, &leaf) in order.iter().enumerate() {
        x[leaf] = left + (k as f64 + 0.5) * step;
    }
    let ypos = |hgt: f64| top + h * (1.0 - hgt / max_h);
    let mut height = vec![0.0; n + tree.merges.len()];
    let mut out = String::new();
    header(&mut out, left + w + 20.0, top + h + 70.0);
    let _ = writeln!(out, r#"<text x="10" y="20" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        out,
        r##"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="#888"/><text x="{:.1}" y="{:.1}" text-anchor="end">{max_h:.3}</text><text x="{:.1}" y="{:.1}" text-anchor="end">0</text>"##,
        top + h,
        left - 4.0,
        top + 4.0,
        left - 4.0,
        top + h + 4.0
    );
    for (k, m) in tree.merges.iter().enumerate() {
        let id = n + k;
        x[id] = 0.5 * (x[m.left] + x[m.right]);
        height[id] = m.height;
        let (yl, yr, y) = (ypos(height[m.left]), ypos(height[m.right]), ypos(m.height));
        let _ = writeln!(
            out,
            r##"<path d="M{:.2},{yl:.2} V{y:.2} H{:.2} V{yr:.2}" fill="none" stroke="#333"/>"##,
            x[m.left], x[m.right]
        );
    }
    for &leaf in &order {
        let colour = labels.map_or("#333", |l| PALETTE[l[leaf] % PALETTE.len()]);
        let name = leaf_names.get(leaf).cloned().unwrap_or_else(|| leaf.to_string());
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/><text transform="translate({:.2},{:.2}) rotate(90)" font-size="8">{}</text>"#,
            x[leaf],
            top + h,
            x[leaf] - 3.0,
            top + h + 6.0,
            escape(&name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// LCT against coverage level, one line per (class, ξ).
pub fn lct_curves(points: &[LctPoint], n_days: Option<usize>, title: &str) -> String {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for p in points {
        let k = (format!("{:?}", p.class).to_lowercase(), p.xi);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let (left, top, w, h) = (50.0, 40.0, 420.0, 260.0);
    let ymax = n_days
        .map(|n| n as f64)
        .unwrap_or_else(|| points.iter().map(|p| p.lct as f64).fold(1.0, f64::max));
    let (cmin, cmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.c), b.max(p.c)));
    let (cmin, cmax) = if cmin.is_finite() && cmax > cmin { (cmin, cmax) } else { (0.0, 1.0) };
    let px = |c: f64| left + w * (c - cmin) / (cmax - cmin);
    let py = |v: f64| top + h * (1.0 - v / ymax);
    let mut out = String::new();
    header(&mut out, left + w + 160.0, top + h + 50.0);
    let _ = writeln!(out, r#"<text x="10" y="20" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        out,
        r##"<path d="M{left},{top} V{:.1} H{:.1}" fill="none" stroke="#888"/>"##,
        top + h,
        left + w
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">coverage level c ({cmin:.2} to {cmax:.2})</text><text x="{:.1}" y="{:.1}" text-anchor="end">{ymax}</text>"#,
        left + w / 2.0,
        top + h + 30.0,
        left - 4.0,
        top + 4.0
    );
    for (k, (class, xi)) in keys.iter().enumerate() {
        let mut pts: Vec<&LctPoint> = points
            .iter()
            .filter(|p| format!("{:?}", p.class).to_lowercase() == *class && p.xi == *xi)
            .collect();
        pts.sort_by(|a, b| a.c.total_cmp(&b.c));
        let colour = PALETTE[k % PALETTE.len()];
        let d: String = pts
            .iter()
            .enumerate()
            .map(|(j, p)| format!("{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, px(p.c), py(p.lct as f64)))
            .collect();
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/><text x="{:.1}" y="{:.1}" fill="{colour}">{class}, xi={xi}</text>"#,
            left + w + 10.0,
            top + 14.0 * (k as f64 + 1.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity_space::SpaceClass;
    use crate::clustering::{DistanceMatrix, Dendrogram};
    use crate::estimation::TimeUseEntry;
    use crate::geometry::Polygon;
    use crate::pn::EntityId;

    #[test]
    fn figures_are_well_formed() {
        let table = TimeUseTable::new(vec![
            TimeUseEntry {
                id: EntityId::new("P1"),
                kind: EntityKind::Polygon,
                proportion: 0.75,
            },
            TimeUseEntry {
                id: EntityId::new("S<1>"),
                kind: EntityKind::Segment,
                proportion: 0.25,
            },
        ])
        .unwrap();
        let bars = time_use_bars(&table, "t");
        assert!(bars.starts_with("<svg") && bars.trim_end().ends_with("</svg>"));
        assert!(bars.contains("S&lt;1&gt;"));
        let ents = vec![Entity::polygon("P1", Polygon::square(Point2D::new(0.0, 0.0), 1.0))];
        assert!(time_use_map(&ents, &table, "m").contains("<path"));
        let m = DistanceMatrix::from_rows(vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0], vec![3.0, 2.0, 0.0]]).unwrap();
        let tree = Dendrogram::single_linkage(&m);
        let svg = dendrogram(&tree, &["a".into(), "b".into(), "c".into()], Some(&[0, 0, 1]), "d");
        assert_eq!(svg.matches("<circle").count(), 3);
        let pts = vec![
            LctPoint { class: SpaceClass::Polygon, c: 0.5, xi: 0.0, lct: 4 },
            LctPoint { class: SpaceClass::Polygon, c: 0.9, xi: 0.0, lct: 9 },
        ];
        assert!(lct_curves(&pts, Some(10), "l").contains("polygon, xi=0"));
    }
}
