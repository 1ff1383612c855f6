//! Reading and writing entity layers.
//!
//! Two formats are supported:
//!
//! * GeoJSON-style `FeatureCollection`s of `Polygon`, `MultiPolygon` and
//!   `LineString` features. The entity id comes from the `id` property (or
//!   the feature's own `id` member); an optional `weight` property sets the
//!   entity weight and an optional `members` array lists aggregated ids.
//! * A CSV vertex list with columns `id,kind,x,y` and optional `part` and
//!   `ring` columns. Rows of the same id are concatenated in file order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{Point2D, Polygon, Polyline};
use crate::pn::{Entity, EntityId, EntityKind, Geometry};

fn parse_point(v: &Value) -> Result<Point2D> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| Error::Parse("coordinate must be [x, y]".into()))?;
    let x = arr[0].as_f64().ok_or_else(|| Error::Parse("non-numeric x".into()))?;
    let y = arr[1].as_f64().ok_or_else(|| Error::Parse("non-numeric y".into()))?;
    Ok(Point2D::new(x, y))
}

fn parse_ring(v: &Value) -> Result<Vec<Point2D>> {
    v.as_array()
        .ok_or_else(|| Error::Parse("ring must be an array".into()))?
        .iter()
        .map(parse_point)
        .collect()
}

fn parse_polygon(v: &Value) -> Result<Polygon> {
    let rings = v
        .as_array()
        .ok_or_else(|| Error::Parse("polygon must be an array of rings".into()))?
        .iter()
        .map(parse_ring)
        .collect::<Result<Vec<_>>>()?;
    Ok(Polygon::new(rings))
}

fn feature_id(feature: &Value, index: usize) -> EntityId {
    let raw = feature
        .pointer("/properties/id")
        .or_else(|| feature.get("id"))
        .cloned()
        .unwrap_or(Value::Null);
    match raw {
        Value::String(s) => EntityId(s),
        Value::Number(n) => EntityId(n.to_string()),
        _ => EntityId(format!("f{index}")),
    }
}

/// Parses a GeoJSON `FeatureCollection` into entities.
pub fn entities_from_geojson(text: &str) -> Result<Vec<Entity>> {
    let root: Value = serde_json::from_str(text)?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("expected a FeatureCollection with `features`".into()))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let id = feature_id(f, i);
        let geom = f
            .get("geometry")
            .ok_or_else(|| Error::Parse(format!("feature `{id}` has no geometry")))?;
        let coords = geom
            .get("coordinates")
            .ok_or_else(|| Error::Parse(format!("feature `{id}` has no coordinates")))?;
        let geometry = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => Geometry::Polygon(vec![parse_polygon(coords)?]),
            Some("MultiPolygon") => Geometry::Polygon(
                coords
                    .as_array()
                    .ok_or_else(|| Error::Parse("MultiPolygon must be an array".into()))?
                    .iter()
                    .map(parse_polygon)
                    .collect::<Result<_>>()?,
            ),
            Some("LineString") => Geometry::Polyline(Polyline::new(parse_ring(coords)?)),
            other => {
                return Err(Error::Parse(format!(
                    "feature `{id}`: unsupported geometry type {other:?}"
                )))
            }
        };
        let weight = f
            .pointer("/properties/weight")
            .and_then(Value::as_f64)
            .unwrap_or(1.0);
        let members = f
            .pointer("/properties/members")
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .filter_map(|m| match m {
                        Value::String(s) => Some(EntityId(s.clone())),
                        Value::Number(n) => Some(EntityId(n.to_string())),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default();
        out.push(Entity {
            id,
            geometry,
            weight,
            members,
        });
    }
    Ok(out)
}

fn ring_json(ring: &[Point2D]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(|p| json!([p.x, p.y])).collect();
    if let Some(first) = ring.first() {
        pts.push(json!([first.x, first.y]));
    }
    Value::Array(pts)
}

fn polygon_json(p: &Polygon) -> Value {
    Value::Array(p.rings.iter().map(|r| ring_json(r)).collect())
}

/// Serializes entities as a GeoJSON `FeatureCollection`.
pub fn entities_to_geojson(entities: &[Entity]) -> Value {
    let features: Vec<Value> = entities
        .iter()
        .map(|e| {
            let geometry = match &e.geometry {
                Geometry::Polygon(parts) if parts.len() == 1 => {
                    json!({"type": "Polygon", "coordinates": polygon_json(&parts[0])})
                }
                Geometry::Polygon(parts) => json!({
                    "type": "MultiPolygon",
                    "coordinates": parts.iter().map(polygon_json).collect::<Vec<_>>()
                }),
                Geometry::Polyline(line) => json!({
                    "type": "LineString",
                    "coordinates": line.vertices.iter().map(|p| json!([p.x, p.y])).collect::<Vec<_>>()
                }),
            };
            let mut props = json!({"id": e.id.0, "kind": e.kind().as_str(), "weight": e.weight});
            if !e.members.is_empty() {
                props["members"] = json!(e.members.iter().map(|m| m.0.clone()).collect::<Vec<_>>());
            }
            json!({"type": "Feature", "properties": props, "geometry": geometry})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn read_geojson(path: impl AsRef<Path>) -> Result<Vec<Entity>> {
    entities_from_geojson(&std::fs::read_to_string(path)?)
}

pub fn write_geojson(path: impl AsRef<Path>, entities: &[Entity]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &entities_to_geojson(entities))?;
    f.write_all(b"\n")?;
    Ok(())
}

#[derive(Default)]
struct CsvEntity {
    kind: Option<EntityKind>,
    // part -> ring -> vertices
    parts: BTreeMap<usize, BTreeMap<usize, Vec<Point2D>>>,
}

/// Parses the CSV vertex format (`id,kind,x,y[,part][,ring]`).
pub fn entities_from_csv(reader: impl Read) -> Result<Vec<Entity>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (id_c, kind_c, x_c, y_c) = match (col("id"), col("kind"), col("x"), col("y")) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(Error::Parse("vertex CSV needs columns id, kind, x, y".into())),
    };
    let part_c = col("part");
    let ring_c = col("ring");
    let mut order: Vec<EntityId> = Vec::new();
    let mut acc: BTreeMap<String, CsvEntity> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| -> Result<f64> {
            get(c)
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {}: bad number `{}`", line + 2, get(c))))
        };
        let idx = |c: Option<usize>| -> Result<usize> {
            match c.map(get).filter(|s| !s.is_empty()) {
                None => Ok(0),
                Some(s) => s
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad index `{s}`", line + 2))),
            }
        };
        let id = get(id_c).to_string();
        let kind: EntityKind = get(kind_c).parse()?;
        let entry = acc.entry(id.clone()).or_insert_with(|| {
            order.push(EntityId(id.clone()));
            CsvEntity::default()
        });
        match entry.kind {
            Some(k) if k != kind => {
                return Err(Error::Parse(format!("entity `{id}` mixes kinds")));
            }
            _ => entry.kind = Some(kind),
        }
        entry
            .parts
            .entry(idx(part_c)?)
            .or_default()
            .entry(idx(ring_c)?)
            .or_default()
            .push(Point2D::new(num(x_c)?, num(y_c)?));
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let e = acc.remove(&id.0).expect("recorded id");
        let geometry = match e.kind.expect("kind set on first row") {
            EntityKind::Polygon => Geometry::Polygon(
                e.parts
                    .into_values()
                    .map(|rings| Polygon::new(rings.into_values().collect()))
                    .collect(),
            ),
            EntityKind::Segment => {
                let verts = e.parts.into_values().flat_map(|r| r.into_values()).flatten().collect();
                Geometry::Polyline(Polyline::new(verts))
            }
        };
        out.push(Entity {
            id,
            geometry,
            weight: 1.0,
            members: Vec::new(),
        });
    }
    Ok(out)
}

/// Loads a layer, choosing the format by extension (`.csv` or GeoJSON).
pub fn read_layer(path: impl AsRef<Path>) -> Result<Vec<Entity>> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    if is_csv {
        entities_from_csv(std::fs::File::open(path)?)
    } else {
        read_geojson(path)
    }
}
