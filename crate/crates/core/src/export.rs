//! Cluster map exports in GeoJSON and KML, with structural validators.

use chrono::{DateTime, Utc};
use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::clustering::ClusterKind;
use crate::linguistic::ToponymGazetteer;
use crate::store::Store;
use crate::types::{ClusterId, CountryCode, ToponymId};

/// Clusters need this many members to appear on the map.
pub const MIN_MAP_MEMBERS: usize = 2;
pub const KML_NS: &str = "http://www.opengis.net/kml/2.2";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExportError {
    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),
    #[error("invalid KML: {0}")]
    Kml(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapFilter {
    #[serde(default)]
    pub language: Option<String>,
    /// Only clusters still live in their window.
    #[serde(default)]
    pub live_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub cluster_id: ClusterId,
    pub title: String,
    pub language: String,
    pub size: usize,
    pub toponym_id: ToponymId,
    pub place: String,
    pub country: CountryCode,
    pub latitude: f64,
    pub longitude: f64,
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
}

/// Window clusters with at least [`MIN_MAP_MEMBERS`] members, placed at
/// their most frequent toponym, ascending by cluster id.
pub fn map_points(store: &Store, toponyms: &ToponymGazetteer, filter: &MapFilter) -> Vec<MapPoint> {
    store
        .clusters()
        .filter(|c| c.kind == ClusterKind::Window && c.merged_into.is_none())
        .filter(|c| c.size() >= MIN_MAP_MEMBERS)
        .filter(|c| !filter.live_only || c.live)
        .filter(|c| filter.language.as_ref().is_none_or(|l| c.language == *l))
        .filter_map(|c| {
            let t = toponyms.get(c.main_toponym()?)?;
            Some(MapPoint {
                cluster_id: c.id,
                title: c.title.clone(),
                language: c.language.clone(),
                size: c.size(),
                toponym_id: t.id,
                place: t.name.clone(),
                country: t.country,
                latitude: t.latitude,
                longitude: t.longitude,
                window_start: c.window_start,
                window_end: c.window_end,
            })
        })
        .collect()
}

pub fn cluster_articles_href(id: ClusterId) -> String {
    format!("/v1/clusters/{id}/articles")
}

pub fn to_geojson(points: &[MapPoint]) -> Value {
    let features: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "type": "Feature",
                "id": p.cluster_id,
                "geometry": {"type": "Point", "coordinates": [p.longitude, p.latitude]},
                "properties": {
                    "cluster_id": p.cluster_id,
                    "title": p.title,
                    "language": p.language,
                    "size": p.size,
                    "place": p.place,
                    "country": p.country,
                    "window_start": p.window_start,
                    "window_end": p.window_end,
                    "articles": cluster_articles_href(p.cluster_id),
                }
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn to_kml(points: &[MapPoint]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!("<kml xmlns=\"{KML_NS}\">\n<Document>\n<name>News clusters</name>\n"));
    for p in points {
        out.push_str(&format!(
            "<Placemark id=\"cluster-{id}\">\n<name>{title}</name>\n<description>{size} articles, {lang}, {place}</description>\n\
             <ExtendedData>\n<Data name=\"cluster_id\"><value>{id}</value></Data>\n<Data name=\"size\"><value>{size}</value></Data>\n\
             <Data name=\"articles\"><value>{href}</value></Data>\n</ExtendedData>\n\
             <Point><coordinates>{lon},{lat}</coordinates></Point>\n</Placemark>\n",
            id = p.cluster_id,
            title = escape(&p.title),
            size = p.size,
            lang = escape(&p.language),
            place = escape(&p.place),
            href = escape(cluster_articles_href(p.cluster_id)),
            lon = p.longitude,
            lat = p.latitude,
        ));
    }
    out.push_str("</Document>\n</kml>\n");
    out
}

fn check_position(v: &Value) -> Result<(f64, f64), String> {
    let arr = v.as_array().ok_or("coordinates must be an array")?;
    if !(2..=3).contains(&arr.len()) {
        return Err("a position has 2 or 3 numbers".into());
    }
    let lon = arr[0].as_f64().ok_or("longitude must be a number")?;
    let lat = arr[1].as_f64().ok_or("latitude must be a number")?;
    if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
        return Err(format!("position out of range: {lon},{lat}"));
    }
    Ok((lon, lat))
}

/// Checks a FeatureCollection of Point features with object properties.
/// Returns the feature count.
pub fn validate_geojson(text: &str) -> Result<usize, ExportError> {
    let err = |m: String| ExportError::GeoJson(m);
    let v: Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    if v["type"] != "FeatureCollection" {
        return Err(err("root type must be FeatureCollection".into()));
    }
    let features = v["features"].as_array().ok_or_else(|| err("features must be an array".into()))?;
    for (i, f) in features.iter().enumerate() {
        if f["type"] != "Feature" {
            return Err(err(format!("feature {i}: type must be Feature")));
        }
        if !(f["properties"].is_object() || f["properties"].is_null()) {
            return Err(err(format!("feature {i}: properties must be an object or null")));
        }
        let g = &f["geometry"];
        if g["type"] != "Point" {
            return Err(err(format!("feature {i}: geometry must be a Point")));
        }
        check_position(&g["coordinates"]).map_err(|m| err(format!("feature {i}: {m}")))?;
    }
    Ok(features.len())
}

/// Checks well-formedness and the KML 2.2 structure used here: a `kml`
/// root in the KML namespace holding one `Document` whose `Placemark`s each
/// carry a `name` and a `Point` with valid `coordinates`. Returns the
/// placemark count.
pub fn validate_kml(text: &str) -> Result<usize, ExportError> {
    let err = |m: String| ExportError::Kml(m);
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<String> = Vec::new();
    let mut placemarks = 0;
    let mut has_name = false;
    let mut has_coords = false;
    let mut coord_text = String::new();
    loop {
        match reader.read_event().map_err(|e| err(format!("at byte {}: {e}", reader.buffer_position())))? {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                match (stack.last().map(String::as_str), name.as_str()) {
                    (None, "kml") => {
                        let ns = e
                            .attributes()
                            .filter_map(Result::ok)
                            .find(|a| a.key.as_ref() == b"xmlns")
                            .map(|a| String::from_utf8_lossy(&a.value).into_owned());
                        if ns.as_deref() != Some(KML_NS) {
                            return Err(err("kml root must declare the KML 2.2 namespace".into()));
                        }
                    }
                    (None, other) => return Err(err(format!("root element must be kml, found {other}"))),
                    (Some("kml"), "Document") => {}
                    (Some("kml"), other) => return Err(err(format!("unexpected {other} under kml"))),
                    (Some("Document"), "Placemark") => {
                        has_name = false;
                        has_coords = false;
                    }
                    (Some("Placemark"), "name") => has_name = true,
                    (Some("Point"), "coordinates") => coord_text.clear(),
                    _ => {}
                }
                stack.push(name);
            }
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if stack.pop().as_deref() != Some(name.as_str()) {
                    return Err(err(format!("mismatched closing tag {name}")));
                }
                match name.as_str() {
                    "coordinates" if stack.last().map(String::as_str) == Some("Point") => {
                        let parts: Vec<&str> = coord_text.trim().split(',').collect();
                        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
                        let nums = nums.map_err(|_| err(format!("bad coordinates {coord_text:?}")))?;
                        check_position(&json!(nums)).map_err(err)?;
                        has_coords = true;
                    }
                    "Placemark" => {
                        if !has_name || !has_coords {
                            return Err(err(format!("placemark {} lacks a name or Point coordinates", placemarks + 1)));
                        }
                        placemarks += 1;
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if stack.last().map(String::as_str) == Some("coordinates") {
                    coord_text.push_str(&t.unescape().map_err(|e| err(e.to_string()))?);
                }
            }
            Event::Empty(e) if stack.is_empty() => {
                return Err(err(format!("root element must be kml, found empty {}", String::from_utf8_lossy(e.name().as_ref()))));
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(err("unclosed elements at end of document".into()));
    }
    Ok(placemarks)
}
