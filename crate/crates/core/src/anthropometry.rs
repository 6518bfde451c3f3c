//! Facial anthropometric measurements (AMs) from indexed 3-D landmarks.
//!
//! Three measurement kinds are supported: Euclidean distances between two
//! landmarks, ratios of two such distances, and angles at a vertex landmark.
//! All three are invariant to rigid motion of the scan; ratios and angles are
//! also invariant to uniform scaling.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Definitions reproducing the 20 measurements used by the study
/// (11 distances, 6 proportions, 3 angles).
pub const TABLE1_JSON: &str = include_str!("../../../data/table1_ams.json");

pub const AM_STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point(pub [f64; 3]);

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point([x, y, z])
    }

    fn sub(self, o: Point) -> [f64; 3] {
        [self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]]
    }
}

fn norm(v: [f64; 3]) -> f64 {
    v[0].hypot(v[1]).hypot(v[2])
}

pub fn distance(a: Point, b: Point) -> f64 {
    norm(a.sub(b))
}

pub fn proportion(a1: Point, b1: Point, a2: Point, b2: Point) -> Result<f64> {
    let den = distance(a2, b2);
    if den == 0.0 {
        return Err(Error::DegenerateGeometry(
            "proportion denominator points coincide".into(),
        ));
    }
    Ok(distance(a1, b1) / den)
}

/// Angle at vertex `v` between rays to `a` and `b`, in degrees.
pub fn angle(a: Point, v: Point, b: Point) -> Result<f64> {
    let (u, w) = (a.sub(v), b.sub(v));
    let (nu, nw) = (norm(u), norm(w));
    if nu == 0.0 || nw == 0.0 {
        return Err(Error::DegenerateGeometry(
            "angle ray endpoint coincides with vertex".into(),
        ));
    }
    let dot = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
    Ok((dot / (nu * nw)).clamp(-1.0, 1.0).acos().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmKind {
    Distance,
    Proportion,
    Angle,
}

impl AmKind {
    fn arity(self) -> usize {
        match self {
            AmKind::Distance => 2,
            AmKind::Proportion => 4,
            AmKind::Angle => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmDefinition {
    pub name: String,
    pub kind: AmKind,
    pub indices: Vec<u32>,
}

impl AmDefinition {
    pub fn validate(&self) -> Result<()> {
        if self.indices.len() != self.kind.arity() {
            return Err(Error::Argument(format!(
                "{}: {:?} needs {} indices, got {}",
                self.name,
                self.kind,
                self.kind.arity(),
                self.indices.len()
            )));
        }
        let groups: Vec<&[u32]> = match self.kind {
            AmKind::Proportion => vec![&self.indices[..2], &self.indices[2..]],
            _ => vec![&self.indices[..]],
        };
        for g in groups {
            let distinct: BTreeSet<_> = g.iter().collect();
            if distinct.len() != g.len() {
                return Err(Error::Argument(format!(
                    "{}: repeated landmark index in {g:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

pub fn parse_am_definitions(json: &str) -> Result<Vec<AmDefinition>> {
    let defs: Vec<AmDefinition> =
        serde_json::from_str(json).map_err(|e| Error::Format(format!("AM definitions: {e}")))?;
    for d in &defs {
        d.validate()?;
    }
    let names: BTreeSet<_> = defs.iter().map(|d| &d.name).collect();
    if names.len() != defs.len() {
        return Err(Error::Format("AM definitions: duplicate names".into()));
    }
    Ok(defs)
}

pub fn load_am_definitions(path: impl AsRef<Path>) -> Result<Vec<AmDefinition>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_am_definitions(&text)
}

pub fn table1_definitions() -> Vec<AmDefinition> {
    parse_am_definitions(TABLE1_JSON).expect("bundled AM table is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub subject_id: String,
    pub points: BTreeMap<u32, Point>,
}

impl LandmarkSet {
    /// Indices referenced by `defs` that are absent from this set.
    pub fn missing(&self, defs: &[AmDefinition]) -> Vec<u32> {
        let needed: BTreeSet<u32> = defs.iter().flat_map(|d| d.indices.iter().copied()).collect();
        needed
            .into_iter()
            .filter(|i| !self.points.contains_key(i))
            .collect()
    }

    pub fn check_required(&self, defs: &[AmDefinition]) -> Result<()> {
        let missing = self.missing(defs);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingLandmarks { missing })
        }
    }

    fn point(&self, i: u32) -> Result<Point> {
        self.points
            .get(&i)
            .copied()
            .ok_or(Error::MissingLandmarks { missing: vec![i] })
    }
}

/// Parses `index,x,y,z` rows; a non-numeric first line is treated as a header.
/// The subject id is taken from `subject_id`.
pub fn parse_landmarks_str(subject_id: &str, text: &str, source_name: &str) -> Result<LandmarkSet> {
    let mut points = BTreeMap::new();
    let mut bad = Vec::new();
    let parse_err = |row, message: String| Error::Parse {
        source_name: source_name.to_string(),
        row,
        message,
    };
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if row == 1 && fields[0].parse::<u32>().is_err() {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(row, format!("expected 4 fields, got {}", fields.len())));
        }
        let index: u32 = fields[0]
            .parse()
            .map_err(|_| parse_err(row, format!("bad landmark index {:?}", fields[0])))?;
        let mut xyz = [0.0; 3];
        for (k, f) in fields[1..].iter().enumerate() {
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => xyz[k] = v,
                _ => bad.push(format!("row {row}: coordinate {f:?}")),
            }
        }
        if points.insert(index, Point(xyz)).is_some() {
            return Err(parse_err(row, format!("duplicate landmark index {index}")));
        }
    }
    if !bad.is_empty() {
        return Err(parse_err(0, format!("non-numeric coordinates: {}", bad.join("; "))));
    }
    if points.is_empty() {
        return Err(parse_err(0, "no landmarks".into()));
    }
    Ok(LandmarkSet {
        subject_id: subject_id.to_string(),
        points,
    })
}

pub fn parse_landmarks(path: impl AsRef<Path>) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let subject = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_landmarks_str(&subject, &text, &path.display().to_string())
}

/// Parses a landmark file and checks every index required by `defs` is present.
pub fn parse_landmarks_for(path: impl AsRef<Path>, defs: &[AmDefinition]) -> Result<LandmarkSet> {
    let lm = parse_landmarks(path)?;
    lm.check_required(defs)?;
    Ok(lm)
}

pub fn measure(lm: &LandmarkSet, def: &AmDefinition) -> Result<f64> {
    let p = |k: usize| lm.point(def.indices[k]);
    match def.kind {
        AmKind::Distance => Ok(distance(p(0)?, p(1)?)),
        AmKind::Proportion => proportion(p(0)?, p(1)?, p(2)?, p(3)?),
        AmKind::Angle => angle(p(0)?, p(1)?, p(2)?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmVector {
    pub subject_id: String,
    pub values: Vec<(String, f64)>,
}

impl AmVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.iter().map(|(n, _)| n.as_str())
    }
}

pub fn compute_am_vector(lm: &LandmarkSet, defs: &[AmDefinition]) -> Result<AmVector> {
    lm.check_required(defs)?;
    let values = defs
        .iter()
        .map(|d| {
            measure(lm, d)
                .map(|v| (d.name.clone(), v))
                .map_err(|e| Error::Measurement {
                    am: d.name.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    Ok(AmVector {
        subject_id: lm.subject_id.clone(),
        values,
    })
}

/// Per-AM population mean and standard deviation over a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmNormalizer {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl AmNormalizer {
    pub fn apply(&self, v: &AmVector) -> Result<AmVector> {
        if v.values.len() != self.names.len()
            || v.names().zip(&self.names).any(|(a, b)| a != b)
        {
            return Err(Error::Shape(format!(
                "subject {} does not carry the fitted AM set",
                v.subject_id
            )));
        }
        let values = v
            .values
            .iter()
            .enumerate()
            .map(|(k, (n, x))| (n.clone(), (x - self.mean[k]) / self.std[k]))
            .collect();
        Ok(AmVector {
            subject_id: v.subject_id.clone(),
            values,
        })
    }
}

pub fn normalize_ams(cohort: &[AmVector]) -> Result<(Vec<AmVector>, AmNormalizer)> {
    if cohort.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "AM normalization needs at least 2 subjects, got {}",
            cohort.len()
        )));
    }
    let names: Vec<String> = cohort[0].names().map(str::to_string).collect();
    let n = cohort.len() as f64;
    let k = names.len();
    let mut mean = vec![0.0; k];
    for v in cohort {
        if v.values.len() != k || v.names().zip(&names).any(|(a, b)| a != b) {
            return Err(Error::Shape(format!(
                "subject {} has a different AM set",
                v.subject_id
            )));
        }
        for (m, (_, x)) in mean.iter_mut().zip(&v.values) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; k];
    for v in cohort {
        for (j, (_, x)) in v.values.iter().enumerate() {
            var[j] += (x - mean[j]).powi(2) / n;
        }
    }
    let stats = AmNormalizer {
        names,
        mean,
        std: var.iter().map(|s| s.sqrt().max(AM_STD_FLOOR)).collect(),
    };
    let out = cohort.iter().map(|v| stats.apply(v)).collect::<Result<_>>()?;
    Ok((out, stats))
}

/// Writes `subject_id,<am names...>` with full round-trip precision.
pub fn write_am_csv(path: impl AsRef<Path>, rows: &[AmVector]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("subject_id");
    if let Some(first) = rows.first() {
        for n in first.names() {
            out.push(',');
            out.push_str(n);
        }
    }
    out.push('\n');
    for r in rows {
        out.push_str(&r.subject_id);
        for (_, v) in &r.values {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_am_csv(path: impl AsRef<Path>) -> Result<Vec<AmVector>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let src = path.display().to_string();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        source_name: src.clone(),
        row: 1,
        message: "empty AM file".into(),
    })?;
    let names: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    lines
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != names.len() + 1 {
                return Err(Error::Parse {
                    source_name: src.clone(),
                    row: i + 1,
                    message: format!("expected {} fields, got {}", names.len() + 1, f.len()),
                });
            }
            let values = names
                .iter()
                .zip(&f[1..])
                .map(|(n, v)| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(|x| (n.clone(), x))
                        .ok_or_else(|| Error::Parse {
                            source_name: src.clone(),
                            row: i + 1,
                            message: format!("bad value {v:?} for {n}"),
                        })
                })
                .collect::<Result<_>>()?;
            Ok(AmVector {
                subject_id: f[0].to_string(),
                values,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn table_has_twenty_entries() {
        let defs = table1_definitions();
        assert_eq!(defs.len(), 20);
        let count = |k| defs.iter().filter(|d| d.kind == k).count();
        assert_eq!(count(AmKind::Distance), 11);
        assert_eq!(count(AmKind::Proportion), 6);
        assert_eq!(count(AmKind::Angle), 3);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(p(0., 0., 0.), p(3., 4., 0.)), 5.0);
        assert_eq!(distance(p(1., 2., 3.), p(1., 2., 3.)), 0.0);
    }

    #[test]
    fn proportion_examples() {
        let o = p(0., 0., 0.);
        assert_eq!(proportion(o, p(2., 0., 0.), o, p(1., 0., 0.)).unwrap(), 2.0);
        let (a, b) = (p(1., 2., 3.), p(-4., 0.5, 9.));
        assert_eq!(proportion(a, b, a, b).unwrap(), 1.0);
        assert!(matches!(
            proportion(a, b, o, o),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn angle_examples() {
        let o = p(0., 0., 0.);
        assert!((angle(p(1., 0., 0.), o, p(0., 1., 0.)).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(angle(p(1., 0., 0.), o, p(5., 0., 0.)).unwrap(), 0.0);
        // nearly antiparallel rays whose cosine can round past -1
        let a = p(1e-17, 1.0, 0.0);
        let b = p(0.0, -3.0, 0.0);
        assert_eq!(angle(a, o, b).unwrap(), 180.0);
        assert!(angle(o, o, b).is_err());
        assert!(angle(a, o, o).is_err());
    }

    #[test]
    fn definition_arity_checked() {
        let bad = AmDefinition {
            name: "x".into(),
            kind: AmKind::Angle,
            indices: vec![1, 2],
        };
        assert!(bad.validate().is_err());
        let dup = AmDefinition {
            name: "y".into(),
            kind: AmKind::Distance,
            indices: vec![3, 3],
        };
        assert!(dup.validate().is_err());
        // a proportion may reuse an index across its two pairs
        let ok = AmDefinition {
            name: "z".into(),
            kind: AmKind::Proportion,
            indices: vec![1, 2, 2, 3],
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn parse_rows_and_header() {
        let lm = parse_landmarks_str("s1", "index,x,y,z\n31,0.0,1.0,2.0\n", "t").unwrap();
        assert_eq!(lm.points[&31], p(0., 1., 2.));
        let lm = parse_landmarks_str("s1", "31,0.0,1.0,2.0\n", "t").unwrap();
        assert_eq!(lm.points.len(), 1);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_landmarks_str("s", "", "t").is_err());
        let e = parse_landmarks_str("s", "1,0,0,0\n1,1,1,1\n", "t").unwrap_err();
        assert!(e.to_string().contains("duplicate landmark index 1"));
        let e = parse_landmarks_str("s", "1,a,0,0\n2,0,b,0\n", "t").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("row 1") && msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn missing_index_named() {
        let lm = parse_landmarks_str("s", "31,0,0,0\n37,1,0,0\n", "t").unwrap();
        let defs = vec![AmDefinition {
            name: "31-30-37".into(),
            kind: AmKind::Angle,
            indices: vec![31, 30, 37],
        }];
        match compute_am_vector(&lm, &defs) {
            Err(Error::MissingLandmarks { missing }) => assert_eq!(missing, vec![30]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_measurement_names_am() {
        let lm = parse_landmarks_str("s", "1,0,0,0\n2,0,0,0\n3,1,0,0\n", "t").unwrap();
        let defs = vec![AmDefinition {
            name: "ratio".into(),
            kind: AmKind::Proportion,
            indices: vec![1, 3, 1, 2],
        }];
        let e = compute_am_vector(&lm, &defs).unwrap_err();
        assert!(matches!(e, Error::Measurement { ref am, .. } if am == "ratio"));
    }

    #[test]
    fn empty_definitions_give_empty_vector() {
        let lm = parse_landmarks_str("s", "1,0,0,0\n", "t").unwrap();
        assert!(compute_am_vector(&lm, &[]).unwrap().values.is_empty());
    }

    #[test]
    fn two_subject_zscore() {
        let mk = |id: &str, v: f64, c: f64| AmVector {
            subject_id: id.into(),
            values: vec![("a".into(), v), ("c".into(), c)],
        };
        let (out, stats) = normalize_ams(&[mk("s1", 10.0, 7.0), mk("s2", 20.0, 7.0)]).unwrap();
        assert_eq!(out[0].get("a"), Some(-1.0));
        assert_eq!(out[1].get("a"), Some(1.0));
        assert_eq!(out[0].get("c"), Some(0.0));
        assert_eq!(stats.mean, vec![15.0, 7.0]);
        assert!(normalize_ams(&[mk("s1", 1.0, 1.0)]).is_err());
    }

    #[test]
    fn am_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ams.csv");
        let rows = vec![AmVector {
            subject_id: "s1".into(),
            values: vec![("31-37".into(), 0.1 + 0.2), ("31-30-37".into(), -1e-300)],
        }];
        write_am_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("subject_id,31-37,31-30-37\n"));
        assert_eq!(read_am_csv(&path).unwrap(), rows);
    }
}
