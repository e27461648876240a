//! Deterministic image-method ray tracer.
//!
//! For every feasible UT location the tracer evaluates one line-of-sight
//! path plus one first-order specular reflection per scene plane, so each
//! BS-UT pair always yields `1 + plane_count` path slots. Slots that fail a
//! geometric or power test are kept with a non-existent encoding: all five
//! parameters zero and RSS of negative infinity. Free-space loss follows
//! a molecular-absorption-scaled power law; reflections add the material
//! loss `-20 log10(Rc * Rs)`.

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::scene::{FaceGeom, Plane, Scene, GEOM_TOL};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write as _;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radio-link parameters. Defaults describe the reference indoor scenario:
/// 28 GHz carrier, exponent 2.1, no molecular absorption, 34.5 dBm EIRP
/// carried entirely by `tx_power_dbm` (antenna gain 0), 2.5 dBi receive
/// directivity, 25 dB existence margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub frequency_hz: f64,
    pub path_loss_exponent: f64,
    /// Absorption coefficient k in 1/m; loss scale is exp(d * k).
    pub absorption_coefficient: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub existence_margin_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            frequency_hz: 28e9,
            path_loss_exponent: 2.1,
            absorption_coefficient: 0.0,
            tx_power_dbm: 34.5,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 2.5,
            existence_margin_db: 25.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "carrier frequency must be positive, got {}",
                self.frequency_hz
            )));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "path-loss exponent must be positive, got {}",
                self.path_loss_exponent
            )));
        }
        if self.absorption_coefficient < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "absorption coefficient must be non-negative, got {}",
                self.absorption_coefficient
            )));
        }
        if !(self.existence_margin_db > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "existence margin must be positive, got {} dB",
                self.existence_margin_db
            )));
        }
        Ok(())
    }

    /// Transmit EIRP in dBm.
    pub fn eirp_dbm(&self) -> f64 {
        self.tx_power_dbm + self.tx_gain_dbi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Los,
    Refl,
}

impl std::fmt::Display for PathKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathKind::Los => write!(f, "los"),
            PathKind::Refl => write!(f, "refl"),
        }
    }
}

impl std::str::FromStr for PathKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "los" => Ok(PathKind::Los),
            "refl" => Ok(PathKind::Refl),
            other => Err(format!("unknown path kind `{other}`")),
        }
    }
}

/// One path slot of one BS-UT pair. Angles are radians in [-pi, pi]
/// (azimuth) and [-pi/2, pi/2] (elevation); delay is seconds; RSS is dBm.
/// Non-existent slots carry all-zero parameters and RSS -inf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub ut_index: usize,
    pub kind: PathKind,
    pub plane_id: Option<usize>,
    pub aaod: f64,
    pub eaod: f64,
    pub aaoa: f64,
    pub eaoa: f64,
    pub delay_s: f64,
    pub rss_dbm: f64,
    pub existent: bool,
}

impl PathRecord {
    pub fn non_existent(ut_index: usize, kind: PathKind, plane_id: Option<usize>) -> PathRecord {
        PathRecord {
            ut_index,
            kind,
            plane_id,
            aaod: 0.0,
            eaod: 0.0,
            aaoa: 0.0,
            eaoa: 0.0,
            delay_s: 0.0,
            rss_dbm: f64::NEG_INFINITY,
            existent: false,
        }
    }

    /// Clustering feature vector [aaod, eaod, aaoa, eaoa, delay].
    pub fn features(&self) -> [f64; 5] {
        [self.aaod, self.eaod, self.aaoa, self.eaoa, self.delay_s]
    }
}

/// Why a reflection slot came back non-existent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionFailure {
    BsOnPlane,
    UtOnPlane,
    /// BS and UT sit on opposite sides of the reflecting plane.
    OppositeSides,
    /// The mirrored segment crosses the supporting plane outside the polygon.
    MissesPolygon,
    FirstSegmentBlocked,
    SecondSegmentBlocked,
    /// Material with Rc * Rs = 0: infinite reflection loss.
    NoReflectivity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Point3,
    pub end: Point3,
}

/// Azimuth, elevation, and length of the segment direction (start -> end).
/// Azimuth is atan2(y, x); elevation is atan2(z, sqrt(x^2 + y^2)).
pub fn to_spherical(seg: Segment) -> Result<(f64, f64, f64)> {
    let v = seg.end - seg.start;
    let d = v.norm();
    if d == 0.0 {
        return Err(Error::InvalidArgument(
            "zero-length segment has no direction".into(),
        ));
    }
    let az = v.y.atan2(v.x);
    let el = v.z.atan2(v.x.hypot(v.y));
    Ok((az, el, d))
}

/// Free-space loss in dB at distance `d` (meters):
/// `-10 log10(lambda^2 / (A * (4 pi)^2 * d^eta))` with `A = exp(d * k)`.
pub fn path_loss_fspl(d: f64, cfg: &RadioConfig) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "path length must be positive, got {d}"
        )));
    }
    let lambda = SPEED_OF_LIGHT / cfg.frequency_hz;
    let absorption = (d * cfg.absorption_coefficient).exp();
    let ratio = lambda * lambda
        / (absorption * (4.0 * std::f64::consts::PI).powi(2) * d.powf(cfg.path_loss_exponent));
    Ok(-10.0 * ratio.log10())
}

/// Reflection loss in dB: `-20 log10(Rc * Rs)`. A zero product signals
/// infinite loss (the path is forced non-existent).
pub fn reflection_loss(material: &crate::scene::Material) -> f64 {
    let product = material.reflection_coefficient * material.roughness_factor;
    if product == 0.0 {
        f64::INFINITY
    } else {
        -20.0 * product.log10()
    }
}

fn intersect_face(seg: Segment, face: &FaceGeom) -> Option<Point3> {
    let d0 = face.normal.dot(seg.start) - face.d;
    let d1 = face.normal.dot(seg.end) - face.d;
    // Endpoints on the plane (within tolerance) never count as crossings;
    // this also covers segments lying inside the plane.
    if d0.abs() <= GEOM_TOL || d1.abs() <= GEOM_TOL {
        return None;
    }
    if (d0 > 0.0) == (d1 > 0.0) {
        return None;
    }
    let t = d0 / (d0 - d1);
    let p = seg.start + (seg.end - seg.start) * t;
    if face.contains_projected(p) {
        Some(p)
    } else {
        None
    }
}

/// Intersection of the open segment with the polygon interior, or None.
pub fn segment_plane_intersect(seg: Segment, plane: &Plane) -> Option<Point3> {
    intersect_face(seg, &FaceGeom::of(plane))
}

/// Prepared view of a scene for repeated tracing queries.
pub struct Tracer<'a> {
    scene: &'a Scene,
    faces: Vec<FaceGeom>,
    refl_loss_db: Vec<f64>,
}

impl<'a> Tracer<'a> {
    pub fn new(scene: &'a Scene) -> Result<Tracer<'a>> {
        let faces: Vec<FaceGeom> = scene.planes.iter().map(FaceGeom::of).collect();
        let refl_loss_db = scene
            .planes
            .iter()
            .map(|p| scene.material_of(p).map(reflection_loss))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Tracer {
            scene,
            faces,
            refl_loss_db,
        })
    }

    fn blocked(&self, seg: Segment, skip: Option<usize>) -> bool {
        self.faces
            .iter()
            .enumerate()
            .any(|(i, f)| Some(i) != skip && intersect_face(seg, f).is_some())
    }

    fn received_power_dbm(&self, total_length: f64, extra_loss_db: f64, cfg: &RadioConfig) -> Result<f64> {
        let loss = path_loss_fspl(total_length, cfg)? + extra_loss_db;
        Ok(cfg.eirp_dbm() + cfg.rx_gain_dbi - loss)
    }

    pub fn los(&self, ut: Point3, ut_index: usize, cfg: &RadioConfig) -> Result<PathRecord> {
        let bs = self.scene.bs_position;
        if (ut - bs).norm() == 0.0 {
            return Err(Error::InvalidArgument(
                "UT coincides with the BS position".into(),
            ));
        }
        let seg = Segment { start: bs, end: ut };
        if self.blocked(seg, None) {
            return Ok(PathRecord::non_existent(ut_index, PathKind::Los, None));
        }
        let (az, el, d) = to_spherical(seg)?;
        Ok(PathRecord {
            ut_index,
            kind: PathKind::Los,
            plane_id: None,
            aaod: az,
            eaod: el,
            aaoa: az,
            eaoa: el,
            delay_s: d / SPEED_OF_LIGHT,
            rss_dbm: self.received_power_dbm(d, 0.0, cfg)?,
            existent: true,
        })
    }

    pub fn reflection(
        &self,
        ut: Point3,
        ut_index: usize,
        plane_index: usize,
        cfg: &RadioConfig,
    ) -> Result<(PathRecord, Option<ReflectionFailure>)> {
        if plane_index >= self.faces.len() {
            return Err(Error::InvalidArgument(format!(
                "plane index {plane_index} out of range ({} planes)",
                self.faces.len()
            )));
        }
        let bs = self.scene.bs_position;
        if (ut - bs).norm() == 0.0 {
            return Err(Error::InvalidArgument(
                "UT coincides with the BS position".into(),
            ));
        }
        let fail = |reason| {
            Ok((
                PathRecord::non_existent(ut_index, PathKind::Refl, Some(plane_index)),
                Some(reason),
            ))
        };
        let face = &self.faces[plane_index];
        let sd_bs = face.normal.dot(bs) - face.d;
        let sd_ut = face.normal.dot(ut) - face.d;
        if sd_bs.abs() <= GEOM_TOL {
            return fail(ReflectionFailure::BsOnPlane);
        }
        if sd_ut.abs() <= GEOM_TOL {
            return fail(ReflectionFailure::UtOnPlane);
        }
        if (sd_bs > 0.0) != (sd_ut > 0.0) {
            return fail(ReflectionFailure::OppositeSides);
        }
        // Mirror the BS across the supporting plane; the specular point is
        // where the image-to-UT segment crosses the plane.
        let image = bs - face.normal * (2.0 * sd_bs);
        let t = sd_bs / (sd_bs + sd_ut);
        let rp = image + (ut - image) * t;
        if !face.contains_projected(rp) {
            return fail(ReflectionFailure::MissesPolygon);
        }
        if self.blocked(Segment { start: bs, end: rp }, Some(plane_index)) {
            return fail(ReflectionFailure::FirstSegmentBlocked);
        }
        if self.blocked(Segment { start: rp, end: ut }, Some(plane_index)) {
            return fail(ReflectionFailure::SecondSegmentBlocked);
        }
        let loss_db = self.refl_loss_db[plane_index];
        if loss_db.is_infinite() {
            return fail(ReflectionFailure::NoReflectivity);
        }
        let (aaod, eaod, d1) = to_spherical(Segment { start: bs, end: rp })?;
        let (aaoa, eaoa, d2) = to_spherical(Segment { start: rp, end: ut })?;
        let record = PathRecord {
            ut_index,
            kind: PathKind::Refl,
            plane_id: Some(plane_index),
            aaod,
            eaod,
            aaoa,
            eaoa,
            delay_s: (d1 + d2) / SPEED_OF_LIGHT,
            rss_dbm: self.received_power_dbm(d1 + d2, loss_db, cfg)?,
            existent: true,
        };
        Ok((record, None))
    }

    /// All `1 + plane_count` slots of one pair, existence margin applied.
    pub fn location(&self, ut: Point3, ut_index: usize, cfg: &RadioConfig) -> Result<Vec<PathRecord>> {
        let mut records = Vec::with_capacity(1 + self.faces.len());
        records.push(self.los(ut, ut_index, cfg)?);
        for plane_index in 0..self.faces.len() {
            records.push(self.reflection(ut, ut_index, plane_index, cfg)?.0);
        }
        Ok(apply_existence_threshold(records, cfg.existence_margin_db))
    }
}

/// Marks every existent path whose RSS falls strictly more than `margin_db`
/// below the pair's strongest path as non-existent. Slots already
/// non-existent are passed through.
pub fn apply_existence_threshold(records: Vec<PathRecord>, margin_db: f64) -> Vec<PathRecord> {
    let best = records
        .iter()
        .filter(|r| r.existent)
        .map(|r| r.rss_dbm)
        .fold(f64::NEG_INFINITY, f64::max);
    if best.is_infinite() {
        return records;
    }
    records
        .into_iter()
        .map(|r| {
            if r.existent && r.rss_dbm < best - margin_db {
                PathRecord::non_existent(r.ut_index, r.kind, r.plane_id)
            } else {
                r
            }
        })
        .collect()
}

pub fn trace_los(scene: &Scene, ut: Point3, ut_index: usize, cfg: &RadioConfig) -> Result<PathRecord> {
    Tracer::new(scene)?.los(ut, ut_index, cfg)
}

pub fn trace_reflection(
    scene: &Scene,
    ut: Point3,
    ut_index: usize,
    plane_index: usize,
    cfg: &RadioConfig,
) -> Result<(PathRecord, Option<ReflectionFailure>)> {
    Tracer::new(scene)?.reflection(ut, ut_index, plane_index, cfg)
}

/// Traces every location (index = position in `locations`), fanning pairs
/// out over a worker pool. Output order is by ut_index then slot, identical
/// to a sequential run.
pub fn trace_all(scene: &Scene, locations: &[Point3], cfg: &RadioConfig) -> Result<Vec<PathRecord>> {
    cfg.validate()?;
    let tracer = Tracer::new(scene)?;
    let per_location: Vec<Result<Vec<PathRecord>>> = locations
        .par_iter()
        .enumerate()
        .map(|(i, ut)| tracer.location(*ut, i, cfg))
        .collect();
    let mut out = Vec::with_capacity(locations.len() * (1 + scene.planes.len()));
    for r in per_location {
        out.extend(r?);
    }
    Ok(out)
}

// ── Path database I/O and summary ───────────────────────────────────────────

const PATH_DB_HEADER: [&str; 10] = [
    "ut_index", "kind", "plane_id", "aaod", "eaod", "aaoa", "eaoa", "delay_s", "rss_dbm",
    "existent",
];

/// Writes the path database CSV. Floats use shortest round-trip formatting;
/// non-existent RSS serializes as the literal token `-inf`.
pub fn write_path_db(path: &std::path::Path, records: &[PathRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(PATH_DB_HEADER)?;
    for r in records {
        w.write_record(&[
            r.ut_index.to_string(),
            r.kind.to_string(),
            r.plane_id.map(|p| p.to_string()).unwrap_or_default(),
            r.aaod.to_string(),
            r.eaod.to_string(),
            r.aaoa.to_string(),
            r.eaoa.to_string(),
            r.delay_s.to_string(),
            r.rss_dbm.to_string(),
            r.existent.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_path_db(path: &std::path::Path) -> Result<Vec<PathRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |j: usize| -> Result<&str> {
            row.get(j).ok_or_else(|| Error::InvalidArgument(format!(
                "path db row {i}: missing column {j}"
            )))
        };
        let parse_f = |j: usize| -> Result<f64> {
            field(j)?.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("path db row {i}: bad float `{}`", row.get(j).unwrap_or("")))
            })
        };
        let plane_raw = field(2)?;
        out.push(PathRecord {
            ut_index: field(0)?.parse().map_err(|_| {
                Error::InvalidArgument(format!("path db row {i}: bad ut_index"))
            })?,
            kind: field(1)?.parse().map_err(Error::InvalidArgument)?,
            plane_id: if plane_raw.is_empty() {
                None
            } else {
                Some(plane_raw.parse().map_err(|_| {
                    Error::InvalidArgument(format!("path db row {i}: bad plane_id"))
                })?)
            },
            aaod: parse_f(3)?,
            eaod: parse_f(4)?,
            aaoa: parse_f(5)?,
            eaoa: parse_f(6)?,
            delay_s: parse_f(7)?,
            rss_dbm: parse_f(8)?,
            existent: field(9)? == "true",
        });
    }
    Ok(out)
}

/// Aggregate connectivity counts over a traced path database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub locations: usize,
    pub linked_locations: usize,
    pub blocked_locations: usize,
    pub slots_per_location: usize,
    pub total_slots: usize,
    pub existent_paths: usize,
    pub existent_los: usize,
    pub existent_reflections: usize,
    /// linked / locations.
    pub coverage: f64,
}

pub fn summarize(records: &[PathRecord], locations: usize, planes: usize) -> TraceSummary {
    let mut linked = vec![false; locations];
    let mut existent = 0usize;
    let mut existent_los = 0usize;
    for r in records {
        if r.existent {
            existent += 1;
            if r.ut_index < locations {
                linked[r.ut_index] = true;
            }
            if r.kind == PathKind::Los {
                existent_los += 1;
            }
        }
    }
    let linked_locations = linked.iter().filter(|b| **b).count();
    TraceSummary {
        locations,
        linked_locations,
        blocked_locations: locations - linked_locations,
        slots_per_location: 1 + planes,
        total_slots: records.len(),
        existent_paths: existent,
        existent_los,
        existent_reflections: existent - existent_los,
        coverage: if locations == 0 {
            0.0
        } else {
            linked_locations as f64 / locations as f64
        },
    }
}

pub fn write_summary(path: &std::path::Path, summary: &TraceSummary) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let text = serde_json::to_string_pretty(summary)?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(b"\n")
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use crate::scene::Material;
    use std::collections::BTreeMap;

    fn materials() -> BTreeMap<String, Material> {
        let mut m = BTreeMap::new();
        m.insert(
            "plaster".to_string(),
            Material {
                reflection_coefficient: 0.5,
                roughness_factor: 1.0,
            },
        );
        m.insert(
            "dead".to_string(),
            Material {
                reflection_coefficient: 0.0,
                roughness_factor: 1.0,
            },
        );
        m
    }

    fn plane(material: &str, pts: &[[f64; 3]]) -> Plane {
        Plane {
            object_tag: None,
            material_id: material.into(),
            vertices: pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect(),
        }
    }

    fn scene_with(planes: Vec<Plane>, bs: Point3) -> Scene {
        Scene {
            materials: materials(),
            planes,
            bs_position: bs,
            bounds: Aabb {
                min: Point3::new(-20.0, -20.0, -20.0),
                max: Point3::new(20.0, 20.0, 20.0),
            },
            resolution: 0.0,
        }
    }

    fn floor() -> Plane {
        plane(
            "plaster",
            &[[-10.0, -10.0, 0.0], [10.0, -10.0, 0.0], [10.0, 10.0, 0.0], [-10.0, 10.0, 0.0]],
        )
    }

    fn cfg_free() -> RadioConfig {
        RadioConfig {
            path_loss_exponent: 2.0,
            tx_power_dbm: 0.0,
            rx_gain_dbi: 0.0,
            ..RadioConfig::default()
        }
    }

    #[test]
    fn fspl_reference_point_28ghz_1m() {
        let cfg = cfg_free();
        let loss = path_loss_fspl(1.0, &cfg).unwrap();
        assert!((loss - 61.39).abs() <= 0.01, "got {loss}");
    }

    #[test]
    fn fspl_exponent_adds_eta_decades() {
        let cfg = RadioConfig {
            path_loss_exponent: 2.1,
            ..cfg_free()
        };
        let at1 = path_loss_fspl(1.0, &cfg).unwrap();
        let at10 = path_loss_fspl(10.0, &cfg).unwrap();
        assert!((at10 - at1 - 21.0).abs() < 1e-9, "exponent 2.1 adds 21 dB per decade");
        assert!((at10 - 82.39).abs() <= 0.02, "got {at10}");
    }

    #[test]
    fn zero_absorption_is_exactly_neutral() {
        let cfg = cfg_free();
        let lambda = SPEED_OF_LIGHT / cfg.frequency_hz;
        let d: f64 = 3.7;
        let bare = -10.0
            * (lambda * lambda / ((4.0 * std::f64::consts::PI).powi(2) * d.powf(2.0))).log10();
        assert_eq!(path_loss_fspl(d, &cfg).unwrap(), bare);
    }

    #[test]
    fn fspl_rejects_non_positive_distance() {
        assert!(path_loss_fspl(0.0, &cfg_free()).is_err());
        assert!(path_loss_fspl(-1.0, &cfg_free()).is_err());
    }

    #[test]
    fn reflection_loss_values() {
        let m = |rc, rs| Material {
            reflection_coefficient: rc,
            roughness_factor: rs,
        };
        assert_eq!(reflection_loss(&m(1.0, 1.0)), 0.0);
        assert!((reflection_loss(&m(0.5, 1.0)) - 6.0206).abs() < 1e-3);
        assert!((reflection_loss(&m(0.5, 0.5)) - 12.0412).abs() < 2e-3);
        assert!(reflection_loss(&m(0.0, 1.0)).is_infinite());
    }

    #[test]
    fn spherical_of_diagonal_segment() {
        let seg = Segment {
            start: Point3::ZERO,
            end: Point3::new(1.0, 1.0, 2.0_f64.sqrt()),
        };
        let (az, el, d) = to_spherical(seg).unwrap();
        assert!((az - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((el - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((d - 2.0).abs() < 1e-15);
        assert!(to_spherical(Segment {
            start: Point3::ZERO,
            end: Point3::ZERO
        })
        .is_err());
    }

    #[test]
    fn los_in_empty_scene_points_along_x() {
        let scene = scene_with(vec![], Point3::ZERO);
        let cfg = cfg_free();
        let r = trace_los(&scene, Point3::new(1.0, 0.0, 0.0), 0, &cfg).unwrap();
        assert!(r.existent);
        assert_eq!(r.aaod, 0.0);
        assert_eq!(r.eaod, 0.0);
        assert_eq!(r.delay_s, 1.0 / SPEED_OF_LIGHT);
        assert!((r.rss_dbm + 61.39).abs() < 0.01);
    }

    #[test]
    fn los_3_4_5_geometry() {
        let scene = scene_with(vec![], Point3::new(0.0, 0.0, 2.0));
        let r = trace_los(&scene, Point3::new(3.0, 4.0, 2.0), 7, &cfg_free()).unwrap();
        assert_eq!(r.ut_index, 7);
        assert_eq!(r.delay_s, 5.0 / SPEED_OF_LIGHT);
        assert!((r.aaod - 4.0f64.atan2(3.0)).abs() < 1e-15);
        assert_eq!(r.eaod, 0.0);
        assert_eq!(r.aaoa, r.aaod);
    }

    #[test]
    fn los_blocked_by_wall_is_non_existent() {
        let wall = plane(
            "plaster",
            &[[1.0, -5.0, -5.0], [1.0, 5.0, -5.0], [1.0, 5.0, 5.0], [1.0, -5.0, 5.0]],
        );
        let scene = scene_with(vec![wall], Point3::ZERO);
        let r = trace_los(&scene, Point3::new(2.0, 0.0, 0.0), 0, &cfg_free()).unwrap();
        assert!(!r.existent);
        assert_eq!(r.rss_dbm, f64::NEG_INFINITY);
        assert_eq!(r.features(), [0.0; 5]);
    }

    #[test]
    fn floor_reflection_hits_midpoint() {
        let scene = scene_with(vec![floor()], Point3::new(0.0, 0.0, 2.0));
        let cfg = cfg_free();
        let (r, fail) = trace_reflection(&scene, Point3::new(4.0, 0.0, 2.0), 0, 0, &cfg).unwrap();
        assert_eq!(fail, None);
        assert!(r.existent);
        let d = 4.0 * 2.0f64.sqrt();
        assert!((r.delay_s - d / SPEED_OF_LIGHT).abs() < 1e-18);
        // Departure dips toward the floor, arrival rises away from it.
        assert_eq!(r.aaod, 0.0);
        assert!((r.eaod + std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!((r.eaoa - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        // RSS equals LoS at the unfolded length minus the material loss.
        let unfolded = path_loss_fspl(d, &cfg).unwrap();
        assert!((r.rss_dbm - (-unfolded - 6.020599913279624)).abs() < 1e-9);
    }

    #[test]
    fn reflection_respects_incidence_equals_reflection() {
        let scene = scene_with(vec![floor()], Point3::new(-1.5, 2.0, 3.0));
        let (r, fail) =
            trace_reflection(&scene, Point3::new(5.0, -3.0, 1.0), 0, 0, &cfg_free()).unwrap();
        assert_eq!(fail, None);
        // Reconstruct the specular point from the record's departure ray.
        let bs = scene.bs_position;
        let dir = Point3::new(
            r.eaod.cos() * r.aaod.cos(),
            r.eaod.cos() * r.aaod.sin(),
            r.eaod.sin(),
        );
        let t = -bs.z / dir.z;
        let rp = bs + dir * t;
        let n = Point3::new(0.0, 0.0, 1.0);
        let d1 = (rp - bs).normalized();
        let d2 = (Point3::new(5.0, -3.0, 1.0) - rp).normalized();
        let inc = d1.dot(n).abs().acos();
        let out = d2.dot(n).abs().acos();
        assert!((inc - out).abs() < 1e-9);
    }

    #[test]
    fn reflection_failure_reasons() {
        let scene = scene_with(vec![floor()], Point3::new(0.0, 0.0, 2.0));
        let cfg = cfg_free();
        // UT below the floor: opposite sides.
        let (r, fail) =
            trace_reflection(&scene, Point3::new(1.0, 0.0, -1.0), 0, 0, &cfg).unwrap();
        assert!(!r.existent);
        assert_eq!(fail, Some(ReflectionFailure::OppositeSides));
        // UT far beyond the polygon edge: mirrored segment misses it.
        let (_, fail) =
            trace_reflection(&scene, Point3::new(39.0, 0.0, 2.1), 0, 0, &cfg).unwrap();
        assert_eq!(fail, Some(ReflectionFailure::MissesPolygon));
        // Non-reflective material.
        let mut dead = scene_with(vec![floor()], Point3::new(0.0, 0.0, 2.0));
        dead.planes[0].material_id = "dead".into();
        let (r, fail) = trace_reflection(&dead, Point3::new(4.0, 0.0, 2.0), 0, 0, &cfg).unwrap();
        assert!(!r.existent);
        assert_eq!(fail, Some(ReflectionFailure::NoReflectivity));
    }

    #[test]
    fn reflection_blocked_by_obstacle() {
        // A wall between the specular point (2,0,0) and the UT.
        let wall = plane(
            "plaster",
            &[[3.0, -1.0, 0.5], [3.0, 1.0, 0.5], [3.0, 1.0, 3.5], [3.0, -1.0, 3.5]],
        );
        let scene = scene_with(vec![floor(), wall], Point3::new(0.0, 0.0, 2.0));
        let (r, fail) =
            trace_reflection(&scene, Point3::new(4.0, 0.0, 2.0), 0, 0, &cfg_free()).unwrap();
        assert!(!r.existent);
        assert_eq!(fail, Some(ReflectionFailure::SecondSegmentBlocked));
    }

    #[test]
    fn existence_margin_prunes_strictly() {
        let mk = |rss: f64| PathRecord {
            rss_dbm: rss,
            existent: true,
            ..PathRecord::non_existent(0, PathKind::Los, None)
        };
        let out = apply_existence_threshold(vec![mk(-30.0), mk(-40.0), mk(-60.0)], 25.0);
        assert_eq!(
            out.iter().map(|r| r.existent).collect::<Vec<_>>(),
            [true, true, false]
        );
        // Boundary is strict: exactly margin below survives.
        let out = apply_existence_threshold(vec![mk(-30.0), mk(-55.0)], 25.0);
        assert!(out[1].existent);
        // A single existent path is never pruned.
        let out = apply_existence_threshold(vec![mk(-90.0)], 25.0);
        assert!(out[0].existent);
    }

    #[test]
    fn location_count_conservation() {
        let scene = scene_with(vec![floor()], Point3::new(0.0, 0.0, 2.0));
        let cfg = cfg_free();
        let recs = trace_all(
            &scene,
            &[Point3::new(4.0, 0.0, 2.0), Point3::new(-3.0, 1.0, 1.0)],
            &cfg,
        )
        .unwrap();
        assert_eq!(recs.len(), 2 * (1 + scene.planes.len()));
        assert!(recs.iter().take(2).all(|r| r.ut_index == 0));
    }

    #[test]
    fn reciprocity_of_existence_and_rss() {
        let wall = plane(
            "plaster",
            &[[2.0, -3.0, -3.0], [2.0, 3.0, -3.0], [2.0, 3.0, 3.0], [2.0, -3.0, 3.0]],
        );
        let a = scene_with(vec![floor(), wall.clone()], Point3::new(-2.0, 0.5, 1.5));
        let b = scene_with(vec![floor(), wall], Point3::new(5.0, -1.0, 2.0));
        let cfg = cfg_free();
        let fwd = Tracer::new(&a).unwrap().location(b.bs_position, 0, &cfg).unwrap();
        let rev = Tracer::new(&b).unwrap().location(a.bs_position, 0, &cfg).unwrap();
        for (f, r) in fwd.iter().zip(&rev) {
            assert_eq!(f.existent, r.existent);
            if f.existent {
                assert!((f.rss_dbm - r.rss_dbm).abs() < 1e-9);
                assert!((f.delay_s - r.delay_s).abs() < 1e-18);
                // Departure of one direction mirrors arrival of the other.
                let wrap = |x: f64| {
                    let two_pi = 2.0 * std::f64::consts::PI;
                    ((x + std::f64::consts::PI).rem_euclid(two_pi)) - std::f64::consts::PI
                };
                assert!((wrap(f.aaod - r.aaoa - std::f64::consts::PI)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn segment_plane_cases() {
        let p = floor();
        // Perpendicular crossing at the origin.
        let hit = segment_plane_intersect(
            Segment {
                start: Point3::new(0.0, 0.0, 1.0),
                end: Point3::new(0.0, 0.0, -1.0),
            },
            &p,
        )
        .unwrap();
        assert!((hit - Point3::ZERO).norm() < 1e-12);
        // Parallel above the plane.
        assert!(segment_plane_intersect(
            Segment {
                start: Point3::new(-1.0, 0.0, 0.5),
                end: Point3::new(1.0, 0.0, 0.5),
            },
            &p,
        )
        .is_none());
        // Segment lying inside the plane: endpoints on it, no crossing.
        assert!(segment_plane_intersect(
            Segment {
                start: Point3::new(-1.0, 0.0, 0.0),
                end: Point3::new(1.0, 0.0, 0.0),
            },
            &p,
        )
        .is_none());
        // Crossing outside the polygon.
        assert!(segment_plane_intersect(
            Segment {
                start: Point3::new(15.0, 0.0, 1.0),
                end: Point3::new(15.0, 0.0, -1.0),
            },
            &p,
        )
        .is_none());
    }

    #[test]
    fn path_db_round_trips_including_minus_inf() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("paths.csv");
        let scene = scene_with(vec![floor()], Point3::new(0.0, 0.0, 2.0));
        let mut recs =
            trace_all(&scene, &[Point3::new(4.0, 0.0, 2.0)], &cfg_free()).unwrap();
        recs.push(PathRecord::non_existent(1, PathKind::Refl, Some(0)));
        write_path_db(&file, &recs).unwrap();
        let text = std::fs::read_to_string(&file).unwrap();
        assert!(text.contains("-inf"), "non-existent RSS uses the -inf token");
        let back = read_path_db(&file).unwrap();
        assert_eq!(recs, back);
    }

    #[test]
    fn summary_counts() {
        let scene = scene_with(vec![floor()], Point3::new(0.0, 0.0, 2.0));
        let recs = trace_all(
            &scene,
            &[Point3::new(4.0, 0.0, 2.0), Point3::new(4.0, 0.0, -2.0)],
            &cfg_free(),
        )
        .unwrap();
        // Second UT is below the floor: LoS blocked, reflection on the
        // opposite side, so the location is unlinked.
        let s = summarize(&recs, 2, 1);
        assert_eq!(s.linked_locations, 1);
        assert_eq!(s.blocked_locations, 1);
        assert_eq!(s.total_slots, 4);
        assert_eq!(s.slots_per_location, 2);
        assert!((s.coverage - 0.5).abs() < 1e-12);
    }
}
