//! Scene model and loader.
//!
//! A scene is a set of simple planar polygons with materials, a base-station
//! position, and axis-aligned service bounds. Scene files are UTF-8 text with
//! four sections:
//!
//! ```text
//! # comment
//! [materials]
//! # id  reflection_coefficient  roughness_factor
//! plaster  0.45  0.85
//!
//! [planes]
//! unit cm                      # cm or m, default m; applies to this section
//! # object_tag  material_id  x,y,z  x,y,z  x,y,z ...
//! -      plaster  0,0,0  1646,0,0  1646,1036,0  0,1036,0
//! crate1 plaster  ...
//!
//! [bs]
//! unit cm
//! 950 1570 400
//!
//! [bounds]
//! unit cm
//! 0 0 0 1646 1036 450          # min x y z, max x y z
//! ```
//!
//! Planes sharing an `object_tag` form a closed solid; their interiors are
//! excluded from the feasible-location grid. The tag `-` marks free-standing
//! surfaces (walls, floors) that block and reflect but enclose nothing.
//! All coordinates are converted to meters and shifted by the load origin.

use crate::error::{Error, Result};
use crate::geom::{
    all_collinear, dominant_axis, plane_equation, point_in_polygon_2d,
    point_near_polygon_edge_2d, polygon_is_simple_2d, project2, Aabb, Point3,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Coplanarity tolerance for loaded planes, meters.
pub const COPLANARITY_TOL: f64 = 1e-6;
/// Geometric tie tolerance (boundary contact, jitter floor), meters.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Power reflection coefficient, in [0, 1].
    pub reflection_coefficient: f64,
    /// Surface roughness attenuation factor, in (0, 1].
    pub roughness_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    /// Solid-group tag; `None` for free-standing surfaces.
    pub object_tag: Option<String>,
    pub material_id: String,
    /// At least 3 coplanar vertices forming a simple polygon, meters.
    pub vertices: Vec<Point3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub materials: BTreeMap<String, Material>,
    pub planes: Vec<Plane>,
    pub bs_position: Point3,
    pub bounds: Aabb,
    /// Grid resolution stamped by [`quantize_merge`]; 0.0 until then.
    pub resolution: f64,
}

/// Cached per-face geometry for containment and intersection queries.
#[derive(Debug, Clone)]
pub(crate) struct FaceGeom {
    pub normal: Point3,
    pub d: f64,
    pub drop_axis: usize,
    pub poly2: Vec<(f64, f64)>,
}

impl FaceGeom {
    pub fn of(plane: &Plane) -> FaceGeom {
        let (normal, d, _) = plane_equation(&plane.vertices);
        let drop_axis = dominant_axis(normal);
        let poly2 = plane
            .vertices
            .iter()
            .map(|v| project2(*v, drop_axis))
            .collect();
        FaceGeom {
            normal,
            d,
            drop_axis,
            poly2,
        }
    }

    pub fn contains_projected(&self, p: Point3) -> bool {
        point_in_polygon_2d(project2(p, self.drop_axis), &self.poly2)
    }
}

impl Scene {
    /// Checks material references, plane shape, BS placement, and bounds.
    /// Plane-less scenes are permitted (synthetic free-space studies).
    pub fn validate(&self) -> Result<()> {
        if self.bounds.min.x > self.bounds.max.x
            || self.bounds.min.y > self.bounds.max.y
            || self.bounds.min.z > self.bounds.max.z
        {
            return Err(Error::InvalidArgument(
                "scene bounds have min > max".into(),
            ));
        }
        for (idx, plane) in self.planes.iter().enumerate() {
            if plane.vertices.len() < 3 {
                return Err(Error::InvalidPlane {
                    index: idx,
                    msg: format!("{} vertices, need at least 3", plane.vertices.len()),
                });
            }
            if !self.materials.contains_key(&plane.material_id) {
                return Err(Error::UnknownMaterial(plane.material_id.clone()));
            }
            if all_collinear(&plane.vertices, COPLANARITY_TOL) {
                return Err(Error::InvalidPlane {
                    index: idx,
                    msg: "vertices are collinear (zero area)".into(),
                });
            }
            let (normal, d, max_dev) = plane_equation(&plane.vertices);
            if max_dev > COPLANARITY_TOL {
                return Err(Error::NonCoplanar {
                    index: idx,
                    max_dev,
                    tol: COPLANARITY_TOL,
                });
            }
            let drop = dominant_axis(normal);
            let poly2: Vec<(f64, f64)> = plane
                .vertices
                .iter()
                .map(|v| project2(*v, drop))
                .collect();
            if !polygon_is_simple_2d(&poly2) {
                return Err(Error::InvalidPlane {
                    index: idx,
                    msg: "polygon is self-intersecting".into(),
                });
            }
            let _ = d;
        }
        for (id, m) in &self.materials {
            if !(0.0..=1.0).contains(&m.reflection_coefficient) {
                return Err(Error::InvalidConfig(format!(
                    "material `{id}`: reflection coefficient {} outside [0, 1]",
                    m.reflection_coefficient
                )));
            }
            if !(m.roughness_factor > 0.0 && m.roughness_factor <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "material `{id}`: roughness factor {} outside (0, 1]",
                    m.roughness_factor
                )));
            }
        }
        if !self.bounds.contains(self.bs_position, GEOM_TOL) {
            return Err(Error::InvalidArgument(
                "BS position lies outside scene bounds".into(),
            ));
        }
        for (tag, faces) in self.object_faces() {
            if containment(self.bs_position, &faces) != Containment::Outside {
                return Err(Error::InvalidArgument(format!(
                    "BS position is not strictly outside object `{tag}`"
                )));
            }
        }
        Ok(())
    }

    pub fn material_of(&self, plane: &Plane) -> Result<&Material> {
        self.materials
            .get(&plane.material_id)
            .ok_or_else(|| Error::UnknownMaterial(plane.material_id.clone()))
    }

    /// Tagged plane groups in tag order, as cached face geometry.
    pub(crate) fn object_faces(&self) -> Vec<(String, Vec<FaceGeom>)> {
        let mut groups: BTreeMap<&str, Vec<FaceGeom>> = BTreeMap::new();
        for plane in &self.planes {
            if let Some(tag) = &plane.object_tag {
                groups.entry(tag).or_default().push(FaceGeom::of(plane));
            }
        }
        groups
            .into_iter()
            .map(|(t, f)| (t.to_string(), f))
            .collect()
    }

    /// True if `p` is strictly outside every closed object.
    pub fn strictly_outside_objects(&self, p: Point3) -> bool {
        self.object_faces()
            .iter()
            .all(|(_, faces)| containment(p, faces) == Containment::Outside)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Containment {
    Inside,
    Outside,
    Boundary,
}

/// Ray-casting parity containment against one closed face set. Ties (ray
/// grazing an edge or running inside a face plane) are broken by retrying
/// with a deterministic jitter that starts at the 1e-9 tie tolerance and
/// escalates, so the test always resolves on lattice-aligned geometry.
pub(crate) fn containment(p: Point3, faces: &[FaceGeom]) -> Containment {
    for f in faces {
        if (f.normal.dot(p) - f.d).abs() <= GEOM_TOL
            && (f.contains_projected(p)
                || point_near_polygon_edge_2d(project2(p, f.drop_axis), &f.poly2, GEOM_TOL))
        {
            return Containment::Boundary;
        }
    }
    let base = Point3::new(0.287_514_3, 0.594_716_9, 0.750_912_7).normalized();
    let mut jitter = GEOM_TOL;
    for attempt in 0..12 {
        let dir = if attempt == 0 {
            base
        } else {
            let j = jitter;
            jitter *= 10.0;
            Point3::new(base.x + j, base.y + 2.3 * j, base.z - 1.7 * j).normalized()
        };
        let mut crossings = 0usize;
        let mut ambiguous = false;
        for f in faces {
            let denom = f.normal.dot(dir);
            let dist = f.d - f.normal.dot(p);
            if denom.abs() < 1e-12 {
                if dist.abs() <= GEOM_TOL {
                    // Ray lies (numerically) inside the face plane.
                    ambiguous = true;
                    break;
                }
                continue;
            }
            let t = dist / denom;
            if t <= GEOM_TOL {
                continue;
            }
            let hit = p + dir * t;
            let hit2 = project2(hit, f.drop_axis);
            if point_near_polygon_edge_2d(hit2, &f.poly2, GEOM_TOL) {
                ambiguous = true;
                break;
            }
            if point_in_polygon_2d(hit2, &f.poly2) {
                crossings += 1;
            }
        }
        if !ambiguous {
            return if crossings % 2 == 1 {
                Containment::Inside
            } else {
                Containment::Outside
            };
        }
    }
    // Every jittered ray grazed an edge; fall back to the last parity.
    Containment::Outside
}

// ── Scene file parsing ──────────────────────────────────────────────────────

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Materials,
    Planes,
    Bs,
    Bounds,
}

fn unit_scale(word: &str, line: usize) -> Result<f64> {
    match word {
        "cm" => Ok(0.01),
        "m" => Ok(1.0),
        other => Err(Error::SceneParse {
            line,
            msg: format!("unknown unit `{other}` (expected `cm` or `m`)"),
        }),
    }
}

fn parse_num(tok: &str, line: usize, what: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::SceneParse {
        line,
        msg: format!("invalid {what} `{tok}`"),
    })
}

fn parse_vertex(tok: &str, line: usize) -> Result<Point3> {
    let parts: Vec<&str> = tok.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::SceneParse {
            line,
            msg: format!("vertex `{tok}` is not x,y,z"),
        });
    }
    Ok(Point3::new(
        parse_num(parts[0], line, "coordinate")?,
        parse_num(parts[1], line, "coordinate")?,
        parse_num(parts[2], line, "coordinate")?,
    ))
}

/// Parses scene text. Coordinates are converted to meters and shifted so the
/// given origin (meters) maps to (0, 0, 0).
pub fn parse_scene(text: &str, origin: Point3) -> Result<Scene> {
    let mut section = Section::None;
    let mut unit = 1.0f64;
    let mut materials = BTreeMap::new();
    let mut planes: Vec<Plane> = Vec::new();
    let mut bs: Option<Point3> = None;
    let mut bounds: Option<Aabb> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name {
                "materials" => Section::Materials,
                "planes" => Section::Planes,
                "bs" => Section::Bs,
                "bounds" => Section::Bounds,
                other => {
                    return Err(Error::SceneParse {
                        line,
                        msg: format!("unknown section `[{other}]`"),
                    })
                }
            };
            unit = 1.0;
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks[0] == "unit" {
            if section == Section::Materials || section == Section::None {
                return Err(Error::SceneParse {
                    line,
                    msg: "`unit` is only valid in [planes], [bs] or [bounds]".into(),
                });
            }
            if toks.len() != 2 {
                return Err(Error::SceneParse {
                    line,
                    msg: "expected `unit cm` or `unit m`".into(),
                });
            }
            unit = unit_scale(toks[1], line)?;
            continue;
        }
        match section {
            Section::None => {
                return Err(Error::SceneParse {
                    line,
                    msg: "content before first section header".into(),
                })
            }
            Section::Materials => {
                if toks.len() != 3 {
                    return Err(Error::SceneParse {
                        line,
                        msg: "expected `id reflection_coefficient roughness_factor`".into(),
                    });
                }
                materials.insert(
                    toks[0].to_string(),
                    Material {
                        reflection_coefficient: parse_num(toks[1], line, "reflection coefficient")?,
                        roughness_factor: parse_num(toks[2], line, "roughness factor")?,
                    },
                );
            }
            Section::Planes => {
                if toks.len() < 5 {
                    return Err(Error::SceneParse {
                        line,
                        msg: "expected `object_tag material_id v1 v2 v3 ...`".into(),
                    });
                }
                let tag = if toks[0] == "-" {
                    None
                } else {
                    Some(toks[0].to_string())
                };
                let mut vertices = Vec::with_capacity(toks.len() - 2);
                for tok in &toks[2..] {
                    let v = parse_vertex(tok, line)?;
                    vertices.push(v * unit - origin);
                }
                planes.push(Plane {
                    object_tag: tag,
                    material_id: toks[1].to_string(),
                    vertices,
                });
            }
            Section::Bs => {
                if toks.len() != 3 {
                    return Err(Error::SceneParse {
                        line,
                        msg: "expected `x y z`".into(),
                    });
                }
                let p = Point3::new(
                    parse_num(toks[0], line, "coordinate")?,
                    parse_num(toks[1], line, "coordinate")?,
                    parse_num(toks[2], line, "coordinate")?,
                );
                bs = Some(p * unit - origin);
            }
            Section::Bounds => {
                if toks.len() != 6 {
                    return Err(Error::SceneParse {
                        line,
                        msg: "expected `min_x min_y min_z max_x max_y max_z`".into(),
                    });
                }
                let vals: Vec<f64> = toks
                    .iter()
                    .map(|t| parse_num(t, line, "coordinate"))
                    .collect::<Result<_>>()?;
                bounds = Some(Aabb {
                    min: Point3::new(vals[0], vals[1], vals[2]) * unit - origin,
                    max: Point3::new(vals[3], vals[4], vals[5]) * unit - origin,
                });
            }
        }
    }

    let bs_position = bs.ok_or(Error::SceneParse {
        line: 0,
        msg: "missing [bs] section".into(),
    })?;
    let bounds = bounds.ok_or(Error::SceneParse {
        line: 0,
        msg: "missing [bounds] section".into(),
    })?;
    if planes.is_empty() {
        return Err(Error::SceneParse {
            line: 0,
            msg: "scene file declares no planes".into(),
        });
    }

    let scene = Scene {
        materials,
        planes,
        bs_position,
        bounds,
        resolution: 0.0,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: &std::path::Path, origin: Point3) -> Result<Scene> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_scene(&text, origin)
}

/// Serializes a scene back to the file format (meters, origin 0). Loading the
/// result reproduces the scene exactly: floats are written with shortest
/// round-trip formatting.
pub fn scene_to_string(scene: &Scene) -> String {
    let mut s = String::new();
    s.push_str("[materials]\n");
    for (id, m) in &scene.materials {
        let _ = writeln!(s, "{id} {} {}", m.reflection_coefficient, m.roughness_factor);
    }
    s.push_str("\n[planes]\nunit m\n");
    for p in &scene.planes {
        let tag = p.object_tag.as_deref().unwrap_or("-");
        let _ = write!(s, "{tag} {}", p.material_id);
        for v in &p.vertices {
            let _ = write!(s, " {},{},{}", v.x, v.y, v.z);
        }
        s.push('\n');
    }
    let bs = scene.bs_position;
    let _ = write!(s, "\n[bs]\nunit m\n{} {} {}\n", bs.x, bs.y, bs.z);
    let b = scene.bounds;
    let _ = write!(
        s,
        "\n[bounds]\nunit m\n{} {} {} {} {} {}\n",
        b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z
    );
    s
}

pub fn save_scene(scene: &Scene, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, scene_to_string(scene))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

// ── Quantization and gridding ───────────────────────────────────────────────

/// Rounds to the nearest multiple of `resolution`, halves away from zero.
fn quantize(x: f64, resolution: f64) -> f64 {
    (x / resolution).round() * resolution
}

fn lattice_key(p: Point3, resolution: f64) -> (i64, i64, i64) {
    (
        (p.x / resolution).round() as i64,
        (p.y / resolution).round() as i64,
        (p.z / resolution).round() as i64,
    )
}

/// Snaps every plane vertex to the resolution grid, drops planes that
/// collapse (fewer than 3 distinct vertices, or collinear), and merges planes
/// whose quantized vertex sets coincide, keeping the first plane's material
/// and tag. The returned scene carries the applied resolution.
pub fn quantize_merge(scene: &Scene, resolution: f64) -> Result<Scene> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let mut out = scene.clone();
    out.resolution = resolution;
    let mut planes: Vec<Plane> = Vec::with_capacity(scene.planes.len());
    let mut seen: Vec<std::collections::BTreeSet<(i64, i64, i64)>> = Vec::new();
    let mut dropped = 0usize;

    for plane in &scene.planes {
        let mut verts: Vec<Point3> = plane
            .vertices
            .iter()
            .map(|v| {
                Point3::new(
                    quantize(v.x, resolution),
                    quantize(v.y, resolution),
                    quantize(v.z, resolution),
                )
            })
            .collect();
        // Collapse consecutive duplicates (including wrap-around).
        verts.dedup_by(|a, b| lattice_key(*a, resolution) == lattice_key(*b, resolution));
        while verts.len() > 1
            && lattice_key(verts[0], resolution)
                == lattice_key(*verts.last().unwrap(), resolution)
        {
            verts.pop();
        }
        let key: std::collections::BTreeSet<(i64, i64, i64)> = verts
            .iter()
            .map(|v| lattice_key(*v, resolution))
            .collect();
        if key.len() < 3 || all_collinear(&verts, GEOM_TOL) {
            dropped += 1;
            continue;
        }
        if seen.contains(&key) {
            // Duplicate of an earlier plane; first material wins.
            continue;
        }
        seen.push(key);
        planes.push(Plane {
            object_tag: plane.object_tag.clone(),
            material_id: plane.material_id.clone(),
            vertices: verts,
        });
    }
    if dropped > 0 {
        log::warn!("quantize_merge dropped {dropped} degenerate plane(s) at resolution {resolution}");
    }
    out.planes = planes;
    Ok(out)
}

/// Lattice points (spacing-spaced from `bounds.min`, inclusive) that lie
/// inside the bounds, strictly outside every closed object, and do not
/// coincide with the BS position. Order is x-major, then y, then z; the index
/// of a point in the returned vector is its `ut_index` everywhere downstream.
pub fn feasible_locations(scene: &Scene, spacing: f64) -> Result<Vec<Point3>> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    let b = scene.bounds;
    let steps = |lo: f64, hi: f64| ((hi - lo) / spacing + GEOM_TOL).floor() as usize;
    let objects = scene.object_faces();
    let mut pts = Vec::new();
    for ix in 0..=steps(b.min.x, b.max.x) {
        for iy in 0..=steps(b.min.y, b.max.y) {
            for iz in 0..=steps(b.min.z, b.max.z) {
                let p = Point3::new(
                    b.min.x + ix as f64 * spacing,
                    b.min.y + iy as f64 * spacing,
                    b.min.z + iz as f64 * spacing,
                );
                if (p - scene.bs_position).norm() <= GEOM_TOL {
                    continue;
                }
                if objects
                    .iter()
                    .all(|(_, faces)| containment(p, faces) == Containment::Outside)
                {
                    pts.push(p);
                }
            }
        }
    }
    Ok(pts)
}
