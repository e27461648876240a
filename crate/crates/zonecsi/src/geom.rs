//! Small 3-D geometry kernel: points/vectors, axis-aligned boxes, and the
//! polygon predicates the scene and tracing modules build on. Polygons are
//! handled without triangulation: plane-line intersection plus an even-odd
//! test on the dominant-axis 2-D projection covers arbitrary simple polygons.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction. Zero vectors are returned as-is.
    pub fn normalized(self) -> Point3 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    pub fn coord(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned bounding box with inclusive faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn contains(&self, p: Point3, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.y >= self.min.y - tol
            && p.z >= self.min.z - tol
            && p.x <= self.max.x + tol
            && p.y <= self.max.y + tol
            && p.z <= self.max.z + tol
    }
}

/// Polygon normal by Newell's method (robust for nearly planar rings).
/// Not normalized; magnitude is twice the projected area.
pub fn newell_normal(vertices: &[Point3]) -> Point3 {
    let mut n = Point3::ZERO;
    for (i, a) in vertices.iter().enumerate() {
        let b = vertices[(i + 1) % vertices.len()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n
}

/// Supporting plane `n . x = d` with unit normal, plus the largest absolute
/// out-of-plane deviation among the vertices.
pub fn plane_equation(vertices: &[Point3]) -> (Point3, f64, f64) {
    let n = newell_normal(vertices).normalized();
    let centroid = vertices
        .iter()
        .fold(Point3::ZERO, |acc, v| acc + *v)
        * (1.0 / vertices.len() as f64);
    let d = n.dot(centroid);
    let max_dev = vertices
        .iter()
        .map(|v| (n.dot(*v) - d).abs())
        .fold(0.0_f64, f64::max);
    (n, d, max_dev)
}

/// Axis to drop when projecting onto the plane with this normal.
pub fn dominant_axis(normal: Point3) -> usize {
    let ax = normal.x.abs();
    let ay = normal.y.abs();
    let az = normal.z.abs();
    if ax >= ay && ax >= az {
        0
    } else if ay >= az {
        1
    } else {
        2
    }
}

/// Projects a point to 2-D by dropping the given axis.
pub fn project2(p: Point3, drop: usize) -> (f64, f64) {
    match drop {
        0 => (p.y, p.z),
        1 => (p.x, p.z),
        _ => (p.x, p.y),
    }
}

/// Even-odd point-in-polygon test in 2-D. Boundary points follow whatever
/// side the crossing arithmetic lands on; callers needing boundary awareness
/// use [`point_near_polygon_edge_2d`] first.
pub fn point_in_polygon_2d(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > p.1) != (yj > p.1) {
            let x_cross = xi + (p.1 - yi) * (xj - xi) / (yj - yi);
            if p.0 < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True if the point lies within `tol` of any polygon edge.
pub fn point_near_polygon_edge_2d(p: (f64, f64), poly: &[(f64, f64)], tol: f64) -> bool {
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        if dist_point_segment_2d(p, poly[j], poly[i]) <= tol {
            return true;
        }
        j = i;
    }
    false
}

fn dist_point_segment_2d(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ax, ay) = a;
    let (dx, dy) = (b.0 - ax, b.1 - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - ax) * dx + (p.1 - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_intersect_2d(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0) != (o2 > 0.0)) && ((o3 > 0.0) != (o4 > 0.0)) {
        return true;
    }
    let on = |o: f64, p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        o == 0.0
            && r.0 >= p.0.min(q.0)
            && r.0 <= p.0.max(q.0)
            && r.1 >= p.1.min(q.1)
            && r.1 <= p.1.max(q.1)
    };
    on(o1, a, b, c) || on(o2, a, b, d) || on(o3, c, d, a) || on(o4, c, d, b)
}

/// Checks that the projected ring is a simple polygon: no two non-adjacent
/// edges touch or cross.
pub fn polygon_is_simple_2d(poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        for j in (i + 1)..n {
            // Skip the edge itself and the two adjacent edges.
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let c = poly[j];
            let d = poly[(j + 1) % n];
            if segments_intersect_2d(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// True if all points lie on one line within `tol` (meters).
pub fn all_collinear(points: &[Point3], tol: f64) -> bool {
    if points.len() < 3 {
        return true;
    }
    let a = points[0];
    // Pick the farthest point from `a` as the line anchor.
    let b = points
        .iter()
        .copied()
        .max_by(|p, q| {
            (*p - a)
                .norm_squared()
                .partial_cmp(&(*q - a).norm_squared())
                .unwrap()
        })
        .unwrap();
    let dir = (b - a).normalized();
    if dir.norm() == 0.0 {
        return true;
    }
    points.iter().all(|p| {
        let v = *p - a;
        (v - dir * v.dot(dir)).norm() <= tol
    })
}
