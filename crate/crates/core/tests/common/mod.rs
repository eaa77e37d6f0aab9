#![allow(dead_code)]

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use sqdecomp::geometry::Mesh;
use sqdecomp::Superquadric;

pub fn random_unit_quaternion(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

/// Superquadric with sizes in `[0.05, 0.45]`, exponents in `[0.2, 1.8]`
/// and its center within `0.25` of the origin.
pub fn random_sq(rng: &mut impl Rng) -> Superquadric {
    Superquadric::new(
        [
            rng.random_range(0.05..0.45),
            rng.random_range(0.05..0.45),
            rng.random_range(0.05..0.45),
        ],
        rng.random_range(0.2..1.8),
        rng.random_range(0.2..1.8),
        [
            rng.random_range(-0.25..0.25),
            rng.random_range(-0.25..0.25),
            rng.random_range(-0.25..0.25),
        ],
        random_unit_quaternion(rng),
    )
}

pub fn random_point(rng: &mut impl Rng, half: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

/// Point at `scale` times a random surface point of `sq`, in world frame.
pub fn point_near_surface(rng: &mut impl Rng, sq: &Superquadric, scale: f64) -> Vector3<f64> {
    let eta = rng.random_range(-1.5..1.5);
    let omega = rng.random_range(-3.1..3.1);
    sq.local_to_world(&(sq.surface_local(eta, omega) * scale))
}

/// Rotation matrix written out from the quaternion components.
pub fn rotation_matrix(q: &UnitQuaternion<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Inside-outside function straight from its closed form with `powf`.
pub fn reference_f(sq: &Superquadric, x: &Vector3<f64>) -> f64 {
    let p = rotation_matrix(&sq.rotation).transpose() * (x - sq.translation);
    let (a, e1, e2) = (sq.size, sq.e1, sq.e2);
    let xy = (p.x.abs() / a.x).powf(2.0 / e2) + (p.y.abs() / a.y).powf(2.0 / e2);
    xy.powf(e2 / e1) + (p.z.abs() / a.z).powf(2.0 / e1)
}

fn ray_hits_triangle(o: &Vector3<f64>, d: &Vector3<f64>, tri: [Vector3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let s = o - tri[0];
    let u = s.dot(&p) / det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) / det;
    (t > 0.0).then_some(t)
}

/// Crossing parity along a fixed oblique ray, testing every triangle.
pub fn brute_force_inside(mesh: &Mesh, x: &Vector3<f64>) -> bool {
    let d = Vector3::new(0.5772156649, 0.3183098862, 0.7511255444).normalize();
    let hits = mesh
        .triangles
        .iter()
        .filter(|t| ray_hits_triangle(x, &d, [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]]).is_some())
        .count();
    hits % 2 == 1
}

/// Two cubes of side 0.3 centered at `(±0.3, 0, 0)`.
pub fn dumbbell() -> Mesh {
    Mesh::cuboid([-0.45, -0.15, -0.15], [-0.15, 0.15, 0.15])
        .merged(&Mesh::cuboid([0.15, -0.15, -0.15], [0.45, 0.15, 0.15]))
}

/// Table top with four disjoint legs.
pub fn table() -> Mesh {
    let mut mesh = Mesh::cuboid([-0.4, 0.1, -0.25], [0.4, 0.16, 0.25]);
    for (x, z) in [(-0.33, -0.18), (-0.33, 0.18), (0.33, -0.18), (0.33, 0.18)] {
        mesh = mesh.merged(&Mesh::cuboid([x - 0.04, -0.4, z - 0.04], [x + 0.04, 0.1, z + 0.04]));
    }
    mesh
}

pub fn count_obj_groups(text: &str) -> usize {
    text.lines().filter(|l| l.starts_with("g ") || l.starts_with("o ")).count()
}

/// `sq` with free parameter `k` of `(a, ε, t, ω)` moved by `h`.
pub fn perturbed(sq: &Superquadric, k: usize, h: f64) -> Superquadric {
    let mut out = *sq;
    match k {
        0..=2 => out.size[k] += h,
        3 => out.e1 += h,
        4 => out.e2 += h,
        5..=7 => out.translation[k - 5] += h,
        _ => {
            let mut omega = Vector3::zeros();
            omega[k - 8] = h;
            out = sq.rotated_by_tangent(&omega);
        }
    }
    out
}

/// `max_k |a_k - n_k| / max_k |a_k|`
pub fn normwise_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}
