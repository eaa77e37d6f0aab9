//! Triangle meshes, OBJ ingestion, normalization and inside/outside labeled
//! point sampling.

use std::fs;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

/// Half-width of the cube points are sampled from.
pub const SAMPLE_HALF_EXTENT: f64 = 0.6;

/// Default standard deviation of the Gaussian offset applied to surface samples.
pub const SURFACE_SIGMA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: vertex index {index} out of range (1..={count})")]
    IndexOutOfRange {
        line: usize,
        index: i64,
        count: usize,
    },
    #[error("triangle {triangle} references vertex {index} but mesh has {count} vertices")]
    InvalidTriangle {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("mesh is degenerate: {0}")]
    Degenerate(&'static str),
    #[error("at least one sample is required")]
    NoSamples,
    #[error("points and labels differ in length ({points} vs {labels})")]
    LengthMismatch { points: usize, labels: usize },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let mesh = Self { vertices, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let count = self.vertices.len();
        for (triangle, tri) in self.triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(GeometryError::InvalidTriangle { triangle, index, count });
            }
        }
        Ok(())
    }

    /// Closed axis-aligned box with outward-facing triangles.
    pub fn cuboid(min: [f64; 3], max: [f64; 3]) -> Self {
        let corner = |i: usize| {
            Vector3::new(
                if i & 1 == 0 { min[0] } else { max[0] },
                if i & 2 == 0 { min[1] } else { max[1] },
                if i & 4 == 0 { min[2] } else { max[2] },
            )
        };
        let vertices = (0..8).map(corner).collect();
        let quads = [
            [0, 2, 3, 1], // z min
            [4, 5, 7, 6], // z max
            [0, 1, 5, 4], // y min
            [2, 6, 7, 3], // y max
            [0, 4, 6, 2], // x min
            [1, 3, 7, 5], // x max
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        Self { vertices, triangles }
    }

    /// Latitude/longitude sphere with single-vertex poles.
    pub fn uv_sphere(center: [f64; 3], radius: f64, stacks: usize, slices: usize) -> Self {
        let c = Vector3::from(center);
        let mut vertices = vec![c - Vector3::z() * radius];
        for k in 1..stacks {
            let theta = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / stacks as f64;
            for j in 0..slices {
                let phi = std::f64::consts::TAU * j as f64 / slices as f64;
                vertices.push(
                    c + radius * Vector3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin()),
                );
            }
        }
        vertices.push(c + Vector3::z() * radius);
        let top = vertices.len() - 1;
        let ring = |k: usize, j: usize| 1 + (k - 1) * slices + j % slices;
        let mut triangles = Vec::new();
        for j in 0..slices {
            triangles.push([0, ring(1, j + 1), ring(1, j)]);
            triangles.push([top, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
        }
        for k in 1..stacks - 1 {
            for j in 0..slices {
                let (a, b, c2, d) = (ring(k, j), ring(k, j + 1), ring(k + 1, j + 1), ring(k + 1, j));
                triangles.push([a, b, c2]);
                triangles.push([a, c2, d]);
            }
        }
        Self { vertices, triangles }
    }

    /// Disjoint union of two meshes.
    pub fn merged(mut self, other: &Mesh) -> Self {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        self
    }

    pub fn bounding_box(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))))
    }

    /// Uniformly scales and translates so that the bounding box is centered
    /// at the origin with its longest side equal to 1.
    pub fn normalize(&self) -> Result<Mesh, GeometryError> {
        let (lo, hi) = self
            .bounding_box()
            .ok_or(GeometryError::Degenerate("mesh has no vertices"))?;
        let extent = (hi - lo).max();
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(GeometryError::Degenerate("all vertices coincide"));
        }
        let center = (lo + hi) * 0.5;
        let scale = 1.0 / extent;
        Ok(Mesh {
            vertices: self.vertices.iter().map(|v| (v - center) * scale).collect(),
            triangles: self.triangles.clone(),
        })
    }

    fn triangle(&self, t: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }
}

/// Reads the `v` and `f` records of a Wavefront OBJ file. Polygons are fan
/// triangulated; everything else is ignored.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, GeometryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<Mesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut fields = content.split_whitespace();
        match fields.next() {
            Some("v") => {
                let coords: Vec<f64> = fields
                    .take(3)
                    .map(|f| f.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| GeometryError::Parse {
                        line,
                        message: format!("bad vertex coordinate: {e}"),
                    })?;
                if coords.len() != 3 {
                    return Err(GeometryError::Parse {
                        line,
                        message: "vertex needs 3 coordinates".into(),
                    });
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for field in fields {
                    let head = field.split('/').next().unwrap_or("");
                    let index: i64 = head.parse().map_err(|_| GeometryError::Parse {
                        line,
                        message: format!("bad face index {field:?}"),
                    })?;
                    let count = vertices.len();
                    let resolved = match index {
                        i if i > 0 && (i as usize) <= count => i as usize - 1,
                        i if i < 0 && i.unsigned_abs() as usize <= count => count - i.unsigned_abs() as usize,
                        _ => return Err(GeometryError::IndexOutOfRange { line, index, count }),
                    };
                    poly.push(resolved);
                }
                if poly.len() < 3 {
                    return Err(GeometryError::Parse {
                        line,
                        message: "face needs at least 3 vertices".into(),
                    });
                }
                for k in 1..poly.len() - 1 {
                    triangles.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(Mesh { vertices, triangles })
}

/// Sample points with binary occupancy (`true` = inside).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointSet {
    pub points: Vec<Vector3<f64>>,
    pub labels: Vec<bool>,
}

impl LabeledPointSet {
    pub fn new(points: Vec<Vector3<f64>>, labels: Vec<bool>) -> Result<Self, GeometryError> {
        if points.len() != labels.len() {
            return Err(GeometryError::LengthMismatch {
                points: points.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn inside_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Fixed, deliberately non-axis-aligned ray directions. The first one is
/// used unless a ray grazes an edge or a vertex.
const RAY_DIRECTIONS: [[f64; 3]; 4] = [
    [0.801_7, 0.455_1, 0.387_7],
    [-0.312_4, 0.871_3, 0.378_2],
    [0.229_8, -0.401_9, 0.886_4],
    [-0.655_3, -0.523_9, -0.544_1],
];

const SURFACE_EPS: f64 = 1e-12;
const EDGE_EPS: f64 = 1e-10;

struct RayIndex {
    dir: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
    origin: Vector2<f64>,
    cell: f64,
    dims: (usize, usize),
    cells: Vec<Vec<u32>>,
}

impl RayIndex {
    fn new(mesh: &Mesh, dir: [f64; 3]) -> Self {
        let dir = Vector3::from(dir).normalize();
        let helper = if dir.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let u = dir.cross(&helper).normalize();
        let v = dir.cross(&u);
        let project = |p: &Vector3<f64>| Vector2::new(p.dot(&u), p.dot(&v));

        let boxes: Vec<(Vector2<f64>, Vector2<f64>)> = (0..mesh.triangles.len())
            .map(|t| {
                let [a, b, c] = mesh.triangle(t).map(|p| project(&p));
                (a.inf(&b).inf(&c), a.sup(&b).sup(&c))
            })
            .collect();
        let (lo, hi) = boxes.iter().fold(
            (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY)),
            |(lo, hi), (a, b)| (lo.inf(a), hi.sup(b)),
        );
        let side = ((mesh.triangles.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
        let span = (hi - lo).max().max(1e-12);
        let cell = span / side as f64 * (1.0 + 1e-9);
        let dims = (side, side);
        let mut cells = vec![Vec::new(); side * side];
        if !mesh.triangles.is_empty() {
            for (t, (a, b)) in boxes.iter().enumerate() {
                let (i0, j0) = Self::coords(lo, cell, dims, a);
                let (i1, j1) = Self::coords(lo, cell, dims, b);
                for i in i0..=i1 {
                    for j in j0..=j1 {
                        cells[i * side + j].push(t as u32);
                    }
                }
            }
        }
        Self {
            dir,
            u,
            v,
            origin: lo,
            cell,
            dims,
            cells,
        }
    }

    fn coords(lo: Vector2<f64>, cell: f64, dims: (usize, usize), p: &Vector2<f64>) -> (usize, usize) {
        let i = (((p.x - lo.x) / cell).floor().max(0.0) as usize).min(dims.0 - 1);
        let j = (((p.y - lo.y) / cell).floor().max(0.0) as usize).min(dims.1 - 1);
        (i, j)
    }

    fn candidates(&self, x: &Vector3<f64>) -> &[u32] {
        let p = Vector2::new(x.dot(&self.u), x.dot(&self.v));
        let rel = (p - self.origin) / self.cell;
        let slack = 1e-9;
        if rel.x < -slack || rel.y < -slack || rel.x > self.dims.0 as f64 + slack || rel.y > self.dims.1 as f64 + slack {
            return &[];
        }
        let (i, j) = Self::coords(self.origin, self.cell, self.dims, &p);
        &self.cells[i * self.dims.1 + j]
    }
}

enum RayOutcome {
    OnSurface,
    Crossings(usize),
    Degenerate,
}

/// Ray-parity inside test with a precomputed projection grid per ray
/// direction. Points on the surface count as inside.
pub struct InsideTester<'m> {
    mesh: &'m Mesh,
    indices: Vec<RayIndex>,
}

impl<'m> InsideTester<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let indices = RAY_DIRECTIONS.iter().map(|d| RayIndex::new(mesh, *d)).collect();
        Self { mesh, indices }
    }

    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        for index in &self.indices {
            match self.cast(index, x) {
                RayOutcome::OnSurface => return true,
                RayOutcome::Crossings(n) => return n % 2 == 1,
                RayOutcome::Degenerate => {}
            }
        }
        // every direction grazed an edge or vertex
        let index = self.indices.last().expect("at least one ray direction");
        self.cast_loose(index, x) % 2 == 1
    }

    fn cast(&self, index: &RayIndex, x: &Vector3<f64>) -> RayOutcome {
        let mut crossings = 0;
        for &t in index.candidates(x) {
            match ray_triangle(x, &index.dir, &self.mesh.triangle(t as usize)) {
                Hit::None => {}
                Hit::Surface => return RayOutcome::OnSurface,
                Hit::Edge => return RayOutcome::Degenerate,
                Hit::Crossing => crossings += 1,
            }
        }
        RayOutcome::Crossings(crossings)
    }

    fn cast_loose(&self, index: &RayIndex, x: &Vector3<f64>) -> usize {
        index
            .candidates(x)
            .iter()
            .filter(|&&t| matches!(ray_triangle(x, &index.dir, &self.mesh.triangle(t as usize)), Hit::Crossing | Hit::Edge))
            .count()
    }
}

enum Hit {
    None,
    Surface,
    Edge,
    Crossing,
}

/// Möller–Trumbore intersection classifying the hit.
fn ray_triangle(origin: &Vector3<f64>, dir: &Vector3<f64>, tri: &[Vector3<f64>; 3]) -> Hit {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= 1e-14 * scale {
        return Hit::None;
    }
    let inv = 1.0 / det;
    let tvec = origin - tri[0];
    let b1 = tvec.dot(&pvec) * inv;
    let qvec = tvec.cross(&e1);
    let b2 = dir.dot(&qvec) * inv;
    let b0 = 1.0 - b1 - b2;
    if b0 < -EDGE_EPS || b1 < -EDGE_EPS || b2 < -EDGE_EPS {
        return Hit::None;
    }
    let t = e2.dot(&qvec) * inv;
    if t.abs() <= SURFACE_EPS {
        return Hit::Surface;
    }
    if t < 0.0 {
        return Hit::None;
    }
    if b0 <= EDGE_EPS || b1 <= EDGE_EPS || b2 <= EDGE_EPS {
        return Hit::Edge;
    }
    Hit::Crossing
}

/// Convenience wrapper building a one-off [`InsideTester`].
pub fn point_in_mesh(mesh: &Mesh, x: &Vector3<f64>) -> bool {
    InsideTester::new(mesh).contains(x)
}

/// Labels a batch of points against `mesh`.
pub fn label_points(mesh: &Mesh, points: &[Vector3<f64>]) -> Vec<bool> {
    let tester = InsideTester::new(mesh);
    points.par_iter().map(|p| tester.contains(p)).collect()
}

pub fn sample_labeled_points(
    mesh: &Mesh,
    n_surface: usize,
    n_uniform: usize,
    seed: u64,
) -> Result<LabeledPointSet, GeometryError> {
    sample_labeled_points_with_sigma(mesh, n_surface, n_uniform, SURFACE_SIGMA, seed)
}

/// `n_uniform` points uniform in `[-0.6, 0.6]³` followed by `n_surface`
/// area-weighted surface points displaced by isotropic Gaussian noise.
pub fn sample_labeled_points_with_sigma(
    mesh: &Mesh,
    n_surface: usize,
    n_uniform: usize,
    sigma: f64,
    seed: u64,
) -> Result<LabeledPointSet, GeometryError> {
    if n_surface + n_uniform == 0 {
        return Err(GeometryError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_surface + n_uniform);
    let h = SAMPLE_HALF_EXTENT;
    for _ in 0..n_uniform {
        points.push(Vector3::new(
            rng.random_range(-h..h),
            rng.random_range(-h..h),
            rng.random_range(-h..h),
        ));
    }
    if n_surface > 0 {
        let cumulative: Vec<f64> = mesh
            .triangles
            .iter()
            .enumerate()
            .scan(0.0, |acc, (t, _)| {
                let [a, b, c] = mesh.triangle(t);
                *acc += 0.5 * (b - a).cross(&(c - a)).norm();
                Some(*acc)
            })
            .collect();
        let total = *cumulative
            .last()
            .ok_or(GeometryError::Degenerate("mesh has no triangles"))?;
        if !(total > 0.0) {
            return Err(GeometryError::Degenerate("mesh has zero surface area"));
        }
        let noise = Normal::new(0.0, sigma).map_err(|_| GeometryError::Degenerate("invalid sigma"))?;
        for _ in 0..n_surface {
            let r = rng.random_range(0.0..total);
            let t = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(t);
            let (mut s1, mut s2): (f64, f64) = (rng.random(), rng.random());
            if s1 + s2 > 1.0 {
                s1 = 1.0 - s1;
                s2 = 1.0 - s2;
            }
            let on_surface = a + (b - a) * s1 + (c - a) * s2;
            let offset = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            points.push(on_surface + offset);
        }
    }
    let labels = label_points(mesh, &points);
    Ok(LabeledPointSet { points, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> Mesh {
        Mesh::cuboid([-0.5; 3], [0.5; 3])
    }

    #[test]
    fn parses_triangle_and_quad() {
        let tri = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(tri.vertices.len(), 3);
        assert_eq!(tri.triangles, vec![[0, 1, 2]]);
        let quad = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2/2 3//3 4\n").unwrap();
        assert_eq!(quad.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn rejects_zero_and_out_of_range_indices() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").unwrap_err();
        assert!(matches!(err, GeometryError::IndexOutOfRange { line: 4, index: 0, .. }));
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").unwrap_err();
        assert!(matches!(err, GeometryError::IndexOutOfRange { index: 4, .. }));
        let err = parse_obj("v 0 0 0\nf 1 x 2\n").unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 2, .. }));
        let err = parse_obj("v 0 0\n").unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: 1, .. }));
    }

    #[test]
    fn negative_indices_are_relative() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\nvn 0 0 1\ng whatever\n").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_mesh("/nonexistent/mesh.obj"), Err(GeometryError::Io { .. })));
    }

    #[test]
    fn normalize_examples() {
        let n = Mesh::cuboid([0.0; 3], [1.0; 3]).normalize().unwrap();
        let (lo, hi) = n.bounding_box().unwrap();
        assert_eq!(lo, Vector3::repeat(-0.5));
        assert_eq!(hi, Vector3::repeat(0.5));

        let n = Mesh::cuboid([0.0; 3], [2.0, 1.0, 1.0]).normalize().unwrap();
        let (lo, hi) = n.bounding_box().unwrap();
        assert_eq!(lo, Vector3::new(-0.5, -0.25, -0.25));
        assert_eq!(hi, Vector3::new(0.5, 0.25, 0.25));

        let again = n.normalize().unwrap();
        for (a, b) in n.vertices.iter().zip(&again.vertices) {
            assert!((a - b).amax() <= 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_degenerate() {
        let m = Mesh::new(vec![Vector3::repeat(1.0); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(m.normalize(), Err(GeometryError::Degenerate(_))));
        assert!(Mesh::default().normalize().is_err());
        assert!(Mesh::new(vec![Vector3::zeros()], vec![[0, 0, 1]]).is_err());
    }

    #[test]
    fn cube_inside_tests() {
        let cube = unit_cube();
        assert!(point_in_mesh(&cube, &Vector3::zeros()));
        assert!(!point_in_mesh(&cube, &Vector3::new(2.0, 0.0, 0.0)));
        // on-surface points count as inside
        assert!(point_in_mesh(&cube, &Vector3::new(0.5, 0.1, 0.2)));
        assert!(point_in_mesh(&cube, &Vector3::new(0.5, 0.5, 0.5)));
        assert!(!point_in_mesh(&cube, &Vector3::new(0.5 + 1e-6, 0.0, 0.0)));
    }

    #[test]
    fn cube_inside_fraction_matches_volume_ratio() {
        let set = sample_labeled_points(&unit_cube(), 0, 1000, 7).unwrap();
        let frac = set.inside_count() as f64 / set.len() as f64;
        let expected = (1.0f64 / 1.2).powi(3);
        assert!((frac - expected).abs() < 0.05, "{frac} vs {expected}");
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let mesh = Mesh::uv_sphere([0.0; 3], 0.5, 12, 16);
        let a = sample_labeled_points(&mesh, 300, 300, 11).unwrap();
        let b = sample_labeled_points(&mesh, 300, 300, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_labeled_points(&mesh, 300, 300, 12).unwrap();
        assert_ne!(a.points, c.points);
        for (p, &l) in a.points.iter().zip(&a.labels) {
            assert_eq!(l, point_in_mesh(&mesh, p));
            assert!(p.iter().all(|c| c.is_finite()));
        }
        assert!(matches!(sample_labeled_points(&mesh, 0, 0, 1), Err(GeometryError::NoSamples)));
    }

    #[test]
    fn labeled_point_set_checks_lengths() {
        assert!(LabeledPointSet::new(vec![Vector3::zeros()], vec![]).is_err());
    }
}
