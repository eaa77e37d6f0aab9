//! Tree JSON documents, OBJ surface export and split-field CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Mesh;
use crate::splitter::{split_field_2d, Side, Slice, SplitError, SplitField};
use crate::sqtree::{SqPairNode, SqTree, TreeError};
use crate::superquadric::{SqError, Superquadric, PARAM_LEN};

pub const FORMAT_VERSION: u32 = 1;

pub const SPLIT_CSV_HEADER: &str = "x,y,Fa,Fb,da,db,selector";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed tree document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported tree format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("node ({d}, {i}): {source}")]
    Parameters {
        d: u32,
        i: u32,
        #[source]
        source: SqError,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("surface resolution must be at least 3, got {0}")]
    Resolution(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub d: u32,
    pub i: u32,
    /// `[a1, a2, a3, e1, e2, t1, t2, t3, qw, qx, qy, qz]`
    pub lambda_a: [f64; PARAM_LEN],
    pub lambda_b: [f64; PARAM_LEN],
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitMetadata {
    /// Echo of the configuration that produced the tree.
    pub config: serde_json::Value,
    pub level_iou: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub format_version: u32,
    pub max_depth: u32,
    pub nodes: Vec<NodeRecord>,
    pub metadata: FitMetadata,
}

impl TreeDocument {
    pub fn from_tree(tree: &SqTree, metadata: FitMetadata) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            max_depth: tree.max_depth(),
            nodes: tree
                .nodes()
                .map(|n| NodeRecord {
                    d: n.depth,
                    i: n.index,
                    lambda_a: n.sq_a.params(),
                    lambda_b: n.sq_b.params(),
                    degenerate: n.degenerate,
                })
                .collect(),
            metadata,
        }
    }

    /// Rebuilds the tree structure. The fitted sample points and node labels
    /// are not part of the document, so the result has neither.
    pub fn to_tree(&self) -> Result<SqTree, ExportError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ExportError::Version {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let mut tree = SqTree::new(self.max_depth, Vec::new())?;
        let mut records: Vec<&NodeRecord> = self.nodes.iter().collect();
        records.sort_by_key(|r| (r.d, r.i));
        for r in records {
            let sq = |p: &[f64; PARAM_LEN]| {
                Superquadric::from_params(p).map_err(|source| ExportError::Parameters { d: r.d, i: r.i, source })
            };
            tree.insert(SqPairNode {
                depth: r.d,
                index: r.i,
                sq_a: sq(&r.lambda_a)?,
                sq_b: sq(&r.lambda_b)?,
                labels: Vec::new(),
                degenerate: r.degenerate,
            })?;
        }
        Ok(tree)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree document serializes")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExportError> {
    fs::write(path, contents).map_err(|source| ExportError::Write {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_tree(tree: &SqTree, metadata: FitMetadata, path: impl AsRef<Path>) -> Result<(), ExportError> {
    let mut text = TreeDocument::from_tree(tree, metadata).to_json();
    text.push('\n');
    write_file(path.as_ref(), &text)
}

pub fn load_tree(path: impl AsRef<Path>) -> Result<(SqTree, TreeDocument), ExportError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ExportError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let doc: TreeDocument = serde_json::from_str(&text)?;
    let tree = doc.to_tree()?;
    Ok((tree, doc))
}

/// Closed triangle mesh of a superquadric surface: `resolution` latitudes
/// (poles included, each collapsed to one vertex) by `2 * resolution`
/// longitudes.
pub fn superquadric_mesh(sq: &Superquadric, resolution: usize) -> Result<Mesh, ExportError> {
    if resolution < 3 {
        return Err(ExportError::Resolution(resolution));
    }
    let n_theta = resolution;
    let n_phi = 2 * resolution;
    let grid = sq.surface_points(n_theta, n_phi);
    let south = sq.local_to_world(&Vector3::new(0.0, 0.0, -sq.size.z));
    let north = sq.local_to_world(&Vector3::new(0.0, 0.0, sq.size.z));

    let mut vertices = vec![south];
    vertices.extend_from_slice(&grid[n_phi..(n_theta - 1) * n_phi]);
    vertices.push(north);
    let top = vertices.len() - 1;
    let rings = n_theta - 2;
    let ring = |k: usize, j: usize| 1 + k * n_phi + j % n_phi;

    let mut triangles = Vec::with_capacity(2 * n_phi * rings);
    for j in 0..n_phi {
        triangles.push([0, ring(0, j + 1), ring(0, j)]);
        triangles.push([top, ring(rings - 1, j), ring(rings - 1, j + 1)]);
    }
    for k in 0..rings - 1 {
        for j in 0..n_phi {
            let (a, b, c, d) = (ring(k, j), ring(k, j + 1), ring(k + 1, j + 1), ring(k + 1, j));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Ok(Mesh { vertices, triangles })
}

/// OBJ text with one `g` group per named mesh.
pub fn obj_text(groups: &[(String, Mesh)]) -> String {
    let mut out = String::new();
    let mut offset = 1;
    for (name, mesh) in groups {
        let _ = writeln!(out, "g {name}");
        for v in &mesh.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &mesh.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + offset, t[1] + offset, t[2] + offset);
        }
        offset += mesh.vertices.len();
    }
    out
}

pub fn group_name(d: u32, i: u32, side: Side) -> String {
    let s = match side {
        Side::A => "a",
        Side::B => "b",
    };
    format!("sq_{d}_{i}_{s}")
}

pub fn level_obj(tree: &SqTree, d: u32, resolution: usize) -> Result<String, ExportError> {
    if !tree.is_level_complete(d) {
        return Err(TreeError::LevelNotFitted(d).into());
    }
    let mut groups = Vec::new();
    for node in tree.level(d) {
        for side in [Side::A, Side::B] {
            groups.push((group_name(d, node.index, side), superquadric_mesh(node.sq(side), resolution)?));
        }
    }
    Ok(obj_text(&groups))
}

pub fn export_level_obj(tree: &SqTree, d: u32, path: impl AsRef<Path>, resolution: usize) -> Result<(), ExportError> {
    let text = level_obj(tree, d, resolution)?;
    write_file(path.as_ref(), &text)
}

/// CSV with header `x,y,Fa,Fb,da,db,selector`, one row per grid point.
pub fn split_csv(field: &SplitField) -> String {
    let mut out = String::from(SPLIT_CSV_HEADER);
    out.push('\n');
    for s in &field.samples {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", s.u, s.v, s.f_a, s.f_b, s.d_a, s.d_b, s.side);
    }
    out
}

/// `x,y,Fa,Fb,selector` with the split taken as `argmax F^ε₁` everywhere.
pub fn stable_field_csv(field: &SplitField) -> String {
    let mut out = String::from("x,y,Fa,Fb,selector\n");
    for s in &field.samples {
        let _ = writeln!(out, "{},{},{},{},{}", s.u, s.v, s.f_a, s.f_b, s.side_by_stable());
    }
    out
}

/// `x,y,da,db,selector` with the split taken as `argmin d` everywhere.
pub fn radial_field_csv(field: &SplitField) -> String {
    let mut out = String::from("x,y,da,db,selector\n");
    for s in &field.samples {
        let _ = writeln!(out, "{},{},{},{},{}", s.u, s.v, s.d_a, s.d_b, s.side_by_radial());
    }
    out
}

pub fn export_split_csv(
    sq_a: &Superquadric,
    sq_b: &Superquadric,
    slice: &Slice,
    path: impl AsRef<Path>,
) -> Result<(), ExportError> {
    let field = split_field_2d(sq_a, sq_b, slice)?;
    write_file(path.as_ref(), &split_csv(&field))
}
