//! Intersection-over-union between a set of superquadrics and ground-truth
//! occupancy, on a point sample or on a regular voxel grid.

use std::fmt;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{label_points, LabeledPointSet, Mesh, SAMPLE_HALF_EXTENT};
use crate::superquadric::{OccupancyConfig, Superquadric};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    /// Neither the prediction nor the ground truth marks any point inside.
    #[error("IoU undefined: prediction and ground truth are both empty")]
    EmptyUnion,
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("point set is empty")]
    NoPoints,
    #[error("voxel resolution must be at least 8, got {0}")]
    Resolution(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IouMethod {
    Sampled,
    VoxelOracle,
}

impl fmt::Display for IouMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IouMethod::Sampled => "sampled",
            IouMethod::VoxelOracle => "voxel-oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    /// IoU of level `k + 1` at position `k`, as a fraction.
    pub levels: Vec<f64>,
    pub sample_count: usize,
    pub method: IouMethod,
}

impl IouReport {
    pub fn tsv_header(&self) -> String {
        let mut s = String::from("SQ tree level");
        for k in 1..=self.levels.len() {
            s.push_str(&format!("\t{k}"));
        }
        s
    }

    /// One line of percentages with one decimal.
    pub fn tsv_line(&self) -> String {
        let mut s = String::from("IoU [in %]");
        for v in &self.levels {
            s.push_str(&format!("\t{:.1}", v * 100.0));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Inside if any superquadric's occupancy exceeds 0.5.
pub fn predicted_label(sqs: &[Superquadric], x: &Vector3<f64>, cfg: &OccupancyConfig) -> bool {
    sqs.iter().any(|sq| sq.occupancy(x, cfg) > 0.5)
}

pub fn predicted_labels(sqs: &[Superquadric], points: &[Vector3<f64>], cfg: &OccupancyConfig) -> Vec<bool> {
    points.par_iter().map(|x| predicted_label(sqs, x, cfg)).collect()
}

/// `|P ∧ T| / |P ∨ T|` over two label vectors.
pub fn iou_labels(predicted: &[bool], truth: &[bool]) -> Result<f64, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(predicted.len(), truth.len()));
    }
    let (inter, union) = predicted
        .iter()
        .zip(truth)
        .fold((0usize, 0usize), |(i, u), (&p, &t)| (i + usize::from(p && t), u + usize::from(p || t)));
    if union == 0 {
        return Err(MetricsError::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

pub fn iou(sqs: &[Superquadric], pointset: &LabeledPointSet, cfg: &OccupancyConfig) -> Result<f64, MetricsError> {
    if pointset.is_empty() {
        return Err(MetricsError::NoPoints);
    }
    iou_labels(&predicted_labels(sqs, &pointset.points, cfg), &pointset.labels)
}

/// Cell centers of a `resolution³` grid over the sampling cube.
pub fn voxel_centers(resolution: usize) -> Vec<Vector3<f64>> {
    let h = SAMPLE_HALF_EXTENT;
    let c = |k: usize| -h + 2.0 * h * (k as f64 + 0.5) / resolution as f64;
    let mut out = Vec::with_capacity(resolution.pow(3));
    for i in 0..resolution {
        for j in 0..resolution {
            for k in 0..resolution {
                out.push(Vector3::new(c(i), c(j), c(k)));
            }
        }
    }
    out
}

pub fn voxel_iou(
    sqs: &[Superquadric],
    mesh: &Mesh,
    resolution: usize,
    cfg: &OccupancyConfig,
) -> Result<f64, MetricsError> {
    if resolution < 8 {
        return Err(MetricsError::Resolution(resolution));
    }
    let centers = voxel_centers(resolution);
    let truth = label_points(mesh, &centers);
    iou_labels(&predicted_labels(sqs, &centers, cfg), &truth)
}
