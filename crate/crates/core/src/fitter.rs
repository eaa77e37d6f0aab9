//! Breadth-first fitting of the superquadric-pair tree.
//!
//! Every node minimizes the mean binary cross-entropy between the pair's
//! occupancy `max(g_a, g_b)` and the node's labels, using gradient descent
//! with momentum, cosine step decay, bound projection and several restarts.

use std::time::Instant;

use nalgebra::{Matrix3, SymmetricEigen, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::LabeledPointSet;
use crate::metrics::{iou, MetricsError};
use crate::splitter::{child_labels, split_pair, Side};
use crate::sqtree::{child_index, SqPairNode, SqTree, TreeError};
use crate::superquadric::{sigmoid, Bounds, OccupancyConfig, SqError, Superquadric, PARAM_DOF};

/// Points per partial sum; fixed so that reductions do not depend on the
/// thread count.
const CHUNK: usize = 1024;
const RMS_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("point set is empty")]
    NoPoints,
    #[error("points and labels differ in length ({points} vs {labels})")]
    LengthMismatch { points: usize, labels: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Superquadric(#[from] SqError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_depth: u32,
    /// Iterations per restart.
    pub iterations: usize,
    pub step_size: f64,
    pub momentum: f64,
    /// Decay of the running squared-gradient average that scales each
    /// parameter's step (0 = plain momentum).
    pub rms_decay: f64,
    /// Upper bound on the Euclidean norm of one gradient.
    pub grad_clip: f64,
    /// Stop a restart after this many iterations without improvement (0 = never).
    pub patience: usize,
    pub restarts: usize,
    /// Prefer a restart whose better superquadric alone comes within this
    /// relative margin of the best pair loss (0 = plain lowest loss).
    pub parsimony: f64,
    pub sharpness: f64,
    pub seed: u64,
    pub a_min: f64,
    pub a_max: f64,
    pub e_min: f64,
    pub e_max: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let b = Bounds::default();
        Self {
            max_depth: 2,
            iterations: 2000,
            step_size: 0.01,
            momentum: 0.9,
            rms_decay: 0.999,
            grad_clip: 1.0,
            patience: 300,
            restarts: 4,
            parsimony: 0.0,
            sharpness: 10.0,
            seed: 0,
            a_min: b.a_min,
            a_max: b.a_max,
            e_min: b.e_min,
            e_max: b.e_max,
        }
    }
}

impl FitConfig {
    pub fn bounds(&self) -> Bounds {
        Bounds {
            a_min: self.a_min,
            a_max: self.a_max,
            e_min: self.e_min,
            e_max: self.e_max,
        }
    }

    pub fn occupancy(&self) -> Result<OccupancyConfig, FitError> {
        OccupancyConfig::new(self.sharpness).map_err(|e| FitError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let fail = |m: &str| Err(FitError::Config(m.to_string()));
        if self.max_depth < 1 || self.max_depth > 16 {
            return fail("max_depth must be in 1..=16");
        }
        if self.iterations < 1 {
            return fail("iterations must be at least 1");
        }
        if self.restarts < 1 {
            return fail("restarts must be at least 1");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return fail("step_size must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.rms_decay) {
            return fail("rms_decay must be in [0, 1)");
        }
        if !(self.parsimony >= 0.0 && self.parsimony.is_finite()) {
            return fail("parsimony must be non-negative");
        }
        if !(self.grad_clip > 0.0) {
            return fail("grad_clip must be positive");
        }
        self.occupancy()?;
        self.bounds().validate().map_err(|e| FitError::Config(e.to_string()))
    }
}

/// Outcome of fitting one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub sq_a: Superquadric,
    pub sq_b: Superquadric,
    /// Mean BCE of the returned pair.
    pub loss: f64,
    /// Mean BCE of the initialization of the winning restart.
    pub initial_loss: f64,
    pub iterations: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub d: u32,
    pub i: u32,
    pub loss: f64,
    pub initial_loss: f64,
    pub iterations: usize,
    pub degenerate: bool,
    pub inside_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub nodes: Vec<NodeReport>,
    /// IoU of each level against the root labels of the fitted points;
    /// `None` when both prediction and ground truth are empty.
    pub level_iou: Vec<Option<f64>>,
    /// Sum over nodes of the per-point BCE sums.
    pub total_loss_raw: f64,
    /// Sum over nodes of the per-node means.
    pub total_loss_mean: f64,
    pub iterations: usize,
    pub wall_time_secs: f64,
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// BCE of `σ(z)` against `label`, evaluated in logit space.
fn bce_logit(z: f64, label: bool) -> f64 {
    if label {
        softplus(-z)
    } else {
        softplus(z)
    }
}

fn check_lengths(points: &[Vector3<f64>], labels: &[bool]) -> Result<(), FitError> {
    if points.len() != labels.len() {
        return Err(FitError::LengthMismatch {
            points: points.len(),
            labels: labels.len(),
        });
    }
    if points.is_empty() {
        return Err(FitError::NoPoints);
    }
    Ok(())
}

/// Mean binary cross-entropy of `max(g_a, g_b)` against the labels.
pub fn node_loss(
    sq_a: &Superquadric,
    sq_b: &Superquadric,
    points: &[Vector3<f64>],
    labels: &[bool],
    cfg: &OccupancyConfig,
) -> Result<f64, FitError> {
    check_lengths(points, labels)?;
    let s = cfg.sharpness();
    let (ln_a, ln_b) = (sq_a.size.map(f64::ln), sq_b.size.map(f64::ln));
    let partial: Vec<f64> = points
        .par_chunks(CHUNK)
        .zip(labels.par_chunks(CHUNK))
        .map(|(pts, lbl)| {
            pts.iter()
                .zip(lbl)
                .map(|(x, &l)| {
                    let ga = (sq_a.e1 * sq_a.eval_local_with(sq_a.world_to_local(x), &ln_a).ln_f).exp();
                    let gb = (sq_b.e1 * sq_b.eval_local_with(sq_b.world_to_local(x), &ln_b).ln_f).exp();
                    let g = ga.min(gb);
                    bce_logit(s * (1.0 - g), l)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(partial.iter().sum::<f64>() / points.len() as f64)
}

/// Mean loss and its gradient with respect to the 22 free parameters
/// (11 for `sq_a` followed by 11 for `sq_b`). At points where both
/// occupancies tie, the subgradient goes to `sq_a`.
pub fn loss_and_gradient(
    sq_a: &Superquadric,
    sq_b: &Superquadric,
    points: &[Vector3<f64>],
    labels: &[bool],
    cfg: &OccupancyConfig,
) -> Result<(f64, [f64; 2 * PARAM_DOF]), FitError> {
    check_lengths(points, labels)?;
    let s = cfg.sharpness();
    let (ln_a, ln_b) = (sq_a.size.map(f64::ln), sq_b.size.map(f64::ln));
    let partial: Vec<(f64, [f64; 2 * PARAM_DOF])> = points
        .par_chunks(CHUNK)
        .zip(labels.par_chunks(CHUNK))
        .map(|(pts, lbl)| {
            let mut loss = 0.0;
            let mut grad = [0.0; 2 * PARAM_DOF];
            for (x, &l) in pts.iter().zip(lbl) {
                let ea = sq_a.eval_local_with(sq_a.world_to_local(x), &ln_a);
                let eb = sq_b.eval_local_with(sq_b.world_to_local(x), &ln_b);
                // max g <=> min ln F^e1
                let (winner, ev, offset) = if sq_a.e1 * ea.ln_f <= sq_b.e1 * eb.ln_f {
                    (sq_a, ea, 0)
                } else {
                    (sq_b, eb, PARAM_DOF)
                };
                let (g, dg) = winner.stable_gradient(&ev);
                let z = s * (1.0 - g);
                loss += bce_logit(z, l);
                let coeff = -s * (sigmoid(z) - if l { 1.0 } else { 0.0 });
                if coeff != 0.0 {
                    for (acc, d) in grad[offset..offset + PARAM_DOF].iter_mut().zip(dg) {
                        *acc += coeff * d;
                    }
                }
            }
            (loss, grad)
        })
        .collect();
    let n = points.len() as f64;
    let mut loss = 0.0;
    let mut grad = [0.0; 2 * PARAM_DOF];
    for (l, g) in &partial {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    for (k, v) in grad.iter_mut().enumerate() {
        *v /= n;
        if !v.is_finite() {
            return Err(SqError::NonFiniteGradient(k % PARAM_DOF).into());
        }
    }
    Ok((loss / n, grad))
}

/// Applies an update in the 11-parameter tangent space of one superquadric.
pub fn apply_step(sq: &Superquadric, delta: &[f64], bounds: &Bounds) -> Superquadric {
    let mut out = sq.rotated_by_tangent(&Vector3::new(delta[8], delta[9], delta[10]));
    out.size += Vector3::new(delta[0], delta[1], delta[2]);
    out.e1 += delta[3];
    out.e2 += delta[4];
    out.translation += Vector3::new(delta[5], delta[6], delta[7]);
    out.project(bounds);
    out
}

fn inside_stats(points: &[Vector3<f64>], labels: &[bool]) -> Option<(Vector3<f64>, Matrix3<f64>, usize)> {
    let inside: Vec<&Vector3<f64>> = points.iter().zip(labels).filter(|(_, &l)| l).map(|(p, _)| p).collect();
    if inside.is_empty() {
        return None;
    }
    let n = inside.len() as f64;
    let mean = inside.iter().fold(Vector3::zeros(), |acc, p| acc + *p) / n;
    let cov = inside.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = *p - mean;
        acc + d * d.transpose()
    }) / n;
    Some((mean, cov, inside.len()))
}

/// Initial pair for restart `restart`.
///
/// The frame comes from the principal axes of the inside points; every
/// second pair of restarts cycles which axis maps to local `z`. Even
/// restarts split the points along the longest axis: two ellipsoids at
/// `mean ± 0.25 L`, where `L = 2√3 σ` is the extent of a uniform
/// distribution with the observed spread, each sized as one half of it.
/// Odd restarts place a full-size ellipsoid `A` on the centroid with a
/// minimum-size `B` inside it, which is a single-superquadric fit. Restarts
/// six to eleven repeat the first six rolled by 45° about the axis whose
/// spread is furthest from the other two. Restarts from the third on get
/// seeded jitter on translation, rotation and size.
pub fn init_node(
    points: &[Vector3<f64>],
    labels: &[bool],
    restart: usize,
    seed: u64,
    bounds: &Bounds,
) -> Option<(Superquadric, Superquadric)> {
    let (mean, cov, _) = inside_stats(points, labels)?;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    // cycle which principal axis becomes the local z axis
    order.rotate_left((restart / 2) % 3);
    let mut axes = Matrix3::from_columns(&order.map(|k| eig.eigenvectors.column(k).into_owned()));
    if axes.determinant() < 0.0 {
        axes.set_column(2, &(-axes.column(2)));
    }
    let sigma = Vector3::from(order.map(|k| eig.eigenvalues[k].max(0.0).sqrt()));
    let mut rotation = UnitQuaternion::from_matrix(&axes);
    let sqrt3 = 3f64.sqrt();
    let full = sigma * sqrt3;
    let major = (0..3).max_by(|&i, &j| sigma[i].total_cmp(&sigma[j]).then(j.cmp(&i))).expect("three axes");
    if (restart / 6) % 2 == 1 {
        // the two closest spreads leave the frame ambiguous in their plane
        let ratio = |i: usize, j: usize| sigma[i].max(sigma[j]) / sigma[i].min(sigma[j]).max(f64::MIN_POSITIVE);
        let isolated = (0..3)
            .min_by(|&k, &m| ratio((k + 1) % 3, (k + 2) % 3).total_cmp(&ratio((m + 1) % 3, (m + 2) % 3)))
            .expect("three axes");
        let mut roll = Vector3::zeros();
        roll[isolated] = std::f64::consts::FRAC_PI_4;
        rotation *= UnitQuaternion::from_scaled_axis(roll);
    }

    let (mut a, mut b) = if restart % 2 == 0 {
        let offset = axes.column(major) * (0.5 * sqrt3 * sigma[major]);
        let mut half = full;
        half[major] *= 0.5;
        (
            Superquadric { size: half, e1: 1.0, e2: 1.0, translation: mean + offset, rotation },
            Superquadric { size: half, e1: 1.0, e2: 1.0, translation: mean - offset, rotation },
        )
    } else {
        (
            Superquadric { size: full, e1: 1.0, e2: 1.0, translation: mean, rotation },
            Superquadric { size: Vector3::repeat(bounds.a_min), e1: 1.0, e2: 1.0, translation: mean, rotation },
        )
    };

    if restart >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, restart as u64));
        let shift = Normal::new(0.0, 0.15 * sigma[major].max(bounds.a_min)).expect("finite sigma");
        let angle = Normal::new(0.0, 0.3).expect("finite sigma");
        for sq in [&mut a, &mut b] {
            sq.translation += Vector3::from_fn(|_, _| shift.sample(&mut rng));
            let omega = Vector3::from_fn(|_, _| angle.sample(&mut rng));
            *sq = sq.rotated_by_tangent(&omega);
            let scale: f64 = rng.random_range(0.8..1.2);
            sq.size *= scale;
        }
    }
    a.project(bounds);
    b.project(bounds);
    Some((a, b))
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed used for node `(d, i)` of a tree fitted with `seed`.
pub fn node_seed(seed: u64, d: u32, i: u32) -> u64 {
    mix_seed(seed, (u64::from(d) << 32) | u64::from(i))
}

/// Runs one restart from `init`, calling `observe` with every iterate
/// before its gradient step. Returns the best iterate seen.
pub fn optimize_pair(
    init: (Superquadric, Superquadric),
    points: &[Vector3<f64>],
    labels: &[bool],
    cfg: &FitConfig,
    mut observe: impl FnMut(usize, &Superquadric, &Superquadric),
) -> Result<NodeFit, FitError> {
    let occ = cfg.occupancy()?;
    let bounds = cfg.bounds();
    let (mut a, mut b) = init;
    let mut velocity = [0.0; 2 * PARAM_DOF];
    let mut mean_sq = [0.0; 2 * PARAM_DOF];
    let mut step = [0.0; 2 * PARAM_DOF];
    let mut best = (a, b);
    let mut best_loss = f64::INFINITY;
    let mut initial_loss = f64::NAN;
    let mut since_best = 0;
    let mut used = 0;
    for it in 0..cfg.iterations {
        observe(it, &a, &b);
        let (loss, mut grad) = loss_and_gradient(&a, &b, points, labels, &occ)?;
        used = it + 1;
        if it == 0 {
            initial_loss = loss;
        }
        if loss < best_loss {
            best_loss = loss;
            best = (a, b);
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                break;
            }
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > cfg.grad_clip {
            let k = cfg.grad_clip / norm;
            grad.iter_mut().for_each(|g| *g *= k);
        }
        let progress = it as f64 / cfg.iterations as f64;
        let lr = cfg.step_size * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        let t = (it + 1) as i32;
        let m_corr = 1.0 - cfg.momentum.powi(t);
        let r_corr = 1.0 - cfg.rms_decay.powi(t);
        for k in 0..step.len() {
            if cfg.rms_decay > 0.0 {
                velocity[k] = cfg.momentum * velocity[k] + (1.0 - cfg.momentum) * grad[k];
                mean_sq[k] = cfg.rms_decay * mean_sq[k] + (1.0 - cfg.rms_decay) * grad[k] * grad[k];
                step[k] = -lr * (velocity[k] / m_corr) / ((mean_sq[k] / r_corr).sqrt() + RMS_EPS);
            } else {
                velocity[k] = cfg.momentum * velocity[k] - lr * grad[k];
                step[k] = velocity[k];
            }
        }
        a = apply_step(&a, &step[..PARAM_DOF], &bounds);
        b = apply_step(&b, &step[PARAM_DOF..], &bounds);
    }
    if used == cfg.iterations {
        // the last update has not been scored yet
        let loss = node_loss(&a, &b, points, labels, &occ)?;
        if loss < best_loss {
            best_loss = loss;
            best = (a, b);
        }
    }
    Ok(NodeFit {
        sq_a: best.0,
        sq_b: best.1,
        loss: best_loss,
        initial_loss,
        iterations: used,
        degenerate: false,
    })
}

/// Placeholder pair for a node without inside points: two minimum-size
/// spheres at the centroid of `points`.
pub fn degenerate_pair(points: &[Vector3<f64>], bounds: &Bounds) -> (Superquadric, Superquadric) {
    let c = if points.is_empty() {
        Vector3::zeros()
    } else {
        points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / points.len() as f64
    };
    let sq = Superquadric::sphere(bounds.a_min, [c.x, c.y, c.z]);
    (sq, sq)
}

/// Index of the smallest value, first one on ties.
fn lowest(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) })
        .0
}

/// Fits one pair to `labels`, keeping the best of `cfg.restarts` runs.
pub fn fit_node(points: &[Vector3<f64>], labels: &[bool], cfg: &FitConfig) -> Result<NodeFit, FitError> {
    cfg.validate()?;
    check_lengths(points, labels)?;
    let bounds = cfg.bounds();
    if !labels.iter().any(|&l| l) {
        let (sq_a, sq_b) = degenerate_pair(points, &bounds);
        let loss = node_loss(&sq_a, &sq_b, points, labels, &cfg.occupancy()?)?;
        return Ok(NodeFit {
            sq_a,
            sq_b,
            loss,
            initial_loss: loss,
            iterations: 0,
            degenerate: true,
        });
    }
    let runs: Vec<NodeFit> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let init = init_node(points, labels, r, cfg.seed, &bounds).expect("inside points exist");
            optimize_pair(init, points, labels, cfg, |_, _, _| {})
        })
        .collect::<Result<_, _>>()?;
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let mut pick = lowest(runs.iter().map(|r| r.loss));
    if cfg.parsimony > 0.0 {
        let occ = cfg.occupancy()?;
        let single = runs
            .iter()
            .map(|r| {
                let la = node_loss(&r.sq_a, &r.sq_a, points, labels, &occ)?;
                let lb = node_loss(&r.sq_b, &r.sq_b, points, labels, &occ)?;
                Ok(la.min(lb))
            })
            .collect::<Result<Vec<f64>, FitError>>()?;
        let k = lowest(single.iter().copied());
        if single[k] <= runs[pick].loss * (1.0 + cfg.parsimony) {
            pick = k;
        }
    }
    let mut best = runs.into_iter().nth(pick).expect("at least one restart");
    best.iterations = iterations;
    Ok(best)
}

/// Fits the full tree breadth-first. Children of node `(d, i)` are fitted
/// against the node's labels restricted to each side of its split.
pub fn fit_tree(pointset: &LabeledPointSet, cfg: &FitConfig) -> Result<(SqTree, FitReport), FitError> {
    cfg.validate()?;
    check_lengths(&pointset.points, &pointset.labels)?;
    let start = Instant::now();
    let points = &pointset.points;
    let occ = cfg.occupancy()?;
    let mut tree = SqTree::new(cfg.max_depth, points.clone())?;
    let mut reports = Vec::new();

    struct Job {
        d: u32,
        i: u32,
        labels: Vec<bool>,
        inherited: Option<(Superquadric, Superquadric)>,
    }

    let mut jobs = vec![Job {
        d: 1,
        i: 1,
        labels: pointset.labels.clone(),
        inherited: None,
    }];
    for d in 1..=cfg.max_depth {
        let fits: Vec<NodeFit> = jobs
            .par_iter()
            .map(|job| match job.inherited {
                Some((sq_a, sq_b)) => {
                    let loss = node_loss(&sq_a, &sq_b, points, &job.labels, &occ)?;
                    Ok(NodeFit {
                        sq_a,
                        sq_b,
                        loss,
                        initial_loss: loss,
                        iterations: 0,
                        degenerate: true,
                    })
                }
                None => {
                    let node_cfg = FitConfig {
                        seed: node_seed(cfg.seed, job.d, job.i),
                        ..cfg.clone()
                    };
                    fit_node(points, &job.labels, &node_cfg)
                }
            })
            .collect::<Result<_, FitError>>()?;

        let mut next = Vec::new();
        for (job, fit) in jobs.into_iter().zip(fits) {
            reports.push(NodeReport {
                d: job.d,
                i: job.i,
                loss: fit.loss,
                initial_loss: fit.initial_loss,
                iterations: fit.iterations,
                degenerate: fit.degenerate,
                inside_points: job.labels.iter().filter(|&&l| l).count(),
            });
            if d < cfg.max_depth {
                let split = split_pair(&fit.sq_a, &fit.sq_b, points);
                for side in [Side::B, Side::A] {
                    let labels = child_labels(&job.labels, &split, side).expect("lengths match");
                    next.push(Job {
                        d: d + 1,
                        i: child_index(job.i, side),
                        labels,
                        inherited: fit.degenerate.then_some((fit.sq_a, fit.sq_b)),
                    });
                }
            }
            tree.insert(SqPairNode {
                depth: job.d,
                index: job.i,
                sq_a: fit.sq_a,
                sq_b: fit.sq_b,
                labels: job.labels,
                degenerate: fit.degenerate,
            })?;
        }
        next.sort_by_key(|j| j.i);
        jobs = next;
    }

    let level_iou = (1..=cfg.max_depth)
        .map(|d| {
            let sqs = tree.all_leaves_at(d)?;
            match iou(&sqs, pointset, &occ) {
                Ok(v) => Ok(Some(v)),
                Err(MetricsError::EmptyUnion) => Ok(None),
                Err(e) => unreachable!("point set validated: {e}"),
            }
        })
        .collect::<Result<Vec<_>, TreeError>>()?;
    let n = points.len() as f64;
    let total_loss_mean: f64 = reports.iter().map(|r| r.loss).sum();
    let report = FitReport {
        total_loss_raw: total_loss_mean * n,
        total_loss_mean,
        iterations: reports.iter().map(|r| r.iterations).sum(),
        nodes: reports,
        level_iou,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((tree, report))
}
