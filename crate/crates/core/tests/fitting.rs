mod common;

use common::{dumbbell, table};
use nalgebra::Vector3;
use sqdecomp::fitter::{fit_node, fit_tree, FitConfig};
use sqdecomp::geometry::{sample_labeled_points, LabeledPointSet, Mesh};
use sqdecomp::metrics::predicted_labels;
use sqdecomp::sqtree::parent_sq;
use sqdecomp::{child_labels, split_pair};

fn quick(max_depth: u32) -> FitConfig {
    FitConfig {
        max_depth,
        iterations: 250,
        restarts: 2,
        ..Default::default()
    }
}

fn accuracy(sqs: &[sqdecomp::Superquadric], set: &LabeledPointSet, cfg: &FitConfig) -> f64 {
    let pred = predicted_labels(sqs, &set.points, &cfg.occupancy().unwrap());
    pred.iter().zip(&set.labels).filter(|(p, l)| p == l).count() as f64 / set.len() as f64
}

#[test]
fn recovers_a_sphere() {
    let mesh = Mesh::uv_sphere([0.05, -0.05, 0.0], 0.3, 24, 48);
    let train = sample_labeled_points(&mesh, 0, 4000, 1).unwrap();
    let cfg = quick(1);
    let fit = fit_node(&train.points, &train.labels, &cfg).unwrap();
    let acc = accuracy(&[fit.sq_a, fit.sq_b], &train, &cfg);
    assert!(acc >= 0.99, "accuracy {acc}");
    assert!(fit.loss < fit.initial_loss);
}

#[test]
fn pair_separates_two_boxes() {
    let train = sample_labeled_points(&dumbbell(), 2000, 2000, 2).unwrap();
    let cfg = FitConfig {
        iterations: 600,
        ..quick(1)
    };
    let fit = fit_node(&train.points, &train.labels, &cfg).unwrap();
    let mut xs = [fit.sq_a.translation.x, fit.sq_b.translation.x];
    xs.sort_by(f64::total_cmp);
    assert!((xs[0] + 0.3).abs() < 0.05 && (xs[1] - 0.3).abs() < 0.05, "{xs:?}");
    let acc = accuracy(&[fit.sq_a, fit.sq_b], &train, &cfg);
    assert!(acc > 0.95, "accuracy {acc}");
}

#[test]
fn depth_three_tree_shape_and_audit() {
    let train = sample_labeled_points(&table(), 1500, 1500, 4).unwrap();
    let cfg = FitConfig {
        iterations: 120,
        ..quick(3)
    };
    let (tree, report) = fit_tree(&train, &cfg).unwrap();
    assert_eq!(tree.len(), 7);
    assert_eq!(report.nodes.len(), 7);
    assert_eq!(tree.all_leaves_at(3).unwrap().len(), 8);
    assert_eq!(tree.fitted_depth(), 3);
    tree.audit_labels().unwrap();

    // recompute every label set top-down
    assert_eq!(tree.node(1, 1).unwrap().labels, train.labels);
    for node in tree.nodes().filter(|n| n.depth > 1) {
        let (pd, pi, side) = parent_sq(node.depth, node.index).unwrap();
        let parent = tree.node(pd, pi).unwrap();
        let split = split_pair(&parent.sq_a, &parent.sq_b, &train.points);
        assert_eq!(child_labels(&parent.labels, &split, side).unwrap(), node.labels);
    }

    let bounds = cfg.bounds();
    for node in tree.nodes() {
        node.sq_a.validate(&bounds).unwrap();
        node.sq_b.validate(&bounds).unwrap();
    }
    for n in report.nodes.iter().filter(|n| !n.degenerate) {
        assert!(n.loss <= n.initial_loss, "{n:?}");
    }
}

#[test]
fn fitting_is_deterministic() {
    let train = sample_labeled_points(&dumbbell(), 800, 800, 9).unwrap();
    let cfg = FitConfig {
        iterations: 60,
        restarts: 3,
        ..quick(2)
    };
    let (t1, r1) = fit_tree(&train, &cfg).unwrap();
    let (t2, r2) = fit_tree(&train, &cfg).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(r1.total_loss_raw.to_bits(), r2.total_loss_raw.to_bits());
    let other = fit_tree(&train, &FitConfig { seed: 1, ..cfg }).unwrap().0;
    assert_ne!(t1, other);
}

#[test]
fn empty_object_yields_degenerate_nodes() {
    let points: Vec<Vector3<f64>> = (0..50).map(|k| Vector3::new(k as f64 * 0.01, 0.0, 0.0)).collect();
    let set = LabeledPointSet::new(points, vec![false; 50]).unwrap();
    let (tree, report) = fit_tree(&set, &quick(2)).unwrap();
    assert_eq!(tree.len(), 3);
    assert!(report.nodes.iter().all(|n| n.degenerate && n.iterations == 0));
    let root = tree.node(1, 1).unwrap();
    for node in tree.nodes() {
        assert_eq!((node.sq_a, node.sq_b), (root.sq_a, root.sq_b));
    }
}

#[test]
fn parsimony_prefers_one_superquadric_for_one_part() {
    let mesh = Mesh::cuboid([-0.3, -0.15, -0.1], [0.3, 0.15, 0.1]);
    let train = sample_labeled_points(&mesh, 1500, 1500, 6).unwrap();
    let cfg = FitConfig {
        parsimony: 0.5,
        restarts: 4,
        ..quick(1)
    };
    let fit = fit_node(&train.points, &train.labels, &cfg).unwrap();
    let single = [fit.sq_a, fit.sq_b]
        .iter()
        .map(|sq| accuracy(&[*sq], &train, &cfg))
        .fold(0.0, f64::max);
    assert!(single > 0.95, "{single}");
}
