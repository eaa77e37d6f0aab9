//! Binary tree of superquadric pairs indexed by `(depth, index)`.
//!
//! Depth starts at 1 (the root pair) and level `d` holds indices
//! `1..=2^(d-1)`. Child `(d+1, 2i)` refines side `A` of node `(d, i)` and
//! child `(d+1, 2i-1)` refines side `B`.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use thiserror::Error;

use crate::splitter::{child_labels, split_pair, Side};
use crate::superquadric::Superquadric;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("the root node has no parent")]
    Root,
    #[error("invalid node index ({0}, {1})")]
    InvalidIndex(u32, u32),
    #[error("node ({0}, {1}) is deeper than the tree's max depth {2}")]
    TooDeep(u32, u32, u32),
    #[error("parent of node ({0}, {1}) is missing")]
    MissingParent(u32, u32),
    #[error("node ({0}, {1}) already present")]
    Duplicate(u32, u32),
    #[error("node ({d}, {i}) has {got} labels, tree has {expected} points")]
    LabelLength { d: u32, i: u32, got: usize, expected: usize },
    #[error("level {0} is not fitted")]
    LevelNotFitted(u32),
    #[error("max depth must be at least 1")]
    ZeroDepth,
    #[error("labels of node ({0}, {1}) differ from the ones derived from its parent")]
    LabelMismatch(u32, u32),
}

fn check_index(d: u32, i: u32) -> Result<(), TreeError> {
    if d == 0 || d > 63 || i == 0 || u64::from(i) > 1u64 << (d - 1) {
        Err(TreeError::InvalidIndex(d, i))
    } else {
        Ok(())
    }
}

/// `(d-1, ceil(i/2))`
pub fn parent_node(d: u32, i: u32) -> Result<(u32, u32), TreeError> {
    check_index(d, i)?;
    if d == 1 {
        return Err(TreeError::Root);
    }
    Ok((d - 1, i.div_ceil(2)))
}

/// Parent node plus the side of the parent pair that spawned `(d, i)`.
pub fn parent_sq(d: u32, i: u32) -> Result<(u32, u32, Side), TreeError> {
    let (pd, pi) = parent_node(d, i)?;
    let side = if i % 2 == 0 { Side::A } else { Side::B };
    Ok((pd, pi, side))
}

/// The other superquadric of the parent pair.
pub fn uncle_sq(d: u32, i: u32) -> Result<(u32, u32, Side), TreeError> {
    let (pd, pi, side) = parent_sq(d, i)?;
    Ok((pd, pi, side.other()))
}

/// Index at depth `d+1` of the child refining `side` of node `(d, i)`.
pub fn child_index(i: u32, side: Side) -> u32 {
    match side {
        Side::A => 2 * i,
        Side::B => 2 * i - 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqPairNode {
    pub depth: u32,
    pub index: u32,
    pub sq_a: Superquadric,
    pub sq_b: Superquadric,
    /// Ground-truth occupancy this pair was fitted against.
    pub labels: Vec<bool>,
    /// Set when the node had nothing to fit and holds placeholder shapes.
    pub degenerate: bool,
}

impl SqPairNode {
    pub fn sq(&self, side: Side) -> &Superquadric {
        match side {
            Side::A => &self.sq_a,
            Side::B => &self.sq_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqTree {
    max_depth: u32,
    nodes: BTreeMap<(u32, u32), SqPairNode>,
    points: Vec<Vector3<f64>>,
}

impl SqTree {
    pub fn new(max_depth: u32, points: Vec<Vector3<f64>>) -> Result<Self, TreeError> {
        if max_depth == 0 {
            return Err(TreeError::ZeroDepth);
        }
        Ok(Self {
            max_depth,
            nodes: BTreeMap::new(),
            points,
        })
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn insert(&mut self, node: SqPairNode) -> Result<(), TreeError> {
        let (d, i) = (node.depth, node.index);
        check_index(d, i)?;
        if d > self.max_depth {
            return Err(TreeError::TooDeep(d, i, self.max_depth));
        }
        if d > 1 && !self.nodes.contains_key(&parent_node(d, i)?) {
            return Err(TreeError::MissingParent(d, i));
        }
        if node.labels.len() != self.points.len() {
            return Err(TreeError::LabelLength {
                d,
                i,
                got: node.labels.len(),
                expected: self.points.len(),
            });
        }
        if self.nodes.contains_key(&(d, i)) {
            return Err(TreeError::Duplicate(d, i));
        }
        self.nodes.insert((d, i), node);
        Ok(())
    }

    pub fn node(&self, d: u32, i: u32) -> Option<&SqPairNode> {
        self.nodes.get(&(d, i))
    }

    /// Nodes in `(depth, index)` order.
    pub fn nodes(&self) -> impl Iterator<Item = &SqPairNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn level(&self, d: u32) -> impl Iterator<Item = &SqPairNode> {
        self.nodes.range((d, 0)..(d + 1, 0)).map(|(_, n)| n)
    }

    pub fn is_level_complete(&self, d: u32) -> bool {
        d >= 1 && d <= 63 && self.level(d).count() as u64 == 1u64 << (d - 1)
    }

    /// Deepest level such that it and every level above it are complete.
    pub fn fitted_depth(&self) -> u32 {
        (1..=self.max_depth).take_while(|&d| self.is_level_complete(d)).last().unwrap_or(0)
    }

    /// Both superquadrics of every node at level `d`, ordered by index with
    /// `A` before `B`.
    pub fn all_leaves_at(&self, d: u32) -> Result<Vec<Superquadric>, TreeError> {
        if !self.is_level_complete(d) {
            return Err(TreeError::LevelNotFitted(d));
        }
        Ok(self.level(d).flat_map(|n| [n.sq_a, n.sq_b]).collect())
    }

    /// Re-derives every non-root node's labels from its parent's split and
    /// compares with what is stored.
    pub fn audit_labels(&self) -> Result<(), TreeError> {
        for node in self.nodes.values().filter(|n| n.depth > 1) {
            let (pd, pi, side) = parent_sq(node.depth, node.index)?;
            let parent = self
                .node(pd, pi)
                .ok_or(TreeError::MissingParent(node.depth, node.index))?;
            let split = split_pair(&parent.sq_a, &parent.sq_b, &self.points);
            let expected = child_labels(&parent.labels, &split, side).map_err(|_| TreeError::LabelLength {
                d: pd,
                i: pi,
                got: parent.labels.len(),
                expected: self.points.len(),
            })?;
            if expected != node.labels {
                return Err(TreeError::LabelMismatch(node.depth, node.index));
            }
        }
        Ok(())
    }
}
