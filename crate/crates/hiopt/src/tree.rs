//! Incremental partition tree with per-node sampling statistics.
//!
//! Nodes are addressed by (depth, index) with index in [0, K^depth).
//! Indices are arbitrary-precision because deep runs (branching 3,
//! depth beyond 40) overflow fixed-width integers. Storage is an ordered
//! map so iteration within a depth is always by ascending index, which
//! makes every argmax tie-break deterministic.
//!
//! Each node tracks how many rewards it absorbed and their sum. A node's
//! optimistic value is mean + sqrt(width_constant / (2 * pulls)), and
//! +infinity before the first pull so unsampled leaves are always
//! preferred. When a node with pulls expands and the branching factor is
//! odd, the middle child inherits the parent's statistics outright: its
//! representative point is the same point, so the parent's samples are
//! samples of the child.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::ops::Bound;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::partition::{root_cell, split, Bounds, Cell};

/// Tree address: depth and index within that depth.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub depth: u32,
    pub index: BigUint,
}

impl NodeId {
    pub fn new(depth: u32, index: impl Into<BigUint>) -> Self {
        Self {
            depth,
            index: index.into(),
        }
    }

    pub fn root() -> Self {
        Self::new(0, 0u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.depth, self.index)
    }
}

/// Sampling state of one node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeStats {
    pub pulls: u64,
    pub reward_sum: f64,
    pub expanded: bool,
}

impl NodeStats {
    /// Empirical mean reward, None before the first pull.
    pub fn mean(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.reward_sum / self.pulls as f64)
    }
}

/// Optimistic upper value with an explicit exploration width constant:
/// mean + sqrt(width_constant / (2 * pulls)), +infinity with no pulls.
pub(crate) fn b_value_with_constant(stats: &NodeStats, width_constant: f64) -> f64 {
    debug_assert!(width_constant >= 0.0, "width constant must be nonnegative");
    match stats.mean() {
        None => f64::INFINITY,
        Some(m) => m + (width_constant / (2.0 * stats.pulls as f64)).sqrt(),
    }
}

/// Optimistic upper value of a node under a budget of n evaluations,
/// expansion threshold k, and confidence level delta:
/// mean + sqrt(ln(n * k / delta) / (2 * pulls)).
///
/// Requires n >= 1, k >= 1, 0 < delta < 1. Returns +infinity for an
/// unsampled node.
pub fn b_value(stats: &NodeStats, n: u64, k: u64, delta: f64) -> f64 {
    debug_assert!(n >= 1 && k >= 1, "need n >= 1 and k >= 1");
    debug_assert!(0.0 < delta && delta < 1.0, "delta must lie in (0, 1)");
    let c = ((n as f64) * (k as f64) / delta).ln();
    b_value_with_constant(stats, c.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    cell: Cell,
    stats: NodeStats,
}

/// The explored portion of the partition, rooted at the whole domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    nodes: BTreeMap<NodeId, Node>,
    branching: u32,
    max_depth: u32,
    deepest_expanded: Option<u32>,
    expansions: u64,
    inherited_pulls: u64,
}

impl PartitionTree {
    pub fn new(domain: Bounds, branching: u32) -> Result<Self> {
        if branching < 2 {
            return Err(Error::InvalidParams(format!(
                "branching factor must be at least 2, got {branching}"
            )));
        }
        let root = Node {
            cell: root_cell(domain),
            stats: NodeStats::default(),
        };
        let mut nodes = BTreeMap::new();
        nodes.insert(NodeId::root(), root);
        Ok(Self {
            nodes,
            branching,
            max_depth: 0,
            deepest_expanded: None,
            expansions: 0,
            inherited_pulls: 0,
        })
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a tree always holds at least the root
    }

    /// Depth of the deepest node present.
    pub fn depth(&self) -> u32 {
        self.max_depth
    }

    pub fn deepest_expanded_depth(&self) -> Option<u32> {
        self.deepest_expanded
    }

    pub fn expansions(&self) -> u64 {
        self.expansions
    }

    /// Pulls credited to middle children at expansion time rather than
    /// drawn from the objective. total_pulls() == evaluations + this.
    pub fn inherited_pulls(&self) -> u64 {
        self.inherited_pulls
    }

    pub fn total_pulls(&self) -> u64 {
        self.nodes.values().map(|n| n.stats.pulls).sum()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn cell(&self, id: &NodeId) -> Option<&Cell> {
        self.nodes.get(id).map(|n| &n.cell)
    }

    pub fn stats(&self, id: &NodeId) -> Option<&NodeStats> {
        self.nodes.get(id).map(|n| &n.stats)
    }

    /// All nodes at one depth, ascending by index.
    pub fn nodes_at_depth(&self, depth: u32) -> impl Iterator<Item = (&NodeId, &Cell, &NodeStats)> {
        let start = Bound::Included(NodeId::new(depth, 0u32));
        let end = if depth == u32::MAX {
            Bound::Unbounded
        } else {
            Bound::Excluded(NodeId::new(depth + 1, 0u32))
        };
        self.nodes
            .range((start, end))
            .map(|(id, n)| (id, &n.cell, &n.stats))
    }

    /// Unexpanded nodes at one depth, ascending by index.
    pub fn leaves_at_depth(&self, depth: u32) -> Vec<NodeId> {
        self.nodes_at_depth(depth)
            .filter(|(_, _, s)| !s.expanded)
            .map(|(id, _, _)| id.clone())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &Cell, &NodeStats)> {
        self.nodes.iter().map(|(id, n)| (id, &n.cell, &n.stats))
    }

    /// Adds one observed reward to a leaf.
    pub fn record_reward(&mut self, id: &NodeId, reward: f64) -> Result<()> {
        let node = self.nodes.get_mut(id).ok_or_else(|| Error::MissingNode {
            depth: id.depth,
            index: id.index.clone(),
        })?;
        if node.stats.expanded {
            return Err(Error::NodeExpanded {
                depth: id.depth,
                index: id.index.clone(),
            });
        }
        node.stats.pulls += 1;
        node.stats.reward_sum += reward;
        Ok(())
    }

    /// Splits a leaf into its branching() children and returns their ids
    /// in index order. With `reuse_middle` and odd branching, the middle
    /// child starts with the parent's pulls and reward sum; every other
    /// child starts empty.
    pub fn expand_node(&mut self, id: &NodeId, reuse_middle: bool) -> Result<Vec<NodeId>> {
        let node = self.nodes.get(id).ok_or_else(|| Error::MissingNode {
            depth: id.depth,
            index: id.index.clone(),
        })?;
        if node.stats.expanded {
            return Err(Error::NodeExpanded {
                depth: id.depth,
                index: id.index.clone(),
            });
        }
        let parent_stats = node.stats.clone();
        let children = split(&node.cell, self.branching);
        let middle = if self.branching % 2 == 1 {
            Some((self.branching / 2) as usize)
        } else {
            None
        };
        let mut child_ids = Vec::with_capacity(self.branching as usize);
        for (c, cell) in children.into_iter().enumerate() {
            let stats = if reuse_middle && Some(c) == middle {
                self.inherited_pulls += parent_stats.pulls;
                NodeStats {
                    pulls: parent_stats.pulls,
                    reward_sum: parent_stats.reward_sum,
                    expanded: false,
                }
            } else {
                NodeStats::default()
            };
            let child_id = NodeId::new(cell.depth(), cell.index().clone());
            debug_assert!(!self.nodes.contains_key(&child_id));
            child_ids.push(child_id.clone());
            self.nodes.insert(child_id, Node { cell, stats });
        }
        self.max_depth = self.max_depth.max(id.depth + 1);
        self.deepest_expanded = Some(match self.deepest_expanded {
            None => id.depth,
            Some(d) => d.max(id.depth),
        });
        self.expansions += 1;
        self.nodes
            .get_mut(id)
            .expect("checked above")
            .stats
            .expanded = true;
        Ok(child_ids)
    }

    /// Line-oriented text dump, one node per line sorted by (depth,
    /// index): depth, index, pulls, mean, expanded flag, then the box
    /// bounds as lower/upper pairs per dimension.
    pub fn dump(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "# depth index pulls mean expanded bounds(lo hi)*")?;
        for (id, node) in &self.nodes {
            let mean = match node.stats.mean() {
                Some(m) => format!("{m:.16e}"),
                None => "nan".to_string(),
            };
            write!(
                out,
                "{} {} {} {} {}",
                id.depth, id.index, node.stats.pulls, mean, node.stats.expanded
            )?;
            let b = node.cell.bounds();
            for j in 0..b.dim() {
                write!(out, " {:.16e} {:.16e}", b.lower()[j], b.upper()[j])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_tree(k: u32) -> PartitionTree {
        PartitionTree::new(Bounds::unit_interval(), k).unwrap()
    }

    #[test]
    fn b_value_is_infinite_before_first_pull() {
        let stats = NodeStats::default();
        assert!(b_value(&stats, 1000, 10, 0.1).is_infinite());
    }

    #[test]
    fn b_value_matches_frozen_reference() {
        // pulls 10, sum 5, n 1000, k 10, delta 0.1:
        // 0.5 + sqrt(ln(100000) / 20) = 1.2587135646925732
        let stats = NodeStats {
            pulls: 10,
            reward_sum: 5.0,
            expanded: false,
        };
        assert_relative_eq!(
            b_value(&stats, 1000, 10, 0.1),
            1.2587135646925732,
            max_relative = 1e-12
        );
    }

    #[test]
    fn b_value_width_shrinks_with_pulls_grows_with_confidence() {
        let mk = |pulls: u64| NodeStats {
            pulls,
            reward_sum: 0.5 * pulls as f64,
            expanded: false,
        };
        let b10 = b_value(&mk(10), 1000, 10, 0.1);
        let b100 = b_value(&mk(100), 1000, 10, 0.1);
        let b_many = b_value(&mk(10_000_000), 1000, 10, 0.1);
        assert!(b10 > b100 && b100 > b_many);
        assert!(b_many - 0.5 < 0.001);
        assert!(b_value(&mk(10), 1000, 10, 0.001) > b_value(&mk(10), 1000, 10, 0.1));
        // the bonus is never negative
        assert!(b_value(&mk(7), 2, 1, 0.9) >= 0.5);
    }

    #[test]
    fn record_reward_accumulates_and_checks_state() {
        let mut tree = unit_tree(3);
        let root = NodeId::root();
        tree.record_reward(&root, 0.7).unwrap();
        tree.record_reward(&root, 0.3).unwrap();
        let stats = tree.stats(&root).unwrap();
        assert_eq!(stats.pulls, 2);
        assert_relative_eq!(stats.mean().unwrap(), 0.5, max_relative = 1e-15);

        let missing = NodeId::new(4, 2u32);
        assert!(matches!(
            tree.record_reward(&missing, 0.0),
            Err(Error::MissingNode { .. })
        ));

        tree.expand_node(&root, true).unwrap();
        assert!(matches!(
            tree.record_reward(&root, 0.0),
            Err(Error::NodeExpanded { .. })
        ));
    }

    #[test]
    fn expansion_reuses_middle_child_statistics() {
        let mut tree = unit_tree(3);
        let root = NodeId::root();
        tree.record_reward(&root, 0.9).unwrap();
        tree.record_reward(&root, 0.3).unwrap();
        tree.expand_node(&root, true).unwrap();

        assert_eq!(tree.len(), 4);
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.deepest_expanded_depth(), Some(0));
        assert_eq!(tree.expansions(), 1);
        assert_eq!(tree.inherited_pulls(), 2);

        let mid = NodeId::new(1, 1u32);
        let mid_stats = tree.stats(&mid).unwrap();
        assert_eq!(mid_stats.pulls, 2);
        assert_eq!(mid_stats.reward_sum, 0.9 + 0.3);
        // the representative point is the parent's, bit-for-bit
        assert_eq!(tree.cell(&mid).unwrap().representative(), &[0.5]);

        for side in [NodeId::new(1, 0u32), NodeId::new(1, 2u32)] {
            let s = tree.stats(&side).unwrap();
            assert_eq!((s.pulls, s.reward_sum), (0, 0.0));
        }
    }

    #[test]
    fn expansion_without_reuse_starts_children_empty() {
        let mut tree = unit_tree(3);
        let root = NodeId::root();
        tree.record_reward(&root, 0.9).unwrap();
        tree.expand_node(&root, false).unwrap();
        for c in 0u32..3 {
            let s = tree.stats(&NodeId::new(1, c)).unwrap();
            assert_eq!((s.pulls, s.reward_sum), (0, 0.0));
        }
        assert_eq!(tree.inherited_pulls(), 0);
    }

    #[test]
    fn even_branching_never_inherits() {
        let mut tree = unit_tree(2);
        let root = NodeId::root();
        tree.record_reward(&root, 1.0).unwrap();
        tree.expand_node(&root, true).unwrap();
        for c in 0u32..2 {
            assert_eq!(tree.stats(&NodeId::new(1, c)).unwrap().pulls, 0);
        }
        assert_eq!(tree.inherited_pulls(), 0);
    }

    #[test]
    fn double_expansion_is_rejected() {
        let mut tree = unit_tree(3);
        let root = NodeId::root();
        tree.expand_node(&root, true).unwrap();
        assert!(matches!(
            tree.expand_node(&root, true),
            Err(Error::NodeExpanded { .. })
        ));
    }

    #[test]
    fn leaves_at_depth_are_sorted_and_exclude_expanded() {
        let mut tree = unit_tree(3);
        assert_eq!(tree.leaves_at_depth(0), vec![NodeId::root()]);
        tree.expand_node(&NodeId::root(), true).unwrap();
        assert!(tree.leaves_at_depth(0).is_empty());
        let leaves = tree.leaves_at_depth(1);
        assert_eq!(
            leaves,
            vec![
                NodeId::new(1, 0u32),
                NodeId::new(1, 1u32),
                NodeId::new(1, 2u32)
            ]
        );
        tree.expand_node(&NodeId::new(1, 2u32), true).unwrap();
        assert_eq!(
            tree.leaves_at_depth(1),
            vec![NodeId::new(1, 0u32), NodeId::new(1, 1u32)]
        );
        assert_eq!(tree.leaves_at_depth(2).len(), 3);
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.deepest_expanded_depth(), Some(1));
    }

    #[test]
    fn node_count_tracks_expansions() {
        let mut tree = unit_tree(4);
        tree.expand_node(&NodeId::root(), true).unwrap();
        tree.expand_node(&NodeId::new(1, 3u32), true).unwrap();
        tree.expand_node(&NodeId::new(2, 12u32), true).unwrap();
        assert_eq!(tree.len(), 1 + 3 * 4);
        assert_eq!(tree.expansions(), 3);
    }

    #[test]
    fn pull_accounting_balances() {
        let mut tree = unit_tree(3);
        let root = NodeId::root();
        tree.record_reward(&root, 0.2).unwrap();
        tree.record_reward(&root, 0.4).unwrap();
        tree.expand_node(&root, true).unwrap();
        let mid = NodeId::new(1, 1u32);
        tree.record_reward(&mid, 0.6).unwrap();
        tree.expand_node(&mid, true).unwrap();
        // evaluations: 3; inherited: 2 (root -> mid) + 3 (mid -> its middle)
        assert_eq!(tree.inherited_pulls(), 5);
        assert_eq!(tree.total_pulls(), 3 + 5);
    }

    #[test]
    fn dump_lists_every_node_in_order() {
        let mut tree = unit_tree(3);
        tree.record_reward(&NodeId::root(), 0.5).unwrap();
        tree.expand_node(&NodeId::root(), true).unwrap();
        let mut buf = Vec::new();
        tree.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines[0].starts_with('#'));
        assert!(lines[1].starts_with("0 0 1 5.0000000000000000e-1 true"));
        assert!(lines[2].starts_with("1 0 0 nan false"));
        assert!(lines[4].contains("1.0000000000000000e0"));
    }

    #[test]
    fn deep_indices_do_not_overflow() {
        // drive one branch 90 levels down: indices reach 3^90 > u128::MAX
        let mut tree = unit_tree(3);
        let mut id = NodeId::root();
        for _ in 0..90 {
            tree.expand_node(&id, true).unwrap();
            id = NodeId::new(id.depth + 1, &id.index * 3u32 + 2u32);
        }
        assert_eq!(tree.depth(), 90);
        assert!(tree.contains(&id));
        assert_eq!(tree.leaves_at_depth(90).len(), 3);
    }
}
