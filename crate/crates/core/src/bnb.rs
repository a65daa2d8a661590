//! Multi-criteria branch-and-bound with NSGA-II bounding.
//!
//! The tree branches on integer variables in index order, one value per
//! child. Every node is bounded by an NSGA-II run restricted to the node's
//! integer box: the run's non-dominated set is the node's upper bound and
//! its ideal point the (heuristic) lower bound. A child is kept iff no
//! incumbent member dominates its ideal point; kept children feed their
//! non-dominated points into the incumbent archive.
//!
//! The ideal point of a heuristic front is not a valid lower bound, so
//! fathoming can discard regions that hold Pareto-optimal points.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::nsga2::{run_nsga2, Nsga2Config};
use crate::pareto::{ideal_point, ObjectiveVector, ParetoArchive};
use crate::problems::ProblemSpec;

/// Cap applied to the default node budget on large lattices.
pub const DEFAULT_NODE_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    Open,
    Leaf,
    Fathomed,
    Infeasible,
    Solved,
}

/// A subproblem: the integer box `[lower, upper]`.
#[derive(Clone, Debug)]
pub struct Node {
    /// Number of fixed integer variables.
    pub level: usize,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    pub status: NodeStatus,
    pub local_archive: ParetoArchive,
    pub local_ideal: Option<ObjectiveVector>,
    /// Generations run by the bounding NSGA-II call.
    pub generations: usize,
}

impl Node {
    pub fn root(problem: &ProblemSpec) -> Self {
        let (lower, upper) = problem.integer_box().into_iter().unzip();
        Self::with_box(lower, upper)
    }

    fn with_box(lower: Vec<i64>, upper: Vec<i64>) -> Self {
        let level = lower.iter().zip(&upper).filter(|(l, u)| l == u).count();
        let status = if level == lower.len() {
            NodeStatus::Leaf
        } else {
            NodeStatus::Open
        };
        Self {
            level,
            lower,
            upper,
            status,
            local_archive: ParetoArchive::new(),
            local_ideal: None,
            generations: 0,
        }
    }

    /// All integer variables fixed.
    pub fn is_leaf(&self) -> bool {
        self.lower == self.upper
    }

    pub fn integer_box(&self) -> Vec<(i64, i64)> {
        self.lower
            .iter()
            .copied()
            .zip(self.upper.iter().copied())
            .collect()
    }
}

/// Order in which open nodes are expanded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeSelection {
    /// Most recently created open node first.
    #[default]
    DepthFirst,
    /// Oldest open node first.
    BreadthFirst,
}

/// Parameters of the three NSGA-II instances and the tree search.
///
/// The `seed` fields of the three NSGA-II configs are ignored; each call
/// gets a seed derived from `seed` and its call index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BnbConfig {
    pub root: Nsga2Config,
    pub node: Nsga2Config,
    pub leaf: Nsga2Config,
    /// Maximum number of child nodes bounded. `None`: the tree size, capped
    /// at [`DEFAULT_NODE_CAP`].
    pub max_nodes: Option<usize>,
    pub node_selection: NodeSelection,
    /// Disable to keep every feasible child regardless of its ideal point.
    pub fathoming: bool,
    pub seed: u64,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            root: Nsga2Config::sized(100, 100, 50),
            node: Nsga2Config::sized(50, 20, 20),
            leaf: Nsga2Config::sized(50, 50, 20),
            max_nodes: None,
            node_selection: NodeSelection::DepthFirst,
            fathoming: true,
            seed: 0,
        }
    }
}

impl BnbConfig {
    pub fn validate(&self) -> Result<()> {
        self.root.validate()?;
        self.node.validate()?;
        self.leaf.validate()?;
        if self.max_nodes == Some(0) {
            return usage("max_nodes must be at least 1");
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Number of non-root nodes of the full tree over `bounds`, saturating.
pub fn tree_size(bounds: &[(i64, i64)]) -> u128 {
    let mut width = 1u128;
    let mut total = 0u128;
    for &(lo, hi) in bounds.iter().filter(|(lo, hi)| lo < hi) {
        width = width.saturating_mul((hi - lo + 1) as u128);
        total = total.saturating_add(width);
    }
    total
}

/// Default node budget: the whole tree when it has at most
/// [`DEFAULT_NODE_CAP`] nodes, else the cap.
pub fn default_max_nodes(problem: &ProblemSpec) -> usize {
    tree_size(&problem.integer_box()).min(DEFAULT_NODE_CAP as u128) as usize
}

/// Which NSGA-II instance bounds a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundLevel {
    Root,
    Node,
    Leaf,
}

/// Splits `node` on its first free integer variable, one child per value.
pub fn branch(node: &Node) -> Result<Vec<Node>> {
    let Some(j) = (0..node.lower.len()).find(|&j| node.lower[j] < node.upper[j]) else {
        return usage("cannot branch a leaf node");
    };
    if !matches!(node.status, NodeStatus::Open | NodeStatus::Solved) {
        return usage(format!(
            "cannot branch a node with status {:?}",
            node.status
        ));
    }
    Ok((node.lower[j]..=node.upper[j])
        .map(|v| {
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            lower[j] = v;
            upper[j] = v;
            Node::with_box(lower, upper)
        })
        .collect())
}

/// Bounds `node` with the NSGA-II instance for `level`.
///
/// Sets `local_archive`, `local_ideal` and the status: infeasible when no
/// feasible point was found, otherwise left open/leaf for the caller.
pub fn bound(
    mut node: Node,
    problem: &ProblemSpec,
    cfg: &BnbConfig,
    level: BoundLevel,
    seed: u64,
) -> Result<Node> {
    let nsga = match level {
        BoundLevel::Root => &cfg.root,
        BoundLevel::Node => &cfg.node,
        BoundLevel::Leaf => &cfg.leaf,
    }
    .clone()
    .with_seed(seed);
    let outcome = run_nsga2(problem, Some(&node.integer_box()), &nsga)?;
    node.local_ideal = if outcome.archive.is_empty() {
        None
    } else {
        Some(ideal_point(
            outcome.archive.members.iter().map(|s| &s.objectives),
        )?)
    };
    node.local_archive = outcome.archive;
    node.generations = outcome.generations;
    if !outcome.feasible {
        node.status = NodeStatus::Infeasible;
    }
    Ok(node)
}

/// Keep a node unless an incumbent member dominates its ideal point.
pub fn should_retain(node_ideal: &[f64], incumbent: &ParetoArchive) -> bool {
    !incumbent.dominates_point(node_ideal)
}

/// Tree statistics of one solve.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BnbStats {
    /// Root plus every materialized child.
    pub nodes_created: usize,
    /// Bounded and discarded (dominated ideal point or infeasible).
    pub nodes_fathomed: usize,
    /// The infeasible subset of `nodes_fathomed`.
    pub nodes_infeasible: usize,
    /// Internal nodes kept for branching, root included.
    pub nodes_branched: usize,
    /// Leaves bounded and merged into the incumbent.
    pub leaves_solved: usize,
    /// Materialized children never bounded because the budget ran out.
    pub nodes_unprocessed: usize,
    /// Child nodes bounded (the budgeted counter).
    pub nodes_processed: usize,
    pub nsga_calls: usize,
    /// `(population_size, generations)` of every NSGA-II call, in order.
    pub call_sizes: Vec<(usize, usize)>,
    pub evaluations: u64,
    /// The node budget stopped the search with open nodes left.
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct BnbOutcome {
    pub archive: ParetoArchive,
    /// The incumbent right after bounding the root.
    pub root_archive: ParetoArchive,
    pub stats: BnbStats,
}

/// Seed of the `index`-th NSGA-II call of a solve (splitmix64 finalizer).
pub fn call_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct OpenEntry {
    node: Node,
    pending: Option<VecDeque<Node>>,
}

/// Runs the branch-and-bound main loop and returns the incumbent archive.
pub fn solve(problem: &ProblemSpec, cfg: &BnbConfig) -> Result<BnbOutcome> {
    cfg.validate()?;
    let max_nodes = cfg.max_nodes.unwrap_or_else(|| default_max_nodes(problem));
    let mut stats = BnbStats::default();
    let mut incumbent = ParetoArchive::new();

    let mut next_seed = {
        let mut calls = 0u64;
        move || {
            calls += 1;
            call_seed(cfg.seed, calls - 1)
        }
    };

    let mut root = bound(
        Node::root(problem),
        problem,
        cfg,
        BoundLevel::Root,
        next_seed(),
    )?;
    stats.nodes_created = 1;
    stats.nsga_calls = 1;
    stats
        .call_sizes
        .push((cfg.root.population_size, root.generations));
    stats.evaluations = root.local_archive.evaluation_count;
    if root.status != NodeStatus::Infeasible {
        incumbent.merge(root.local_archive.members.iter().cloned(), 0);
    }
    let root_archive = ParetoArchive {
        members: incumbent.members.clone(),
        evaluation_count: stats.evaluations,
    };

    let mut open: VecDeque<OpenEntry> = VecDeque::new();
    if root.is_leaf() {
        if root.status == NodeStatus::Infeasible {
            stats.nodes_fathomed += 1;
            stats.nodes_infeasible += 1;
        } else {
            root.status = NodeStatus::Solved;
            stats.leaves_solved += 1;
        }
    } else {
        // The root is branched even when its run found nothing feasible.
        root.status = NodeStatus::Open;
        stats.nodes_branched += 1;
        open.push_back(OpenEntry {
            node: root,
            pending: None,
        });
    }

    while !open.is_empty() {
        if stats.nodes_processed >= max_nodes {
            stats.truncated = true;
            break;
        }
        let idx = match cfg.node_selection {
            NodeSelection::DepthFirst => open.len() - 1,
            NodeSelection::BreadthFirst => 0,
        };
        let entry = &mut open[idx];
        if entry.pending.is_none() {
            let children = branch(&entry.node)?;
            stats.nodes_created += children.len();
            entry.pending = Some(children.into());
        }
        let pending = entry.pending.as_mut().expect("materialized above");
        let child = pending.pop_front().expect("exhausted entries are removed");
        if pending.is_empty() {
            open.remove(idx);
        }

        let level = if child.is_leaf() {
            BoundLevel::Leaf
        } else {
            BoundLevel::Node
        };
        let mut child = bound(child, problem, cfg, level, next_seed())?;
        stats.nodes_processed += 1;
        stats.nsga_calls += 1;
        let nsga = match level {
            BoundLevel::Leaf => &cfg.leaf,
            _ => &cfg.node,
        };
        stats
            .call_sizes
            .push((nsga.population_size, child.generations));
        stats.evaluations += child.local_archive.evaluation_count;

        if child.status == NodeStatus::Infeasible {
            stats.nodes_fathomed += 1;
            stats.nodes_infeasible += 1;
            continue;
        }
        let ideal = child
            .local_ideal
            .as_ref()
            .expect("feasible nodes have an ideal point");
        if cfg.fathoming && !should_retain(ideal, &incumbent) {
            child.status = NodeStatus::Fathomed;
            stats.nodes_fathomed += 1;
            continue;
        }
        incumbent.merge(child.local_archive.members.iter().cloned(), 0);
        if child.is_leaf() {
            child.status = NodeStatus::Solved;
            stats.leaves_solved += 1;
        } else {
            stats.nodes_branched += 1;
            open.push_back(OpenEntry {
                node: child,
                pending: None,
            });
        }
    }

    stats.nodes_unprocessed = open
        .iter()
        .filter_map(|e| e.pending.as_ref())
        .map(VecDeque::len)
        .sum();
    incumbent.evaluation_count = stats.evaluations;
    Ok(BnbOutcome {
        archive: incumbent,
        root_archive,
        stats,
    })
}
