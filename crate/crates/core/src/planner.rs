//! A* over experienced transitions in latent space.
//!
//! A state can take the action of any triplet whose pre latent is the same
//! state at the current abstraction level, and lands on that triplet's post
//! latent. The goal is reached once a state is the same as the goal latent at
//! that level. Search starts at level 1 and climbs the ladder until a plan
//! turns up or the levels run out.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::abstraction::{within, ThresholdTable};
use crate::error::{Error, Result};
use crate::memory::TripletStore;
use crate::perception::Latent;
use crate::sim::{PushAction, ACTION_TIMESTEPS};

/// Deepest plan that fits in the remaining trial time.
pub fn compute_max_depth(remaining_timesteps: u64) -> usize {
    (remaining_timesteps / ACTION_TIMESTEPS) as usize
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Heuristic {
    /// Sum of absolute latent differences to the goal.
    #[default]
    Manhattan,
    /// Plain uniform-cost search.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannerConfig {
    pub heuristic: Heuristic,
    /// Levels skipped between attempts; the top level is always tried.
    pub level_stride: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            heuristic: Heuristic::Manhattan,
            level_stride: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub actions: Vec<PushAction>,
    /// Store index of the triplet behind each action.
    pub triplets: Vec<usize>,
    pub level: usize,
    /// Latent states visited, starting with the current one.
    pub predicted_states: Vec<Latent>,
    pub nodes_expanded: usize,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Pre latents grouped by exact value and sorted on the first coordinate,
/// so successor queries are a range scan.
struct PreIndex {
    keys: Vec<f64>,
    groups: Vec<(Latent, Vec<usize>)>,
}

impl PreIndex {
    fn new(store: &TripletStore) -> Self {
        let mut by_key: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut groups: Vec<(Latent, Vec<usize>)> = Vec::new();
        for (i, t) in store.triplets().iter().enumerate() {
            let (pre, _) = t.latents();
            match by_key.get(&pre.key()) {
                Some(&g) => groups[g].1.push(i),
                None => {
                    by_key.insert(pre.key(), groups.len());
                    groups.push((pre.clone(), vec![i]));
                }
            }
        }
        groups.sort_by(|a, b| first(&a.0).total_cmp(&first(&b.0)));
        let keys = groups.iter().map(|g| first(&g.0)).collect();
        Self { keys, groups }
    }

    fn query(&self, state: &Latent, thresholds: &[f64], out: &mut Vec<usize>) {
        out.clear();
        // widened a little so rounding in the bounds never drops a candidate;
        // `within` makes the exact decision
        let slack = 1e-9 * (1.0 + first(state).abs() + thresholds[0]);
        let (lo, hi) = (
            first(state) - thresholds[0] - slack,
            first(state) + thresholds[0] + slack,
        );
        let start = self.keys.partition_point(|k| *k < lo);
        for (key, (pre, members)) in self.keys[start..].iter().zip(&self.groups[start..]) {
            if *key > hi {
                break;
            }
            if within(state, pre, thresholds) {
                out.extend_from_slice(members);
            }
        }
        out.sort_unstable();
    }
}

fn first(l: &Latent) -> f64 {
    l.values().first().copied().unwrap_or(0.0) as f64
}

#[derive(Clone, Copy)]
struct OpenEntry {
    f: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // reversed: BinaryHeap is a max-heap, we want the smallest f, then the oldest entry
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Node<'s> {
    state: &'s Latent,
    depth: usize,
    parent: Option<usize>,
    triplet: Option<usize>,
}

/// Planner over an encoded store. Build once, query many times.
pub struct Planner {
    store: Arc<TripletStore>,
    table: Arc<ThresholdTable>,
    index: PreIndex,
    config: PlannerConfig,
}

impl Planner {
    pub fn new(store: Arc<TripletStore>, table: Arc<ThresholdTable>, config: PlannerConfig) -> Result<Self> {
        if !store.is_encoded() {
            return Err(Error::Phase("planner needs an encoded store".into()));
        }
        if store.latent_dim() != Some(table.latent_dim()) {
            return Err(Error::dims(
                format!("latent dim {}", table.latent_dim()),
                format!("store latent dim {:?}", store.latent_dim()),
            ));
        }
        if config.level_stride == 0 {
            return Err(Error::config("level stride must be at least 1"));
        }
        Ok(Self {
            index: PreIndex::new(&store),
            store,
            table,
            config,
        })
    }

    pub fn table(&self) -> &ThresholdTable {
        &self.table
    }

    pub fn store(&self) -> &TripletStore {
        &self.store
    }

    fn check_latent(&self, l: &Latent) -> Result<()> {
        if l.len() != self.table.latent_dim() {
            return Err(Error::dims(self.table.latent_dim(), l.len()));
        }
        Ok(())
    }

    /// Triplets applicable in `state` at `level`, as `(triplet index, action,
    /// post latent)` in store order.
    pub fn successors(&self, state: &Latent, level: usize) -> Result<Vec<(usize, &PushAction, &Latent)>> {
        self.check_latent(state)?;
        let row = self.table.row(level)?;
        let mut idx = Vec::new();
        self.index.query(state, row, &mut idx);
        let triplets = self.store.triplets();
        Ok(idx
            .into_iter()
            .map(|i| (i, &triplets[i].action, triplets[i].latents().1))
            .collect())
    }

    /// Depth-limited A* at a single abstraction level.
    pub fn search_level(&self, current: &Latent, goal: &Latent, level: usize, max_depth: usize) -> Result<Option<Plan>> {
        self.check_latent(current)?;
        self.check_latent(goal)?;
        self.table.row(level)?;
        Ok(self.astar(current, goal, level, max_depth).0)
    }

    /// Returns the plan, if any, and the number of nodes expanded.
    fn astar(&self, current: &Latent, goal: &Latent, level: usize, max_depth: usize) -> (Option<Plan>, usize) {
        let row = self.table.row_unchecked(level);
        let triplets = self.store.triplets();
        let h = |x: &Latent| match self.config.heuristic {
            Heuristic::Manhattan => x.manhattan(goal),
            Heuristic::Zero => 0.0,
        };

        let mut nodes = vec![Node {
            state: current,
            depth: 0,
            parent: None,
            triplet: None,
        }];
        let mut best_depth: HashMap<Vec<u32>, usize> = HashMap::new();
        best_depth.insert(current.key(), 0);
        let mut open = BinaryHeap::new();
        let mut seq = 0u64;
        open.push(OpenEntry {
            f: h(current),
            seq,
            node: 0,
        });
        let mut expanded = 0;
        let mut succ = Vec::new();

        while let Some(OpenEntry { node, .. }) = open.pop() {
            let (state, depth) = (nodes[node].state, nodes[node].depth);
            if best_depth.get(&state.key()).is_some_and(|&d| d < depth) {
                continue;
            }
            if within(state, goal, row) {
                return (Some(self.reconstruct(&nodes, node, level, expanded)), expanded);
            }
            if depth >= max_depth {
                continue;
            }
            expanded += 1;
            self.index.query(state, row, &mut succ);
            for &t in &succ {
                let post = triplets[t].latents().1;
                let g = depth + 1;
                let key = post.key();
                if best_depth.get(&key).is_some_and(|&d| d <= g) {
                    continue;
                }
                best_depth.insert(key, g);
                nodes.push(Node {
                    state: post,
                    depth: g,
                    parent: Some(node),
                    triplet: Some(t),
                });
                seq += 1;
                open.push(OpenEntry {
                    f: g as f64 + h(post),
                    seq,
                    node: nodes.len() - 1,
                });
            }
        }
        (None, expanded)
    }

    fn reconstruct(&self, nodes: &[Node], mut node: usize, level: usize, expanded: usize) -> Plan {
        let mut chain = Vec::new();
        let mut states = vec![nodes[node].state.clone()];
        while let (Some(parent), Some(t)) = (nodes[node].parent, nodes[node].triplet) {
            chain.push(t);
            node = parent;
            states.push(nodes[node].state.clone());
        }
        chain.reverse();
        states.reverse();
        Plan {
            actions: chain
                .iter()
                .map(|&t| self.store.triplets()[t].action.clone())
                .collect(),
            triplets: chain,
            level,
            predicted_states: states,
            nodes_expanded: expanded,
        }
    }

    /// Climbs the abstraction ladder from level 1 and returns the first plan
    /// found, or `None` when no level yields one.
    pub fn plan(&self, current: &Latent, goal: &Latent, max_depth: usize) -> Result<Option<Plan>> {
        self.check_latent(current)?;
        self.check_latent(goal)?;
        let levels = self.table.levels();
        let mut ladder: Vec<usize> = (1..=levels).step_by(self.config.level_stride).collect();
        if ladder.last() != Some(&levels) {
            ladder.push(levels);
        }
        let mut previous: Option<&[f64]> = None;
        let mut expanded = 0;
        for level in ladder {
            let row = self.table.row_unchecked(level);
            // an identical threshold row repeats the failed search exactly
            if previous == Some(row) {
                continue;
            }
            let (found, n) = self.astar(current, goal, level, max_depth);
            expanded += n;
            if let Some(mut plan) = found {
                plan.nodes_expanded = expanded;
                return Ok(Some(plan));
            }
            previous = Some(row);
        }
        Ok(None)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelDiagnostics {
    pub level: usize,
    /// Mean successor count over the sample states.
    pub branching: f64,
    /// Experienced latents that remain distinct under greedy first-fit merging.
    pub distinct_states: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchDiagnostics {
    pub levels: Vec<LevelDiagnostics>,
}

impl SearchDiagnostics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,branching,distinct_states\n");
        for l in &self.levels {
            writeln!(out, "{},{},{}", l.level, l.branching, l.distinct_states).unwrap();
        }
        out
    }
}

/// Per-level branching factor and distinct-state count.
pub fn diagnostics(planner: &Planner, samples: &[Latent]) -> Result<SearchDiagnostics> {
    let (store, table) = (planner.store(), planner.table());
    for s in samples {
        planner.check_latent(s)?;
    }

    // exact repeats never open a new class under first-fit, so drop them up front
    let mut seen: HashMap<Vec<u32>, ()> = HashMap::new();
    let mut experienced: Vec<&Latent> = Vec::new();
    for t in store.triplets() {
        let (pre, post) = t.latents();
        for l in [pre, post] {
            if seen.insert(l.key(), ()).is_none() {
                experienced.push(l);
            }
        }
    }

    let mut levels = Vec::with_capacity(table.levels());
    let mut succ = Vec::new();
    let mut previous: Option<(&[f64], f64, usize)> = None;
    for level in 1..=table.levels() {
        let row = table.row_unchecked(level);
        let (branching, distinct_states) = match previous {
            Some((prev, b, d)) if prev == row => (b, d),
            _ => {
                let total: usize = samples
                    .iter()
                    .map(|s| {
                        planner.index.query(s, row, &mut succ);
                        succ.len()
                    })
                    .sum();
                let branching = if samples.is_empty() {
                    0.0
                } else {
                    total as f64 / samples.len() as f64
                };
                let mut reps: Vec<&Latent> = Vec::new();
                for l in &experienced {
                    if !reps.iter().any(|r| within(l, r, row)) {
                        reps.push(l);
                    }
                }
                (branching, reps.len())
            }
        };
        previous = Some((row, branching, distinct_states));
        levels.push(LevelDiagnostics {
            level,
            branching,
            distinct_states,
        });
    }
    Ok(SearchDiagnostics { levels })
}
