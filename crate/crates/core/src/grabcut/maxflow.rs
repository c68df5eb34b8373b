//! Boykov-Kolmogorov augmenting-path max-flow for sparse graphs with
//! terminal links, as used by graph-cut segmentation.
//!
//! Two search trees grow from the source and the sink; when they touch, the
//! path is augmented and the nodes that lost their parent arc are re-adopted
//! or freed. After `max_flow` returns, a node is on the source side of the
//! minimum cut iff it belongs to the source tree; free nodes (including nodes
//! with no links at all) are reported on the sink side.

use std::collections::VecDeque;

const NONE: usize = usize::MAX;
const INFINITE_DIST: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Parent {
    Free,
    Terminal,
    Orphan,
    Arc(usize),
}

#[derive(Clone, Debug)]
struct Node {
    first: usize,
    parent: Parent,
    in_sink_tree: bool,
    /// Residual terminal capacity: > 0 towards the source, < 0 towards the sink.
    tr_cap: f64,
    timestamp: u64,
    dist: u32,
    queued: bool,
}

/// A capacitated graph with implicit source and sink terminals.
#[derive(Clone, Debug)]
pub struct FlowGraph {
    nodes: Vec<Node>,
    // arcs come in sister pairs: `a ^ 1` is the reverse of `a`
    head: Vec<usize>,
    next: Vec<usize>,
    r_cap: Vec<f64>,
    flow: f64,
    active: VecDeque<usize>,
    orphans: VecDeque<usize>,
    time: u64,
}

impl FlowGraph {
    pub fn new(node_count: usize) -> Self {
        FlowGraph {
            nodes: vec![
                Node {
                    first: NONE,
                    parent: Parent::Free,
                    in_sink_tree: false,
                    tr_cap: 0.0,
                    timestamp: 0,
                    dist: 0,
                    queued: false,
                };
                node_count
            ],
            head: Vec::new(),
            next: Vec::new(),
            r_cap: Vec::new(),
            flow: 0.0,
            active: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
        }
    }

    pub fn with_edge_capacity(node_count: usize, edges: usize) -> Self {
        let mut g = Self::new(node_count);
        g.head.reserve(2 * edges);
        g.next.reserve(2 * edges);
        g.r_cap.reserve(2 * edges);
        g
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds capacity `source_cap` on source->node and `sink_cap` on node->sink.
    /// Repeated calls accumulate.
    pub fn add_terminal(&mut self, node: usize, source_cap: f64, sink_cap: f64) {
        debug_assert!(source_cap >= 0.0 && sink_cap >= 0.0);
        let mut cs = source_cap;
        let mut ct = sink_cap;
        let delta = self.nodes[node].tr_cap;
        if delta > 0.0 {
            cs += delta;
        } else {
            ct -= delta;
        }
        self.flow += cs.min(ct);
        self.nodes[node].tr_cap = cs - ct;
    }

    /// Adds arc `from -> to` with capacity `cap` and `to -> from` with `rev_cap`.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64, rev_cap: f64) {
        debug_assert!(from != to && cap >= 0.0 && rev_cap >= 0.0);
        let a = self.head.len();
        self.head.push(to);
        self.next.push(self.nodes[from].first);
        self.r_cap.push(cap);
        self.nodes[from].first = a;
        self.head.push(from);
        self.next.push(self.nodes[to].first);
        self.r_cap.push(rev_cap);
        self.nodes[to].first = a + 1;
    }

    fn arcs(&self, node: usize) -> ArcIter<'_> {
        ArcIter {
            next: &self.next,
            current: self.nodes[node].first,
        }
    }

    fn set_active(&mut self, i: usize) {
        if !self.nodes[i].queued {
            self.nodes[i].queued = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.active.pop_front() {
            self.nodes[i].queued = false;
            if self.nodes[i].parent != Parent::Free {
                return Some(i);
            }
        }
        None
    }

    /// Runs to completion and returns the total flow (equal to the min-cut capacity).
    pub fn max_flow(&mut self) -> f64 {
        self.init_trees();
        while let Some(i) = self.next_active() {
            if let Some(middle) = self.grow(i) {
                // keep expanding from the same node after the augmentation
                self.nodes[i].queued = true;
                self.active.push_front(i);
                self.time += 1;
                self.augment(middle);
                self.adopt_orphans();
            }
        }
        self.flow
    }

    fn init_trees(&mut self) {
        self.active.clear();
        self.orphans.clear();
        self.time = 0;
        for i in 0..self.nodes.len() {
            let n = &mut self.nodes[i];
            n.queued = false;
            n.timestamp = 0;
            if n.tr_cap != 0.0 {
                n.in_sink_tree = n.tr_cap < 0.0;
                n.parent = Parent::Terminal;
                n.dist = 1;
                self.set_active(i);
            } else {
                n.parent = Parent::Free;
            }
        }
    }

    /// Expands the tree of `i`; returns the source-to-sink arc joining the trees, if found.
    fn grow(&mut self, i: usize) -> Option<usize> {
        let sink_tree = self.nodes[i].in_sink_tree;
        let mut a = self.nodes[i].first;
        while a != NONE {
            // residual capacity in the direction the tree grows
            let cap = if sink_tree { self.r_cap[a ^ 1] } else { self.r_cap[a] };
            if cap > 0.0 {
                let j = self.head[a];
                if self.nodes[j].parent == Parent::Free {
                    let (ts, dist) = (self.nodes[i].timestamp, self.nodes[i].dist);
                    let nj = &mut self.nodes[j];
                    nj.in_sink_tree = sink_tree;
                    nj.parent = Parent::Arc(a ^ 1);
                    nj.timestamp = ts;
                    nj.dist = dist + 1;
                    self.set_active(j);
                } else if self.nodes[j].in_sink_tree != sink_tree {
                    return Some(if sink_tree { a ^ 1 } else { a });
                } else if self.nodes[j].timestamp <= self.nodes[i].timestamp && self.nodes[j].dist > self.nodes[i].dist
                {
                    // shorter path to the terminal through i
                    let (ts, dist) = (self.nodes[i].timestamp, self.nodes[i].dist);
                    let nj = &mut self.nodes[j];
                    nj.parent = Parent::Arc(a ^ 1);
                    nj.timestamp = ts;
                    nj.dist = dist + 1;
                }
            }
            a = self.next[a];
        }
        None
    }

    fn parent_arc(&self, i: usize) -> Option<usize> {
        match self.nodes[i].parent {
            Parent::Arc(a) => Some(a),
            _ => None,
        }
    }

    fn make_orphan(&mut self, i: usize) {
        self.nodes[i].parent = Parent::Orphan;
        self.orphans.push_back(i);
    }

    fn augment(&mut self, middle: usize) {
        let mut bottleneck = self.r_cap[middle];
        // source side: flow runs parent -> child along sister(parent arc)
        let mut i = self.head[middle ^ 1];
        while let Some(a) = self.parent_arc(i) {
            bottleneck = bottleneck.min(self.r_cap[a ^ 1]);
            i = self.head[a];
        }
        bottleneck = bottleneck.min(self.nodes[i].tr_cap);
        // sink side: flow runs child -> parent along the parent arc
        let mut i = self.head[middle];
        while let Some(a) = self.parent_arc(i) {
            bottleneck = bottleneck.min(self.r_cap[a]);
            i = self.head[a];
        }
        bottleneck = bottleneck.min(-self.nodes[i].tr_cap);

        self.r_cap[middle ^ 1] += bottleneck;
        self.r_cap[middle] -= bottleneck;

        let mut i = self.head[middle ^ 1];
        while let Some(a) = self.parent_arc(i) {
            self.r_cap[a] += bottleneck;
            self.r_cap[a ^ 1] -= bottleneck;
            if self.r_cap[a ^ 1] <= 0.0 {
                self.r_cap[a ^ 1] = 0.0;
                self.make_orphan(i);
            }
            i = self.head[a];
        }
        self.nodes[i].tr_cap -= bottleneck;
        if self.nodes[i].tr_cap <= 0.0 {
            self.nodes[i].tr_cap = 0.0;
            self.make_orphan(i);
        }

        let mut i = self.head[middle];
        while let Some(a) = self.parent_arc(i) {
            self.r_cap[a ^ 1] += bottleneck;
            self.r_cap[a] -= bottleneck;
            if self.r_cap[a] <= 0.0 {
                self.r_cap[a] = 0.0;
                self.make_orphan(i);
            }
            i = self.head[a];
        }
        self.nodes[i].tr_cap += bottleneck;
        if self.nodes[i].tr_cap >= 0.0 {
            self.nodes[i].tr_cap = 0.0;
            self.make_orphan(i);
        }

        self.flow += bottleneck;
    }

    fn adopt_orphans(&mut self) {
        while let Some(i) = self.orphans.pop_front() {
            self.process_orphan(i);
        }
    }

    /// Distance from `j` to its terminal, or `INFINITE_DIST` if `j` hangs off an orphan.
    fn origin_distance(&mut self, mut j: usize) -> u32 {
        let mut d: u32 = 0;
        loop {
            if self.nodes[j].timestamp == self.time {
                return d + self.nodes[j].dist;
            }
            d += 1;
            match self.nodes[j].parent {
                Parent::Terminal => {
                    self.nodes[j].timestamp = self.time;
                    self.nodes[j].dist = 1;
                    return d;
                }
                Parent::Orphan | Parent::Free => return INFINITE_DIST,
                Parent::Arc(a) => j = self.head[a],
            }
        }
    }

    fn process_orphan(&mut self, i: usize) {
        let sink_tree = self.nodes[i].in_sink_tree;
        let mut best_arc = NONE;
        let mut best_dist = INFINITE_DIST;

        let arcs: Vec<usize> = self.arcs(i).collect();
        for &a in &arcs {
            // a valid parent must be able to push flow along the tree direction
            let cap = if sink_tree { self.r_cap[a] } else { self.r_cap[a ^ 1] };
            if cap <= 0.0 {
                continue;
            }
            let j = self.head[a];
            if self.nodes[j].in_sink_tree != sink_tree || self.nodes[j].parent == Parent::Free {
                continue;
            }
            let d = self.origin_distance(j);
            if d == INFINITE_DIST {
                continue;
            }
            if d < best_dist {
                best_arc = a;
                best_dist = d;
            }
            // cache distances along the path
            let mut k = j;
            let mut dk = d;
            while self.nodes[k].timestamp != self.time {
                self.nodes[k].timestamp = self.time;
                self.nodes[k].dist = dk;
                dk -= 1;
                k = self.head[self.parent_arc(k).expect("path to terminal")];
            }
        }

        if best_arc != NONE {
            let n = &mut self.nodes[i];
            n.parent = Parent::Arc(best_arc);
            n.timestamp = self.time;
            n.dist = best_dist + 1;
            return;
        }

        self.nodes[i].parent = Parent::Free;
        for &a in &arcs {
            let j = self.head[a];
            if self.nodes[j].in_sink_tree != sink_tree || self.nodes[j].parent == Parent::Free {
                continue;
            }
            let cap = if sink_tree { self.r_cap[a] } else { self.r_cap[a ^ 1] };
            if cap > 0.0 {
                self.set_active(j);
            }
            if let Parent::Arc(pa) = self.nodes[j].parent {
                if self.head[pa] == i {
                    self.make_orphan(j);
                }
            }
        }
    }

    /// Which side of the minimum cut `node` is on. Valid after [`max_flow`](Self::max_flow).
    pub fn is_source_side(&self, node: usize) -> bool {
        let n = &self.nodes[node];
        n.parent != Parent::Free && !n.in_sink_tree
    }
}

struct ArcIter<'a> {
    next: &'a [usize],
    current: usize,
}

impl Iterator for ArcIter<'_> {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.current == NONE {
            return None;
        }
        let a = self.current;
        self.current = self.next[a];
        Some(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Test oracle: a random graph kept as plain capacity lists.
    struct RandomGraph {
        n: usize,
        source: Vec<f64>,
        sink: Vec<f64>,
        edges: Vec<(usize, usize, f64)>,
    }

    impl RandomGraph {
        fn build(&self, order: &[usize]) -> FlowGraph {
            let mut g = FlowGraph::new(self.n);
            for (i, &node) in order.iter().enumerate().take(self.n) {
                g.add_terminal(node, self.source[i], self.sink[i]);
            }
            for &(u, v, c) in &self.edges {
                g.add_edge(order[u], order[v], c, 0.0);
            }
            g
        }

        fn cut_value(&self, source_side: &dyn Fn(usize) -> bool) -> f64 {
            let mut total = 0.0;
            for i in 0..self.n {
                if source_side(i) {
                    total += self.sink[i];
                } else {
                    total += self.source[i];
                }
            }
            for &(u, v, c) in &self.edges {
                if source_side(u) && !source_side(v) {
                    total += c;
                }
            }
            total
        }

        fn brute_force_min_cut(&self) -> f64 {
            (0u32..1 << self.n)
                .map(|set| self.cut_value(&|i| set >> i & 1 == 1))
                .fold(f64::INFINITY, f64::min)
        }
    }

    fn random_graph(rng: &mut ChaCha8Rng) -> RandomGraph {
        let n = rng.random_range(1..=12);
        let mut source = vec![0.0; n];
        let mut sink = vec![0.0; n];
        for i in 0..n {
            if rng.random_bool(0.5) {
                source[i] = rng.random_range(0..10) as f64;
            }
            if rng.random_bool(0.5) {
                sink[i] = rng.random_range(0..10) as f64;
            }
        }
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random_bool(0.3) {
                    edges.push((u, v, rng.random_range(1..10) as f64));
                }
            }
        }
        RandomGraph { n, source, sink, edges }
    }

    #[test]
    fn chain_source_heavy() {
        let mut g = FlowGraph::new(1);
        g.add_terminal(0, 3.0, 2.0);
        assert_eq!(g.max_flow(), 2.0);
        assert!(g.is_source_side(0));
    }

    #[test]
    fn chain_sink_heavy() {
        let mut g = FlowGraph::new(1);
        g.add_terminal(0, 2.0, 3.0);
        assert_eq!(g.max_flow(), 2.0);
        assert!(!g.is_source_side(0));
    }

    #[test]
    fn isolated_node_on_sink_side() {
        let mut g = FlowGraph::new(3);
        g.add_terminal(0, 5.0, 0.0);
        g.add_edge(0, 1, 1.0, 0.0);
        g.add_terminal(1, 0.0, 4.0);
        assert_eq!(g.max_flow(), 1.0);
        assert!(!g.is_source_side(2));
    }

    #[test]
    fn classic_diamond() {
        // s->a 3, s->b 2, a->b 1, a->t 2, b->t 3  => max flow 5
        let mut g = FlowGraph::new(2);
        g.add_terminal(0, 3.0, 2.0);
        g.add_terminal(1, 2.0, 3.0);
        g.add_edge(0, 1, 1.0, 0.0);
        assert_eq!(g.max_flow(), 5.0);
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let rg = random_graph(&mut rng);
            let identity: Vec<usize> = (0..rg.n).collect();
            let mut g = rg.build(&identity);
            let flow = g.max_flow();
            let expected = rg.brute_force_min_cut();
            assert!((flow - expected).abs() < 1e-9, "flow {flow} vs cut {expected}");
            // the reported partition is itself a minimum cut
            let cut = rg.cut_value(&|i| g.is_source_side(i));
            assert!((cut - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn flow_invariant_under_node_permutation() {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rg = random_graph(&mut rng);
            let identity: Vec<usize> = (0..rg.n).collect();
            let mut shuffled = identity.clone();
            shuffled.shuffle(&mut rng);
            let a = rg.build(&identity).max_flow();
            let b = rg.build(&shuffled).max_flow();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_graph_against_brute_force() {
        // 3x4 grid with random unary and pairwise terms
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let (h, w) = (3, 4);
            let n = h * w;
            let mut rg = RandomGraph {
                n,
                source: vec![0.0; n],
                sink: vec![0.0; n],
                edges: vec![],
            };
            for i in 0..n {
                rg.source[i] = rng.random_range(0.0..5.0);
                rg.sink[i] = rng.random_range(0.0..5.0);
            }
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    for j in [(x + 1 < w).then(|| i + 1), (y + 1 < h).then(|| i + w)]
                        .into_iter()
                        .flatten()
                    {
                        let c = rng.random_range(0.0..3.0);
                        rg.edges.push((i, j, c));
                        rg.edges.push((j, i, c));
                    }
                }
            }
            let identity: Vec<usize> = (0..n).collect();
            let flow = rg.build(&identity).max_flow();
            assert!((flow - rg.brute_force_min_cut()).abs() < 1e-9);
        }
    }
}
