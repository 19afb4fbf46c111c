//! The work-assignment network and the max-flow machinery on top of it.
//!
//! Node layout is fixed: `0` is the source, `1..=n` are job nodes, the next
//! `L'` nodes are the intervals that still have processors, and the last node
//! is the sink. Arcs are stored source arcs first (job order), then job to
//! interval arcs (job order, then interval order), then interval to sink arcs.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::{IntervalGrid, Job, SolverConfig};

/// Residual amounts below `DUST * max(1, capacity)` are treated as zero by the
/// augmenting phase. Kept well under any user-facing flow tolerance.
const DUST: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Source,
    /// Instance job index.
    Job(usize),
    /// Grid interval index.
    Interval(usize),
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
}

#[derive(Debug, Clone)]
struct Csr {
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl Csr {
    fn build(nodes: usize, arcs: &[Arc], key: impl Fn(&Arc) -> usize) -> Self {
        let mut offsets = vec![0usize; nodes + 1];
        for a in arcs {
            offsets[key(a) + 1] += 1;
        }
        for i in 0..nodes {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut items = vec![0usize; arcs.len()];
        for (idx, a) in arcs.iter().enumerate() {
            let k = key(a);
            items[fill[k]] = idx;
            fill[k] += 1;
        }
        Csr { offsets, items }
    }

    fn of(&self, node: usize) -> &[usize] {
        &self.items[self.offsets[node]..self.offsets[node + 1]]
    }
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    /// Common speed the network was built for; `None` for per-job demands.
    pub speed: Option<f64>,
    /// Job index for each job node, ascending.
    pub jobs: Vec<usize>,
    /// Grid interval index for each interval node, ascending.
    pub intervals: Vec<usize>,
    pub arcs: Vec<Arc>,
    middle_start: usize,
    sink_start: usize,
    out_arcs: Csr,
    in_arcs: Csr,
}

impl FlowNetwork {
    pub fn node_count(&self) -> usize {
        self.jobs.len() + self.intervals.len() + 2
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.node_count() - 1
    }

    pub fn job_node(&self, k: usize) -> usize {
        1 + k
    }

    pub fn interval_node(&self, k: usize) -> usize {
        1 + self.jobs.len() + k
    }

    pub fn node(&self, id: usize) -> Result<Node> {
        let n = self.jobs.len();
        let l = self.intervals.len();
        match id {
            0 => Ok(Node::Source),
            i if i <= n => Ok(Node::Job(self.jobs[i - 1])),
            i if i <= n + l => Ok(Node::Interval(self.intervals[i - 1 - n])),
            i if i == n + l + 1 => Ok(Node::Sink),
            i => Err(Error::UnknownNode(i)),
        }
    }

    pub fn node_of(&self, node: Node) -> Option<usize> {
        match node {
            Node::Source => Some(self.source()),
            Node::Sink => Some(self.sink()),
            Node::Job(i) => self.jobs.binary_search(&i).ok().map(|k| self.job_node(k)),
            Node::Interval(j) => self
                .intervals
                .binary_search(&j)
                .ok()
                .map(|k| self.interval_node(k)),
        }
    }

    pub fn source_arcs(&self) -> std::ops::Range<usize> {
        0..self.middle_start
    }

    pub fn middle_arcs(&self) -> std::ops::Range<usize> {
        self.middle_start..self.sink_start
    }

    pub fn sink_arcs(&self) -> std::ops::Range<usize> {
        self.sink_start..self.arcs.len()
    }

    pub fn out_arcs(&self, node: usize) -> &[usize] {
        self.out_arcs.of(node)
    }

    pub fn in_arcs(&self, node: usize) -> &[usize] {
        self.in_arcs.of(node)
    }

    /// Total capacity of the source arcs.
    pub fn demand(&self) -> f64 {
        self.arcs[self.source_arcs()]
            .iter()
            .map(|a| a.capacity)
            .sum()
    }

    /// Capacity of the cut whose source side is `side`.
    pub fn cut_capacity(&self, side: &[bool]) -> f64 {
        self.arcs
            .iter()
            .filter(|a| side[a.from] && !side[a.to])
            .map(|a| a.capacity)
            .sum()
    }

    /// Builds the network for the active jobs of `grid` with explicit source
    /// capacities (`demands[k]` for `grid.jobs[k]`). Intervals without
    /// processors are left out.
    pub fn with_demands(grid: &IntervalGrid, jobs: &[Job], demands: &[f64]) -> Result<Self> {
        debug_assert_eq!(demands.len(), grid.jobs.len());
        let mut slot = vec![usize::MAX; grid.len()];
        let mut intervals = Vec::new();
        for (j, iv) in grid.intervals.iter().enumerate() {
            if iv.machines > 0 && iv.len() > 0.0 {
                slot[j] = intervals.len();
                intervals.push(j);
            }
        }
        let n = grid.jobs.len();
        let first_interval = 1 + n;
        let sink = first_interval + intervals.len();

        let mut arcs = Vec::with_capacity(n + intervals.len() * 2);
        for (k, &d) in demands.iter().enumerate() {
            arcs.push(Arc {
                from: 0,
                to: 1 + k,
                capacity: d,
            });
        }
        let middle_start = arcs.len();
        for (k, &i) in grid.jobs.iter().enumerate() {
            let before = arcs.len();
            for j in grid.span_range(&jobs[i]) {
                if slot[j] != usize::MAX {
                    arcs.push(Arc {
                        from: 1 + k,
                        to: first_interval + slot[j],
                        capacity: grid.intervals[j].len(),
                    });
                }
            }
            if arcs.len() == before {
                return Err(Error::InvariantViolation(format!(
                    "job `{}` has no interval with free processors",
                    jobs[i].id
                )));
            }
        }
        let sink_start = arcs.len();
        for (k, &j) in intervals.iter().enumerate() {
            let iv = &grid.intervals[j];
            arcs.push(Arc {
                from: first_interval + k,
                to: sink,
                capacity: iv.machines as f64 * iv.len(),
            });
        }

        let nodes = sink + 1;
        let out_arcs = Csr::build(nodes, &arcs, |a| a.from);
        let in_arcs = Csr::build(nodes, &arcs, |a| a.to);
        Ok(FlowNetwork {
            speed: None,
            jobs: grid.jobs.clone(),
            intervals,
            arcs,
            middle_start,
            sink_start,
            out_arcs,
            in_arcs,
        })
    }

    /// Maps middle-arc flows of `other` onto this network by (job, interval)
    /// key. Source and sink arcs are recomputed by [`repair_flow`].
    pub fn carry_flow(&self, other: &FlowNetwork, flows: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.arcs.len()];
        let key = |net: &FlowNetwork, a: usize| {
            let arc = net.arcs[a];
            (
                net.jobs[arc.from - 1],
                net.intervals[arc.to - 1 - net.jobs.len()],
            )
        };
        let mut theirs = other.middle_arcs().peekable();
        for a in self.middle_arcs() {
            let k = key(self, a);
            while let Some(&b) = theirs.peek() {
                let kb = key(other, b);
                if kb < k {
                    theirs.next();
                } else {
                    if kb == k {
                        out[a] = flows[b];
                    }
                    break;
                }
            }
        }
        out
    }
}

/// Builds the work-assignment network of `grid` at common speed `speed`.
pub fn build_wap_network(grid: &IntervalGrid, jobs: &[Job], speed: f64) -> Result<FlowNetwork> {
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(Error::NonPositiveSpeed(speed));
    }
    let demands: Vec<f64> = grid.jobs.iter().map(|&i| jobs[i].work / speed).collect();
    let mut net = FlowNetwork::with_demands(grid, jobs, &demands)?;
    net.speed = Some(speed);
    Ok(net)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub value: f64,
    pub arc_flows: Vec<f64>,
    pub saturated: Vec<bool>,
    /// Relative saturation tolerance.
    pub tolerance: f64,
    /// Extra absolute allowance added to every saturation test.
    pub slack: f64,
}

impl FlowResult {
    fn new(net: &FlowNetwork, arc_flows: Vec<f64>, tolerance: f64) -> Self {
        let value = net.source_arcs().map(|a| arc_flows[a]).sum();
        let mut res = FlowResult {
            value,
            arc_flows,
            saturated: Vec::new(),
            tolerance,
            slack: 0.0,
        };
        res.refresh_saturation(net);
        res
    }

    fn refresh_saturation(&mut self, net: &FlowNetwork) {
        self.saturated = net
            .arcs
            .iter()
            .zip(&self.arc_flows)
            .map(|(a, &f)| a.capacity - f <= self.threshold(a.capacity))
            .collect();
    }

    pub fn threshold(&self, capacity: f64) -> f64 {
        self.tolerance * capacity.max(1.0) + self.slack
    }

    /// Widens every saturation test by `slack` absolute units.
    pub fn with_slack(mut self, net: &FlowNetwork, slack: f64) -> Self {
        self.slack = slack.max(0.0);
        self.refresh_saturation(net);
        self
    }

    fn forward_open(&self, net: &FlowNetwork, a: usize) -> bool {
        !self.saturated[a] && net.arcs[a].capacity > 0.0
    }

    fn backward_open(&self, net: &FlowNetwork, a: usize) -> bool {
        self.arc_flows[a] > self.threshold(net.arcs[a].capacity)
    }
}

/// Clamps `flows` into a valid flow for `net`: middle arcs into their
/// capacities, then per-interval and per-job totals scaled down to fit.
pub fn repair_flow(net: &FlowNetwork, mut flows: Vec<f64>) -> Vec<f64> {
    let n = net.jobs.len();
    for a in net.middle_arcs() {
        flows[a] = flows[a].clamp(0.0, net.arcs[a].capacity);
    }
    for s in net.sink_arcs() {
        let y = net.arcs[s].from;
        let cap = net.arcs[s].capacity;
        let total: f64 = net.in_arcs(y).iter().map(|&a| flows[a]).sum();
        if total > cap {
            let r = cap / total;
            for &a in net.in_arcs(y) {
                flows[a] *= r;
            }
        }
    }
    for k in 0..n {
        let x = net.job_node(k);
        let cap = net.arcs[k].capacity;
        let total: f64 = net.out_arcs(x).iter().map(|&a| flows[a]).sum();
        if total > cap {
            let r = cap / total;
            for &a in net.out_arcs(x) {
                flows[a] *= r;
            }
        }
    }
    for k in 0..n {
        let x = net.job_node(k);
        flows[k] = net
            .out_arcs(x)
            .iter()
            .map(|&a| flows[a])
            .sum::<f64>()
            .min(net.arcs[k].capacity);
    }
    for s in net.sink_arcs() {
        let y = net.arcs[s].from;
        flows[s] = net
            .in_arcs(y)
            .iter()
            .map(|&a| flows[a])
            .sum::<f64>()
            .min(net.arcs[s].capacity);
    }
    flows
}

/// Blocking-flow (Dinic) maximum flow on an arbitrary arc list.
///
/// `initial` must be a valid flow; the result augments it to a maximum one.
pub(crate) fn dinic(
    nodes: usize,
    arcs: &[Arc],
    source: usize,
    sink: usize,
    initial: Option<&[f64]>,
) -> Vec<f64> {
    let m = arcs.len();
    let mut to = vec![0usize; 2 * m];
    let mut res = vec![0.0f64; 2 * m];
    let mut dust = vec![0.0f64; m];
    let mut offsets = vec![0usize; nodes + 1];
    for (a, arc) in arcs.iter().enumerate() {
        let f = initial.map_or(0.0, |fl| fl[a]);
        to[2 * a] = arc.to;
        to[2 * a + 1] = arc.from;
        res[2 * a] = arc.capacity - f;
        res[2 * a + 1] = f;
        dust[a] = DUST * arc.capacity.max(1.0);
        offsets[arc.from + 1] += 1;
        offsets[arc.to + 1] += 1;
    }
    for i in 0..nodes {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut adj = vec![0usize; 2 * m];
    for (a, arc) in arcs.iter().enumerate() {
        adj[fill[arc.from]] = 2 * a;
        fill[arc.from] += 1;
        adj[fill[arc.to]] = 2 * a + 1;
        fill[arc.to] += 1;
    }

    let mut level = vec![u32::MAX; nodes];
    let mut iter = vec![0usize; nodes];
    let mut queue = VecDeque::with_capacity(nodes);
    let mut stack: Vec<usize> = Vec::new();

    loop {
        level.fill(u32::MAX);
        level[source] = 0;
        queue.clear();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &e in &adj[offsets[u]..offsets[u + 1]] {
                let v = to[e];
                if level[v] == u32::MAX && res[e] > dust[e / 2] {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if level[sink] == u32::MAX {
            break;
        }
        iter.copy_from_slice(&offsets[..nodes]);

        // Iterative DFS; `stack` holds the edges of the current partial path.
        loop {
            stack.clear();
            let mut u = source;
            let pushed = loop {
                if u == sink {
                    let bottleneck = stack.iter().map(|&e| res[e]).fold(f64::INFINITY, f64::min);
                    break bottleneck;
                }
                let mut advanced = false;
                while iter[u] < offsets[u + 1] {
                    let e = adj[iter[u]];
                    let v = to[e];
                    if level[v] == level[u] + 1 && res[e] > dust[e / 2] {
                        stack.push(e);
                        u = v;
                        advanced = true;
                        break;
                    }
                    iter[u] += 1;
                }
                if !advanced {
                    match stack.pop() {
                        None => break 0.0,
                        Some(e) => {
                            u = to[e ^ 1];
                            iter[u] += 1;
                        }
                    }
                }
            };
            if pushed <= 0.0 {
                break;
            }
            for &e in &stack {
                res[e] -= pushed;
                res[e ^ 1] += pushed;
            }
        }
    }

    arcs.iter()
        .enumerate()
        .map(|(a, arc)| res[2 * a + 1].clamp(0.0, arc.capacity))
        .collect()
}

pub fn max_flow(net: &FlowNetwork, flow_tolerance: f64) -> FlowResult {
    let flows = dinic(net.node_count(), &net.arcs, net.source(), net.sink(), None);
    FlowResult::new(net, flows, flow_tolerance)
}

/// Maximum flow started from a previous flow (repaired to fit `net`).
pub fn max_flow_from(net: &FlowNetwork, flow_tolerance: f64, warm: Vec<f64>) -> FlowResult {
    let start = repair_flow(net, warm);
    let flows = dinic(
        net.node_count(),
        &net.arcs,
        net.source(),
        net.sink(),
        Some(&start),
    );
    FlowResult::new(net, flows, flow_tolerance)
}

#[derive(Debug, Clone)]
pub struct WapOutcome {
    pub feasible: bool,
    pub network: FlowNetwork,
    pub flow: FlowResult,
}

/// Whether every active job of `grid` fits at common speed `speed`.
pub fn wap_feasible(
    grid: &IntervalGrid,
    jobs: &[Job],
    speed: f64,
    config: &SolverConfig,
) -> Result<WapOutcome> {
    let network = build_wap_network(grid, jobs, speed)?;
    let flow = max_flow(&network, config.flow_tolerance);
    Ok(outcome(network, flow))
}

pub(crate) fn outcome(network: FlowNetwork, flow: FlowResult) -> WapOutcome {
    let demand = network.demand();
    let feasible = (demand - flow.value).abs() <= flow.tolerance * demand;
    WapOutcome {
        feasible,
        network,
        flow,
    }
}

/// Nodes reachable from the source in the residual graph (the upstream
/// nodes). Fails if the sink is among them.
pub fn residual_reachable_from_source(net: &FlowNetwork, flow: &FlowResult) -> Result<Vec<bool>> {
    let seen = reach(net, flow, net.source(), false);
    if seen[net.sink()] {
        return Err(Error::FlowNotMaximum);
    }
    Ok(seen)
}

/// Nodes from which the sink is reachable in the residual graph.
pub fn residual_reaching_sink(net: &FlowNetwork, flow: &FlowResult) -> Vec<bool> {
    reach(net, flow, net.sink(), true)
}

pub fn residual_path_exists(
    net: &FlowNetwork,
    flow: &FlowResult,
    from: usize,
    to: usize,
) -> Result<bool> {
    let nodes = net.node_count();
    if from >= nodes {
        return Err(Error::UnknownNode(from));
    }
    if to >= nodes {
        return Err(Error::UnknownNode(to));
    }
    Ok(reach(net, flow, from, false)[to])
}

/// BFS over residual arcs, forwards from `start` or backwards into it.
fn reach(net: &FlowNetwork, flow: &FlowResult, start: usize, backwards: bool) -> Vec<bool> {
    let mut seen = vec![false; net.node_count()];
    let mut queue = VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        // forward residual u->v exists for arc u->v when unsaturated, and for
        // arc v->u when it carries flow.
        let (fwd, bwd) = if backwards {
            (net.in_arcs(u), net.out_arcs(u))
        } else {
            (net.out_arcs(u), net.in_arcs(u))
        };
        for &a in fwd {
            let v = if backwards {
                net.arcs[a].from
            } else {
                net.arcs[a].to
            };
            if !seen[v] && flow.forward_open(net, a) {
                seen[v] = true;
                queue.push_back(v);
            }
        }
        for &a in bwd {
            let v = if backwards {
                net.arcs[a].to
            } else {
                net.arcs[a].from
            };
            if !seen[v] && flow.backward_open(net, a) {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// One line per arc: `u v capacity flow`, with nodes labelled `s`, `t`,
/// `x:<job id>` and `y:<interval index>`.
pub fn dump_network(net: &FlowNetwork, flow: &FlowResult, jobs: &[Job]) -> String {
    let label = |node: usize| match net.node(node) {
        Ok(Node::Source) => "s".to_string(),
        Ok(Node::Sink) => "t".to_string(),
        Ok(Node::Job(i)) => format!("x:{}", jobs[i].id),
        Ok(Node::Interval(j)) => format!("y:{j}"),
        Err(_) => "?".to_string(),
    };
    let mut out = String::new();
    for (a, arc) in net.arcs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            label(arc.from),
            label(arc.to),
            arc.capacity,
            flow.arc_flows[a]
        );
    }
    out
}
