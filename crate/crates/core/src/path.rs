//! Path construction for coverage goals.
//!
//! A partial path is a sequence of pieces: nodes already fixed and open
//! obligations `path(In, A, B, Out)`. Search steps resolve obligations edge by
//! edge forwards from `A`, backwards from `B`, or split them at an
//! intermediate node. Every step translates the code it commits to into
//! atoms; prefixes whose store becomes UNSAT are abandoned with chronological
//! backtracking, and a bounded number of randomized restarts keeps the
//! worst case in check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::ToPrimitive;
use petgraph::algo::{dijkstra, tarjan_scc};
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cfg::{expand_short_circuit, BoolExpr, Interpreter, NodeId, Program, Value, VarRole};
use crate::omega::Budget;
use crate::solver::{LabelError, Store, Verdict};
use crate::symexec::{Atom, Emission, MemoryState, SymExec, VarTable};
use crate::term::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Forward,
    Backward,
    Split,
    Mixed,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Forward, Strategy::Backward, Strategy::Split, Strategy::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Forward => "forward",
            Strategy::Backward => "backward",
            Strategy::Split => "split",
            Strategy::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

/// What the path must reach.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Node(NodeId),
    Edge(NodeId, NodeId),
}

impl Target {
    pub fn node(&self) -> NodeId {
        match self {
            Target::Node(n) | Target::Edge(_, n) => *n,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node(n) => write!(f, "node {n}"),
            Target::Edge(a, b) => write!(f, "edge {a}:{b}"),
        }
    }
}

/// A target plus conditions that must hold on arrival there.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalSpec {
    pub target: Target,
    pub constraints: Vec<BoolExpr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub seed: u64,
    pub strategy: Strategy,
    /// Probability of staying in a loop at a loop branch.
    pub loop_continue_prob: f64,
    /// Longest path considered, in nodes of the expanded program.
    pub max_path_len: usize,
    pub max_attempts: u32,
    /// Search steps between satisfiability checks.
    pub check_period: u32,
    /// Search steps per attempt before restarting; `None` is unbounded.
    pub steps_per_attempt: Option<u64>,
    /// How often mixed mode splits instead of stepping backwards.
    pub split_prob: f64,
    pub check_budget: u64,
    pub label_budget: u64,
    /// Solver steps for the whole search, shared by all checks and
    /// labelings; `None` is unbounded.
    pub solver_budget: Option<u64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            strategy: Strategy::Backward,
            loop_continue_prob: 0.7,
            max_path_len: 200,
            max_attempts: 20,
            check_period: 1,
            steps_per_attempt: Some(2_000),
            split_prob: 0.25,
            check_budget: 20_000,
            label_budget: 50_000,
            solver_budget: Some(2_000_000),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if !(self.loop_continue_prob > 0.0 && self.loop_continue_prob < 1.0) {
            return bad("loop_continue_prob must lie strictly between 0 and 1");
        }
        if !(0.0..=1.0).contains(&self.split_prob) {
            return bad("split_prob must lie in [0, 1]");
        }
        if self.max_path_len == 0 || self.max_attempts == 0 || self.check_period == 0 {
            return bad("bounds must be positive");
        }
        if self.steps_per_attempt == Some(0)
            || self.solver_budget == Some(0)
            || self.check_budget == 0
            || self.label_budget == 0
        {
            return bad("budgets must be positive");
        }
        Ok(())
    }

    /// Exhaustive search over paths of at most `bound` nodes.
    pub fn exhaustive(mut self, bound: usize) -> Self {
        self.max_path_len = bound;
        self.max_attempts = 1;
        self.steps_per_attempt = None;
        self.solver_budget = None;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no edge {0} -> {1}")]
    UnknownEdge(NodeId, NodeId),
    #[error("invalid search configuration: {0}")]
    Config(String),
}

/// The obligation `path(In, A, B, Out)`: reach `to` from `from`, turning the
/// arrival state at `from` into the arrival state at `to`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathGoal {
    pub in_state: MemoryState,
    pub from: NodeId,
    pub to: NodeId,
    pub out_state: MemoryState,
}

/// A goal covers the nodes from `from` up to but excluding `to`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Piece {
    Fixed(NodeId),
    Goal(PathGoal),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub attempts: u64,
    pub checks: u64,
    pub prunes: u64,
    pub steps: u64,
    /// Checks that ran out of budget without a verdict.
    pub unknowns: u64,
    /// Labeled models whose replay disagreed with the path (never expected).
    pub replay_mismatches: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    /// Nodes of the original program, entry to target.
    pub path: Vec<NodeId>,
    pub inputs: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Witness),
    /// Every path within the length bound was refuted.
    Infeasible,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub stats: SearchStats,
}

/// Reachability facts of the control-flow graph.
#[derive(Clone, Debug)]
pub struct Topology {
    dist: BTreeMap<NodeId, BTreeMap<NodeId, usize>>,
    scc: BTreeMap<NodeId, usize>,
    cyclic: BTreeSet<usize>,
}

impl Topology {
    pub fn new(p: &Program) -> Self {
        let mut g: DiGraph<NodeId, ()> = DiGraph::new();
        let idx: BTreeMap<NodeId, NodeIndex> = p.nodes.keys().map(|n| (*n, g.add_node(*n))).collect();
        let mut self_loops = BTreeSet::new();
        for e in &p.edges {
            g.add_edge(idx[&e.from], idx[&e.to], ());
            if e.from == e.to {
                self_loops.insert(e.from);
            }
        }
        let mut dist = BTreeMap::new();
        for (n, i) in &idx {
            let d: BTreeMap<NodeId, usize> =
                dijkstra(&g, *i, None, |_| 1usize).into_iter().map(|(j, d)| (g[j], d)).collect();
            dist.insert(*n, d);
        }
        let mut scc = BTreeMap::new();
        let mut cyclic = BTreeSet::new();
        for (k, comp) in tarjan_scc(&g).into_iter().enumerate() {
            if comp.len() > 1 || comp.iter().any(|i| self_loops.contains(&g[*i])) {
                cyclic.insert(k);
            }
            for i in comp {
                scc.insert(g[i], k);
            }
        }
        Topology { dist, scc, cyclic }
    }

    /// Fewest edges from `a` to `b`.
    pub fn distance(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.dist.get(&a)?.get(&b).copied()
    }

    pub fn reaches(&self, a: NodeId, b: NodeId) -> bool {
        self.distance(a, b).is_some()
    }

    /// Whether the edge `a → b` stays inside a loop.
    pub fn within_loop(&self, a: NodeId, b: NodeId) -> bool {
        let k = self.scc[&a];
        k == self.scc[&b] && self.cyclic.contains(&k)
    }

    /// Intermediate nodes for splitting `path(_, a, b, _)`.
    pub fn split_candidates(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        self.dist[&a].keys().copied().filter(|c| *c != a && *c != b && self.reaches(*c, b)).collect()
    }
}

/// Relative weight of a split point or step off every shortest route.
const DETOUR_WEIGHT: f64 = 0.05;

/// Weight of a step whose remaining distance is `rest`, from a goal
/// spanning `whole`.
fn route_weight(rest: Option<usize>, whole: Option<usize>) -> f64 {
    match (rest, whole) {
        (Some(r), Some(w)) if r + 1 == w => 1.0,
        _ => DETOUR_WEIGHT,
    }
}

/// Share of the ordering weight given to closing a goal whose endpoints
/// coincide, against going around once more.
const CLOSE_SHARE: f64 = 0.8;

/// One way of continuing the search.
#[derive(Clone, Debug)]
struct Move {
    pieces: Vec<Piece>,
    atoms: Vec<Atom>,
    weight: f64,
}

struct Frame {
    store: Store,
    moves: Vec<Move>,
    next: usize,
    since_check: u32,
}

enum AttemptEnd {
    Found(Witness),
    /// The search space within the bound was exhausted without cutoffs.
    Refuted,
    Cutoff,
}

struct Engine<'a> {
    original: &'a Program,
    program: Program,
    topo: Topology,
    cfg: &'a SearchConfig,
    goal: &'a GoalSpec,
    vars: VarTable,
    rng: ChaCha8Rng,
    stats: SearchStats,
    initial: MemoryState,
    /// What is left of the search-wide solver budget.
    total: Budget,
}

/// Search for an input vector driving `program` to the goal.
pub fn construct_path(program: &Program, goal: &GoalSpec, cfg: &SearchConfig) -> Result<SearchResult, EngineError> {
    cfg.validate()?;
    match goal.target {
        Target::Node(n) => {
            if !program.nodes.contains_key(&n) {
                return Err(EngineError::UnknownNode(n));
            }
        }
        Target::Edge(a, b) => {
            if !program.edges.iter().any(|e| e.from == a && e.to == b) {
                return Err(EngineError::UnknownEdge(a, b));
            }
        }
    }
    let expanded = expand_short_circuit(program);
    let mut engine = Engine {
        original: program,
        topo: Topology::new(&expanded),
        program: expanded,
        cfg,
        goal,
        vars: VarTable::new(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        stats: SearchStats::default(),
        initial: MemoryState::default(),
        total: Budget::new(cfg.solver_budget.unwrap_or(u64::MAX)),
    };
    for _ in 0..cfg.max_attempts {
        engine.stats.attempts += 1;
        let outcome = match engine.attempt() {
            AttemptEnd::Found(w) => SearchOutcome::Found(w),
            // A cutoff-free attempt covered every path within the bound.
            AttemptEnd::Refuted => SearchOutcome::Infeasible,
            AttemptEnd::Cutoff if engine.total.remaining() == 0 => break,
            AttemptEnd::Cutoff => continue,
        };
        return Ok(SearchResult { outcome, stats: engine.stats });
    }
    Ok(SearchResult { outcome: SearchOutcome::BudgetExhausted, stats: engine.stats })
}

fn goal_len(topo: &Topology, pieces: &[Piece]) -> Option<usize> {
    pieces.iter().try_fold(0usize, |acc, p| match p {
        Piece::Fixed(_) => Some(acc + 1),
        Piece::Goal(g) => topo.distance(g.from, g.to).map(|d| acc + d),
    })
}

impl Engine<'_> {
    fn attempt(&mut self) -> AttemptEnd {
        let (root_store, root_moves) = self.root();
        let mut stack = vec![Frame { store: root_store, moves: root_moves, next: 0, since_check: 0 }];
        let mut cutoff = false;
        let mut steps = 0u64;
        while let Some(top) = stack.last_mut() {
            if top.next == top.moves.len() {
                stack.pop();
                continue;
            }
            if self.cfg.steps_per_attempt.is_some_and(|limit| steps >= limit) || self.total.remaining() == 0 {
                return AttemptEnd::Cutoff;
            }
            steps += 1;
            self.stats.steps += 1;
            let mv = top.moves[top.next].clone();
            top.next += 1;
            match goal_len(&self.topo, &mv.pieces) {
                Some(len) if len <= self.cfg.max_path_len => {}
                _ => {
                    cutoff = true;
                    continue;
                }
            }
            let mut store = top.store.clone();
            for a in mv.atoms {
                store.assert_atom(a, &self.vars);
            }
            let mut since_check = top.since_check + 1;
            if store.is_unsat() {
                self.stats.prunes += 1;
                continue;
            }
            if since_check >= self.cfg.check_period {
                since_check = 0;
                self.stats.checks += 1;
                let mut budget = self.budget(self.cfg.check_budget);
                let verdict = store.check(&mut budget);
                self.spend(&budget);
                match verdict {
                    Verdict::Unsat => {
                        self.stats.prunes += 1;
                        continue;
                    }
                    // Deeper prefixes only get harder; give up on this branch
                    // without claiming it infeasible.
                    Verdict::Unknown => {
                        self.stats.unknowns += 1;
                        cutoff = true;
                        continue;
                    }
                    Verdict::Sat(_) => {}
                }
            }
            let open = mv.pieces.iter().position(|p| matches!(p, Piece::Goal(_)));
            if open.is_none() {
                match self.finish(&store, &mv.pieces) {
                    Ok(w) => return AttemptEnd::Found(w),
                    Err(LabelError::Unsat) => self.stats.prunes += 1,
                    Err(LabelError::Exhausted) => cutoff = true,
                }
                continue;
            }
            let moves = self.expand(&store, &mv.pieces);
            stack.push(Frame { store, moves, next: 0, since_check });
        }
        if cutoff {
            AttemptEnd::Cutoff
        } else {
            AttemptEnd::Refuted
        }
    }

    /// Initial store and the moves fixing the target and its constraints.
    fn root(&mut self) -> (Store, Vec<Move>) {
        let program = &self.program;
        self.initial = MemoryState::fresh(program, &mut self.vars);
        let mut store = Store::new();
        for d in &program.vars {
            if d.role == VarRole::Local {
                let v = self.initial.get(&d.name).expect("state covers locals");
                store.assert_atom(Atom::eq(crate::term::LinearTerm::var(v)), &self.vars);
            }
        }
        let arrival = MemoryState::fresh(program, &mut self.vars);
        // Ways to end at the target: plain arrival, or the pre-resolved final
        // edge (through nodes introduced by short-circuit expansion).
        let mut tails: Vec<(Vec<Piece>, Vec<Atom>)> = Vec::new();
        match self.goal.target {
            Target::Node(n) => tails.push((
                vec![
                    Piece::Goal(PathGoal {
                        in_state: self.initial.clone(),
                        from: program.entry,
                        to: n,
                        out_state: arrival.clone(),
                    }),
                    Piece::Fixed(n),
                ],
                Vec::new(),
            )),
            Target::Edge(from, to) => {
                for chain in self.edge_chains(from, to) {
                    let mut sx = SymExec::new(&self.program, &mut self.vars, &store);
                    let mut state = arrival.clone();
                    let mut em = Emission::default();
                    for w in chain.windows(2).rev() {
                        let edge = sx
                            .program
                            .outgoing(w[0])
                            .find(|(_, e)| e.to == w[1])
                            .map(|(_, e)| e.clone())
                            .expect("chain follows edges");
                        if let Some(g) = &edge.guard {
                            em.extend(sx.translate_guard(&state, g.as_comparison().expect("expanded guard")));
                        }
                        let stmts = &sx.program.nodes[&w[0]].statements;
                        let (before, e) = sx.translate_block_backward(&state, stmts);
                        em.extend(e);
                        state = before;
                    }
                    let mut pieces = vec![Piece::Goal(PathGoal {
                        in_state: self.initial.clone(),
                        from: self.program.entry,
                        to: from,
                        out_state: state,
                    })];
                    pieces.extend(chain.iter().map(|n| Piece::Fixed(*n)));
                    for opt in em.options() {
                        tails.push((pieces.clone(), opt));
                    }
                }
            }
        }
        let mut sx = SymExec::new(&self.program, &mut self.vars, &store);
        let mut constraint_options = vec![Vec::new()];
        for c in &self.goal.constraints {
            let alts = sx.translate_condition(&arrival, c);
            constraint_options = constraint_options
                .iter()
                .flat_map(|base| {
                    alts.iter().map(move |a| {
                        let mut o: Vec<Atom> = base.clone();
                        o.extend(a.iter().cloned());
                        o
                    })
                })
                .collect();
        }
        let mut moves = Vec::new();
        for (pieces, atoms) in &tails {
            for extra in &constraint_options {
                let mut all = atoms.clone();
                all.extend(extra.iter().cloned());
                moves.push(Move { pieces: pieces.clone(), atoms: all, weight: 1.0 });
            }
        }
        let moves = self.order(moves);
        (store, moves)
    }

    /// Node sequences realizing original edge `from → to` in the expanded
    /// program; interior nodes are the ones expansion introduced.
    fn edge_chains(&self, from: NodeId, to: NodeId) -> Vec<Vec<NodeId>> {
        let fresh = |n: NodeId| !self.original.nodes.contains_key(&n);
        let mut out = Vec::new();
        let mut stack = vec![vec![from]];
        while let Some(chain) = stack.pop() {
            let last = *chain.last().expect("nonempty");
            for (_, e) in self.program.outgoing(last) {
                let mut c = chain.clone();
                c.push(e.to);
                if e.to == to {
                    out.push(c);
                } else if fresh(e.to) {
                    stack.push(c);
                }
            }
        }
        out.sort();
        out
    }

    /// Moves resolving one open goal, in randomized biased order.
    fn expand(&mut self, store: &Store, pieces: &[Piece]) -> Vec<Move> {
        let goals: Vec<usize> =
            pieces.iter().enumerate().filter(|(_, p)| matches!(p, Piece::Goal(_))).map(|(i, _)| i).collect();
        let (gi, kind) = match self.cfg.strategy {
            Strategy::Forward => (goals[0], StepKind::Forward),
            Strategy::Backward => (*goals.last().expect("open goal"), StepKind::Backward),
            Strategy::Split => (goals[0], StepKind::Split),
            Strategy::Mixed => {
                let split = self.rng.gen_bool(self.cfg.split_prob);
                (*goals.last().expect("open goal"), if split { StepKind::Split } else { StepKind::Backward })
            }
        };
        let Piece::Goal(goal) = &pieces[gi] else { unreachable!() };
        let goal = goal.clone();
        let mut moves = Vec::new();
        let splice = |replacement: Vec<Piece>| {
            let mut p = pieces[..gi].to_vec();
            p.extend(replacement);
            p.extend_from_slice(&pieces[gi + 1..]);
            p
        };
        let kind = match kind {
            StepKind::Split => {
                let cands = self.topo.split_candidates(goal.from, goal.to);
                let far = self.topo.distance(goal.from, goal.to).is_some_and(|d| d >= 2);
                if far && !cands.is_empty() {
                    let direct = self.topo.distance(goal.from, goal.to);
                    for c in cands {
                        // Any candidate keeps the search complete; ones on a
                        // shortest route are tried first most of the time.
                        let through = self.topo.distance(goal.from, c).zip(self.topo.distance(c, goal.to));
                        let weight = if through.map(|(x, y)| x + y) == direct { 1.0 } else { DETOUR_WEIGHT };
                        let mid = MemoryState::fresh(&self.program, &mut self.vars);
                        moves.push(Move {
                            pieces: splice(vec![
                                Piece::Goal(PathGoal {
                                    in_state: goal.in_state.clone(),
                                    from: goal.from,
                                    to: c,
                                    out_state: mid.clone(),
                                }),
                                Piece::Goal(PathGoal {
                                    in_state: mid,
                                    from: c,
                                    to: goal.to,
                                    out_state: goal.out_state.clone(),
                                }),
                            ]),
                            atoms: Vec::new(),
                            weight,
                        });
                    }
                    return self.order(moves);
                }
                if self.cfg.strategy == Strategy::Mixed {
                    StepKind::Backward
                } else {
                    StepKind::Forward
                }
            }
            k => k,
        };
        let mut looping = Vec::new();
        let close = (goal.from == goal.to).then(|| Move {
            pieces: splice(Vec::new()),
            atoms: goal.in_state.unify(&goal.out_state),
            weight: CLOSE_SHARE,
        });
        let program = &self.program;
        let mut sx = SymExec::new(program, &mut self.vars, store);
        match kind {
            StepKind::Forward => {
                let a = goal.from;
                for (_, e) in program.outgoing(a) {
                    if !self.topo.reaches(e.to, goal.to) {
                        continue;
                    }
                    let (after, mut em) = sx.translate_block(&goal.in_state, &program.nodes[&a].statements);
                    if let Some(g) = &e.guard {
                        em.extend(sx.translate_guard(&after, g.as_comparison().expect("expanded guard")));
                    }
                    let next = splice(vec![
                        Piece::Fixed(a),
                        Piece::Goal(PathGoal {
                            in_state: after,
                            from: e.to,
                            to: goal.to,
                            out_state: goal.out_state.clone(),
                        }),
                    ]);
                    for atoms in em.options() {
                        moves.push(Move {
                            pieces: next.clone(),
                            atoms,
                            weight: route_weight(self.topo.distance(e.to, goal.to), self.topo.distance(a, goal.to)),
                        });
                        looping.push(self.topo.within_loop(a, e.to));
                    }
                }
            }
            StepKind::Backward => {
                let b = goal.to;
                for (_, e) in program.incoming(b) {
                    if !self.topo.reaches(goal.from, e.from) {
                        continue;
                    }
                    let mut em = Emission::default();
                    if let Some(g) = &e.guard {
                        em.extend(sx.translate_guard(&goal.out_state, g.as_comparison().expect("expanded guard")));
                    }
                    let (before, e2) = sx.translate_block_backward(&goal.out_state, &program.nodes[&e.from].statements);
                    em.extend(e2);
                    let next = splice(vec![
                        Piece::Goal(PathGoal {
                            in_state: goal.in_state.clone(),
                            from: goal.from,
                            to: e.from,
                            out_state: before,
                        }),
                        Piece::Fixed(e.from),
                    ]);
                    for atoms in em.options() {
                        moves.push(Move {
                            pieces: next.clone(),
                            atoms,
                            weight: route_weight(
                                self.topo.distance(goal.from, e.from),
                                self.topo.distance(goal.from, b),
                            ),
                        });
                        looping.push(self.topo.within_loop(e.from, b));
                    }
                }
            }
            StepKind::Split => unreachable!("split handled above"),
        }
        // Loop bias: at a branch with edges both staying in and leaving a
        // loop, the staying moves share `p` and the leaving ones `1 - p`.
        // Within each class, steps along a shortest route dominate.
        let class_total = |stay: bool| -> f64 {
            moves.iter().zip(&looping).filter(|(_, l)| **l == stay).map(|(m, _)| m.weight).sum()
        };
        let (stay_total, leave_total) = (class_total(true), class_total(false));
        let p = self.cfg.loop_continue_prob;
        for (m, l) in moves.iter_mut().zip(&looping) {
            m.weight *= match (stay_total > 0.0 && leave_total > 0.0, *l) {
                (true, true) => p / stay_total,
                (true, false) => (1.0 - p) / leave_total,
                (false, _) => 1.0 / (stay_total + leave_total),
            };
        }
        if let Some(c) = close {
            for m in &mut moves {
                m.weight *= 1.0 - CLOSE_SHARE;
            }
            moves.push(c);
        }
        self.order(moves)
    }

    /// Weighted random order (sampling without replacement).
    fn order(&mut self, moves: Vec<Move>) -> Vec<Move> {
        let mut keyed: Vec<(f64, Move)> = moves
            .into_iter()
            .map(|m| {
                let u: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
                (u.ln() / m.weight, m)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
        keyed.into_iter().map(|(_, m)| m).collect()
    }

    /// Label a complete path and replay the resulting inputs.
    /// A budget of at most `cap` steps, limited by what the search has left.
    fn budget(&self, cap: u64) -> Budget {
        Budget::new(cap.min(self.total.remaining()))
    }

    fn spend(&mut self, used: &Budget) {
        let _ = self.total.charge(used.used());
    }

    fn finish(&mut self, store: &Store, pieces: &[Piece]) -> Result<Witness, LabelError> {
        let path: Vec<NodeId> = pieces
            .iter()
            .map(|p| match p {
                Piece::Fixed(n) => *n,
                Piece::Goal(_) => unreachable!("complete path"),
            })
            .collect();
        let mut budget = self.budget(self.cfg.label_budget);
        let labeled = store.label(&mut self.rng, &mut budget);
        self.spend(&budget);
        let model = labeled?;
        let inputs = self.inputs_of(&model);
        if !self.replays(&inputs, &path) {
            self.stats.replay_mismatches += 1;
            return Err(LabelError::Unsat);
        }
        let path = path.into_iter().filter(|n| self.original.nodes.contains_key(n)).collect();
        Ok(Witness { path, inputs })
    }

    fn inputs_of(&self, model: &Model) -> BTreeMap<String, Value> {
        self.program
            .inputs()
            .map(|d| {
                let v = self.initial.get(&d.name).expect("inputs are in the state");
                let value = model.get(&v).and_then(|x| x.to_i128()).unwrap_or(0);
                (d.name.clone(), value)
            })
            .collect()
    }

    /// Concrete execution follows `path` and satisfies the goal constraints
    /// on arrival.
    fn replays(&self, inputs: &BTreeMap<String, Value>, path: &[NodeId]) -> bool {
        replay_expanded(&self.program, inputs, path, &self.goal.constraints)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StepKind {
    Forward,
    Backward,
    Split,
}

fn replay_expanded(
    program: &Program,
    inputs: &BTreeMap<String, Value>,
    path: &[NodeId],
    constraints: &[BoolExpr],
) -> bool {
    let Ok(mut it) = Interpreter::new(program, inputs) else {
        return false;
    };
    if path.first() != Some(&it.current()) {
        return false;
    }
    for want in &path[1..] {
        match it.step() {
            Ok(Some(n)) if n == *want => {}
            _ => return false,
        }
    }
    constraints.iter().all(|c| it.eval_bool(c) == Ok(true))
}

/// Whether executing `program` on `inputs` visits exactly `path` from the
/// entry (as a prefix of the full run) and, on arrival at its last node,
/// satisfies every constraint.
pub fn replay_witness(
    program: &Program,
    inputs: &BTreeMap<String, Value>,
    path: &[NodeId],
    constraints: &[BoolExpr],
) -> bool {
    replay_expanded(program, inputs, path, constraints)
}
