//! Lowering of `&&`, `||` and `!` in guards into CFG structure so that
//! every guard becomes a single comparison.

use std::collections::BTreeSet;

use super::{BoolExpr, Edge, Node, NodeId, Program};

/// Negation normal form: `!` is pushed into comparisons and disappears.
pub fn to_nnf(b: &BoolExpr) -> BoolExpr {
    nnf(b, false)
}

fn nnf(b: &BoolExpr, negated: bool) -> BoolExpr {
    match b {
        BoolExpr::Cmp(c) => BoolExpr::Cmp(if negated { c.negate() } else { c.clone() }),
        BoolExpr::Not(x) => nnf(x, !negated),
        BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
            let (l, r) = (Box::new(nnf(l, negated)), Box::new(nnf(r, negated)));
            match (b, negated) {
                (BoolExpr::And(..), false) | (BoolExpr::Or(..), true) => BoolExpr::And(l, r),
                _ => BoolExpr::Or(l, r),
            }
        }
    }
}

struct Lowering {
    next_id: u32,
    edges: Vec<Edge>,
    fresh: Vec<NodeId>,
}

impl Lowering {
    fn fresh_node(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.fresh.push(id);
        id
    }

    /// Emit edges from `at` that reach `on_true` when `b` holds and
    /// `on_false` otherwise. Without `on_false` the false case has no edge.
    fn compile(&mut self, b: &BoolExpr, at: NodeId, on_true: NodeId, on_false: Option<NodeId>) {
        match b {
            BoolExpr::Cmp(c) => {
                self.edges.push(Edge { from: at, to: on_true, guard: Some(BoolExpr::Cmp(c.clone())) });
                if let Some(f) = on_false {
                    self.edges.push(Edge { from: at, to: f, guard: Some(BoolExpr::Cmp(c.negate())) });
                }
            }
            BoolExpr::And(l, r) => {
                let mid = self.fresh_node();
                self.compile(l, at, mid, on_false);
                self.compile(r, mid, on_true, on_false);
            }
            BoolExpr::Or(l, r) => {
                let mid = self.fresh_node();
                self.compile(l, at, on_true, Some(mid));
                self.compile(r, mid, on_true, on_false);
            }
            BoolExpr::Not(_) => unreachable!("guards are in NNF"),
        }
    }
}

fn is_atomic(g: &Option<BoolExpr>) -> bool {
    matches!(g, None | Some(BoolExpr::Cmp(_)))
}

/// Rewrite every compound guard into chains of single-comparison edges
/// through fresh nodes numbered above the current maximum id.
pub fn expand_short_circuit(p: &Program) -> Program {
    let mut low =
        Lowering { next_id: p.nodes.keys().map(|n| n.0).max().unwrap_or(0) + 1, edges: Vec::new(), fresh: Vec::new() };
    let mut done = BTreeSet::new();
    for e in &p.edges {
        if !done.insert(e.from) {
            continue;
        }
        let group: Vec<Edge> = p
            .outgoing(e.from)
            .map(|(_, e)| Edge { from: e.from, to: e.to, guard: e.guard.as_ref().map(to_nnf) })
            .collect();
        if group.iter().all(|e| is_atomic(&e.guard)) {
            low.edges.extend(group);
            continue;
        }
        if let [a, b] = group.as_slice() {
            if let (Some(ga), Some(gb)) = (&a.guard, &b.guard) {
                if nnf(ga, true) == *gb {
                    low.compile(ga, e.from, a.to, Some(b.to));
                    continue;
                }
                if nnf(gb, true) == *ga {
                    low.compile(gb, e.from, b.to, Some(a.to));
                    continue;
                }
            }
        }
        // General case: test the guards one after another, leaving an
        // unguarded edge for when every guard failed.
        let mut group = group;
        group.sort_by_key(|e| e.guard.is_none());
        let mut at = e.from;
        for (i, edge) in group.iter().enumerate() {
            let last = i + 1 == group.len();
            match &edge.guard {
                None => low.edges.push(Edge { from: at, to: edge.to, guard: None }),
                Some(g) => {
                    let next = (!last).then(|| low.fresh_node());
                    low.compile(g, at, edge.to, next);
                    if let Some(n) = next {
                        at = n;
                    }
                }
            }
        }
    }
    let mut nodes = p.nodes.clone();
    for id in low.fresh {
        nodes.insert(id, Node::default());
    }
    Program {
        name: p.name.clone(),
        vars: p.vars.clone(),
        nodes,
        edges: low.edges,
        entry: p.entry,
        exits: p.exits.clone(),
    }
}
