//! The combined arithmetic store: online equality elimination, interval
//! propagation, dynamic product relaxations, satisfiability checks and
//! labeling.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;

use crate::interval::{propagate_fixpoint, relax_product, Interval, Intervals, Propagator, RelaxationSet};
use crate::omega::{
    eliminate_equality, find_model, normalize, Budget, LowestPicker, Normalized, RandomPicker, Substitution, System,
    ValuePicker,
};
use crate::symexec::{Atom, BoundsHint, VarTable};
use crate::term::{floor_div, Constraint, LinearTerm, Model, Relation, VarId};

/// Parameters introduced by equality elimination are numbered from here so
/// they never collide with translation variables.
pub const PARAM_BASE: u32 = 1 << 30;

/// Filter applications per propagation round.
const PROPAGATION_STEPS: usize = 10_000;

/// Outcome of a satisfiability check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// A model verified against every atom.
    Sat(Model),
    Unsat,
    /// Neither refuted nor verified within the budget.
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LabelError {
    #[error("the store is unsatisfiable")]
    Unsat,
    #[error("labeling budget exhausted")]
    Exhausted,
}

/// Conjunction of atoms over bounded integer variables. Cloning is the
/// snapshot mechanism used for backtracking.
#[derive(Clone, Debug, Default)]
pub struct Store {
    atoms: Vec<Atom>,
    /// Original linear constraints, for interval filtering.
    linear: Vec<Constraint>,
    products: Vec<(VarId, VarId, VarId)>,
    intervals: Intervals,
    subst: Substitution,
    /// Inequations with eliminated variables substituted.
    geqs: Vec<LinearTerm>,
    relaxations: Vec<RelaxationSet>,
    next_param: u32,
    unsat: bool,
}

impl Store {
    pub fn new() -> Self {
        Store { next_param: PARAM_BASE, ..Default::default() }
    }

    pub fn is_unsat(&self) -> bool {
        self.unsat
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn substitution(&self) -> &Substitution {
        &self.subst
    }

    pub fn interval(&self, v: VarId) -> Option<&Interval> {
        self.intervals.get(&v)
    }

    pub fn intervals(&self) -> &Intervals {
        &self.intervals
    }

    pub fn relaxations(&self) -> &[RelaxationSet] {
        &self.relaxations
    }

    /// Make `v` known with the given bounds (no-op if already known).
    pub fn declare(&mut self, v: VarId, bounds: Interval) {
        self.intervals.entry(v).or_insert(bounds);
    }

    /// Add `atom`, declaring its variables from `vars`.
    pub fn assert_atom(&mut self, atom: Atom, vars: &VarTable) {
        for v in atom.vars() {
            self.declare(v, vars.get(v).bounds.clone());
        }
        self.assert_declared(atom);
    }

    /// Add `atom` whose variables are all declared.
    pub fn assert_declared(&mut self, atom: Atom) {
        if self.unsat {
            return;
        }
        let (linear, products) = atom.expand();
        self.atoms.push(atom);
        for c in linear {
            self.add_linear(c);
        }
        self.products.extend(products);
        self.propagate();
    }

    fn add_linear(&mut self, c: Constraint) {
        let term = self.subst.apply(&c.term);
        self.linear.push(c.clone());
        match normalize(term, c.rel) {
            Normalized::True => {}
            Normalized::False => self.unsat = true,
            Normalized::Constraint(n) => match n.rel {
                Relation::Geq => self.geqs.push(n.term),
                Relation::Eq => {
                    let next = &mut self.next_param;
                    let s = eliminate_equality(&n.term, &mut || {
                        let v = VarId(*next);
                        *next += 1;
                        v
                    });
                    self.subst.compose(&s);
                    let mut kept = Vec::with_capacity(self.geqs.len());
                    for g in self.geqs.drain(..) {
                        match normalize(s.apply(&g), Relation::Geq) {
                            Normalized::True => {}
                            Normalized::False => self.unsat = true,
                            Normalized::Constraint(c) => kept.push(c.term),
                        }
                    }
                    self.geqs = kept;
                }
            },
        }
    }

    fn propagators(&self) -> Vec<Propagator> {
        let mut props: Vec<Propagator> = self.linear.iter().cloned().map(Propagator::Linear).collect();
        props.extend(self.products.iter().map(|&(z, x, y)| Propagator::Product { z, x, y }));
        props
    }

    /// Interval filtering to a fixpoint, then relaxation refresh.
    fn propagate(&mut self) {
        if self.unsat {
            return;
        }
        if propagate_fixpoint(&self.propagators(), &mut self.intervals, PROPAGATION_STEPS).is_err() {
            self.unsat = true;
            return;
        }
        let iv = &self.intervals;
        let stale = self.relaxations.len() != self.products.len() || self.relaxations.iter().any(|r| r.is_stale(iv));
        if stale {
            self.relaxations =
                self.products.iter().map(|&(z, x, y)| relax_product(z, x, y, &iv[&x], &iv[&y])).collect();
        }
    }

    /// Narrow `v` to `bounds` (used for labeling splits).
    pub fn restrict(&mut self, v: VarId, bounds: &Interval) {
        let t = LinearTerm::var(v);
        self.assert_declared(Atom::geq(t.sub(&LinearTerm::constant(bounds.lo.clone()))));
        self.assert_declared(Atom::geq(LinearTerm::constant(bounds.hi.clone()).sub(&t)));
    }

    /// The linear fragment: substituted inequations, current relaxations and
    /// interval bounds, all over the remaining free variables and parameters.
    pub fn linear_system(&self) -> Option<System> {
        let mut sys = System::new();
        let mut push = |t: LinearTerm| -> bool {
            match normalize(t, Relation::Geq) {
                Normalized::True => true,
                Normalized::False => false,
                Normalized::Constraint(c) => {
                    sys.push(c);
                    true
                }
            }
        };
        for g in &self.geqs {
            if !push(g.clone()) {
                return None;
            }
        }
        for r in &self.relaxations {
            for t in &r.inequations {
                if !push(self.subst.apply(t)) {
                    return None;
                }
            }
        }
        for (v, iv) in &self.intervals {
            let t = self.subst.apply(&LinearTerm::var(*v));
            if !push(t.sub(&LinearTerm::constant(iv.lo.clone()))) || !push(LinearTerm::constant(iv.hi.clone()).sub(&t))
            {
                return None;
            }
        }
        Some(sys)
    }

    /// Values for every declared variable from a model of the linear system.
    fn reconstruct(&self, free: &Model) -> Model {
        let mut full = free.clone();
        self.subst.extend_model(&mut full);
        self.intervals.keys().map(|v| (*v, full.get(v).cloned().unwrap_or_else(BigInt::zero))).collect()
    }

    /// Whether `model` satisfies every atom and every declared bound.
    pub fn verify(&self, model: &Model) -> bool {
        self.intervals.iter().all(|(v, iv)| model.get(v).is_some_and(|x| iv.contains(x)))
            && self.atoms.iter().all(|a| a.holds(model) == Some(true))
    }

    fn try_model(
        &self,
        sys: &System,
        picker: &mut dyn ValuePicker,
        budget: &mut Budget,
    ) -> Result<Option<Option<Model>>, ()> {
        match find_model(sys, picker, budget) {
            Err(_) => Err(()),
            Ok(None) => Ok(None),
            Ok(Some(sol)) => {
                let m = self.reconstruct(&sol.model);
                Ok(Some(self.verify(&m).then_some(m)))
            }
        }
    }

    /// Decide the linear fragment and try to verify a model of the full
    /// store. UNSAT is definitive; SAT always carries a verified model.
    pub fn check(&mut self, budget: &mut Budget) -> Verdict {
        self.propagate();
        if self.unsat {
            return Verdict::Unsat;
        }
        let Some(sys) = self.linear_system() else {
            self.unsat = true;
            return Verdict::Unsat;
        };
        match self.try_model(&sys, &mut LowestPicker, budget) {
            Err(()) => Verdict::Unknown,
            Ok(None) => {
                self.unsat = true;
                Verdict::Unsat
            }
            Ok(Some(Some(m))) => Verdict::Sat(m),
            Ok(Some(None)) => Verdict::Unknown,
        }
    }

    /// Find a verified model: random picks from the solved ranges first, then
    /// depth-first interval splits of product operands.
    pub fn label<R: Rng>(&self, rng: &mut R, budget: &mut Budget) -> Result<Model, LabelError> {
        let mut store = self.clone();
        store.label_rec(rng, budget)
    }

    fn label_rec<R: Rng>(&mut self, rng: &mut R, budget: &mut Budget) -> Result<Model, LabelError> {
        const RANDOM_TRIES: usize = 4;
        budget.tick().map_err(|_| LabelError::Exhausted)?;
        self.propagate();
        if self.unsat {
            return Err(LabelError::Unsat);
        }
        let sys = self.linear_system().ok_or(LabelError::Unsat)?;
        for _ in 0..RANDOM_TRIES {
            match self.try_model(&sys, &mut RandomPicker { rng: &mut *rng }, budget) {
                Err(()) => return Err(LabelError::Exhausted),
                Ok(None) => return Err(LabelError::Unsat),
                Ok(Some(Some(m))) => return Ok(m),
                Ok(Some(None)) => {}
            }
        }
        // Split the widest product operand.
        let widest = self
            .products
            .iter()
            .flat_map(|&(_, x, y)| [x, y])
            .filter(|v| !self.intervals[v].is_point())
            .max_by(|a, b| self.intervals[a].width().cmp(&self.intervals[b].width()).then(b.cmp(a)));
        let Some(v) = widest else {
            // Every product is pinned, so the linear fragment is exact and a
            // model of it must verify.
            return match self.try_model(&sys, &mut LowestPicker, budget) {
                Err(()) => Err(LabelError::Exhausted),
                Ok(Some(Some(m))) => Ok(m),
                Ok(_) => Err(LabelError::Unsat),
            };
        };
        let iv = self.intervals[&v].clone();
        let mid = floor_div(&(&iv.lo + &iv.hi), &BigInt::from(2));
        let mut halves = [Interval::new(iv.lo.clone(), mid.clone()), Interval::new(mid + 1, iv.hi.clone())];
        if rng.gen_bool(0.5) {
            halves.swap(0, 1);
        }
        let mut exhausted = false;
        for h in halves {
            let mut child = self.clone();
            child.restrict(v, &h);
            match child.label_rec(rng, budget) {
                Ok(m) => return Ok(m),
                Err(LabelError::Unsat) => {}
                Err(LabelError::Exhausted) => {
                    exhausted = true;
                    if budget.remaining() == 0 {
                        break;
                    }
                }
            }
        }
        Err(if exhausted { LabelError::Exhausted } else { LabelError::Unsat })
    }
}

impl BoundsHint for Store {
    fn hint(&self, v: VarId) -> Option<Interval> {
        self.intervals.get(&v).cloned()
    }
}

/// Convenience: a store holding `atoms`, with bounds taken from `bounds`.
pub fn store_from(atoms: impl IntoIterator<Item = Atom>, bounds: &BTreeMap<VarId, Interval>) -> Store {
    let mut s = Store::new();
    for (v, iv) in bounds {
        s.declare(*v, iv.clone());
    }
    for a in atoms {
        for v in a.vars() {
            assert!(s.intervals.contains_key(&v), "undeclared variable {v}");
        }
        s.assert_declared(a);
    }
    s
}
