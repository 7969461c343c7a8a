//! Exact satisfiability for conjunctions of linear integer equations and
//! inequations, after Pugh's Omega Test.
//!
//! Equations are removed first by substitution. A variable with a unit
//! coefficient is substituted directly; otherwise the symmetric-modulus
//! reduction introduces fresh parameters until a unit coefficient appears.
//! Inequations are then eliminated variable by variable. A pairing of a lower
//! bound `a·w ≥ β` with an upper bound `b·w ≤ α` yields the real shadow
//! `a·α − b·β ≥ 0` and the dark shadow `a·α − b·β ≥ (a−1)(b−1)`. Every model
//! of the dark shadow extends to the original system; the integer solutions it
//! misses are covered by finitely many splinter problems.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::term::{ceil_div, floor_div, Constraint, LinearTerm, Model, Relation, VarId};

/// Result of normalizing a single constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Normalized {
    True,
    False,
    Constraint(Constraint),
}

/// Divide by the coefficient gcd. Equations whose constant is not divisible by
/// the gcd are trivially false; inequations get their constant floor-tightened.
/// Equations are sign-normalized so the lowest-id coefficient is positive.
pub fn normalize(term: LinearTerm, rel: Relation) -> Normalized {
    if term.is_constant() {
        let c = term.constant_part();
        let ok = match rel {
            Relation::Eq => c.is_zero(),
            Relation::Geq => !c.is_negative(),
        };
        return if ok { Normalized::True } else { Normalized::False };
    }
    let g = term.coeff_gcd();
    let c0 = term.constant_part().clone();
    let constant = match rel {
        Relation::Eq => {
            if !(&c0 % &g).is_zero() {
                return Normalized::False;
            }
            c0 / &g
        }
        Relation::Geq => floor_div(&c0, &g),
    };
    let mut out = LinearTerm::constant(constant);
    for (v, c) in term.coeffs() {
        out.add_coeff(*v, c / &g);
    }
    if rel == Relation::Eq {
        let leading_negative = out.coeffs().values().next().is_some_and(|c| c.is_negative());
        if leading_negative {
            out = out.neg();
        }
    }
    Normalized::Constraint(Constraint { term: out, rel })
}

/// Mapping from eliminated variables to terms over the remaining ones.
/// Kept fully resolved: no replacement mentions a substituted variable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<VarId, LinearTerm>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn get(&self, v: VarId) -> Option<&LinearTerm> {
        self.map.get(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &LinearTerm)> {
        self.map.iter()
    }

    /// Record `v ↦ term`, first resolving `term` against existing entries and
    /// then rewriting existing entries that mention `v`.
    pub fn insert(&mut self, v: VarId, term: LinearTerm) {
        let term = self.apply(&term);
        debug_assert!(!term.contains(v), "substitution would be cyclic");
        for t in self.map.values_mut() {
            t.substitute(v, &term);
        }
        self.map.insert(v, term);
    }

    /// Merge all entries of `other` (in order).
    pub fn compose(&mut self, other: &Substitution) {
        for (v, t) in &other.map {
            self.insert(*v, t.clone());
        }
    }

    pub fn apply(&self, term: &LinearTerm) -> LinearTerm {
        let mut out = term.clone();
        let hits: Vec<VarId> = out.vars().filter(|v| self.map.contains_key(v)).collect();
        for v in hits {
            out.substitute(v, &self.map[&v]);
        }
        out
    }

    /// Add values for every substituted variable. Variables of replacement
    /// terms that are still unassigned default to zero.
    pub fn extend_model(&self, model: &mut Model) {
        for t in self.map.values() {
            for v in t.vars() {
                model.entry(v).or_insert_with(BigInt::zero);
            }
        }
        for (v, t) in &self.map {
            let value = t.eval(model).expect("all replacement vars assigned");
            model.insert(*v, value);
        }
    }
}

/// `a mod^ m`: the symmetric residue, in `(-m/2, m/2]`.
fn mod_hat(a: &BigInt, m: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    a - m * floor_div(&(a * &two + m), &(m * &two))
}

/// Eliminate the canonical equation `eq = 0` (see [`normalize`]).
///
/// Returns the substitution that solves it; `fresh` supplies parameter
/// variables when no unit coefficient is available. The equation must be
/// satisfiable modulo its gcd, which `normalize` guarantees.
pub fn eliminate_equality(eq: &LinearTerm, fresh: &mut dyn FnMut() -> VarId) -> Substitution {
    let mut subst = Substitution::new();
    let mut current = eq.clone();
    loop {
        let current_norm = match normalize(current.clone(), Relation::Eq) {
            Normalized::Constraint(c) => c.term,
            Normalized::True => return subst,
            Normalized::False => panic!("eliminate_equality on an unsatisfiable equation"),
        };
        if let Some((&v, c)) = current_norm.coeffs().iter().find(|(_, c)| c.abs().is_one()) {
            // x_k = -sign(a_k) * (rest)
            let mut rest = current_norm.clone();
            rest.take_coeff(v);
            let replacement = if c.is_positive() { rest.neg() } else { rest };
            subst.insert(v, replacement);
            return subst;
        }
        // Smallest |a_k| picks the pivot; ties by variable id.
        let (&k, ak) = current_norm
            .coeffs()
            .iter()
            .min_by(|(v1, c1), (v2, c2)| c1.abs().cmp(&c2.abs()).then(v1.cmp(v2)))
            .expect("non-constant equation");
        let m = ak.abs() + BigInt::one();
        let sign = if ak.is_positive() { BigInt::one() } else { -BigInt::one() };
        let sigma = fresh();
        // x_k = sign(a_k) * (-m·σ + Σ_{i≠k} (a_i mod^ m)·x_i + (c mod^ m))
        let mut replacement = LinearTerm::constant(mod_hat(current_norm.constant_part(), &m));
        replacement.add_coeff(sigma, -m.clone());
        for (v, c) in current_norm.coeffs() {
            if *v != k {
                replacement.add_coeff(*v, mod_hat(c, &m));
            }
        }
        let replacement = replacement.scale(&sign);
        current = current_norm;
        current.substitute(k, &replacement);
        subst.insert(k, replacement);
    }
}

/// A lower bound `c0 + Σ ci·vi < a·w`, `a > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrictLower {
    pub rest: LinearTerm,
    pub coeff: BigInt,
}

/// An upper bound `b·w < d0 + Σ dj·vj`, `b > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrictUpper {
    pub coeff: BigInt,
    pub rest: LinearTerm,
}

impl StrictLower {
    /// From `t ≥ 0` with a positive coefficient on `w`.
    pub fn from_geq(t: &LinearTerm, w: VarId) -> Self {
        let mut rest = t.clone();
        let a = rest.take_coeff(w);
        assert!(a.is_positive(), "not a lower bound on {w}");
        // a·w + r ≥ 0  ⇔  -r - 1 < a·w
        let mut rest = rest.neg();
        rest.add_constant(&-BigInt::one());
        StrictLower { rest, coeff: a }
    }
}

impl StrictUpper {
    /// From `t ≥ 0` with a negative coefficient on `w`.
    pub fn from_geq(t: &LinearTerm, w: VarId) -> Self {
        let mut rest = t.clone();
        let b = -rest.take_coeff(w);
        assert!(b.is_positive(), "not an upper bound on {w}");
        // r - b·w ≥ 0  ⇔  b·w < r + 1
        rest.add_constant(&BigInt::one());
        StrictUpper { coeff: b, rest }
    }
}

/// Combine strict bounds `L < a·w` and `b·w < U` into `b·L < a·U`, returned
/// as `a·U − b·L − 1 ≥ 0`.
pub fn fm_combine(lower: &StrictLower, upper: &StrictUpper) -> LinearTerm {
    let mut t = upper.rest.scale(&lower.coeff);
    t.add_assign_scaled(&lower.rest, &-upper.coeff.clone());
    t.add_constant(&-BigInt::one());
    t
}

/// Shadow computed when eliminating a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EliminationMode {
    /// Over-approximating projection.
    Real,
    /// Under-approximating projection.
    Dark,
    /// Dark shadow plus splinters; equisatisfiable with the input.
    Exact,
}

/// A conjunction of equations (`= 0`) and inequations (`≥ 0`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct System {
    pub eqs: Vec<LinearTerm>,
    pub geqs: Vec<LinearTerm>,
}

impl System {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_constraints<'a>(cs: impl IntoIterator<Item = &'a Constraint>) -> Self {
        let mut s = System::new();
        for c in cs {
            s.push(c.clone());
        }
        s
    }

    pub fn push(&mut self, c: Constraint) {
        match c.rel {
            Relation::Eq => self.eqs.push(c.term),
            Relation::Geq => self.geqs.push(c.term),
        }
    }

    pub fn constraints(&self) -> Vec<Constraint> {
        self.eqs.iter().cloned().map(Constraint::eq).chain(self.geqs.iter().cloned().map(Constraint::geq)).collect()
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut vs: Vec<VarId> = self.eqs.iter().chain(&self.geqs).flat_map(|t| t.vars()).collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn holds(&self, model: &Model) -> Option<bool> {
        for c in self.constraints() {
            if !c.holds(model)? {
                return Some(false);
            }
        }
        Some(true)
    }

    fn max_var(&self) -> Option<VarId> {
        self.vars().last().copied()
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.constraints() {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Output of [`eliminate_variable`].
#[derive(Clone, Debug, Default)]
pub struct Elimination {
    /// Inequations over the remaining variables.
    pub shadow: Vec<LinearTerm>,
    /// In exact mode, extra problems that still mention the variable.
    pub splinters: Vec<System>,
}

/// Bounds on `w` split out of a set of inequations.
struct Bounds<'a> {
    lower: Vec<&'a LinearTerm>,
    upper: Vec<&'a LinearTerm>,
    rest: Vec<&'a LinearTerm>,
}

fn split_bounds(geqs: &[LinearTerm], w: VarId) -> Bounds<'_> {
    let mut b = Bounds { lower: Vec::new(), upper: Vec::new(), rest: Vec::new() };
    for t in geqs {
        let c = t.coeff(w);
        if c.is_positive() {
            b.lower.push(t);
        } else if c.is_negative() {
            b.upper.push(t);
        } else {
            b.rest.push(t);
        }
    }
    b
}

fn pair(lower: &LinearTerm, upper: &LinearTerm, w: VarId, dark: bool) -> LinearTerm {
    let a = lower.coeff(w);
    let b = -upper.coeff(w);
    // a·w + r_l ≥ 0 and r_u − b·w ≥ 0  ⇒  b·r_l + a·r_u ≥ 0 (w cancels).
    let mut t = lower.scale(&b);
    t.add_assign_scaled(upper, &a);
    debug_assert!(!t.contains(w));
    if dark {
        let slack = (&a - BigInt::one()) * (&b - BigInt::one());
        t.add_constant(&-slack);
    }
    t
}

fn splinter_width(a: &BigInt, max_other: &BigInt) -> BigInt {
    // floor((a·m − a − m) / m)
    floor_div(&(a * max_other - a - max_other), max_other)
}

fn is_exact(b: &Bounds<'_>, w: VarId) -> bool {
    b.lower.iter().all(|t| t.coeff(w).is_one()) || b.upper.iter().all(|t| (-t.coeff(w)).is_one())
}

/// Eliminate `w` from the inequations `geqs`.
pub fn eliminate_variable(w: VarId, geqs: &[LinearTerm], mode: EliminationMode) -> Elimination {
    let b = split_bounds(geqs, w);
    let exact = is_exact(&b, w);
    let dark = mode != EliminationMode::Real && !exact;
    let mut shadow: Vec<LinearTerm> = b.rest.iter().map(|t| (*t).clone()).collect();
    for l in &b.lower {
        for u in &b.upper {
            shadow.push(pair(l, u, w, dark));
        }
    }
    let mut splinters = Vec::new();
    if mode == EliminationMode::Exact && !exact && !b.upper.is_empty() {
        let max_upper = b.upper.iter().map(|t| -t.coeff(w)).max().expect("nonempty");
        for l in &b.lower {
            let a = l.coeff(w);
            let width = splinter_width(&a, &max_upper);
            let mut i = BigInt::zero();
            while i <= width {
                let mut eq = (*l).clone();
                eq.add_constant(&-i.clone());
                splinters.push(System { eqs: vec![eq], geqs: geqs.to_vec() });
                i += 1;
            }
        }
    }
    Elimination { shadow, splinters }
}

/// Single-variable bounds implied by constraints mentioning only `w`.
fn explicit_range(geqs: &[LinearTerm], w: VarId) -> (Option<BigInt>, Option<BigInt>) {
    let mut lo: Option<BigInt> = None;
    let mut hi: Option<BigInt> = None;
    for t in geqs {
        if t.coeffs().len() != 1 {
            continue;
        }
        let c = t.coeff(w);
        if c.is_zero() {
            continue;
        }
        let k = t.constant_part();
        if c.is_positive() {
            let v = ceil_div(&-k, &c);
            lo = Some(lo.map_or(v.clone(), |x| x.max(v)));
        } else {
            let v = floor_div(k, &-c);
            hi = Some(hi.map_or(v.clone(), |x| x.min(v)));
        }
    }
    (lo, hi)
}

/// How a variable would be eliminated, with its estimated case-split count.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Plan {
    /// Unit coefficients on one side (or a one-sided variable).
    Exact,
    /// Dark shadow plus this many splinters, on the lower (true) or upper side.
    Splinter { count: BigInt, lower_side: bool },
    /// Enumerate every value of an explicitly bounded variable.
    Enumerate { lo: BigInt, hi: BigInt },
}

impl Plan {
    fn cost(&self) -> BigInt {
        match self {
            Plan::Exact => BigInt::zero(),
            Plan::Splinter { count, .. } => count.clone(),
            Plan::Enumerate { lo, hi } => hi - lo + 1,
        }
    }
}

fn plan_for(geqs: &[LinearTerm], w: VarId) -> (Plan, usize) {
    let b = split_bounds(geqs, w);
    let pairings = b.lower.len() * b.upper.len();
    if b.lower.is_empty() || b.upper.is_empty() || is_exact(&b, w) {
        return (Plan::Exact, pairings);
    }
    let max_upper = b.upper.iter().map(|t| -t.coeff(w)).max().expect("nonempty");
    let max_lower = b.lower.iter().map(|t| t.coeff(w)).max().expect("nonempty");
    let count_side = |side: &[&LinearTerm], other_max: &BigInt, sign: i32| -> BigInt {
        side.iter()
            .map(|t| {
                let c: BigInt = t.coeff(w) * sign;
                (splinter_width(&c, other_max) + BigInt::one()).max(BigInt::zero())
            })
            .sum::<BigInt>()
    };
    let low = count_side(&b.lower, &max_upper, 1);
    let up = count_side(&b.upper, &max_lower, -1);
    let mut plan = if low <= up {
        Plan::Splinter { count: low, lower_side: true }
    } else {
        Plan::Splinter { count: up, lower_side: false }
    };
    if let (Some(lo), Some(hi)) = explicit_range(geqs, w) {
        if hi >= lo && &hi - &lo < plan.cost() {
            plan = Plan::Enumerate { lo, hi };
        }
    }
    (plan, pairings)
}

fn pick_variable(geqs: &[LinearTerm]) -> Option<(VarId, Plan)> {
    let mut vars: Vec<VarId> = geqs.iter().flat_map(|t| t.vars()).collect();
    vars.sort();
    vars.dedup();
    vars.into_iter()
        .map(|v| {
            let (plan, pairings) = plan_for(geqs, v);
            (plan.cost(), pairings, v, plan)
        })
        .min_by(|x, y| (&x.0, x.1, x.2).cmp(&(&y.0, y.1, y.2)))
        .map(|(_, _, v, plan)| (v, plan))
}

/// Deterministic elimination order: exact eliminations first, then fewest
/// estimated splinters, then fewest pairings, then lowest id. Computed
/// greedily by simulating real-shadow eliminations.
pub fn choose_elimination_order(system: &System) -> Vec<VarId> {
    let mut geqs = system.geqs.clone();
    // Equations count as two opposing inequations for ordering purposes.
    for e in &system.eqs {
        geqs.push(e.clone());
        geqs.push(e.neg());
    }
    let mut order = Vec::new();
    while let Some((v, _)) = pick_variable(&geqs) {
        order.push(v);
        geqs = simplify_geqs(eliminate_variable(v, &geqs, EliminationMode::Real).shadow)
            .map(|(g, _)| g)
            .unwrap_or_default();
    }
    order
}

/// Normalize, drop trivially true rows, keep the tightest of parallel rows and
/// turn tight opposing pairs into equations. `None` means a contradiction.
fn simplify_geqs(geqs: Vec<LinearTerm>) -> Option<(Vec<LinearTerm>, Vec<LinearTerm>)> {
    let mut by_coeffs: BTreeMap<BTreeMap<VarId, BigInt>, BigInt> = BTreeMap::new();
    for t in geqs {
        match normalize(t, Relation::Geq) {
            Normalized::True => {}
            Normalized::False => return None,
            Normalized::Constraint(c) => {
                let k = c.term.constant_part().clone();
                let key = c.term.coeffs().clone();
                by_coeffs
                    .entry(key)
                    .and_modify(|old| {
                        if k < *old {
                            *old = k.clone();
                        }
                    })
                    .or_insert(k);
            }
        }
    }
    let mut eqs = Vec::new();
    let mut out = Vec::new();
    let mut skip = std::collections::BTreeSet::new();
    for (coeffs, k) in &by_coeffs {
        if skip.contains(coeffs) {
            continue;
        }
        let neg: BTreeMap<VarId, BigInt> = coeffs.iter().map(|(v, c)| (*v, -c)).collect();
        if let Some(k2) = by_coeffs.get(&neg) {
            // k + t ≥ 0 and k2 − t ≥ 0  ⇒  −k ≤ t ≤ k2
            let sum = k + k2;
            if sum.is_negative() {
                return None;
            }
            if sum.is_zero() {
                skip.insert(neg);
                eqs.push(LinearTerm::from_parts(k.clone(), coeffs.clone()));
                continue;
            }
        }
        out.push(LinearTerm::from_parts(k.clone(), coeffs.clone()));
    }
    Some((out, eqs))
}

/// Satisfiability verdict of the exact procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Satisfiability {
    Sat,
    Unsat,
}

/// Step budget shared by a solver run.
#[derive(Clone, Debug)]
pub struct Budget {
    remaining: u64,
    used: u64,
}

/// Raised when a [`Budget`] runs out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("solver step budget exhausted")]
pub struct Exhausted;

impl Budget {
    pub fn new(steps: u64) -> Self {
        Budget { remaining: steps, used: 0 }
    }

    pub fn unlimited() -> Self {
        Budget::new(u64::MAX)
    }

    pub fn tick(&mut self) -> Result<(), Exhausted> {
        self.charge(1)
    }

    /// Spend `steps` at once; fails without spending if not enough remain.
    pub fn charge(&mut self, steps: u64) -> Result<(), Exhausted> {
        if self.remaining < steps {
            self.remaining = 0;
            return Err(Exhausted);
        }
        self.remaining -= steps;
        self.used += steps;
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }
}

/// Chooses a value in `[lo, hi]` (either side may be open) during labeling.
pub trait ValuePicker {
    fn pick(&mut self, var: VarId, lo: Option<&BigInt>, hi: Option<&BigInt>) -> BigInt;
}

/// Always the lowest admissible value (or the upper bound, or zero).
#[derive(Clone, Copy, Debug, Default)]
pub struct LowestPicker;

impl ValuePicker for LowestPicker {
    fn pick(&mut self, _var: VarId, lo: Option<&BigInt>, hi: Option<&BigInt>) -> BigInt {
        match (lo, hi) {
            (Some(l), _) => l.clone(),
            (None, Some(h)) => h.clone().min(BigInt::zero()),
            (None, None) => BigInt::zero(),
        }
    }
}

/// Uniformly random within closed ranges.
pub struct RandomPicker<'r, R: Rng> {
    pub rng: &'r mut R,
}

impl<R: Rng> ValuePicker for RandomPicker<'_, R> {
    fn pick(&mut self, _var: VarId, lo: Option<&BigInt>, hi: Option<&BigInt>) -> BigInt {
        match (lo, hi) {
            (Some(l), Some(h)) => sample_range(self.rng, l, h),
            (Some(l), None) => l.clone(),
            (None, Some(h)) => h.clone(),
            (None, None) => BigInt::zero(),
        }
    }
}

/// Uniform sample from `[lo, hi]`.
pub fn sample_range<R: Rng + ?Sized>(rng: &mut R, lo: &BigInt, hi: &BigInt) -> BigInt {
    let span = hi - lo;
    if span.is_negative() {
        return lo.clone();
    }
    if let Some(s) = span.to_u128() {
        let off = if s == u128::MAX { rng.gen::<u128>() } else { rng.gen_range(0..=s) };
        return lo + BigInt::from(off);
    }
    // Wider than 128 bits: build random digits and reduce.
    let digits = (span.bits() / 32 + 2) as usize;
    let mut acc = BigInt::zero();
    for _ in 0..digits {
        acc = (acc << 32) + BigInt::from(rng.gen::<u32>());
    }
    lo + acc.mod_floor(&(span + 1))
}

/// One labeling step: `var` was assigned `value` from the range `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RangePick {
    pub var: VarId,
    pub lo: Option<BigInt>,
    pub hi: Option<BigInt>,
    pub value: BigInt,
}

/// A model plus the range schedule that produced it, in labeling order.
#[derive(Clone, Debug, Default)]
pub struct Solution {
    pub model: Model,
    pub schedule: Vec<RangePick>,
}

struct Solver<'a> {
    budget: &'a mut Budget,
    picker: &'a mut dyn ValuePicker,
    next_param: u32,
    schedule: Vec<RangePick>,
}

impl Solver<'_> {
    fn fresh(&mut self) -> VarId {
        let v = VarId(self.next_param);
        self.next_param += 1;
        v
    }

    fn solve(&mut self, mut sys: System) -> Result<Option<Model>, Exhausted> {
        // One step per call plus one per row, so projections that blow up in
        // size drain the budget as fast as deep case splits do.
        self.budget.charge(1 + (sys.eqs.len() + sys.geqs.len()) as u64)?;
        let mut subst = Substitution::new();
        loop {
            while let Some(eq) = sys.eqs.pop() {
                let eq = subst.apply(&eq);
                let eq = match normalize(eq, Relation::Eq) {
                    Normalized::True => continue,
                    Normalized::False => return Ok(None),
                    Normalized::Constraint(c) => c.term,
                };
                let mut next = self.next_param;
                let s = eliminate_equality(&eq, &mut || {
                    let v = VarId(next);
                    next += 1;
                    v
                });
                self.next_param = next;
                for (v, t) in s.iter() {
                    for e in sys.eqs.iter_mut() {
                        e.substitute(*v, t);
                    }
                    for g in sys.geqs.iter_mut() {
                        g.substitute(*v, t);
                    }
                }
                subst.compose(&s);
            }
            match simplify_geqs(std::mem::take(&mut sys.geqs)) {
                None => return Ok(None),
                Some((geqs, eqs)) => {
                    sys.geqs = geqs;
                    if eqs.is_empty() {
                        break;
                    }
                    sys.eqs = eqs;
                }
            }
        }
        let mut model = match self.solve_geqs(sys.geqs)? {
            Some(m) => m,
            None => return Ok(None),
        };
        subst.extend_model(&mut model);
        Ok(Some(model))
    }

    /// `geqs` are simplified and free of equations.
    fn solve_geqs(&mut self, geqs: Vec<LinearTerm>) -> Result<Option<Model>, Exhausted> {
        let Some((w, plan)) = pick_variable(&geqs) else {
            return Ok(Some(Model::new()));
        };
        match plan {
            Plan::Exact => {
                let shadow = eliminate_variable(w, &geqs, EliminationMode::Real).shadow;
                match self.solve(System { eqs: vec![], geqs: shadow })? {
                    Some(m) => Ok(Some(self.extend(w, &geqs, m))),
                    None => Ok(None),
                }
            }
            Plan::Enumerate { lo, hi } => {
                let mut v = lo;
                while v <= hi {
                    let mut sub = System { eqs: vec![], geqs: geqs.clone() };
                    sub.eqs.push(LinearTerm::from_parts(-v.clone(), [(w, 1)]));
                    if let Some(m) = self.solve(sub)? {
                        return Ok(Some(m));
                    }
                    v += 1;
                }
                Ok(None)
            }
            Plan::Splinter { lower_side, .. } => {
                let real = eliminate_variable(w, &geqs, EliminationMode::Real).shadow;
                if self.solve(System { eqs: vec![], geqs: real })?.is_none() {
                    return Ok(None);
                }
                let dark = eliminate_variable(w, &geqs, EliminationMode::Dark).shadow;
                if let Some(m) = self.solve(System { eqs: vec![], geqs: dark })? {
                    return Ok(Some(self.extend(w, &geqs, m)));
                }
                // Splinters on the cheaper side; the upper side is the lower
                // side of the problem with `w` negated.
                let splinters = if lower_side {
                    eliminate_variable(w, &geqs, EliminationMode::Exact).splinters
                } else {
                    let neg = self.fresh();
                    let flipped: Vec<LinearTerm> = geqs
                        .iter()
                        .map(|t| {
                            let mut t = t.clone();
                            t.substitute(w, &LinearTerm::scaled_var(neg, -1));
                            t
                        })
                        .collect();
                    let back = LinearTerm::scaled_var(w, -1);
                    eliminate_variable(neg, &flipped, EliminationMode::Exact)
                        .splinters
                        .into_iter()
                        .map(|s| {
                            let undo = |t: &LinearTerm| {
                                let mut t = t.clone();
                                t.substitute(neg, &back);
                                t
                            };
                            System { eqs: s.eqs.iter().map(undo).collect(), geqs: geqs.clone() }
                        })
                        .collect()
                };
                for s in splinters {
                    if let Some(m) = self.solve(s)? {
                        return Ok(Some(m));
                    }
                }
                Ok(None)
            }
        }
    }

    /// Given a model of the projection, choose `w` inside its bounds.
    fn extend(&mut self, w: VarId, geqs: &[LinearTerm], mut model: Model) -> Model {
        for t in geqs {
            for v in t.vars() {
                if v != w {
                    model.entry(v).or_insert_with(BigInt::zero);
                }
            }
        }
        let mut lo: Option<BigInt> = None;
        let mut hi: Option<BigInt> = None;
        for t in geqs {
            let c = t.coeff(w);
            if c.is_zero() {
                continue;
            }
            let mut rest = t.clone();
            rest.take_coeff(w);
            let r = rest.eval(&model).expect("projection vars assigned");
            if c.is_positive() {
                let v = ceil_div(&-r, &c);
                lo = Some(lo.map_or(v.clone(), |x| x.max(v)));
            } else {
                let v = floor_div(&r, &-c);
                hi = Some(hi.map_or(v.clone(), |x| x.min(v)));
            }
        }
        debug_assert!(
            match (&lo, &hi) {
                (Some(l), Some(h)) => l <= h,
                _ => true,
            },
            "projection model does not extend"
        );
        let value = self.picker.pick(w, lo.as_ref(), hi.as_ref());
        self.schedule.push(RangePick { var: w, lo, hi, value: value.clone() });
        model.insert(w, value);
        model
    }
}

/// Find an integer model of `system`, choosing values through `picker`.
/// `Ok(None)` means the system is unsatisfiable.
pub fn find_model(
    system: &System,
    picker: &mut dyn ValuePicker,
    budget: &mut Budget,
) -> Result<Option<Solution>, Exhausted> {
    let first_param = system.max_var().map_or(0, |v| v.0 + 1);
    let mut solver = Solver { budget, picker, next_param: first_param, schedule: Vec::new() };
    let found = solver.solve(system.clone())?;
    Ok(found.map(|mut model| {
        // Keep only the caller's variables; default untouched ones to zero.
        model.retain(|v, _| v.0 < first_param);
        for v in system.vars() {
            model.entry(v).or_insert_with(BigInt::zero);
        }
        let schedule = solver.schedule.into_iter().filter(|p| p.var.0 < first_param).collect();
        Solution { model, schedule }
    }))
}

/// Complete decision for a conjunctive Presburger system.
pub fn satisfiable(system: &System) -> Satisfiability {
    satisfiable_within(system, &mut Budget::unlimited()).expect("unlimited budget")
}

pub fn satisfiable_within(system: &System, budget: &mut Budget) -> Result<Satisfiability, Exhausted> {
    Ok(match find_model(system, &mut LowestPicker, budget)? {
        Some(_) => Satisfiability::Sat,
        None => Satisfiability::Unsat,
    })
}

/// Labeling schedule: the `[lo, hi]` range exposed for each variable as values
/// are substituted back, in labeling order. `None` when unsatisfiable.
pub fn solution_ranges(system: &System, picker: &mut dyn ValuePicker) -> Option<Vec<RangePick>> {
    find_model(system, picker, &mut Budget::unlimited()).expect("unlimited budget").map(|s| s.schedule)
}
