//! SSA-versioned memory states and the translation of statements and guards
//! into arithmetic atoms over solver variables.
//!
//! Translation mirrors the concrete interpreter exactly: operands are brought
//! to the join type of the operation and results wrap modulo 2^w. A `Wrap`
//! atom is only emitted when the interval of the wrapped term (declared bounds,
//! optionally tightened by a [`BoundsHint`]) does not already fit the type.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::cfg::{to_nnf, Assign};
use crate::cfg::{BinOp, BoolExpr, CmpOp, Comparison, Expr, IntType, Program, VarRole};
use crate::interval::Interval;
use crate::term::{ceil_div, floor_div, Constraint, LinearTerm, Model, VarId};

/// Why an auxiliary variable exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AuxKind {
    Product,
    Quotient,
    Remainder,
    Wrapped,
    Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarOrigin {
    Program { name: String, version: u32 },
    Aux(AuxKind),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverVar {
    pub id: VarId,
    pub origin: VarOrigin,
    pub ty: Option<IntType>,
    /// Declared bounds; every solver variable is finitely bounded.
    pub bounds: Interval,
}

impl fmt::Display for SolverVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            VarOrigin::Program { name, version } => write!(f, "{name}#{version}"),
            VarOrigin::Aux(k) => write!(f, "{k:?}#{}", self.id.0),
        }
    }
}

/// All solver variables of one generation session; ids are never reused.
#[derive(Clone, Debug, Default)]
pub struct VarTable {
    vars: Vec<SolverVar>,
    versions: BTreeMap<String, u32>,
}

pub fn type_interval(ty: IntType) -> Interval {
    Interval::new(ty.min_value(), ty.max_value())
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, v: VarId) -> &SolverVar {
        &self.vars[v.0 as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &SolverVar> {
        self.vars.iter()
    }

    fn push(&mut self, origin: VarOrigin, ty: Option<IntType>, bounds: Interval) -> VarId {
        let id = VarId(u32::try_from(self.vars.len()).expect("variable ids exhausted"));
        self.vars.push(SolverVar { id, origin, ty, bounds });
        id
    }

    /// Next SSA version of program variable `name`.
    pub fn fresh_version(&mut self, name: &str, ty: IntType) -> VarId {
        let slot = self.versions.entry(name.to_string()).or_insert(0);
        let version = *slot;
        *slot += 1;
        self.push(VarOrigin::Program { name: name.to_string(), version }, Some(ty), type_interval(ty))
    }

    pub fn fresh_aux(&mut self, kind: AuxKind, bounds: Interval) -> VarId {
        self.push(VarOrigin::Aux(kind), None, bounds)
    }
}

/// Mapping from program variables to their current solver variable.
/// Constants are not part of the state; they translate to literals.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemoryState {
    map: BTreeMap<String, VarId>,
}

impl MemoryState {
    /// A state in which every non-constant variable has a fresh version.
    pub fn fresh(program: &Program, vars: &mut VarTable) -> Self {
        let map = program
            .vars
            .iter()
            .filter(|d| !matches!(d.role, VarRole::Const(_)))
            .map(|d| (d.name.clone(), vars.fresh_version(&d.name, d.ty)))
            .collect();
        MemoryState { map }
    }

    pub fn get(&self, name: &str) -> Option<VarId> {
        self.map.get(name).copied()
    }

    pub fn with(&self, name: &str, v: VarId) -> Self {
        let mut s = self.clone();
        s.map.insert(name.to_string(), v);
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, VarId)> {
        self.map.iter().map(|(n, v)| (n.as_str(), *v))
    }

    /// Equations identifying two states variable by variable.
    pub fn unify(&self, other: &MemoryState) -> Vec<Atom> {
        self.map
            .iter()
            .filter_map(|(n, a)| {
                let b = other.map[n];
                (*a != b).then(|| Atom::LinearEq(LinearTerm::var(*a).sub(&LinearTerm::var(b))))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Divisor {
    Const(BigInt),
    /// Variable divisor `m`; `qm` carries the product `q·m`.
    Var {
        m: VarId,
        qm: VarId,
    },
}

/// Constraint atoms produced by translation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    LinearEq(LinearTerm),
    LinearGeq(LinearTerm),
    /// `z = x·y`
    Product {
        z: VarId,
        x: VarId,
        y: VarId,
    },
    /// `z = dividend rem divisor` (truncated), with `dividend = q·divisor + z`.
    Remainder {
        z: VarId,
        dividend: LinearTerm,
        divisor: Divisor,
        q: VarId,
    },
    /// `y = value mod 2^w` into `ty`'s range, with `value = q·2^w + y`.
    Wrap {
        y: VarId,
        value: LinearTerm,
        q: VarId,
        ty: IntType,
    },
}

impl Atom {
    pub fn geq(t: LinearTerm) -> Atom {
        Atom::LinearGeq(t)
    }

    pub fn eq(t: LinearTerm) -> Atom {
        Atom::LinearEq(t)
    }

    /// Evaluate under `model`; `None` if a variable is unassigned.
    pub fn holds(&self, model: &Model) -> Option<bool> {
        let val = |v: &VarId| model.get(v).cloned();
        Some(match self {
            Atom::LinearEq(t) => t.eval(model)?.is_zero(),
            Atom::LinearGeq(t) => !t.eval(model)?.is_negative(),
            Atom::Product { z, x, y } => val(z)? == val(x)? * val(y)?,
            Atom::Remainder { z, dividend, divisor, q } => {
                let x = dividend.eval(model)?;
                let (z, q) = (val(z)?, val(q)?);
                let m = match divisor {
                    Divisor::Const(d) => d.clone(),
                    Divisor::Var { m, qm } => {
                        let m = val(m)?;
                        if val(qm)? != &q * &m {
                            return Some(false);
                        }
                        m
                    }
                };
                !m.is_zero() && z == &x % &m && x == q * &m + &z
            }
            Atom::Wrap { y, value, q, ty } => {
                let x = value.eval(model)?;
                let (y, q) = (val(y)?, val(q)?);
                y == wrap_big(*ty, &x) && x == q * ty.modulus() + y
            }
        })
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = match self {
            Atom::LinearEq(t) | Atom::LinearGeq(t) => t.vars().collect(),
            Atom::Product { z, x, y } => vec![*z, *x, *y],
            Atom::Remainder { z, dividend, divisor, q } => {
                let mut v: Vec<VarId> = dividend.vars().collect();
                v.extend([*z, *q]);
                if let Divisor::Var { m, qm } = divisor {
                    v.extend([*m, *qm]);
                }
                v
            }
            Atom::Wrap { y, value, q, .. } => {
                let mut v: Vec<VarId> = value.vars().collect();
                v.extend([*y, *q]);
                v
            }
        };
        out.sort();
        out.dedup();
        out
    }

    /// Presburger expansion: linear constraints plus products `(z, x, y)`.
    /// Together with the range of the result variable it is exact.
    pub fn expand(&self) -> (Vec<Constraint>, Vec<(VarId, VarId, VarId)>) {
        match self {
            Atom::LinearEq(t) => (vec![Constraint::eq(t.clone())], vec![]),
            Atom::LinearGeq(t) => (vec![Constraint::geq(t.clone())], vec![]),
            Atom::Product { z, x, y } => (vec![], vec![(*z, *x, *y)]),
            Atom::Remainder { z, dividend, divisor, q } => {
                let mut t = dividend.sub(&LinearTerm::var(*z));
                match divisor {
                    Divisor::Const(d) => {
                        t.add_coeff(*q, -d);
                        (vec![Constraint::eq(t)], vec![])
                    }
                    Divisor::Var { m, qm } => {
                        t.add_coeff(*qm, BigInt::from(-1));
                        (vec![Constraint::eq(t)], vec![(*qm, *q, *m)])
                    }
                }
            }
            Atom::Wrap { y, value, q, ty } => {
                let mut t = value.sub(&LinearTerm::var(*y));
                t.add_coeff(*q, -ty.modulus());
                (vec![Constraint::eq(t)], vec![])
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::LinearEq(t) => write!(f, "{t} = 0"),
            Atom::LinearGeq(t) => write!(f, "{t} >= 0"),
            Atom::Product { z, x, y } => write!(f, "{z} = {x} * {y}"),
            Atom::Remainder { z, dividend, divisor, q } => match divisor {
                Divisor::Const(d) => write!(f, "{z} = ({dividend}) rem {d} [q {q}]"),
                Divisor::Var { m, .. } => write!(f, "{z} = ({dividend}) rem {m} [q {q}]"),
            },
            Atom::Wrap { y, value, q, ty } => write!(f, "{y} = ({value}) as {ty} [q {q}]"),
        }
    }
}

/// `v` reduced into `ty`'s range modulo 2^w.
pub fn wrap_big(ty: IntType, v: &BigInt) -> BigInt {
    let m = ty.modulus();
    let r = v.mod_floor(&m);
    if r > BigInt::from(ty.max_value()) {
        r - m
    } else {
        r
    }
}

/// Bit-width bounds of `v` as inequations.
pub fn range_atoms(v: &SolverVar) -> Vec<Atom> {
    let x = LinearTerm::var(v.id);
    let (lo, hi) = match v.ty {
        Some(ty) => (BigInt::from(ty.min_value()), BigInt::from(ty.max_value())),
        None => (v.bounds.lo.clone(), v.bounds.hi.clone()),
    };
    vec![Atom::geq(x.sub(&LinearTerm::constant(lo))), Atom::geq(LinearTerm::constant(hi).sub(&x))]
}

/// Optional tighter bounds than the declared ones, e.g. from a store.
pub trait BoundsHint {
    fn hint(&self, v: VarId) -> Option<Interval>;
}

/// Only declared bounds.
pub struct NoHints;

impl BoundsHint for NoHints {
    fn hint(&self, _v: VarId) -> Option<Interval> {
        None
    }
}

/// Atoms that must all hold, plus choice points of which exactly one
/// alternative per entry is selected.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Emission {
    pub atoms: Vec<Atom>,
    pub choices: Vec<Vec<Vec<Atom>>>,
}

impl Emission {
    pub fn extend(&mut self, other: Emission) {
        self.atoms.extend(other.atoms);
        self.choices.extend(other.choices);
    }

    /// A choice point with no alternative: the translated code cannot run.
    pub fn is_infeasible(&self) -> bool {
        self.choices.iter().any(|c| c.is_empty())
    }

    /// Every way of resolving the choice points, as flat atom lists.
    pub fn options(&self) -> Vec<Vec<Atom>> {
        let mut out = vec![self.atoms.clone()];
        for choice in &self.choices {
            out = out
                .iter()
                .flat_map(|base| {
                    choice.iter().map(move |alt| {
                        let mut o = base.clone();
                        o.extend(alt.iter().cloned());
                        o
                    })
                })
                .collect();
        }
        out
    }
}

type Typed = (LinearTerm, Option<IntType>);

/// Translation context for one program and variable table.
pub struct SymExec<'a> {
    pub program: &'a Program,
    pub vars: &'a mut VarTable,
    pub hints: &'a dyn BoundsHint,
}

impl<'a> SymExec<'a> {
    pub fn new(program: &'a Program, vars: &'a mut VarTable, hints: &'a dyn BoundsHint) -> Self {
        SymExec { program, vars, hints }
    }

    fn var_interval(&self, v: VarId) -> Interval {
        let declared = &self.vars.get(v).bounds;
        match self.hints.hint(v) {
            Some(h) => declared.meet(&h).unwrap_or_else(|_| declared.clone()),
            None => declared.clone(),
        }
    }

    pub fn interval(&self, t: &LinearTerm) -> Interval {
        let mut lo = t.constant_part().clone();
        let mut hi = lo.clone();
        for (v, c) in t.coeffs() {
            let iv = self.var_interval(*v);
            let (a, b) = (c * &iv.lo, c * &iv.hi);
            if a <= b {
                lo += a;
                hi += b;
            } else {
                lo += b;
                hi += a;
            }
        }
        Interval::new(lo, hi)
    }

    /// Forward: `stmt` executed in `state`; the target gets a fresh version.
    pub fn translate_assign(&mut self, state: &MemoryState, stmt: &Assign) -> (MemoryState, Emission) {
        let ty = self.program.var(&stmt.target).expect("validated").ty;
        let target = self.vars.fresh_version(&stmt.target, ty);
        let em = self.translate_assign_into(state, stmt, target);
        (state.with(&stmt.target, target), em)
    }

    /// `stmt` executed in `state`, its result constrained into `target`.
    pub fn translate_assign_into(&mut self, state: &MemoryState, stmt: &Assign, target: VarId) -> Emission {
        let ty = self.program.var(&stmt.target).expect("validated").ty;
        let mut em = Emission::default();
        let (t, from) = self.expr(state, &stmt.value, &mut em);
        let t = self.convert(t, from, Some(ty), &mut em);
        em.atoms.push(Atom::eq(LinearTerm::var(target).sub(&t)));
        em
    }

    /// Backward: given the state after `statements`, produce the state before
    /// them (assigned variables get fresh versions) and their atoms.
    pub fn translate_block_backward(&mut self, after: &MemoryState, statements: &[Assign]) -> (MemoryState, Emission) {
        let mut state = after.clone();
        let mut em = Emission::default();
        for stmt in statements.iter().rev() {
            let target = state.get(&stmt.target).expect("state covers variables");
            let ty = self.program.var(&stmt.target).expect("validated").ty;
            let before = state.with(&stmt.target, self.vars.fresh_version(&stmt.target, ty));
            em.extend(self.translate_assign_into(&before, stmt, target));
            state = before;
        }
        (state, em)
    }

    pub fn translate_block(&mut self, before: &MemoryState, statements: &[Assign]) -> (MemoryState, Emission) {
        let mut state = before.clone();
        let mut em = Emission::default();
        for stmt in statements {
            let (s, e) = self.translate_assign(&state, stmt);
            em.extend(e);
            state = s;
        }
        (state, em)
    }

    /// A single comparison; `!=` becomes a two-way choice.
    pub fn translate_guard(&mut self, state: &MemoryState, cmp: &Comparison) -> Emission {
        let mut em = Emission::default();
        let (l, lt) = self.expr(state, &cmp.lhs, &mut em);
        let (r, rt) = self.expr(state, &cmp.rhs, &mut em);
        let ty = IntType::join(lt, rt);
        let l = self.convert(l, lt, ty, &mut em);
        let r = self.convert(r, rt, ty, &mut em);
        let one = LinearTerm::constant(1);
        let l_minus_r = l.sub(&r);
        let r_minus_l = r.sub(&l);
        match cmp.op {
            CmpOp::Lt => em.atoms.push(Atom::geq(r_minus_l.sub(&one))),
            CmpOp::Le => em.atoms.push(Atom::geq(r_minus_l)),
            CmpOp::Eq => em.atoms.push(Atom::eq(l_minus_r)),
            CmpOp::Ge => em.atoms.push(Atom::geq(l_minus_r)),
            CmpOp::Gt => em.atoms.push(Atom::geq(l_minus_r.sub(&one))),
            CmpOp::Ne => {
                em.choices.push(vec![vec![Atom::geq(l_minus_r.sub(&one))], vec![Atom::geq(r_minus_l.sub(&one))]])
            }
        }
        em
    }

    /// Arbitrary boolean condition, as the list of atom sets of which one
    /// must hold (disjunctive normal form with choices expanded).
    pub fn translate_condition(&mut self, state: &MemoryState, b: &BoolExpr) -> Vec<Vec<Atom>> {
        dnf(&to_nnf(b))
            .into_iter()
            .flat_map(|conj| {
                let mut em = Emission::default();
                for c in conj {
                    em.extend(self.translate_guard(state, &c));
                }
                em.options()
            })
            .collect()
    }

    fn expr(&mut self, state: &MemoryState, e: &Expr, em: &mut Emission) -> Typed {
        match e {
            Expr::Lit(v) => (LinearTerm::constant(*v), None),
            Expr::Var(n) => {
                let d = self.program.var(n).expect("validated");
                match d.role {
                    VarRole::Const(c) => (LinearTerm::constant(c), Some(d.ty)),
                    _ => (LinearTerm::var(state.get(n).expect("state covers variables")), Some(d.ty)),
                }
            }
            Expr::Neg(x) => {
                let (t, ty) = self.expr(state, x, em);
                let t = t.neg();
                (self.convert(t, None, ty, em), ty)
            }
            Expr::Bin(op, l, r) => {
                let (l, lt) = self.expr(state, l, em);
                let (r, rt) = self.expr(state, r, em);
                let ty = IntType::join(lt, rt);
                let l = self.convert(l, lt, ty, em);
                let r = self.convert(r, rt, ty, em);
                let raw = match op {
                    BinOp::Add => l.add(&r),
                    BinOp::Sub => l.sub(&r),
                    BinOp::Mul => self.mul(l, r, em),
                    BinOp::Rem => match self.rem(l, r, em) {
                        Some(t) => t,
                        None => return (LinearTerm::zero(), ty),
                    },
                };
                (self.convert(raw, None, ty, em), ty)
            }
        }
    }

    /// Bring `t` (a value of type `from`) into type `to`.
    fn convert(&mut self, t: LinearTerm, from: Option<IntType>, to: Option<IntType>, em: &mut Emission) -> LinearTerm {
        let Some(ty) = to else { return t };
        if from == Some(ty) {
            return t;
        }
        if t.is_constant() {
            return LinearTerm::constant(wrap_big(ty, t.constant_part()));
        }
        let iv = self.interval(&t);
        if iv.is_subset_of(&type_interval(ty)) {
            return t;
        }
        let y_iv = type_interval(ty);
        let m = ty.modulus();
        let q_iv = Interval::new(ceil_div(&(&iv.lo - &y_iv.hi), &m), floor_div(&(&iv.hi - &y_iv.lo), &m));
        let y = self.vars.fresh_aux(AuxKind::Wrapped, y_iv);
        let q = self.vars.fresh_aux(AuxKind::Quotient, q_iv);
        em.atoms.push(Atom::Wrap { y, value: t, q, ty });
        LinearTerm::var(y)
    }

    /// `t` as a single variable, introducing an alias when needed.
    fn as_var(&mut self, t: LinearTerm, em: &mut Emission) -> VarId {
        if let Some(v) = t.as_var() {
            return v;
        }
        let iv = self.interval(&t);
        let v = self.vars.fresh_aux(AuxKind::Term, iv);
        em.atoms.push(Atom::eq(LinearTerm::var(v).sub(&t)));
        v
    }

    fn mul(&mut self, l: LinearTerm, r: LinearTerm, em: &mut Emission) -> LinearTerm {
        if l.is_constant() {
            return r.scale(l.constant_part());
        }
        if r.is_constant() {
            return l.scale(r.constant_part());
        }
        let x = self.as_var(l, em);
        let y = self.as_var(r, em);
        let z_iv = self.var_interval(x).mul(&self.var_interval(y));
        let z = self.vars.fresh_aux(AuxKind::Product, z_iv);
        em.atoms.push(Atom::Product { z, x, y });
        LinearTerm::var(z)
    }

    /// `None` when the divisor is the constant zero (the code traps).
    fn rem(&mut self, l: LinearTerm, r: LinearTerm, em: &mut Emission) -> Option<LinearTerm> {
        let zero = BigInt::zero();
        if r.is_constant() && r.constant_part().is_zero() {
            em.choices.push(vec![]);
            return None;
        }
        if l.is_constant() && r.is_constant() {
            return Some(LinearTerm::constant(l.constant_part() % r.constant_part()));
        }
        let x_iv = self.interval(&l);
        let x_abs = x_iv.lo.abs().max(x_iv.hi.abs());
        // Possible divisor signs, with the divisor as a term.
        let (divisor_term, m_iv) = if r.is_constant() {
            (r.clone(), Interval::point(r.constant_part().clone()))
        } else {
            let m = self.as_var(r.clone(), em);
            (LinearTerm::var(m), self.var_interval(m))
        };
        let m_abs_max = m_iv.lo.abs().max(m_iv.hi.abs());
        let m_abs_min = if m_iv.contains(&zero) { BigInt::from(1) } else { m_iv.lo.abs().min(m_iv.hi.abs()) };
        let b: BigInt = &m_abs_max - 1;
        let neg_b: BigInt = -&b;
        let z_lo = neg_b.max(x_iv.lo.clone().min(zero.clone()));
        let z_hi = b.min(x_iv.hi.clone().max(zero.clone()));
        let z_iv = Interval::new(z_lo, z_hi);
        let q_bound = &x_abs / &m_abs_min;
        let q_iv = Interval::new(-&q_bound, q_bound.clone());
        let z = self.vars.fresh_aux(AuxKind::Remainder, z_iv);
        let q = self.vars.fresh_aux(AuxKind::Quotient, q_iv.clone());
        let divisor = if r.is_constant() {
            Divisor::Const(r.constant_part().clone())
        } else {
            let m = divisor_term.as_var().expect("divisor is a variable");
            let qm = self.vars.fresh_aux(AuxKind::Product, q_iv.mul(&m_iv));
            Divisor::Var { m, qm }
        };
        em.atoms.push(Atom::Remainder { z, dividend: l.clone(), divisor, q });
        // Sign cases of truncated division: the remainder takes the sign of
        // the dividend and is smaller in magnitude than the divisor.
        let zt = LinearTerm::var(z);
        let one = LinearTerm::constant(1);
        let mut alternatives = Vec::new();
        for x_nonneg in [true, false] {
            if (x_nonneg && x_iv.hi.is_negative()) || (!x_nonneg && !x_iv.lo.is_negative()) {
                continue;
            }
            for m_pos in [true, false] {
                if (m_pos && m_iv.hi < BigInt::from(1)) || (!m_pos && m_iv.lo > BigInt::from(-1)) {
                    continue;
                }
                let mut alt = Vec::new();
                if !l.is_constant() {
                    alt.push(Atom::geq(if x_nonneg { l.clone() } else { l.neg().sub(&one) }));
                }
                if !r.is_constant() {
                    alt.push(Atom::geq(if m_pos { divisor_term.sub(&one) } else { divisor_term.neg().sub(&one) }));
                }
                let abs_m = if m_pos { divisor_term.clone() } else { divisor_term.neg() };
                if x_nonneg {
                    // 0 ≤ z ≤ |m| − 1
                    alt.push(Atom::geq(zt.clone()));
                    alt.push(Atom::geq(abs_m.sub(&zt).sub(&one)));
                } else {
                    // −(|m| − 1) ≤ z ≤ 0
                    alt.push(Atom::geq(zt.neg()));
                    alt.push(Atom::geq(abs_m.add(&zt).sub(&one)));
                }
                alternatives.push(alt);
            }
        }
        em.choices.push(alternatives);
        Some(zt)
    }
}

/// Disjunctive normal form of an NNF condition.
fn dnf(b: &BoolExpr) -> Vec<Vec<Comparison>> {
    match b {
        BoolExpr::Cmp(c) => vec![vec![c.clone()]],
        BoolExpr::Or(l, r) => {
            let mut out = dnf(l);
            out.extend(dnf(r));
            out
        }
        BoolExpr::And(l, r) => {
            let (ls, rs) = (dnf(l), dnf(r));
            ls.iter()
                .flat_map(|a| {
                    rs.iter().map(move |b| {
                        let mut c = a.clone();
                        c.extend(b.iter().cloned());
                        c
                    })
                })
                .collect()
        }
        BoolExpr::Not(_) => unreachable!("condition is in NNF"),
    }
}
