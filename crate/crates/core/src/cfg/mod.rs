//! Program representation: control-flow graphs over bounded integer variables,
//! with statements on nodes and guards on edges.

mod exec;
mod expand;
mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;

pub use exec::{execute_concrete, ExecError, ExecOutcome, Execution, Interpreter, Value, DEFAULT_STEP_LIMIT};
pub use expand::{expand_short_circuit, to_nnf};
pub use parse::{parse_bool_expr, parse_program};

/// Node identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed-width integer type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntType {
    pub signed: bool,
    pub bits: u8,
}

impl IntType {
    pub const fn new(signed: bool, bits: u8) -> Self {
        IntType { signed, bits }
    }

    pub fn is_valid_width(bits: u32) -> bool {
        matches!(bits, 8 | 16 | 32 | 64)
    }

    pub fn min_value(&self) -> i128 {
        if self.signed {
            -(1i128 << (self.bits - 1))
        } else {
            0
        }
    }

    pub fn max_value(&self) -> i128 {
        if self.signed {
            (1i128 << (self.bits - 1)) - 1
        } else {
            (1i128 << self.bits) - 1
        }
    }

    pub fn contains(&self, v: i128) -> bool {
        self.min_value() <= v && v <= self.max_value()
    }

    pub fn modulus(&self) -> BigInt {
        BigInt::one() << self.bits
    }

    /// Reduce `v` (taken mod 2^128) into this type's range.
    pub fn wrap(&self, v: i128) -> i128 {
        let m = 1u128 << self.bits;
        let r = (v as u128) & (m - 1);
        if self.signed && r > self.max_value() as u128 {
            r as i128 - m as i128
        } else {
            r as i128
        }
    }

    /// Type of a binary operation: the wider operand, unsigned on equal width.
    pub fn join(a: Option<IntType>, b: Option<IntType>) -> Option<IntType> {
        match (a, b) {
            (None, t) | (t, None) => t,
            (Some(x), Some(y)) => Some(if x.bits != y.bits {
                if x.bits > y.bits {
                    x
                } else {
                    y
                }
            } else {
                IntType::new(x.signed && y.signed, x.bits)
            }),
        }
    }
}

impl fmt::Display for IntType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.signed { 'i' } else { 'u' }, self.bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarRole {
    Input,
    Local,
    Const(i128),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: IntType,
    pub role: VarRole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Rem,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Lit(i128),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(e) => e.vars(out),
            Expr::Bin(_, l, r) => {
                l.vars(out);
                r.vars(out);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    /// Relation complement: `!(a < b)` is `a >= b`.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    pub fn eval(self, l: i128, r: i128) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            CmpOp::Ge => l >= r,
            CmpOp::Gt => l > r,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// A single comparison `lhs op rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub op: CmpOp,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Comparison {
    pub fn negate(&self) -> Comparison {
        Comparison { op: self.op.negate(), lhs: self.lhs.clone(), rhs: self.rhs.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoolExpr {
    Cmp(Comparison),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
}

impl BoolExpr {
    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> BoolExpr {
        BoolExpr::Cmp(Comparison { op, lhs, rhs })
    }

    pub fn as_comparison(&self) -> Option<&Comparison> {
        match self {
            BoolExpr::Cmp(c) => Some(c),
            _ => None,
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            BoolExpr::Cmp(c) => {
                c.lhs.vars(out);
                c.rhs.vars(out);
            }
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            BoolExpr::Not(a) => a.vars(out),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assign {
    pub target: String,
    pub value: Expr,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Node {
    pub statements: Vec<Assign>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    /// `None` is trivially true.
    pub guard: Option<BoolExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub nodes: BTreeMap<NodeId, Node>,
    pub edges: Vec<Edge>,
    pub entry: NodeId,
    pub exits: Vec<NodeId>,
}

/// Load or validation failure.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CfgError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
    #[error("invalid program: {0}")]
    Invalid(String),
}

impl Program {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &VarDecl> {
        self.vars.iter().filter(|v| v.role == VarRole::Input)
    }

    pub fn outgoing(&self, n: NodeId) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.from == n)
    }

    pub fn incoming(&self, n: NodeId) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.to == n)
    }

    pub fn is_exit(&self, n: NodeId) -> bool {
        self.exits.contains(&n)
    }

    /// Static type of `e`; `None` for literal-only expressions.
    pub fn expr_type(&self, e: &Expr) -> Option<IntType> {
        match e {
            Expr::Lit(_) => None,
            Expr::Var(n) => self.var(n).map(|d| d.ty),
            Expr::Neg(x) => self.expr_type(x),
            Expr::Bin(_, l, r) => IntType::join(self.expr_type(l), self.expr_type(r)),
        }
    }

    /// Nodes reachable from the entry.
    pub fn reachable(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([self.entry]);
        let mut queue = VecDeque::from([self.entry]);
        while let Some(n) = queue.pop_front() {
            for (_, e) in self.outgoing(n) {
                if seen.insert(e.to) {
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<(), CfgError> {
        let invalid = |m: String| Err(CfgError::Invalid(m));
        let mut names = BTreeSet::new();
        for v in &self.vars {
            if !names.insert(v.name.as_str()) {
                return invalid(format!("duplicate variable `{}`", v.name));
            }
            if !IntType::is_valid_width(v.ty.bits as u32) {
                return invalid(format!("bad width for `{}`", v.name));
            }
            if let VarRole::Const(c) = v.role {
                if !v.ty.contains(c) {
                    return invalid(format!("constant `{}` = {c} out of range for {}", v.name, v.ty));
                }
            }
        }
        let check_vars = |used: BTreeSet<String>| -> Result<(), CfgError> {
            match used.into_iter().find(|n| self.var(n).is_none()) {
                Some(n) => invalid(format!("undeclared variable `{n}`")),
                None => Ok(()),
            }
        };
        for (id, node) in &self.nodes {
            if id.0 == 0 {
                return invalid("node ids must be positive".into());
            }
            for s in &node.statements {
                match self.var(&s.target) {
                    None => return invalid(format!("undeclared variable `{}`", s.target)),
                    Some(d) if matches!(d.role, VarRole::Const(_)) => {
                        return invalid(format!("assignment to constant `{}`", s.target))
                    }
                    _ => {}
                }
                let mut used = BTreeSet::new();
                s.value.vars(&mut used);
                check_vars(used)?;
            }
        }
        for e in &self.edges {
            for end in [e.from, e.to] {
                if !self.nodes.contains_key(&end) {
                    return invalid(format!("edge {} -> {} references unknown node {end}", e.from, e.to));
                }
            }
            if let Some(g) = &e.guard {
                let mut used = BTreeSet::new();
                g.vars(&mut used);
                check_vars(used)?;
            }
        }
        if !self.nodes.contains_key(&self.entry) {
            return invalid(format!("entry node {} does not exist", self.entry));
        }
        if self.exits.is_empty() {
            return invalid("no exit node".into());
        }
        for x in &self.exits {
            if !self.nodes.contains_key(x) {
                return invalid(format!("exit node {x} does not exist"));
            }
            if self.outgoing(*x).next().is_some() {
                return invalid(format!("exit node {x} has outgoing edges"));
            }
        }
        for id in self.nodes.keys() {
            if !self.is_exit(*id) && self.outgoing(*id).next().is_none() {
                return invalid(format!("node {id} is not an exit but has no outgoing edge"));
            }
        }
        let reach = self.reachable();
        if let Some(n) = self.nodes.keys().find(|n| !reach.contains(n)) {
            return invalid(format!("node {n} is unreachable from the entry"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_semantics() {
        let u8t = IntType::new(false, 8);
        let i8t = IntType::new(true, 8);
        assert_eq!(u8t.wrap(256), 0);
        assert_eq!(u8t.wrap(-1), 255);
        assert_eq!(i8t.wrap(128), -128);
        assert_eq!(i8t.wrap(-129), 127);
        let u64t = IntType::new(false, 64);
        assert_eq!(u64t.wrap(-1), u64::MAX as i128);
    }

    #[test]
    fn join_rules() {
        let u8t = Some(IntType::new(false, 8));
        let i8t = Some(IntType::new(true, 8));
        let i32t = Some(IntType::new(true, 32));
        assert_eq!(IntType::join(u8t, i8t), u8t);
        assert_eq!(IntType::join(u8t, i32t), i32t);
        assert_eq!(IntType::join(None, i8t), i8t);
        assert_eq!(IntType::join(None, None), None);
    }
}
