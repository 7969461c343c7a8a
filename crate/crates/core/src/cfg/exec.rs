//! Concrete interpreter with fixed-width wraparound semantics.
//!
//! Every operation is evaluated at the join of its operand types (literals
//! adapt to the other side); operands are converted to that type first and
//! the result wraps modulo 2^w. `%` truncates toward zero like C.

use std::collections::BTreeMap;

use super::{BinOp, BoolExpr, Comparison, Expr, IntType, NodeId, Program, VarRole};

pub type Value = i128;

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("missing value for input `{0}`")]
    MissingInput(String),
    #[error("`{0}` is not an input variable")]
    UnknownInput(String),
    #[error("value {value} out of range for input `{name}`")]
    InputOutOfRange { name: String, value: Value },
    #[error("remainder by zero at node {0}")]
    DivisionByZero(NodeId),
    #[error("no enabled edge leaves node {0}")]
    Stuck(NodeId),
    #[error("more than one enabled edge leaves node {0}")]
    Nondeterministic(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecOutcome {
    Exited,
    StepLimit,
    Fault(ExecError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution {
    /// Visited nodes, starting at the entry.
    pub path: Vec<NodeId>,
    pub state: BTreeMap<String, Value>,
    pub outcome: ExecOutcome,
}

/// Step-wise interpreter. `step` runs the current node's statements and
/// moves along the single enabled edge.
pub struct Interpreter<'p> {
    program: &'p Program,
    state: BTreeMap<String, Value>,
    at: NodeId,
    path: Vec<NodeId>,
}

impl<'p> Interpreter<'p> {
    pub fn new(program: &'p Program, inputs: &BTreeMap<String, Value>) -> Result<Self, ExecError> {
        for name in inputs.keys() {
            match program.var(name) {
                Some(d) if d.role == VarRole::Input => {}
                _ => return Err(ExecError::UnknownInput(name.clone())),
            }
        }
        let mut state = BTreeMap::new();
        for d in &program.vars {
            let v = match d.role {
                VarRole::Input => {
                    let v = *inputs.get(&d.name).ok_or_else(|| ExecError::MissingInput(d.name.clone()))?;
                    if !d.ty.contains(v) {
                        return Err(ExecError::InputOutOfRange { name: d.name.clone(), value: v });
                    }
                    v
                }
                VarRole::Local => 0,
                VarRole::Const(c) => c,
            };
            state.insert(d.name.clone(), v);
        }
        Ok(Interpreter { program, state, at: program.entry, path: vec![program.entry] })
    }

    pub fn current(&self) -> NodeId {
        self.at
    }

    pub fn path(&self) -> &[NodeId] {
        &self.path
    }

    pub fn state(&self) -> &BTreeMap<String, Value> {
        &self.state
    }

    /// Execute the current node. Returns the successor, or `None` at an exit.
    pub fn step(&mut self) -> Result<Option<NodeId>, ExecError> {
        let node = &self.program.nodes[&self.at];
        for s in &node.statements {
            let (v, _) = self.eval(&s.value)?;
            let ty = self.program.var(&s.target).expect("validated").ty;
            self.state.insert(s.target.clone(), ty.wrap(v));
        }
        if self.program.is_exit(self.at) {
            return Ok(None);
        }
        let mut next = None;
        for (_, e) in self.program.outgoing(self.at) {
            let enabled = match &e.guard {
                None => true,
                Some(g) => self.eval_bool(g)?,
            };
            if enabled {
                if next.is_some() {
                    return Err(ExecError::Nondeterministic(self.at));
                }
                next = Some(e.to);
            }
        }
        let next = next.ok_or(ExecError::Stuck(self.at))?;
        self.at = next;
        self.path.push(next);
        Ok(Some(next))
    }

    /// Value and type of `e` in the current state.
    pub fn eval(&self, e: &Expr) -> Result<(Value, Option<IntType>), ExecError> {
        Ok(match e {
            Expr::Lit(v) => (*v, None),
            Expr::Var(n) => {
                let d = self.program.var(n).expect("validated");
                (self.state[n], Some(d.ty))
            }
            Expr::Neg(x) => {
                let (v, ty) = self.eval(x)?;
                (convert(v.wrapping_neg(), ty), ty)
            }
            Expr::Bin(op, l, r) => {
                let (lv, lt) = self.eval(l)?;
                let (rv, rt) = self.eval(r)?;
                let ty = IntType::join(lt, rt);
                let (lv, rv) = (convert(lv, ty), convert(rv, ty));
                let v = match op {
                    BinOp::Add => lv.wrapping_add(rv),
                    BinOp::Sub => lv.wrapping_sub(rv),
                    BinOp::Mul => lv.wrapping_mul(rv),
                    BinOp::Rem => {
                        if rv == 0 {
                            return Err(ExecError::DivisionByZero(self.at));
                        }
                        lv.wrapping_rem(rv)
                    }
                };
                (convert(v, ty), ty)
            }
        })
    }

    pub fn eval_cmp(&self, c: &Comparison) -> Result<bool, ExecError> {
        let (lv, lt) = self.eval(&c.lhs)?;
        let (rv, rt) = self.eval(&c.rhs)?;
        let ty = IntType::join(lt, rt);
        Ok(c.op.eval(convert(lv, ty), convert(rv, ty)))
    }

    pub fn eval_bool(&self, b: &BoolExpr) -> Result<bool, ExecError> {
        Ok(match b {
            BoolExpr::Cmp(c) => self.eval_cmp(c)?,
            BoolExpr::And(l, r) => self.eval_bool(l)? && self.eval_bool(r)?,
            BoolExpr::Or(l, r) => self.eval_bool(l)? || self.eval_bool(r)?,
            BoolExpr::Not(x) => !self.eval_bool(x)?,
        })
    }

    fn into_execution(self, outcome: ExecOutcome) -> Execution {
        Execution { path: self.path, state: self.state, outcome }
    }
}

fn convert(v: Value, ty: Option<IntType>) -> Value {
    ty.map_or(v, |t| t.wrap(v))
}

/// Run `program` on `inputs` until an exit, a runtime fault, or `step_limit`
/// node executions. Only malformed inputs are reported as `Err`.
pub fn execute_concrete(
    program: &Program,
    inputs: &BTreeMap<String, Value>,
    step_limit: u64,
) -> Result<Execution, ExecError> {
    let mut it = Interpreter::new(program, inputs)?;
    for _ in 0..step_limit {
        match it.step() {
            Ok(Some(_)) => {}
            Ok(None) => return Ok(it.into_execution(ExecOutcome::Exited)),
            Err(e) => return Ok(it.into_execution(ExecOutcome::Fault(e))),
        }
    }
    Ok(it.into_execution(ExecOutcome::StepLimit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::parse_program;

    fn run(src: &str, inputs: &[(&str, Value)]) -> Execution {
        let p = parse_program(src).unwrap();
        let inputs = inputs.iter().map(|(n, v)| (n.to_string(), *v)).collect();
        execute_concrete(&p, &inputs, DEFAULT_STEP_LIMIT).unwrap()
    }

    #[test]
    fn unsigned_wraps_and_truncated_remainder() {
        let e = run(
            "var a : u8 input; var b : u8 local; var c : i8 local;\n\
             node 1 { b := a - 3; c := -7 % 3; }\nentry 1; exit 1",
            &[("a", 1)],
        );
        assert_eq!(e.state["b"], 254);
        assert_eq!(e.state["c"], -1);
        assert_eq!(e.outcome, ExecOutcome::Exited);
    }

    #[test]
    fn mixed_signedness_compares_unsigned() {
        // i8 -1 joined with u8 becomes 255.
        let e = run(
            "var a : i8 input; var b : u8 input;\nnode 1 {} node 2 {} node 3 {}\n\
             edge 1 -> 2 when a > b; edge 1 -> 3 when a <= b;\nentry 1; exit 2, 3",
            &[("a", -1), ("b", 3)],
        );
        assert_eq!(e.path, vec![NodeId(1), NodeId(2)]);
    }

    #[test]
    fn faults_and_limits() {
        let src = "var a : u8 input; var b : u8 local;\nnode 1 { b := 5 % a; } node 2 {}\n\
                   edge 1 -> 2; entry 1; exit 2";
        let e = run(src, &[("a", 0)]);
        assert_eq!(e.outcome, ExecOutcome::Fault(ExecError::DivisionByZero(NodeId(1))));

        let p = parse_program(
            "var a : u8 input;\nnode 1 {} node 2 {}\nedge 1 -> 1 when a == a; edge 1 -> 2 when a != a;\nentry 1; exit 2",
        )
        .unwrap();
        let e = execute_concrete(&p, &BTreeMap::from([("a".into(), 1)]), 50).unwrap();
        assert_eq!(e.outcome, ExecOutcome::StepLimit);

        let err = execute_concrete(&p, &BTreeMap::from([("a".into(), 256)]), 50).unwrap_err();
        assert!(matches!(err, ExecError::InputOutOfRange { .. }));
    }
}
