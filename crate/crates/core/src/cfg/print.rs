//! Text form of programs; `parse_program` reads back what `Display` writes.

use std::fmt;

use super::{BinOp, BoolExpr, Comparison, Expr, Program, VarRole};

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Rem, ..) => 2,
        Expr::Lit(_) | Expr::Var(_) | Expr::Neg(_) => 3,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    let parens = expr_prec(e) < min_prec;
    if parens {
        f.write_str("(")?;
    }
    match e {
        Expr::Lit(v) => write!(f, "{v}")?,
        Expr::Var(n) => f.write_str(n)?,
        Expr::Neg(x) => {
            f.write_str("-(")?;
            write_expr(f, x, 0)?;
            f.write_str(")")?;
        }
        Expr::Bin(op, l, r) => {
            let p = expr_prec(e);
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Rem => "%",
            };
            write_expr(f, l, p)?;
            write!(f, " {sym} ")?;
            write_expr(f, r, p + 1)?;
        }
    }
    if parens {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

fn bool_prec(b: &BoolExpr) -> u8 {
    match b {
        BoolExpr::Or(..) => 1,
        BoolExpr::And(..) => 2,
        BoolExpr::Cmp(_) | BoolExpr::Not(_) => 3,
    }
}

fn write_bool(f: &mut fmt::Formatter<'_>, b: &BoolExpr, min_prec: u8) -> fmt::Result {
    let parens = bool_prec(b) < min_prec;
    if parens {
        f.write_str("(")?;
    }
    match b {
        BoolExpr::Cmp(c) => write!(f, "{c}")?,
        BoolExpr::Not(x) => {
            f.write_str("!(")?;
            write_bool(f, x, 0)?;
            f.write_str(")")?;
        }
        BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
            let p = bool_prec(b);
            write_bool(f, l, p)?;
            f.write_str(if p == 1 { " || " } else { " && " })?;
            write_bool(f, r, p + 1)?;
        }
    }
    if parens {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bool(f, self, 0)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.vars {
            let role = match v.role {
                VarRole::Input => "input".to_string(),
                VarRole::Local => "local".to_string(),
                VarRole::Const(c) => format!("const {c}"),
            };
            writeln!(f, "var {} : {} {};", v.name, v.ty, role)?;
        }
        for (id, node) in &self.nodes {
            write!(f, "node {id} {{")?;
            for s in &node.statements {
                write!(f, " {} := {};", s.target, s.value)?;
            }
            if !node.statements.is_empty() {
                f.write_str(" ")?;
            }
            writeln!(f, "}}")?;
        }
        for e in &self.edges {
            write!(f, "edge {} -> {}", e.from, e.to)?;
            if let Some(g) = &e.guard {
                write!(f, " when {g}")?;
            }
            writeln!(f, ";")?;
        }
        writeln!(f, "entry {};", self.entry)?;
        let exits: Vec<String> = self.exits.iter().map(|x| x.to_string()).collect();
        writeln!(f, "exit {};", exits.join(", "))
    }
}
