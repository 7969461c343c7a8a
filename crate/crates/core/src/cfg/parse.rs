//! Parser for the line-oriented CFG text format.
//!
//! ```text
//! var <name> : (u|i)(8|16|32|64) (input|local|const <value>);
//! node <id> { <name> := <expr>; ... }
//! edge <from> -> <to> [when <boolexpr>];
//! entry <id>; exit <id>[, <id>...];
//! ```

use std::collections::BTreeMap;

use super::{
    Assign, BinOp, BoolExpr, CfgError, CmpOp, Comparison, Edge, Expr, IntType, Node, NodeId, Program, VarDecl, VarRole,
};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u128),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCTS: [&str; 22] = [
    ":=", "->", "<=", ">=", "==", "!=", "&&", "||", ":", ";", "{", "}", ",", "(", ")", "+", "-", "*", "%", "<", ">",
    "!",
];

fn lex(text: &str) -> Result<Vec<Token>, CfgError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line_no = li + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<u128>().map_err(|_| CfgError::Syntax {
                    line: line_no,
                    col,
                    msg: format!("integer literal `{s}` too large"),
                })?;
                out.push(Token { tok: Tok::Int(v), line: line_no, col });
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: line_no, col });
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    out.push(Token { tok: Tok::Punct(p), line: line_no, col });
                    i += p.len();
                }
                None => {
                    return Err(CfgError::Syntax { line: line_no, col, msg: format!("unexpected character `{c}`") })
                }
            }
        }
    }
    let (line, col) = (text.lines().count().max(1), 1);
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Variable uses, checked once all declarations are known.
    var_uses: Vec<(String, usize, usize)>,
    node_refs: Vec<(NodeId, usize, usize)>,
}

type PResult<T> = Result<T, CfgError>;

const LITERAL_MAX: u128 = u64::MAX as u128;

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, var_uses: Vec::new(), node_refs: Vec::new() }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(CfgError::Syntax { line, col, msg: msg.into() })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn node_id(&mut self) -> PResult<NodeId> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(v) if v > 0 && v <= u32::MAX as u128 => {
                self.bump();
                let id = NodeId(v as u32);
                self.node_refs.push((id, line, col));
                Ok(id)
            }
            other => self.err(format!("expected positive node id, found {}", describe(&other))),
        }
    }

    fn signed_int(&mut self) -> PResult<i128> {
        let neg = self.eat_punct("-");
        match self.peek().clone() {
            Tok::Int(v) if v <= LITERAL_MAX + neg as u128 => {
                self.bump();
                Ok(if neg { -(v as i128) } else { v as i128 })
            }
            Tok::Int(_) => self.err("integer literal out of 64-bit range"),
            other => self.err(format!("expected integer, found {}", describe(&other))),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut vars: Vec<VarDecl> = Vec::new();
        let mut nodes = BTreeMap::new();
        let mut edges = Vec::new();
        let mut entry = None;
        let mut exits = Vec::new();
        loop {
            let (line, col) = self.here();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(k) if k == "var" => {
                    self.bump();
                    let name = self.ident()?;
                    if vars.iter().any(|v| v.name == name) {
                        return Err(CfgError::Semantic { line, col, msg: format!("duplicate variable `{name}`") });
                    }
                    self.expect_punct(":")?;
                    let ty = self.int_type()?;
                    let role = match self.ident()?.as_str() {
                        "input" => VarRole::Input,
                        "local" => VarRole::Local,
                        "const" => {
                            let v = self.signed_int()?;
                            if !ty.contains(v) {
                                return Err(CfgError::Semantic {
                                    line,
                                    col,
                                    msg: format!("constant {v} out of range for {ty}"),
                                });
                            }
                            VarRole::Const(v)
                        }
                        other => return self.err(format!("unknown variable role `{other}`")),
                    };
                    vars.push(VarDecl { name, ty, role });
                }
                Tok::Ident(k) if k == "node" => {
                    self.bump();
                    let id = self.node_id()?;
                    self.node_refs.pop();
                    if nodes.contains_key(&id) {
                        return Err(CfgError::Semantic { line, col, msg: format!("duplicate node id {id}") });
                    }
                    self.expect_punct("{")?;
                    let mut statements = Vec::new();
                    while !self.eat_punct("}") {
                        let (l, c) = self.here();
                        let target = self.ident()?;
                        self.var_uses.push((target.clone(), l, c));
                        self.expect_punct(":=")?;
                        let value = self.expr()?;
                        self.expect_punct(";")?;
                        statements.push(Assign { target, value });
                    }
                    nodes.insert(id, Node { statements });
                }
                Tok::Ident(k) if k == "edge" => {
                    self.bump();
                    let from = self.node_id()?;
                    self.expect_punct("->")?;
                    let to = self.node_id()?;
                    let guard = if self.is_keyword("when") {
                        self.bump();
                        Some(self.bool_expr()?)
                    } else {
                        None
                    };
                    edges.push(Edge { from, to, guard });
                }
                Tok::Ident(k) if k == "entry" => {
                    self.bump();
                    if entry.is_some() {
                        return Err(CfgError::Semantic { line, col, msg: "entry declared twice".into() });
                    }
                    entry = Some(self.node_id()?);
                }
                Tok::Ident(k) if k == "exit" => {
                    self.bump();
                    exits.push(self.node_id()?);
                    while self.eat_punct(",") {
                        exits.push(self.node_id()?);
                    }
                }
                other => return self.err(format!("expected declaration, found {}", describe(&other))),
            }
            self.eat_punct(";");
        }
        for (name, line, col) in &self.var_uses {
            if !vars.iter().any(|v| &v.name == name) {
                return Err(CfgError::Semantic {
                    line: *line,
                    col: *col,
                    msg: format!("undeclared variable `{name}`"),
                });
            }
        }
        for (id, line, col) in &self.node_refs {
            if !nodes.contains_key(id) {
                return Err(CfgError::Semantic {
                    line: *line,
                    col: *col,
                    msg: format!("reference to undeclared node {id}"),
                });
            }
        }
        let Some(entry) = entry else {
            return Err(CfgError::Invalid("missing entry declaration".into()));
        };
        let p = Program { name: "program".into(), vars, nodes, edges, entry, exits };
        p.validate()?;
        Ok(p)
    }

    fn int_type(&mut self) -> PResult<IntType> {
        let s = self.ident()?;
        let (sign, bits) = s.split_at(1);
        let signed = match sign {
            "u" => false,
            "i" => true,
            _ => return self.err(format!("unknown type `{s}`")),
        };
        match bits.parse::<u32>() {
            Ok(b) if IntType::is_valid_width(b) => Ok(IntType::new(signed, b as u8)),
            _ => self.err(format!("unknown type `{s}`")),
        }
    }

    fn bool_expr(&mut self) -> PResult<BoolExpr> {
        let mut lhs = self.bool_and()?;
        while self.eat_punct("||") {
            let rhs = self.bool_and()?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_and(&mut self) -> PResult<BoolExpr> {
        let mut lhs = self.bool_not()?;
        while self.eat_punct("&&") {
            let rhs = self.bool_not()?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_not(&mut self) -> PResult<BoolExpr> {
        if self.eat_punct("!") {
            return Ok(BoolExpr::Not(Box::new(self.bool_not()?)));
        }
        if self.is_punct("(") {
            // Either a parenthesized boolean or the start of an arithmetic
            // operand; try the former and fall back.
            let save = (self.pos, self.var_uses.len());
            self.bump();
            if let Ok(inner) = self.bool_expr() {
                if self.eat_punct(")") && !self.continues_arith() {
                    return Ok(inner);
                }
            }
            self.pos = save.0;
            self.var_uses.truncate(save.1);
        }
        self.comparison().map(BoolExpr::Cmp)
    }

    fn continues_arith(&self) -> bool {
        matches!(self.peek(), Tok::Punct("+" | "-" | "*" | "%" | "<" | "<=" | "==" | "!=" | ">=" | ">"))
    }

    fn comparison(&mut self) -> PResult<Comparison> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct("<=") => CmpOp::Le,
            Tok::Punct("==") => CmpOp::Eq,
            Tok::Punct("!=") => CmpOp::Ne,
            Tok::Punct(">=") => CmpOp::Ge,
            Tok::Punct(">") => CmpOp::Gt,
            other => return self.err(format!("expected comparison operator, found {}", describe(other))),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Comparison { op, lhs, rhs })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_punct("+") {
                BinOp::Add
            } else if self.is_punct("-") {
                BinOp::Sub
            } else {
                break;
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.is_punct("*") {
                BinOp::Mul
            } else if self.is_punct("%") {
                BinOp::Rem
            } else {
                break;
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_punct("-") {
            if let Tok::Int(_) = self.peek_at(1) {
                return Ok(Expr::Lit(self.signed_int()?));
            }
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(_) => Ok(Expr::Lit(self.signed_int()?)),
            Tok::Ident(name) => {
                self.bump();
                self.var_uses.push((name.clone(), line, col));
                Ok(Expr::Var(name))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            other => self.err(format!("expected expression, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parse and validate a program.
pub fn parse_program(text: &str) -> Result<Program, CfgError> {
    Parser::new(lex(text)?).program()
}

/// Parse a standalone boolean expression against `program`'s variables.
pub fn parse_bool_expr(program: &Program, text: &str) -> Result<BoolExpr, CfgError> {
    let mut p = Parser::new(lex(text)?);
    let e = p.bool_expr()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("unexpected {}", describe(p.peek())));
    }
    for (name, line, col) in &p.var_uses {
        if program.var(name).is_none() {
            return Err(CfgError::Semantic { line: *line, col: *col, msg: format!("undeclared variable `{name}`") });
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse_program("var x:u8 input; node 1 {}; entry 1; exit 1").unwrap();
        assert_eq!(p.nodes.len(), 1);
        assert!(p.edges.is_empty());
        assert_eq!(p.entry, NodeId(1));
    }

    #[test]
    fn unknown_edge_endpoint() {
        let err = parse_program("node 1 {}\nedge 1 -> 2;\nentry 1; exit 1").unwrap_err();
        assert!(matches!(err, CfgError::Semantic { line: 2, col: 11, .. }), "{err:?}");
    }

    #[test]
    fn undeclared_variable_position() {
        let err = parse_program("node 1 { y := 1; }\nentry 1; exit 1").unwrap_err();
        assert!(matches!(err, CfgError::Semantic { line: 1, col: 10, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_node() {
        let err = parse_program("node 1 {}\nnode 1 {}\nentry 1; exit 1").unwrap_err();
        assert!(matches!(err, CfgError::Semantic { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_program("var x : u8 input;\nnode 1 { x := ; }").unwrap_err();
        assert!(matches!(err, CfgError::Syntax { line: 2, col: 15, .. }), "{err:?}");
    }

    #[test]
    fn precedence_and_negative_literals() {
        let p = parse_program(
            "var a : i32 input; var b : i32 local;\nnode 1 { b := a - -3 * 2 % 5 + -a; }\nentry 1; exit 1",
        )
        .unwrap();
        let s = &p.nodes[&NodeId(1)].statements[0];
        let expect = Expr::bin(
            BinOp::Add,
            Expr::bin(
                BinOp::Sub,
                Expr::var("a"),
                Expr::bin(BinOp::Rem, Expr::bin(BinOp::Mul, Expr::Lit(-3), Expr::Lit(2)), Expr::Lit(5)),
            ),
            Expr::Neg(Box::new(Expr::var("a"))),
        );
        assert_eq!(s.value, expect);
    }

    #[test]
    fn parenthesized_arith_in_guard() {
        let p = parse_program(
            "var a : u8 input; var b : u8 input;\nnode 1 {} node 2 {}\nedge 1 -> 2 when (a + 1) * 2 < b && !(a == b);\nentry 1; exit 2",
        )
        .unwrap();
        let g = p.edges[0].guard.as_ref().unwrap();
        assert!(matches!(g, BoolExpr::And(l, r)
            if matches!(**l, BoolExpr::Cmp(_)) && matches!(**r, BoolExpr::Not(_))));
    }

    #[test]
    fn const_out_of_range() {
        assert!(parse_program("var k : u8 const 300; node 1 {} entry 1; exit 1").is_err());
    }
}
