//! Linear integer terms `c0 + Σ ci·vi` and the two constraint forms built on
//! them (`term = 0`, `term ≥ 0`).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Opaque solver variable identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Variable assignment used for evaluation and as a solver model.
pub type Model = BTreeMap<VarId, BigInt>;

/// A linear term `c0 + Σ ci·vi`. Zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearTerm {
    constant: BigInt,
    coeffs: BTreeMap<VarId, BigInt>,
}

impl LinearTerm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        LinearTerm { constant: c.into(), coeffs: BTreeMap::new() }
    }

    pub fn var(v: VarId) -> Self {
        Self::scaled_var(v, 1)
    }

    pub fn scaled_var(v: VarId, c: impl Into<BigInt>) -> Self {
        let mut t = Self::zero();
        t.add_coeff(v, c.into());
        t
    }

    /// Build from `(var, coeff)` pairs plus a constant; duplicates are summed.
    pub fn from_parts<I, C>(constant: impl Into<BigInt>, parts: I) -> Self
    where
        I: IntoIterator<Item = (VarId, C)>,
        C: Into<BigInt>,
    {
        let mut t = Self::constant(constant);
        for (v, c) in parts {
            t.add_coeff(v, c.into());
        }
        t
    }

    pub fn constant_part(&self) -> &BigInt {
        &self.constant
    }

    pub fn coeffs(&self) -> &BTreeMap<VarId, BigInt> {
        &self.coeffs
    }

    pub fn coeff(&self, v: VarId) -> BigInt {
        self.coeffs.get(&v).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.coeffs.contains_key(&v)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.coeffs.keys().copied()
    }

    /// `Some(v)` when the term is exactly `1·v`.
    pub fn as_var(&self) -> Option<VarId> {
        if !self.constant.is_zero() || self.coeffs.len() != 1 {
            return None;
        }
        let (v, c) = self.coeffs.iter().next()?;
        c.is_one().then_some(*v)
    }

    pub fn add_coeff(&mut self, v: VarId, c: BigInt) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(v).or_insert_with(BigInt::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&v);
        }
    }

    pub fn add_constant(&mut self, c: &BigInt) {
        self.constant += c;
    }

    pub fn set_constant(&mut self, c: BigInt) {
        self.constant = c;
    }

    /// Remove `v` and return its coefficient (zero when absent).
    pub fn take_coeff(&mut self, v: VarId) -> BigInt {
        self.coeffs.remove(&v).unwrap_or_else(BigInt::zero)
    }

    pub fn add(&self, other: &LinearTerm) -> LinearTerm {
        let mut t = self.clone();
        t.add_assign_scaled(other, &BigInt::one());
        t
    }

    pub fn sub(&self, other: &LinearTerm) -> LinearTerm {
        let mut t = self.clone();
        t.add_assign_scaled(other, &-BigInt::one());
        t
    }

    pub fn neg(&self) -> LinearTerm {
        self.scale(&-BigInt::one())
    }

    pub fn scale(&self, k: &BigInt) -> LinearTerm {
        if k.is_zero() {
            return LinearTerm::zero();
        }
        LinearTerm { constant: &self.constant * k, coeffs: self.coeffs.iter().map(|(v, c)| (*v, c * k)).collect() }
    }

    /// `self += k·other`
    pub fn add_assign_scaled(&mut self, other: &LinearTerm, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        self.constant += &other.constant * k;
        for (v, c) in &other.coeffs {
            self.add_coeff(*v, c * k);
        }
    }

    /// Replace `v` by `replacement`. Returns whether `v` occurred.
    pub fn substitute(&mut self, v: VarId, replacement: &LinearTerm) -> bool {
        match self.coeffs.remove(&v) {
            Some(c) => {
                self.add_assign_scaled(replacement, &c);
                true
            }
            None => false,
        }
    }

    /// Evaluate under `model`; `None` if a variable is unassigned.
    pub fn eval(&self, model: &Model) -> Option<BigInt> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            acc += c * model.get(v)?;
        }
        Some(acc)
    }

    /// Gcd of all coefficients (zero for a constant term).
    pub fn coeff_gcd(&self) -> BigInt {
        self.coeffs.values().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Largest absolute coefficient (zero for a constant term).
    pub fn max_abs_coeff(&self) -> BigInt {
        self.coeffs.values().map(|c| c.abs()).max().unwrap_or_else(BigInt::zero)
    }
}

impl fmt::Display for LinearTerm {
    /// Debug dump form: `<c0> + <c1>*v1 + ...`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constant)?;
        for (v, c) in &self.coeffs {
            write!(f, " + {}*{}", c, v)?;
        }
        Ok(())
    }
}

/// Relation of a linear constraint against zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Eq,
    Geq,
}

/// `term = 0` or `term ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub term: LinearTerm,
    pub rel: Relation,
}

impl Constraint {
    pub fn eq(term: LinearTerm) -> Self {
        Constraint { term, rel: Relation::Eq }
    }

    pub fn geq(term: LinearTerm) -> Self {
        Constraint { term, rel: Relation::Geq }
    }

    pub fn holds(&self, model: &Model) -> Option<bool> {
        let v = self.term.eval(model)?;
        Some(match self.rel {
            Relation::Eq => v.is_zero(),
            Relation::Geq => !v.is_negative(),
        })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.rel {
            Relation::Eq => "=",
            Relation::Geq => ">=",
        };
        write!(f, "{} {} 0", self.term, rel)
    }
}

/// One constraint per line, the golden-test dump format.
pub fn dump(constraints: &[Constraint]) -> String {
    let mut out = String::new();
    for c in constraints {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

/// Floor division for big integers (`b > 0` or `b < 0`).
pub fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

/// Ceiling division for big integers.
pub fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> VarId {
        VarId(i)
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let mut t = LinearTerm::from_parts(3, [(v(1), 2), (v(2), 1)]);
        t.add_coeff(v(1), BigInt::from(-2));
        assert_eq!(t.coeffs().len(), 1);
        assert!(!t.contains(v(1)));
    }

    #[test]
    fn substitution_scales_replacement() {
        // 1 + 3a + b with a := 2c - 1  →  -2 + b + 6c
        let mut t = LinearTerm::from_parts(1, [(v(1), 3), (v(2), 1)]);
        let r = LinearTerm::from_parts(-1, [(v(3), 2)]);
        assert!(t.substitute(v(1), &r));
        assert_eq!(t, LinearTerm::from_parts(-2, [(v(2), 1), (v(3), 6)]));
    }

    #[test]
    fn dump_format() {
        let c = Constraint::geq(LinearTerm::from_parts(-1, [(v(0), 2), (v(1), -3)]));
        assert_eq!(dump(&[c]), "-1 + 2*v0 + -3*v1 >= 0\n");
    }

    #[test]
    fn floor_and_ceil() {
        let b = BigInt::from(2);
        assert_eq!(floor_div(&BigInt::from(-3), &b), BigInt::from(-2));
        assert_eq!(ceil_div(&BigInt::from(-3), &b), BigInt::from(-1));
        assert_eq!(ceil_div(&BigInt::from(3), &b), BigInt::from(2));
    }
}
