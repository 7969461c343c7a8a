//! Interval filtering (bounds consistency) and dynamic linear relaxations of
//! products `z = x·y`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::term::{ceil_div, floor_div, Constraint, LinearTerm, Relation, VarId};

/// Closed integer interval `[lo, hi]`; `lo > hi` never escapes a filter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: BigInt,
    pub hi: BigInt,
}

/// Raised when filtering empties an interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("empty interval")]
pub struct Empty;

impl Interval {
    pub fn new(lo: impl Into<BigInt>, hi: impl Into<BigInt>) -> Self {
        Interval { lo: lo.into(), hi: hi.into() }
    }

    pub fn point(v: impl Into<BigInt>) -> Self {
        let v = v.into();
        Interval { lo: v.clone(), hi: v }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: &BigInt) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn width(&self) -> BigInt {
        &self.hi - &self.lo
    }

    /// Intersection; `Err(Empty)` if disjoint.
    pub fn meet(&self, other: &Interval) -> Result<Interval, Empty> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        if lo > hi {
            Err(Empty)
        } else {
            Ok(Interval { lo, hi })
        }
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    fn scale(&self, k: &BigInt) -> Interval {
        let a = &self.lo * k;
        let b = &self.hi * k;
        if k.is_negative() {
            Interval { lo: b, hi: a }
        } else {
            Interval { lo: a, hi: b }
        }
    }

    fn add(&self, other: &Interval) -> Interval {
        Interval { lo: &self.lo + &other.lo, hi: &self.hi + &other.hi }
    }

    /// Hull of the pairwise corner products.
    pub fn mul(&self, other: &Interval) -> Interval {
        let c = [&self.lo * &other.lo, &self.lo * &other.hi, &self.hi * &other.lo, &self.hi * &other.hi];
        Interval { lo: c.iter().min().expect("4 corners").clone(), hi: c.iter().max().expect("4 corners").clone() }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Current bounds for each variable.
pub type Intervals = BTreeMap<VarId, Interval>;

/// Interval of a linear term under `iv`.
pub fn eval_interval(t: &LinearTerm, iv: &Intervals) -> Interval {
    let mut acc = Interval::point(t.constant_part().clone());
    for (v, c) in t.coeffs() {
        acc = acc.add(&iv[v].scale(c));
    }
    acc
}

/// Tighten `iv` with `t ≥ 0`: each variable is bounded using the extreme
/// values of the others. Returns the variables whose interval changed.
pub fn filter_linear(t: &LinearTerm, iv: &mut Intervals) -> Result<Vec<VarId>, Empty> {
    if t.is_constant() {
        return if t.constant_part().is_negative() { Err(Empty) } else { Ok(Vec::new()) };
    }
    // max of each c·v, summed with the constant.
    let maxes: Vec<(VarId, BigInt, BigInt)> = t
        .coeffs()
        .iter()
        .map(|(v, c)| {
            let i = &iv[v];
            let m = if c.is_positive() { c * &i.hi } else { c * &i.lo };
            (*v, c.clone(), m)
        })
        .collect();
    let total: BigInt = maxes.iter().map(|(_, _, m)| m).sum::<BigInt>() + t.constant_part();
    if total.is_negative() {
        return Err(Empty);
    }
    let mut changed = Vec::new();
    for (v, c, m) in maxes {
        // c·v ≥ -(total - m)
        let others = &total - &m;
        let cur = iv.get_mut(&v).expect("interval for every var");
        let updated = if c.is_positive() {
            let lo = ceil_div(&-&others, &c);
            if lo > cur.lo {
                cur.lo = lo;
                true
            } else {
                false
            }
        } else {
            let hi = floor_div(&others, &-&c);
            if hi < cur.hi {
                cur.hi = hi;
                true
            } else {
                false
            }
        };
        if cur.lo > cur.hi {
            return Err(Empty);
        }
        if updated {
            changed.push(v);
        }
    }
    Ok(changed)
}

/// Tighten `y` from `z = x·y`: the integers `y` for which some `x ∈ x_iv`
/// gives a product inside `z_iv`, rounded outward.
fn divide_bound(z: &Interval, x: &Interval, y: &Interval) -> Result<Interval, Empty> {
    // If x may be zero, z may be zero and y is unconstrained by this atom.
    if x.contains(&BigInt::zero()) {
        if z.contains(&BigInt::zero()) {
            return Ok(y.clone());
        }
        // Split x into its nonzero parts.
        let mut hull: Option<Interval> = None;
        for part in [Interval::new(x.lo.clone(), BigInt::from(-1)), Interval::new(BigInt::from(1), x.hi.clone())] {
            if part.lo > part.hi {
                continue;
            }
            if let Ok(r) = divide_bound(z, &part, y) {
                hull = Some(match hull {
                    None => r,
                    Some(h) => Interval::new(h.lo.min(r.lo), h.hi.max(r.hi)),
                });
            }
        }
        return hull.ok_or(Empty);
    }
    // x has a constant sign: y ∈ hull{z/x corners}, rounded conservatively.
    let qs = [(&z.lo, &x.lo), (&z.lo, &x.hi), (&z.hi, &x.lo), (&z.hi, &x.hi)];
    let lo = qs.iter().map(|(n, d)| ceil_div_any(n, d)).min().expect("4");
    let hi = qs.iter().map(|(n, d)| floor_div_any(n, d)).max().expect("4");
    Interval::new(lo, hi).meet(y)
}

fn floor_div_any(n: &BigInt, d: &BigInt) -> BigInt {
    floor_div(n, d)
}

fn ceil_div_any(n: &BigInt, d: &BigInt) -> BigInt {
    ceil_div(n, d)
}

/// Forward and backward filtering of `z = x·y`. Point intervals are checked
/// exactly, so `z ∈ [7,7], x ∈ [2,2]` fails.
pub fn filter_product(z: &Interval, x: &Interval, y: &Interval) -> Result<(Interval, Interval, Interval), Empty> {
    let mut z = z.meet(&x.mul(y))?;
    let mut x = x.clone();
    let mut y = y.clone();
    y = divide_bound(&z, &x, &y)?;
    x = divide_bound(&z, &y, &x)?;
    z = z.meet(&x.mul(&y))?;
    if x.is_point() && y.is_point() {
        z = z.meet(&Interval::point(&x.lo * &y.lo))?;
    }
    if z.is_point() && x.is_point() && !x.lo.is_zero() {
        let (q, r) = (&z.lo / &x.lo, &z.lo % &x.lo);
        if !r.is_zero() {
            return Err(Empty);
        }
        y = y.meet(&Interval::point(q))?;
    }
    if z.is_point() && y.is_point() && !y.lo.is_zero() {
        let (q, r) = (&z.lo / &y.lo, &z.lo % &y.lo);
        if !r.is_zero() {
            return Err(Empty);
        }
        x = x.meet(&Interval::point(q))?;
    }
    Ok((z, x, y))
}

/// The four relaxation inequations of `z = x·y` for one interval snapshot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelaxationSet {
    pub z: VarId,
    pub x: VarId,
    pub y: VarId,
    pub x_iv: Interval,
    pub y_iv: Interval,
    pub inequations: [LinearTerm; 4],
}

impl RelaxationSet {
    pub fn constraints(&self) -> Vec<Constraint> {
        self.inequations.iter().cloned().map(Constraint::geq).collect()
    }

    pub fn is_stale(&self, iv: &Intervals) -> bool {
        iv.get(&self.x) != Some(&self.x_iv) || iv.get(&self.y) != Some(&self.y_iv)
    }
}

/// Instantiate the four product relaxations at the given bounds:
///
/// * `z − xl·y − x·yl + xl·yl ≥ 0`
/// * `−z + x·yl + xu·y − xu·yl ≥ 0`
/// * `−z + x·yu + xl·y − xl·yu ≥ 0`
/// * `z − x·yu − xu·y + xu·yu ≥ 0`
pub fn relax_product(z: VarId, x: VarId, y: VarId, x_iv: &Interval, y_iv: &Interval) -> RelaxationSet {
    let (xl, xu) = (&x_iv.lo, &x_iv.hi);
    let (yl, yu) = (&y_iv.lo, &y_iv.hi);
    let row = |kz: i64, kx: &BigInt, ky: &BigInt, c: BigInt| {
        let mut t = LinearTerm::constant(c);
        t.add_coeff(z, BigInt::from(kz));
        t.add_coeff(x, kx.clone());
        t.add_coeff(y, ky.clone());
        t
    };
    // When x and y are the same variable the coefficients merge, which is fine.
    let inequations = [
        row(1, &-yl, &-xl, xl * yl),
        row(-1, yl, xu, -(xu * yl)),
        row(-1, yu, xl, -(xl * yu)),
        row(1, &-yu, &-xu, xu * yu),
    ];
    RelaxationSet { z, x, y, x_iv: x_iv.clone(), y_iv: y_iv.clone(), inequations }
}

/// A constraint participating in interval propagation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Propagator {
    Linear(Constraint),
    Product { z: VarId, x: VarId, y: VarId },
}

impl Propagator {
    pub fn vars(&self) -> Vec<VarId> {
        match self {
            Propagator::Linear(c) => c.term.vars().collect(),
            Propagator::Product { z, x, y } => vec![*z, *x, *y],
        }
    }

    /// Apply once; returns changed variables.
    pub fn filter(&self, iv: &mut Intervals) -> Result<Vec<VarId>, Empty> {
        match self {
            Propagator::Linear(c) => match c.rel {
                Relation::Geq => filter_linear(&c.term, iv),
                Relation::Eq => {
                    let mut ch = filter_linear(&c.term, iv)?;
                    ch.extend(filter_linear(&c.term.neg(), iv)?);
                    ch.sort();
                    ch.dedup();
                    Ok(ch)
                }
            },
            Propagator::Product { z, x, y } => {
                let (nz, nx, ny) = filter_product(&iv[z], &iv[x], &iv[y])?;
                let mut ch = Vec::new();
                for (v, n) in [(*z, nz), (*x, nx), (*y, ny)] {
                    let cur = iv.get_mut(&v).expect("interval for every var");
                    let n = cur.meet(&n)?;
                    if *cur != n {
                        *cur = n;
                        ch.push(v);
                    }
                }
                Ok(ch)
            }
        }
    }
}

/// Worklist propagation to a fixpoint, or until `max_steps` filter
/// applications have run (the result is sound either way). Returns whether a
/// fixpoint was reached.
pub fn propagate_fixpoint(props: &[Propagator], iv: &mut Intervals, max_steps: usize) -> Result<bool, Empty> {
    let mut watchers: BTreeMap<VarId, Vec<usize>> = BTreeMap::new();
    for (i, p) in props.iter().enumerate() {
        for v in p.vars() {
            watchers.entry(v).or_default().push(i);
        }
    }
    let mut queue: VecDeque<usize> = (0..props.len()).collect();
    let mut queued: BTreeSet<usize> = queue.iter().copied().collect();
    let mut steps = 0;
    while let Some(i) = queue.pop_front() {
        queued.remove(&i);
        if steps >= max_steps {
            return Ok(false);
        }
        steps += 1;
        // A filter is not idempotent in one pass (rounding), so one that
        // narrowed its own variables is queued again as well.
        for v in props[i].filter(iv)? {
            for &j in watchers.get(&v).into_iter().flatten() {
                if queued.insert(j) {
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(true)
}
