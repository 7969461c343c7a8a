//! Brute-force oracles and random instance generators shared by the
//! integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use pathgen::interval::{propagate_fixpoint, relax_product, Interval, Intervals, Propagator};
use pathgen::omega::{eliminate_equality, normalize, Normalized};
use pathgen::{Constraint, LinearTerm, Relation, VarId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A constraint in machine integers: `c + Σ coefs[i]·x_i (= | ≥) 0`.
#[derive(Clone, Debug)]
pub struct Row {
    pub c: i64,
    pub coefs: Vec<i64>,
    pub eq: bool,
}

impl Row {
    pub fn holds(&self, x: &[i64]) -> bool {
        let v = self.c + self.coefs.iter().zip(x).map(|(a, b)| a * b).sum::<i64>();
        if self.eq {
            v == 0
        } else {
            v >= 0
        }
    }

    pub fn term(&self) -> LinearTerm {
        LinearTerm::from_parts(
            self.c,
            self.coefs.iter().enumerate().filter(|(_, k)| **k != 0).map(|(i, k)| (VarId(i as u32), *k)),
        )
    }

    pub fn constraint(&self) -> Constraint {
        Constraint { term: self.term(), rel: if self.eq { Relation::Eq } else { Relation::Geq } }
    }
}

/// Box-bounded conjunctive system over variables `0..ranges.len()`.
#[derive(Clone, Debug)]
pub struct Instance {
    pub ranges: Vec<(i64, i64)>,
    pub rows: Vec<Row>,
}

impl Instance {
    /// The rows plus the box as inequations.
    pub fn constraints(&self) -> Vec<Constraint> {
        let mut out: Vec<Constraint> = self.rows.iter().map(Row::constraint).collect();
        for (i, &(lo, hi)) in self.ranges.iter().enumerate() {
            let v = VarId(i as u32);
            out.push(Constraint::geq(LinearTerm::from_parts(-lo, [(v, 1)])));
            out.push(Constraint::geq(LinearTerm::from_parts(hi, [(v, -1)])));
        }
        out
    }

    pub fn system(&self) -> pathgen::System {
        pathgen::System::from_constraints(&self.constraints())
    }

    pub fn solutions(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        enumerate(&self.ranges, &self.rows, &mut Vec::new(), &mut |x| {
            out.push(x.to_vec());
            true
        });
        out
    }

    pub fn has_solution(&self) -> bool {
        let mut found = false;
        enumerate(&self.ranges, &self.rows, &mut Vec::new(), &mut |_| {
            found = true;
            false
        });
        found
    }
}

/// Depth-first enumeration of the box, pruning on rows whose variables are
/// all assigned. `visit` returns whether to continue.
fn enumerate(ranges: &[(i64, i64)], rows: &[Row], x: &mut Vec<i64>, visit: &mut dyn FnMut(&[i64]) -> bool) -> bool {
    let k = x.len();
    if k == ranges.len() {
        return visit(x);
    }
    for v in ranges[k].0..=ranges[k].1 {
        x.push(v);
        let ok = rows
            .iter()
            .filter(|r| r.coefs[k + 1..].iter().all(|c| *c == 0))
            .filter(|r| r.coefs[k] != 0 || k == 0)
            .all(|r| r.holds(&padded(x, ranges.len())));
        let go_on = !ok || enumerate(ranges, rows, x, visit);
        x.pop();
        if !go_on {
            return false;
        }
    }
    true
}

fn padded(x: &[i64], n: usize) -> Vec<i64> {
    let mut v = x.to_vec();
    v.resize(n, 0);
    v
}

fn nonzero<R: Rng>(rng: &mut R, max: i64) -> i64 {
    let k = rng.gen_range(1..=max);
    if rng.gen_bool(0.5) {
        k
    } else {
        -k
    }
}

/// Random system: up to `max_vars` variables with ranges inside
/// `[-bound, bound]`, up to `max_rows` constraints with coefficients of
/// magnitude at most `max_coef`. Constants are placed around a random point
/// of the box so that both verdicts are common.
pub fn random_instance<R: Rng>(rng: &mut R, max_vars: usize, max_coef: i64, bound: i64, max_rows: usize) -> Instance {
    let n = rng.gen_range(1..=max_vars);
    let ranges: Vec<(i64, i64)> = (0..n)
        .map(|_| {
            let a = rng.gen_range(-bound..=bound);
            let b = rng.gen_range(-bound..=bound);
            (a.min(b), a.max(b))
        })
        .collect();
    let rows = (0..rng.gen_range(1..=max_rows))
        .map(|_| {
            let mut coefs = vec![0; n];
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            for &i in idx.iter().take(rng.gen_range(1..=n)) {
                coefs[i] = nonzero(rng, max_coef);
            }
            let point: Vec<i64> = ranges.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
            let at = coefs.iter().zip(&point).map(|(a, b)| a * b).sum::<i64>();
            let eq = rng.gen_bool(0.25);
            let offset = if eq && rng.gen_bool(0.5) { 0 } else { rng.gen_range(-15..=15) };
            Row { c: offset - at, coefs, eq }
        })
        .collect();
    Instance { ranges, rows }
}

/// Inequations only, over `n` variables, every one mentioning variable 0.
pub fn random_inequations<R: Rng>(rng: &mut R, n: usize, max_coef: i64, rows: usize) -> Vec<Row> {
    (0..rows)
        .map(|_| {
            let mut coefs: Vec<i64> =
                (0..n).map(|_| if rng.gen_bool(0.6) { rng.gen_range(-max_coef..=max_coef) } else { 0 }).collect();
            coefs[0] = nonzero(rng, max_coef);
            Row { c: rng.gen_range(-20..=20), coefs, eq: false }
        })
        .collect()
}

pub fn to_i64(b: &BigInt) -> i64 {
    i64::try_from(b).expect("small value")
}

/// Bounds `[lo, hi]` as an interval map entry.
pub fn iv(lo: i64, hi: i64) -> Interval {
    Interval::new(lo, hi)
}

pub fn in_box(x: &[i64], ivs: &Intervals) -> bool {
    x.iter().enumerate().all(|(i, v)| ivs.get(&VarId(i as u32)).is_none_or(|b| b.contains(&BigInt::from(*v))))
}

/// Integer solutions of `row` (an equation) in `[-r, r]^n` by enumeration.
pub fn equation_solutions(row: &Row, r: i64) -> Vec<Vec<i64>> {
    Instance { ranges: vec![(-r, r); row.coefs.len()], rows: vec![row.clone()] }.solutions()
}

/// Images of the parameterized family that fall inside `[-r, r]^n`. Original
/// variables left free range over the box; parameters over `[-p, p]`.
pub fn family_in_box(n: usize, subst: &pathgen::omega::Substitution, r: i64, p: i64) -> Vec<Vec<i64>> {
    let mut params: Vec<VarId> = subst.iter().flat_map(|(_, t)| t.vars().collect::<Vec<_>>()).collect();
    params.extend((0..n as u32).map(VarId).filter(|v| subst.get(*v).is_none()));
    params.sort();
    params.dedup();
    let images: Vec<(i64, Vec<i64>)> = (0..n as u32)
        .map(|i| {
            let t = subst.get(VarId(i)).cloned().unwrap_or_else(|| LinearTerm::var(VarId(i)));
            (to_i64(t.constant_part()), params.iter().map(|v| to_i64(&t.coeff(*v))).collect())
        })
        .collect();
    let bounds: Vec<(i64, i64)> = params.iter().map(|v| if v.0 < n as u32 { (-r, r) } else { (-p, p) }).collect();
    let mut out = Vec::new();
    let mut theta = vec![0i64; params.len()];
    fn walk(
        k: usize,
        theta: &mut Vec<i64>,
        bounds: &[(i64, i64)],
        images: &[(i64, Vec<i64>)],
        r: i64,
        out: &mut Vec<Vec<i64>>,
    ) {
        if k == theta.len() {
            let x: Vec<i64> =
                images.iter().map(|(c, a)| c + a.iter().zip(theta.iter()).map(|(p, q)| p * q).sum::<i64>()).collect();
            if x.iter().all(|v| v.abs() <= r) {
                out.push(x);
            }
            return;
        }
        for v in bounds[k].0..=bounds[k].1 {
            theta[k] = v;
            walk(k + 1, theta, bounds, images, r, out);
        }
    }
    walk(0, &mut theta, &bounds, &images, r, &mut out);
    out.sort();
    out.dedup();
    out
}

/// Parameterization of a random equation versus enumeration; returns whether
/// the family matched exactly.
pub fn parameterization_matches<R: Rng>(rng: &mut R, r: i64) -> bool {
    let n = rng.gen_range(1..=3usize);
    let coefs: Vec<i64> = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=9);
            if rng.gen_bool(0.5) {
                k
            } else {
                -k
            }
        })
        .collect();
    let row = Row { c: rng.gen_range(-30..=30), coefs, eq: true };
    let mut expected = equation_solutions(&row, r);
    expected.sort();
    let canonical = match normalize(row.term(), Relation::Eq) {
        Normalized::False => return expected.is_empty(),
        Normalized::True => unreachable!("every coefficient is nonzero"),
        Normalized::Constraint(c) => c.term,
    };
    let mut next = 100;
    let subst = eliminate_equality(&canonical, &mut || {
        next += 1;
        VarId(next)
    });
    // Parameters stay within a few multiples of the box for these sizes.
    family_in_box(n, &subst, r, 8 * r) == expected
}

/// Values of the four relaxation rows of `z = x·y` at a point.
pub fn relax_values(x_iv: (i64, i64), y_iv: (i64, i64), x: i64, y: i64, z: i64) -> Vec<i64> {
    let r = relax_product(VarId(0), VarId(1), VarId(2), &iv(x_iv.0, x_iv.1), &iv(y_iv.0, y_iv.1));
    let m = [(VarId(0), z), (VarId(1), x), (VarId(2), y)].into_iter().map(|(v, k)| (v, BigInt::from(k))).collect();
    r.inequations.iter().map(|t| to_i64(&t.eval(&m).unwrap())).collect()
}

/// Every interval `[lo, hi]` with both ends in `[-bound, bound]`.
pub fn boxes(bound: i64) -> impl Iterator<Item = (i64, i64)> {
    (-bound..=bound).flat_map(move |lo| (lo..=bound).map(move |hi| (lo, hi)))
}

/// `z = x·y` by variable index.
pub type Product = (usize, usize, usize);

/// Random store of up to three product or linear atoms over three variables.
pub fn random_store<R: Rng>(rng: &mut R) -> (Intervals, Vec<Propagator>, Vec<Row>, Vec<Product>) {
    let ranges: Vec<(i64, i64)> = (0..3)
        .map(|_| {
            let a = rng.gen_range(-10..=10);
            let b = rng.gen_range(-10..=10);
            (a.min(b), a.max(b))
        })
        .collect();
    let mut props = Vec::new();
    let mut rows = Vec::new();
    let mut products = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        if rng.gen_bool(0.5) {
            let (z, x, y) = (rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_range(0..3));
            products.push((z, x, y));
            props.push(Propagator::Product { z: VarId(z as u32), x: VarId(x as u32), y: VarId(y as u32) });
        } else {
            let row = Row {
                c: rng.gen_range(-15..=15),
                coefs: (0..3).map(|_| rng.gen_range(-4..=4)).collect(),
                eq: rng.gen_bool(0.3),
            };
            props.push(Propagator::Linear(row.constraint()));
            rows.push(row);
        }
    }
    let b = ranges.iter().enumerate().map(|(i, &(lo, hi))| (VarId(i as u32), iv(lo, hi))).collect();
    (b, props, rows, products)
}

pub fn store_solutions(b: &Intervals, rows: &[Row], products: &[(usize, usize, usize)]) -> Vec<Vec<i64>> {
    let ranges = (0..3).map(|i| {
        let r = &b[&VarId(i)];
        (to_i64(&r.lo), to_i64(&r.hi))
    });
    Instance { ranges: ranges.collect(), rows: rows.to_vec() }
        .solutions()
        .into_iter()
        .filter(|s| products.iter().all(|&(z, x, y)| s[z] == s[x] * s[y]))
        .collect()
}

/// Checks every single filter application of a round-robin fixpoint, then
/// the worklist fixpoint itself. Returns the number of lost solutions.
pub fn lost_solutions(seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, props, rows, products) = random_store(&mut rng);
    let sols = store_solutions(&b, &rows, &products);
    let mut lost = 0;
    let mut cur = b.clone();
    'outer: for _ in 0..50 {
        let mut changed = false;
        for p in &props {
            match p.filter(&mut cur) {
                Ok(ch) => {
                    changed |= !ch.is_empty();
                    lost += sols.iter().filter(|s| !in_box(s, &cur)).count();
                }
                Err(_) => {
                    lost += sols.len();
                    break 'outer;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut fix = b;
    match propagate_fixpoint(&props, &mut fix, 10_000) {
        Ok(_) => lost += sols.iter().filter(|s| !in_box(s, &fix)).count(),
        Err(_) => lost += sols.len(),
    }
    lost
}

/// Relaxation rows violated by some `(x, y, x·y)` inside some box with ends
/// in `[-bound, bound]`.
pub fn relaxation_violations(bound: i64) -> usize {
    let mut violations = 0;
    for xb in boxes(bound) {
        for yb in boxes(bound) {
            for x in xb.0..=xb.1 {
                for y in yb.0..=yb.1 {
                    violations += relax_values(xb, yb, x, y, x * y).iter().filter(|v| **v < 0).count();
                }
            }
        }
    }
    violations
}
