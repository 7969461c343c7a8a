//! Fixtures shared by the benchmarks.

use pathgen::{parse_bool_expr, parse_program, GoalSpec, LinearTerm, NodeId, Program, System, Target, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parse a program from the workspace corpus.
pub fn corpus(name: &str) -> Program {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_program(&text).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn node_goal(program: &Program, node: u32, constraints: &[&str]) -> GoalSpec {
    GoalSpec {
        target: Target::Node(NodeId(node)),
        constraints: constraints.iter().map(|c| parse_bool_expr(program, c).expect("constraint parses")).collect(),
    }
}

/// Seeded random systems of `rows` inequations over `vars` variables boxed
/// in `[-bound, bound]`.
pub fn random_systems(seed: u64, count: usize, vars: u32, rows: usize, bound: i64) -> Vec<System> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut geqs: Vec<LinearTerm> = (0..rows)
                .map(|_| {
                    let parts: Vec<(VarId, i64)> = (0..vars).map(|v| (VarId(v), rng.gen_range(-10..=10))).collect();
                    LinearTerm::from_parts(rng.gen_range(-30..=30), parts)
                })
                .collect();
            for v in 0..vars {
                geqs.push(LinearTerm::from_parts(bound, [(VarId(v), -1)]));
                geqs.push(LinearTerm::from_parts(bound, [(VarId(v), 1)]));
            }
            System { eqs: vec![], geqs }
        })
        .collect()
}
