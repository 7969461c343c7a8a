//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use oracle::{lost_solutions, parameterization_matches, random_instance, relaxation_violations};
use pathgen::{
    execute_concrete, parse_bool_expr, parse_program, replay_witness, satisfiable, LinearTerm, NodeId, Program,
    Satisfiability, System, Value, VarId,
};
use pathgen_cli::{BenchReport, RunReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const OVERFLOW: &str = "next_entry_start + length > MAX_BUFFER_SIZE";

fn corpus_path(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "corpus", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn corpus(name: &str) -> Program {
    parse_program(&std::fs::read_to_string(corpus_path(name)).unwrap()).unwrap()
}

/// Run the command line and return the exit code and standard output.
fn invoke(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = pathgen_cli::run(std::iter::once("pathgen").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap())
}

fn run_report(args: &[&str]) -> RunReport {
    let (_, out) = invoke(args);
    serde_json::from_str(&out).unwrap_or_else(|e| panic!("{args:?}: {e}\n{out}"))
}

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn inputs_of(v: &BTreeMap<String, Value>, names: [&str; 3]) -> [Value; 3] {
    names.map(|n| v[n])
}

/// Reproduce the 4096-byte ring buffer overflow for seeds 1..=10. Every seed
/// must overflow by exactly one byte within ten seconds; the three-condition
/// witness must appear for at least one seed.
fn buffer_overflow() -> Verdict {
    let p = corpus("buffer.cfg");
    let file = corpus_path("buffer.cfg");
    let mut full = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 1..=10u64 {
        let s = seed.to_string();
        let t = Instant::now();
        let r =
            run_report(&["check", "--program", &file, "--target-node", "5", "--constraint", OVERFLOW, "--seed", &s]);
        let took = t.elapsed();
        slowest = slowest.max(took);
        if took > Duration::from_secs(10) {
            return Err(format!("seed {seed} took {took:?}"));
        }
        let Some(v) = r.vector else {
            return Err(format!("seed {seed}: {:?}", r.outcome));
        };
        let [len, start, _] = inputs_of(&v, ["length", "last_entry_start", "last_entry_length"]);
        let run = execute_concrete(&p, &v, 100).unwrap();
        let next = run.state["next_entry_start"];
        if !run.path.contains(&NodeId(5)) || next != 4096 - len + 1 || start <= 0 || next + len - 4096 != 1 {
            return Err(format!("seed {seed}: {v:?}"));
        }
        if start < len - 1 {
            full.push(seed);
        }
    }
    if full.is_empty() {
        return Err("no seed meets last_entry_start < length - 1".into());
    }
    Ok(format!("1-byte overflow on all seeds, slowest {slowest:.2?}; all three conditions on seeds {full:?}"))
}

/// Enumerate every 8-bit input of the scaled program and compare the tool's
/// witnesses against the violating set.
fn scaled_oracle() -> Verdict {
    let p = corpus("buffer_u8.cfg");
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()) as i128;
    let violating: HashSet<[Value; 3]> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let p = &p;
                s.spawn(move || {
                    let mut found = Vec::new();
                    for len in (0..=255i128).filter(|l| l % workers == w) {
                        for start in 0..=255i128 {
                            for last in 0..=255i128 {
                                let inp: BTreeMap<String, Value> =
                                    [("length", len), ("last_entry_start", start), ("last_entry_length", last)]
                                        .into_iter()
                                        .map(|(k, v)| (k.to_string(), v))
                                        .collect();
                                let run = execute_concrete(p, &inp, 100).unwrap();
                                // Nothing after node 4 assigns, so the final
                                // state is the state on arrival at node 5.
                                if run.path.contains(&NodeId(5)) && run.state["next_entry_start"] + len > 16 {
                                    found.push([len, start, last]);
                                }
                            }
                        }
                    }
                    found
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let file = corpus_path("buffer_u8.cfg");
    let mut witnesses = HashSet::new();
    for strategy in ["forward", "backward", "split", "mixed"] {
        for seed in 1..=10u64 {
            let s = seed.to_string();
            let r = run_report(&[
                "check",
                "--program",
                &file,
                "--target-node",
                "5",
                "--constraint",
                OVERFLOW,
                "--seed",
                &s,
                "--strategy",
                strategy,
            ]);
            if let Some(v) = r.vector {
                let w = inputs_of(&v, ["length", "last_entry_start", "last_entry_length"]);
                if !violating.contains(&w) {
                    return Err(format!("{strategy} seed {seed}: {w:?} is not a violation"));
                }
                witnesses.insert(w);
            }
        }
    }
    if witnesses.is_empty() {
        return Err("no witness found".into());
    }
    Ok(format!("{} distinct witnesses, all within the {} violating inputs", witnesses.len(), violating.len()))
}

fn omega_decisions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3);
    let t = Instant::now();
    let mut agree = 0;
    for _ in 0..500 {
        let inst = random_instance(&mut rng, 4, 10, 20, 6);
        let got = satisfiable(&inst.system()) == Satisfiability::Sat;
        agree += usize::from(got == inst.has_solution());
    }
    let took = t.elapsed();
    if agree == 500 && took <= Duration::from_secs(60) {
        Ok(format!("500/500 agree in {took:.2?}"))
    } else {
        Err(format!("{agree}/500 agree in {took:.2?}"))
    }
}

fn integer_gap() -> Verdict {
    let w = VarId(0);
    let sys =
        System { eqs: vec![], geqs: vec![LinearTerm::from_parts(-1, [(w, 3)]), LinearTerm::from_parts(2, [(w, -3)])] };
    match satisfiable(&sys) {
        Satisfiability::Unsat => Ok("{3w >= 1, 2 - 3w >= 0} is unsat".into()),
        other => Err(format!("{other:?}")),
    }
}

fn parameterization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc5);
    let exact = (0..100).filter(|_| parameterization_matches(&mut rng, 30)).count();
    if exact == 100 {
        Ok("100/100 equations enumerate exactly over [-30,30]".into())
    } else {
        Err(format!("{exact}/100 exact"))
    }
}

fn relaxation() -> Verdict {
    match relaxation_violations(3) {
        0 => Ok("0 violations over all boxes in [-3,3]".into()),
        n => Err(format!("{n} violations")),
    }
}

fn filtering() -> Verdict {
    let lost: usize = (0..1000).map(|i| lost_solutions(0xacc7_0000 + i)).sum();
    match lost {
        0 => Ok("1000 stores, 0 solutions lost".into()),
        n => Err(format!("{n} solutions lost")),
    }
}

/// Generate vectors for a spread of gcd and diamond goals and replay each
/// along its reported path.
fn oracle_closure() -> Verdict {
    let goals: [(&str, &str, &[&str]); 12] = [
        ("gcd.cfg", "--target-node=2", &[]),
        ("gcd.cfg", "--target-node=3", &[]),
        ("gcd.cfg", "--target-node=4", &[]),
        ("gcd.cfg", "--target-node=5", &["b > 10"]),
        ("gcd.cfg", "--target-node=6", &["a > 5"]),
        ("gcd.cfg", "--target-edge=5:2", &[]),
        ("gcd.cfg", "--target-edge=2:6", &[]),
        ("diamond.cfg", "--target-node=2", &[]),
        ("diamond.cfg", "--target-node=3", &[]),
        ("diamond.cfg", "--target-node=4", &["y > 10"]),
        ("diamond.cfg", "--target-edge=2:4", &[]),
        ("diamond.cfg", "--target-edge=3:4", &["y > 7"]),
    ];
    let strategies = ["forward", "backward", "split", "mixed"];
    let mut replayed = 0;
    for i in 0..100usize {
        let (name, target, cs) = goals[i % goals.len()];
        let strategy = strategies[(i / goals.len()) % strategies.len()];
        let file = corpus_path(name);
        let seed = (i + 1).to_string();
        let mut args = vec!["gen", "--program", &file, target, "--seed", &seed, "--strategy", strategy];
        for c in cs {
            args.extend(["--constraint", c]);
        }
        let r = run_report(&args);
        let Some(v) = &r.vector else {
            return Err(format!("run {i} ({name} {target}): {:?}", r.outcome));
        };
        let p = corpus(name);
        let path: Vec<NodeId> = r.path.iter().map(|n| NodeId(*n)).collect();
        let constraints: Vec<_> = cs.iter().map(|c| parse_bool_expr(&p, c).unwrap()).collect();
        let run = execute_concrete(&p, v, 10_000).unwrap();
        if !run.path.starts_with(&path) || !replay_witness(&p, v, &path, &constraints) {
            return Err(format!("run {i} ({name} {target}) does not replay: {v:?} {path:?}"));
        }
        replayed += 1;
    }
    Ok(format!("{replayed}/100 vectors replay"))
}

fn strategy_benchmark() -> Verdict {
    let file = corpus_path("gcd.cfg");
    let t = Instant::now();
    let args =
        ["bench", "--program", &file, "--target-node", "4", "--constraint", "b > 10", "--trials", "50", "--seed", "1"];
    let (code, out) = invoke(&args);
    let took = t.elapsed();
    let report: BenchReport = serde_json::from_str(&out).map_err(|e| format!("exit {code}: {e}"))?;
    if report.rows.len() != 3 || report.rows.iter().any(|r| r.trials != 50) {
        return Err(format!("unexpected rows: {:?}", report.rows));
    }
    if took > Duration::from_secs(300) {
        return Err(format!("took {took:.2?}"));
    }
    Ok(format!("3 x 50 trials in {took:.2?}; ranking by mean checks: {}", report.ranking.join(" < ")))
}

fn determinism() -> Verdict {
    let gcd = corpus_path("gcd.cfg");
    let buffer = corpus_path("buffer.cfg");
    let fixed = corpus_path("buffer_fixed_u8.cfg");
    let cases: [Vec<&str>; 6] = [
        vec!["gen", "--program", &gcd, "--target-node", "6", "--constraint", "a > 5", "--seed", "3"],
        vec!["gen", "--program", &gcd, "--target-edge", "5:2", "--seed", "9", "--strategy", "mixed", "--jobs", "4"],
        vec!["check", "--program", &buffer, "--target-node", "5", "--constraint", OVERFLOW, "--seed", "2"],
        vec!["check", "--program", &fixed, "--target-node", "5", "--constraint", OVERFLOW, "--prove-infeasible"],
        vec!["bench", "--program", &gcd, "--target-node", "5", "--trials", "5", "--seed", "4"],
        vec!["gen", "--program", &gcd, "--target-node", "4", "--seed", "5", "--format", "text"],
    ];
    for args in &cases {
        let first = invoke(args);
        let second = invoke(args);
        if first != second {
            return Err(format!("{args:?} differs between runs"));
        }
    }
    Ok(format!("{} invocations byte-identical across two runs", cases.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("buffer overflow reproduction", buffer_overflow),
        ("scaled oracle equivalence", scaled_oracle),
        ("omega decision correctness", omega_decisions),
        ("integer vs rational separation", integer_gap),
        ("equality parameterization", parameterization),
        ("relaxation over-approximation", relaxation),
        ("filtering soundness", filtering),
        ("oracle closure", oracle_closure),
        ("strategy benchmark", strategy_benchmark),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    let mut stdout = std::io::stdout();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let _ = writeln!(stdout, "criterion {:>2} {tag} {name}: {detail} [{:.1?}]", i + 1, t.elapsed());
    }
    let _ = writeln!(stdout, "{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
