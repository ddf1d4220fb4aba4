//! Acceptance criteria 1-10, one PASS/WARN/FAIL line each.
//!
//! Runs without the libtest harness. The scalability jobs re-invoke this
//! binary with `--job` so each can be killed at its deadline.

use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use kopt_core::generators;
use kopt_core::optimize::{self, AlgoParams, Algorithm, Evaluation};
use kopt_core::verify::{self, CheckReport, Perturbation};

const SCALE_DEADLINE: Duration = Duration::from_secs(600);
const SCALE_N: usize = 100_000;

struct Criterion {
    id: u8,
    name: &'static str,
    passed: bool,
    soft: bool,
    detail: String,
}

impl Criterion {
    fn line(&self) -> String {
        let status = match (self.passed, self.soft) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        format!("criterion {:>2} {status} {:<22} {}", self.id, self.name, self.detail)
    }
}

/// Folds reports into one criterion line, adding the runtime limit.
fn from_reports(id: u8, name: &'static str, reports: &[CheckReport], limit: Option<Duration>, elapsed: Duration) -> Criterion {
    let mut detail: Vec<String> = reports
        .iter()
        .map(|r| format!("{}={:.4e} (tol {:.1e})", r.name, r.measured, r.tolerance))
        .collect();
    let in_time = limit.map_or(true, |l| elapsed <= l);
    match limit {
        Some(l) => detail.push(format!("{:.1} s <= {} s", elapsed.as_secs_f64(), l.as_secs())),
        None => detail.push(format!("{:.1} s", elapsed.as_secs_f64())),
    }
    let soft = !reports.is_empty() && reports.iter().all(|r| r.soft);
    Criterion {
        id,
        name,
        passed: in_time && reports.iter().all(|r| r.passed),
        soft,
        detail: detail.join("; "),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn check(
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
    f: impl FnOnce() -> kopt_core::Result<Vec<CheckReport>>,
) -> Criterion {
    let (res, elapsed) = timed(f);
    match res {
        Ok(reports) => {
            for r in &reports {
                eprintln!("    {r}");
            }
            from_reports(id, name, &reports, limit, elapsed)
        }
        Err(e) => Criterion {
            id,
            name,
            passed: false,
            soft: false,
            detail: format!("error: {e}"),
        },
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn parity_graphs() -> Vec<(String, kopt_core::Graph)> {
    vec![
        ("ba800".into(), generators::preferential_attachment(800, 3, 31)),
        ("ws600".into(), generators::watts_strogatz(600, 3, 0.1, 32)),
        ("gnp500".into(), generators::connected_gnp(500, 0.012, 33)),
        ("grid20x30".into(), generators::grid(20, 30)),
        ("chords700".into(), generators::tree_plus_chords(700, 200, 34)),
    ]
}

/// Child mode: `--job <algo> <n> <per_node>`; prints `total_ms mean_step_ms`.
fn job(args: &[String]) -> ExitCode {
    let algo: Algorithm = args[0].parse().expect("algo");
    let n: usize = args[1].parse().expect("n");
    let per_node: usize = args[2].parse().expect("per_node");
    let g = generators::preferential_attachment(n, per_node, 1);
    let mut params = AlgoParams::benchmark_defaults(10, 1);
    params.evaluation = Evaluation::Skip;
    match optimize::run(algo, &g, &params) {
        Ok(r) => {
            let mean = r.steps.iter().map(|s| s.elapsed_ms).sum::<f64>() / r.steps.len().max(1) as f64;
            println!("{} {} {}", r.total_ms, mean, g.m());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{algo}: {e}");
            ExitCode::FAILURE
        }
    }
}

struct JobOutcome {
    total_ms: f64,
    step_ms: f64,
    m: usize,
}

fn spawn_job(algo: Algorithm, per_node: usize) -> Result<JobOutcome, String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let mut child = Command::new(exe)
        .args(["--job", algo.name(), &SCALE_N.to_string(), &per_node.to_string()])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    loop {
        match child.try_wait().map_err(|e| e.to_string())? {
            Some(_) => break,
            None if start.elapsed() > SCALE_DEADLINE => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(format!("{algo} (m per node {per_node}) killed after {} s", SCALE_DEADLINE.as_secs()));
            }
            None => std::thread::sleep(Duration::from_millis(500)),
        }
    }
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{algo}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let mut it = text.split_whitespace();
    let mut next = || it.next().ok_or_else(|| format!("{algo}: bad job output '{text}'"));
    Ok(JobOutcome {
        total_ms: next()?.parse().map_err(|_| "total".to_string())?,
        step_ms: next()?.parse().map_err(|_| "step".to_string())?,
        m: next()?.parse().map_err(|_| "m".to_string())?,
    })
}

/// oneconv runs first; once a required job misses its deadline the
/// criterion has failed and the remaining jobs are not started.
fn scalability() -> Criterion {
    let fail = |detail: String| Criterion {
        id: 10,
        name: "scalability",
        passed: false,
        soft: false,
        detail,
    };
    let mut notes = Vec::new();
    let mut run = |algo: Algorithm, per_node: usize| {
        let r = spawn_job(algo, per_node);
        match &r {
            Ok(o) => notes.push(format!("{algo}@m={} {:.1} s", o.m, o.total_ms / 1e3)),
            Err(e) => notes.push(e.clone()),
        }
        r
    };
    let one = match run(Algorithm::OneConv, 5) {
        Ok(o) => o,
        Err(_) => return fail(format!("{}; remaining jobs skipped", notes.join("; "))),
    };
    let plus = match run(Algorithm::FastGradPlus, 5) {
        Ok(o) => o,
        Err(_) => return fail(format!("{}; remaining jobs skipped", notes.join("; "))),
    };
    let fast = run(Algorithm::FastGrad, 5).ok();
    let doubled = run(Algorithm::OneConv, 10).ok();
    let ordered = fast.as_ref().is_some_and(|f| one.total_ms < plus.total_ms && plus.total_ms < f.total_ms);
    let growth = doubled.as_ref().map(|d| d.step_ms / one.step_ms);
    notes.push(format!("order ok: {ordered}"));
    if let Some(gr) = growth {
        notes.push(format!("per-step growth {gr:.2} <= 3"));
    }
    Criterion {
        id: 10,
        name: "scalability",
        passed: ordered && growth.is_some_and(|g| g <= 3.0),
        soft: false,
        detail: notes.join("; "),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let Some(pos) = args.iter().position(|a| a == "--job") {
        return job(&args[pos + 1..]);
    }
    let seeds: Vec<u64> = (0..10).collect();
    let none = Perturbation::default();
    let mut results = Vec::new();
    let mut report = |c: Criterion| {
        println!("{}", c.line());
        results.push(c);
    };

    report(check(1, "closed_form", secs(1), || Ok(vec![verify::closed_form(12, 10)?])));
    report(check(2, "delta_formula", secs(30), || {
        Ok(vec![verify::delta_formula(50, 12, 0.3, 0, none)?])
    }));
    report(check(3, "rank_one_maintenance", secs(30), || {
        Ok(vec![verify::rank_one_maintenance(20, 15, 5, 0, none)?])
    }));
    report(check(4, "greedy_guarantee", secs(600), || {
        Ok(vec![verify::greedy_guarantee(2, 6, &[1, 2, 3])?])
    }));
    report(check(5, "sketch_accuracy", secs(300), || verify::sketch_accuracy(10, 200, 0.2, &seeds)));
    report(check(6, "gradient_bound", secs(600), || {
        Ok(vec![
            verify::gradient_bound(Algorithm::FastGrad, 200, 0.25, &seeds, 5)?,
            verify::gradient_bound(Algorithm::FastGradPlus, 200, 0.25, &seeds, 5)?,
        ])
    }));
    report(check(7, "hull_guarantee", secs(60), || {
        Ok(vec![verify::hull_guarantee(20, 500, 20, 0.01, 0)?])
    }));
    report(check(8, "monotone_feasible", None, || {
        let graphs = verify::monotonicity_graphs(verify::Scale::Desk);
        Ok(vec![verify::monotonicity(&graphs, 5)?])
    }));
    report(check(9, "quality_parity", None, || verify::quality_parity(&parity_graphs(), 20, 0)));
    report(scalability());

    let hard_failures = results.iter().filter(|c| !c.passed && !c.soft).count();
    println!(
        "acceptance: {} of {} criteria passed, {} hard failures",
        results.iter().filter(|c| c.passed).count(),
        results.len(),
        hard_failures
    );
    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
