use std::io::{self, Write};

use clap::ValueEnum;
use kopt_core::optimize::{AlgoParams, Algorithm, Diagnostics, SelectionResult};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
struct StepRecord {
    step: usize,
    edge: [i64; 2],
    nodes: [usize; 2],
    kirchhoff: Option<f64>,
    kirchhoff_per_node: Option<f64>,
    score: f64,
    elapsed_ms: f64,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    algo: Algorithm,
    n: usize,
    m: usize,
    params: &'a AlgoParams,
    initial_kirchhoff: Option<f64>,
    initial_kirchhoff_per_node: Option<f64>,
    kirchhoff_estimated: bool,
    setup_ms: f64,
    total_ms: f64,
    diagnostics: &'a Diagnostics,
    steps: Vec<StepRecord>,
}

fn per_node(k: Option<f64>, n: usize) -> Option<f64> {
    k.map(|k| k / n as f64)
}

fn steps(r: &SelectionResult) -> Vec<StepRecord> {
    r.steps
        .iter()
        .enumerate()
        .map(|(i, s)| StepRecord {
            step: i + 1,
            edge: [s.labels.0, s.labels.1],
            nodes: [s.edge.0, s.edge.1],
            kirchhoff: s.kirchhoff,
            kirchhoff_per_node: per_node(s.kirchhoff, r.n),
            score: s.score,
            elapsed_ms: s.elapsed_ms,
        })
        .collect()
}

pub fn write_run<W: Write>(out: W, r: &SelectionResult, format: Format) -> io::Result<()> {
    match format {
        Format::Json => {
            let record = RunRecord {
                algo: r.algo,
                n: r.n,
                m: r.m,
                params: &r.params,
                initial_kirchhoff: r.initial_kirchhoff,
                initial_kirchhoff_per_node: per_node(r.initial_kirchhoff, r.n),
                kirchhoff_estimated: r.kirchhoff_estimated,
                setup_ms: r.setup_ms,
                total_ms: r.total_ms,
                diagnostics: &r.diagnostics,
                steps: steps(r),
            };
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &record)?;
            writeln!(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "algo",
                "step",
                "u",
                "v",
                "node_u",
                "node_v",
                "kirchhoff",
                "kirchhoff_per_node",
                "score",
                "elapsed_ms",
            ])?;
            for s in steps(r) {
                w.write_record([
                    r.algo.name().to_string(),
                    s.step.to_string(),
                    s.edge[0].to_string(),
                    s.edge[1].to_string(),
                    s.nodes[0].to_string(),
                    s.nodes[1].to_string(),
                    opt(s.kirchhoff),
                    opt(s.kirchhoff_per_node),
                    s.score.to_string(),
                    s.elapsed_ms.to_string(),
                ])?;
            }
            w.flush()
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const BENCH_COLUMNS: [&str; 8] = [
    "algo",
    "graph",
    "k",
    "n",
    "m",
    "kirchhoff_final",
    "kirchhoff_final_per_node",
    "total_ms",
];

pub fn write_bench_header<W: Write>(out: W) -> io::Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_COLUMNS)?;
    Ok(w)
}

/// One row per budget in `ks`, read off the step prefix of `r`. The time
/// of a prefix is the setup plus its own rounds.
pub fn write_bench_rows<W: Write>(w: &mut csv::Writer<W>, graph: &str, r: &SelectionResult, ks: &[usize]) -> io::Result<()> {
    for &k in ks {
        if k == 0 || k > r.steps.len() {
            continue;
        }
        let kirchhoff = r.steps[k - 1].kirchhoff;
        let ms = r.setup_ms + r.steps[..k].iter().map(|s| s.elapsed_ms).sum::<f64>();
        w.write_record([
            r.algo.name().to_string(),
            graph.to_string(),
            k.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            opt(kirchhoff),
            opt(per_node(kirchhoff, r.n)),
            ms.to_string(),
        ])?;
    }
    Ok(())
}
