// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use relrules::data::{parse_facts, read_raw_facts, Database, RawFact};
use relrules::eval::{evaluate, write_queries_tsv, EvalConfig, TestSet};
use relrules::format::{read_theory_tsv, write_stats_tsv, write_theory_tsv};
use relrules::graph::DataGraph;
use relrules::learner::{learn, LearnerConfig};
use relrules::miner::{mine_patterns_with_stats, recursion_bound, MinerConfig};
use relrules::pattern::DEFAULT_NODE_CAP;
use relrules::rewrite::{rewrite_categoricals, rewrite_raw_facts, CategoryMapping, RewriteSpec};
use serde::Serialize;

use crate::args::{Command, Common, EvalArgs, LearnArgs, MineArgs, ReplayArgs};
use crate::error::CliError;
use crate::manifest::{digest, FileDigest, RunManifest};

pub const THREADS_ENV: &str = "RELRULES_THREADS";
pub const DEFAULT_M: usize = 30;

/// Outcome of one command before the manifest is written.
struct Run {
    resolved: serde_json::Value,
    seed: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    stage_times_s: BTreeMap<String, f64>,
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Replay(args) => replay(args),
        cmd => execute(cmd),
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(CliError::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Learn(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Mine(a) => &a.common,
        Command::Replay(_) => unreachable!("replay has no common arguments"),
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_owned())
}

/// Makes every path absolute so that the manifest replays from any directory.
fn absolutize(cmd: &mut Command) {
    let fix = |c: &mut Common| {
        c.out_dir = absolute(&c.out_dir);
        c.rewrite_spec = c.rewrite_spec.as_deref().map(absolute);
    };
    match cmd {
        Command::Learn(a) => {
            a.train = absolute(&a.train);
            fix(&mut a.common);
        }
        Command::Eval(a) => {
            a.train = absolute(&a.train);
            a.test = absolute(&a.test);
            a.theory = absolute(&a.theory);
            fix(&mut a.common);
        }
        Command::Mine(a) => {
            a.train = absolute(&a.train);
            fix(&mut a.common);
        }
        Command::Replay(_) => {}
    }
}

fn execute(mut cmd: Command) -> Result<(), CliError> {
    absolutize(&mut cmd);
    let start = Instant::now();
    let threads = resolve_threads(common(&cmd).threads)?;
    let out_dir = common(&cmd).out_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let run = pool.install(|| match &cmd {
        Command::Learn(a) => run_learn(a),
        Command::Eval(a) => run_eval(a),
        Command::Mine(a) => run_mine(a),
        Command::Replay(_) => unreachable!(),
    })?;
    let manifest = RunManifest {
        tool: "relrules".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        resolved: run.resolved,
        seed: run.seed,
        threads,
        inputs: run.inputs,
        outputs: run.outputs,
        stage_times_s: run.stage_times_s,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    manifest.write(&out_dir)?;
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<(), CliError> {
    let manifest = RunManifest::read(&args.manifest)?;
    manifest.verify_inputs()?;
    let mut cmd = manifest.command;
    let c = match &mut cmd {
        Command::Learn(a) => &mut a.common,
        Command::Eval(a) => &mut a.common,
        Command::Mine(a) => &mut a.common,
        Command::Replay(_) => return Err(CliError::Config("a manifest cannot record a replay".into())),
    };
    if let Some(dir) = args.out_dir {
        c.out_dir = dir;
    }
    c.threads = Some(args.threads.unwrap_or(manifest.threads));
    execute(cmd)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn read_rewrite_spec(c: &Common) -> Result<Option<RewriteSpec>, CliError> {
    match &c.rewrite_spec {
        None => Ok(None),
        Some(path) => Ok(Some(RewriteSpec::parse(open(path)?).map_err(|e| annotate(path, e.into()))?)),
    }
}

fn annotate(path: &Path, e: CliError) -> CliError {
    match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Parses training facts and applies the optional categorical rewrite.
fn load_training(path: &Path, c: &Common) -> Result<(Database, CategoryMapping, Vec<FileDigest>), CliError> {
    let mut inputs = vec![digest("train", path)?];
    let db = parse_facts(open(path)?, &c.format()).map_err(|e| annotate(path, e.into()))?;
    if db.is_empty() {
        return Err(CliError::Io(format!("{}: no facts parsed", path.display())));
    }
    let spec = read_rewrite_spec(c)?;
    if let Some(p) = &c.rewrite_spec {
        inputs.push(digest("rewrite_spec", p)?);
    }
    match spec {
        Some(spec) if !spec.is_empty() => {
            let (db, mapping) = rewrite_categoricals(&db, &spec)?;
            Ok((db, mapping, inputs))
        }
        _ => Ok((db, CategoryMapping::default(), inputs)),
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn run_learn(a: &LearnArgs) -> Result<Run, CliError> {
    if a.paths == Some(0) {
        return Err(CliError::Config("--paths must be at least 1".into()));
    }
    let t = Instant::now();
    let (db, mapping, inputs) = load_training(&a.train, &a.common)?;
    let mut times = BTreeMap::from([("load_s".to_owned(), secs(t))]);

    let m = match a.m_per_relation {
        Some(k) => k * db.num_predicates(),
        None => a.m.unwrap_or(DEFAULT_M),
    };
    let cfg = LearnerConfig {
        m,
        epsilon: a.epsilon,
        depth: a.depth,
        paths: a.paths,
        budget: a.budget.into(),
        pattern_space_estimate: a.pattern_estimate,
        mode: a.common.symmetry_mode.into(),
        prior_family: a.prior_family.into(),
        complexity_exponent: a.complexity_exponent.into(),
        seed: a.seed,
        node_cap: DEFAULT_NODE_CAP,
    };
    let out = learn(&db, &cfg)?;
    let st = &out.report.times;
    for (k, v) in [
        ("build_graph_s", st.build_graph_s),
        ("pilot_s", st.pilot_s),
        ("mine_s", st.mine_s),
        ("candidates_s", st.candidates_s),
        ("greedy_s", st.greedy_s),
    ] {
        times.insert(k.to_owned(), v);
    }

    let dir = &a.common.out_dir;
    let mut outputs = Vec::new();
    let theory_path = dir.join("theory.tsv");
    write_file(&theory_path, |w| write_theory_tsv(&out.theory, w))?;
    outputs.push(digest("theory", &theory_path)?);

    let stats_path = dir.join("stats.tsv");
    write_file(&stats_path, |w| {
        write_stats_tsv(out.candidates.iter().map(|c| (c.text.as_str(), &c.stats)), w)
    })?;
    outputs.push(digest("stats", &stats_path)?);

    // Timings live in the manifest so that the report is reproducible byte for byte.
    let mut report = serde_json::to_value(&out.report).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(obj) = report.as_object_mut() {
        obj.remove("times");
    }
    let report_path = dir.join("report.json");
    write_json(&report_path, &report)?;
    outputs.push(digest("report", &report_path)?);

    if !mapping.entries.is_empty() {
        let restored_path = dir.join("theory_restored.tsv");
        let mut buf = Vec::new();
        write_theory_tsv(&out.theory, &mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
        let text = String::from_utf8(buf).map_err(|e| CliError::Internal(e.to_string()))?;
        write_file(&restored_path, |w| {
            for line in text.lines() {
                if line.starts_with('#') {
                    writeln!(w, "{line}")?;
                } else {
                    let mut fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
                    fields[1] = mapping.restore_rule_text(&fields[1]);
                    writeln!(w, "{}", fields.join("\t"))?;
                }
            }
            Ok(())
        })?;
        outputs.push(digest("theory_restored", &restored_path)?);
        let map_path = dir.join("category_map.tsv");
        write_file(&map_path, |w| mapping.write_tsv(w))?;
        outputs.push(digest("category_map", &map_path)?);
    }

    let mut resolved = serde_json::to_value(&cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(obj) = resolved.as_object_mut() {
        obj.insert("paths_used".into(), out.report.paths_used.into());
    }
    Ok(Run { resolved, seed: a.seed, inputs, outputs, stage_times_s: times })
}

fn run_eval(a: &EvalArgs) -> Result<Run, CliError> {
    let cfg = EvalConfig {
        hits: a.hits.clone(),
        direction: a.direction.into(),
        filtered: !a.no_filter,
        mode: a.common.symmetry_mode.into(),
    };
    cfg.validate()?;
    let t = Instant::now();
    let (db, _, mut inputs) = load_training(&a.train, &a.common)?;
    inputs.push(digest("theory", &a.theory)?);
    inputs.push(digest("test", &a.test)?);
    let theory = read_theory_tsv(open(&a.theory)?, &db).map_err(|e| annotate(&a.theory, e.into()))?;
    let mut raw: Vec<RawFact> =
        read_raw_facts(open(&a.test)?, &a.common.format()).map_err(|e| annotate(&a.test, e.into()))?;
    if let Some(spec) = read_rewrite_spec(&a.common)? {
        raw = rewrite_raw_facts(&raw, &spec);
    }
    let test = TestSet::resolve(&raw, &db).map_err(|e| annotate(&a.test, e.into()))?;
    let graph = DataGraph::build(&db);
    let mut times = BTreeMap::from([("load_s".to_owned(), secs(t))]);

    let t = Instant::now();
    let out = evaluate(&test, &theory, &db, &graph, &cfg).map_err(|e| annotate(&a.test, e.into()))?;
    times.insert("evaluate_s".into(), secs(t));

    let dir = &a.common.out_dir;
    let metrics_path = dir.join("metrics.json");
    write_json(&metrics_path, &out.metrics)?;
    let queries_path = dir.join("queries.tsv");
    write_file(&queries_path, |w| write_queries_tsv(&out, &test, &db, w))?;
    let outputs = vec![digest("metrics", &metrics_path)?, digest("queries", &queries_path)?];
    let resolved = serde_json::to_value(&cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(Run { resolved, seed: 0, inputs, outputs, stage_times_s: times })
}

#[derive(Serialize)]
struct BoundReport {
    depth: usize,
    paths: usize,
    nodes: usize,
    edges: usize,
    recursions: u64,
    bound: u64,
    within_bound: bool,
    patterns: usize,
    groundings: usize,
}

fn run_mine(a: &MineArgs) -> Result<Run, CliError> {
    let cfg = MinerConfig {
        depth: a.depth,
        paths: a.paths,
        seed: a.seed,
        node_cap: DEFAULT_NODE_CAP,
        mode: a.common.symmetry_mode.into(),
    };
    cfg.validate()?;
    let t = Instant::now();
    let (db, _, inputs) = load_training(&a.train, &a.common)?;
    let graph = DataGraph::build(&db);
    let mut times = BTreeMap::from([("load_s".to_owned(), secs(t))]);
    let t = Instant::now();
    let (store, stats) = mine_patterns_with_stats(&graph, &cfg)?;
    times.insert("mine_s".into(), secs(t));

    let dir = &a.common.out_dir;
    let patterns_path = dir.join("patterns.tsv");
    write_file(&patterns_path, |w| store.write_dump(db.predicates(), w))?;
    let bound = recursion_bound(&graph, a.depth, a.paths);
    let report = BoundReport {
        depth: a.depth,
        paths: a.paths,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        recursions: stats.recursions,
        bound,
        within_bound: stats.recursions <= bound,
        patterns: store.len(),
        groundings: store.total_groundings(),
    };
    let bound_path = dir.join("bound.json");
    write_json(&bound_path, &report)?;
    let outputs = vec![digest("patterns", &patterns_path)?, digest("bound", &bound_path)?];
    let resolved = serde_json::to_value(&cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(Run { resolved, seed: a.seed, inputs, outputs, stage_times_s: times })
}
