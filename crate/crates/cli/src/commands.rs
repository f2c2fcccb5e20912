use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use tricolor::graph::{self, Graph};
use tricolor::linalg::Vectors;
use tricolor::pipeline::{self, ExperimentConfig, ThresholdPolicy};
use tricolor::rounding::{self, ThresholdParams};
use tricolor::sos::{self, SdpSolution, StrictVector3Coloring};
use tricolor::vector_coloring::{self as vcol, VectorColoring};
use tricolor::walks::{self, WalkCheckpoint, WalkContext};
use tricolor::{covers, params};

use crate::{AnalyzeKind, Cli, Command, Format, Global, Input, Policy, RoundMethod, SdpMethod, ThresholdArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tricolor::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use tricolor::Error as E;
        match self {
            CliError::Core(E::NotThreeColorable { .. }) => 3,
            CliError::Core(
                E::Precondition(_) | E::PreconditionViolated { .. } | E::PruneExhausted { .. } | E::DegenerateThreshold(_),
            ) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Command output: a JSON document and the same data as CSV.
struct Report {
    json: Value,
    csv: String,
}

impl Report {
    fn new<T: Serialize>(value: &T, header: &str, rows: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut csv = String::from(header);
        csv.push('\n');
        for r in rows {
            csv.push_str(&r);
            csv.push('\n');
        }
        Ok(Report { json: serde_json::to_value(value)?, csv })
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn emit(global: &Global, text: &str) -> Result<()> {
    match &global.out {
        Some(p) => write_file(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_report(global: &Global, r: Report) -> Result<()> {
    let text = match global.format {
        Format::Json => serde_json::to_string_pretty(&r.json)? + "\n",
        Format::Csv => r.csv,
    };
    emit(global, &text)
}

fn load_config(global: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(p) => ExperimentConfig::from_json(&read_file(p)?)?,
        None => ExperimentConfig::default(),
    };
    let s = &mut cfg.color.slack;
    if let Some(x) = global.samples {
        s.samples = x;
    }
    if let Some(x) = global.slack_eps_dot {
        s.eps_dot = x;
    }
    if let Some(x) = global.slack_mass_floor {
        s.mass_floor = x;
    }
    if let Some(x) = global.slack_prune_r {
        s.prune_r = x;
    }
    if let Some(x) = global.slack_threshold {
        s.threshold_slack = x;
    }
    if let Some(x) = global.slack_spread {
        s.spread_constant = x;
    }
    if let Some(seed) = global.seed {
        cfg.color.seed = seed;
        s.seed = seed;
        cfg.seeds = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Loaded {
    graph: Graph,
    vectors: Vectors,
    kappa: f64,
}

fn load_graph(path: &Path) -> Result<(Graph, Option<Vec<u8>>)> {
    let f = fs::File::open(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
    Ok(Graph::read_text(BufReader::new(f))?)
}

fn load_input(input: &Input, seed: u64) -> Result<Loaded> {
    let (graph, planted) = load_graph(&input.graph)?;
    let (vectors, kappa) = match &input.vectors {
        Some(p) => {
            let text = read_file(p)?;
            match serde_json::from_str::<SdpSolution>(&text) {
                Ok(s) => {
                    let k = s.achieved_kappa(&graph).max(s.kappa);
                    (s.vectors, k)
                }
                Err(_) => (serde_json::from_str::<Vectors>(&text)?, 3.0),
            }
        }
        None => match &planted {
            Some(p) => (sos::planted_simplex(p).vectors, 3.0),
            None => {
                let s = sos::solve_vector_coloring_lowrank(&graph, 3.0, 3, 1e-9, 400, seed)?;
                let k = s.achieved_kappa(&graph).max(3.0);
                (s.vectors, k)
            }
        },
    };
    if vectors.len() != graph.n() {
        return Err(CliError::Usage(format!("{} vectors for {} vertices", vectors.len(), graph.n())));
    }
    Ok(Loaded { graph, vectors, kappa })
}

impl Loaded {
    fn coloring(&self) -> Result<VectorColoring> {
        let kappa = if self.kappa.is_finite() { self.kappa } else { 3.0 };
        Ok(VectorColoring::new(&self.graph, (0..self.graph.n()).collect(), self.vectors.clone(), kappa)?)
    }

    fn strict(&self) -> Result<StrictVector3Coloring> {
        let s = StrictVector3Coloring { vectors: self.vectors.clone() };
        let r = s.edge_residual(&self.graph);
        if r > 1e-6 {
            return Err(tricolor::Error::Precondition(format!(
                "walks need a strict vector 3-coloring; edge residual {r:e}"
            ))
            .into());
        }
        Ok(s)
    }
}

fn threshold(args: &ThresholdArgs, cfg: &ExperimentConfig, g: &Graph, vc: &VectorColoring) -> Result<ThresholdParams> {
    if let Some(t) = args.t {
        return Ok(ThresholdParams::explicit(t));
    }
    let c = args.c.unwrap_or(cfg.color.c);
    let policy = match args.policy {
        Some(Policy::Kappa) => ThresholdPolicy::Kappa,
        Some(Policy::Inefficient) => ThresholdPolicy::Inefficient,
        None => cfg.color.t_policy,
    };
    let d = rounding::threshold_degree(g, vc).max(2) as f64;
    Ok(match policy {
        ThresholdPolicy::Kappa => rounding::kms_threshold(vc.kappa, d)?,
        ThresholdPolicy::Inefficient => rounding::inefficient_threshold(c, d)?,
    })
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli.global)?;
    let g = &cli.global;
    let seed = cfg.color.seed;
    let samples = cfg.color.slack.samples;
    match cli.command {
        Command::Generate { n, degree, p, weights } => {
            let n = n.unwrap_or(cfg.n);
            let w = match weights {
                Some(w) => [w[0], w[1], w[2]],
                None => cfg.class_weights,
            };
            let p = match (p, degree) {
                (Some(p), _) => p,
                (None, Some(d)) => graph::edge_prob_for_degree(n, d),
                (None, None) => graph::edge_prob_for_degree(n, cfg.degrees[0]),
            };
            let inst = graph::generate_planted(n, w, p, seed)?;
            emit(g, &inst.graph.to_text(Some(&inst.planted)))?;
        }
        Command::SolveSdp { graph, kappa, method, dim, tol, max_iter } => {
            let (gr, _) = load_graph(&graph)?;
            let sol = match method {
                SdpMethod::Lowrank => sos::solve_vector_coloring_lowrank(&gr, kappa, dim, tol, max_iter, seed)?,
                SdpMethod::Full => sos::solve_vector_coloring_sdp(&gr, kappa, tol, max_iter, seed)?,
            };
            let rows = (0..sol.vectors.len()).map(|i| {
                let coords: Vec<String> = sol.vectors.row(i).iter().map(|x| x.to_string()).collect();
                format!("{i},{}", coords.join(","))
            });
            let header = format!(
                "vertex,{}",
                (0..sol.vectors.dim()).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",")
            );
            let mut r = Report::new(&sol, &header, rows)?;
            r.json["achieved_kappa"] = json!(sol.achieved_kappa(&gr));
            emit_report(g, r)?;
        }
        Command::Round { method, input, threshold: ta } => {
            let l = load_input(&input, seed)?;
            let vc = l.coloring()?;
            let th = threshold(&ta, &cfg, &l.graph, &vc)?;
            let out = match method {
                RoundMethod::Kms => rounding::kms_round_with(&l.graph, &vc, th.t, seed)?,
                RoundMethod::KmsPrime => rounding::kms_prime_round(&l.graph, &vc, &th, seed)?,
            };
            let row = format!(
                "{},{},{},{},{}",
                out.seed,
                out.t,
                out.selected.len(),
                out.returned.len(),
                join(&out.returned)
            );
            emit_report(g, Report::new(&out, "seed,t,selected,returned,set", [row])?)?;
        }
        Command::Analyze { kind, input, threshold: ta, vertex } => {
            let l = load_input(&input, seed)?;
            let vc = l.coloring()?;
            let th = threshold(&ta, &cfg, &l.graph, &vc)?;
            let vertices: Vec<usize> = match vertex {
                Some(v) => {
                    l.graph.check_vertex(v)?;
                    vec![v]
                }
                None => (0..l.graph.n()).collect(),
            };
            let r = match kind {
                AnalyzeKind::Failure => {
                    let rep = rounding::estimate_failure(&l.graph, &vc, th.t, samples, seed)?;
                    let rows: Vec<String> = rep
                        .per_vertex
                        .iter()
                        .filter(|f| vertices.contains(&f.vertex))
                        .map(|f| match f.estimate {
                            Some(e) => format!("{},{},{},{}", f.vertex, e.p, e.lo, e.hi),
                            None => format!("{},,,", f.vertex),
                        })
                        .collect();
                    Report::new(&rep, "vertex,p,lo,hi", rows)?
                }
                AnalyzeKind::Covers => {
                    let s = 3f64.sqrt() * th.t;
                    let mut entries = Vec::new();
                    for &i in &vertices {
                        let nbrs = l.graph.neighbors(i);
                        if nbrs.is_empty() {
                            continue;
                        }
                        let rows = nbrs
                            .iter()
                            .map(|&j| vcol::v_orth(l.vectors.row(i), l.vectors.row(j)))
                            .collect::<tricolor::Result<Vec<_>>>()?;
                        let x = Vectors::from_rows(&rows)?;
                        let est = covers::estimate_cover_prob(&x, s, samples, seed)?;
                        let holds = covers::cover_lower_bound_holds(x.len(), s, &est);
                        entries.push(json!({"vertex": i, "size": x.len(), "s": s, "estimate": est, "lower_bound_holds": holds}));
                    }
                    let rows: Vec<String> = entries
                        .iter()
                        .map(|e| {
                            format!(
                                "{},{},{},{},{}",
                                e["vertex"], e["size"], e["s"], e["estimate"]["p"], e["lower_bound_holds"]
                            )
                        })
                        .collect();
                    Report::new(&entries, "vertex,size,s,p,lower_bound_holds", rows)?
                }
                AnalyzeKind::Packing => {
                    let mut packs = Vec::new();
                    for &i in &vertices {
                        if l.graph.degree(i) == 0 {
                            continue;
                        }
                        packs.push((i, rounding::packing_from_kms_prime(&l.graph, &vc, i, th.t, samples, seed)?));
                    }
                    let rows: Vec<String> = packs
                        .iter()
                        .flat_map(|(i, m)| m.indices.iter().zip(&m.weights).map(move |(j, w)| format!("{i},{j},{w}")))
                        .collect();
                    let docs: Vec<Value> = packs
                        .iter()
                        .map(|(i, m)| json!({"vertex": i, "total": m.total(), "packing": m}))
                        .collect();
                    Report::new(&docs, "vertex,neighbor,weight", rows)?
                }
            };
            emit_report(g, r)?;
        }
        Command::Walk2 { input, threshold: ta, vertex, checkpoint, resume } => {
            let (l, ctx) = walk_context(&input, &ta, &cfg, checkpoint.as_deref(), resume.as_deref())?;
            let center = match vertex {
                Some(v) => {
                    if !ctx.alive.get(v).copied().unwrap_or(false) {
                        return Err(tricolor::Error::Precondition(format!("vertex {v} did not survive pruning")).into());
                    }
                    v
                }
                None => walks::select_center(&ctx)?.center,
            };
            let ex = walks::second_level_independent_set(&ctx, center, None, seed)?;
            debug_assert!(graph::is_independent_set(&l.graph, &ex.set));
            let row = format!("{center},{},{},{}", ex.targets.len(), ex.set.len(), join(&ex.set));
            let mut r = Report::new(&ex, "center,targets,size,set", [row])?;
            r.json["center"] = json!(center);
            r.json["trace"] = serde_json::to_value(&ctx.trace)?;
            emit_report(g, r)?;
        }
        Command::Walk3 { input, threshold: ta, c_prime, checkpoint, resume } => {
            let (_, ctx) = walk_context(&input, &ta, &cfg, checkpoint.as_deref(), resume.as_deref())?;
            let center = walks::select_center(&ctx)?;
            let sets = walks::third_level_sets(&ctx, center.center, &center.s)?;
            let res = walks::third_level_independent_set(&ctx, sets, c_prime.unwrap_or(cfg.color.c_prime), None, seed)?;
            let row = format!(
                "{},{},{:?},{},{}",
                center.center,
                res.sets.w.len(),
                res.branch,
                res.set().len(),
                join(res.set())
            );
            let mut r = Report::new(&res, "center,w,branch,size,set", [row])?;
            r.json["trace"] = serde_json::to_value(&ctx.trace)?;
            emit_report(g, r)?;
        }
        Command::Params { c, c_prime, optimize, grid } => {
            let r = if optimize {
                let cs = params::linspace(0.0, 0.06, grid);
                let cps = params::linspace(0.0, 0.06, grid);
                let opt = params::optimize(&cs, &cps)?;
                let rows: Vec<String> = opt.best.iter().map(|p| p.csv_row()).collect();
                Report::new(&opt, params::ParamPoint::CSV_HEADER, rows)?
            } else {
                let p = params::exponents(c.unwrap_or(cfg.color.c), c_prime.unwrap_or(cfg.color.c_prime))?;
                let mut r = Report::new(&p, params::ParamPoint::CSV_HEADER, [p.csv_row()])?;
                r.json["clears_target"] = json!(p.clears_target());
                r
            };
            emit_report(g, r)?;
        }
        Command::Color { input, events } => {
            let (gr, _) = load_graph(&input.graph)?;
            let run = match &input.vectors {
                Some(_) => {
                    let l = load_input(&input, seed)?;
                    pipeline::color_graph_with(&gr, Some(&l.vectors), &cfg.color)?
                }
                None => pipeline::color_graph(&gr, &cfg.color)?,
            };
            if let Some(p) = events {
                write_file(&p, &serde_json::to_string_pretty(&run.events)?)?;
            }
            let rows = (0..gr.n()).map(|v| match run.assignment.get(v) {
                Some(c) => format!("{v},{c}"),
                None => format!("{v},"),
            });
            let mut r = Report::new(&run, "vertex,color", rows)?;
            r.json["num_colors"] = json!(run.num_colors());
            r.json["greedy_colors"] = json!(graph::greedy_coloring(&gr).num_colors());
            emit_report(g, r)?;
            for w in &run.witnesses {
                eprintln!("non-3-colorable witness: odd cycle {:?} around vertex {}", w.cycle, w.center);
            }
            if !run.witnesses.is_empty() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Bench { n, degrees, seeds, dry_run, timings } => {
            let mut cfg = cfg;
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(d) = degrees {
                cfg.degrees = d;
            }
            if let Some(k) = seeds {
                cfg.seeds = (seed..seed + k).collect();
            }
            cfg.dry_run |= dry_run;
            cfg.timings |= timings;
            cfg.validate()?;
            let out = pipeline::run_experiment(&cfg)?;
            let text = match g.format {
                Format::Csv => out.to_csv(),
                Format::Json => {
                    let mut v = serde_json::to_value(&out)?;
                    v["kms_slope"] = json!(out.kms_slope());
                    serde_json::to_string_pretty(&v)? + "\n"
                }
            };
            match (&g.out, &cfg.output) {
                (None, Some(p)) => write_file(Path::new(p), &text)?,
                _ => emit(g, &text)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn walk_context(
    input: &Input,
    ta: &ThresholdArgs,
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    resume: Option<&Path>,
) -> Result<(Loaded, WalkContext)> {
    let l = load_input(input, cfg.color.seed)?;
    let strict = l.strict()?;
    if let Some(p) = resume {
        let cp = WalkCheckpoint::from_json(&read_file(p)?)?;
        let ctx = WalkContext::from_checkpoint(&l.graph, &strict, &cp)?;
        return Ok((l, ctx));
    }
    let vc = l.coloring()?;
    let th = threshold(ta, cfg, &l.graph, &vc)?;
    let c = ta.c.unwrap_or(cfg.color.c);
    let ctx = walks::second_level_prune(&l.graph, &strict, th, c, cfg.color.slack)?;
    if let Some(p) = checkpoint {
        write_file(p, &ctx.checkpoint().to_json()?)?;
    }
    Ok((l, ctx))
}
