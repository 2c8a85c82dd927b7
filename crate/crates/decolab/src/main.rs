//! Command-line front end: build lattices, dump samples, train decoders,
//! estimate failure points, and sweep for thresholds.
//!
//! Every flag can also come from a `--config` file of flat `key = value`
//! lines whose keys match the long flag names; explicit command-line flags
//! win over the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use decolab::codes::{build_code, CodeKind, CodeLattice};
use decolab::exgraph::{build_graph, ExcitationGraph};
use decolab::mlp::{train_decoder_logged, HeadSplit, TrainingConfig};
use decolab::noise::{bulk_neighbor_count, trial_rng, NoiseKind, NoiseModel};

#[derive(Parser)]
#[command(
    name = "decolab",
    about = "decoding laboratory for 2D topological codes",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a lattice, run its self-checks, and optionally write it out
    Build(CommonArgs),
    /// Sample errors and dump a trial,error,syndrome stream
    Sample(CommonArgs),
    /// Train a logical-class predictor and write a model file
    Train(TrainArgs),
    /// Estimate the failure probability at one operating point
    Evaluate(EvaluateArgs),
    /// Sweep effective rates across distances and locate the crossing
    Threshold(CommonArgs),
    /// Exact maximum-likelihood baseline (d=3 color code scale)
    Oracle(CommonArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// code family: color | toric
    #[arg(long)]
    code: Option<String>,
    /// odd code distance; `threshold` takes a comma list like 5,7
    #[arg(long)]
    distance: Option<String>,
    /// noise model: bitphase | depol | nn-depol
    #[arg(long)]
    noise: Option<String>,
    /// target effective error rate; `threshold` takes start:stop:step
    #[arg(long = "p-eff")]
    p_eff: Option<String>,
    /// Monte Carlo trials (per point for sweeps)
    #[arg(long)]
    trials: Option<u64>,
    /// master seed; everything downstream derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// flat key = value file supplying defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
    /// output path (lattice text, sample CSV, model file, or CSV/JSON stem)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// hidden layer count (default: tuned table / scaling rule)
    #[arg(long = "hidden-layers")]
    hidden_layers: Option<usize>,
    /// hidden layer width
    #[arg(long)]
    width: Option<usize>,
    /// minibatch size
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// total optimizer steps
    #[arg(long)]
    steps: Option<usize>,
    /// Adam learning rate
    #[arg(long = "learning-rate")]
    learning_rate: Option<f64>,
    /// explicit schedule like 0.09x10000,0.18x20000 (rate x steps, ...)
    #[arg(long)]
    curriculum: Option<String>,
    /// train every step at the target rate (no warm-up stage)
    #[arg(long, default_value_t = false)]
    direct: bool,
    /// head layout: joint | css
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// decoder: neural | mwpm | removal
    #[arg(long)]
    decoder: Option<String>,
    /// model file for the neural decoder
    #[arg(long)]
    model: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Build(a) => cmd_build(a),
        Cmd::Sample(a) => cmd_sample(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Threshold(a) => cmd_threshold(a),
        Cmd::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

// ---------------------------------------------------------------------------
// Config-file merging
// ---------------------------------------------------------------------------

/// Flag values after merging the command line over the `--config` file.
struct Resolved {
    file: BTreeMap<String, String>,
}

impl Resolved {
    fn new(config: &Option<PathBuf>) -> Result<Resolved, String> {
        let mut file = BTreeMap::new();
        if let Some(path) = config {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("config {}: {e}", path.display()))?;
            for (ln, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or(format!("config line {}: expected key = value", ln + 1))?;
                file.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Resolved { file })
    }

    /// Command-line value if given, else config-file value, else None.
    fn get<T: Clone>(&self, key: &str, cli: &Option<T>) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = cli {
            return Ok(Some(v.clone()));
        }
        match self.file.get(key) {
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("config key {key}: {e}")),
            None => Ok(None),
        }
    }

    fn require<T: Clone + FromStr>(&self, key: &str, cli: &Option<T>) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key, cli)?
            .ok_or(format!("missing --{key} (flag or config key)"))
    }
}

fn parse_code(s: &str) -> Result<CodeKind, String> {
    CodeKind::parse_name(s).ok_or(format!("unknown code family {s:?} (want color | toric)"))
}

fn parse_noise(s: &str) -> Result<NoiseKind, String> {
    NoiseKind::parse_name(s)
        .ok_or(format!("unknown noise model {s:?} (want bitphase | depol | nn-depol)"))
}

fn single_distance(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("bad distance {s:?}"))
}

fn build_pair(kind: CodeKind, d: usize) -> Result<(CodeLattice, ExcitationGraph), String> {
    let lattice = build_code(kind, d).map_err(|e| e.to_string())?;
    let graph = build_graph(&lattice).map_err(|e| e.to_string())?;
    Ok((lattice, graph))
}

// ---------------------------------------------------------------------------
// build / sample / train
// ---------------------------------------------------------------------------

fn cmd_build(args: CommonArgs) -> Result<(), String> {
    let r = Resolved::new(&args.config)?;
    let kind = parse_code(&r.require("code", &args.code)?)?;
    let d = single_distance(&r.require("distance", &args.distance)?)?;
    let lattice = build_code(kind, d).map_err(|e| e.to_string())?;
    let report = lattice.validate();
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    if !report.ok() {
        return Err("lattice failed validation".into());
    }
    println!(
        "{} d={} | {} qubits, {} generators, fingerprint {:#018x}",
        kind.name(),
        d,
        lattice.n(),
        lattice.num_generators(),
        lattice.fingerprint()
    );
    if let Some(out) = r.get("out", &args.out)? {
        fs::write(&out, lattice.export_text()).map_err(|e| e.to_string())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_sample(args: CommonArgs) -> Result<(), String> {
    let r = Resolved::new(&args.config)?;
    let kind = parse_code(&r.require("code", &args.code)?)?;
    let d = single_distance(&r.require("distance", &args.distance)?)?;
    let noise = parse_noise(&r.require("noise", &args.noise)?)?;
    let p_eff: f64 = r
        .require("p-eff", &args.p_eff)?
        .parse()
        .map_err(|_| "bad --p-eff")?;
    let trials = r.require("trials", &args.trials)?;
    let seed = r.require("seed", &args.seed)?;
    let (lattice, _) = build_pair(kind, d)?;
    let model = NoiseModel::from_effective(noise, p_eff, bulk_neighbor_count(&lattice))
        .map_err(|e| e.to_string())?;
    let mut text = String::from("trial,error,syndrome\n");
    for t in 0..trials {
        let error = model.sample(&lattice, &mut trial_rng(seed, t));
        let syndrome: String = lattice
            .stabilizers
            .syndrome(&error)
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        writeln!(text, "{t},{error},{syndrome}").unwrap();
    }
    match r.get("out", &args.out)? {
        Some(out) => {
            fs::write(&out, text).map_err(|e| e.to_string())?;
            println!("wrote {trials} samples to {}", out.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), String> {
    let c = &args.common;
    let r = Resolved::new(&c.config)?;
    let kind = parse_code(&r.require("code", &c.code)?)?;
    let d = single_distance(&r.require("distance", &c.distance)?)?;
    let noise = parse_noise(&r.require("noise", &c.noise)?)?;
    let p_eff: f64 = r
        .require("p-eff", &c.p_eff)?
        .parse()
        .map_err(|_| "bad --p-eff")?;
    let seed = r.require("seed", &c.seed)?;
    let out = r.require("out", &c.out)?;

    let mut cfg = TrainingConfig::for_code(kind, noise, d, p_eff);
    if let Some(h) = r.get("hidden-layers", &args.hidden_layers)? {
        cfg.hidden_layers = h;
    }
    if let Some(w) = r.get("width", &args.width)? {
        cfg.width = w;
    }
    if let Some(b) = r.get("batch-size", &args.batch_size)? {
        cfg.batch_size = b;
    }
    if let Some(t) = r.get("steps", &args.steps)? {
        cfg.steps = t;
        cfg = cfg.with_target(p_eff); // re-derive the default schedule
    }
    if let Some(lr) = r.get("learning-rate", &args.learning_rate)? {
        cfg.adam.learning_rate = lr;
    }
    if args.direct || r.file.get("direct").is_some_and(|v| v == "true") {
        cfg = cfg.direct_at(p_eff);
    }
    if let Some(spec) = r.get("curriculum", &args.curriculum)? {
        cfg.curriculum = parse_curriculum(&spec)?;
        cfg.steps = cfg.curriculum.iter().map(|&(_, s)| s).sum();
    }
    let split = match r.get("split", &args.split)?.as_deref() {
        None | Some("joint") => HeadSplit::Joint,
        Some("css") => HeadSplit::CssHalves,
        Some(other) => return Err(format!("unknown split {other:?} (want joint | css)")),
    };

    let (lattice, graph) = build_pair(kind, d)?;
    println!(
        "training {} d={} {} at p_eff={} | H={} N={} B={} T={} seed={}",
        kind.name(),
        d,
        noise.name(),
        p_eff,
        cfg.hidden_layers,
        cfg.width,
        cfg.batch_size,
        cfg.steps,
        seed
    );
    let start = Instant::now();
    let total = cfg.steps;
    let (model, log) =
        train_decoder_logged(&lattice, &graph, noise, &cfg, seed, split, |entry| {
            println!(
                "step {:>7}/{} p_eff {:.4} loss {:.5} acc {:.4} [{:.0}s]",
                entry.step,
                total,
                entry.p_eff,
                entry.loss,
                entry.accuracy,
                start.elapsed().as_secs_f64()
            );
        })
        .map_err(|e| e.to_string())?;
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    let mut file = fs::File::create(&out).map_err(|e| e.to_string())?;
    model.save(&mut file).map_err(|e| e.to_string())?;
    println!(
        "done in {:.0}s: {} samples, final acc {:.4} (constant-class baseline {:.4}); wrote {}",
        start.elapsed().as_secs_f64(),
        log.samples_seen,
        log.final_accuracy,
        log.baseline_accuracy,
        out.display()
    );
    Ok(())
}

fn parse_curriculum(spec: &str) -> Result<Vec<(f64, usize)>, String> {
    spec.split(',')
        .map(|stage| {
            let (p, s) = stage
                .split_once('x')
                .ok_or(format!("bad curriculum stage {stage:?} (want RATExSTEPS)"))?;
            Ok((
                p.trim().parse().map_err(|_| format!("bad rate in {stage:?}"))?,
                s.trim().parse().map_err(|_| format!("bad steps in {stage:?}"))?,
            ))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// evaluate / threshold / oracle
// ---------------------------------------------------------------------------

fn cmd_evaluate(_args: EvaluateArgs) -> Result<(), String> {
    Err("evaluate: not wired yet".into())
}

fn cmd_threshold(_args: CommonArgs) -> Result<(), String> {
    Err("threshold: not wired yet".into())
}

fn cmd_oracle(_args: CommonArgs) -> Result<(), String> {
    Err("oracle: not wired yet".into())
}
