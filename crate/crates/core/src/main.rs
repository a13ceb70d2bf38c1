use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fuzzkb::config::RunConfig;
use fuzzkb::error::{Error, Result};
use fuzzkb::eval::{answer, evaluate, one_more_hop_eval, RankingReport};
use fuzzkb::fuzzy::TNormKind;
use fuzzkb::kb::{degrade_concepts, filter_low_degree, load_kb, split_abox, KbSplit, KnowledgeBase};
use fuzzkb::model::{load_checkpoint, save_checkpoint};
use fuzzkb::query::{
    enumerate_1p, enumerate_eval_1p, parse_query, read_instances, sample_eval_queries, sample_queries, write_instances, Query,
    QueryInstance, QueryType, DEFAULT_MAX_ANSWERS,
};
use fuzzkb::synth::{synthetic_kb, SynthConfig};
use fuzzkb::train::{gradcheck, train, GradcheckConfig, TrainData};

/// Joint entity- and concept-level answering of logical queries over
/// ontology-backed knowledge bases.
#[derive(Debug, Parser)]
#[command(name = "fuzzkb", version)]
struct Cli {
    /// Worker threads for evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Load TSV axioms, filter low-degree entities and split the ABox.
    Ingest(IngestArgs),
    /// Write a seeded synthetic knowledge base as a split directory.
    Synth(SynthArgs),
    /// Sample labeled query instances for one split.
    Sample(SampleArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Rank held-out queries and write a report.
    Eval(EvalArgs),
    /// Answer a single query with top-k entities and concepts.
    Answer(AnswerArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    tbox: PathBuf,
    #[arg(long)]
    abox_ee: PathBuf,
    #[arg(long)]
    abox_ec: PathBuf,
    /// Output split directory.
    #[arg(long)]
    out: PathBuf,
    /// Minimum entity degree; 0 disables filtering.
    #[arg(long, default_value_t = 5)]
    threshold: usize,
    #[arg(long, default_value_t = 0.95)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    train_fraction: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Split directory written by `ingest`.
    #[arg(long)]
    kb: PathBuf,
    /// Output directory; files are named `<split>-<type>.jsonl`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Train)]
    split: Split,
    /// Query shapes, comma separated (1p,2p,3p,2i,3i,pi,ip,2u,up) or `all`.
    #[arg(long = "type", default_value = "1p")]
    types: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// 1p only: one instance per training triple, or per distinct held-out
    /// (head, relation) for the valid and test splits.
    #[arg(long)]
    enumerate: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ANSWERS)]
    max_answers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Split directory.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Directory holding `train-*.jsonl` and `valid-*.jsonl`.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// JSON-lines training log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Negatives per positive.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    valid_interval: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// godel, product or lukasiewicz.
    #[arg(long)]
    tnorm: Option<TNormKind>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    p_norm: Option<f64>,
    /// Cap on validation instances (0 = all).
    #[arg(long)]
    valid_limit: Option<usize>,
    #[arg(long)]
    no_con: bool,
    #[arg(long)]
    no_ent: bool,
    /// Drop the subsumption loss.
    #[arg(long)]
    no_sub: bool,
    /// Drop the instantiation loss.
    #[arg(long)]
    no_ins: bool,
    /// Train on the concepts-as-entities graph for one-more-hop evaluation.
    #[arg(long)]
    degrade: bool,
    /// Independent runs with seeds seed, seed+1, ...; checkpoints get a
    /// `.<k>` suffix when more than one.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Write the resolved configuration here.
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Standard,
    OneMoreHop,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// One or more checkpoints; metrics are averaged over them.
    #[arg(long, required = true, num_args = 1..)]
    checkpoint: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
    #[arg(long, value_enum, default_value_t = Mode::Standard)]
    mode: Mode,
    /// Report path; the table goes to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct AnswerArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(short, long)]
    query: String,
    #[arg(short, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    entities: usize,
    #[arg(long, default_value_t = 10)]
    concepts: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn parse_types(s: &str) -> Result<Vec<QueryType>> {
    if s == "all" {
        return Ok(QueryType::ALL.to_vec());
    }
    s.split(',').map(|t| t.trim().parse()).collect()
}

/// Instance files `<split>-*.jsonl` in name order.
fn read_split_instances(dir: &Path, split: &str, kb: &KnowledgeBase) -> Result<Vec<QueryInstance>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&format!("{split}-")) && n.ends_with(".jsonl"))
        })
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(read_instances(&f, &kb.vocab)?);
    }
    Ok(out)
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let kb = load_kb(&a.tbox, &a.abox_ee, &a.abox_ec)?;
    let kb = filter_low_degree(&kb, a.threshold)?;
    let split = split_abox(&kb, a.train_fraction, a.seed)?;
    create_dir(&a.out)?;
    split.save(&a.out)?;
    let s = split.train.stats();
    println!(
        "entities {} concepts {} relations {} subsumptions {} instantiations {} triples train/valid/test {}/{}/{}",
        s.entities,
        s.concepts,
        s.relations,
        s.subsumptions,
        s.instantiations,
        s.triples,
        split.valid.len(),
        split.test.len()
    );
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let kb = synthetic_kb(&SynthConfig {
        seed: a.seed,
        ..SynthConfig::default()
    })?;
    let split = split_abox(&kb, a.train_fraction, a.seed)?;
    create_dir(&a.out)?;
    split.save(&a.out)
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let split = KbSplit::load(&a.kb)?;
    let types = parse_types(&a.types)?;
    create_dir(&a.out)?;
    for (i, &t) in types.iter().enumerate() {
        let seed = a.seed.wrapping_add(i as u64);
        let instances = if a.enumerate {
            if t != QueryType::P1 {
                return Err(Error::Config("--enumerate only applies to 1p".into()));
            }
            match a.split {
                Split::Train => enumerate_1p(&split.train),
                Split::Valid => enumerate_eval_1p(&split.train_valid(), &split.valid),
                Split::Test => enumerate_eval_1p(&split.full(), &split.test),
            }
        } else {
            match a.split {
                Split::Train => sample_queries(&split.train, t, a.n, seed, a.max_answers)?,
                Split::Valid => sample_eval_queries(&split.train_valid(), &split.train, t, a.n, seed, a.max_answers)?,
                Split::Test => sample_eval_queries(&split.full(), &split.train_valid(), t, a.n, seed, a.max_answers)?,
            }
        };
        let path = a.out.join(format!("{}-{}.jsonl", a.split.name(), t));
        write_instances(&path, &split.train.vocab, &instances)?;
        println!("{} {}: {} instances", a.split.name(), t, instances.len());
    }
    Ok(())
}

fn resolve_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut c = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let paths = &mut c.paths;
    for (slot, flag) in [
        (&mut paths.kb_dir, &a.kb),
        (&mut paths.queries_dir, &a.queries),
        (&mut paths.checkpoint, &a.checkpoint),
        (&mut paths.log, &a.log),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    let t = &mut c.train;
    macro_rules! over {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { t.$f = v; } )* };
    }
    over!(lr, dim, batch_size, m, max_steps, valid_interval, patience, seed, tnorm, gamma, eps, p_norm, valid_limit);
    t.use_con &= !a.no_con;
    t.use_ent &= !a.no_ent;
    t.use_sub &= !a.no_sub;
    t.use_ins &= !a.no_ins;
    Ok(c)
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing {name} (flag or config file)")))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let rc = resolve_config(&a)?;
    if let Some(p) = &a.save_config {
        write_file(p, &rc.to_toml())?;
    }
    let kb_dir = required(&rc.paths.kb_dir, "kb directory")?;
    let queries = required(&rc.paths.queries_dir, "queries directory")?;
    let ckpt = required(&rc.paths.checkpoint, "checkpoint path")?;
    if a.runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    let split = KbSplit::load(kb_dir)?;
    let mut train_q = read_split_instances(queries, "train", &split.train)?;
    let mut valid_q = read_split_instances(queries, "valid", &split.train)?;
    let mut config = rc.train.clone();

    let degraded;
    let kb = if a.degrade {
        degraded = degrade_concepts(&split.train)?;
        config.use_con = false;
        config.use_sub = false;
        config.use_ins = false;
        for q in train_q.iter_mut().chain(valid_q.iter_mut()) {
            q.concept_answers.clear();
        }
        train_q.extend(
            enumerate_1p(&degraded.kb)
                .into_iter()
                .filter(|q| matches!(q.ast, Query::Proj(r, _) if r == degraded.instance_of)),
        );
        &degraded.kb
    } else {
        &split.train
    };

    for run in 0..a.runs {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(run as u64);
        let mut log_lines = String::new();
        let outcome = train(
            TrainData {
                kb,
                train: &train_q,
                valid: &valid_q,
            },
            &cfg,
            |r| {
                log_lines.push_str(&r.to_json_line());
                log_lines.push('\n');
            },
        )?;
        let suffix = |p: &Path| {
            if a.runs == 1 {
                p.to_path_buf()
            } else {
                PathBuf::from(format!("{}.{run}", p.display()))
            }
        };
        if let Some(dir) = ckpt.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(dir)?;
        }
        save_checkpoint(&outcome.params, &suffix(ckpt))?;
        if let Some(log) = &rc.paths.log {
            write_file(&suffix(log), &log_lines)?;
        }
        println!(
            "run {run}: {} steps, best step {}, best validation {}",
            outcome.steps_run,
            outcome.best_step,
            outcome.best_metric.map_or("n/a".to_string(), |m| format!("{m:.4}"))
        );
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let split = KbSplit::load(&a.kb)?;
    let instances = read_split_instances(&a.queries, a.split.name(), &split.train)?;
    if instances.is_empty() {
        return Err(Error::Config(format!("no {}-*.jsonl instances in {}", a.split.name(), a.queries.display())));
    }
    let degraded = match a.mode {
        Mode::OneMoreHop => Some(degrade_concepts(&split.train)?),
        Mode::Standard => None,
    };
    let mut reports = Vec::new();
    for ck in &a.checkpoint {
        let p = load_checkpoint(ck)?;
        reports.push(match &degraded {
            Some(d) => one_more_hop_eval(&p, d, &instances)?,
            None => {
                if p.num_entities() != split.train.num_entities() || p.num_concepts() != split.train.num_concepts() {
                    return Err(Error::Checkpoint(format!(
                        "{} does not match the knowledge base vocabulary",
                        ck.display()
                    )));
                }
                evaluate(&p, &instances)?
            }
        });
    }
    let report = RankingReport::mean(&reports).expect("at least one checkpoint");
    let text = if a.json { report.to_json() } else { report.to_table() };
    match &a.report {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_answer(a: AnswerArgs) -> Result<()> {
    let split = KbSplit::load(&a.kb)?;
    let vocab = &split.train.vocab;
    let p = load_checkpoint(&a.checkpoint)?;
    if p.num_entities() != vocab.num_entities() || p.num_concepts() != vocab.num_concepts() {
        return Err(Error::Checkpoint("checkpoint does not match the knowledge base vocabulary".into()));
    }
    let q = parse_query(&a.query, vocab)?;
    let rows = answer(&p, vocab, &q, a.k)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
    } else {
        for r in rows {
            println!("{}\t{}\t{:.6}", r.level, r.name, r.score);
        }
    }
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<bool> {
    let rows = gradcheck(&GradcheckConfig {
        seed: a.seed,
        dim: a.dim,
        entities: a.entities,
        concepts: a.concepts,
        ..GradcheckConfig::default()
    })?;
    let mut worst: f64 = 0.0;
    for r in &rows {
        worst = worst.max(r.max_rel_err);
        println!(
            "{:<12} {:<4} {:<3} max_rel_err {:.3e}",
            r.tnorm.as_str(),
            r.head,
            r.qtype.map_or("-", |q| q.as_str()),
            r.max_rel_err
        );
    }
    println!("overall max relative error {worst:.3e}");
    Ok(worst <= a.tolerance)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diverged(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.cmd {
        Cmd::Ingest(a) => cmd_ingest(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Sample(a) => cmd_sample(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Answer(a) => cmd_answer(a),
        Cmd::Gradcheck(a) => match cmd_gradcheck(a) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: gradient check exceeded tolerance");
                return ExitCode::from(2);
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
