// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end over the `sdls` library.
//!
//! Every subcommand reads and writes inside one run directory
//! (`runs/<name>/` by default) and exits with 0 on success, 2 on invalid
//! input and 1 on internal failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sdls::bundle::{read_bundle, write_bundle};
use sdls::corpus::{gen_corpus, load_eval, load_pairs, save_eval, save_pairs, CorpusConfig, CueDictionary, EvalCase};
use sdls::evaluation::{decoupling_rows, evaluate_sweep, EvalOptions};
use sdls::forge::{load_vector, save_vector, SteeringVector, ICV_K_GRID, STYLE_K};
use sdls::metrics::{
    contrast_from_records, cue_probe_tokens, delta_logit_curve, ols_decoupling, spearman, ExternalJudge, Judge,
    LogisticJudge,
};
use sdls::model::{load_checkpoint, save_checkpoint, DecodeConfig, TraceDetail, ToyModelConfig, TrainConfig};
use sdls::pipeline::{attention_probe, baseline_probes, extract_bundle, forge_selected, train_model, VectorFamily};
use sdls::report::{
    build_manifest, read_json, sha256_file, write_attention, write_dose_response, write_json, write_metric_rows,
    write_operating_points, write_sidecar, sidecar_path, ProvenanceBlock, MANIFEST_FILE,
};
use sdls::steer::{run_sweep, write_sweep_csv, read_sweep_csv, InjectionPlan, Strategy, SweepSpec, FINE_GRID};
use sdls::{Error, Result};

#[derive(Parser)]
#[command(name = "sdls", version, about = "Steering-vector construction, injection and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Overrides the seed fields of the loaded config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config for the subcommand; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory that holds every artifact of one experiment.
    #[arg(long, global = true, default_value = "runs/default")]
    run: PathBuf,
    /// Cue dictionary JSON; the built-in dictionary when absent.
    #[arg(long, global = true)]
    dictionary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate paired training reports and the evaluation set.
    GenCorpus {
        #[command(flatten)]
        common: Common,
    },
    /// Train the toy encoder-decoder on the paired corpus.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Dump multi-layer vectors of every pair into an activation bundle.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Build steering vectors from a bundle.
    Forge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Vector families to write; all when omitted.
        #[arg(long, value_enum, value_delimiter = ',')]
        kind: Vec<ForgeKind>,
        /// Principal-component counts for the ICV families.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Generate the evaluation set under every sweep condition.
    Steer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Vector files; every file in the run's vector directory when omitted.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        vectors: Vec<PathBuf>,
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<Strategy>,
        /// Replaces the fine strength grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambdas: Vec<f64>,
        /// Condition-level worker threads; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Score a sweep and select an operating point.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        eval: Option<PathBuf>,
        /// `image_id,condition,score` CSV replacing the built-in judge.
        #[arg(long)]
        judge_scores: Option<PathBuf>,
    },
    /// Cue-logit dose-response and cross-attention entropy probes.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        vector: Option<PathBuf>,
        #[arg(long)]
        eval: Option<PathBuf>,
        /// Also write full trace dumps of the probed generations.
        #[arg(long)]
        dump_traces: bool,
    },
    /// Index the run directory into a manifest with a summary.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ForgeKind {
    GlobalIcv,
    Specific50,
    Sdiv,
    Controls,
    StyleOrtho,
}

impl From<ForgeKind> for VectorFamily {
    fn from(k: ForgeKind) -> Self {
        match k {
            ForgeKind::GlobalIcv => Self::GlobalIcv,
            ForgeKind::Specific50 => Self::Specific50,
            ForgeKind::Sdiv => Self::Sdiv,
            ForgeKind::Controls => Self::Controls,
            ForgeKind::StyleOrtho => Self::StyleOrtho,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct TrainCommandConfig {
    model: ToyModelConfig,
    train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ForgeConfig {
    icv_k: Vec<usize>,
    style_k: usize,
    control_seed: u64,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        Self {
            icv_k: ICV_K_GRID.to_vec(),
            style_k: STYLE_K,
            control_seed: 17,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ProbeConfig {
    strategy: Strategy,
    lambdas: Vec<f64>,
    /// Evaluation cases used as dose-response probes.
    probes: usize,
    decode: DecodeConfig,
    top_k: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        let mut lambdas = vec![0.0];
        lambdas.extend(FINE_GRID);
        Self {
            strategy: Strategy::SteerfairAttentionOutput,
            lambdas,
            probes: 100,
            decode: DecodeConfig::default(),
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ExtractConfig {
    backbone: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ReportConfig {}

struct Paths<'a>(&'a Path);

impl Paths<'_> {
    fn pairs(&self) -> PathBuf {
        self.0.join("corpus/pairs.jsonl")
    }
    fn eval(&self) -> PathBuf {
        self.0.join("corpus/eval.jsonl")
    }
    fn checkpoint(&self) -> PathBuf {
        self.0.join("model.ckpt")
    }
    fn bundle(&self) -> PathBuf {
        self.0.join("bundle.sdlsb")
    }
    fn vectors(&self) -> PathBuf {
        self.0.join("vectors")
    }
    fn sweep(&self) -> PathBuf {
        self.0.join("sweep/sweep.csv")
    }
    fn eval_dir(&self) -> PathBuf {
        self.0.join("eval")
    }
    fn probe_dir(&self) -> PathBuf {
        self.0.join("probe")
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} not found at {}", path.display())))
    }
}

fn dictionary(common: &Common) -> Result<CueDictionary> {
    match &common.dictionary {
        Some(p) => CueDictionary::load(p),
        None => Ok(CueDictionary::standard()),
    }
}

fn read_eval(path: &Path, dict: &CueDictionary) -> Result<Vec<EvalCase>> {
    require(path, "evaluation set")?;
    load_eval(path, dict)
}

/// The generating config recorded next to a corpus file, or the default.
fn corpus_config_for(path: &Path) -> Result<CorpusConfig> {
    let side = sidecar_path(path);
    if side.is_file() {
        let block: ProvenanceBlock = read_json(&side)?;
        Ok(serde_json::from_value(block.config)?)
    } else {
        Ok(CorpusConfig::default())
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

fn gen_corpus_cmd(common: &Common) -> Result<()> {
    let mut cfg: CorpusConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let dict = dictionary(common)?;
    let corpus = gen_corpus(&cfg, &dict)?;
    let paths = Paths(&common.run);
    mkdir(&common.run.join("corpus"))?;
    let block = ProvenanceBlock::new("gen-corpus", cfg.seed, to_value(&cfg));
    save_pairs(&paths.pairs(), &corpus.pairs)?;
    write_sidecar(&paths.pairs(), &block)?;
    save_eval(&paths.eval(), &corpus.eval)?;
    write_sidecar(&paths.eval(), &block)?;
    println!(
        "wrote {} pairs and {} evaluation cases to {}",
        corpus.pairs.len(),
        corpus.eval.len(),
        common.run.join("corpus").display()
    );
    Ok(())
}

fn train_cmd(common: &Common, corpus: Option<PathBuf>) -> Result<()> {
    let mut cfg: TrainCommandConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.model.seed = s;
        cfg.train.seed = s;
    }
    let paths = Paths(&common.run);
    let corpus_path = corpus.unwrap_or_else(|| paths.pairs());
    require(&corpus_path, "corpus")?;
    let dict = dictionary(common)?;
    let pairs = load_pairs(&corpus_path, &dict)?;
    let corpus = sdls::corpus::Corpus {
        pairs,
        eval: Vec::new(),
    };
    let (model, report) = train_model(&corpus, &dict, &cfg.model, &cfg.train)?;
    mkdir(&common.run)?;
    let block = ProvenanceBlock::new("train", cfg.train.seed, to_value(&cfg)).with_input(&corpus_path)?;
    let checksum = save_checkpoint(&model, &paths.checkpoint(), Some(block.to_value()))?;
    write_json(
        &serde_json::json!({"provenance": block, "report": report}),
        &common.run.join("train_report.json"),
    )?;
    println!(
        "trained {} steps, final loss {:?}, checkpoint {checksum}",
        report.steps, report.final_loss
    );
    Ok(())
}

fn extract_cmd(common: &Common, checkpoint: Option<PathBuf>, corpus: Option<PathBuf>) -> Result<()> {
    let cfg: ExtractConfig = load_config(common.config.as_deref())?;
    let paths = Paths(&common.run);
    let ckpt = checkpoint.unwrap_or_else(|| paths.checkpoint());
    let corpus_path = corpus.unwrap_or_else(|| paths.pairs());
    require(&ckpt, "checkpoint")?;
    require(&corpus_path, "corpus")?;
    let dict = dictionary(common)?;
    let model = load_checkpoint(&ckpt)?;
    let pairs = load_pairs(&corpus_path, &dict)?;
    let block = ProvenanceBlock::new("extract", common.seed.unwrap_or(0), to_value(&cfg))
        .with_input(&ckpt)?
        .with_input(&corpus_path)?;
    let mut bundle = extract_bundle(&model, &pairs, Some(block.to_value()))?;
    if let Some(b) = cfg.backbone {
        bundle.manifest.backbone = b;
    }
    mkdir(&common.run)?;
    let checksum = write_bundle(&bundle, &paths.bundle())?;
    println!("wrote {} vectors to {} ({checksum})", bundle.len(), paths.bundle().display());
    Ok(())
}

fn file_stem(v: &SteeringVector) -> String {
    match v.kind {
        sdls::forge::VectorKind::StyleOrtho => {
            let reference = v
                .provenance
                .notes
                .iter()
                .find_map(|n| n.strip_prefix("reference="))
                .unwrap_or("unknown");
            format!("style_ortho_{reference}")
        }
        _ => v.name(),
    }
}

fn forge_cmd(
    common: &Common,
    bundle: Option<PathBuf>,
    corpus: Option<PathBuf>,
    kinds: &[ForgeKind],
    k: &[usize],
) -> Result<()> {
    let mut cfg: ForgeConfig = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.control_seed = s;
    }
    if !k.is_empty() {
        cfg.icv_k = k.to_vec();
    }
    if cfg.icv_k.is_empty() || cfg.icv_k.contains(&0) {
        return Err(Error::InvalidArgument("k values must be positive".into()));
    }
    let paths = Paths(&common.run);
    let bundle_path = bundle.unwrap_or_else(|| paths.bundle());
    let corpus_path = corpus.unwrap_or_else(|| paths.pairs());
    require(&bundle_path, "bundle")?;
    require(&corpus_path, "corpus")?;
    let dict = dictionary(common)?;
    let b = read_bundle(&bundle_path)?;
    let pairs = load_pairs(&corpus_path, &dict)?;
    let families: Vec<VectorFamily> = if kinds.is_empty() {
        VectorFamily::ALL.to_vec()
    } else {
        kinds.iter().map(|&k| k.into()).collect()
    };
    let vectors = forge_selected(&b, &pairs, &dict, &families, &cfg.icv_k, cfg.style_k, cfg.control_seed)?;
    let corpus_hash = sha256_file(&corpus_path)?;
    let dir = paths.vectors();
    mkdir(&dir)?;
    let mut written = 0;
    for mut v in vectors {
        v.provenance.corpus_hash = Some(corpus_hash.clone());
        v.provenance.seed = Some(cfg.control_seed);
        v.provenance.config = Some(to_value(&cfg));
        let path = dir.join(format!("{}.json", file_stem(&v)));
        save_vector(&v, &path)?;
        written += 1;
    }
    println!("wrote {written} vectors to {}", dir.display());
    Ok(())
}

fn vector_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".provenance.json"))
        .collect();
    files.sort();
    Ok(files)
}

#[allow(clippy::too_many_arguments)]
fn steer_cmd(
    common: &Common,
    checkpoint: Option<PathBuf>,
    vectors: Vec<PathBuf>,
    eval: Option<PathBuf>,
    strategies: Vec<Strategy>,
    lambdas: Vec<f64>,
    workers: usize,
) -> Result<()> {
    let mut spec: SweepSpec = load_config(common.config.as_deref())?;
    if !strategies.is_empty() {
        spec.strategies = strategies;
    }
    if !lambdas.is_empty() {
        spec.fine_grid = lambdas;
    }
    let paths = Paths(&common.run);
    let ckpt = checkpoint.unwrap_or_else(|| paths.checkpoint());
    require(&ckpt, "checkpoint")?;
    let files = if !vectors.is_empty() {
        vectors
    } else if !spec.vectors.is_empty() {
        spec.vectors.iter().map(PathBuf::from).collect()
    } else {
        vector_files(&paths.vectors())?
    };
    if files.is_empty() {
        return Err(Error::Plan("no vector files to sweep".into()));
    }
    spec.vectors = files.iter().map(|p| p.display().to_string()).collect();
    let dict = dictionary(common)?;
    let eval_path = eval.unwrap_or_else(|| paths.eval());
    let cases = read_eval(&eval_path, &dict)?;
    let model = load_checkpoint(&ckpt)?;
    let vecs = files.iter().map(|p| load_vector(p)).collect::<Result<Vec<_>>>()?;
    let result = run_sweep(&model, &spec, &vecs, &cases, workers)?;
    let out = paths.sweep();
    mkdir(out.parent().expect("sweep path has a parent"))?;
    let mut block = ProvenanceBlock::new("steer", common.seed.unwrap_or(0), to_value(&spec))
        .with_input(&ckpt)?
        .with_input(&eval_path)?;
    for f in &files {
        block = block.with_input(f)?;
    }
    write_sweep_csv(&result.rows(), &out)?;
    write_sidecar(&out, &block)?;
    #[derive(Serialize)]
    struct Conditions<'a> {
        provenance: &'a ProvenanceBlock,
        conditions: &'a [sdls::steer::ConditionRun],
    }
    write_json(
        &Conditions {
            provenance: &block,
            conditions: &result.conditions,
        },
        &common.run.join("sweep/conditions.json"),
    )?;
    let failed = result
        .conditions
        .iter()
        .filter(|c| c.status != sdls::steer::ConditionStatus::Ok)
        .count();
    println!(
        "swept {} conditions over {} cases ({failed} failed) into {}",
        result.conditions.len(),
        cases.len(),
        out.display()
    );
    Ok(())
}

fn eval_cmd(common: &Common, sweep: Option<PathBuf>, eval: Option<PathBuf>, judge_scores: Option<PathBuf>) -> Result<()> {
    let mut opts: EvalOptions = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        opts.seed = s;
    }
    let paths = Paths(&common.run);
    let sweep_path = sweep.unwrap_or_else(|| paths.sweep());
    require(&sweep_path, "sweep CSV")?;
    let dict = dictionary(common)?;
    let eval_path = eval.unwrap_or_else(|| paths.eval());
    let cases = read_eval(&eval_path, &dict)?;
    let lexicon = corpus_config_for(&eval_path)?.lexicon()?;
    let rows = read_sweep_csv(&sweep_path)?;
    let judge: Box<dyn Judge> = match &judge_scores {
        Some(p) => Box::new(ExternalJudge::from_csv(p)?),
        None => Box::new(LogisticJudge::new(dict.clone())),
    };
    let report = evaluate_sweep(&rows, &cases, &dict, &lexicon, judge.as_ref(), &opts)?;
    let decoupling = ols_decoupling(&decoupling_rows(&report.metric_rows)).ok();
    let dir = paths.eval_dir();
    mkdir(&dir)?;
    let mut block = ProvenanceBlock::new("eval", opts.seed, to_value(&opts))
        .with_input(&sweep_path)?
        .with_input(&eval_path)?;
    if let Some(p) = &judge_scores {
        block = block.with_input(p)?;
    }
    write_metric_rows(&report.metric_rows, &dir.join("metrics.csv"))?;
    write_sidecar(&dir.join("metrics.csv"), &block)?;
    write_operating_points(&report.operating_points, &dir.join("operating_points.csv"))?;
    write_sidecar(&dir.join("operating_points.csv"), &block)?;
    let verdict = match report.selected_row() {
        Some(r) => format!(
            "selected {} (delta HSR {:+.4}, macro F1 {:.4} vs baseline {:.4})",
            r.condition, r.delta_hsr, r.macro_f1, report.baseline.macro_f1
        ),
        None => "no condition passes the selection rule".to_string(),
    };
    write_json(
        &serde_json::json!({
            "provenance": block,
            "report": report,
            "decoupling": decoupling,
            "verdict": verdict,
        }),
        &dir.join("summary.json"),
    )?;
    println!("{verdict}");
    Ok(())
}

fn probe_cmd(
    common: &Common,
    checkpoint: Option<PathBuf>,
    vector: Option<PathBuf>,
    eval: Option<PathBuf>,
    dump_traces: bool,
) -> Result<()> {
    let cfg: ProbeConfig = load_config(common.config.as_deref())?;
    let paths = Paths(&common.run);
    let ckpt = checkpoint.unwrap_or_else(|| paths.checkpoint());
    let vector_path = vector.unwrap_or_else(|| paths.vectors().join("sdiv.json"));
    require(&ckpt, "checkpoint")?;
    require(&vector_path, "vector file")?;
    let dict = dictionary(common)?;
    let eval_path = eval.unwrap_or_else(|| paths.eval());
    let cases = read_eval(&eval_path, &dict)?;
    let model = load_checkpoint(&ckpt)?;
    let v = load_vector(&vector_path)?;
    let cue_ids: Vec<usize> = cue_probe_tokens(&dict).iter().filter_map(|t| model.vocab().id(t)).collect();
    let probes = baseline_probes(&model, &cases, cfg.probes, &cfg.decode)?;
    let plan = InjectionPlan::new(cfg.strategy, 0.0, v);
    let curve = delta_logit_curve(&model, &plan, &cfg.lambdas, &cue_ids, &probes)?;
    let lexicon = corpus_config_for(&eval_path)?.lexicon()?;
    let records = attention_probe(&model, &cases, &cfg.decode, &dict, &lexicon)?;
    let contrast = contrast_from_records(&records).ok();
    let dir = paths.probe_dir();
    mkdir(&dir)?;
    let block = ProvenanceBlock::new("probe", common.seed.unwrap_or(0), to_value(&cfg))
        .with_input(&ckpt)?
        .with_input(&vector_path)?
        .with_input(&eval_path)?;
    write_dose_response(&curve, &dir.join("dose_response.csv"))?;
    write_sidecar(&dir.join("dose_response.csv"), &block)?;
    write_attention(&records, &dir.join("attention.csv"))?;
    write_sidecar(&dir.join("attention.csv"), &block)?;
    let magnitudes: Vec<f64> = curve.iter().map(|p| p.lambda.abs()).collect();
    let deltas: Vec<f64> = curve.iter().map(|p| p.mean_delta_logit).collect();
    let rho = spearman(&magnitudes, &deltas).ok();
    write_json(
        &serde_json::json!({
            "provenance": block,
            "spearman_abs_lambda_delta_logit": rho,
            "attention": contrast,
        }),
        &dir.join("summary.json"),
    )?;
    if dump_traces {
        let decode = cfg.decode.with_detail(TraceDetail::Full);
        let dumps = cases
            .iter()
            .take(cfg.probes)
            .map(|c| {
                let enc = model.encode(&model.image(&c.image_id, &c.reference), None)?;
                let trace = model.generate(&enc, None, &decode)?;
                Ok(serde_json::json!({"image_id": c.image_id, "trace": trace.dump(&model, cfg.top_k)}))
            })
            .collect::<Result<Vec<_>>>()?;
        write_json(&serde_json::json!({"provenance": block, "traces": dumps}), &dir.join("traces.json"))?;
    }
    println!(
        "dose-response over {} strengths (spearman {:?}); attention {:?}",
        curve.len(),
        rho,
        contrast
    );
    Ok(())
}

fn report_cmd(common: &Common) -> Result<()> {
    let cfg: ReportConfig = load_config(common.config.as_deref())?;
    let paths = Paths(&common.run);
    let mut summary = serde_json::Map::new();
    summary.insert("config".into(), to_value(&cfg));
    let eval_summary = paths.eval_dir().join("summary.json");
    if eval_summary.is_file() {
        let v: serde_json::Value = read_json(&eval_summary)?;
        summary.insert("verdict".into(), v["verdict"].clone());
        summary.insert("baseline".into(), v["report"]["baseline"].clone());
        summary.insert("selected".into(), v["report"]["selected"].clone());
    }
    let probe_summary = paths.probe_dir().join("summary.json");
    if probe_summary.is_file() {
        let v: serde_json::Value = read_json(&probe_summary)?;
        summary.insert("spearman_abs_lambda_delta_logit".into(), v["spearman_abs_lambda_delta_logit"].clone());
        summary.insert("attention".into(), v["attention"].clone());
    }
    let manifest = build_manifest(&common.run, Some(serde_json::Value::Object(summary)))?;
    write_json(&manifest, &common.run.join(MANIFEST_FILE))?;
    println!("indexed {} files into {}", manifest.files.len(), common.run.join(MANIFEST_FILE).display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus { common } => gen_corpus_cmd(&common),
        Command::Train { common, corpus } => train_cmd(&common, corpus),
        Command::Extract {
            common,
            checkpoint,
            corpus,
        } => extract_cmd(&common, checkpoint, corpus),
        Command::Forge {
            common,
            bundle,
            corpus,
            kind,
            k,
        } => forge_cmd(&common, bundle, corpus, &kind, &k),
        Command::Steer {
            common,
            checkpoint,
            vectors,
            eval,
            strategies,
            lambdas,
            workers,
        } => steer_cmd(&common, checkpoint, vectors, eval, strategies, lambdas, workers),
        Command::Eval {
            common,
            sweep,
            eval,
            judge_scores,
        } => eval_cmd(&common, sweep, eval, judge_scores),
        Command::Probe {
            common,
            checkpoint,
            vector,
            eval,
            dump_traces,
        } => probe_cmd(&common, checkpoint, vector, eval, dump_traces),
        Command::Report { common } => report_cmd(&common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !matches!(cli.command, Command::Steer { .. }) {
        // Only `steer` runs in parallel.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
