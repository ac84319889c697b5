//! The `venom` command line.
//!
//! Every command reads the run configuration, applies `--set` overrides and
//! writes its artifacts under `--out`:
//!
//! | command    | reads                            | writes                                  |
//! |------------|----------------------------------|-----------------------------------------|
//! | ingest     | `lake.input` CSV directory       | `manifest.csv`, `vocab.csv`, `stats.csv` |
//! | synth      | synth grid                       | `lake/*.csv` plus the ingest files       |
//! | train      | manifest                         | `model.vcf`, `loss.csv`                  |
//! | vectorize  | manifest, model                  | `store.tsv`, `vectorize_times.csv`       |
//! | select     | manifest, model, store           | `selection.csv`                          |
//! | predict    | manifest, model, store           | `prediction.csv`, `operator_results.csv` |
//! | experiment | manifest, model, store           | `report.csv`, `failures.csv`             |
//! | report     | manifest, store, report          | `plots/*.csv`                            |
//!
//! Diagnostics are `venom: key=value ...` lines. Exit codes: 0 success,
//! 2 configuration, 3 data, 4 training divergence, 5 internal error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Result, VenomError};
use crate::evalbench::{
    add_gaussian_noise, gen_synth_dataset, loss_bars_csv, noise_shift, noise_shift_csv, report_csv,
    representation_csv, run_experiment, ExperimentConfig, PlotKind, ReportRow,
};
use crate::lake::{
    csv_files, ingest_bytes, ingest_files, load_store, registry::MANIFEST_FILE, vectorize_lake, DatasetRecord,
    EmbeddingStore, LakeRegistry,
};
use crate::modelling::{execute_operator, model_and_predict, OperatorCache, Plan, Selector, RESULTS_HEADER};
use crate::seed::derive_seed;
use crate::vectorizer::{load_model, save_model, trace_csv, train, VectorizerModel};

pub const MODEL_FILE: &str = "model.vcf";
pub const LOSS_FILE: &str = "loss.csv";
pub const STORE_FILE: &str = "store.tsv";
pub const TIMES_FILE: &str = "vectorize_times.csv";
pub const REPORT_FILE: &str = "report.csv";

#[derive(Debug, Parser)]
#[command(name = "venom", version, about = "Dataset embeddings for analytics operator modelling")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker cap; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override one configuration key, e.g. `--set selection.lambda=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest a directory of CSV files into a lake registry.
    Ingest {
        /// Directory of CSV files; overrides `lake.input`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train the vectorizer on the registered lake.
    Train {
        /// Latent size; overrides `vectorizer.k`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Embed every registered dataset into the store.
    Vectorize,
    /// Select the datasets most relevant to a query.
    Select {
        /// Dataset id from the manifest, or a CSV path.
        #[arg(long)]
        query: String,
        /// Similarity method or `sr[-fraction]`.
        #[arg(long)]
        arm: Option<String>,
    },
    /// Predict the operator output on a query without running the operator on it.
    Predict {
        #[arg(long)]
        query: String,
        #[arg(long)]
        arm: Option<String>,
    },
    /// Leave-one-out evaluation over the lake.
    Experiment {
        /// Run only this arm instead of `experiment.arms`.
        #[arg(long)]
        arm: Option<String>,
    },
    /// Generate a synthetic lake and ingest it.
    Synth,
    /// Emit plot data.
    Report {
        /// representation, noise-shift or loss-bars.
        #[arg(long, default_value = "representation")]
        kind: String,
        /// Base dataset for noise-shift.
        #[arg(long)]
        query: Option<String>,
    },
}

/// Collected `venom: ...` diagnostic lines.
#[derive(Default)]
struct Diag(Vec<String>);

impl Diag {
    fn line(&mut self, pairs: &[(&str, String)]) {
        let body: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={}", quote(v))).collect();
        self.0.push(format!("venom: {}", body.join(" ")));
    }
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains([' ', '"', '=', '\n', '\t']) {
        format!("{:?}", v.replace('\n', " "))
    } else {
        v.to_string()
    }
}

fn write_file(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| VenomError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| VenomError::io(path, e))
}

/// Parse `args` (program name first) and run; returns the exit code.
pub fn run<I, T>(args: I, diagnostics: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(diagnostics, "{e}");
            return code;
        }
    };
    let mut diag = Diag::default();
    let code = match execute(cli, &mut diag) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            diag.line(&[
                ("error", e.kind().to_string()),
                ("exit", code.to_string()),
                ("message", e.to_string()),
            ]);
            code
        }
    };
    for l in &diag.0 {
        let _ = writeln!(diagnostics, "{l}");
    }
    code
}

fn execute(cli: Cli, diag: &mut Diag) -> Result<i32> {
    let mut config = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for s in &cli.common.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| VenomError::Config(format!("--set {s:?}: expected KEY=VALUE")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.common.jobs {
        config.jobs = jobs;
    }
    if let Command::Train { k: Some(k) } = &cli.command {
        config.vectorizer.k = *k;
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| VenomError::Internal(e.to_string()))?;
    let out = cli.common.out.clone();
    pool.install(|| match cli.command {
        Command::Ingest { input } => cmd_ingest(&config, input, &out, diag),
        Command::Train { .. } => cmd_train(&config, &out, diag),
        Command::Vectorize => cmd_vectorize(&config, &out, diag),
        Command::Select { query, arm } => cmd_select(&config, &query, arm.as_deref(), &out, diag),
        Command::Predict { query, arm } => cmd_predict(&config, &query, arm.as_deref(), &out, diag),
        Command::Experiment { arm } => cmd_experiment(&config, arm.as_deref(), &out, diag),
        Command::Synth => cmd_synth(&config, &out, diag),
        Command::Report { kind, query } => cmd_report(&config, &kind, query.as_deref(), &out, diag),
    })
}

fn ingest_dir(config: &RunConfig, input: &Path, out: &Path, diag: &mut Diag) -> Result<i32> {
    if !input.is_dir() {
        return Err(VenomError::Config(format!("lake input {} is not a directory", input.display())));
    }
    let input = input.canonicalize().map_err(|e| VenomError::io(input, e))?;
    let files = csv_files(&input)?;
    let report = ingest_files(&files, &config.ingest);
    for r in &report.records {
        diag.line(&[("file", r.provenance.path.clone()), ("status", "ok".into()), ("id", r.id.clone())]);
    }
    for (path, e) in &report.failures {
        diag.line(&[("file", path.clone()), ("status", "error".into()), ("kind", e.kind().into()), ("message", e.to_string())]);
    }
    let manifest = report.registry.save(out)?;
    diag.line(&[
        ("manifest", manifest.display().to_string()),
        ("datasets", report.records.len().to_string()),
        ("failures", report.failures.len().to_string()),
    ]);
    Ok(if report.failures.is_empty() && !report.records.is_empty() { 0 } else { 3 })
}

fn cmd_ingest(config: &RunConfig, input: Option<PathBuf>, out: &Path, diag: &mut Diag) -> Result<i32> {
    let input = input
        .or_else(|| config.lake_input.clone())
        .ok_or_else(|| VenomError::Config("no input directory: pass --input or set lake.input".into()))?;
    ingest_dir(config, &input, out, diag)
}

/// The lake as every stage sees it: lake-normalized, operator target in raw units.
struct Lake {
    registry: LakeRegistry,
    records: Vec<DatasetRecord>,
}

impl Lake {
    fn load(config: &RunConfig, out: &Path) -> Result<Self> {
        let manifest = out.join(MANIFEST_FILE);
        if !manifest.is_file() {
            return Err(VenomError::Config(format!("no manifest at {}; run ingest first", manifest.display())));
        }
        let registry = LakeRegistry::load(&manifest)?;
        let raw = registry.load_records(&config.ingest)?;
        let records = raw.iter().map(|r| view(&registry, r, &config.operator.target)).collect::<Result<_>>()?;
        Ok(Lake { registry, records })
    }

    fn by_id(&self, id: &str) -> Option<&DatasetRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// A lake dataset by id, or an external CSV file ingested with the lake vocabulary.
    fn query(&self, config: &RunConfig, query: &str) -> Result<DatasetRecord> {
        if let Some(r) = self.by_id(query) {
            return Ok(r.clone());
        }
        let path = Path::new(query);
        if !path.is_file() {
            return Err(VenomError::Config(format!("query {query:?} is neither a lake id nor a file")));
        }
        let bytes = std::fs::read(path).map_err(|e| VenomError::io(path, e))?;
        let name = path.file_stem().map_or_else(|| query.to_string(), |s| s.to_string_lossy().into_owned());
        let r = ingest_bytes(&bytes, query, &name, &config.ingest, &self.registry.vocab)?;
        view(&self.registry, &r, &config.operator.target)
    }
}

fn view(registry: &LakeRegistry, record: &DatasetRecord, target: &str) -> Result<DatasetRecord> {
    registry.stats.normalize_except(record, record.column_index(target))
}

fn load_vectorizer(out: &Path) -> Result<VectorizerModel> {
    let p = out.join(MODEL_FILE);
    if !p.is_file() {
        return Err(VenomError::Config(format!("no model at {}; run train first", p.display())));
    }
    load_model(&p)
}

fn load_matching_store(out: &Path, model: &VectorizerModel) -> Result<EmbeddingStore> {
    let p = out.join(STORE_FILE);
    if !p.is_file() {
        return Err(VenomError::Config(format!("no store at {}; run vectorize first", p.display())));
    }
    load_store(&p, Some(model.version()))
}

fn cmd_train(config: &RunConfig, out: &Path, diag: &mut Diag) -> Result<i32> {
    let lake = Lake::load(config, out)?;
    let (model, trace) = train(&lake.records, &config.vectorizer_config())?;
    save_model(&model, &out.join(MODEL_FILE))?;
    write_file(&out.join(LOSS_FILE), trace_csv(&trace))?;
    let last = trace.last().map_or(f64::NAN, |s| s.mean_loss);
    diag.line(&[
        ("model", out.join(MODEL_FILE).display().to_string()),
        ("version", model.version().to_string()),
        ("epochs", trace.len().to_string()),
        ("final_loss", format!("{last:?}")),
    ]);
    Ok(0)
}

fn cmd_vectorize(config: &RunConfig, out: &Path, diag: &mut Diag) -> Result<i32> {
    let lake = Lake::load(config, out)?;
    let model = load_vectorizer(out)?;
    let store_path = out.join(STORE_FILE);
    let existing = if store_path.is_file() { Some(load_store(&store_path, None)?) } else { None };
    if let Some(s) = &existing {
        if s.model_version() != model.version() {
            return Err(VenomError::StaleStore { store: s.model_version().to_string(), model: model.version().to_string() });
        }
    }
    let previous_times = read_times(out).unwrap_or_default();
    let outcome = vectorize_lake(&lake.records, &model, existing, config.clock)?;
    for (id, e) in &outcome.failures {
        diag.line(&[("dataset", id.clone()), ("status", "error".into()), ("kind", e.kind().into()), ("message", e.to_string())]);
    }
    let mut times = previous_times;
    times.extend(outcome.per_dataset.iter().cloned());
    times.retain(|id, _| outcome.store.contains(id));
    outcome.store.save(&store_path)?;
    let mut text = String::from("dataset_id,seconds\n");
    times.iter().for_each(|(id, t)| text.push_str(&format!("{id},{t:?}\n")));
    write_file(&out.join(TIMES_FILE), text)?;
    diag.line(&[
        ("store", store_path.display().to_string()),
        ("version", model.version().to_string()),
        ("vectorized", outcome.vectorized().to_string()),
        ("total", outcome.store.len().to_string()),
        ("t_vec", format!("{:?}", outcome.t_vec)),
    ]);
    Ok(if outcome.failures.is_empty() { 0 } else { 3 })
}

fn read_times(out: &Path) -> Result<BTreeMap<String, f64>> {
    let p = out.join(TIMES_FILE);
    let text = std::fs::read_to_string(&p).map_err(|e| VenomError::io(&p, e))?;
    text.lines()
        .skip(1)
        .map(|l| {
            let (id, t) = l.split_once(',').ok_or_else(|| VenomError::parse("vectorize times", l.to_string()))?;
            let t: f64 = t.parse().map_err(|_| VenomError::parse("vectorize times", l.to_string()))?;
            Ok((id.to_string(), t))
        })
        .collect()
}

fn selector(config: &RunConfig, arm: Option<&str>) -> Result<Selector> {
    match arm {
        Some(a) => config.arm(a),
        None => Ok(Selector::Similarity(config.selection_params())),
    }
}

fn cmd_select(config: &RunConfig, query: &str, arm: Option<&str>, out: &Path, diag: &mut Diag) -> Result<i32> {
    let lake = Lake::load(config, out)?;
    let model = load_vectorizer(out)?;
    let store = load_matching_store(out, &model)?;
    let q = lake.query(config, query)?;
    let z = model.vectorize(&q)?;
    let result = selector(config, arm)?.run(&q.id, &z.z, &store)?;
    write_file(&out.join("selection.csv"), result.to_csv())?;
    let mut pairs = vec![("query", q.id.clone()), ("method", result.method.clone()), ("selected", result.selected.len().to_string())];
    for (k, v) in &result.diagnostics {
        if !pairs.iter().any(|(p, _)| p == k) {
            pairs.push((k.as_str(), v.clone()));
        }
    }
    diag.line(&pairs);
    Ok(0)
}

fn cmd_predict(config: &RunConfig, query: &str, arm: Option<&str>, out: &Path, diag: &mut Diag) -> Result<i32> {
    let lake = Lake::load(config, out)?;
    let model = load_vectorizer(out)?;
    let store = load_matching_store(out, &model)?;
    let q = lake.query(config, query)?;
    let plan = Plan {
        selector: selector(config, arm)?,
        operator: config.operator_spec(),
        surrogate: config.surrogate.clone(),
        clock: config.clock,
    };
    let p = model_and_predict(&q, &lake.records, &model, &store, &plan, &OperatorCache::new())?;
    let truth = execute_operator(&q, &plan.operator, config.clock).map_err(|e| e.in_stage("truth"))?;
    let err = (p.y_hat - truth.output).abs();
    let hash = plan.operator.hash();
    let mut results = format!("{RESULTS_HEADER}\n");
    p.train.iter().for_each(|r| results.push_str(&r.csv_row(&hash)));
    write_file(&out.join("operator_results.csv"), results)?;
    let l = &p.ledger;
    write_file(
        &out.join("prediction.csv"),
        format!(
            "query_id,arm,surrogate,y_hat,truth,abs_error,t_sim_op,t_sim,t_pred\n{},{},{},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            q.id,
            plan.selector.label(),
            p.surrogate.kind(),
            p.y_hat,
            truth.output,
            err,
            l.t_sim_op,
            l.t_sim,
            l.t_pred
        ),
    )?;
    for (id, why) in &p.skipped {
        diag.line(&[("skipped", id.clone()), ("reason", why.clone())]);
    }
    diag.line(&[
        ("query", q.id.clone()),
        ("arm", plan.selector.label()),
        ("selected", p.train.len().to_string()),
        ("y_hat", format!("{:?}", p.y_hat)),
        ("truth", format!("{:?}", truth.output)),
        ("abs_error", format!("{err:?}")),
    ]);
    Ok(0)
}

fn cmd_experiment(config: &RunConfig, arm: Option<&str>, out: &Path, diag: &mut Diag) -> Result<i32> {
    let lake = Lake::load(config, out)?;
    let model = load_vectorizer(out)?;
    let store = load_matching_store(out, &model)?;
    let times = read_times(out)?;
    let t_vec: f64 = lake.records.iter().map(|r| times.get(&r.id).copied().unwrap_or(0.0)).sum();
    let arms = match arm {
        Some(a) => vec![config.arm(a)?],
        None => config.experiment.arms.iter().map(|a| config.arm(a)).collect::<Result<_>>()?,
    };
    let exp = ExperimentConfig {
        id: config.experiment.id.clone(),
        arms,
        operator: config.operator.clone(),
        surrogate: config.surrogate.clone(),
        repetitions: config.experiment.repetitions,
        seed: derive_seed(config.seed, "experiment", 0),
        clock: config.clock,
    };
    let outcome = run_experiment(&exp, &lake.records, &model, &store, t_vec)?;
    write_file(&out.join(REPORT_FILE), report_csv(&outcome.rows))?;
    let mut failures = String::from("arm,repetition,query_id,error\n");
    for f in &outcome.failures {
        failures.push_str(&format!("{},{},{},{:?}\n", f.arm, f.repetition, f.query_id, f.error));
    }
    write_file(&out.join("failures.csv"), failures)?;
    for (arm, id) in &outcome.unresolved {
        diag.line(&[("arm", arm.clone()), ("query", id.clone()), ("status", "failed_every_repetition".into())]);
    }
    for r in &outcome.rows {
        diag.line(&[
            ("arm", r.arm.clone()),
            ("rmse", format!("{:?}", r.rmse)),
            ("mae", format!("{:?}", r.mae)),
            ("speedup", format!("{:?}", r.speedup)),
            ("amortized_speedup", format!("{:?}", r.amortized_speedup)),
        ]);
    }
    diag.line(&[("report", out.join(REPORT_FILE).display().to_string()), ("rows", outcome.rows.len().to_string())]);
    Ok(if outcome.rows.is_empty() { 3 } else { 0 })
}

fn record_csv(record: &DatasetRecord) -> String {
    let names: Vec<String> = record.schema().iter().map(|c| c.name()).collect();
    let mut out = names.join(",");
    out.push('\n');
    for row in record.values().to_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn cmd_synth(config: &RunConfig, out: &Path, diag: &mut Diag) -> Result<i32> {
    config.validate_synth()?;
    let generator = config.synth_generator()?;
    let s = &config.synth;
    let dir = out.join("lake");
    let mut index = 0u64;
    let mut files = 0usize;
    for &cols in &s.cols {
        for &rows in &s.rows {
            for rep in 0..s.replicas {
                let seed = derive_seed(config.seed, "synth.dataset", index);
                index += 1;
                let d = gen_synth_dataset(rows, cols, generator, seed)?;
                let stem = format!("synth-{generator}-c{cols}-r{rows}-{rep}");
                write_file(&dir.join(format!("{stem}.csv")), record_csv(&d))?;
                files += 1;
                for (n, &level) in s.noise_levels.iter().enumerate() {
                    let noisy = add_gaussian_noise(&d, level, s.noise_sigma, s.noise_scope, derive_seed(seed, "synth.noise", n as u64))?;
                    let name = format!("{stem}-noise-{}-{level}.csv", s.noise_scope.as_str());
                    write_file(&dir.join(name), record_csv(&noisy))?;
                    files += 1;
                }
            }
        }
    }
    diag.line(&[("synth", dir.display().to_string()), ("files", files.to_string())]);
    ingest_dir(config, &dir, out, diag)
}

fn cmd_report(config: &RunConfig, kind: &str, query: Option<&str>, out: &Path, diag: &mut Diag) -> Result<i32> {
    let kind = PlotKind::parse(kind)
        .ok_or_else(|| VenomError::Config(format!("unknown plot kind {kind:?}; use representation, noise-shift or loss-bars")))?;
    let target = out.join("plots").join(format!("{kind}.csv"));
    let text = match kind {
        PlotKind::Representation => {
            let lake = Lake::load(config, out)?;
            let model = load_vectorizer(out)?;
            let store = load_matching_store(out, &model)?;
            let points: Vec<(String, String, Vec<f64>)> = lake
                .registry
                .entries()
                .iter()
                .filter_map(|e| store.get(&e.id).map(|z| (e.id.clone(), format!("cols{}", e.cols), z.to_vec())))
                .collect();
            representation_csv(&points, config.report_dims)?
        }
        PlotKind::NoiseShift => {
            let lake = Lake::load(config, out)?;
            let model = load_vectorizer(out)?;
            let query = query.ok_or_else(|| VenomError::Config("noise-shift needs --query".into()))?;
            let base = lake.query(config, query)?;
            let levels = if config.synth.noise_levels.is_empty() { vec![0.05, 0.1, 0.2, 0.4] } else { config.synth.noise_levels.clone() };
            let shifts = noise_shift(&model, &base, &levels, config.synth.noise_sigma, config.synth.noise_scope, config.seed)?;
            noise_shift_csv(&shifts)
        }
        PlotKind::LossBars => {
            let p = out.join(REPORT_FILE);
            let text = std::fs::read_to_string(&p).map_err(|e| VenomError::io(&p, e))?;
            loss_bars_csv(&parse_report(&text)?)
        }
    };
    write_file(&target, text)?;
    diag.line(&[("plot", target.display().to_string()), ("kind", kind.to_string())]);
    Ok(0)
}

fn parse_report(text: &str) -> Result<Vec<ReportRow>> {
    let bad = |l: &str| VenomError::parse("report", l.to_string());
    let mut lines = text.lines();
    if lines.next() != Some(crate::evalbench::REPORT_HEADER) {
        return Err(bad("missing header"));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(bad(l));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(l));
            Ok(ReportRow {
                experiment: f[0].to_string(),
                arm: f[1].to_string(),
                k: f[2].parse().map_err(|_| bad(l))?,
                rmse: num(f[3])?,
                mae: num(f[4])?,
                speedup: num(f[5])?,
                amortized_speedup: num(f[6])?,
                reps: f[7].parse().map_err(|_| bad(l))?,
            })
        })
        .collect()
}
