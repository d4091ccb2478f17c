//! `cikit`: batch workflows over the compliance engine, plus the reward server.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or schema error.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context as _, Result};
use cikit_client::RewardClient;
use cikit_core::api::{score_request, RewardItem, RewardMode, RewardRequest, RewardResponse};
use cikit_core::cases::CaseStore;
use cikit_core::kg::{Position, TripleStore};
use cikit_core::mcq::{generate, Category, McqItem, TrigramEmbedder};
use cikit_core::metrics::{self, LabeledPrediction, TermPrediction};
use cikit_core::ppo::{train, PpoConfig};
use cikit_core::regulation::{Law, RegulationDocument, RegulationStore};
use cikit_core::verifier::{build_compliance_question, parse_predictions, render_compliance_prompt, Verifier, VerifierConfig};
use cikit_service::ServiceConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "cikit", version, about = "Contextual-integrity compliance toolkit")]
struct Cli {
    /// TOML file of defaults (seed, mode, format, bind, url, cap); explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    settings: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate regulation trees and emit the merged canonical document.
    IngestRegulations(IngestRegulationsArgs),
    /// Validate a case file and emit the normalized cases.
    IngestCases(CasesOut),
    /// Case counts per domain and verdict.
    Stats(CasesOut),
    /// Stratified train/test split.
    Split(SplitArgs),
    /// Render the compliance question for a case or an ad-hoc event.
    Ask(AskArgs),
    /// Check one response against a case.
    Verify(VerifyArgs),
    /// Score a predictions file, locally or through a running service.
    Reward(RewardArgs),
    /// Build multiple-choice questions on CI parameters.
    GenMcq(GenMcqArgs),
    /// Compute an evaluation metric from gold and predicted labels.
    Eval(EvalArgs),
    /// Train the toy PPO policy and write its learning curve.
    TrainPpo(TrainPpoArgs),
    /// Run the reward service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Json,
    Tsv,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Text => "text",
            Format::Json => "json",
            Format::Tsv => "tsv",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Strict,
    Lenient,
}

impl From<Mode> for RewardMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => RewardMode::Strict,
            Mode::Lenient => RewardMode::Lenient,
        }
    }
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestRegulationsArgs {
    /// Regulation JSON tree; repeatable.
    #[arg(long = "file", visible_alias = "input", required = true, value_name = "FILE")]
    files: Vec<PathBuf>,
    /// Every file must contain only this law (GDPR, HIPAA or AI_ACT); also filters `--search`.
    #[arg(long)]
    law: Option<String>,
    /// Emit search hits for this keyword instead of the document.
    #[arg(long)]
    search: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct CasesOut {
    #[arg(long, value_name = "FILE")]
    cases: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long, value_name = "FILE")]
    cases: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct AskArgs {
    #[arg(long, value_name = "FILE", requires = "id", conflicts_with_all = ["event", "domain"])]
    cases: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long, requires = "domain")]
    event: Option<String>,
    #[arg(long, requires = "event")]
    domain: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_name = "FILE")]
    cases: PathBuf,
    #[arg(long)]
    id: String,
    /// Response text file, or `-` for stdin.
    #[arg(long, value_name = "FILE")]
    response: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// A CI block contradicting the case annotation scores 0.
    #[arg(long)]
    ci_gates_reward: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct RewardArgs {
    #[arg(long, value_name = "FILE", required_unless_present_any = ["url", "settings"])]
    cases: Option<PathBuf>,
    /// `case_id<TAB>response` lines with `\n`, `\t`, `\\` escapes.
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Score through a running service instead of locally (also CIKIT_URL).
    #[arg(long, env = "CIKIT_URL", conflicts_with = "cases")]
    url: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct GenMcqArgs {
    #[arg(long, value_name = "FILE")]
    cases: PathBuf,
    /// sender, recipient, subject or attribute; repeatable, default all.
    #[arg(long = "category")]
    categories: Vec<String>,
    /// Draw distractors from this triple store instead of the case annotations.
    #[arg(long, value_name = "FILE")]
    kg: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Acc,
    #[value(alias = "balanced-acc")]
    Bacc,
    F1,
    Nld,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_enum)]
    metric: Metric,
    /// `id<TAB>label` lines.
    #[arg(long, value_name = "FILE")]
    gold: PathBuf,
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Cap in months for `nld`.
    #[arg(long)]
    cap: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct TrainPpoArgs {
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    cases: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Also write the final policy and value weights as JSON.
    #[arg(long, value_name = "FILE")]
    params_out: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, value_name = "FILE")]
    cases: PathBuf,
    #[arg(long, env = "CIKIT_BIND")]
    bind: Option<String>,
    /// Allow `?include_gold=true` on the case endpoint.
    #[arg(long)]
    expose_gold: bool,
    #[arg(long)]
    ci_gates_reward: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    seed: Option<u64>,
    mode: Option<Mode>,
    format: Option<Format>,
    bind: Option<String>,
    url: Option<String>,
    cap: Option<f64>,
    cases: Option<PathBuf>,
}

/// A problem with how the command was invoked rather than with the data.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = match &cli.settings {
        Some(path) => toml::from_str::<Settings>(&read_text(path)?)
            .map_err(|e| usage(format!("settings {}: {e}", path.display())))?,
        None => Settings::default(),
    };
    match cli.command {
        Command::IngestRegulations(a) => ingest_regulations(a, &settings),
        Command::IngestCases(a) => ingest_cases(a, &settings),
        Command::Stats(a) => stats(a, &settings),
        Command::Split(a) => split(a, &settings),
        Command::Ask(a) => ask(a, &settings),
        Command::Verify(a) => verify(a, &settings),
        Command::Reward(a) => reward(a, &settings),
        Command::GenMcq(a) => gen_mcq(a, &settings),
        Command::Eval(a) => eval(a, &settings),
        Command::TrainPpo(a) => train_ppo(a, &settings),
        Command::Serve(a) => serve(a, &settings),
    }
}

fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Resolves `--format` (flag, then settings, then `default`) and rejects formats the command lacks.
fn format_of(output: &Output, settings: &Settings, default: Format, allowed: &[Format]) -> Result<Format> {
    let f = output.format.or(settings.format).unwrap_or(default);
    if !allowed.contains(&f) {
        let names: Vec<String> = allowed.iter().map(ToString::to_string).collect();
        return Err(usage(format!("--format {f} is not supported here (use {})", names.join(", "))));
    }
    Ok(f)
}

fn json_line<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn load_cases(path: &Path) -> Result<CaseStore> {
    let out = CaseStore::ingest_json(&read_text(path)?).with_context(|| format!("loading {}", path.display()))?;
    for e in &out.errors {
        eprintln!("warning: {}: record {} ({}): {}", path.display(), e.index, e.id.as_deref().unwrap_or("?"), e.message);
    }
    Ok(out.store)
}

fn cases_path<'a>(flag: Option<&'a PathBuf>, settings: &'a Settings) -> Result<&'a PathBuf> {
    flag.or(settings.cases.as_ref()).ok_or_else(|| usage("--cases is required"))
}

fn parse_law(s: &str) -> Result<Law> {
    Law::parse(s).ok_or_else(|| usage(format!("unknown law `{s}` (use GDPR, HIPAA or AI_ACT)")))
}

fn ingest_regulations(a: IngestRegulationsArgs, settings: &Settings) -> Result<()> {
    let format = format_of(&a.output, settings, Format::Json, &[Format::Json, Format::Tsv])?;
    let law = a.law.as_deref().map(parse_law).transpose()?;
    let mut store = RegulationStore::new();
    for path in &a.files {
        let doc = RegulationDocument::from_json(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(want) = law {
            if let Some(other) = doc.laws.iter().find(|n| n.law != want) {
                bail!("{} contains {} but --law is {}", path.display(), other.law.display_name(), want.display_name());
            }
        }
        let report = store.ingest(doc).with_context(|| format!("ingesting {}", path.display()))?;
        let counts: Vec<String> = report.counts.iter().map(|(l, n)| format!("{l:?}={n}")).collect();
        eprintln!("{}: {} nodes ({})", path.display(), report.total(), counts.join(", "));
    }
    let text = match (&a.search, format) {
        (Some(keyword), Format::Tsv) => {
            let mut s = String::from("path\tsnippet\n");
            for h in store.search(keyword, law)? {
                s.push_str(&format!("{}\t{}\n", h.path, h.snippet.replace(['\t', '\n'], " ")));
            }
            s
        }
        (Some(keyword), _) => json_line(&store.search(keyword, law)?)?,
        (None, Format::Json) => store.export().to_canonical_json(),
        (None, _) => {
            let mut s = String::from("path\tlevel\ttitle\n");
            for (path, node) in store.walk() {
                s.push_str(&format!("{path}\t{:?}\t{}\n", node.level, node.title));
            }
            s
        }
    };
    emit(&a.output, &text)
}

fn ingest_cases(a: CasesOut, settings: &Settings) -> Result<()> {
    format_of(&a.output, settings, Format::Json, &[Format::Json])?;
    let store = load_cases(&a.cases)?;
    eprintln!("{}: {} cases", a.cases.display(), store.len());
    emit(&a.output, &(store.to_json() + "\n"))
}

fn stats(a: CasesOut, settings: &Settings) -> Result<()> {
    let format = format_of(&a.output, settings, Format::Text, &[Format::Text, Format::Json, Format::Tsv])?;
    let table = load_cases(&a.cases)?.stats();
    let text = match format {
        Format::Text => table.render_text(),
        Format::Tsv => table.render_tsv(),
        Format::Json => json_line(&table.to_json())?,
    };
    emit(&a.output, &text)
}

fn split(a: SplitArgs, settings: &Settings) -> Result<()> {
    let format = format_of(&a.output, settings, Format::Json, &[Format::Json, Format::Tsv])?;
    if !(a.ratio > 0.0 && a.ratio < 1.0) {
        return Err(usage(format!("--ratio {} must lie strictly between 0 and 1", a.ratio)));
    }
    let seed = a.seed.or(settings.seed).unwrap_or(0);
    let assignment = load_cases(&a.cases)?.split(a.ratio, seed)?;
    let text = match format {
        Format::Tsv => assignment.render_tsv(),
        _ => json_line(&assignment)?,
    };
    emit(&a.output, &text)
}

fn ask(a: AskArgs, settings: &Settings) -> Result<()> {
    let format = format_of(&a.output, settings, Format::Text, &[Format::Text, Format::Json])?;
    let text = match (&a.cases, &a.event, &a.domain) {
        (Some(path), _, _) => {
            let store = load_cases(path)?;
            let id = a.id.as_deref().expect("clap enforces --id");
            let case = store.get(id).ok_or_else(|| anyhow!("unknown case `{id}`"))?;
            let q = build_compliance_question(case)?;
            match format {
                Format::Json => json_line(&q)?,
                _ => q.prompt + "\n",
            }
        }
        (None, Some(event), Some(domain)) => {
            if event.trim().is_empty() {
                bail!("empty event");
            }
            if format == Format::Json {
                return Err(usage("--format json needs a case (--cases/--id)"));
            }
            render_compliance_prompt(parse_law(domain)?, event) + "\n"
        }
        _ => return Err(usage("give either --cases with --id, or --event with --domain")),
    };
    emit(&a.output, &text)
}

fn verify(a: VerifyArgs, settings: &Settings) -> Result<()> {
    format_of(&a.output, settings, Format::Json, &[Format::Json])?;
    let store = load_cases(&a.cases)?;
    let case = store.get(&a.id).ok_or_else(|| anyhow!("unknown case `{}`", a.id))?;
    let question = build_compliance_question(case)?;
    let response = read_text(&a.response)?;
    let mode = a.mode.or(settings.mode).unwrap_or(Mode::Strict);
    let verifier = Verifier::new(VerifierConfig { ci_gates_reward: a.ci_gates_reward });
    let report = verifier.verify(&response, &question, mode == Mode::Strict);
    emit(&a.output, &json_line(&report)?)
}

fn reward(a: RewardArgs, settings: &Settings) -> Result<()> {
    let format = format_of(&a.output, settings, Format::Json, &[Format::Json, Format::Tsv])?;
    let preds = parse_predictions(&read_text(&a.pred)?)?;
    let mode: RewardMode = a.mode.or(settings.mode).unwrap_or(Mode::Lenient).into();
    let request = RewardRequest {
        items: preds.into_iter().map(|p| RewardItem::new(p.case_id, p.response)).collect(),
        mode,
    };
    let url = a.url.clone().or_else(|| if a.cases.is_none() { settings.url.clone() } else { None });
    let response = match url {
        Some(url) => {
            let client = RewardClient::new(url)?;
            tokio::runtime::Runtime::new()?.block_on(client.reward(&request))?
        }
        None => {
            let store = load_cases(cases_path(a.cases.as_ref(), settings)?)?;
            score_request(&store, &Verifier::default(), &request)
        }
    };
    let text = match format {
        Format::Tsv => reward_tsv(&response),
        _ => json_line(&response)?,
    };
    emit(&a.output, &text)
}

fn reward_tsv(r: &RewardResponse) -> String {
    let mut s = String::from("case_id\treward\tformat_ok\tparsed_choice\terrors\n");
    for i in &r.items {
        let choice = i.parsed_choice.map(String::from).unwrap_or_default();
        s.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", i.case_id, i.reward, i.format_ok, choice, i.errors.join("; ")));
    }
    s
}

fn gen_mcq(a: GenMcqArgs, settings: &Settings) -> Result<()> {
    format_of(&a.output, settings, Format::Json, &[Format::Json])?;
    let categories: Vec<Category> = if a.categories.is_empty() {
        Category::ALL.to_vec()
    } else {
        a.categories
            .iter()
            .map(|c| Category::parse(c).ok_or_else(|| usage(format!("unknown category `{c}`"))))
            .collect::<Result<_>>()?
    };
    let seed = a.seed.or(settings.seed).unwrap_or(0);
    let store = load_cases(&a.cases)?;
    let kg = a.kg.as_deref().map(|p| read_text(p).and_then(|s| Ok(TripleStore::from_tsv(&s)?))).transpose()?;
    let embedder = TrigramEmbedder::default();
    let mut items: Vec<McqItem> = Vec::new();
    for &category in &categories {
        let pool: Vec<&str> = match &kg {
            Some(kg) => match category {
                Category::Sender => kg.labels(Position::Sender),
                Category::Subject => kg.labels(Position::Subject),
                Category::Recipient => kg.labels(Position::Recipient),
                Category::Attribute => kg.attribute_labels(),
            },
            None => store.iter().filter_map(|c| category.answer_of(c)).collect(),
        };
        for case in store.iter() {
            if category.answer_of(case).is_none() {
                continue;
            }
            match generate(case, category, &pool, &embedder, seed) {
                Ok(item) => items.push(item),
                Err(e) => eprintln!("warning: {} {category}: {e}", case.id),
            }
        }
    }
    if items.is_empty() {
        bail!("no questions could be generated");
    }
    emit(&a.output, &json_line(&items)?)
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| anyhow!("{}:{}: expected `id<TAB>label`", path.display(), n + 1))?;
        if out.insert(id.to_string(), label.trim().to_string()).is_some() {
            bail!("{}:{}: duplicate id `{id}`", path.display(), n + 1);
        }
    }
    Ok(out)
}

fn eval(a: EvalArgs, settings: &Settings) -> Result<()> {
    let format = format_of(&a.output, settings, Format::Json, &[Format::Json, Format::Tsv])?;
    let gold = read_labels(&a.gold)?;
    let pred = read_labels(&a.pred)?;
    let mut pairs = Vec::with_capacity(gold.len());
    for (id, g) in &gold {
        let p = pred.get(id).ok_or_else(|| anyhow!("no prediction for `{id}`"))?;
        pairs.push((id.as_str(), g.as_str(), p.as_str()));
    }
    let extra: Vec<&String> = pred.keys().filter(|k| !gold.contains_key(*k)).collect();
    if !extra.is_empty() {
        eprintln!("warning: {} predictions without gold ignored", extra.len());
    }
    let labeled = || pairs.iter().map(|(_, g, p)| LabeledPrediction::new(*g, *p)).collect::<Vec<_>>();
    let (name, value) = match a.metric {
        Metric::Acc => ("acc", metrics::accuracy(&labeled())?),
        Metric::Bacc => ("balanced_acc", metrics::balanced_accuracy(&labeled())?),
        Metric::F1 => ("macro_f1", metrics::macro_f1(&labeled())?),
        Metric::Nld => {
            let cap = a.cap.or(settings.cap).ok_or_else(|| usage("--cap is required for nld"))?;
            let num = |id: &str, s: &str| s.parse::<f64>().map_err(|_| anyhow!("`{id}`: `{s}` is not a number"));
            let terms = pairs
                .iter()
                .map(|(id, g, p)| Ok(TermPrediction { gold_months: num(id, g)?, pred_months: num(id, p)? }))
                .collect::<Result<Vec<_>>>()?;
            ("nld", metrics::normalized_log_distance(&terms, cap)?)
        }
    };
    let text = match format {
        Format::Tsv => format!("metric\tvalue\tn\n{name}\t{value}\t{}\n", pairs.len()),
        _ => json_line(&serde_json::json!({"metric": name, "value": value, "n": pairs.len()}))?,
    };
    emit(&a.output, &text)
}

fn train_ppo(a: TrainPpoArgs, settings: &Settings) -> Result<()> {
    format_of(&a.output, settings, Format::Text, &[Format::Text])?;
    let mut config: PpoConfig = match &a.config {
        Some(path) => toml::from_str(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => PpoConfig::default(),
    };
    if let Some(seed) = a.seed.or(settings.seed) {
        config.seed = seed;
    }
    if let Some(n) = a.iterations {
        config.iterations = n;
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    let store = load_cases(&a.cases)?;
    let report = train(&store, &Verifier::default(), &config)?;
    if let Some(tail) = report.tail_mean_reward(20) {
        eprintln!("{} iterations, mean reward over the last 20: {tail:.4}", report.curve.len());
    }
    if let Some(path) = &a.params_out {
        let params = serde_json::json!({"policy": report.policy, "value": report.value, "config": config});
        fs::write(path, json_line(&params)?).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&a.output, &report.curve_csv())
}

fn serve(a: ServeArgs, settings: &Settings) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    let bind = a.bind.or_else(|| settings.bind.clone()).unwrap_or_else(|| "127.0.0.1:8080".to_string());
    let store = load_cases(&a.cases)?;
    let config = ServiceConfig { expose_gold: a.expose_gold, verifier: VerifierConfig { ci_gates_reward: a.ci_gates_reward } };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(cikit_service::serve(store, config, &bind))?;
    Ok(())
}
