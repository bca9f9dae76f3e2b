use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;
use toxlogic::casegen::{generate_dataset, Dataset, DIFFICULTIES, UNIFORM_WEIGHTS};
use toxlogic::evalkappa::{read_external_labels, run_benchmark, BenchmarkConfig};
use toxlogic::toxkb::{ClassifyError, Finding, KnowledgeBase, Priors, Toxidrome};
use toxlogic::worlds::DEFAULT_ENUMERATION_CAP;

/// Probabilistic toxidrome classification and benchmarking.
#[derive(Debug, Parser)]
#[command(name = "toxlogic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded dataset of synthetic cases.
    Generate(GenerateArgs),
    /// Classify cases from a dataset file or from inline findings.
    Classify(ClassifyArgs),
    /// Same as `classify --explain`.
    Explain(ClassifyArgs),
    /// Score the knowledge base and the decision tree against intended labels.
    Evaluate(EvaluateArgs),
    /// Parse, ground, lint and self-test a knowledge base.
    KbValidate(KbArgs),
}

#[derive(Debug, Args)]
struct KbArgs {
    /// Rule file; the shipped knowledge base when omitted.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// TOML table of `toxidrome = prior`.
    #[arg(long)]
    priors: Option<PathBuf>,
    /// Maximum number of branching choice groups to enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    /// Skip the canonical-presentation self-test (for partial rule files).
    #[arg(long)]
    no_self_test: bool,
}

#[derive(Debug, Args)]
struct WeightArgs {
    /// Relative weights of difficulties 0, 1 and 2.
    #[arg(long, value_delimiter = ',', default_values_t = UNIFORM_WEIGHTS)]
    weights: Vec<f64>,
}

impl WeightArgs {
    /// Scaled to sum to 1; anything else is a usage error.
    fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        if self.weights.len() != DIFFICULTIES.len()
            || self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
            || !(total > 0.0)
        {
            Cli::command()
                .error(
                    ErrorKind::ValueValidation,
                    format!("--weights needs three non-negative numbers with a positive sum, got {:?}", self.weights),
                )
                .exit();
        }
        self.weights.iter().map(|w| w / total).collect()
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[command(flatten)]
    weights: WeightArgs,
    /// Directory for `cases.jsonl` and `counts.csv`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    kb: KbArgs,
    /// JSONL dataset to classify.
    #[arg(long, conflicts_with = "finding", required_unless_present = "finding")]
    dataset: Option<PathBuf>,
    /// Inline finding, `sign=value`; may be repeated.
    #[arg(long)]
    finding: Vec<Finding>,
    #[arg(long)]
    explain: bool,
    /// Worlds listed per explanation.
    #[arg(long, default_value_t = 3)]
    top: usize,
    /// Write results here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    kb: KbArgs,
    /// Seeds case generation (when no dataset is given) and the held-out split.
    #[arg(long)]
    seed: u64,
    /// Existing dataset; generated from the seed when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[command(flatten)]
    weights: WeightArgs,
    /// JSONL labels from outside raters: `{"id": .., "label": .., "rater": ..}`.
    #[arg(long)]
    external_labels: Option<PathBuf>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Directory for `kappa.csv` and `report.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} `{}` does not exist or is not a file", path.display());
    }
    Ok(())
}

fn prepare_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating output directory `{}`", path.display()))
}

impl KbArgs {
    fn check_paths(&self) -> Result<()> {
        if let Some(kb) = &self.kb {
            require_file(kb, "knowledge base")?;
        }
        if let Some(p) = &self.priors {
            require_file(p, "priors file")?;
        }
        Ok(())
    }

    fn load(&self) -> Result<KnowledgeBase> {
        let priors = self.priors.as_deref().map(Priors::read).transpose()?;
        let source = match &self.kb {
            Some(path) => fs::read_to_string(path).with_context(|| format!("reading `{}`", path.display()))?,
            None => toxlogic::toxkb::SHIPPED_KB.to_string(),
        };
        let kb = KnowledgeBase::from_source_unchecked(&source, priors)?.with_cap(self.cap);
        if !self.no_self_test {
            kb.self_test()?;
        }
        Ok(kb)
    }
}

fn read_dataset(path: &Path, seed: u64) -> Result<Dataset> {
    let file = fs::File::open(path).with_context(|| format!("opening `{}`", path.display()))?;
    Dataset::from_jsonl(BufReader::new(file), seed).with_context(|| format!("reading `{}`", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing `{}`", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let weights = args.weights.normalized();
    prepare_dir(&args.out)?;
    let dataset = generate_dataset(args.seed, args.n as usize, &weights)?;
    write_file(&args.out.join("cases.jsonl"), &dataset.to_jsonl())?;
    write_file(&args.out.join("counts.csv"), &dataset.counts_csv())?;
    eprintln!("wrote {} cases to {}", dataset.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct Explanation {
    weight: f64,
    fired: Vec<String>,
}

#[derive(Serialize)]
struct Classified {
    id: Option<u64>,
    /// `None` when the knowledge base abstains.
    argmax: Option<Toxidrome>,
    /// Prior-weighted and normalized.
    posterior: Option<BTreeMap<Toxidrome, f64>>,
    /// `P(label | findings)` before the priors are applied.
    probability: Option<BTreeMap<Toxidrome, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abstained: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    explanation: Option<Vec<Explanation>>,
}

fn classify_one(kb: &KnowledgeBase, id: Option<u64>, findings: &[Finding], explain: bool, top: usize) -> Result<Classified> {
    match kb.classify(findings) {
        Ok(d) => {
            let explanation = if explain {
                let worlds = kb
                    .engine()
                    .explain(kb.label(d.predicted), &KnowledgeBase::evidence(findings), top)?;
                Some(
                    worlds
                        .into_iter()
                        .map(|w| Explanation {
                            weight: w.weight,
                            fired: w.fired,
                        })
                        .collect(),
                )
            } else {
                None
            };
            Ok(Classified {
                id,
                argmax: Some(d.predicted),
                posterior: Some(d.posterior.into_iter().collect()),
                probability: Some(d.probability.into_iter().collect()),
                abstained: None,
                explanation,
            })
        }
        Err(ClassifyError::NoDiagnosis) => Ok(Classified {
            id,
            argmax: None,
            posterior: None,
            probability: None,
            abstained: Some(ClassifyError::NoDiagnosis.to_string()),
            explanation: None,
        }),
        Err(e) => Err(e).context(match id {
            Some(id) => format!("case {id}"),
            None => "inline findings".to_string(),
        }),
    }
}

fn classify(args: ClassifyArgs, explain: bool) -> Result<()> {
    args.kb.check_paths()?;
    if let Some(d) = &args.dataset {
        require_file(d, "dataset")?;
    }
    let kb = args.kb.load()?;
    let explain = explain || args.explain;

    let results = match &args.dataset {
        Some(path) => read_dataset(path, 0)?
            .cases
            .iter()
            .map(|c| classify_one(&kb, Some(c.id), &c.findings, explain, args.top))
            .collect::<Result<Vec<_>>>()?,
        None => vec![classify_one(&kb, None, &args.finding, explain, args.top)?],
    };
    let mut out = String::new();
    for r in &results {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    match &args.out {
        Some(path) => write_file(path, &out),
        None => io::stdout().write_all(out.as_bytes()).context("writing to standard output"),
    }
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    args.kb.check_paths()?;
    if let Some(d) = &args.dataset {
        require_file(d, "dataset")?;
    }
    if let Some(e) = &args.external_labels {
        require_file(e, "external labels")?;
    }
    let weights = args.weights.normalized();
    prepare_dir(&args.out)?;

    let kb = args.kb.load()?;
    let dataset = match &args.dataset {
        Some(path) => read_dataset(path, args.seed)?,
        None => generate_dataset(args.seed, args.n as usize, &weights)?,
    };
    let external = match &args.external_labels {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("opening `{}`", path.display()))?;
            read_external_labels(BufReader::new(file))?
        }
        None => Default::default(),
    };
    let config = BenchmarkConfig {
        max_depth: args.max_depth,
        split_seed: Some(args.seed),
        external,
    };
    let report = run_benchmark(&kb, &dataset, &config)?;
    write_file(&args.out.join("kappa.csv"), &report.to_csv())?;
    write_file(&args.out.join("report.json"), &report.to_json())?;
    print!("{}", report.to_csv());
    let abstentions: usize = report
        .reports
        .iter()
        .filter(|r| r.pair == "tak_vs_intended")
        .map(|r| r.abstentions)
        .sum();
    if abstentions > 0 {
        eprintln!("{abstentions} cases had no diagnosis and were left out of the tak matrices");
    }
    Ok(())
}

fn kb_validate(args: KbArgs) -> Result<()> {
    args.check_paths()?;
    let kb = args.load()?;
    let counts = kb.clause_counts();
    println!(
        "{} clauses ({} priors, {} linking, {} goals)",
        counts.total, counts.priors, counts.linking, counts.goals
    );
    if counts.total != 34 {
        println!("warning: expected 34 clauses");
    }
    let present = kb.labels().iter().filter(|l| kb.ground.lookup(l).is_some()).count();
    if present < Toxidrome::ALL.len() {
        println!("warning: only {present} of 6 toxidrome labels appear in the rules");
    }
    println!("{} choice groups after grounding", kb.ground.groups.len());
    if args.no_self_test {
        println!("self-test skipped");
    } else {
        println!("self-test passed for all 6 toxidromes");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Classify(a) => classify(a, false),
        Command::Explain(a) => classify(a, true),
        Command::Evaluate(a) => evaluate(a),
        Command::KbValidate(a) => kb_validate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
