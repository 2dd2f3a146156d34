use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nascar_core::analyzer::{CommandTemplate, ExternalConfig, RuleUniverse, Tool};
use nascar_core::dataset::{read_dataset, write_dataset, DatasetFormat, LabeledRecord};
use nascar_core::pipeline::{self, CommitFilter, MineSummary, PipelineError, RunConfig};
use nascar_core::{fixture, stats};

/// Mine actionable and non-actionable static-analysis warnings from Git
/// history, and build, deduplicate and summarize the resulting dataset.
#[derive(Parser)]
#[command(name = "nascar", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mine one repository (URL or local path).
    Mine {
        repo: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Mine every repository listed in a file, one per line.
    Feed {
        list: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Assemble the dataset and source archive from a mining work directory.
    CreateDataset {
        mined_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Parquet)]
        format: Format,
        /// Also pack the source archive into files.zip next to the dataset.
        #[arg(long)]
        zip: bool,
    },
    /// Drop near-duplicate records by code context.
    Dedup {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory containing `files/`; defaults to the dataset's directory.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Print summary tables.
    Stats {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        kind: StatsKind,
        #[arg(long, value_enum, default_value_t = OutFormat::Table)]
        format: OutFormat,
        /// Tool for `category` and `rules` tables.
        #[arg(long, default_value = "pmd", value_parser = parse_tool)]
        tool: Tool,
        /// Rule universe: a manifest file or a spotbugs.jar. PMD and builtin
        /// universes are bundled.
        #[arg(long)]
        universe: Option<PathBuf>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Size and draw the manual validation sample.
    Sample {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.90)]
        confidence: f64,
        #[arg(long, default_value_t = 0.10)]
        margin: f64,
        #[arg(long, default_value_t = 0.5)]
        p_hat: f64,
        /// Use this z-score instead of deriving it from --confidence.
        #[arg(long)]
        z: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the drawn records as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a synthetic demo repository with a known history.
    Fixture {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = FixtureKind::Demo)]
        kind: FixtureKind,
    },
    /// Write a rule universe manifest, e.g. extracted from spotbugs.jar.
    Universe {
        #[arg(long, value_parser = parse_tool)]
        tool: Tool,
        /// spotbugs.jar to read bug patterns from.
        #[arg(long)]
        jar: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// First commit date to include (YYYY-MM-DD, UTC).
    #[arg(long)]
    since: Option<String>,
    /// Last commit date to include (YYYY-MM-DD, UTC midnight).
    #[arg(long)]
    until: Option<String>,
    /// Comma-separated subset of pmd, spotbugs, builtin.
    #[arg(long, default_value = "pmd,spotbugs")]
    analyzers: String,
    #[arg(long, default_value = "work")]
    workdir: PathBuf,
    /// Run manifest path (default: <workdir>/manifest.jsonl).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `none`, or `cmd:<program> [args]` reading child shas on stdin and
    /// printing those to keep.
    #[arg(long, default_value = "none")]
    commit_filter: String,
    /// PMD command template ({src}, {ruleset}, {report}).
    #[arg(long)]
    pmd_cmd: Option<String>,
    /// SpotBugs command template ({classes}, {report}).
    #[arg(long)]
    spotbugs_cmd: Option<String>,
    /// Build command run before SpotBugs (default: Maven or Gradle).
    #[arg(long)]
    build_cmd: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Parquet,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsKind {
    Category,
    Rules,
    Projects,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Table,
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Demo,
    Conflict,
    KeepLast,
}

fn parse_tool(s: &str) -> Result<Tool, String> {
    s.parse()
}

/// Configuration problems exit with 2, like usage errors.
struct Fatal(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Fatal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8, Fatal> {
    match cmd {
        Cmd::Mine { repo, run } => {
            let mut config = run_config(&run)?;
            config.repos = vec![repo];
            Ok(report_mine(&pipeline::run_mine(&config)?))
        }
        Cmd::Feed { list, run } => {
            let config = run_config(&run)?;
            let summary = pipeline::run_feed(&list, &config)
                .with_context(|| format!("feeding {}", list.display()))?;
            Ok(report_mine(&summary))
        }
        Cmd::CreateDataset {
            mined_dir,
            out,
            format,
            zip,
        } => {
            let format = match format {
                Format::Parquet => DatasetFormat::Parquet,
                Format::Jsonl => DatasetFormat::Jsonl,
            };
            match pipeline::create_dataset(&mined_dir, &out, format, zip) {
                Ok(s) => {
                    println!("repositories:   {}", s.repos);
                    println!("records:        {}", s.records);
                    println!("actionable:     {}", s.actionable);
                    println!("non-actionable: {}", s.non_actionable);
                    println!("source files:   {}", s.archived_files);
                    if let Some(z) = s.zip {
                        println!("archive:        {}", z.display());
                    }
                    Ok(0)
                }
                Err(PipelineError::InvalidRecords(problems)) => {
                    for p in &problems {
                        eprintln!("invalid: {p}");
                    }
                    eprintln!("{} problem(s); dataset not written", problems.len());
                    Ok(1)
                }
                Err(e) => Err(e.into()),
            }
        }
        Cmd::Dedup {
            dataset,
            out,
            archive,
        } => {
            let s = pipeline::dedup_file(&dataset, &out, archive.as_deref())?;
            for f in &s.flagged {
                eprintln!("kept without comparison: row {}: {}", f.row, f.reason);
            }
            println!("input:    {}", s.input);
            println!("kept:     {}", s.kept);
            println!("dropped:  {}", s.dropped);
            println!("flagged:  {}", s.flagged.len());
            println!("drop log: {}", s.drop_log.display());
            Ok(0)
        }
        Cmd::Stats {
            dataset,
            kind,
            format,
            tool,
            universe,
            out,
        } => {
            let records =
                read_dataset(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let text = render_stats(&records, kind, format, tool, universe.as_deref())?;
            emit(&text, out.as_deref())?;
            Ok(0)
        }
        Cmd::Sample {
            dataset,
            confidence,
            margin,
            p_hat,
            z,
            seed,
            out,
        } => {
            let records =
                read_dataset(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            sample(&records, confidence, margin, p_hat, z, seed, out.as_deref())?;
            Ok(0)
        }
        Cmd::Fixture { dir, kind } => {
            if dir.exists() && std::fs::read_dir(&dir)?.next().is_some() {
                bail_fatal(format!("{} exists and is not empty", dir.display()))?;
            }
            let repo = match kind {
                FixtureKind::Demo => fixture::build_demo_repo(&dir)?,
                FixtureKind::Conflict => fixture::build_conflict_repo(&dir)?,
                FixtureKind::KeepLast => fixture::build_keep_last_repo(&dir)?,
            };
            for (name, sha) in &repo.commits {
                println!("{name}\t{sha}");
            }
            Ok(0)
        }
        Cmd::Universe { tool, jar, out } => {
            let universe = match (tool, jar) {
                (Tool::SpotBugs, Some(jar)) => RuleUniverse::from_spotbugs_jar(&jar)?,
                (Tool::SpotBugs, None) => bail_fatal("--jar is required for spotbugs".into())?,
                (t, _) => RuleUniverse::bundled(t).expect("bundled universe"),
            };
            emit(&universe.to_manifest(), out.as_deref())?;
            eprintln!("{} rules", universe.len());
            Ok(0)
        }
    }
}

fn bail_fatal<T>(msg: String) -> Result<T, Fatal> {
    Err(Fatal(anyhow::anyhow!(msg)))
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = RunConfig::new(&args.workdir);
    let day = |s: &Option<String>| {
        s.as_deref()
            .map(pipeline::parse_day)
            .transpose()
            .map_err(anyhow::Error::msg)
    };
    config.since = day(&args.since)?;
    config.until = day(&args.until)?;
    config.analyzers = pipeline::parse_analyzers(&args.analyzers).map_err(anyhow::Error::msg)?;
    config.out = args.out.clone();
    config.workers = args.workers;
    config.seed = args.seed;
    config.commit_filter = args
        .commit_filter
        .parse::<CommitFilter>()
        .map_err(anyhow::Error::msg)?;
    let template = |flag: &str, s: &Option<String>| -> Result<Option<CommandTemplate>> {
        match s {
            None => Ok(None),
            Some(s) => CommandTemplate::parse(s)
                .map(Some)
                .with_context(|| format!("--{flag} is empty")),
        }
    };
    let mut external = ExternalConfig::default();
    if let Some(t) = template("pmd-cmd", &args.pmd_cmd)? {
        external.pmd = t;
    }
    if let Some(t) = template("spotbugs-cmd", &args.spotbugs_cmd)? {
        external.spotbugs = t;
    }
    external.build = template("build-cmd", &args.build_cmd)?;
    config.external = external;
    config.validate()?;
    Ok(config)
}

fn report_mine(summary: &MineSummary) -> u8 {
    for r in &summary.repos {
        match &r.error {
            None => println!(
                "{}: {} pairs, {} with Java changes, {} classified warnings",
                r.repo, r.pairs, r.java_pairs, r.records
            ),
            Some(e) => println!("{}: FAILED: {e}", r.repo),
        }
    }
    println!("manifest: {}", summary.manifest.display());
    summary.exit_code() as u8
}

fn load_universe(tool: Tool, path: Option<&Path>) -> Result<Option<RuleUniverse>> {
    match path {
        Some(p) if p.extension().is_some_and(|e| e == "jar") => {
            Ok(Some(RuleUniverse::from_spotbugs_jar(p)?))
        }
        Some(p) => Ok(Some(RuleUniverse::load_manifest(tool, p)?)),
        None => Ok(RuleUniverse::bundled(tool)),
    }
}

fn render_stats(
    records: &[LabeledRecord],
    kind: StatsKind,
    format: OutFormat,
    tool: Tool,
    universe: Option<&Path>,
) -> Result<String> {
    if format == OutFormat::Svg && !matches!(kind, StatsKind::Category) {
        bail!("svg output is only available for --kind category");
    }
    Ok(match kind {
        StatsKind::Category => {
            let universe = load_universe(tool, universe)?;
            let rows = stats::category_distribution(records, tool, universe.as_ref());
            match format {
                OutFormat::Table => stats::category_table(&rows),
                OutFormat::Csv => stats::category_csv(&rows),
                OutFormat::Svg => {
                    stats::category_svg(&format!("{tool} warnings by category"), &rows)
                }
            }
        }
        StatsKind::Rules => {
            let universe = load_universe(tool, universe)?
                .with_context(|| format!("no bundled rule universe for {tool}; pass --universe"))?;
            let coverage = stats::rule_coverage_classes(records, &universe);
            match format {
                OutFormat::Csv => stats::coverage_csv(&coverage),
                _ => stats::coverage_table(&coverage),
            }
        }
        StatsKind::Projects => {
            let p = stats::project_stats(records);
            match format {
                OutFormat::Csv => stats::project_csv(&p),
                _ => stats::project_table(&p),
            }
        }
    })
}

fn sample(
    records: &[LabeledRecord],
    confidence: f64,
    margin: f64,
    p_hat: f64,
    z: Option<f64>,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let z = match z {
        Some(z) => z,
        None => stats::z_for_confidence(confidence)?,
    };
    let spec = stats::SampleSpec {
        population: records.len() as u64,
        z,
        p_hat,
        epsilon: margin,
    };
    let n = stats::cochran_sample_size(&spec)?;
    println!("population:  {}", spec.population);
    println!("z:           {z:.4}");
    println!("n0:          {:.4}", spec.n0());
    println!("sample size: {n}");
    let rounded = stats::table_z(z);
    if rounded != z {
        let alt = stats::cochran_sample_size(&stats::SampleSpec { z: rounded, ..spec })?;
        println!("sample size with z = {rounded:.2} (two-decimal table value): {alt}");
    }
    if let Some(path) = out {
        let drawn = stats::draw_validation_sample(records, n as usize, seed)?;
        write_dataset(&drawn, path, DatasetFormat::Jsonl)
            .with_context(|| format!("writing {}", path.display()))?;
        println!(
            "sample:      {} ({} records, seed {seed})",
            path.display(),
            drawn.len()
        );
    }
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
