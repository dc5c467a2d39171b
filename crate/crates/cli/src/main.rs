use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use skelbridge::config::{sha256_hex, RunConfig};
use skelbridge::datasets::{self, GraphRecord};
use skelbridge::eval::{eval_report, EvalConfig, KernelKind};
use skelbridge::graph::masked_spectrum;
use skelbridge::model::checkpoint;
use skelbridge::pipeline::{self, Guide, RunOutput, TimeWindows, TrainedModel};
use skelbridge::topology::{apply_filter, ho_statistics, BaseFilter, FilterKind, FilterSpec};
use skelbridge::verify::{run_suite, Fault, Suite};
use skelbridge::{Error, Graph};

#[derive(Parser)]
#[command(name = "skelbridge", version, about = "Coarse-to-fine graph generation with spectral diffusion bridges")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "SKELBRIDGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    CommunitySmall,
    Sbm,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Cell,
    Simplex,
    Periphery,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    GaussianEmd,
    GaussianTv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Sde,
    Topology,
    Model,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Store each graph's Laplacian eigenbasis alongside it.
        #[arg(long)]
        with_eigenbasis: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average higher-order structure counts of a dataset.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_p: usize,
        #[arg(long, default_value_t = 8)]
        lmax: usize,
        /// Print the JSON record instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Apply a topological filter to every graph.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long, default_value_t = 8)]
        lmax: usize,
        /// Base filter complemented by `--kind periphery`.
        #[arg(long, default_value = "cell")]
        periphery_of: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train one score network per segment.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate graphs from trained checkpoints.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ckpt_dir: PathBuf,
        #[arg(long)]
        num: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// MMD between generated and reference datasets.
    Eval {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "gaussian-emd")]
        kernel: KernelArg,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and sample once per topological guide.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "cell,periphery,noise")]
        guides: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the default community-small run configuration.
    DefaultConfig,
    /// Run the built-in property checks.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

/// Failures that map to a specific exit status.
#[derive(Debug)]
enum Exit {
    Property(String),
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exit::Property(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Exit>().is_some() {
        return 1;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Divergence { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if threads.is_some_and(|n| n == 0) {
        bail!("--threads must be positive");
    }
    Ok(())
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Gen { kind, count, seed, with_eigenbasis, out } => cmd_gen(kind, count, seed, with_eigenbasis, &out),
        Command::Stats { input, max_p, lmax, json } => cmd_stats(&input, max_p, lmax, json),
        Command::Filter { input, kind, p, lmax, periphery_of, output } => cmd_filter(&input, kind, p, lmax, &periphery_of, &output),
        Command::Train { config, out_dir } => cmd_train(&config, &out_dir),
        Command::Sample { config, ckpt_dir, num, seed, out } => cmd_sample(&config, &ckpt_dir, num, seed, &out),
        Command::Eval { generated, reference, kernel, sigma, out } => cmd_eval(&generated, &reference, kernel, sigma, out.as_deref()),
        Command::Ablate { config, guides, out_dir } => cmd_ablate(&config, &guides, &out_dir),
        Command::DefaultConfig => {
            println!("{}", RunConfig::community_small_default().to_json_pretty());
            Ok(())
        }
        Command::Verify { suite, inject_fault } => cmd_verify(suite, inject_fault.as_deref()),
    }
}

fn load_records(path: &Path) -> anyhow::Result<Vec<GraphRecord>> {
    datasets::load(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_gen(kind: GenKind, count: usize, seed: u64, with_eigenbasis: bool, out: &Path) -> anyhow::Result<()> {
    if count == 0 {
        return Err(Error::InvalidArgument("--count must be positive".into()).into());
    }
    let mut recs = match kind {
        GenKind::CommunitySmall => datasets::gen_community_small(count, seed),
        GenKind::Sbm => datasets::gen_sbm(count, seed),
    };
    if with_eigenbasis {
        for r in &mut recs {
            r.eigenbasis = Some(masked_spectrum(&r.graph)?);
        }
    }
    datasets::save(&recs, out)?;
    println!("wrote {} graphs to {}", recs.len(), out.display());
    Ok(())
}

fn cmd_stats(input: &Path, max_p: usize, lmax: usize, json: bool) -> anyhow::Result<()> {
    let recs = load_records(input)?;
    let graphs: Vec<Graph> = recs.into_iter().map(|r| r.graph).collect();
    let stats = ho_statistics(&graphs, max_p, lmax)?;
    if json {
        println!("{}", serde_json::to_string(&stats)?);
        return Ok(());
    }
    println!("{:<16}{:>12}", "structure", "average");
    for (p, avg) in &stats.simplices {
        println!("{:<16}{:>12.4}", format!("{p}-simplices"), avg);
    }
    println!("{:<16}{:>12.4}", format!("cells(l<={})", stats.l_max), stats.cells);
    println!("graphs: {}", stats.graphs);
    Ok(())
}

fn cmd_filter(input: &Path, kind: KindArg, p: usize, lmax: usize, periphery_of: &str, output: &Path) -> anyhow::Result<()> {
    let base = match periphery_of {
        "cell" => BaseFilter::Cell,
        "simplex" => BaseFilter::Simplex,
        other => return Err(Error::InvalidArgument(format!("unknown base filter '{other}'")).into()),
    };
    let kind = match kind {
        KindArg::Cell => FilterKind::Cell,
        KindArg::Simplex => FilterKind::Simplex,
        KindArg::Periphery => FilterKind::Periphery,
        KindArg::None => FilterKind::None,
    };
    let spec = FilterSpec { kind, p, l_max: lmax, periphery_of: base };
    let recs = load_records(input)?;
    let mut kept = 0usize;
    let mut total = 0usize;
    let mut out = Vec::with_capacity(recs.len());
    for r in recs {
        let f = apply_filter(&r.graph, &spec)?;
        kept += f.kept_edges();
        total += r.graph.num_edges();
        out.push(GraphRecord::new(r.id, f.view()));
    }
    datasets::save(&out, output)?;
    let pct = if total > 0 { 100.0 * kept as f64 / total as f64 } else { 0.0 };
    println!("kept {kept} of {total} edges ({pct:.1}%)");
    Ok(())
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    Ok(RunConfig::load(path)?)
}

fn segment_file(k: usize) -> String {
    format!("segment_{k}.ckpt")
}

fn write_manifest(path: &Path, command: &str, cfg: &RunConfig, seed: u64, files: &[PathBuf]) -> anyhow::Result<()> {
    let mut hashes = BTreeMap::new();
    for f in files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        hashes.insert(name, sha256_hex(&fs::read(f)?));
    }
    let manifest = serde_json::json!({
        "command": command,
        "config_hash": cfg.hash(),
        "seed": seed,
        "files": hashes,
    });
    fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn cmd_train(config: &Path, out_dir: &Path) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let (train, _) = pipeline::build_dataset(&cfg)?;
    let run = pipeline::train_run(&train, &cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for (k, p) in run.model.segments.iter().enumerate() {
        if let Some(p) = p {
            let path = out_dir.join(segment_file(k + 1));
            checkpoint::save(p, &path)?;
            files.push(path);
        }
    }
    let losses = out_dir.join("losses.json");
    fs::write(&losses, serde_json::to_string(&run.curves)? + "\n")?;
    files.push(losses);
    let cfg_copy = out_dir.join("config.json");
    fs::write(&cfg_copy, cfg.to_json_pretty() + "\n")?;
    files.push(cfg_copy);
    write_manifest(&out_dir.join("manifest.json"), "train", &cfg, cfg.seed, &files)?;
    for (k, c) in run.curves.iter().enumerate() {
        if let (Some(a), Some(b)) = (c.first(), c.last()) {
            println!("segment {}: {} steps, loss {a:.4} -> {b:.4}", k + 1, c.len());
        }
    }
    Ok(())
}

fn cmd_sample(config: &Path, ckpt_dir: &Path, num: Option<usize>, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let num = num.unwrap_or(cfg.sample.num);
    let seed = seed.unwrap_or(cfg.seed);
    let (train, _) = pipeline::build_dataset(&cfg)?;
    let windows = TimeWindows::from_splits(cfg.windows.horizon, &cfg.windows.splits)?;
    let prepared = pipeline::prepare_intermediates(&train, &windows, &cfg.filters)?;
    let mut segments = Vec::new();
    for k in 1..=windows.segments() {
        if k > prepared.active_segments() {
            segments.push(None);
            continue;
        }
        let path = ckpt_dir.join(segment_file(k));
        let p = checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
        if p.config() != &cfg.model.net_config(prepared.layout.d) {
            return Err(Error::Config(format!("{} was trained with a different model config", path.display())).into());
        }
        segments.push(Some(p));
    }
    let run = RunOutput { prepared, model: TrainedModel { segments }, curves: Vec::new() };
    let outcome = pipeline::sample_run(&run, &cfg, num, seed)?;
    let recs: Vec<GraphRecord> =
        outcome.graphs.into_iter().enumerate().map(|(i, g)| GraphRecord::new(format!("sample-{i}"), g.compact())).collect();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    datasets::save(&recs, out)?;
    let mut manifest = out.as_os_str().to_owned();
    manifest.push(".manifest.json");
    write_manifest(Path::new(&manifest), "sample", &cfg, seed, &[out.to_path_buf()])?;
    println!("wrote {} graphs to {} ({} failed)", recs.len(), out.display(), outcome.failed);
    Ok(())
}

fn cmd_eval(generated: &Path, reference: &Path, kernel: KernelArg, sigma: f64, out: Option<&Path>) -> anyhow::Result<()> {
    let gen: Vec<Graph> = load_records(generated)?.into_iter().map(|r| r.graph).collect();
    let reference: Vec<Graph> = load_records(reference)?.into_iter().map(|r| r.graph).collect();
    let kernel = match kernel {
        KernelArg::GaussianEmd => KernelKind::GaussianEmd,
        KernelArg::GaussianTv => KernelKind::GaussianTv,
    };
    let cfg = EvalConfig { kernel, sigma, ..EvalConfig::default() };
    let report = eval_report(&gen, &reference, &cfg)?;
    println!("{report}");
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

fn cmd_ablate(config: &Path, guides: &[String], out_dir: &Path) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let guides = guides.iter().map(|g| g.parse::<Guide>()).collect::<skelbridge::Result<Vec<_>>>()?;
    let (train, reference) = pipeline::build_dataset(&cfg)?;
    if reference.is_empty() {
        return Err(Error::Config("the ablation needs dataset.holdout > 0".into()).into());
    }
    let reference: Vec<Graph> = reference.into_iter().map(|r| r.graph).collect();
    let results = pipeline::run_ablation(&guides, &train, &reference, &cfg)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("ablation.json");
    fs::write(&path, serde_json::to_string_pretty(&results)? + "\n")?;
    write_manifest(&out_dir.join("manifest.json"), "ablate", &cfg, cfg.seed, &[path])?;
    println!("{:<10}{:>12}{:>10}{:>10}{:>10}{:>10}{:>8}", "guide", "seg1 tail", "Deg.", "Clus.", "Orbit", "Spec.", "failed");
    for r in &results {
        let seg1 = r.losses.first().map_or(f64::NAN, |c| pipeline::tail_mean(c, 0.1));
        println!(
            "{:<10}{:>12.4}{:>10.4}{:>10.4}{:>10.4}{:>10.4}{:>8}",
            format!("{:?}", r.guide).to_lowercase(),
            seg1,
            r.report.degree,
            r.report.clustering,
            r.report.orbit,
            r.report.spectral,
            r.failed
        );
    }
    Ok(())
}

fn cmd_verify(suite: SuiteArg, fault: Option<&str>) -> anyhow::Result<()> {
    let suite = match suite {
        SuiteArg::Sde => Suite::Sde,
        SuiteArg::Topology => Suite::Topology,
        SuiteArg::Model => Suite::Model,
        SuiteArg::All => Suite::All,
    };
    let fault = fault.map(|f| f.parse::<Fault>()).transpose()?;
    let results = run_suite(suite, fault);
    for r in &results {
        println!("{r}");
    }
    let failing: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failing.is_empty() {
        println!("{} checks passed", results.len());
        Ok(())
    } else {
        Err(Exit::Property(format!("failing checks: {}", failing.join(", "))).into())
    }
}
