use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use msmkl::dataio::{load_dataset, read_descriptor_blocks, write_descriptor_blocks, write_tensor};
use msmkl::pipeline::report::{render_files, run_experiment, write_files};
use msmkl::{gram, normalize_gram, Error, ErrorClass, EvalMode, GramMatrix, RunConfig};

mod synth;

#[derive(Parser)]
#[command(
    name = "msmkl",
    version,
    about = "Multi-scale pyramid pooling with multiple kernel learning"
)]
struct Cli {
    /// Caps the number of worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// INI run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract multi-scale descriptors for every image of a manifest.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// Also write one `descriptors_<scale>.msft` per scale here.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Write one Gram matrix per scale as `gram_<scale>.msft`.
    Gram {
        #[command(flatten)]
        common: Common,
        #[arg(
            long,
            value_name = "PATH",
            conflicts_with = "descriptors",
            required_unless_present = "descriptors"
        )]
        manifest: Option<PathBuf>,
        /// Rank-2 descriptor tensors, as written by `extract --out`.
        #[arg(long, value_name = "FILE", num_args = 1..)]
        descriptors: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run the repeated-split experiment and write accuracy tables,
    /// confusion matrices and learned kernel weights.
    Exp {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Score on the training samples instead of held-out ones.
        #[arg(long)]
        diagnose: bool,
    },
    /// Generate a small synthetic texture corpus with a manifest.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(common: &Common) -> msmkl::Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::from_file(path),
        None => Ok(RunConfig::default()),
    }
}

fn cmd_extract(common: &Common, manifest: &Path, out: Option<&Path>) -> msmkl::Result<()> {
    let cfg = load_config(common)?;
    let (ds, stats) = load_dataset(manifest, &cfg.load)?;
    for (s, &scale) in ds.scales().iter().enumerate() {
        let len = ds.block(s).first().map_or(0, Vec::len);
        println!("scale {scale}: {} samples, descriptor length {len}", ds.len());
    }
    println!(
        "{} classes, {} extracted, {} from cache",
        ds.classes().len(),
        stats.extracted,
        stats.cache_hits
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::invalid(format!("cannot create {}: {e}", dir.display())))?;
        for path in write_descriptor_blocks(dir, &ds)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_gram(common: &Common, manifest: Option<&Path>, descriptors: &[PathBuf], out: &Path) -> msmkl::Result<()> {
    let cfg = load_config(common)?;
    let blocks: Vec<(String, Vec<Vec<f32>>)> = match manifest {
        Some(m) => {
            let (ds, _) = load_dataset(m, &cfg.load)?;
            ds.scales()
                .iter()
                .enumerate()
                .map(|(s, scale)| (scale.to_string(), ds.block(s).to_vec()))
                .collect()
        }
        None => read_descriptor_blocks(descriptors)?
            .into_iter()
            .map(|(stem, rows)| (stem.trim_start_matches("descriptors_").to_string(), rows))
            .collect(),
    };
    let n = blocks.first().map_or(0, |(_, rows)| rows.len());
    if n == 0 {
        return Err(Error::invalid("empty descriptor set"));
    }
    if let Some((name, rows)) = blocks.iter().find(|(_, rows)| rows.len() != n) {
        return Err(Error::invalid(format!(
            "{name} has {} samples, expected {n}",
            rows.len()
        )));
    }
    let grams = blocks
        .iter()
        .map(|(name, rows)| {
            let g = gram(rows, &cfg.train.kernel)?;
            let g = if cfg.train.normalize { normalize_gram(&g)? } else { g };
            Ok((name, g))
        })
        .collect::<msmkl::Result<Vec<(&String, GramMatrix)>>>()?;
    std::fs::create_dir_all(out).map_err(|e| Error::invalid(format!("cannot create {}: {e}", out.display())))?;
    for (name, g) in grams {
        let path = out.join(format!("gram_{name}.msft"));
        let values: Vec<f32> = g.as_slice().iter().map(|&v| v as f32).collect();
        write_tensor(&path, &[n as u32, n as u32], &values)?;
        let diag = g.diagonal();
        let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{}: order {n}, diagonal {lo:.6} to {hi:.6}", path.display());
    }
    Ok(())
}

fn cmd_exp(common: &Common, manifest: &Path, out: &Path, diagnose: bool) -> msmkl::Result<()> {
    let cfg = load_config(common)?;
    let (ds, _) = load_dataset(manifest, &cfg.load)?;
    let mode = if diagnose {
        EvalMode::TrainingSet
    } else {
        EvalMode::Holdout
    };
    let reports = run_experiment(&ds, &cfg.train, &cfg.experiment, mode)?;
    let files = render_files(&ds, &cfg.experiment, &reports);
    print!("{}", files[0].1);
    let written = write_files(out, &files)?;
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Convergence => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("thread pool is configured once");
    }
    let result = match &cli.command {
        Command::Extract { common, manifest, out } => cmd_extract(common, manifest, out.as_deref()),
        Command::Gram {
            common,
            manifest,
            descriptors,
            out,
        } => cmd_gram(common, manifest.as_deref(), descriptors, out),
        Command::Exp {
            common,
            manifest,
            out,
            diagnose,
        } => cmd_exp(common, manifest, out, *diagnose),
        Command::Synth { out, per_class, seed } => synth::write_corpus(out, *per_class, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
