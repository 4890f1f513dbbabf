use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use bbr_core::bogolyubov::bogolyubov_subspace;
use bbr_core::generate::{generate, GeneratorSpec};
use bbr_core::io::{read_grid, read_linear, read_set, read_variety, write_count_csv, write_grid, write_linear, write_variety, SetFile};
use bbr_core::phi::{count_table, phi_robust, phi_word, ArithmeticMode, GridSet, Word};
use bbr_core::pipeline::{run_pipeline, run_pipeline_robust, RunConfig};
use bbr_core::setlab::DenseSet;
use bbr_core::verify::verify_variety;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::json;

#[derive(Parser)]
#[command(name = "bbr", version, about = "Bilinear Bogolyubov-Ruzsa experiments over F_p")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Ambient {
    #[arg(long)]
    p: Option<u32>,
    /// Dimension of the y side (or of a linear set).
    #[arg(long)]
    n: Option<usize>,
    /// Dimension of the x side.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Random,
    Product,
    PlantedVariety,
    Graph,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated set file.
    Gen {
        #[command(flatten)]
        ambient: Ambient,
        #[arg(long, value_enum, default_value = "random")]
        kind: Kind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Codimensions, `r1,r2[,r3]`.
        #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
        codims: Vec<usize>,
        #[arg(long, default_value_t = 0.0)]
        deletion: f64,
        /// Linear set file for `--kind graph`.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a word to a grid set: the support, the eps-threshold, or the count table.
    Phi {
        input: PathBuf,
        #[command(flatten)]
        ambient: Ambient,
        #[arg(long, default_value = "hvvhvvvhh")]
        word: Word,
        /// `a/b` or a decimal.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long, default_value = "exact")]
        mode: ArithmeticMode,
        /// Write the count table as CSV instead of a set.
        #[arg(long)]
        counts: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral subspace inside 2A - 2A of a linear set.
    Bogolyubov {
        input: PathBuf,
        #[command(flatten)]
        ambient: Ambient,
        /// `rho^2`, default `alpha / 2`.
        #[arg(long)]
        rho_sq: Option<String>,
        /// Where to write the subspace as a linear set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the construction; exit 1 when the certificate fails.
    Pipeline {
        input: PathBuf,
        #[command(flatten)]
        ambient: Ambient,
        #[arg(long, default_value = "hvvhvvvhh")]
        word: Word,
        #[arg(long)]
        robust: bool,
        #[arg(long, default_value = "exact")]
        mode: ArithmeticMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long)]
        timings: bool,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Variety path; defaults to the report path with extension `variety`.
        #[arg(long)]
        variety: Option<PathBuf>,
    },
    /// Recount `B in phi_w(A)` from scratch; exit 1 on failure.
    Verify {
        variety: PathBuf,
        input: PathBuf,
        #[command(flatten)]
        ambient: Ambient,
        #[arg(long, default_value = "hvvhvvvhh")]
        word: Word,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Accepts `a/b`, integers and decimals, exactly.
fn parse_ratio(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Some((int, frac)) = s.split_once('.') {
        let digits = format!("{int}{frac}");
        let num: BigInt = digits.parse().with_context(|| format!("bad number {s:?}"))?;
        return Ok(BigRational::new(num, BigInt::from(10).pow(frac.len() as u32)));
    }
    s.parse().map_err(|_| anyhow!("bad number {s:?}"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_ambient(given: &Ambient, p: u32, m: Option<usize>, n: usize) -> Result<()> {
    let mismatch = given.p.is_some_and(|q| q != p) || given.n.is_some_and(|k| k != n) || (given.m.is_some() && given.m != m);
    if mismatch {
        bail!("file ambient p={p} n={n} m={m:?} differs from the flags");
    }
    Ok(())
}

fn load_grid(path: &Path, ambient: &Ambient) -> Result<GridSet> {
    let a = read_grid(&read(path)?)?;
    check_ambient(ambient, a.p(), Some(a.x_params().n), a.y_params().n)?;
    Ok(a)
}

fn required<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("--{flag} is required"))
}

fn gen(ambient: &Ambient, kind: Kind, seed: u64, density: f64, codims: &[usize], deletion: f64, base: Option<&Path>) -> Result<String> {
    let spec = match kind {
        Kind::Graph => {
            let path = base.ok_or_else(|| anyhow!("--base is required for graph sets"))?;
            let base: DenseSet = read_linear(&read(path)?)?;
            check_ambient(&Ambient { m: None, ..ambient.clone() }, base.ambient().p, None, base.ambient().n)?;
            GeneratorSpec::Graph { m: required(ambient.m, "m")?, base }
        }
        _ => {
            let (p, m, n) = (required(ambient.p, "p")?, required(ambient.m, "m")?, required(ambient.n, "n")?);
            match kind {
                Kind::Random => GeneratorSpec::Random { p, m, n, density },
                Kind::Product => {
                    let [codim_v, codim_w, ..] = codims[..] else { bail!("--codims needs two values") };
                    GeneratorSpec::Product { p, m, n, codim_v, codim_w }
                }
                _ => {
                    let [r1, r2, r3] = codims[..] else { bail!("--codims needs three values") };
                    GeneratorSpec::PlantedVariety { p, m, n, codims: (r1, r2, r3), deletion }
                }
            }
        }
    };
    Ok(write_grid(&generate(&spec, seed)?))
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Gen { ambient, kind, seed, density, codims, deletion, base, out } => {
            let text = gen(&ambient, kind, seed, density, &codims, deletion, base.as_deref())?;
            emit(out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Phi { input, ambient, word, eps, mode, counts, out } => {
            let a = load_grid(&input, &ambient)?;
            let text = if counts {
                write_count_csv(&count_table(&a, &word, mode)?)
            } else if let Some(eps) = eps {
                write_grid(&phi_robust(&a, &word, &parse_ratio(&eps)?, mode)?)
            } else {
                write_grid(&phi_word(&a, &word))
            };
            emit(out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Bogolyubov { input, ambient, rho_sq, out } => {
            let a = match read_set(&read(&input)?)? {
                SetFile::Linear(a) => a,
                SetFile::Grid(_) => bail!("expected a linear set"),
            };
            check_ambient(&ambient, a.ambient().p, ambient.m, a.ambient().n)?;
            let rho_sq = rho_sq.as_deref().map(parse_ratio).transpose()?;
            let result = bogolyubov_subspace(&a, rho_sq.as_ref())?;
            let v = DenseSet::from_indices(a.ambient(), result.subspace.element_indices());
            if let Some(path) = out.as_deref() {
                emit(Some(path), &write_linear(&v))?;
            }
            let summary = json!({
                "alpha": result.alpha.to_string(),
                "rho_sq": result.rho_sq.to_string(),
                "spectrum_size": result.spectrum.len(),
                "dim": result.subspace.dim(),
                "codim": result.subspace.codim(),
                "min_normalized_count": result.certificate.min_normalized.to_string(),
                "guaranteed": result.certificate.guaranteed.to_string(),
                "points_checked": result.certificate.points_checked,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::Pipeline { input, ambient, word, robust, mode, seed, samples, t_max, timings, out, variety } => {
            let a = load_grid(&input, &ambient)?;
            let defaults = RunConfig::default();
            let config = RunConfig {
                word,

                arithmetic: mode,
                seed,
                samples: samples.unwrap_or(defaults.samples),
                t_max: t_max.unwrap_or(defaults.t_max),
                record_timings: timings,
                ..defaults
            };
            let output = if robust { run_pipeline_robust(&a, &config)? } else { run_pipeline(&a, &config)? };
            let mut report = output.report.to_json();
            report.push('\n');
            emit(out.as_deref(), &report)?;
            let variety_path = variety.or_else(|| out.as_ref().map(|o| o.with_extension("variety")));
            if let Some(path) = variety_path {
                emit(Some(&path), &write_variety(&output.variety))?;
            }
            let c = &output.report.certificate;
            eprintln!(
                "r = {} (r1 {}, r2 {}, r3 {}), certificate {} over {} points",
                output.report.r,
                output.report.r1,
                output.report.r2,
                output.report.r3,
                if c.pass { "PASS" } else { "FAIL" },
                c.checked
            );
            Ok(c.pass)
        }
        Command::Verify { variety, input, ambient, word, eps, out } => {
            let a = load_grid(&input, &ambient)?;
            let b = read_variety(&read(&variety)?)?;
            let eps = eps.as_deref().map(parse_ratio).transpose()?;
            let outcome = verify_variety(&b, &a, &word, eps.as_ref())?;
            let summary = json!({
                "points_in_b": outcome.points_in_b,
                "min_normalized_count": outcome.min_normalized.as_ref().map(|r| r.to_string()),
                "pass": outcome.pass,
                "first_failure": outcome.first_failure.map(|(x, y)| [x, y]),
            });
            emit(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
            if let Some((x, y)) = outcome.first_failure {
                eprintln!("first failing point: x_index {x}, y_index {y}");
            }
            Ok(outcome.pass)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(value) = std::env::var("BBR_THREADS") {
        let threads: usize = value.parse().with_context(|| format!("BBR_THREADS={value:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| execute(cli.command)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
