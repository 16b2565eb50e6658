use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fgmc::dual::duality_check;
use fgmc::estimate::EstimatorId;
use fgmc::exact::{summaries_agree, PartitionSummary};
use fgmc::harness::{run_experiment, PartialConfig};
use fgmc::kernel::PRESET_NAMES;
use fgmc::{brute_force_summary, transfer_matrix_summary, Error, ExactCaps, GridModel, PairwiseKernel, PhaseBin};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fgmc", version, about = "Partition functions of grid factor graphs with signed and complex factors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact per-bin partition functions by brute force or transfer matrix.
    Exact(ExactArgs),
    /// Run Monte Carlo chains and write traces, a summary and a plot.
    Estimate(Box<EstimateArgs>),
    /// Compare the primal partition function with its dual.
    DualCheck(DualArgs),
    /// List the built-in kernels.
    Presets,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Built-in kernel: neg13, cplx15i, pm(a), ones, const(c).
    #[arg(long)]
    preset: Option<String>,
    /// Kernel JSON file: {"entries": [[[re,im],[re,im]],[[re,im],[re,im]]]}.
    #[arg(long)]
    kernel_file: Option<PathBuf>,
    /// Square grid side.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
}

impl ModelArgs {
    fn partial(&self) -> PartialConfig {
        PartialConfig {
            preset: self.preset.clone(),
            kernel_file: self.kernel_file.clone(),
            size: self.size,
            rows: self.rows,
            cols: self.cols,
            ..Default::default()
        }
    }

    fn model(&self) -> Result<GridModel, Error> {
        let p = self.partial();
        let kernel = match (&p.preset, &p.kernel_file) {
            (Some(name), None) => PairwiseKernel::preset(name)?,
            (None, Some(path)) => PairwiseKernel::load(path)?,
            _ => return Err(Error::Config("give exactly one of --preset and --kernel-file".into())),
        };
        let (Some(rows), Some(cols)) = (p.rows.or(p.size), p.cols.or(p.size)) else {
            return Err(Error::Config("no grid size: pass --size or --rows/--cols".into()));
        };
        GridModel::new(rows, cols, kernel)
    }
}

#[derive(Args, Clone)]
struct CapArgs {
    /// Largest N enumerated by brute force.
    #[arg(long, default_value_t = ExactCaps::default().brute_max_n)]
    brute_max_n: usize,
    /// Widest grid handled by the transfer matrix.
    #[arg(long, default_value_t = ExactCaps::default().transfer_max_cols)]
    transfer_max_cols: usize,
}

impl CapArgs {
    fn caps(&self) -> ExactCaps {
        ExactCaps {
            brute_max_n: self.brute_max_n,
            transfer_max_cols: self.transfer_max_cols,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Transfer matrix when the kernel allows it, brute force otherwise.
    Auto,
    Brute,
    Transfer,
    Both,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    #[command(flatten)]
    caps: CapArgs,
    /// Write the summary JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the summary JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// uniform_z, ogata_tanemura, count_uniform or count_absgibbs.
    #[arg(long)]
    estimator: Option<String>,
    /// plus, minus, plus_i, minus_i, or all (Z estimators assemble Z_f).
    #[arg(long)]
    bin: Option<String>,
    /// Samples per chain; accepts 1e5.
    #[arg(long = "K", alias = "k")]
    k: Option<String>,
    #[arg(long)]
    chains: Option<u64>,
    /// Falls back to FGMC_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<u32>,
    #[arg(long)]
    thinning: Option<u32>,
    /// single-site or row-blocked.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    max_draws_per_accept: Option<u64>,
    /// exact, estimate:<K> or log2:<value>.
    #[arg(long)]
    count_source: Option<String>,
    /// Most trace points kept per chain.
    #[arg(long)]
    max_points: Option<u64>,
    /// Skip the exact reference values.
    #[arg(long)]
    no_reference: bool,
    /// Write each chain's samples as a binary dump.
    #[arg(long)]
    dump_samples: bool,
    /// Output directory.
    #[arg(long, default_value = "fgmc-out")]
    out: PathBuf,
    /// Also write traces.svg.
    #[arg(long)]
    svg: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    caps: CapArgs,
}

#[derive(Args)]
struct DualArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Largest N for the primal brute force.
    #[arg(long, default_value_t = 20)]
    max_n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResourceCap { .. } => 3,
        Error::UnsupportedKernel
        | Error::Precondition(_)
        | Error::EmptyBinSuspected { .. }
        | Error::Contract(_)
        | Error::UnsupportedEstimator(_)
        | Error::Incomplete(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Exact(a) => cmd_exact(a),
        Command::Estimate(a) => cmd_estimate(*a),
        Command::DualCheck(a) => cmd_dual_check(a),
        Command::Presets => cmd_presets(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::ResourceCap { .. } = e {
                eprintln!("hint: raise the cap with --brute-max-n / --transfer-max-cols, or use a smaller grid");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write_json(path: &PathBuf, value: &impl Serialize) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn print_table(s: &PartitionSummary) {
    let n = s.n() as f64;
    println!("{}x{} grid, N = {}, method {:?}", s.rows, s.cols, s.n(), s.method);
    println!("{:<8} {:>24} {:>14} {:>12}", "bin", "count", "log2|Z_b|", "(1/N)log2");
    for q in [0u8, 2, 1, 3] {
        let l = s.log2_abs_bin(q);
        let (a, b) = if l.is_finite() {
            (format!("{l:.6}"), format!("{:.6}", l / n))
        } else {
            ("-".into(), "-".into())
        };
        println!("{:<8} {:>24} {:>14} {:>12}", PhaseBin::Exact(q).name(), s.count(q).to_string(), a, b);
    }
    if s.zero_count.bits() > 0 {
        println!("{:<8} {:>24}", "zero", s.zero_count.to_string());
    }
    if let Some(off) = &s.off_axis {
        println!("{:<8} {:>24}   sum {}", "general", off.count.to_string(), off.sum);
    }
    let z = s.z_f();
    println!(
        "Z_f = {:.10e} {:+.10e}i   Z_|f| = {:.10e}   |Z_f|/Z_|f| = {:.3e}",
        z.re,
        z.im,
        s.z_abs(),
        s.cancellation_ratio()
    );
}

fn cmd_exact(a: ExactArgs) -> Result<u8, Error> {
    let model = a.model.model()?;
    let caps = a.caps.caps();
    match a.method {
        MethodArg::Both => {
            let brute = brute_force_summary(&model, &caps)?;
            let transfer = transfer_matrix_summary(&model, &caps)?;
            let agree = summaries_agree(&brute, &transfer, 1e-9);
            #[derive(Serialize)]
            struct Both {
                brute: fgmc::exact::SummaryJson,
                transfer: fgmc::exact::SummaryJson,
                agree: bool,
            }
            let out = Both {
                brute: brute.to_json(),
                transfer: transfer.to_json(),
                agree: agree.is_ok(),
            };
            if let Some(p) = &a.out {
                write_json(p, &out)?;
            }
            if a.json {
                println!("{}", serde_json::to_string_pretty(&out)?);
            } else {
                print_table(&brute);
                print_table(&transfer);
            }
            match agree {
                Ok(()) => {
                    if !a.json {
                        println!("brute force and transfer matrix agree");
                    }
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("MISMATCH: {e}");
                    Ok(1)
                }
            }
        }
        m => {
            let s = match m {
                MethodArg::Brute => brute_force_summary(&model, &caps)?,
                MethodArg::Transfer => transfer_matrix_summary(&model, &caps)?,
                _ => fgmc::exact::exact_summary(&model, &caps)?,
            };
            if let Some(p) = &a.out {
                write_json(p, &s.to_json())?;
            }
            if a.json {
                println!("{}", serde_json::to_string_pretty(&s.to_json())?);
            } else {
                print_table(&s);
            }
            Ok(0)
        }
    }
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var("FGMC_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("FGMC_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<u8, Error> {
    let file = match &a.config {
        Some(p) => PartialConfig::from_json_file(p)?,
        None => PartialConfig::default(),
    };
    let flags = PartialConfig {
        estimator: a.estimator.clone(),
        bin: a.bin.clone(),
        k: a.k.clone().map(serde_json::Value::String),
        chains: a.chains,
        seed: a.seed,
        burn_in: a.burn_in,
        thinning: a.thinning,
        scheme: a.scheme.clone(),
        max_draws_per_accept: a.max_draws_per_accept,
        count_source: a.count_source.clone(),
        max_points: a.max_points,
        reference: a.no_reference.then_some(false),
        dump_samples: a.dump_samples.then_some(true),
        ..a.model.partial()
    };
    let cfg = flags.over(&file).resolve(env_seed()?)?;
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = run_experiment(&cfg, workers, &a.caps.caps())?;
    let written = result.write_outputs(&a.out, a.svg)?;
    let summary = result.summary()?;
    println!(
        "{} on {}x{} {}: {} chains x K = {}, seed {}",
        cfg.estimator,
        cfg.rows,
        cfg.cols,
        cfg.kernel.label(),
        cfg.chains,
        cfg.k,
        cfg.seed
    );
    let per_n = cfg.estimator == EstimatorId::UniformZ || cfg.estimator == EstimatorId::OgataTanemura;
    for q in &summary.quantities {
        let label = match &q.bin {
            Some(b) => format!("{} {}", q.quantity, b),
            None => q.quantity.clone(),
        };
        let (lo, hi) = q
            .finals_log2
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let scale = if per_n { result.n as f64 } else { 1.0 };
        let exact = q.exact_log2.map_or("-".to_string(), |e| format!("{:.5}", e / scale));
        println!(
            "  {label:<12} log2{} finals in [{:.5}, {:.5}], exact {exact}",
            if per_n { "/N" } else { "" },
            lo / scale,
            hi / scale
        );
    }
    if let Some(z) = &summary.z_f {
        let v = z.value();
        println!(
            "  Z_f = {:.6e} {:+.6e}i +- {:.2e}{}",
            v.re,
            v.im,
            z.stderr_abs(),
            if z.cancellation { "  (bins cancel: Z_f is poorly determined)" } else { "" }
        );
    }
    for p in written {
        println!("  wrote {}", p.display());
    }
    Ok(0)
}

fn cmd_dual_check(a: DualArgs) -> Result<u8, Error> {
    let model = a.model.model()?;
    let report = duality_check(&model, a.max_n)?;
    if let Some(p) = &a.out {
        write_json(p, &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.zero_equivalence {
        println!("PASS: Z_f and Z_d vanish together");
        Ok(0)
    } else {
        println!("FAIL: exactly one of Z_f and Z_d vanishes");
        Ok(1)
    }
}

fn cmd_presets() -> Result<u8, Error> {
    for name in PRESET_NAMES {
        let example = name.replace("(a)", "(1)").replace("(c)", "(2)");
        let k = PairwiseKernel::preset(&example)?;
        let e = k.entries();
        println!("{name:<10} e.g. {example:<8} [[{}, {}], [{}, {}]]", e[0][0], e[0][1], e[1][0], e[1][1]);
    }
    println!("pm(a) takes real, imaginary or complex a, e.g. pm(-2.5), pm(i), pm(1+2i)");
    Ok(0)
}
