use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use portmap_core::congruence::{partition, project, DEFAULT_EPS};
use portmap_core::eval::{self, BENCHMARK_SAMPLING, DEFAULT_HEATMAP_BINS};
use portmap_core::evolution::{run_evolution, EvoConfig};
use portmap_core::expgen::{gen_all, gen_basic};
use portmap_core::io;
use portmap_core::measure::SimulatedProcessor;
use portmap_core::synth::{random_ground_truth, random_two_level, GroundTruthShape};
use portmap_core::{oracle_throughput, simulate_bottleneck, InstructionId, MeasurementSet};

/// Port mapping inference from throughput measurements.
#[derive(Parser)]
#[command(name = "portmap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random ground-truth mapping for a synthetic ISA.
    SynthGt(SynthGtArgs),
    /// Experiment sets: singletons + pairs, weighted pairs, or random benchmarks.
    Generate(GenerateArgs),
    /// Simulated measurements against a ground-truth mapping.
    Measure(MeasureArgs),
    /// Congruence filtering.
    Filter(FilterArgs),
    /// Evolutionary mapping inference.
    Evolve(EvolveArgs),
    /// Predicted throughputs under a mapping.
    Predict(PredictArgs),
    /// Prediction error and correlation against measurements.
    Evaluate(EvaluateArgs),
    /// Cross-check bottleneck simulation against the max-flow oracle.
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
struct ThreadArgs {
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "PMEVO_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct SynthGtArgs {
    #[arg(long)]
    insns: usize,
    #[arg(long)]
    ports: usize,
    #[arg(long, default_value_t = 2)]
    max_uops_per_insn: usize,
    #[arg(long, default_value_t = 2)]
    max_mult: u32,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the instruction list.
    #[arg(long)]
    isa_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// ISA file (`{"instructions": [...]}`).
    #[arg(long, required_unless_present = "mapping", conflicts_with = "mapping")]
    isa: Option<PathBuf>,
    /// Take the instruction list from a mapping file instead.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Singleton measurements; adds the weighted-pair family.
    #[arg(long, conflicts_with = "benchmark")]
    measurements: Option<PathBuf>,
    /// Random multisets of `--size` instructions instead of the structured families.
    #[arg(long)]
    benchmark: bool,
    #[arg(long, default_value_t = 5)]
    size: u32,
    #[arg(long, default_value_t = 40_000)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    experiments: PathBuf,
    /// Relative standard deviation of multiplicative noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    classes: PathBuf,
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long)]
    ports: usize,
    #[arg(long, default_value_t = 1000)]
    pop: usize,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    convergence_eps: f64,
    #[arg(long, default_value_t = 10_000)]
    hill_climb_budget: usize,
    /// Congruence classes; the output mapping then covers every member.
    #[arg(long)]
    classes: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    experiments: PathBuf,
    /// Measurement-format file with predicted cycles; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HEATMAP_BINS)]
    bins: usize,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 10_000)]
    instances: usize,
    #[arg(long, default_value_t = 8)]
    ports: usize,
    #[arg(long, default_value_t = 10)]
    max_uops: usize,
    #[arg(long, default_value_t = 10)]
    max_mass: u64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    threads: ThreadArgs,
}

fn seed_or_time(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        eprintln!("seed: {now}");
        now
    })
}

fn with_threads<T: Send>(threads: &ThreadArgs, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    Ok(pool.install(f))
}

fn load_isa(args: &GenerateArgs) -> Result<Vec<InstructionId>> {
    match (&args.isa, &args.mapping) {
        (Some(path), _) => Ok(io::read_isa(path)?),
        (None, Some(path)) => Ok(io::read_mapping(path)?.instructions().cloned().collect()),
        (None, None) => bail!("one of --isa or --mapping is required"),
    }
}

fn synth_gt(args: SynthGtArgs) -> Result<()> {
    let shape = GroundTruthShape {
        num_insns: args.insns,
        num_ports: args.ports,
        max_uops_per_insn: args.max_uops_per_insn,
        max_multiplicity: args.max_mult,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed_or_time(args.seed));
    let gt = random_ground_truth(&shape, &mut rng)?;
    io::write_mapping(&args.out, &gt)?;
    if let Some(path) = &args.isa_out {
        let isa: Vec<InstructionId> = gt.instructions().cloned().collect();
        io::write_isa(path, &isa)?;
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let isa = load_isa(&args)?;
    if args.benchmark {
        let seed = seed_or_time(args.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let es = eval::gen_benchmark(&isa, args.size, args.count, &mut rng)?;
        let meta = io::BenchmarkMeta {
            sampling: BENCHMARK_SAMPLING.to_string(),
            size: args.size,
            count: args.count,
            seed,
        };
        io::write_experiments(&args.out, &es, Some(&meta))?;
        return Ok(());
    }
    let es = match &args.measurements {
        Some(path) => gen_all(
            &isa,
            &io::import_measurements(path)?.singleton_throughputs(),
        )?,
        None => gen_basic(&isa)?,
    };
    io::write_experiments(&args.out, &es, None)?;
    Ok(())
}

fn measure(args: MeasureArgs) -> Result<()> {
    let gt = io::read_mapping(&args.mapping)?;
    let es = io::read_experiments(&args.experiments)?;
    let proc = SimulatedProcessor::new(gt, args.noise, seed_or_time(args.seed))?;
    io::write_measurements(&args.out, &proc.measure(&es)?)?;
    Ok(())
}

fn filter(args: FilterArgs) -> Result<()> {
    if !(0.0..1.0).contains(&args.eps) {
        bail!("--eps must be in [0, 1)");
    }
    let meas = io::import_measurements(&args.measurements)?;
    let isa = meas.instructions();
    let p = partition(&meas, &isa, args.eps);
    for (a, b) in p.missing_evidence() {
        eprintln!("warning: no merge for {a}/{b}: missing measurements");
    }
    eprintln!("{} instructions, {} classes", isa.len(), p.classes().len());
    io::write_measurements(&args.out, &project(&meas, &p))?;
    io::write_partition(&args.classes, &p)?;
    Ok(())
}

fn evolve(args: EvolveArgs) -> Result<()> {
    let meas = io::import_measurements(&args.measurements)?;
    let isa = meas.instructions();
    let cfg = EvoConfig {
        population_size: args.pop,
        max_iterations: args.iters,
        rng_seed: seed_or_time(args.seed),
        convergence_epsilon: args.convergence_eps,
        hill_climb_budget: args.hill_climb_budget,
    };
    let report = with_threads(&args.threads, || {
        run_evolution(&meas, &isa, args.ports, &cfg, &mut |p| {
            eprintln!(
                "iteration {} best_d_avg {:.6} best_volume {}",
                p.iteration, p.best_d_avg, p.best_volume
            );
        })
    })??;
    eprintln!(
        "final d_avg {:.6} volume {} after {} iterations{}",
        report.best.d_avg,
        report.best.volume,
        report.iterations,
        if report.converged { " (converged)" } else { "" }
    );
    let mut mapping = report.best.mapping;
    if let Some(path) = &args.classes {
        mapping = io::read_partition(path)?.expand_mapping(&mapping)?;
    }
    io::write_mapping(&args.out, &mapping)?;
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let m = io::read_mapping(&args.mapping)?;
    let es = io::read_experiments(&args.experiments)?;
    let set = MeasurementSet::new(eval::predict(&m, &es)?)?;
    match &args.out {
        Some(path) => io::write_measurements(path, &set)?,
        None => print!("{}", io::measurements_to_string(&set)),
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let m = io::read_mapping(&args.mapping)?;
    let meas = io::import_measurements(&args.measurements)?;
    let experiments: Vec<_> = meas.iter().map(|x| x.experiment.clone()).collect();
    let measured: Vec<f64> = meas.iter().map(|x| x.cycles).collect();
    let predicted: Vec<f64> = eval::predict(&m, &experiments)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();

    let mape = eval::mape(&predicted, &measured)?;
    let corr = |r: portmap_core::Result<f64>| {
        r.map(|v| format!("{v:.6}"))
            .unwrap_or_else(|_| "nan".into())
    };
    let pcc = corr(eval::pearson(&predicted, &measured));
    let scc = corr(eval::spearman(&predicted, &measured));
    let summary = format!("MAPE={:.4}% PCC={pcc} SCC={scc}", 100.0 * mape);

    let mut report = String::from("experiment_index,measured,predicted,abs_pct_err\n");
    for (k, (&t, &p)) in measured.iter().zip(&predicted).enumerate() {
        writeln!(report, "{k},{t},{p},{}", 100.0 * (p - t).abs() / t).expect("string write");
    }
    writeln!(report, "# {summary}").expect("string write");
    fs::write(&args.report, report)
        .with_context(|| format!("writing {}", args.report.display()))?;

    if let Some(path) = &args.heatmap {
        let grid = eval::heatmap_bins(&predicted, &measured, args.bins)?;
        let mut out = String::from("row,col,count\n");
        for (r, row) in grid.iter().enumerate() {
            for (c, n) in row.iter().enumerate() {
                writeln!(out, "{r},{c},{n}").expect("string write");
            }
        }
        fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{summary}");
    Ok(())
}

fn oracle_check(args: OracleCheckArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_or_time(args.seed));
    if !(1..=16).contains(&args.ports) || args.max_uops == 0 || args.max_mass == 0 {
        bail!("--ports must be in 1..=16; --max-uops and --max-mass must be positive");
    }
    let instances: Vec<_> = (0..args.instances)
        .map(|_| random_two_level(args.ports, args.max_uops, args.max_mass, &mut rng))
        .collect();
    let deviations = with_threads(&args.threads, || {
        instances
            .par_iter()
            .map(|(m2, e2)| {
                let fast = simulate_bottleneck(m2, e2)?.throughput;
                let reference = oracle_throughput(m2, e2)?;
                Ok((fast - reference).abs())
            })
            .collect::<portmap_core::Result<Vec<f64>>>()
    })??;
    let max = deviations.iter().copied().fold(0.0, f64::max);
    println!(
        "instances={} ports={} max_deviation={max:e}",
        args.instances, args.ports
    );
    if max > args.tolerance {
        bail!("max deviation {max:e} exceeds {:e}", args.tolerance);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let (stage, result) = match cli.command {
        Command::SynthGt(a) => ("synth-gt", synth_gt(a)),
        Command::Generate(a) => ("generate", generate(a)),
        Command::Measure(a) => ("measure", measure(a)),
        Command::Filter(a) => ("filter", filter(a)),
        Command::Evolve(a) => ("evolve", evolve(a)),
        Command::Predict(a) => ("predict", predict(a)),
        Command::Evaluate(a) => ("evaluate", evaluate(a)),
        Command::OracleCheck(a) => ("oracle-check", oracle_check(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {stage}: {e:#}");
            ExitCode::from(1)
        }
    }
}
