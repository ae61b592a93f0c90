use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wsn_alloc::allocators::{allocate, Algorithm, AllocationResult};
use wsn_alloc::bounds::Allocation;
use wsn_alloc::chansim::{simulate, ChannelMode, SimConfig};
use wsn_alloc::experiments::{db_to_watts, fmt_real, load_config, run_sweep, watts_to_db, write_csv, Experiment};
use wsn_alloc::Error;

mod selftest;

#[derive(Parser)]
#[command(name = "wsn-alloc", version, about = "Power and rate allocation for distributed estimation in sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate rates and powers for one model and print the bounds.
    Allocate {
        #[command(flatten)]
        common: Common,
        /// Also write a one-row CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo MSE of an allocation (computed, or given with --rates/--powers).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        /// Comma-separated integer rates; skips the allocator.
        #[arg(long, value_delimiter = ',', requires = "powers")]
        rates: Option<Vec<f64>>,
        /// Comma-separated powers in watts.
        #[arg(long, value_delimiter = ',', requires = "rates")]
        powers: Option<Vec<f64>>,
    },
    /// Run the config's [sweep] section and emit CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; the output does not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Cross-check the library against the reference oracles.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    algorithm: Option<String>,
    /// Overrides the config's total power (dB relative to 1 W).
    #[arg(long = "ptot-db", allow_negative_numbers = true)]
    ptot_db: Option<f64>,
    /// Overrides the config's bit budget.
    #[arg(long)]
    btot: Option<u32>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "channel-mode")]
    channel_mode: Option<String>,
}

enum Failure {
    Validation(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Allocate { common, out } => cmd_allocate(&common, out),
        Command::Simulate { common, sim, rates, powers } => cmd_simulate(&common, &sim, rates, powers),
        Command::Sweep { config, sim, out, threads } => cmd_sweep(config, &sim, out, threads),
        Command::Selftest { seed } => {
            if selftest::run(seed) {
                Ok(())
            } else {
                Err(Failure::Internal("selftest failed".into()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &Common) -> CliResult<Experiment> {
    let mut exp = load_config(&common.config).map_err(|e| match e {
        Error::Io { .. } => Failure::Validation(e.to_string()),
        other => other.into(),
    })?;
    if let Some(name) = &common.algorithm {
        exp.allocator.algorithm = name.parse::<Algorithm>()?;
    }
    let p = common.ptot_db.map(db_to_watts).unwrap_or(exp.model.p_tot());
    let b = common.btot.unwrap_or(exp.model.b_tot());
    exp.model = exp.model.with_budgets(p, b)?;
    Ok(exp)
}

fn sim_config(sim: &SimArgs, defaults: Option<&wsn_alloc::experiments::SweepSpec>) -> CliResult<SimConfig> {
    let base = SimConfig::default();
    let channel_mode = match &sim.channel_mode {
        Some(m) => m.parse::<ChannelMode>()?,
        None => defaults.map_or(base.channel_mode, |d| d.channel_mode),
    };
    Ok(SimConfig {
        trials: sim.trials.or(defaults.map(|d| d.trials)).unwrap_or(base.trials),
        seed: sim.seed.or(defaults.map(|d| d.seed)).unwrap_or(base.seed),
        channel_mode,
    })
}

fn print_result(r: &AllocationResult, p_tot: f64, b_tot: u32) {
    println!("algorithm        {}", r.algorithm);
    println!("budgets          P_tot = {} W ({:.2} dB), B_tot = {b_tot} bits", fmt_real(p_tot), watts_to_db(p_tot));
    println!("sensor  rate  power_W          power_dB");
    for k in 0..r.allocation.sensors() {
        let p = r.allocation.powers[k];
        println!("{:>6}  {:>4}  {:<15}  {:.3}", k + 1, r.allocation.rates[k], fmt_real(p), watts_to_db(p));
    }
    let b = &r.report;
    println!("D_1              {}", fmt_real(b.d1));
    println!("D_2^upb          {}", fmt_real(b.d2_upb));
    println!("D_1^upb          {}", fmt_real(b.d1_upb));
    println!("D_2^uupb         {}", fmt_real(b.d2_uupb));
    println!("D_a              {}", fmt_real(b.d_a));
    println!("D_b              {}", fmt_real(b.d_b));
    println!("d_0              {}", fmt_real(b.d0));
    if let Some(bo) = r.continuous.b_opt {
        println!("B_opt            {bo}");
    }
    if r.continuous.outer_iterations > 0 {
        println!("outer iterations {}{}", r.continuous.outer_iterations, if r.continuous.capped { " (capped)" } else { "" });
    }
}

fn cmd_allocate(common: &Common, out: Option<PathBuf>) -> CliResult<()> {
    let exp = load(common)?;
    let r = allocate(&exp.model, &exp.allocator)?;
    print_result(&r, exp.model.p_tot(), exp.model.b_tot());
    if let Some(path) = out {
        let mut w = File::create(&path)?;
        writeln!(w, "algorithm,rates,powers_db,d1,d2_upb,d1_upb,d2_uupb,d_a,d_b,d0,b_opt")?;
        let join = |v: &[f64], f: &dyn Fn(f64) -> String| v.iter().map(|&x| f(x)).collect::<Vec<_>>().join(";");
        let b = &r.report;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            join(&r.allocation.rates, &|x| format!("{}", x as u64)),
            join(&r.allocation.powers, &|p| fmt_real(watts_to_db(p))),
            fmt_real(b.d1),
            fmt_real(b.d2_upb),
            fmt_real(b.d1_upb),
            fmt_real(b.d2_uupb),
            fmt_real(b.d_a),
            fmt_real(b.d_b),
            fmt_real(b.d0),
            r.continuous.b_opt.map(|x| x.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

fn cmd_simulate(common: &Common, sim: &SimArgs, rates: Option<Vec<f64>>, powers: Option<Vec<f64>>) -> CliResult<()> {
    let exp = load(common)?;
    let cfg = sim_config(sim, exp.sweep.as_ref())?;
    let (alloc, d_a) = match (rates, powers) {
        (Some(r), Some(p)) => {
            let a = Allocation::new(r, p);
            if a.rates.len() != exp.model.sensors() || a.powers.len() != exp.model.sensors() {
                return Err(Failure::Validation(format!("expected {} rates and powers", exp.model.sensors())));
            }
            a.validate(&exp.model)?;
            let d_a = wsn_alloc::bounds::d_a(&exp.model.derive_stats()?, &a)?;
            (a, d_a)
        }
        _ => {
            let r = allocate(&exp.model, &exp.allocator)?;
            print_result(&r, exp.model.p_tot(), exp.model.b_tot());
            (r.allocation, r.report.d_a)
        }
    };
    let rep = simulate(&exp.model, &alloc, &cfg)?;
    println!("trials           {} (seed {}, {})", rep.trials, rep.seed, rep.channel_mode);
    println!("mse              {} ± {}", fmt_real(rep.mse), fmt_real(rep.half_width));
    println!("2·D_a            {}", fmt_real(2.0 * d_a));
    for (k, m) in rep.level_err_moments.iter().enumerate() {
        println!("level error {:>3}  {} ± {}", k + 1, fmt_real(*m), fmt_real(rep.level_err_half_widths[k]));
    }
    Ok(())
}

fn cmd_sweep(config: PathBuf, sim: &SimArgs, out: Option<PathBuf>, threads: Option<usize>) -> CliResult<()> {
    let common = Common { config, algorithm: None, ptot_db: None, btot: None };
    let exp = load(&common)?;
    let mut spec = exp.sweep.clone().ok_or_else(|| Failure::Validation("sweep: section missing from config".into()))?;
    let sc = sim_config(sim, Some(&spec))?;
    spec.trials = sc.trials;
    spec.seed = sc.seed;
    spec.channel_mode = sc.channel_mode;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Internal(e.to_string()))?;
    let rows = pool.install(|| run_sweep(&exp.model, &exp.allocator, &spec))?;
    match out {
        Some(path) => write_csv(&rows, File::create(&path)?)?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} sweep point(s) failed");
    }
    Ok(())
}
