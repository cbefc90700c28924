use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mccs::commands::{self, Overrides};
use mccs::config::{self, KeygenConfig, Solver};
use mccs::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "mccs", version, about = "Multiclass compressed-sensing encryption")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Decoding class.
    #[arg(long, global = true)]
    class: Option<usize>,
    #[arg(long, global = true, value_enum)]
    solver: Option<Solver>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Use 1/sqrt(n) normalized measurements.
    #[arg(long, global = true)]
    scaled: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derive a w-class key file from a master seed.
    Keygen {
        /// Number of classes.
        #[arg(long)]
        w: Option<usize>,
    },
    /// Encode a corpus or synthetic signals with the top-class matrices.
    Encode,
    /// Decode measurements as a given class.
    Decode,
    /// Sweep second-class recovery bounds over eta.
    Bounds,
    /// Two-level KS distinguishing attack.
    Attack,
    /// Estimate the convergence constant of the measurement law.
    Convergence,
    /// KS test of ciphertexts against their limiting normal law.
    Gaussianity,
    /// Monte Carlo RIP constants of the perturbed matrices.
    Ric,
}

fn need_config(c: &Common) -> CliResult<&PathBuf> {
    c.config
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs --config"))
}

fn run(cli: Cli) -> CliResult<()> {
    let c = &cli.common;
    if let Some(t) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let ov = Overrides {
        seed: c.seed,
        trials: c.trials,
        class: c.class,
        solver: c.solver,
        scaled: c.scaled,
        w: match cli.cmd {
            Cmd::Keygen { w } => w,
            _ => None,
        },
    };
    let out = &c.out;
    match cli.cmd {
        Cmd::Keygen { .. } => {
            let mut cfg = match &c.config {
                Some(p) => config::load(p)?,
                None => KeygenConfig { w: 2, master_seed: 0 },
            };
            ov.keygen(&mut cfg);
            let p = commands::cmd_keygen(&cfg, out)?;
            println!("wrote {}", p.display());
        }
        Cmd::Encode => {
            let mut cfg = config::load(need_config(c)?)?;
            ov.encode(&mut cfg);
            let s = commands::cmd_encode(&cfg, out)?;
            println!("encoded {} frames at class {} -> {}", s.frames, s.class, s.measurements.display());
        }
        Cmd::Decode => {
            let mut cfg = config::load(need_config(c)?)?;
            ov.decode(&mut cfg);
            let rows = commands::cmd_decode(&cfg, out)?;
            let failed = rows.iter().filter(|r| !r.converged).count();
            println!("decoded {} frames, {failed} not converged", rows.len());
        }
        Cmd::Bounds => {
            let mut cfg = config::load(need_config(c)?)?;
            ov.bounds(&mut cfg);
            let rows = commands::cmd_bounds(&cfg, out)?;
            for r in rows {
                println!(
                    "eta={:<8} lb={:7.2} dB  ub={:7.2} dB  prop1={}",
                    r.eta,
                    r.lb_arsnr_db,
                    r.ub_arsnr_db,
                    if r.proposition1.is_some() { "yes" } else { "no" }
                );
            }
        }
        Cmd::Attack => {
            let mut cfg = config::load(need_config(c)?)?;
            ov.attack(&mut cfg);
            let r = commands::cmd_attack(&cfg, out)?;
            println!("second-level p = {:.4}: {}", r.second_level_p, r.verdict.as_str());
        }
        Cmd::Convergence => {
            let mut cfg = config::load(need_config(c)?)?;
            ov.convergence(&mut cfg);
            let r = commands::cmd_convergence(&cfg, out)?;
            match r.slope {
                Some(s) => println!("slope = {s:.3}"),
                None => println!("slope unavailable (single n)"),
            }
            for (rho, cr) in r.c_rho {
                println!("C({rho}) = {cr:.4e}");
            }
        }
        Cmd::Gaussianity => {
            let mut cfg = config::load(need_config(c)?)?;
            ov.gaussianity(&mut cfg);
            let k = commands::cmd_gaussianity(&cfg, out)?;
            println!("D = {:.5}, p = {:.4}", k.statistic, k.p_value);
        }
        Cmd::Ric => {
            let mut cfg = config::load(need_config(c)?)?;
            ov.ric(&mut cfg);
            let rows = commands::cmd_ric(&cfg, out)?;
            for r in rows {
                println!("eta={:<8} k={:<3} eps_k={:.4} delta_2k={:.4}", r.eta, r.k, r.eps_k, r.delta_2k);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
