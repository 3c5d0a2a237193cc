use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ratsemi::config::{parse_run_config_unchecked, Command, PointSpec, PullbackMode, RunConfig};
use ratsemi::{cli, Error, Result};

/// Numerical dynamics of rational semigroups: pullbacks, repelling points,
/// dimension bounds.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Command to run (degrees, compose, pullback, repelling, compare,
    /// shrink-probe, branch-bound, dimension, bound, render); `run` takes it
    /// from the config file.
    command: String,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<PullbackMode>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    l: Option<u32>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Base point as `re,im` or `inf`.
    #[arg(long, value_parser = parse_point)]
    w0: Option<PointSpec>,
}

fn parse_command(s: &str) -> Result<Option<Command>> {
    if s == "run" {
        return Ok(None);
    }
    <Command as clap::ValueEnum>::from_str(s, false)
        .map(Some)
        .map_err(|_| Error::config("command", format!("unknown command `{s}`")))
}

fn parse_point(s: &str) -> std::result::Result<PointSpec, String> {
    if s == "inf" {
        return Ok(PointSpec {
            re: 0.0,
            im: 0.0,
            inf: true,
        });
    }
    let (re, im) = s.split_once(',').ok_or("expected re,im or inf")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok(PointSpec {
        re: num(re)?,
        im: num(im)?,
        inf: false,
    })
}

fn load(args: &Args) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::config("config", e.to_string()))?;
    let mut cfg = parse_run_config_unchecked(&text)?;
    if let Some(c) = parse_command(&args.command)? {
        cfg.command = Some(c);
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if args.$f.is_some() { cfg.$f = args.$f.clone(); } )* };
    }
    set!(n, seed, out, mode, count, depth, l, grid, workers, w0);
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match load(&args).and_then(|cfg| cli::run(&cfg)) {
        Ok(out) => {
            for f in out.files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
