//! Command dispatch: each command computes its module's outputs, writes them
//! into the output directory and finishes with `manifest.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::config::{chain_from_specs, Command, ComparePair, PullbackMode, RunConfig, SourceSpec};
use crate::correspondence::{Chain, DEFAULT_WORD_CAP};
use crate::dimension::{default_scales, lower_bound, JuliaSample, SampleSource};
use crate::error::{Error, Result};
use crate::io;
use crate::measures::{
    binned_tv, branch_shrink_probe, pullback_exact, pullback_sample, repelling_measure,
    AtomicMeasure, RepellingCaps, ShrinkProbeParams, DEFAULT_ATOM_CAP, FALLBACK_GRID,
};
use crate::rational::DEFAULT_DEGREE_CAP;
use crate::sphere::P1Point;

pub const DEFAULT_GRID: usize = 8;
pub const DEFAULT_OUT: &str = "out";

/// Files written by a run, in order, excluding the manifest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutputs {
    pub files: Vec<String>,
}

struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::write(&self.dir, name, bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }
}

fn point_json(p: &P1Point) -> Value {
    serde_json::to_value(p).unwrap_or(Value::Null)
}

fn word_cap(cfg: &RunConfig) -> u64 {
    cfg.caps().words.unwrap_or(DEFAULT_WORD_CAP)
}

fn atom_cap(cfg: &RunConfig) -> usize {
    cfg.caps().atoms.unwrap_or(DEFAULT_ATOM_CAP)
}

fn repelling_caps(cfg: &RunConfig) -> RepellingCaps {
    RepellingCaps {
        word_cap: word_cap(cfg),
        degree_cap: cfg.caps().degree.unwrap_or(DEFAULT_DEGREE_CAP),
        fallback_grid: FALLBACK_GRID,
    }
}

fn grid(cfg: &RunConfig) -> usize {
    cfg.grid.unwrap_or(DEFAULT_GRID)
}

/// Runs the configured command on a pool of `cfg.workers` threads (rayon's
/// default when unset). Outputs do not depend on the worker count.
pub fn run(cfg: &RunConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &RunConfig) -> Result<RunOutputs> {
    let started = Instant::now();
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir)?;
    let mut sink = Sink {
        dir,
        files: Vec::new(),
    };
    let chain = cfg.chain()?;
    let command = cfg.command()?;
    match command {
        Command::Degrees => degrees(&chain, &mut sink)?,
        Command::Compose => compose(cfg, &chain, &mut sink)?,
        Command::Pullback => pullback(cfg, &chain, &mut sink)?,
        Command::Repelling => repelling(cfg, &chain, &mut sink)?,
        Command::Compare => compare(cfg, &chain, &mut sink)?,
        Command::ShrinkProbe => shrink(cfg, &chain, &mut sink)?,
        Command::BranchBound => branch_bound(cfg, &chain, &mut sink)?,
        Command::Dimension => dimension(cfg, &chain, true, &mut sink)?,
        Command::Bound => dimension(cfg, &chain, false, &mut sink)?,
        Command::Render => render(cfg, &chain, &mut sink)?,
    }
    let files = sink.files.clone();
    let manifest = json!({
        "command": command.name(),
        "config": serde_json::to_value(cfg)?,
        "version": env!("CARGO_PKG_VERSION"),
        "workers": rayon::current_num_threads(),
        "wall_time_secs": started.elapsed().as_secs_f64(),
        "outputs": files,
    });
    sink.json("manifest.json", &manifest)?;
    Ok(RunOutputs { files })
}

fn degrees(chain: &Chain, sink: &mut Sink) -> Result<()> {
    sink.json("degrees.json", &serde_json::to_value(chain.degrees())?)
}

fn compose(cfg: &RunConfig, chain: &Chain, sink: &mut Sink) -> Result<()> {
    let other = match &cfg.then {
        Some(specs) => chain_from_specs(specs)?,
        None => chain.clone(),
    };
    let cap = cfg.caps().degree.unwrap_or(DEFAULT_DEGREE_CAP);
    let composed = chain.then_capped(&other, cap)?;
    sink.json("composed.json", &serde_json::to_value(&composed)?)?;
    sink.json("degrees.json", &serde_json::to_value(composed.degrees())?)
}

/// Summary shared by all measure outputs.
fn measure_summary(m: &AtomicMeasure, grid: usize) -> Value {
    json!({
        "mass": m.mass(),
        "atom_count": m.len(),
        "grid": grid,
        "bins": m.cube_sphere_bins(grid),
    })
}

fn pullback_measure(cfg: &RunConfig, chain: &Chain, mode: PullbackMode) -> Result<AtomicMeasure> {
    let n = cfg.require_n()?;
    let w0 = cfg.base_point()?;
    match mode {
        PullbackMode::Exact => pullback_exact(chain, &w0, n, atom_cap(cfg)),
        PullbackMode::Sample => {
            let count = cfg
                .count
                .ok_or_else(|| Error::config("count", "required for sampling"))?;
            pullback_sample(chain, &w0, n, count, cfg.require_seed("for sampling")?)
        }
    }
}

fn pullback(cfg: &RunConfig, chain: &Chain, sink: &mut Sink) -> Result<()> {
    let mode = cfg.mode();
    let m = pullback_measure(cfg, chain, mode)?;
    sink.put("measure.csv", &io::measure_csv(&m)?)?;
    let mut summary = measure_summary(&m, grid(cfg));
    summary["mode"] = json!(mode);
    summary["n"] = json!(cfg.n);
    summary["w0"] = point_json(&cfg.base_point()?);
    sink.json("summary.json", &summary)
}

fn repelling(cfg: &RunConfig, chain: &Chain, sink: &mut Sink) -> Result<()> {
    let n = cfg.require_n()?;
    let r = repelling_measure(chain, n, repelling_caps(cfg))?;
    sink.put("repelling.csv", &io::repelling_csv(&r.points)?)?;
    sink.put("fixed_points.csv", &io::fixed_points_csv(&r.fixed_points)?)?;
    sink.put("measure.csv", &io::measure_csv(&r.measure)?)?;
    sink.put(
        "words.csv",
        &io::words_csv(&chain.enumerate_words(n, word_cap(cfg))?)?,
    )?;
    let mut summary = measure_summary(&r.measure, grid(cfg));
    let bezout = (chain.d1() as u128).pow(n as u32) + (chain.d0() as u128).pow(n as u32);
    summary["n"] = json!(n);
    summary["total_fixed_count"] = json!(r.total_fixed_count);
    summary["repelling_count"] = json!(r.repelling_count);
    summary["bezout_count"] = json!(bezout as u64);
    summary["lower_bound_only"] = json!(r.lower_bound_only);
    sink.json("summary.json", &summary)
}

fn compare(cfg: &RunConfig, chain: &Chain, sink: &mut Sink) -> Result<()> {
    let pair = cfg.pair.unwrap_or(ComparePair::RepellingExact);
    let rep = || -> Result<AtomicMeasure> {
        Ok(repelling_measure(chain, cfg.require_n()?, repelling_caps(cfg))?.measure)
    };
    let (a, b) = match pair {
        ComparePair::RepellingExact => (rep()?, pullback_measure(cfg, chain, PullbackMode::Exact)?),
        ComparePair::SampleExact => (
            pullback_measure(cfg, chain, PullbackMode::Sample)?,
            pullback_measure(cfg, chain, PullbackMode::Exact)?,
        ),
        ComparePair::RepellingSample => {
            (rep()?, pullback_measure(cfg, chain, PullbackMode::Sample)?)
        }
    };
    let g = grid(cfg);
    let tol = 1e-3;
    sink.json(
        "compare.json",
        &json!({
            "pair": pair,
            "n": cfg.n,
            "grid": g,
            "tv": binned_tv(&a, &b, g)?,
            "mass_a": a.mass(),
            "mass_b": b.mass(),
            "near_unit_circle_tol": tol,
            "near_unit_circle_a": a.mass_near_unit_circle(tol),
            "near_unit_circle_b": b.mass_near_unit_circle(tol),
        }),
    )
}

fn shrink(cfg: &RunConfig, chain: &Chain, sink: &mut Sink) -> Result<()> {
    let params = ShrinkProbeParams {
        center: match cfg.center()? {
            Some(c) => c,
            None => cfg.base_point()?,
        },
        radius: cfg.radius.unwrap_or(0.05),
        depth: cfg
            .depth
            .ok_or_else(|| Error::config("depth", "required for shrink-probe"))?,
        samples: cfg.samples.unwrap_or(200),
        seed: cfg.require_seed("for shrink-probe")?,
        epsilon: cfg.epsilon.unwrap_or(0.1),
    };
    let r = branch_shrink_probe(chain, &params)?;
    sink.put("shrink_levels.csv", &io::shrink_csv(&r)?)?;
    let mut v = serde_json::to_value(&r)?;
    v["params"] = serde_json::to_value(params)?;
    v["ratios"] = json!(r
        .per_level
        .windows(2)
        .map(|w| w[1] / w[0])
        .collect::<Vec<_>>());
    sink.json("shrink.json", &v)
}

fn branch_bound(cfg: &RunConfig, chain: &Chain, sink: &mut Sink) -> Result<()> {
    let n = cfg.require_n()?;
    let l = cfg.l.unwrap_or(2);
    let report = chain.branch_count_bound(n as u32, l)?;
    let (center, radius) = match (cfg.center()?, cfg.radius) {
        (Some(c), Some(r)) => (c, r),
        _ => chain.disk_avoiding(l as usize, word_cap(cfg))?,
    };
    let count = chain.regular_branch_count(&center, radius, n, 16, 8, word_cap(cfg))?;
    let mut v = serde_json::to_value(report)?;
    v["center"] = point_json(&center);
    v["radius"] = json!(radius);
    v["regular"] = json!(count.regular);
    v["total"] = json!(count.total);
    v["meets_bound"] = json!(count.regular as f64 >= report.bound);
    sink.json("branch_bound.json", &v)
}

fn julia_sample(cfg: &RunConfig, chain: &Chain) -> Result<JuliaSample> {
    match cfg.source.unwrap_or(SourceSpec::Repelling) {
        SourceSpec::Repelling => {
            let r = repelling_measure(chain, cfg.require_n()?, repelling_caps(cfg))?;
            JuliaSample::from_measure(&r.measure, SampleSource::Repelling)
        }
        SourceSpec::Pullback => {
            let n = cfg.require_n()?;
            let w0 = cfg.base_point()?;
            let m = pullback_exact(chain, &w0, n, atom_cap(cfg))?;
            JuliaSample::from_pullback(chain, &m, &w0, n)
        }
        SourceSpec::CircleAnalytic => JuliaSample::unit_circle(cfg.count.unwrap_or(1000)),
    }
}

fn dimension(cfg: &RunConfig, chain: &Chain, with_box: bool, sink: &mut Sink) -> Result<()> {
    let sample = julia_sample(cfg, chain)?;
    let scales = cfg.scales.clone().unwrap_or_else(default_scales);
    let report = lower_bound(
        chain,
        &sample,
        cfg.k_max.unwrap_or(10),
        with_box.then_some(&scales[..]),
    )?;
    sink.put("lambda.csv", &io::lambda_csv(&report.lambda_table)?)?;
    if with_box {
        sink.put("sample.csv", &io::points_csv(sample.points())?)?;
        sink.json("dimension.json", &serde_json::to_value(&report)?)
    } else {
        sink.json("bound.json", &serde_json::to_value(&report)?)
    }
}

fn render(cfg: &RunConfig, chain: &Chain, sink: &mut Sink) -> Result<()> {
    let m = match &cfg.input {
        Some(path) => read_measure(path)?,
        None => pullback_measure(cfg, chain, cfg.mode())?,
    };
    let window = cfg.window.unwrap_or([-1.5, 1.5, -1.5, 1.5]);
    let res = cfg.resolution.unwrap_or(256);
    let pgm = io::render_pgm(&m, window, res, res);
    let nonzero = io::parse_pgm(&pgm)?.2.iter().filter(|&&p| p > 0).count();
    sink.put("density.pgm", &pgm)?;
    sink.json(
        "render.json",
        &json!({"window": window, "width": res, "height": res, "nonzero_pixels": nonzero, "atom_count": m.len()}),
    )
}

fn read_measure(path: &Path) -> Result<AtomicMeasure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config("input", e.to_string()))?;
    io::parse_measure_csv(&text)
}
