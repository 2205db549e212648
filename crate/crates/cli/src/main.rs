use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridcurate::config::{emit_config, parse_config, PointMethod, RunConfig, SeedSetting, TimestepSelector};
use gridcurate::grid::{blocks_per_axis, GridDims};
use gridcurate::ingest::{discover_timesteps, load_dataset, write_dataset_raw};
use gridcurate::metrics::{compare_methods, comparison_csv, cost_estimate, histogram_csv};
use gridcurate::output::write_sample_outputs;
use gridcurate::samplers::run_pipeline_with;
use gridcurate::scaling::{default_worker_counts, knee_json, run_scaling_study_with, scaling_csv};
use gridcurate::synthetic::GeneratorSpec;
use gridcurate::{exec, Error, Result};

const SEED_ENV: &str = "CURATOR_SEED";

#[derive(Parser)]
#[command(name = "gridcurate", version, about = "Entropy-guided subsampling of gridded simulation data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select hypercubes and points, write the sample CSV and JSON sidecar.
    Subsample {
        #[command(flatten)]
        common: Common,
        /// Also write a headerless little-endian f64 copy.
        #[arg(long)]
        binary: bool,
    },
    /// Score several point methods against the full data of the selected cubes.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated methods.
        #[arg(long, default_value = "random,stratified,lhs,uips,maxent")]
        methods: String,
        /// Comma-separated seeds; defaults to three seeds starting at the run seed.
        #[arg(long)]
        seeds: Option<String>,
        /// Fill the sampling_seconds column (makes the CSV run-dependent).
        #[arg(long)]
        timings: bool,
    },
    /// Time the pipeline over powers-of-two worker counts.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Runs per worker count; the minimum is reported.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, hide = true)]
        inject_mismatch: bool,
    },
    /// Write a synthetic dataset and a config that reads it.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Print the effective config and expected output size without sampling.
    Info {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// YAML config file.
    config: PathBuf,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "snapshots")]
    output_dir: PathBuf,
    #[arg(long)]
    num_samples: Option<usize>,
    /// `all` or comma-separated timestep labels.
    #[arg(long)]
    timesteps: Option<String>,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    Error: From<T::Err>,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(Error::from))
        .collect::<Result<Vec<_>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(Error::InvalidArgument(format!("empty {what} list")))
            } else {
                Ok(v)
            }
        })
}

fn parse_u64s(text: &str, what: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} `{s}`")))
        })
        .collect()
}

/// Reads the config and applies flag and environment overrides.
fn load_config(c: &Common) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&c.config).map_err(|e| Error::Io {
        path: c.config.clone(),
        source: e,
    })?;
    let mut config = parse_config(&text)?;
    if let Some(m) = &c.method {
        config.sampling.method = m.parse()?;
    }
    if let Some(s) = c.seed {
        config.seed = Some(SeedSetting::Fixed(s));
    } else if config.seed.is_none() {
        if let Ok(v) = std::env::var(SEED_ENV) {
            config.seed = Some(if v.trim().eq_ignore_ascii_case("unseeded") {
                SeedSetting::Unseeded
            } else {
                SeedSetting::Fixed(v.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("{SEED_ENV} must be an integer, got `{v}`"))
                })?)
            });
        }
    }
    if let Some(w) = c.workers {
        config.workers = Some(w);
    }
    if let Some(n) = c.num_samples {
        config.sampling.num_samples = n;
    }
    if let Some(t) = &c.timesteps {
        config.dataset.timesteps = if t.trim().eq_ignore_ascii_case("all") {
            TimestepSelector::All
        } else {
            TimestepSelector::List(parse_u64s(t, "timestep")?)
        };
    }
    // Fix an unseeded run to one concrete seed so the echoed config replays it.
    if let Some(SeedSetting::Unseeded) = config.seed {
        config.seed = Some(SeedSetting::Fixed(config.resolved_seed()));
    }
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn cmd_subsample(c: &Common, binary: bool) -> Result<()> {
    let config = load_config(c)?;
    let dataset = load_dataset(&config)?;
    let seed = config.resolved_seed();
    let set = run_pipeline_with(&config, &dataset, seed, config.workers())?;
    let paths = write_sample_outputs(&set, &c.output_dir, &config.file_prefix(), &emit_config(&config), binary)?;
    let t = set.provenance.timings;
    let cost = cost_estimate(set.len() as f64, config.train_parameters(), config.train_epochs(), t.total());
    println!("Points emitted: {}", set.len());
    println!("Phase 1 seconds: {:.6}", t.phase1_seconds);
    println!("Phase 2 seconds: {:.6}", t.phase2_seconds);
    println!(
        "Total Cost Proxy: {:.6e} proxy units (sampling {:.6} s + training proxy {:.6e})",
        cost.total, cost.sampling_cost, cost.training_cost_proxy
    );
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_compare(c: &Common, methods: &str, seeds: Option<&str>, timings: bool) -> Result<()> {
    let config = load_config(c)?;
    let methods: Vec<PointMethod> = parse_list(methods, "method")?;
    let seeds = match seeds {
        Some(s) => parse_u64s(s, "seed")?,
        None => {
            let base = config.resolved_seed();
            (0..3).map(|i| base.wrapping_add(i)).collect()
        }
    };
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("empty seed list".into()));
    }
    let dataset = load_dataset(&config)?;
    let cmp = compare_methods(&config, &dataset, &methods, &seeds, config.workers())?;
    create_dir(&c.output_dir)?;
    let csv = c.output_dir.join("compare.csv");
    write_file(&csv, &comparison_csv(&cmp, timings))?;
    println!("wrote {}", csv.display());
    for h in &cmp.histograms {
        let p = c.output_dir.join(format!("hist_{}.csv", h.method));
        write_file(&p, &histogram_csv(h))?;
        println!("wrote {}", p.display());
    }
    let timing_rows: Vec<_> = cmp
        .data_rows()
        .map(|r| serde_json::json!({"method": r.method, "seed": r.seed, "variable": r.variable, "sampling_seconds": r.sampling_seconds}))
        .collect();
    let json = c.output_dir.join("compare.json");
    let body = serde_json::json!({
        "kl_direction": "D(full || sample), nats",
        "config": emit_config(&config),
        "timings": timing_rows,
    });
    write_file(&json, &serde_json::to_string_pretty(&body).expect("serializable"))?;
    println!("wrote {}", json.display());
    Ok(())
}

fn cmd_bench(c: &Common, repeats: usize, inject_mismatch: bool) -> Result<()> {
    let config = load_config(c)?;
    let dataset = load_dataset(&config)?;
    let max = config.workers.unwrap_or_else(exec::available_workers);
    let counts = default_worker_counts(max);
    let seed = config.resolved_seed();
    let result = run_scaling_study_with(&counts, repeats, |w| {
        let mut set = run_pipeline_with(&config, &dataset, seed, w)?;
        if inject_mismatch && w > 1 {
            if let Some(v) = set.records.first_mut().and_then(|r| r.values.first_mut()) {
                *v += 1.0;
            }
        }
        Ok(set)
    })?;
    create_dir(&c.output_dir)?;
    let csv = c.output_dir.join("scaling.csv");
    let json = c.output_dir.join("knee.json");
    write_file(&csv, &scaling_csv(&result))?;
    write_file(&json, &knee_json(&result))?;
    println!("workers  wall_seconds  speedup  efficiency");
    for r in &result.rows {
        println!("{:>7}  {:>12.6}  {:>7.3}  {:>10.3}", r.workers, r.wall_seconds, r.speedup, r.efficiency);
    }
    match result.knee_workers {
        Some(k) => println!("knee at {k} workers"),
        None => println!("no knee"),
    }
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    Ok(())
}

fn cmd_generate(c: &Common) -> Result<()> {
    let config = load_config(c)?;
    let spec = GeneratorSpec::from_config(&config)?;
    let dataset = spec.generate()?;
    let dir = config.dataset.path.clone().unwrap_or_else(|| c.output_dir.clone());
    let files = write_dataset_raw(&dataset, &dir, config.dataset.precision)?;

    let (input, output, cluster) = spec.kind.roles();
    let mut ready = config.clone();
    ready.dataset.path = Some(dir.clone());
    ready.dataset.dtype = gridcurate::config::DataFormat::SstBinary;
    ready.dataset.input_vars = input;
    ready.dataset.output_vars = output;
    ready.dataset.cluster_var = cluster;
    ready.dataset.skip = [1, 1, 1];
    ready.dataset.timesteps = TimestepSelector::All;
    ready.seed = Some(SeedSetting::Fixed(config.resolved_seed()));
    ready.validate()?;
    let yaml = dir.join(format!("{}.yaml", spec.kind.name()));
    write_file(&yaml, &emit_config(&ready))?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", yaml.display());
    Ok(())
}

fn cmd_info(c: &Common) -> Result<()> {
    let config = load_config(c)?;
    let d = &config.dataset;
    let [nx, ny, nz] = d.strided_extents();
    let grid = if d.dims == 2 {
        GridDims::planar(nx, ny, 1)?
    } else {
        GridDims::new(nx, ny, nz, 1)?
    };
    let per_axis = blocks_per_axis(&grid, config.sampling.cube)?;
    let cubes: usize = per_axis.iter().product();
    let per_timestep = config.sampling.num_hypercubes * config.sampling.points_per_cube();

    print!("{}", emit_config(&config));
    println!("---");
    println!("grid: {nx} x {ny} x {nz} ({}D)", d.dims);
    println!(
        "{cubes} hypercubes per timestep ({} x {} x {})",
        per_axis[0], per_axis[1], per_axis[2]
    );
    let timesteps = match (&d.timesteps, d.path.as_ref()) {
        (TimestepSelector::List(l), _) => Some(l.len()),
        (TimestepSelector::All, Some(p)) if p.exists() => discover_timesteps(&config).ok().map(|l| l.len()),
        _ => None,
    };
    match timesteps {
        Some(t) => println!("expected rows: {} ({t} timesteps x {per_timestep})", t * per_timestep),
        None => println!("expected rows: {per_timestep} per timestep"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Subsample { common, binary } => cmd_subsample(common, *binary),
        Command::Compare {
            common,
            methods,
            seeds,
            timings,
        } => cmd_compare(common, methods, seeds.as_deref(), *timings),
        Command::Bench {
            common,
            repeats,
            inject_mismatch,
        } => cmd_bench(common, *repeats, *inject_mismatch),
        Command::Generate { common } => cmd_generate(common),
        Command::Info { common } => cmd_info(common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invariant_violation() { 2 } else { 1 })
        }
    }
}
