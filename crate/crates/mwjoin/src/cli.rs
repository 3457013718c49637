// SPDX-License-Identifier: Apache-2.0

//! Argument parsing and dispatch.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mwjoin_core::machine::{default_config, MachineConfig};
use mwjoin_core::Strategy;
use serde_json::json;

use crate::commands::{self, Axis, CompareGrid, PointRow, RunOptions, SweepOptions};
use crate::error::{CliError, Result};
use crate::io::{write_aggregate, Sink, DEFAULT_ORACLE_LIMIT};
use crate::spec::{ExperimentSpec, PlanOverrides, Shape};

#[derive(Debug, Parser)]
#[command(name = "mwjoin", version, about = "Simulate and model multiway hash joins on a spatial accelerator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write R.csv, S.csv and T.csv for the experiment and print their SHA-256.
    Gen(GenArgs),
    /// Run the functional engine; prints counters as JSON.
    Run(RunArgs),
    /// Evaluate the runtime model at one point.
    Model(ModelArgs),
    /// Evaluate the model along one axis.
    Sweep(SweepArgs),
    /// Best-plan 3-way against cascaded binary joins over (N, d, dram_bw).
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Accepts plain integers and integral scientific notation (`1e8`).
fn parse_count(text: &str) -> Result<u64, String> {
    if let Ok(v) = text.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = text.parse().map_err(|_| format!("{text:?} is not a number"))?;
    if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("{text:?} is not a non-negative integer"))
    }
}

fn parse_bucket(text: &str) -> Result<u32, String> {
    let v = parse_count(text)?;
    match u32::try_from(v) {
        Ok(0) => Err("bucket counts start at 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("{v} exceeds u32")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    #[arg(long, value_enum, default_value = "self-linear")]
    pub shape: Shape,
    /// Tuples per relation; the size of S for the star shape.
    #[arg(long, default_value = "1000", value_parser = parse_count)]
    pub n: u64,
    /// Distinct values per column.
    #[arg(long, default_value = "100", value_parser = parse_count)]
    pub d: u64,
    /// Size of R and T for the star shape.
    #[arg(long, value_parser = parse_count)]
    pub k: Option<u64>,
    #[arg(long, default_value = "42", value_parser = parse_count)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PlanArgs {
    /// Top-level R partitions.
    #[arg(long = "H-bkt", value_parser = parse_bucket)]
    pub coarse_h: Option<u32>,
    /// Top-level T partitions.
    #[arg(long = "G-bkt", value_parser = parse_bucket)]
    pub coarse_g: Option<u32>,
    /// On-chip buckets on B.
    #[arg(long = "h-bkt", value_parser = parse_bucket)]
    pub fine_h: Option<u32>,
    /// On-chip buckets on C.
    #[arg(long = "g-bkt", value_parser = parse_bucket)]
    pub fine_g: Option<u32>,
    /// Cyclic S sub-buckets.
    #[arg(long = "f-bkt", value_parser = parse_bucket)]
    pub fine_f: Option<u32>,
}

impl From<&PlanArgs> for PlanOverrides {
    fn from(p: &PlanArgs) -> Self {
        PlanOverrides {
            coarse_h: p.coarse_h,
            coarse_g: p.coarse_g,
            fine_h: p.fine_h,
            fine_g: p.fine_g,
            fine_f: p.fine_f,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct MachineArgs {
    /// Machine configuration JSON; flags below override its fields.
    #[arg(long)]
    pub machine: Option<PathBuf>,
    #[arg(long)]
    pub units: Option<u32>,
    #[arg(long)]
    pub lanes: Option<u32>,
    #[arg(long, value_parser = parse_count)]
    pub onchip_bytes: Option<u64>,
    /// Bytes per second.
    #[arg(long)]
    pub dram_bw: Option<f64>,
    /// Bytes per second.
    #[arg(long)]
    pub ssd_bw: Option<f64>,
    /// Bytes.
    #[arg(long, value_parser = parse_count)]
    pub dram_capacity: Option<u64>,
    #[arg(long)]
    pub clock_hz: Option<f64>,
    #[arg(long)]
    pub net_latency: Option<u32>,
    #[arg(long)]
    pub pcu_latency: Option<u32>,
    #[arg(long)]
    pub dram_latency_ns: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    pub dram_granule: Option<u64>,
    /// Use the whole scratchpad instead of double buffering.
    #[arg(long)]
    pub single_buffered: bool,
}

impl MachineArgs {
    pub fn resolve(&self) -> Result<MachineConfig> {
        let mut cfg = match &self.machine {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::json(path, e))?
            }
            None => default_config(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(units => units, lanes => lanes, onchip_bytes => onchip_bytes, dram_bw => dram_bw, ssd_bw => ssd_bw,
            dram_capacity => dram_capacity_bytes, clock_hz => clock_hz, net_latency => net_latency_cycles,
            pcu_latency => pcu_latency_cycles, dram_latency_ns => dram_latency_ns, dram_granule => dram_granule_bytes);
        if self.single_buffered {
            cfg.double_buffered = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct Experiment {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub machine: MachineArgs,
}

impl Experiment {
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        Ok(ExperimentSpec {
            shape: self.spec.shape,
            n: self.spec.n,
            d: self.spec.d,
            k: self.spec.k,
            seed: self.spec.seed,
            plan: (&self.plan).into(),
            machine: self.machine.resolve()?,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub experiment: Experiment,
    /// Output directory.
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: Experiment,
    /// Defaults to the shape's 3-way join.
    #[arg(long, value_parser = str::parse::<Strategy>)]
    pub strategy: Option<Strategy>,
    /// Directory with R.csv, S.csv, T.csv to use instead of generated data.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Check the aggregate against the brute-force oracle.
    #[arg(long)]
    pub verify: bool,
    /// Largest total tuple count --verify hands to the oracle.
    #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT, value_parser = parse_count)]
    pub oracle_limit: u64,
    /// Also write the aggregate CSV here when the format is json.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json: counters; csv: the aggregate.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub experiment: Experiment,
    #[arg(long, value_parser = str::parse::<Strategy>)]
    pub strategy: Option<Strategy>,
    /// Include the loop tree in the JSON output.
    #[arg(long)]
    pub tree: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: Experiment,
    #[arg(long, value_parser = str::parse::<Strategy>)]
    pub strategy: Option<Strategy>,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated values; may be empty.
    #[arg(long, value_delimiter = ',', num_args = 0.., required = true)]
    pub values: Vec<String>,
    /// Also run the engine at every point (materializes the relations).
    #[arg(long)]
    pub engine: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub experiment: Experiment,
    /// Values of N; defaults to --n.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub n_values: Vec<u64>,
    /// Values of d; defaults to --d.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub d_values: Vec<u64>,
    /// DRAM bandwidths in bytes/s; defaults to the machine's.
    #[arg(long, value_delimiter = ',')]
    pub bandwidths: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

fn comment(command: &str, extra: serde_json::Value, spec: &ExperimentSpec) -> String {
    let mut doc = json!({ "command": command, "spec": spec });
    if let (Some(doc), serde_json::Value::Object(extra)) = (doc.as_object_mut(), extra) {
        doc.extend(extra);
    }
    format!("mwjoin {command}\nconfig: {doc}")
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let spec = args.experiment.resolve()?;
            for (path, sha) in commands::gen(&spec, &args.out)? {
                println!("{sha}  {}", path.display());
            }
        }
        Command::Run(args) => {
            let spec = args.experiment.resolve()?;
            let opts = RunOptions {
                strategy: args.strategy.unwrap_or(spec.shape.default_strategy()),
                input: args.input.clone(),
                verify: args.verify,
                oracle_limit: args.oracle_limit,
            };
            let (report, agg) = commands::run(&spec, &opts)?;
            let sink = Sink::new(args.out.clone());
            match args.format {
                Format::Json => sink.write_json(&report)?,
                Format::Csv => write_aggregate(&agg, sink.open()?).map_err(|e| CliError::csv(sink.label(), e))?,
            }
            if let Some(path) = &args.aggregate {
                let file = File::create(path).map_err(|e| CliError::io(path, e))?;
                write_aggregate(&agg, BufWriter::new(file)).map_err(|e| CliError::csv(path, e))?;
            }
            if report.verified == Some(false) {
                return Err(CliError::Mismatch);
            }
        }
        Command::Model(args) => {
            let spec = args.experiment.resolve()?;
            let strategy = args.strategy.unwrap_or(spec.shape.default_strategy());
            let report = commands::model(&spec, strategy, None, args.tree)?;
            let sink = Sink::new(args.out.clone());
            match args.format {
                Format::Json => sink.write_json(&report)?,
                Format::Csv => {
                    let header = comment("model", json!({ "strategy": strategy }), &spec);
                    sink.write_table(&header, &[PointRow::from_model(&spec, &report)])?
                }
            }
        }
        Command::Sweep(args) => {
            let spec = args.experiment.resolve()?;
            let opts = SweepOptions {
                strategy: args.strategy.unwrap_or(spec.shape.default_strategy()),
                axis: args.axis,
                values: args.values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()).map(String::from).collect(),
                engine: args.engine,
            };
            let rows = commands::sweep(&spec, &opts)?;
            let sink = Sink::new(args.out.clone());
            match args.format {
                Format::Json => sink.write_json(&rows)?,
                Format::Csv => {
                    let extra = json!({ "strategy": opts.strategy, "axis": opts.axis, "values": opts.values, "engine": opts.engine });
                    sink.write_table(&comment("sweep", extra, &spec), &rows)?
                }
            }
        }
        Command::Compare(args) => {
            let spec = args.experiment.resolve()?;
            let or = |v: &Vec<_>, default| if v.is_empty() { vec![default] } else { v.clone() };
            let grid = CompareGrid {
                ns: or(&args.n_values, spec.n),
                ds: or(&args.d_values, spec.d),
                bandwidths: if args.bandwidths.is_empty() { vec![spec.machine.dram_bw] } else { args.bandwidths.clone() },
            };
            let rows = commands::compare(&spec, &grid)?;
            let sink = Sink::new(args.out.clone());
            match args.format {
                Format::Json => sink.write_json(&rows)?,
                Format::Csv => {
                    let extra = json!({ "N": grid.ns, "d": grid.ds, "dram_bw": grid.bandwidths });
                    sink.write_table(&comment("compare", extra, &spec), &rows)?
                }
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command; maps errors to exit codes.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors; 2 is reserved for infeasible plans.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`| head`) is not a failure.
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
