//! `layerpeel simulate | reconstruct | oracle`.
//!
//! Exit codes: 0 success, 1 oracle tolerance exceeded, 2 invalid input or
//! configuration, 3 I/O or file format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layerpeel::config::RunConfig;
use layerpeel::ndmap::NdMatrix;
use layerpeel::phantom::PhantomSpec;
use layerpeel::{pipeline, Error};

#[derive(Parser)]
#[command(name = "layerpeel", version, about = "Layer-peeling reconstruction of layered conductivities from partial-boundary data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate ND data for a phantom spec on a refined mesh.
    Simulate {
        /// Phantom spec (JSON); defaults to `paths.phantom`.
        #[arg(long)]
        phantom: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct the layered coefficient from an ND data file.
    Reconstruct {
        /// ND data file; defaults to `paths.data`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Ground-truth layer directory written by `simulate`; enables metrics.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the discrete disk spectrum with its closed form.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set shape.bite_radii=[0.5]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    h_recon: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    noise_eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `paths.output`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to every available core.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let text = self.config.as_ref().map(std::fs::read_to_string).transpose()?;
        let mut overrides = Vec::new();
        for raw in &self.overrides {
            let (k, v) = raw
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("override `{raw}` is not KEY=VALUE")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        let flags = [
            ("h_recon", self.h_recon.map(|v| v.to_string())),
            ("m", self.m.map(|v| v.to_string())),
            ("tau", self.tau.map(|v| v.to_string())),
            ("noise_eps", self.noise_eps.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
        ];
        overrides.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        let mut config = RunConfig::load(text.as_deref(), &overrides)?;
        if let Some(out) = &self.out {
            config.paths.output = Some(out.display().to_string());
        }
        if let Some(n) = config.threads {
            // only fails if a pool already exists, which cannot happen here
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(config)
    }
}

fn output_dir(config: &RunConfig) -> PathBuf {
    PathBuf::from(config.paths.output.as_deref().unwrap_or("out"))
}

fn required(flag: Option<PathBuf>, fallback: &Option<String>, what: &str) -> Result<PathBuf, Error> {
    flag.or_else(|| fallback.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::InvalidArgument(format!("no {what} given (flag or paths entry)")))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Parse(_) | Error::BasisMismatch { .. } => 3,
        _ => 2,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { phantom, common } => {
            let config = common.load()?;
            let path = required(phantom, &config.paths.phantom, "phantom spec")?;
            let spec = PhantomSpec::from_json(&read(&path)?)?;
            let out = output_dir(&config);
            let sim = pipeline::simulate(&config, &spec, &out)?;
            println!(
                "simulated {} layer(s), m = {}, |Λ| = {:.6e} -> {}",
                sim.truth.n_layers(),
                sim.data.m(),
                sim.data.norm(),
                out.display()
            );
            Ok(0)
        }
        Command::Reconstruct { data, truth, common } => {
            let config = common.load()?;
            let path = required(data, &config.paths.data, "data file")?;
            let data = NdMatrix::from_text(&read(&path)?)?;
            let truth = truth.or_else(|| config.paths.truth.as_ref().map(PathBuf::from));
            let out = output_dir(&config);
            let r = pipeline::reconstruct(&config, &data, &out, truth.as_deref())?;
            println!("{} layer(s), termination {} -> {}", r.layer_history.len(), r.termination.as_str(), out.display());
            for (j, rec) in r.layer_history.iter().enumerate() {
                println!("  layer {}: {} cells, values {:?}", j + 1, rec.region.len(), rec.values);
            }
            if let Some(note) = &r.note {
                println!("  note: {note}");
            }
            Ok(0)
        }
        Command::Oracle { common } => {
            let config = common.load()?;
            let report = pipeline::oracle(&config)?;
            print!("{}", report.table());
            let ok = report.max_rel_error <= config.oracle.tolerance;
            println!("tolerance {:.3e}: {}", config.oracle.tolerance, if ok { "pass" } else { "FAIL" });
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
