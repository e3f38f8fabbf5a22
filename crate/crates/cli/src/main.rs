use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use c4chem::bootstrap::sweep_csv;
use c4chem::c4::{fault_audit, Block, FaultSet, LogicalSetting};
use c4chem::eigen::{ground_state, PrepAngles};
use c4chem::pipeline::{
    compare_stores, estimate_store, load_hamiltonian, read_store, resolve_angles, run_pipeline, solve, sweep_store,
    to_json, write_file, ExperimentConfig, NoiseConfig, Provenance, Variant, VERSION,
};
use c4chem::Error;

#[derive(Parser)]
#[command(
    name = "c4chem",
    version,
    about = "Encoded two-qubit chemistry experiments with shadow estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise preset name or `none`.
    #[arg(long)]
    noise: Option<String>,
    /// unencoded, encoded or both.
    #[arg(long)]
    variant: Option<String>,
    /// Shots per setting (total shots in random-per-shot mode).
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ground state and preparation angles.
    Solve(Overrides),
    /// Simulate, store shots, estimate and bootstrap.
    Run(Overrides),
    /// Re-estimate the energy from a snapshot store.
    Estimate {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        store: PathBuf,
    },
    /// Bootstrap series over store prefixes, as CSV.
    Sweep {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        store: PathBuf,
    },
    /// Exhaustive single-fault audit of one circuit section, as CSV.
    Audit {
        #[arg(long, default_value = "prep")]
        block: String,
        #[arg(long, default_value = "ZZ")]
        setting: String,
        /// Also insert two-qubit Paulis after two-qubit gates.
        #[arg(long)]
        two_qubit: bool,
        /// Take angles from this configuration instead of the reference set.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired bootstrap comparison of an encoded and an unencoded store.
    Compare {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        encoded: PathBuf,
        #[arg(long)]
        unencoded: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8) -> impl FnOnce(Error) -> Failure {
    move |e| Failure {
        code,
        message: e.to_string(),
    }
}

const CONFIG: u8 = 2;
const SIMULATION: u8 = 3;
const ESTIMATION: u8 = 4;
const OUTPUT: u8 = 1;

fn load(o: &Overrides) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&o.config).map_err(fail(CONFIG))?;
    if let Some(s) = o.seed {
        cfg.experiment.seed = s;
    }
    if let Some(d) = &o.out {
        cfg.output.dir = d.clone();
    }
    if let Some(n) = &o.noise {
        cfg.noise = NoiseConfig {
            preset: (n != "none").then(|| n.clone()),
            ..NoiseConfig::default()
        };
    }
    if let Some(v) = &o.variant {
        cfg.experiment.variant = v.parse().map_err(fail(CONFIG))?;
    }
    if let Some(s) = o.shots {
        cfg.experiment.shots = s;
    }
    cfg.validate().map_err(fail(CONFIG))?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<(), Failure> {
    match out {
        Some(dir) => write_file(&dir.join(name), text).map_err(fail(OUTPUT)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn single_variant(cfg: &ExperimentConfig) -> Result<Variant, Failure> {
    match cfg.experiment.variant {
        Variant::Both => Err(Failure {
            code: CONFIG,
            message: "pick a single --variant for a store".into(),
        }),
        v => Ok(v),
    }
}

fn provenance(cfg: &ExperimentConfig) -> Result<Provenance, Failure> {
    Ok(Provenance {
        config_hash: cfg.hash().map_err(fail(CONFIG))?,
        seed: cfg.experiment.seed,
        version: VERSION.to_string(),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve(o) => {
            let cfg = load(&o)?;
            let h = load_hamiltonian(&cfg).map_err(fail(CONFIG))?;
            let report = solve(&h).map_err(fail(SIMULATION))?;
            emit(o.out.as_deref(), "solve.json", &to_json(&report).map_err(fail(OUTPUT))?)
        }
        Command::Run(o) => {
            let cfg = load(&o)?;
            let out = run_pipeline(&cfg).map_err(|e| Failure {
                code: e.exit_code() as u8,
                message: e.to_string(),
            })?;
            for f in &out.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Estimate { o, store } => {
            let cfg = load(&o)?;
            let v = single_variant(&cfg)?;
            let h = load_hamiltonian(&cfg).map_err(fail(CONFIG))?;
            let records = read_store(&store).map_err(fail(CONFIG))?;
            let exact = ground_state(&h).map_err(fail(ESTIMATION))?.energy;
            let (rec, _) =
                estimate_store(&cfg, v, &records, &h, exact, &provenance(&cfg)?).map_err(fail(ESTIMATION))?;
            let name = format!("estimate_{}.json", v.as_str());
            emit(o.out.as_deref(), &name, &to_json(&rec).map_err(fail(OUTPUT))?)
        }
        Command::Sweep { o, store } => {
            let cfg = load(&o)?;
            let v = single_variant(&cfg)?;
            let h = load_hamiltonian(&cfg).map_err(fail(CONFIG))?;
            let records = read_store(&store).map_err(fail(CONFIG))?;
            let pts = sweep_store(&cfg, v, &records, &h).map_err(fail(ESTIMATION))?;
            emit(o.out.as_deref(), &format!("sweep_{}.csv", v.as_str()), &sweep_csv(&pts))
        }
        Command::Audit {
            block,
            setting,
            two_qubit,
            config,
            out,
        } => {
            let block: Block = block.parse().map_err(fail(CONFIG))?;
            let setting: LogicalSetting = setting.parse().map_err(fail(CONFIG))?;
            let angles = match config {
                Some(p) => {
                    let cfg = ExperimentConfig::load(p).map_err(fail(CONFIG))?;
                    let h = load_hamiltonian(&cfg).map_err(fail(CONFIG))?;
                    resolve_angles(&cfg, &h).map_err(fail(SIMULATION))?
                }
                None => PrepAngles::REFERENCE,
            };
            let report = fault_audit(block, setting, &angles, FaultSet { two_qubit }).map_err(fail(SIMULATION))?;
            eprintln!(
                "detected {} benign {} undetected {}",
                report.detected, report.benign, report.undetected
            );
            let name = format!("audit_{}_{}.csv", block.as_str(), setting.as_str());
            emit(out.as_deref(), &name, &report.to_csv())
        }
        Command::Compare { o, encoded, unencoded } => {
            let cfg = load(&o)?;
            let h = load_hamiltonian(&cfg).map_err(fail(CONFIG))?;
            let enc = read_store(&encoded).map_err(fail(CONFIG))?;
            let unenc = read_store(&unencoded).map_err(fail(CONFIG))?;
            let exact = ground_state(&h).map_err(fail(ESTIMATION))?.energy;
            let cmp = compare_stores(&cfg, &enc, &unenc, &h, exact).map_err(fail(ESTIMATION))?;
            emit(o.out.as_deref(), "compare.json", &to_json(&cmp).map_err(fail(OUTPUT))?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
