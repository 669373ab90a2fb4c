//! Command-line front end.
//!
//! Every command writes its artifacts into `--out` and finishes with a
//! `manifest.json` listing the inputs, resolved parameters and outputs.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::calib::{cmaes_minimize, fit_period, line_cut, sweep2d, Axis, OptimizerConfig, SweepAxis};
use crate::dynamics::{propagate, spectrum_scan, PropagateOptions, QuantumState};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, load_scenario, resolve_device, resolve_device_name, write_text};
use crate::model::{build_system, DeviceConfig, SystemModel};
use crate::oracle;
use crate::protocol::{run_scenario, EvalOptions, ResetReport, Scenario};
use crate::pulses::PulseSpec;

pub const DEFAULT_DEVICE: &str = "device_table_s1";

#[derive(Debug, Parser)]
#[command(name = "resetlab", version, about = "Tunable-coupler reset and leakage-reduction simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Device file (TOML/JSON) or built-in device name.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Scenario file (JSON) or built-in scenario name.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Integration step in ps.
    #[arg(long = "step-ps", global = true, default_value_t = 2.0)]
    pub step_ps: f64,
    /// Override every mode's truncation.
    #[arg(long, global = true)]
    pub levels: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenenergies of one excitation sector along a coupler scan.
    Spectrum {
        #[arg(long, default_value = "C0")]
        coupler: String,
        #[arg(long, default_value_t = 1)]
        sector: usize,
        /// lo:hi:points in GHz.
        #[arg(long, default_value = "4.0:6.0:401")]
        range: String,
    },
    /// Time trace of one initial product state.
    Evolve {
        /// Pulse schedule JSON; defaults to the scenario's sequence, or idle.
        #[arg(long)]
        pulse: Option<PathBuf>,
        /// Initial levels, e.g. `Q0=1,Q1=2`.
        #[arg(long)]
        init: String,
        /// Defaults to the schedule length.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long = "record-ps", default_value_t = 100.0)]
        record_ps: f64,
    },
    /// Objective map over two scenario parameters.
    Sweep {
        /// step.param:lo:hi:points, e.g. `0.duration:1:20:41`.
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, value_enum, default_value_t = Objective::Mean)]
        objective: Objective,
        /// Extract a line cut, `x=VALUE` or `y=VALUE`, and fit its period.
        #[arg(long)]
        cut: Option<String>,
    },
    /// Full sequence from every initial state of the scenario.
    Protocol,
    /// CMA-ES over scenario parameters.
    Optimize {
        /// step.param:lo:hi, repeatable.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long, value_enum, default_value_t = Objective::Mean)]
        objective: Objective,
        #[arg(long = "max-evals", default_value_t = 2000)]
        max_evals: usize,
        #[arg(long, default_value_t = 0.0)]
        target: f64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long)]
        population: Option<usize>,
    },
    /// Analytic-versus-numeric equivalence suites.
    OracleCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Evolve { .. } => "evolve",
            Command::Sweep { .. } => "sweep",
            Command::Protocol => "protocol",
            Command::Optimize { .. } => "optimize",
            Command::OracleCheck => "oracle-check",
        }
    }
}

/// Scalar extracted from a protocol report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Mean ancilla error over all initial states.
    Mean,
    /// Mean ancilla error over states with the ancilla in |1⟩.
    Ancilla1,
    /// Same for |2⟩.
    Ancilla2,
}

impl Objective {
    pub fn of(self, report: &ResetReport) -> Result<f64> {
        let s = &report.summary;
        let v = match self {
            Objective::Mean => Some(s.mean_ancilla_error),
            Objective::Ancilla1 => s.ancilla_error_1,
            Objective::Ancilla2 => s.ancilla_error_2,
        };
        v.ok_or_else(|| Error::InvalidArgument(format!("scenario has no states for objective {self:?}")))
    }
}

/// Record of one invocation; written after every other artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_paths: Vec<String>,
    pub parameters: Value,
    pub seed: u64,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_text(&path, text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Process exit status for a command result: 0 success, 1 invalid input,
/// 2 runtime or convergence failure.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_validation() => 1,
        Err(_) => 2,
    }
}

/// Sizes the global worker pool from `RESETLAB_THREADS`, if set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RESETLAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("RESETLAB_THREADS=`{v}` is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn step_ns(common: &Common) -> Result<f64> {
    if !(common.step_ps > 0.0) || !common.step_ps.is_finite() {
        return Err(Error::InvalidArgument(format!("--step-ps must be positive, got {}", common.step_ps)));
    }
    Ok(common.step_ps * 1e-3)
}

fn with_levels(system: SystemModel, levels: Option<usize>) -> Result<SystemModel> {
    match levels {
        Some(l) => system.with_levels(l),
        None => Ok(system),
    }
}

fn load_system(common: &Common, default: &str) -> Result<(SystemModel, DeviceConfig, String)> {
    let name = common.config.as_deref().unwrap_or(default);
    let (cfg, origin) = resolve_device_name(name, None)?;
    let sys = build_system(&cfg).map_err(|e| Error::Config {
        path: origin.clone(),
        message: e.to_string(),
    })?;
    Ok((with_levels(sys, common.levels)?, cfg, origin))
}

/// A scenario with its devices resolved.
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub origin: String,
    pub device_origin: String,
    pub system: SystemModel,
    pub spectator: Option<SystemModel>,
}

/// Loads a scenario and its devices; `--config` replaces the scenario's
/// device.
pub fn load_scenario_with_devices(name: &str, config: Option<&str>, levels: Option<usize>) -> Result<LoadedScenario> {
    let (scenario, base, origin) = load_scenario(name)?;
    let (cfg, device_origin) = match config {
        Some(c) => resolve_device_name(c, None)?,
        None => resolve_device(&scenario.device, base.as_deref())?,
    };
    let build = |cfg: &DeviceConfig, origin: &str| -> Result<SystemModel> {
        let sys = build_system(cfg).map_err(|e| Error::Config {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        with_levels(sys, levels)
    };
    let system = build(&cfg, &device_origin)?;
    let spectator = match &scenario.spectator {
        Some(check) => {
            let (c, o) = resolve_device(&check.device, base.as_deref())?;
            Some(build(&c, &o)?)
        }
        None => None,
    };
    Ok(LoadedScenario {
        scenario,
        origin,
        device_origin,
        system,
        spectator,
    })
}

fn require_scenario(common: &Common) -> Result<&str> {
    common
        .scenario
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("this command needs --scenario".into()))
}

/// `lo:hi:points`.
pub fn parse_range(text: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::InvalidArgument(format!("expected lo:hi:points, got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

/// Address of a scalar inside a scenario: step index and parameter name.
/// `start_ns` addresses the step's start time, anything else an entry of
/// its waveform parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRef {
    pub step: usize,
    pub name: String,
}

impl ParamRef {
    pub fn parse(text: &str) -> Result<Self> {
        let (step, name) = text
            .split_once('.')
            .ok_or_else(|| Error::InvalidArgument(format!("expected step.param, got `{text}`")))?;
        let step = step
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad step index in `{text}`")))?;
        Ok(Self {
            step,
            name: name.to_string(),
        })
    }

    pub fn label(&self) -> String {
        format!("{}.{}", self.step, self.name)
    }

    fn slot<'a>(&self, steps: &'a mut Value) -> Result<&'a mut Value> {
        let missing = || Error::InvalidArgument(format!("scenario has no parameter `{}`", self.label()));
        let step = steps.get_mut(self.step).ok_or_else(missing)?;
        let slot = if self.name == "start_ns" {
            step.get_mut("start_ns")
        } else {
            step.get_mut("params").and_then(|p| p.get_mut(&self.name))
        };
        slot.filter(|v| v.is_number()).ok_or_else(missing)
    }

    pub fn get(&self, scenario: &Scenario) -> Result<f64> {
        let mut steps = serde_json::to_value(&scenario.steps)?;
        Ok(self.slot(&mut steps)?.as_f64().unwrap_or(f64::NAN))
    }
}

/// Copy of `scenario` with the given parameters replaced.
pub fn with_params(scenario: &Scenario, refs: &[ParamRef], values: &[f64]) -> Result<Scenario> {
    let mut steps = serde_json::to_value(&scenario.steps)?;
    for (r, &v) in refs.iter().zip(values) {
        *r.slot(&mut steps)? = json!(v);
    }
    let mut s = scenario.clone();
    s.steps = serde_json::from_value(steps)?;
    Ok(s)
}

fn scenario_objective<'a>(
    loaded: &'a LoadedScenario,
    refs: &[ParamRef],
    objective: Objective,
    opts: &EvalOptions,
) -> impl Fn(&[f64]) -> Result<f64> + Sync + 'a {
    let refs = refs.to_vec();
    let opts = opts.clone();
    move |x: &[f64]| {
        let mut s = with_params(&loaded.scenario, &refs, x)?;
        // the spectator check is a separate figure of merit
        s.spectator = None;
        objective.of(&run_scenario(&s, &loaded.system, None, &opts)?)
    }
}

/// Parses `--init Q0=1,Q1=2`.
pub fn parse_init(text: &str) -> Result<Vec<(String, usize)>> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (m, l) = p
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected MODE=LEVEL, got `{p}`")))?;
            let l = l
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad level in `{p}`")))?;
            Ok((m.trim().to_string(), l))
        })
        .collect()
}

pub fn run(cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let common = &cli.common;
    let mut art = Artifacts::new(&common.out);
    let mut configs = Vec::new();
    let parameters = match &cli.command {
        Command::Spectrum { coupler, sector, range } => {
            let (sys, _, origin) = load_system(common, DEFAULT_DEVICE)?;
            configs.push(origin);
            let (lo, hi, n) = parse_range(range)?;
            let curve = spectrum_scan(&sys, coupler, (lo, hi), n, *sector)?;
            let mut csv = String::from("f_c_ghz");
            for l in &curve.labels {
                csv.push_str(&format!(",E_{}", l.label()));
            }
            csv.push('\n');
            for (k, f) in curve.frequencies.iter().enumerate() {
                csv.push_str(&fmt_f64(*f));
                for e in &curve.energies {
                    csv.push(',');
                    csv.push_str(&fmt_f64(e[k]));
                }
                csv.push('\n');
            }
            art.write("spectrum.csv", &csv)?;
            json!({ "coupler": coupler, "sector": sector, "range": [lo, hi, n],
                    "modes": sys.modes().iter().map(|m| m.name.clone()).collect::<Vec<_>>() })
        }
        Command::Evolve {
            pulse,
            init,
            duration,
            record_ps,
        } => {
            let (sys, schedule) = match (&common.scenario, pulse) {
                (_, Some(p)) => {
                    let (sys, _, origin) = load_system(common, DEFAULT_DEVICE)?;
                    configs.push(origin);
                    let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                        path: p.display().to_string(),
                        source,
                    })?;
                    configs.push(p.display().to_string());
                    (sys, PulseSpec::from_json(&text)?)
                }
                (Some(s), None) => {
                    let l = load_scenario_with_devices(s, common.config.as_deref(), common.levels)?;
                    configs.push(l.origin.clone());
                    configs.push(l.device_origin.clone());
                    let seq = l.scenario.sequence()?;
                    (l.system, seq)
                }
                (None, None) => {
                    let (sys, _, origin) = load_system(common, DEFAULT_DEVICE)?;
                    configs.push(origin);
                    (sys, PulseSpec::idle())
                }
            };
            let levels = parse_init(init)?;
            let mut occ = vec![0; sys.modes().len()];
            for (m, l) in &levels {
                occ[sys.mode_index(m)?] = *l;
            }
            let state = QuantumState::basis(&sys, &crate::model::BasisState(occ))?;
            let t = duration.unwrap_or_else(|| schedule.duration());
            let opts = PropagateOptions {
                step_ns: step_ns(common)?,
                record_every_ns: Some(record_ps * 1e-3),
                ..PropagateOptions::default()
            };
            let traj = propagate(&sys, &schedule, &state, t, &sys.dissipators(), &opts)?;
            let keep: Vec<usize> = (0..sys.dim())
                .filter(|&i| traj.populations.iter().any(|p| p[i] > 1e-12))
                .collect();
            let mut csv = String::from("t_ns");
            for &i in &keep {
                csv.push_str(&format!(",p_{}", sys.basis_state(i)?.label()));
            }
            csv.push_str(",norm\n");
            for ((tk, p), nk) in traj.times.iter().zip(&traj.populations).zip(&traj.norms) {
                csv.push_str(&fmt_f64(*tk));
                for &i in &keep {
                    csv.push(',');
                    csv.push_str(&fmt_f64(p[i]));
                }
                csv.push(',');
                csv.push_str(&fmt_f64(*nk));
                csv.push('\n');
            }
            art.write("trajectory.csv", &csv)?;
            json!({ "init": levels, "duration_ns": t, "step_ns": opts.step_ns, "step_check": traj.step_check,
                    "modes": sys.modes().iter().map(|m| m.name.clone()).collect::<Vec<_>>() })
        }
        Command::Sweep { x, y, objective, cut } => {
            let loaded = load_scenario_with_devices(require_scenario(common)?, common.config.as_deref(), common.levels)?;
            configs.push(loaded.origin.clone());
            configs.push(loaded.device_origin.clone());
            let axis = |spec: &str| -> Result<(ParamRef, SweepAxis)> {
                let (name, range) = spec
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidArgument(format!("expected step.param:lo:hi:points, got `{spec}`")))?;
                let r = ParamRef::parse(name)?;
                r.get(&loaded.scenario)?;
                let (lo, hi, n) = parse_range(range)?;
                Ok((r.clone(), SweepAxis::linspace(&r.label(), unit_of(&r.name), lo, hi, n)?))
            };
            let (rx, ax) = axis(x)?;
            let (ry, ay) = axis(y)?;
            let opts = EvalOptions::fast(step_ns(common)?);
            let refs = [rx, ry];
            let f = scenario_objective(&loaded, &refs, *objective, &opts);
            let grid = sweep2d(&f, ax, ay)?;
            let hash = sha256_hex(&serde_json::to_string(&loaded.scenario)?);
            art.write("grid.csv", &grid.to_csv())?;
            let mut sidecar = grid.sidecar(&hash);
            sidecar["objective"] = json!(objective);
            art.write_json("grid.json", &sidecar)?;
            if let Some(c) = cut {
                let (which, value) = c
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("expected x=VALUE or y=VALUE, got `{c}`")))?;
                let held = match which.trim() {
                    "x" => Axis::X,
                    "y" => Axis::Y,
                    other => return Err(Error::InvalidArgument(format!("cut axis `{other}` is not x or y"))),
                };
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad cut value `{value}`")))?;
                let lc = line_cut(&grid, held, value)?;
                let period = fit_period(&lc.coordinates, &lc.errors).ok();
                art.write_json("cut.json", &json!({ "cut": lc, "fitted_period": period }))?;
            }
            json!({ "x": refs[0], "y": refs[1], "objective": objective, "step_ns": opts.propagate.step_ns,
                    "scenario_sha256": hash, "minimum": grid.minimum() })
        }
        Command::Protocol => {
            let loaded = load_scenario_with_devices(require_scenario(common)?, common.config.as_deref(), common.levels)?;
            configs.push(loaded.origin.clone());
            configs.push(loaded.device_origin.clone());
            let mut opts = EvalOptions::default();
            opts.propagate.step_ns = step_ns(common)?;
            let report = run_scenario(&loaded.scenario, &loaded.system, loaded.spectator.as_ref(), &opts)?;
            art.write_json("report.json", &report)?;
            art.write("report.csv", &report.to_csv())?;
            json!({ "scenario": loaded.scenario, "step_ns": opts.propagate.step_ns, "levels": common.levels,
                    "summary": report.summary })
        }
        Command::Optimize {
            params,
            objective,
            max_evals,
            target,
            sigma,
            population,
        } => {
            let loaded = load_scenario_with_devices(require_scenario(common)?, common.config.as_deref(), common.levels)?;
            configs.push(loaded.origin.clone());
            configs.push(loaded.device_origin.clone());
            let mut refs = Vec::new();
            let mut bounds = Vec::new();
            let mut initial = Vec::new();
            for p in params {
                let mut parts = p.splitn(3, ':');
                let (name, lo, hi) = (parts.next(), parts.next(), parts.next());
                let (Some(name), Some(lo), Some(hi)) = (name, lo, hi) else {
                    return Err(Error::InvalidArgument(format!("expected step.param:lo:hi, got `{p}`")));
                };
                let r = ParamRef::parse(name)?;
                let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad bound in `{p}`")));
                bounds.push((num(lo)?, num(hi)?));
                initial.push(r.get(&loaded.scenario)?);
                refs.push(r);
            }
            let mut config = OptimizerConfig::new(initial, bounds);
            config.seed = common.seed;
            config.max_evaluations = *max_evals;
            config.target = *target;
            config.sigma0 = *sigma;
            config.population = *population;
            let opts = EvalOptions::fast(step_ns(common)?);
            let f = scenario_objective(&loaded, &refs, *objective, &opts);
            let initial_value = f(&config.initial)?;
            let result = cmaes_minimize(&f, &config)?;
            art.write("history.jsonl", &result.history_jsonl())?;
            let mut best = with_params(&loaded.scenario, &refs, &result.best_params)?;
            best.name = format!("{}_optimized", best.name);
            art.write_json("best_scenario.json", &best)?;
            let summary = json!({
                "parameters": refs.iter().map(ParamRef::label).collect::<Vec<_>>(),
                "initial": config.initial,
                "initial_value": initial_value,
                "best_params": result.best_params,
                "best_value": result.best_value,
                "evaluations": result.evaluations,
                "stop": result.stop,
            });
            art.write_json("optimize.json", &summary)?;
            json!({ "objective": objective, "bounds": config.bounds, "sigma0": config.sigma0,
                    "population": config.population_size(), "max_evaluations": config.max_evaluations,
                    "target": config.target, "step_ns": opts.propagate.step_ns, "result": summary })
        }
        Command::OracleCheck => {
            let (sys, _, origin) = load_system(common, DEFAULT_DEVICE)?;
            configs.push(origin);
            let reports = oracle::run_all(&sys, common.seed)?;
            art.write_json("oracle.json", &reports)?;
            for r in &reports {
                println!(
                    "{} {:<18} max error {:.3e} (tolerance {:.1e}, {:.2} s) {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.max_error,
                    r.tolerance,
                    r.seconds,
                    r.detail
                );
            }
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
            let params = json!({ "suites": reports.iter().map(|r| r.name.clone()).collect::<Vec<_>>() });
            if !failed.is_empty() {
                write_manifest(&mut art, cli, configs, params, started, started_unix_s)?;
                return Err(Error::Check(format!("oracle suites failed: {}", failed.join(", "))));
            }
            params
        }
    };
    write_manifest(&mut art, cli, configs, parameters, started, started_unix_s)
}

fn write_manifest(
    art: &mut Artifacts,
    cli: &Cli,
    config_paths: Vec<String>,
    parameters: Value,
    started: Instant,
    started_unix_s: u64,
) -> Result<()> {
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_paths,
        parameters,
        seed: cli.common.seed,
        artifacts: art.written.clone(),
        started_unix_s,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    art.write_json("manifest.json", &manifest)
}

fn unit_of(name: &str) -> &'static str {
    match name {
        "duration" | "tau" | "start_ns" | "edge" => "ns",
        _ => "GHz",
    }
}
