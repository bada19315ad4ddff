//! `sisdelay`: equilibria, Hopf points, normal forms, simulations, `d2`
//! sweeps and prediction checks for the two-delay diffusive SIS model.
//!
//! Exit status: 0 ok, 1 I/O failure, 2 usage or configuration error,
//! 3 model precondition not met, 4 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use sisdelay::analysis::{self, ClassifyOptions, VerifyOptions};
use sisdelay::config::{load_config, RunConfig};
use sisdelay::normalform::{self, ModeScaling};
use sisdelay::simulator::{self, Component};
use sisdelay::{spectral, Error, ErrorCategory, Result};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "sisdelay", version, about = "Hopf bifurcation analysis and simulation of a two-delay diffusive SIS model")]
struct Cli {
    /// TOML file of flat `key = value` settings (model and simulator keys).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one setting, e.g. `--set d2=2.5`. Repeatable; applied after
    /// the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Directory receiving the JSON/CSV outputs and `manifest.json`.
    #[arg(long, global = true, value_name = "DIR", default_value = "sisdelay-out")]
    out_dir: PathBuf,

    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// R0, the constant equilibria and their linear stability.
    Equilibria,
    /// Imaginary-axis crossings per spatial mode and the first Hopf point.
    Hopf(HopfArgs),
    /// Normal form at the first Hopf point: c1(0), mu2, beta2, T2.
    Normalform(NormalformArgs),
    /// Integrate the model and classify the attractor.
    Simulate(SimulateArgs),
    /// First critical delays of modes 0..4 along a logarithmic d2 grid.
    Sweep(SweepArgs),
    /// Simulate just below and above the predicted Hopf point.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct HopfArgs {
    /// Highest mode reported (default: the crossing cutoff n1).
    #[arg(long)]
    modes: Option<usize>,
    /// Critical delays per mode are listed for j = 0..=jmax.
    #[arg(long, default_value_t = spectral::DEFAULT_J_MAX)]
    jmax: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScalingArg {
    UnitConstant,
    Orthonormal,
}

#[derive(Args, Debug)]
struct NormalformArgs {
    /// Amplitude convention of the critical eigenfunction.
    #[arg(long, value_enum, default_value_t = ScalingArg::UnitConstant)]
    scaling: ScalingArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Binary,
    Both,
    None,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ComponentArg {
    S,
    I,
    Y,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// `explicit` or `semi-implicit`.
    #[arg(long)]
    scheme: Option<String>,
    /// Trajectory export format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Export every k-th recorded frame.
    #[arg(long, default_value_t = 1)]
    export_every: usize,
    /// Trailing fraction of the run used for classification.
    #[arg(long, default_value_t = 0.4)]
    window: f64,
    /// Relative amplitude below which the run counts as stationary.
    #[arg(long, default_value_t = 1e-4)]
    equilibrium_tol: f64,
    /// Homogeneous oscillations need all other modes below this fraction of mode 0.
    #[arg(long, default_value_t = 0.1)]
    dominance: f64,
    /// Component whose mode spectrum is classified.
    #[arg(long, value_enum, default_value_t = ComponentArg::I)]
    component: ComponentArg,
    /// Also write a gnuplot script for the I(x, t) surface.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 1e-3)]
    d2_min: f64,
    #[arg(long, default_value_t = 1e3)]
    d2_max: f64,
    #[arg(long, default_value_t = 60)]
    points: usize,
    /// Relative bracket width at which regime boundaries stop refining.
    #[arg(long, default_value_t = 0.02)]
    rel_tol: f64,
    /// Also write a gnuplot script for the curves.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Relative offset of ω from ω* on each side. Larger offsets grow
    /// orbits that can drive S negative.
    #[arg(long, default_value_t = 0.002)]
    margin: f64,
    /// Separate relative offset below ω*.
    #[arg(long)]
    margin_below: Option<f64>,
    #[arg(long, default_value_t = 96)]
    grid_points: usize,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Fixed horizon for both runs (default: from the linear growth rates).
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: String,
    command: &'a str,
    argv: Vec<String>,
    config: &'a RunConfig,
    version: &'static str,
    outputs: Vec<String>,
    wall_time_s: f64,
}

/// Collects output files of one command.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.display().to_string());
        p
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let p = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(p, text)?;
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, body)?;
        Ok(())
    }
}

fn document(kind: &str, body: impl Serialize) -> Result<Value> {
    let mut v = serde_json::to_value(body)?;
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), json!(format!("sisdelay.{kind}/{SCHEMA_VERSION}")));
    }
    Ok(v)
}

fn emit(out: &mut Outputs, kind: &str, body: impl Serialize) -> Result<()> {
    let doc = document(kind, body)?;
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    // A closed pipe (`| head`) is not an error for the files written below.
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
        _ => {}
    }
    out.json(&format!("{kind}.json"), &doc)
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Io => 1,
        ErrorCategory::Usage => 2,
        ErrorCategory::Precondition => 3,
        ErrorCategory::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Equilibria => "equilibria",
        Command::Hopf(_) => "hopf",
        Command::Normalform(_) => "normalform",
        Command::Simulate(_) => "simulate",
        Command::Sweep(_) => "sweep",
        Command::Verify(_) => "verify",
    }
}

fn run(cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let mut overrides = cli.overrides.clone();
    if let Command::Simulate(a) = &cli.command {
        overrides.extend(simulate_overrides(a));
    }
    let cfg = load_config(cli.config.as_deref(), &overrides)?;
    cfg.params.validate()?;
    let mut out = Outputs::new(&cli.out_dir)?;
    match &cli.command {
        Command::Equilibria => cmd_equilibria(&cfg, &mut out)?,
        Command::Hopf(a) => cmd_hopf(&cfg, a, &mut out)?,
        Command::Normalform(a) => cmd_normalform(&cfg, a, &mut out)?,
        Command::Simulate(a) => cmd_simulate(&cfg, a, &mut out)?,
        Command::Sweep(a) => cmd_sweep(&cfg, a, &mut out)?,
        Command::Verify(a) => cmd_verify(&cfg, a, &mut out)?,
    }
    let name = command_name(&cli.command);
    let mut outputs = out.written.clone();
    let manifest_path = out.dir.join("manifest.json");
    outputs.push(manifest_path.display().to_string());
    let manifest = Manifest {
        schema: format!("sisdelay.manifest/{SCHEMA_VERSION}"),
        command: name,
        argv: std::env::args().collect(),
        config: &cfg,
        version: env!("CARGO_PKG_VERSION"),
        outputs,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text)?;
    log::info!("wrote {}", manifest_path.display());
    Ok(())
}

fn simulate_overrides(a: &SimulateArgs) -> Vec<String> {
    let mut v = Vec::new();
    if let Some(x) = a.t_end {
        v.push(format!("t_end={x:?}"));
    }
    if let Some(x) = a.dt {
        v.push(format!("dt={x:?}"));
    }
    if let Some(x) = a.grid_points {
        v.push(format!("grid_points={x}"));
    }
    if let Some(x) = &a.scheme {
        v.push(format!("scheme=\"{x}\""));
    }
    v
}

fn cmd_equilibria(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    let body = json!({
        "params": p,
        "equilibria": p.equilibria(),
        "stability": spectral::linear_stability(p)?,
    });
    emit(out, "equilibria", body)
}

fn cmd_hopf(cfg: &RunConfig, a: &HopfArgs, out: &mut Outputs) -> Result<()> {
    let p = &cfg.params;
    p.endemic()?;
    let cutoff = spectral::mode_cutoff(p)?;
    let n_max = a.modes.unwrap_or(cutoff.n1);
    let body = json!({
        "params": p,
        "cutoff": cutoff,
        "modes": spectral::mode_records(p, n_max, a.jmax)?,
        "first_hopf": spectral::first_hopf(p)?,
        "monotonicity": spectral::monotonicity_profile(p)?,
    });
    emit(out, "hopf", body)
}

fn cmd_normalform(cfg: &RunConfig, a: &NormalformArgs, out: &mut Outputs) -> Result<()> {
    let scaling = match a.scaling {
        ScalingArg::UnitConstant => ModeScaling::UnitConstant,
        ScalingArg::Orthonormal => ModeScaling::Orthonormal,
    };
    let r = normalform::hopf_properties_with(&cfg.params, scaling)?;
    emit(out, "normalform", json!({ "params": cfg.params, "result": r }))
}

fn cmd_simulate(cfg: &RunConfig, a: &SimulateArgs, out: &mut Outputs) -> Result<()> {
    if a.export_every == 0 {
        return Err(Error::Config {
            key: "export-every".into(),
            message: "must be at least 1".into(),
        });
    }
    let traj = simulator::run(&cfg.params, &cfg.sim)?;
    let thinned;
    let exported = if a.export_every > 1 {
        thinned = traj.subsample(a.export_every);
        &thinned
    } else {
        &traj
    };
    if matches!(a.format, Format::Csv | Format::Both) {
        exported.write_csv(&out.path("trajectory.csv"))?;
    }
    if matches!(a.format, Format::Binary | Format::Both) {
        exported.write_binary(&out.path("trajectory.bin"))?;
    }
    let opts = ClassifyOptions {
        window: a.window,
        equilibrium_tol: a.equilibrium_tol,
        dominance: a.dominance,
        component: match a.component {
            ComponentArg::S => Component::S,
            ComponentArg::I => Component::I,
            ComponentArg::Y => Component::Y,
        },
        ..ClassifyOptions::default()
    };
    let report = analysis::classify_attractor(&traj, &opts)?;
    let predicted_period = match cfg.params.endemic() {
        Ok(_) => spectral::first_hopf(&cfg.params).ok().map(|f| f.period()),
        Err(_) => None,
    };
    if a.gnuplot && matches!(a.format, Format::Csv | Format::Both) {
        out.text("trajectory.gp", &surface_script("trajectory.csv"))?;
    }
    let body = json!({
        "params": cfg.params,
        "sim": cfg.sim,
        "classify": opts,
        "report": report,
        "predicted_period": predicted_period,
        "clamped": traj.clamped,
    });
    emit(out, "simulate", body)
}

fn surface_script(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\nset ylabel 'x'\nset zlabel 'I'\n\
         set pm3d map\n\
         splot '{csv}' using 1:2:4 with pm3d notitle\n\
         pause mouse close\n"
    )
}

fn sweep_script(csv: &str) -> String {
    let mut s = format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set logscale x\n\
         set xlabel 'd2'\nset ylabel 'omega_n^0'\n\
         plot '{csv}' using 1:2 with lines"
    );
    for c in 3..=analysis::SWEEP_MODES + 1 {
        s.push_str(&format!(", '' using 1:{c} with lines"));
    }
    s.push_str("\npause mouse close\n");
    s
}

fn cmd_sweep(cfg: &RunConfig, a: &SweepArgs, out: &mut Outputs) -> Result<()> {
    if !(a.d2_min > 0.0 && a.d2_max >= a.d2_min) || a.points == 0 {
        return Err(Error::Config {
            key: "d2-min/d2-max/points".into(),
            message: "need 0 < d2-min <= d2-max and at least one point".into(),
        });
    }
    let grid = analysis::log_grid(a.d2_min, a.d2_max, a.points);
    let r = analysis::sweep_d2(&cfg.params, &grid, a.rel_tol)?;
    r.save_csv(&out.path("sweep.csv"))?;
    if a.gnuplot {
        out.text("sweep.gp", &sweep_script("sweep.csv"))?;
    }
    let body = json!({
        "params": cfg.params,
        "boundaries": r.boundaries,
        "mode_sequence": r.mode_sequence(),
        "points": r.points,
    });
    emit(out, "sweep", body)
}

fn cmd_verify(cfg: &RunConfig, a: &VerifyArgs, out: &mut Outputs) -> Result<()> {
    let opts = VerifyOptions {
        margin_below: a.margin_below,
        grid_points: a.grid_points,
        dt: a.dt,
        t_end: a.t_end,
        ..VerifyOptions::default()
    };
    let r = analysis::verify_prediction(&cfg.params, a.margin, &opts)?;
    for c in &r.checks {
        eprintln!("{:<20} {:?}: {}", c.name, c.outcome, c.detail);
    }
    if let Some(note) = &r.note {
        eprintln!("{note}");
    }
    emit(out, "verify", json!({ "params": cfg.params, "margin": a.margin, "report": r }))
}
