use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use viscojoint::catching::{run_campaign_with_map, ApertureMap};
use viscojoint::damper::{fin_g_factor, linspace, required_viscosity, sweep_g, total_g_factor};
use viscojoint::finger::{
    correlation_matrix, dynamic_close, joint_name, mean_off_diagonal, quasi_static_sweep, standard_sweep,
    CLOSING_TARGET, CLOSING_TORQUE,
};
use viscojoint::fit::{bootstrap, fit, FitMode, ParamDistribution};
use viscojoint::tracker::{ingest_tracker, ColumnMap};
use viscojoint::units::pa_s_to_cp;
use viscojoint::{metrics, monte_carlo_band, simulate, ParamSource, Provenance, ToolConfig, Trajectory};

#[derive(Parser, Debug)]
#[command(name = "viscojoint", version, about = "Viscoelastic finger joint design and simulation toolkit")]
struct Cli {
    /// TOML configuration file; defaults are used for anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set damper.wall_width_mm=0.6`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, value_parser = parse_assignment)]
    overrides: Vec<String>,
    /// Output file, or directory for `fit` and `catch`; standard output if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the resolved configuration as TOML.
    Config,
    /// Geometry factor and required fluid viscosity of the configured damper.
    Damper,
    /// Sweep wall and channel widths and write the G grid as CSV.
    Sweep {
        /// Number of fins for the sweep (config value if omitted).
        #[arg(long)]
        n_fins: Option<usize>,
    },
    /// Pendulum drop-test simulation and metrics.
    Pendulum {
        #[command(subcommand)]
        action: PendulumCommand,
    },
    /// Fit friction or damping to trajectory CSVs, with optional bootstrap.
    Fit {
        /// Directory of trajectory CSV files (`t,theta[,omega]`).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<FitMode>,
        /// Number of bootstrap resamples; 0 for a point fit only.
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte-Carlo mean and 95% envelope of pendulum trajectories.
    Band {
        /// Parameter samples CSV written by `fit`.
        #[arg(long, conflicts_with = "damping_range")]
        samples: Option<PathBuf>,
        /// Uniform damping range `LO,HI` in N·m·s/rad.
        #[arg(long, value_parser = parse_pair)]
        damping_range: Option<(f64, f64)>,
        /// Draws from the damping range.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Quasi-static motor sweep of one finger, written as CSV.
    Flexion {
        /// Remove the parallel ligament element.
        #[arg(long)]
        no_elastic: bool,
        /// Also report the dynamic closing time at the nominal torque.
        #[arg(long)]
        dynamic: bool,
    },
    /// Ball-catching campaign: one CSV row and one JSON-lines event log per trial.
    Catch {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert a tracker export to a trajectory CSV.
    Ingest {
        /// Tracker CSV with time and position columns.
        input: PathBuf,
        /// Pivot position `X,Y` in the tracker's coordinates.
        #[arg(long, value_parser = parse_pair)]
        pivot: (f64, f64),
        /// Column names, e.g. `t=time,x=px,y=py`.
        #[arg(long, value_parser = parse_col_map)]
        col_map: Option<ColumnMap>,
    },
}

#[derive(Subcommand, Debug)]
enum PendulumCommand {
    /// Simulate one release and write the trajectory CSV.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        omega0: Option<f64>,
        /// Damper coefficient, N·m·s/rad.
        #[arg(long)]
        damping_b: Option<f64>,
    },
    /// Oscillation count and settling time of a trajectory CSV.
    Metrics {
        data: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Release angle from the upward vertical, degrees.
    #[arg(long)]
    theta0_deg: Option<f64>,
    /// Simulated time, s.
    #[arg(long)]
    duration: Option<f64>,
}

fn parse_mode(s: &str) -> Result<FitMode, String> {
    s.parse()
}

fn parse_assignment(s: &str) -> Result<String, String> {
    match s.split_once('=') {
        Some((k, _)) if !k.trim().is_empty() => Ok(s.to_string()),
        _ => Err(format!("expected KEY=VALUE, got `{s}`")),
    }
}

fn mode_name(mode: FitMode) -> &'static str {
    match mode {
        FitMode::UndampedFriction => "undamped_friction",
        FitMode::Damped => "damped",
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
    Ok((num(a)?, num(b)?))
}

fn parse_col_map(s: &str) -> Result<ColumnMap, String> {
    let mut map = ColumnMap::default();
    for part in s.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected role=column, got `{part}`"))?;
        let v = v.trim().to_string();
        match k.trim() {
            "t" => map.t = v,
            "x" => map.x = v,
            "y" => map.y = v,
            other => return Err(format!("unknown column role `{other}` (expected t, x or y)")),
        }
    }
    Ok(map)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn set(cfg: &mut ToolConfig, key: &str, value: impl Into<toml::Value>) -> Result<()> {
    cfg.set(key, value.into()).with_context(|| format!("setting {key}"))
}

fn load_config(cli: &Cli) -> Result<ToolConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ToolConfig::load(p)?,
        None => ToolConfig::default(),
    };
    for o in &cli.overrides {
        cfg.set_assignment(o)?;
    }
    Ok(cfg)
}

fn apply_run_args(cfg: &mut ToolConfig, run: &RunArgs) -> Result<()> {
    if let Some(d) = run.theta0_deg {
        set(cfg, "pendulum.run.theta0_deg", d)?;
    }
    if let Some(d) = run.duration {
        set(cfg, "pendulum.run.duration", d)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    // Command-specific flags win over file values.
    match &cli.command {
        Command::Sweep { n_fins: Some(n) } => set(&mut cfg, "damper.n_fins", *n as i64)?,
        Command::Pendulum { action: PendulumCommand::Simulate { run, omega0, damping_b } } => {
            apply_run_args(&mut cfg, run)?;
            if let Some(w) = omega0 {
                set(&mut cfg, "pendulum.run.omega0", *w)?;
            }
            if let Some(b) = damping_b {
                set(&mut cfg, "pendulum.damping_b", *b)?;
            }
        }
        Command::Fit { mode, bootstrap, seed, .. } => {
            if let Some(m) = mode {
                set(&mut cfg, "fit.mode", mode_name(*m))?;
            }
            if let Some(n) = bootstrap {
                set(&mut cfg, "fit.bootstrap.resamples", *n as i64)?;
            }
            if let Some(s) = seed {
                set(&mut cfg, "fit.bootstrap.seed", *s as i64)?;
            }
        }
        Command::Band { run, .. } => apply_run_args(&mut cfg, run)?,
        Command::Catch { trials, seed, .. } => {
            if let Some(n) = trials {
                set(&mut cfg, "catch.campaign.trials", *n as i64)?;
            }
            if let Some(s) = seed {
                set(&mut cfg, "catch.campaign.seed", *s as i64)?;
            }
        }
        _ => {}
    }
    info!("resolved configuration:\n{}", cfg.annotated());
    let out = cli.out.as_deref();

    match &cli.command {
        Command::Config => {
            let mut w = output(out)?;
            w.write_all(cfg.to_toml_string().as_bytes())?;
            w.flush()?;
            Ok(())
        }
        Command::Damper => damper(&cfg, out),
        Command::Sweep { .. } => sweep(&cfg, out),
        Command::Pendulum { action: PendulumCommand::Simulate { .. } } => pendulum_simulate(&cfg, out),
        Command::Pendulum { action: PendulumCommand::Metrics { data } } => pendulum_metrics(&cfg, data, out),
        Command::Fit { data, .. } => fit_command(&cfg, data, out),
        Command::Band { samples, damping_range, n, seed, .. } => {
            band(&cfg, samples.as_deref(), *damping_range, *n, seed.unwrap_or(0), out)
        }
        Command::Flexion { no_elastic, dynamic } => flexion(&cfg, *no_elastic, *dynamic, out),
        Command::Catch { .. } => catch(&cfg, out),
        Command::Ingest { input, pivot, col_map } => ingest(input, *pivot, col_map.clone().unwrap_or_default(), out),
    }
}

fn damper(cfg: &ToolConfig, out: Option<&Path>) -> Result<()> {
    let g = &cfg.damper;
    let mut w = output(out)?;
    for i in 0..g.n_fins {
        writeln!(w, "fin {i}: G = {:.4e} m^3", fin_g_factor(g, i)?)?;
    }
    let total = total_g_factor(g)?;
    let lo = required_viscosity(g, cfg.sweep.target_damping_lo)?;
    let hi = required_viscosity(g, cfg.sweep.target_damping_hi)?;
    writeln!(w, "total: G = {total:.4e} m^3")?;
    writeln!(
        w,
        "viscosity for b in [{}, {}] N m s/rad: [{:.0}, {:.0}] cP",
        cfg.sweep.target_damping_lo,
        cfg.sweep.target_damping_hi,
        pa_s_to_cp(lo),
        pa_s_to_cp(hi)
    )?;
    writeln!(
        w,
        "{} at {:.0} cP gives b = {:.4e} N m s/rad",
        cfg.fluid.name,
        pa_s_to_cp(cfg.fluid.viscosity),
        cfg.fluid.viscosity * total
    )?;
    w.flush()?;
    Ok(())
}

fn sweep(cfg: &ToolConfig, out: Option<&Path>) -> Result<()> {
    let s = &cfg.sweep;
    let walls = linspace(s.wall_min, s.wall_max, s.steps);
    let channels = linspace(s.channel_min, s.channel_max, s.steps);
    let grid = sweep_g(&walls, &channels, cfg.damper.n_fins, &cfg.damper, s.print_tolerance)?;
    grid.write_csv(output(out)?)?;
    match grid.best_feasible() {
        Some((w, c, g)) => info!("best feasible cell: wall {:.3} mm, channel {:.3} mm, G {g:e} m^3", w * 1e3, c * 1e3),
        None => info!("no feasible cell in the sweep"),
    }
    Ok(())
}

fn pendulum_simulate(cfg: &ToolConfig, out: Option<&Path>) -> Result<()> {
    let r = &cfg.run;
    let traj = simulate(&cfg.pendulum, r.theta0, r.omega0, r.duration, r.sample_interval)?;
    traj.write_csv(output(out)?)?;
    match metrics(&traj, r.rest_band, r.hold_time) {
        Ok(m) => info!("{} oscillations, settled after {:.3} s at {:.4} rad", m.n_oscillations, m.settle_time, m.final_angle),
        Err(e) => info!("metrics unavailable: {e}"),
    }
    Ok(())
}

fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Trajectory::read_csv(f).with_context(|| format!("reading {}", path.display()))
}

fn pendulum_metrics(cfg: &ToolConfig, data: &Path, out: Option<&Path>) -> Result<()> {
    let traj = read_trajectory(data)?;
    let m = metrics(&traj, cfg.run.rest_band, cfg.run.hold_time)?;
    let mut w = output(out)?;
    writeln!(w, "oscillations: {}", m.n_oscillations)?;
    writeln!(w, "crossings: {}", m.crossings)?;
    writeln!(w, "settle time: {:.4} s", m.settle_time)?;
    writeln!(w, "final angle: {:.3} deg", m.final_angle.to_degrees())?;
    w.flush()?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn fit_command(cfg: &ToolConfig, data: &Path, out: Option<&Path>) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(data)
        .with_context(|| format!("cannot list {}", data.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .csv trajectories in {}", data.display());
    }
    let observed = files.iter().map(|p| read_trajectory(p)).collect::<Result<Vec<_>>>()?;
    info!("fitting {} trajectories in {} mode", observed.len(), mode_name(cfg.fit.mode));

    let point = fit(&observed, &cfg.fit, &cfg.pendulum)?;
    let n = cfg.bootstrap.resamples;
    let dist = if n > 0 {
        bootstrap(&observed, &cfg.fit, &point.params, n, cfg.bootstrap.seed)?
    } else {
        let row = cfg.fit.free_params.iter().map(|p| p.get(&point.params)).collect();
        ParamDistribution::from_samples(cfg.fit.free_params.clone(), vec![row], 0)
    };

    let mut buf = Vec::new();
    dist.write_estimates_csv(&point.params, &mut buf)?;
    let estimates = String::from_utf8(buf)?;
    let mut report = String::new();
    report.push_str(&format!("mode: {}\n", mode_name(cfg.fit.mode)));
    report.push_str(&format!("trajectories: {}\n", observed.len()));
    for f in &files {
        report.push_str(&format!("  {}\n", f.display()));
    }
    report.push_str(&format!("loss: {:e}\n", point.loss));
    report.push_str(&format!("converged: {}\n", point.converged));
    report.push_str(&format!("evaluations: {}\n", point.evaluations));
    report.push_str(&format!("resamples: {} ok, {} failed, seed {}\n", dist.samples.len(), dist.failures, cfg.bootstrap.seed));
    report.push_str("estimates:\n");
    for line in estimates.lines() {
        report.push_str(&format!("  {line}\n"));
    }

    match out {
        Some(dir) => {
            create_dir(dir)?;
            fs::write(dir.join("estimates.csv"), &estimates)?;
            fs::write(dir.join("summary.txt"), &report)?;
            let f = File::create(dir.join("samples.csv"))?;
            dist.write_samples_csv(BufWriter::new(f))?;
        }
        None => info!("report:\n{report}"),
    }
    let mut w = output(None)?;
    w.write_all(estimates.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn band(
    cfg: &ToolConfig,
    samples: Option<&Path>,
    damping_range: Option<(f64, f64)>,
    n: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let base = cfg.pendulum;
    let source = match (samples, damping_range) {
        (Some(p), _) => {
            let f = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
            let dist = ParamDistribution::read_samples_csv(f).map_err(anyhow::Error::msg)?;
            ParamSource::Distribution { dist, base }
        }
        (None, Some((lo, hi))) => ParamSource::UniformDamping { lo, hi, n, seed, base },
        (None, None) => ParamSource::UniformDamping {
            lo: cfg.sweep.target_damping_lo,
            hi: cfg.sweep.target_damping_hi,
            n,
            seed,
            base,
        },
    };
    let r = &cfg.run;
    let band = monte_carlo_band(&source, r.theta0, r.duration, r.sample_interval)?;
    band.write_csv(output(out)?)?;
    info!("{} members, {} excluded", band.members.len(), band.excluded);
    Ok(())
}

fn flexion(cfg: &ToolConfig, no_elastic: bool, dynamic: bool, out: Option<&Path>) -> Result<()> {
    let mut chain = cfg.finger;
    if no_elastic {
        chain.joint_stiffness = [0.0; 3];
    }
    let record = quasi_static_sweep(&chain, &cfg.drive, &standard_sweep())?;
    record.write_csv(output(out)?)?;
    let m = correlation_matrix(&record)?;
    let mut text = String::from("joint correlations:\n");
    for (i, row) in m.iter().enumerate() {
        text.push_str(&format!("  {:<8} {:.3} {:.3} {:.3}\n", joint_name(i), row[0], row[1], row[2]));
    }
    text.push_str(&format!("  mean off-diagonal {:.3}", mean_off_diagonal(&m)));
    info!("{text}");
    if dynamic {
        let t = dynamic_close(&chain, &cfg.drive, CLOSING_TORQUE, &CLOSING_TARGET)?;
        info!("closing time at {CLOSING_TORQUE} N m: {t:.3} s");
    }
    Ok(())
}

fn catch(cfg: &ToolConfig, out: Option<&Path>) -> Result<()> {
    let map = ApertureMap::from_finger(&cfg.finger, &cfg.drive, cfg.catch.motor_range_deg)?;
    let mut catch_cfg = cfg.catch;
    // Apertures follow the configured finger unless set explicitly.
    let explicit = |k: &str| matches!(cfg.provenance(k), Some(Provenance::File | Provenance::Flag));
    if !explicit("catch.d_s") {
        catch_cfg.d_s = map.open();
    }
    if !explicit("catch.d_u") {
        catch_cfg.d_u = map.closed();
    }
    for w in catch_cfg.warnings() {
        log::warn!("{w}");
    }
    let result = run_campaign_with_map(&catch_cfg, &map, cfg.campaign.trials, cfg.campaign.seed)?;
    match out {
        Some(dir) => {
            let events = dir.join("events");
            create_dir(&events)?;
            result.write_trials_csv(BufWriter::new(File::create(dir.join("trials.csv"))?))?;
            for (i, t) in result.trials.iter().enumerate() {
                let mut w = BufWriter::new(File::create(events.join(format!("trial_{i:03}.jsonl")))?);
                t.write_events_jsonl(&mut w)?;
                w.flush()?;
            }
        }
        None => result.write_trials_csv(output(None)?)?,
    }
    let summary = format!("caught {}/{} ({:.1}%)", result.caught, result.trials.len(), result.rate * 100.0);
    if out.is_some() {
        println!("{summary}");
    } else {
        info!("{summary}");
    }
    Ok(())
}

fn ingest(input: &Path, pivot: (f64, f64), columns: ColumnMap, out: Option<&Path>) -> Result<()> {
    let f = File::open(input).with_context(|| format!("cannot open {}", input.display()))?;
    let traj = ingest_tracker(f, pivot, &columns).with_context(|| format!("reading {}", input.display()))?;
    traj.write_csv(output(out)?)?;
    info!("{} samples at {:.6} s", traj.len(), traj.dt);
    Ok(())
}
