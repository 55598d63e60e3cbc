//! Command-line front end. Every subcommand is a pure function of its
//! config and seed; artifacts never silently replace existing output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::accountant::{calibrate_ddp_sigma, calibrate_rrdu_sigma, DDP_FORMULA, RRDU_FORMULA};
use crate::capacity::{capacity_row, rrdu_capacity, CapacityInputs, CSV_HEADER};
use crate::config::{validate_config, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{csv_lines, evaluate, run_unlearning_experiment, ExperimentRow, ExperimentSpec, Method, Phase, SweepPoint};
use crate::io::{check_overwrite, fmt_f64, prepare_out_dir, read_model, read_task, write_task};
use crate::protocols::{
    rrdu_sigma, run_ddp_netdp, run_finetune, run_net_sgd, run_retrain_certifier, run_rrdu_with_sigma,
};
use crate::tasks::{build_task, Task};

#[derive(Debug, Parser)]
#[command(name = "walkforget", version, about = "Certified unlearning on token random-walk networks")]
pub struct Cli {
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic task and write it as a dataset directory.
    GenData(RunArgs),
    /// Net-SGD training.
    Train(RunArgs),
    /// Train, then run a post-training procedure (RR-DU by default).
    Unlearn(UnlearnArgs),
    /// Retrain without the forget set and run the certifier continuation.
    Certify(RunArgs),
    /// Deletion-capacity calculator; comma lists sweep a grid.
    Capacity(CapacityArgs),
    /// Sweep unlearning experiments over config axes and seeds.
    Sweep(SweepArgs),
    /// Print the calibrated noise scale and its formula.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Read the task from a `gen-data` directory instead of generating it.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UnlearnArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Rrdu)]
    pub method: MethodArg,
    /// Start from this model file instead of training.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Rrdu,
    Finetune,
    Ddp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Rrdu => Method::Rrdu,
            MethodArg::Finetune => Method::Finetune,
            MethodArg::Ddp => Method::Ddp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrivacyMode {
    Ddp,
    Rrdu,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long, value_enum)]
    pub mode: PrivacyMode,
    #[arg(long, default_value = "1")]
    pub eps: String,
    #[arg(long, default_value = "1e-5")]
    pub delta: String,
    #[arg(long = "N", default_value = "10")]
    pub num_clients: String,
    #[arg(long = "d", default_value = "10")]
    pub dim: String,
    /// `T` for DDP, `T_u` for RR-DU.
    #[arg(long = "T", default_value = "100")]
    pub horizon: String,
    /// `R` for DDP, `R_cert` for RR-DU.
    #[arg(long = "R", default_value = "1")]
    pub radius: String,
    #[arg(long = "L", default_value = "1")]
    pub lipschitz: String,
    #[arg(long, default_value = "0")]
    pub mu: String,
    #[arg(long, default_value = "1")]
    pub s: String,
    #[arg(long, default_value = "0.1")]
    pub p: String,
    #[arg(long = "n-u", default_value = "200")]
    pub n_u: String,
    #[arg(long, default_value = "0.5")]
    pub gamma: String,
    /// Use this non-bias term instead of evaluating the utility bound.
    #[arg(long = "A")]
    pub a: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    #[arg(long = "c-bias", default_value_t = 1.0)]
    pub c_bias: f64,
    #[arg(long = "c-ddp", default_value_t = 1.0)]
    pub c_ddp: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Sweep axis `key=v1,v2,...`; `method` selects rrdu, finetune or ddp.
    #[arg(long = "axis", value_name = "KEY=V1,V2")]
    pub axes: Vec<String>,
    /// Comma-separated seeds; defaults to the config seed.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse a non-empty output directory, discarding finished points.
    #[arg(long)]
    pub force: bool,
    /// Continue an interrupted sweep in `--out`, skipping finished points.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub mode: PrivacyMode,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long = "L", default_value_t = 1.0)]
    pub lipschitz: f64,
    /// DDP: group size, the per-record target is `eps/m`.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long = "T-u", default_value_t = 100)]
    pub t_u: usize,
    #[arg(long = "N", default_value_t = 10)]
    pub num_clients: usize,
    #[arg(long = "c-cal", default_value_t = 1.0)]
    pub c_cal: f64,
    #[arg(long = "c-amp", default_value_t = 1.0)]
    pub c_amp: f64,
}

/// Parses `argv`, runs the subcommand and returns the process exit code:
/// 0 on success, 2 for usage errors, 3 for config errors, 1 otherwise.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = e.print();
            } else {
                let text = e.to_string();
                let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
                eprintln!("error kind=usage msg={first}");
            }
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            let (kind, code) = classify(&e);
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={kind} msg={msg}");
            code
        }
    }
}

fn classify(e: &Error) -> (&'static str, i32) {
    match e {
        Error::InvalidConfig(_) | Error::ConfigParse { .. } => ("config", 3),
        Error::InvalidArgument(_) => ("argument", 1),
        Error::WouldOverwrite(_) => ("overwrite", 1),
        Error::Io(_) => ("io", 1),
        Error::Format { .. } => ("format", 1),
        Error::CalibrationFailed { .. } => ("calibration", 1),
        _ => ("runtime", 1),
    }
}

/// Runs a parsed command, writing human-readable results to `out`.
pub fn execute(cli: &Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let log = |level: u8, msg: &str| {
        if cli.verbose >= level {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::GenData(a) => {
            let cfg = load_config(&a.config)?;
            prepare_out_dir(&a.out, a.force)?;
            let task = build_task(&cfg)?;
            write_task(&a.out, &task)?;
            std::fs::write(a.out.join("config.txt"), cfg.to_text())?;
            log(1, &format!("wrote dataset to {}", a.out.display()));
        }
        Command::Train(a) => {
            let cfg = load_config(&a.config)?;
            let task = load_task(&cfg, a.data.as_deref())?;
            prepare_out_dir(&a.out, a.force)?;
            std::fs::write(a.out.join("config.txt"), cfg.to_text())?;
            let r = run_net_sgd(&cfg, &task, true)?;
            r.save(&a.out, "")?;
            writeln!(out, "retained_loss = {}", fmt_f64(r.trace.as_ref().and_then(|t| t.last()).map_or(f64::NAN, |t| t.retained_loss)))?;
        }
        Command::Unlearn(a) => {
            let cfg = load_config(&a.run.config)?;
            let task = load_task(&cfg, a.run.data.as_deref())?;
            prepare_out_dir(&a.run.out, a.run.force)?;
            std::fs::write(a.run.out.join("config.txt"), cfg.to_text())?;
            let theta0 = match &a.model {
                Some(path) => read_model(path)?,
                None => {
                    log(1, "training");
                    let trained = run_net_sgd(&cfg, &task, true)?;
                    trained.save(&a.run.out, "trained_")?;
                    trained.model
                }
            };
            log(1, &format!("running {}", Method::from(a.method)));
            let post = match a.method {
                MethodArg::Rrdu => {
                    let sigma = rrdu_sigma(&cfg, task.objective.lipschitz)?;
                    run_rrdu_with_sigma(&cfg, &task, &theta0, &theta0, sigma, true)?
                }
                MethodArg::Finetune => run_finetune(&cfg, &task, &theta0, true)?,
                MethodArg::Ddp => run_ddp_netdp(&cfg, &task, cfg.rounds + cfg.unlearn_rounds, true)?,
            };
            post.save(&a.run.out, "")?;
            let rows = vec![
                ExperimentRow {
                    phase: Phase::Pre,
                    metrics: evaluate(&theta0, &task, cfg.unlearning_client, &post.model)?,
                    epsilon_achieved: None,
                    sigma_used: None,
                },
                ExperimentRow {
                    phase: Phase::Post,
                    metrics: evaluate(&post.model, &task, cfg.unlearning_client, &post.model)?,
                    epsilon_achieved: post.report.as_ref().map(|r| r.guarantee.epsilon),
                    sigma_used: Some(post.sigma),
                },
            ];
            write_metrics(&a.run.out, &cfg, &rows)?;
            writeln!(out, "sigma = {}", fmt_f64(post.sigma))?;
            if let Some(r) = &post.report {
                writeln!(out, "epsilon = {}", fmt_f64(r.guarantee.epsilon))?;
            }
        }
        Command::Certify(a) => {
            let cfg = load_config(&a.config)?;
            let task = load_task(&cfg, a.data.as_deref())?;
            prepare_out_dir(&a.out, a.force)?;
            std::fs::write(a.out.join("config.txt"), cfg.to_text())?;
            let sigma = rrdu_sigma(&cfg, task.objective.lipschitz)?;
            let cert = run_retrain_certifier(&cfg, &task, sigma, true)?;
            cert.retrained.save(&a.out, "retrained_")?;
            cert.unlearned.save(&a.out, "")?;
            let rows = vec![ExperimentRow {
                phase: Phase::Certifier,
                metrics: evaluate(&cert.unlearned.model, &task, cfg.unlearning_client, &cert.unlearned.model)?,
                epsilon_achieved: cert.unlearned.report.as_ref().map(|r| r.guarantee.epsilon),
                sigma_used: Some(sigma),
            }];
            write_metrics(&a.out, &cfg, &rows)?;
            writeln!(out, "sigma = {}", fmt_f64(sigma))?;
        }
        Command::Capacity(a) => capacity(a, out)?,
        Command::Sweep(a) => {
            let mut base = load_config(&a.config)?;
            let seeds = match &a.seeds {
                Some(list) => parse_list(list, "seeds")?,
                None => vec![base.seed],
            };
            let mut axes = Vec::new();
            for axis in &a.axes {
                let (k, vs) = axis
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("axis '{axis}' is not KEY=V1,V2")))?;
                axes.push((k.trim().to_string(), vs.split(',').map(|v| v.trim().to_string()).collect()));
            }
            base.seed = seeds.first().copied().unwrap_or(base.seed);
            let spec = ExperimentSpec { base, axes, seeds };
            if a.resume {
                std::fs::create_dir_all(&a.out)?;
            } else {
                prepare_out_dir(&a.out, a.force)?;
            }
            let points_dir = a.out.join("points");
            if a.force && !a.resume && points_dir.exists() {
                std::fs::remove_dir_all(&points_dir)?;
            }
            std::fs::create_dir_all(&points_dir)?;
            std::fs::write(a.out.join("config.txt"), spec.base.to_text())?;
            let csv = run_unlearning_experiment(&spec, a.jobs, Some(&points_dir))?;
            std::fs::write(a.out.join("results.csv"), &csv)?;
            log(1, &format!("{} points", spec.points().len()));
        }
        Command::Calibrate(a) => match a.mode {
            PrivacyMode::Ddp => {
                if a.m == 0 {
                    return Err(Error::InvalidArgument("m must be >= 1".into()));
                }
                let sigma = calibrate_ddp_sigma(a.eps / a.m as f64, a.delta, a.lipschitz)?;
                writeln!(out, "sigma = {}", fmt_f64(sigma))?;
                writeln!(out, "formula = {DDP_FORMULA}")?;
                if a.m > 1 {
                    writeln!(out, "per_record_epsilon = {}", fmt_f64(a.eps / a.m as f64))?;
                }
            }
            PrivacyMode::Rrdu => {
                let c = calibrate_rrdu_sigma(a.eps, a.delta, a.lipschitz, a.p, a.t_u, a.num_clients, a.c_cal, a.c_amp)?;
                writeln!(out, "sigma = {}", fmt_f64(c.sigma))?;
                writeln!(out, "formula = {RRDU_FORMULA}")?;
                writeln!(out, "base_sigma = {}", fmt_f64(c.base_sigma))?;
                writeln!(out, "escalations = {}", c.escalations)?;
                writeln!(out, "epsilon = {}", fmt_f64(c.report.guarantee.epsilon))?;
            }
        },
    }
    Ok(())
}

/// Config file (or defaults), then `--set` overrides, then `--seed`,
/// validated.
pub fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut bad = Vec::new();
    for o in &args.overrides {
        match o.split_once('=') {
            Some((k, v)) => {
                if let Err(msg) = cfg.set(k.trim(), v.trim()) {
                    bad.push(format!("--set {}: {msg}", k.trim()));
                }
            }
            None => bad.push(format!("--set '{o}' is not KEY=VALUE")),
        }
    }
    if !bad.is_empty() {
        return Err(Error::InvalidConfig(bad));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    validate_config(cfg)
}

fn load_task(cfg: &RunConfig, data: Option<&Path>) -> Result<Task> {
    match data {
        Some(dir) => read_task(dir),
        None => build_task(cfg),
    }
}

fn write_metrics(dir: &Path, cfg: &RunConfig, rows: &[ExperimentRow]) -> Result<()> {
    let point = SweepPoint { order: Vec::new(), values: Vec::new(), seed: cfg.seed };
    let mut text = String::from(crate::eval::METRIC_COLUMNS);
    text.push('\n');
    for line in csv_lines(&point, rows) {
        let _ = writeln!(text, "{line}");
    }
    std::fs::write(dir.join("metrics.csv"), text)?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(list: &str, name: &str) -> Result<Vec<T>> {
    list.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("--{name}: '{}' is not a valid value", v.trim())))
        })
        .collect()
}

fn capacity(a: &CapacityArgs, out: &mut dyn std::io::Write) -> Result<()> {
    if a.mode == PrivacyMode::Rrdu {
        if let Some(big_a) = a.a {
            let gammas: Vec<f64> = parse_list(&a.gamma, "gamma")?;
            let n_us: Vec<usize> = parse_list(&a.n_u, "n-u")?;
            let ls: Vec<f64> = parse_list(&a.lipschitz, "L")?;
            let mut text = String::from("gamma,A,n_u,L,c_bias,m_star,regime\n");
            for &g in &gammas {
                for &n_u in &n_us {
                    for &l in &ls {
                        let c = rrdu_capacity(g, big_a, n_u, l, a.c_bias)?;
                        let _ = writeln!(
                            text,
                            "{},{},{n_u},{},{},{},{}",
                            fmt_f64(g),
                            fmt_f64(big_a),
                            fmt_f64(l),
                            fmt_f64(a.c_bias),
                            c.m_star,
                            c.regime
                        );
                        writeln!(out, "m* = {} regime = {}", c.m_star, c.regime)?;
                    }
                }
            }
            return emit(a, out, &text, false);
        }
    }
    let eps: Vec<f64> = parse_list(&a.eps, "eps")?;
    let delta: Vec<f64> = parse_list(&a.delta, "delta")?;
    let ns: Vec<usize> = parse_list(&a.num_clients, "N")?;
    let ds: Vec<usize> = parse_list(&a.dim, "d")?;
    let ts: Vec<usize> = parse_list(&a.horizon, "T")?;
    let rs: Vec<f64> = parse_list(&a.radius, "R")?;
    let ls: Vec<f64> = parse_list(&a.lipschitz, "L")?;
    let mus: Vec<f64> = parse_list(&a.mu, "mu")?;
    let ss: Vec<usize> = parse_list(&a.s, "s")?;
    let ps: Vec<f64> = parse_list(&a.p, "p")?;
    let n_us: Vec<usize> = parse_list(&a.n_u, "n-u")?;
    let gammas: Vec<f64> = parse_list(&a.gamma, "gamma")?;
    let mut grid = vec![CapacityInputs { c1: a.c1, c2: a.c2, c_bias: a.c_bias, c_ddp: a.c_ddp, ..Default::default() }];
    macro_rules! expand {
        ($vals:expr, $field:ident) => {
            grid = grid
                .iter()
                .flat_map(|g| $vals.iter().map(move |&v| CapacityInputs { $field: v, ..*g }))
                .collect();
        };
    }
    expand!(eps, epsilon);
    expand!(delta, delta);
    expand!(ns, num_clients);
    expand!(ds, dim);
    expand!(ts, horizon);
    expand!(rs, radius);
    expand!(ls, lipschitz);
    expand!(mus, mu);
    expand!(ss, s);
    expand!(ps, p);
    expand!(n_us, n_u);
    expand!(gammas, gamma);
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for inp in &grid {
        let row = capacity_row(inp)?;
        if a.mode == PrivacyMode::Ddp && row.ddp_capacity.is_none() {
            crate::capacity::ddp_capacity(inp)?;
        }
        let _ = writeln!(text, "{}", row.to_csv());
    }
    emit(a, out, &text, true)
}

fn emit(a: &CapacityArgs, out: &mut dyn std::io::Write, text: &str, print_csv: bool) -> Result<()> {
    match &a.out {
        Some(path) => {
            check_overwrite(path, a.force)?;
            std::fs::write(path, text)?;
        }
        None if print_csv => out.write_all(text.as_bytes())?,
        None => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (Result<()>, String) {
        let cli = Cli::try_parse_from(std::iter::once("walkforget").chain(args.iter().copied())).unwrap();
        let mut buf = Vec::new();
        let r = execute(&cli, &mut buf);
        (r, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn calibrate_ddp_prints_sigma_and_formula() {
        let (r, out) = run(&["calibrate", "--eps", "1", "--delta", "1e-5", "--L", "1", "--mode", "ddp"]);
        r.unwrap();
        assert!(out.contains("sigma = 9.689"), "{out}");
        assert!(out.contains(&format!("formula = {DDP_FORMULA}")));
    }

    #[test]
    fn capacity_variance_limited() {
        let (r, out) = run(&["capacity", "--mode", "rrdu", "--gamma", "0.5", "--A", "0.6"]);
        r.unwrap();
        assert!(out.contains("m* = 0 regime = variance-limited"), "{out}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(dispatch(["walkforget", "frobnicate"]), 2);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let out = out.to_str().unwrap();
        assert_eq!(dispatch(["walkforget", "train", "--out", out, "--set", "p=2"]), 3);
        assert_eq!(dispatch(["walkforget", "train", "--out", out, "--set", "bogus=1"]), 3);
        assert_eq!(
            dispatch(["walkforget", "train", "--out", out, "--data", dir.path().join("missing").to_str().unwrap()]),
            1
        );
    }

    #[test]
    fn capacity_grid_rows() {
        let (r, out) = run(&["capacity", "--mode", "ddp", "--eps", "0.5,1,2", "--N", "10,20"]);
        r.unwrap();
        assert_eq!(out.lines().count(), 1 + 6);
        assert!(out.starts_with(CSV_HEADER));
    }
}
