//! The `helmflow` command line.
//!
//! Exit codes: 0 feasible (or the command completed), 2 infeasible, 3
//! indeterminate or out of precision, 1 usage and I/O errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use helmflow_core::mp::{self, MpComplex, Precision};
use helmflow_core::newton::{self, JacobianVariant, Start};
use helmflow_core::pade::{self, ZeroPoleSet};
use helmflow_core::series;
use helmflow_core::stability::{
    self, FeasibilityStatus, LimitStatus, StableOptions, DEFAULT_MAX_HALF_ORDER, DEFAULT_SCHEDULE,
    DEFAULT_TOL,
};
use helmflow_core::{
    builtin_network, BusId, BusKind, Network, NetworkError, PadeError, ParamField, ParameterRef,
    SeriesError, StabilityError,
};
use serde::Serialize;
use thiserror::Error;

use crate::exec::RayonExecutor;
use crate::report::{self, LimitsBody, PoleBus, PolesBody, Report, SnbBody, SolveBody, SweepBody, SweepRow};
use crate::schema::{parse_network, SchemaError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INDETERMINATE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Schema { path: PathBuf, source: SchemaError },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stability(e) if out_of_precision(e) => EXIT_INDETERMINATE,
            _ => EXIT_USAGE,
        }
    }
}

fn out_of_precision(e: &StabilityError) -> bool {
    matches!(
        e,
        StabilityError::Series(SeriesError::PrecisionExhausted { .. })
            | StabilityError::Pade(PadeError::DegenerateTable { .. } | PadeError::RootFindingStalled { .. })
    )
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "helmflow", version, about = "Holomorphic-embedding power flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Feasibility verdict and voltage profile.
    Solve(Common),
    /// Embedding verdict and flat-start Newton-Raphson over a parameter range.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter, e.g. bus6.p or bus2.qload.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
    },
    /// Zeros and poles of the diagonal Padé approximant.
    Poles {
        #[command(flatten)]
        common: Common,
        /// Padé half-order.
        #[arg(long, default_value_t = 50)]
        order: usize,
        /// Restrict to one bus.
        #[arg(long)]
        bus: Option<BusId>,
        /// Series coefficients (`bus,order,re,im` CSV) instead of a network.
        #[arg(long, value_name = "FILE")]
        series: Option<PathBuf>,
    },
    /// Bisect the saddle-node point of a parameter.
    #[command(allow_negative_numbers = true)]
    Snb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], required = true)]
        bracket: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Enforce generator reactive limits and classify the outcome.
    Limits(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Args)]
struct Common {
    /// Built-in network (paper-6bus, paper-7bus, paper-7bus-no12).
    #[arg(long)]
    fixture: Option<String>,
    /// Network JSON file.
    #[arg(long, value_name = "FILE")]
    network: Option<PathBuf>,
    /// Override, e.g. bus6.p=1.12, bus2.qload=0.0518, bus5.v=1.1.
    #[arg(long = "set", value_name = "BUS.FIELD=X")]
    set: Vec<String>,
    /// Reactive upper limit, e.g. bus5=0.75.
    #[arg(long, value_name = "BUS=X")]
    qmax: Vec<String>,
    #[arg(long, value_name = "BUS=X")]
    qmin: Vec<String>,
    /// Ascending Padé half-orders.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// Working precision in decimal digits.
    #[arg(long)]
    precision: Option<u32>,
    /// Convergence tolerance on the top-order delta.
    #[arg(long)]
    delta_tol: Option<f64>,
    /// Ceiling for the schedule escalation.
    #[arg(long)]
    max_half_order: Option<usize>,
    /// Output directory; without it the JSON report goes to stdout.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "json")]
    format: Vec<Format>,
}

/// Fully resolved run configuration, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub fixture: Option<String>,
    pub network: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub set: Vec<String>,
    pub qmax: Vec<String>,
    pub qmin: Vec<String>,
    pub schedule: Vec<usize>,
    pub precision: Option<u32>,
    pub delta_tol: f64,
    pub max_half_order: usize,
    pub out: Option<PathBuf>,
    pub formats: Vec<&'static str>,
    pub param: Option<String>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub step: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub tol: Option<f64>,
    pub order: Option<usize>,
    pub bus: Option<BusId>,
}

impl RunConfig {
    fn new(command: &'static str, c: &Common) -> Self {
        RunConfig {
            command,
            fixture: c.fixture.clone(),
            network: c.network.clone(),
            series: None,
            set: c.set.clone(),
            qmax: c.qmax.clone(),
            qmin: c.qmin.clone(),
            schedule: c.schedule.clone().unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec()),
            precision: c.precision,
            delta_tol: c.delta_tol.unwrap_or(DEFAULT_TOL),
            max_half_order: c.max_half_order.unwrap_or(DEFAULT_MAX_HALF_ORDER),
            out: c.out.clone(),
            formats: c
                .format
                .iter()
                .map(|f| match f {
                    Format::Json => "json",
                    Format::Csv => "csv",
                    Format::Svg => "svg",
                })
                .collect(),
            param: None,
            from: None,
            to: None,
            step: None,
            bracket: None,
            tol: None,
            order: None,
            bus: None,
        }
    }

    fn wants(&self, f: &str) -> bool {
        self.formats.contains(&f)
    }

    fn options(&self) -> StableOptions {
        StableOptions {
            schedule: self.schedule.clone(),
            tol: self.delta_tol,
            max_half_order: self.max_half_order,
            digits: self.precision,
        }
    }

    fn check(&self) -> Result<(), CliError> {
        let sources = [self.fixture.is_some(), self.network.is_some(), self.series.is_some()];
        match sources.iter().filter(|&&s| s).count() {
            1 => {}
            0 => return Err(usage("give one of --fixture or --network")),
            _ => return Err(usage("--fixture, --network and --series are mutually exclusive")),
        }
        if self.series.is_some() && !(self.set.is_empty() && self.qmax.is_empty() && self.qmin.is_empty()) {
            return Err(usage("--set, --qmax and --qmin need a network"));
        }
        if self.out.is_none() && self.formats.iter().any(|f| *f != "json") {
            return Err(usage("csv and svg output need --out"));
        }
        if self.delta_tol.is_nan() || self.delta_tol <= 0.0 {
            return Err(usage("--delta-tol must be positive"));
        }
        Ok(())
    }

    /// The network with every override applied.
    fn network(&self) -> Result<Network, CliError> {
        let mut net = match (&self.fixture, &self.network) {
            (Some(name), _) => builtin_network(name)?,
            (None, Some(path)) => {
                let text = read(path)?;
                parse_network(&text).map_err(|source| CliError::Schema {
                    path: path.clone(),
                    source,
                })?
            }
            (None, None) => return Err(usage("no network given")),
        };
        for s in &self.set {
            let (target, x) = split_assignment(s)?;
            let (bus, field) = target
                .split_once('.')
                .ok_or_else(|| usage(format!("`{s}`: expected bus<N>.<field>=<value>")))?;
            let id = parse_bus(bus)?;
            net = match field {
                "p" => net.with_active_injection(id, x)?,
                "qload" => net.with_reactive_load(id, x)?,
                "v" => net.with_voltage_setpoint(id, x)?,
                other => return Err(usage(format!("`{s}`: unknown field `{other}` (p, qload or v)"))),
            };
        }
        for s in &self.qmax {
            let (bus, x) = split_assignment(s)?;
            net = net.with_q_max(parse_bus(bus)?, Some(x))?;
        }
        for s in &self.qmin {
            let (bus, x) = split_assignment(s)?;
            net = net.with_q_min(parse_bus(bus)?, Some(x))?;
        }
        Ok(net)
    }
}

fn split_assignment(s: &str) -> Result<(&str, f64), CliError> {
    let (lhs, rhs) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("`{s}`: expected <target>=<value>")))?;
    let x: f64 = rhs
        .trim()
        .parse()
        .map_err(|_| usage(format!("`{s}`: `{rhs}` is not a number")))?;
    if !x.is_finite() {
        return Err(usage(format!("`{s}`: value must be finite")));
    }
    Ok((lhs.trim(), x))
}

fn parse_bus(s: &str) -> Result<BusId, CliError> {
    s.strip_prefix("bus")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| usage(format!("`{s}`: expected bus<N>")))
}

/// `bus6.p` or `bus2.qload`.
fn parse_param(net: &Network, s: &str) -> Result<ParameterRef, CliError> {
    let (bus, field) = s
        .split_once('.')
        .ok_or_else(|| usage(format!("`{s}`: expected bus<N>.p or bus<N>.qload")))?;
    let field = match field {
        "p" => ParamField::ActiveInjection,
        "qload" => ParamField::ReactiveLoad,
        other => return Err(usage(format!("`{s}`: parameter field `{other}` must be p or qload"))),
    };
    Ok(ParameterRef::new(net, parse_bus(bus)?, field)?)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Where reports go: a directory, or stdout for the JSON report alone.
struct Sink<'a> {
    dir: Option<PathBuf>,
    stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn file(&mut self, name: &str, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
        let Some(dir) = &self.dir else {
            return write(self.stdout).map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            });
        };
        let path = dir.join(name);
        let io_err = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(dir).map_err(io_err)?;
        let mut f = io::BufWriter::new(fs::File::create(&path).map_err(io_err)?);
        write(&mut f).and_then(|_| f.flush()).map_err(io_err)
    }

    fn json(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.file(name, |w| w.write_all(text.as_bytes()))
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors and belong on stdout
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Solve(c) => {
            let cfg = RunConfig::new("solve", &c);
            cmd_solve(&cfg, stdout, stderr)
        }
        Command::Sweep {
            common,
            param,
            from,
            to,
            step,
        } => {
            let mut cfg = RunConfig::new("sweep", &common);
            cfg.param = Some(param);
            (cfg.from, cfg.to, cfg.step) = (Some(from), Some(to), Some(step));
            cmd_sweep(&cfg, stdout, stderr)
        }
        Command::Poles {
            common,
            order,
            bus,
            series,
        } => {
            let mut cfg = RunConfig::new("poles", &common);
            cfg.order = Some(order);
            cfg.bus = bus;
            cfg.series = series;
            cmd_poles(&cfg, stdout, stderr)
        }
        Command::Snb {
            common,
            param,
            bracket,
            tol,
        } => {
            let mut cfg = RunConfig::new("snb", &common);
            cfg.param = Some(param);
            cfg.bracket = Some((bracket[0], bracket[1]));
            cfg.tol = Some(tol);
            cmd_snb(&cfg, stdout, stderr)
        }
        Command::Limits(c) => {
            let cfg = RunConfig::new("limits", &c);
            cmd_limits(&cfg, stdout, stderr)
        }
    }
}

fn status_code(s: FeasibilityStatus) -> i32 {
    match s {
        FeasibilityStatus::Feasible => EXIT_OK,
        FeasibilityStatus::Infeasible => EXIT_INFEASIBLE,
        FeasibilityStatus::Indeterminate => EXIT_INDETERMINATE,
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|c| format!("{c:.6}")).unwrap_or_else(|| "none".into())
}

pub fn cmd_solve(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    cfg.check()?;
    let net = cfg.network()?;
    let opts = cfg.options();
    let v = stability::solve_stable_with(&net, &opts, &RayonExecutor)?;
    let _ = writeln!(
        stderr,
        "{}: {} (z_c = {}, orders {:?})",
        net.name(),
        v.status.name(),
        fmt_opt(v.margin),
        v.evidence.orders
    );
    if let Some(note) = &v.evidence.note {
        let _ = writeln!(stderr, "note: {note}");
    }

    let mut sink = Sink {
        dir: cfg.out.clone(),
        stdout,
    };
    if cfg.wants("json") {
        sink.json("solve.json", &Report::new(cfg, SolveBody::new(net.name(), &v)).to_json())?;
    }
    if cfg.wants("csv") {
        let top = *v.evidence.orders.last().expect("schedule is non-empty");
        let sys = match cfg.precision {
            Some(d) => series::embed(&net, Precision::digits(d)),
            None => series::embed_for_order(&net, top),
        }
        .map_err(StabilityError::from)?;
        match sys.series(2 * top) {
            Ok(s) => sink.file("series.csv", |w| report::write_series_csv(w, &s))?,
            Err(e) => {
                let _ = writeln!(stderr, "series dump skipped: {e}");
            }
        }
        let nr = newton::solve_nr(
            &net,
            &Start::Flat,
            JacobianVariant::Standard,
            newton::DEFAULT_TOL,
            newton::DEFAULT_MAX_ITER,
        )
        .map_err(StabilityError::from)?;
        sink.file("nr_trace.csv", |w| report::write_nr_trace_csv(w, &nr.trajectory))?;
    }
    Ok(status_code(v.status))
}

pub fn cmd_sweep(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    cfg.check()?;
    let net = cfg.network()?;
    let param = parse_param(&net, cfg.param.as_deref().unwrap_or_default())?;
    let (from, to, step) = (cfg.from.unwrap_or(0.0), cfg.to.unwrap_or(0.0), cfg.step.unwrap_or(0.0));
    let records = stability::sweep(&net, &param, from, to, step, &cfg.options(), &RayonExecutor)?;
    let _ = writeln!(stderr, "{}: {} points of {}", net.name(), records.len(), param.description());

    let mut sink = Sink {
        dir: cfg.out.clone(),
        stdout,
    };
    if cfg.wants("json") {
        let body = SweepBody {
            network: net.name().to_string(),
            param: param.description(),
            records: records.iter().map(SweepRow::from).collect(),
        };
        sink.json("sweep.json", &Report::new(cfg, body).to_json())?;
    }
    if cfg.wants("csv") {
        let ids = net.non_slack_ids();
        sink.file("sweep.csv", |w| report::write_sweep_csv(w, &ids, &records))?;
    }
    Ok(EXIT_OK)
}

/// Series per bus read from a `bus,order,re,im` CSV.
fn read_series(path: &Path, prec: Precision) -> Result<BTreeMap<BusId, Vec<MpComplex>>, CliError> {
    let text = read(path)?;
    let bad = |line: usize, what: &str| usage(format!("{}:{line}: {what}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out: BTreeMap<BusId, Vec<MpComplex>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, &e.to_string()))?;
        if rec.len() != 4 {
            return Err(bad(line, "expected bus,order,re,im"));
        }
        let bus: BusId = rec[0].parse().map_err(|_| bad(line, "bad bus id"))?;
        let k: usize = rec[1].parse().map_err(|_| bad(line, "bad order"))?;
        let re = mp::parse_decimal(&rec[2], prec).ok_or_else(|| bad(line, "bad real part"))?;
        let im = mp::parse_decimal(&rec[3], prec).ok_or_else(|| bad(line, "bad imaginary part"))?;
        let v = out.entry(bus).or_default();
        if k != v.len() {
            return Err(bad(line, "coefficients must be listed in order from 0"));
        }
        v.push(MpComplex::new(re, im));
    }
    if out.is_empty() {
        return Err(usage(format!("{}: no coefficients", path.display())));
    }
    Ok(out)
}

pub fn cmd_poles(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    cfg.check()?;
    let m = cfg.order.unwrap_or(50);
    if m == 0 {
        return Err(usage("--order must be at least 1"));
    }
    let prec = cfg.precision.map(Precision::digits).unwrap_or_else(|| Precision::for_half_order(m));

    let (source, all): (String, Vec<(BusId, Vec<MpComplex>)>) = match &cfg.series {
        Some(path) => (path.display().to_string(), read_series(path, prec)?.into_iter().collect()),
        None => {
            let net = cfg.network()?;
            let sys = series::embed(&net, prec).map_err(StabilityError::from)?;
            let s = sys.series(2 * m).map_err(StabilityError::from)?;
            let v = s
                .buses()
                .iter()
                .filter(|b| b.kind != BusKind::Slack)
                .map(|b| (b.id, b.v.clone()))
                .collect();
            (net.name().to_string(), v)
        }
    };
    let picked: Vec<(BusId, Vec<MpComplex>)> = match cfg.bus {
        Some(id) => {
            let found: Vec<_> = all.into_iter().filter(|(b, _)| *b == id).collect();
            if found.is_empty() {
                return Err(usage(format!("no series for bus {id}")));
            }
            found
        }
        None => all,
    };
    for (id, c) in &picked {
        if c.len() < 2 * m + 1 {
            return Err(usage(format!("bus {id}: PA[{m}/{m}] needs {} coefficients, got {}", 2 * m + 1, c.len())));
        }
    }

    let results: Vec<Result<(BusId, ZeroPoleSet), PadeError>> = stability::Executor::map(
        &RayonExecutor,
        picked,
        |(id, c): (BusId, Vec<MpComplex>)| {
            let c: Vec<MpComplex> = c.iter().map(|x| x.with_precision(prec)).collect();
            pade::pade_or_lower(&c, m, prec).and_then(|pa| pade::roots(&pa)).map(|zp| (id, zp))
        },
    );
    let sets = results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(StabilityError::from)?;

    let buses: Vec<PoleBus> = sets
        .iter()
        .map(|(id, zp)| PoleBus {
            bus: *id,
            order: m,
            branch_point: zp.branch_point,
            zeros: zp.zeros.len(),
            poles: zp.poles.len(),
            spurious_pairs: zp.pole_spurious.iter().filter(|&&s| s).count(),
        })
        .collect();
    let bp = buses.iter().filter_map(|b| b.branch_point).reduce(f64::min);
    let _ = writeln!(stderr, "branch point: {}", fmt_opt(bp));

    let mut sink = Sink {
        dir: cfg.out.clone(),
        stdout,
    };
    if cfg.wants("json") {
        let body = PolesBody {
            source,
            order: m,
            digits: prec.decimal_digits(),
            branch_point: bp,
            buses,
        };
        sink.json("poles.json", &Report::new(cfg, body).to_json())?;
    }
    if cfg.wants("csv") {
        sink.file("zero_poles.csv", |w| report::write_zero_pole_csv(w, &sets))?;
    }
    if cfg.wants("svg") {
        for (id, zp) in &sets {
            let svg = report::zero_pole_svg(&format!("bus {id}, PA[{m}/{m}]"), zp);
            sink.file(&format!("poles_bus{id}.svg"), |w| w.write_all(svg.as_bytes()))?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_snb(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    cfg.check()?;
    let net = cfg.network()?;
    let param = parse_param(&net, cfg.param.as_deref().unwrap_or_default())?;
    let bracket = cfg.bracket.ok_or_else(|| usage("--bracket is required"))?;
    let tol = cfg.tol.unwrap_or(1e-3);
    let r = stability::find_snb(&net, &param, bracket, tol, &cfg.options(), &RayonExecutor)?;
    let _ = writeln!(
        stderr,
        "{}: saddle-node at {} = {:.6} (bracket [{:.6}, {:.6}])",
        net.name(),
        param.description(),
        r.value,
        r.lo,
        r.hi
    );
    let mut sink = Sink {
        dir: cfg.out.clone(),
        stdout,
    };
    if cfg.wants("json") {
        let body = SnbBody::new(net.name(), param.description(), &r);
        sink.json("snb.json", &Report::new(cfg, body).to_json())?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_limits(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    cfg.check()?;
    let net = cfg.network()?;
    let o = stability::enforce_q_limits(&net, &cfg.options(), &RayonExecutor)?;
    let _ = writeln!(stderr, "{}: {}", net.name(), o.status.name());
    for s in &o.switched {
        let _ = writeln!(
            stderr,
            "  bus {} pinned at {} = {} (requested {:.4}), |V| = {}",
            s.id,
            s.side.name(),
            s.limit,
            s.q_requested,
            fmt_opt(s.v_on_limit)
        );
    }
    let mut sink = Sink {
        dir: cfg.out.clone(),
        stdout,
    };
    if cfg.wants("json") {
        sink.json("limits.json", &Report::new(cfg, LimitsBody::new(net.name(), &o)).to_json())?;
    }
    Ok(match o.status {
        LimitStatus::NoViolation | LimitStatus::SwitchedStable => EXIT_OK,
        LimitStatus::LimitInducedBifurcation | LimitStatus::InfeasibleOnLimit => EXIT_INFEASIBLE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(fixture: &str) -> RunConfig {
        let c = Common::try_parse_from(["x", "--fixture", fixture]).unwrap();
        RunConfig::new("solve", &c)
    }

    impl Common {
        fn try_parse_from(args: [&str; 3]) -> Result<Self, clap::Error> {
            #[derive(Parser)]
            struct Wrap {
                #[command(flatten)]
                c: Common,
            }
            Wrap::try_parse_from(args).map(|w| w.c)
        }
    }

    #[test]
    fn overrides_apply_in_order() {
        let mut c = cfg("paper-7bus");
        c.set = vec!["bus6.p=1.12".into(), "bus2.qload=0.0518".into(), "bus5.v=1.05".into()];
        c.qmax = vec!["bus5=0.75".into()];
        let net = c.network().unwrap();
        assert_eq!(net.bus(6).unwrap().p_inject, 1.12);
        assert!((net.bus(2).unwrap().q_inject + 0.0518).abs() < 1e-15);
        assert_eq!(net.bus(5).unwrap().v_setpoint, 1.05);
        assert_eq!(net.bus(5).unwrap().q_max, Some(0.75));
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        for s in ["bus6.p", "bus6=1", "bus6.x=1", "busX.p=1", "bus6.p=abc", "bus6.p=inf"] {
            let mut c = cfg("paper-7bus");
            c.set = vec![s.into()];
            let e = c.network().unwrap_err();
            assert_eq!(e.exit_code(), EXIT_USAGE, "{s}: {e}");
        }
        let mut c = cfg("paper-7bus");
        c.set = vec!["bus99.p=1".into()];
        assert!(matches!(c.network(), Err(CliError::Network(NetworkError::UnknownBus(99)))));
    }

    #[test]
    fn params() {
        let net = builtin_network("paper-7bus").unwrap();
        assert_eq!(parse_param(&net, "bus6.p").unwrap(), ParameterRef::active(6));
        assert_eq!(parse_param(&net, "bus2.qload").unwrap(), ParameterRef::reactive_load(2));
        assert!(parse_param(&net, "bus6.v").is_err());
        assert!(parse_param(&net, "bus0.p").is_err());
    }

    #[test]
    fn precision_errors_exit_3() {
        let e = CliError::Stability(StabilityError::Series(SeriesError::PrecisionExhausted {
            order: 10,
            digits: 30,
            lost: 31.0,
        }));
        assert_eq!(e.exit_code(), EXIT_INDETERMINATE);
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
    }
}
