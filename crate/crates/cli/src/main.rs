use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ergodic_ifc::channel::parse_channel_json;
use ergodic_ifc::classify::{sidedness, Sidedness};
use ergodic_ifc::cmac::{region_boundary, sum_capacity_with, WeightPair};
use ergodic_ifc::figures::{
    hk_hybrid_row, ray_evs_row, sep_gap_row, DEFAULT_SEP_PAIRS,
};
use ergodic_ifc::ifc::{
    evs_sum_capacity, hk_optimize, interference_free_outer_bound, separable_one_sided_baseline,
    tdm_baseline, um_sum_capacity, us_separable_sum_rate, us_sum_capacity_with, uw1_sum_capacity,
    uw2_upper_bound,
};
use ergodic_ifc::{
    classify_channel, Error, FadingProcess, PowerBudget, PowerPolicy, Receiver, SolverOptions,
    Subclass,
};

#[derive(Parser)]
#[command(name = "ergodic-ifc", version, about = "Sum-capacity tools for ergodic fading interference channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label the states and sub-class of a channel (JSON).
    Classify {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sum rate of one or more schemes (CSV, one row per scheme).
    Sumcap {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "auto")]
        scheme: Vec<Scheme>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Figure datasets (CSV).
    Figure(FigureArgs),
    /// Weighted sum-rate boundary of the compound-MAC region (CSV).
    Region {
        #[arg(long)]
        channel: PathBuf,
        /// Relative weights mu1 in (0, 1), with mu2 = 1 - mu1; `a:b:step` or a comma list.
        #[arg(long, default_value = "0.1:0.9:0.1")]
        mu_grid: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FigureArgs {
    #[arg(value_enum)]
    figure: Figure,
    /// `a:b:step` or a comma list.
    #[arg(long, default_value = "1:10:0.5")]
    sigma2_grid: String,
    #[arg(long, default_value = "0:1:0.1")]
    p1_grid: String,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Symmetric budget of the uniformly strong pairs in `sep-gap`.
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    RayEvs,
    SepGap,
    HkHybrid,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    Auto,
    Cmac,
    Evs,
    Us,
    Uw1,
    Um,
    #[value(name = "uw2_bound")]
    Uw2Bound,
    Hk,
    Separable,
    Tdm,
    Outer,
}

impl Scheme {
    fn name(self) -> &'static str {
        match self {
            Scheme::Auto => "auto",
            Scheme::Cmac => "cmac",
            Scheme::Evs => "evs",
            Scheme::Us => "us",
            Scheme::Uw1 => "uw1",
            Scheme::Um => "um",
            Scheme::Uw2Bound => "uw2_bound",
            Scheme::Hk => "hk",
            Scheme::Separable => "separable",
            Scheme::Tdm => "tdm",
            Scheme::Outer => "outer",
        }
    }

    fn for_subclass(subclass: Subclass) -> Scheme {
        match subclass {
            Subclass::Evs | Subclass::Us | Subclass::Uw | Subclass::Hybrid => Scheme::Cmac,
            Subclass::Um => Scheme::Um,
            Subclass::OneSidedEvs => Scheme::Evs,
            Subclass::OneSidedUs => Scheme::Us,
            Subclass::OneSidedUw => Scheme::Uw1,
            Subclass::OneSidedHybrid => Scheme::Hk,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Io(PathBuf, io::Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_input() => 2,
            CliError::Lib(e) if e.is_precondition() => 3,
            CliError::Lib(_) => 1,
            CliError::Io(..) | CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

/// Six significant digits in fixed notation.
fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let mut magnitude = x.abs().log10().floor() as i32;
    // rounding can carry into the next decade, e.g. 0.99999999
    if format!("{:.*e}", 5, x.abs()).ends_with(&format!("e{}", magnitude + 1)) {
        magnitude += 1;
    }
    let decimals = (5 - magnitude).clamp(0, 15) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt6(v)).collect::<Vec<_>>().join(";")
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid grid {spec:?}: expected a:b:step or a comma list"));
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [a, b, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| a + i as f64 * step).collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage(format!("grid {spec:?} must be sorted ascending")));
    }
    Ok(values)
}

fn load_channel(path: &Path) -> Result<(FadingProcess, PowerBudget), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    Ok(parse_channel_json(&text)?)
}

/// Output sink that keeps what was written even when a later row fails.
struct Output {
    path: Option<PathBuf>,
    text: String,
}

impl Output {
    fn new(path: Option<PathBuf>) -> Self {
        Output {
            path,
            text: String::new(),
        }
    }

    fn line(&mut self, line: &str) {
        self.text.push_str(line);
        self.text.push('\n');
    }

    fn flush(&self) -> Result<(), CliError> {
        match &self.path {
            Some(p) => fs::write(p, &self.text).map_err(|e| CliError::Io(p.clone(), e)),
            None => {
                let mut out = io::stdout().lock();
                out.write_all(self.text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e))
            }
        }
    }
}

struct SchemeRow {
    scheme: String,
    value: f64,
    case: String,
    policy: Option<PowerPolicy>,
    alpha: Vec<f64>,
}

impl SchemeRow {
    fn csv(&self) -> String {
        let (p1, p2) = match &self.policy {
            Some(p) => (join(&p.p1), join(&p.p2)),
            None => (String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{}",
            self.scheme,
            fmt6(self.value),
            self.case,
            p1,
            p2,
            join(&self.alpha)
        )
    }
}

/// Runs a one-sided scheme written for interference at receiver 1, swapping
/// the users when the channel is interfered at receiver 2 instead.
fn with_rx1_orientation<F>(
    process: &FadingProcess,
    budget: &PowerBudget,
    f: F,
) -> Result<(f64, PowerPolicy, Vec<f64>, String), Error>
where
    F: Fn(&FadingProcess, &PowerBudget) -> Result<(f64, PowerPolicy, Vec<f64>, String), Error>,
{
    if sidedness(process) == Sidedness::OneSidedAtRx2 {
        let (v, p, a, c) = f(&process.swap_users(), &budget.swapped())?;
        Ok((v, p.swapped(), a, c))
    } else {
        f(process, budget)
    }
}

fn run_scheme(
    scheme: Scheme,
    process: &FadingProcess,
    budget: &PowerBudget,
    options: &SolverOptions,
) -> Result<SchemeRow, CliError> {
    let resolved = if scheme == Scheme::Auto {
        Scheme::for_subclass(classify_channel(process, budget)?.subclass)
    } else {
        scheme
    };
    let name = if scheme == Scheme::Auto {
        format!("auto:{}", resolved.name())
    } else {
        resolved.name().to_string()
    };
    let row = |value, case: String, policy, alpha| SchemeRow {
        scheme: name.clone(),
        value,
        case,
        policy,
        alpha,
    };
    Ok(match resolved {
        Scheme::Auto => unreachable!("auto resolves to a concrete scheme"),
        Scheme::Cmac => {
            let r = sum_capacity_with(process, budget, options)?;
            row(r.value, r.case.to_string(), Some(r.policy), vec![])
        }
        Scheme::Evs => {
            let r = evs_sum_capacity(process, budget)?;
            row(r.value, String::new(), Some(r.policy), vec![])
        }
        Scheme::Us => {
            let r = us_sum_capacity_with(process, budget, options)?;
            row(r.value, r.case.to_string(), Some(r.policy), vec![])
        }
        Scheme::Uw1 => {
            let side = match sidedness(process) {
                Sidedness::OneSidedAtRx2 => Receiver::Rx2,
                _ => Receiver::Rx1,
            };
            let r = uw1_sum_capacity(process, budget, side)?;
            check_converged(r.converged, r.iterations)?;
            row(r.value, String::new(), Some(r.policy), vec![])
        }
        Scheme::Um => {
            let r = um_sum_capacity(process, budget)?;
            check_converged(r.converged, r.iterations)?;
            row(r.value, String::new(), Some(r.policy), vec![])
        }
        Scheme::Uw2Bound => {
            let r = uw2_upper_bound(process, budget)?;
            check_converged(r.converged, r.iterations)?;
            row(r.value, String::new(), Some(r.policy), vec![])
        }
        Scheme::Hk => {
            let (v, p, a, c) = with_rx1_orientation(process, budget, |pr, b| {
                let r = hk_optimize(pr, b)?;
                Ok((r.value, r.allocation.policy, r.allocation.alpha, r.case.name().to_string()))
            })?;
            row(v, c, Some(p), a)
        }
        Scheme::Separable => {
            if sidedness(process) == Sidedness::TwoSided {
                let r = us_separable_sum_rate(process, budget)?;
                check_converged(r.converged, r.iterations)?;
                row(r.value, String::new(), Some(r.policy), vec![])
            } else {
                let (v, p, a, c) = with_rx1_orientation(process, budget, |pr, b| {
                    let r = separable_one_sided_baseline(pr, b)?;
                    Ok((r.value, r.allocation.policy, r.allocation.alpha, String::new()))
                })?;
                row(v, c, Some(p), a)
            }
        }
        Scheme::Tdm => row(tdm_baseline(process, budget)?, String::new(), None, vec![]),
        Scheme::Outer => row(
            interference_free_outer_bound(process, budget)?,
            String::new(),
            None,
            vec![],
        ),
    })
}

fn check_converged(converged: bool, iterations: usize) -> Result<(), Error> {
    if converged {
        Ok(())
    } else {
        Err(Error::NonConvergence {
            what: "power allocation",
            iterations,
        })
    }
}

/// Writes rows until one fails; the failure is recorded as a marker line.
fn write_rows<T, F>(out: &mut Output, grid: &[T], label: impl Fn(&T) -> String, mut row: F) -> Result<(), CliError>
where
    F: FnMut(&T) -> Result<String, CliError>,
{
    for point in grid {
        match row(point) {
            Ok(line) => out.line(&line),
            Err(e) => {
                out.line(&format!("# failed at {}: {e}", label(point)));
                out.flush()?;
                return Err(e);
            }
        }
    }
    out.flush()
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

fn run_figure(args: FigureArgs) -> Result<(), CliError> {
    let mut out = Output::new(args.out.clone());
    match args.figure {
        Figure::RayEvs => {
            if args.samples == 0 {
                return Err(Error::ZeroSamples.into());
            }
            let grid = parse_grid(&args.sigma2_grid)?;
            out.line("sigma2,p_max,feasible,evs_sum_capacity,tdm");
            write_rows(&mut out, &grid, |s| format!("sigma2={s}"), |&s| {
                let r = ray_evs_row(s, args.samples, args.seed)?;
                Ok(format!(
                    "{},{},{},{},{}",
                    fmt6(r.sigma2),
                    fmt6(r.p_max),
                    r.feasible,
                    fmt6(r.evs_sum_capacity),
                    fmt6(r.tdm)
                ))
            })
        }
        Figure::SepGap => {
            let grid = parse_grid(&args.p1_grid)?;
            let points: Vec<_> = DEFAULT_SEP_PAIRS
                .iter()
                .flat_map(|pair| grid.iter().map(move |&p1| (*pair, p1)))
                .collect();
            out.line("kind,h1,h2,p1,budget,feasible,joint,separable,gap");
            write_rows(
                &mut out,
                &points,
                |(pair, p1)| format!("{} ({},{}) p1={p1}", pair.kind.name(), pair.h1, pair.h2),
                |(pair, p1)| {
                    let r = sep_gap_row(pair, *p1, args.budget)?;
                    Ok(format!(
                        "{},{},{},{},{},{},{},{},{}",
                        pair.kind.name(),
                        fmt6(pair.h1),
                        fmt6(pair.h2),
                        fmt6(r.p1),
                        fmt6(r.budget),
                        r.feasible,
                        fmt6(r.joint),
                        fmt6(r.separable),
                        fmt6(r.joint - r.separable)
                    ))
                },
            )
        }
        Figure::HkHybrid => {
            let grid = parse_grid(&args.p1_grid)?;
            out.line("p1,budget,R_HK,R_Ind,R_outer,alpha_weak,alpha_strong");
            write_rows(&mut out, &grid, |p| format!("p1={p}"), |&p1| {
                let r = hk_hybrid_row((0.5, 2.0), p1)?;
                Ok(format!(
                    "{},{},{},{},{},{},{}",
                    fmt6(r.p1),
                    fmt6(r.budget),
                    fmt6(r.r_hk),
                    fmt6(r.r_ind),
                    fmt6(r.r_outer),
                    opt6(r.alpha_weak),
                    opt6(r.alpha_strong)
                ))
            })
        }
    }
}

fn options(tol: f64) -> Result<SolverOptions, CliError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidTolerance(tol).into());
    }
    Ok(SolverOptions::with_tol(tol))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Classify { channel, out } => {
            let (process, budget) = load_channel(&channel)?;
            let report = classify_channel(&process, &budget)?;
            let mut o = Output::new(out);
            o.line(&serde_json::to_string_pretty(&report).expect("report serializes"));
            o.flush()
        }
        Command::Sumcap {
            channel,
            scheme,
            tol,
            out,
        } => {
            let opts = options(tol)?;
            let (process, budget) = load_channel(&channel)?;
            let mut o = Output::new(out);
            o.line("scheme,value_bits,case_label,p1,p2,alpha");
            write_rows(&mut o, &scheme, |s| format!("scheme={}", s.name()), |&s| {
                Ok(run_scheme(s, &process, &budget, &opts)?.csv())
            })
        }
        Command::Figure(args) => run_figure(args),
        Command::Region {
            channel,
            mu_grid,
            tol,
            out,
        } => {
            let opts = options(tol)?;
            let (process, budget) = load_channel(&channel)?;
            let grid = parse_grid(&mu_grid)?;
            if grid.iter().any(|&m| !(m > 0.0 && m < 1.0)) {
                return Err(CliError::Usage("mu grid values must lie in (0, 1)".into()));
            }
            let weights: Vec<WeightPair> = grid
                .iter()
                .map(|&m| WeightPair::new(m, 1.0 - m))
                .collect::<Result<_, _>>()?;
            let points = region_boundary(&process, &budget, &weights, &opts)?;
            let mut o = Output::new(out);
            o.line("mu1,mu2,r1,r2,weighted_value");
            for p in &points {
                o.line(&format!(
                    "{},{},{},{},{}",
                    fmt6(p.mu.mu1),
                    fmt6(p.mu.mu2),
                    fmt6(p.r1),
                    fmt6(p.r2),
                    fmt6(p.value)
                ));
            }
            o.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
