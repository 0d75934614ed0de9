use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bv2geo::config::{InitKind, RunConfig};
use bv2geo::io::{self, CurveFormat, SvgStyle};
use bv2geo::matching::{self, make_matcher, MatchKind};
use bv2geo::optimizer;
use bv2geo::path::{self, VelocityConvention};
use bv2geo::pipeline;
use bv2geo::{Error, KernelParams, MetricFamily};

/// Geodesics between closed planar curves.
#[derive(Parser)]
#[command(name = "bv2geo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a geodesic from a source curve to a target curve.
    Geodesic {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Prefix for the .homotopy.json, .trace.csv and .svg outputs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the path energy of a homotopy file, plus the matching term if a target is given.
    Energy {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        homotopy: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Compare the analytic objective gradient with finite differences.
    CheckGrad {
        #[command(flatten)]
        run: RunArgs,
        /// Homotopy to check at; a seeded random one is used if omitted.
        #[arg(long)]
        homotopy: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        coords: usize,
    },
    /// Resample a curve at constant speed.
    Resample {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the matching term between two curves.
    Match {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_parser = parse_pair)]
        kernel: Option<(f64, f64)>,
        #[arg(long, value_enum)]
        matching: Option<MatchArg>,
    },
    /// Render a homotopy file as SVG.
    ExportSvg {
        #[arg(long)]
        homotopy: PathBuf,
        /// Curve drawn as a dashed outline.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML config; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    #[arg(long, value_parser = parse_triple)]
    weights: Option<[f64; 3]>,
    /// Smoothing used by `energy` and `check-grad`.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_parser = parse_list)]
    eps_schedule: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_pair)]
    kernel: Option<(f64, f64)>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long, value_enum)]
    matching: Option<MatchArg>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paper_literal_velocity: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MetricArg {
    Bv2,
    H2,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum InitArg {
    Constant,
    Linear,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MatchArg {
    Kernel,
    Currents,
}

impl From<MatchArg> for MatchKind {
    fn from(m: MatchArg) -> Self {
        match m {
            MatchArg::Kernel => MatchKind::Kernel,
            MatchArg::Currents => MatchKind::Currents,
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect()
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_list(s)?.try_into().map_err(|v: Vec<f64>| format!("expected 3 values, got {}", v.len()))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        &[a, b] => Ok((a, b)),
        v => Err(format!("expected 2 values, got {}", v.len())),
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let v: Vec<usize> = s.split(',').map(|x| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    match v.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(format!("expected N,n, got {s:?}")),
    }
}

impl RunArgs {
    fn resolve(&self) -> bv2geo::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.metric {
            cfg.metric.family = match m {
                MetricArg::Bv2 => MetricFamily::Bv2,
                MetricArg::H2 => MetricFamily::H2,
            };
        }
        if let Some(w) = self.weights {
            cfg.metric.weights = w;
        }
        if let Some(e) = self.eps {
            cfg.metric.eps = e;
        }
        if let Some(s) = &self.eps_schedule {
            cfg.optimizer.eps_schedule = s.clone();
        }
        if let Some((big_n, n)) = self.grid {
            cfg.slices = big_n;
            cfg.nodes = n;
        }
        if let Some((sigma, delta)) = self.kernel {
            cfg.kernel = KernelParams { sigma, delta };
        }
        if let Some(i) = self.init {
            cfg.init = match i {
                InitArg::Constant => InitKind::Constant,
                InitArg::Linear => InitKind::Linear,
            };
        }
        if let Some(m) = self.matching {
            cfg.matching = m.into();
        }
        if let Some(m) = self.max_iters {
            cfg.optimizer.max_iters = m;
        }
        if let Some(s) = self.seed {
            cfg.optimizer.seed = s;
        }
        if self.paper_literal_velocity {
            cfg.metric.velocity = VelocityConvention::PaperLiteral;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> bv2geo::Result<ExitCode> {
    match cli.command {
        Command::Geodesic { run, source, target, out } => {
            let mut cfg = run.resolve()?;
            cfg.source = source.or(cfg.source);
            cfg.target = target.or(cfg.target);
            cfg.out = out.or(cfg.out);
            for p in [&cfg.source, &cfg.target].into_iter().flatten() {
                if !p.exists() {
                    return Err(Error::Io(std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!("{}: no such file", p.display()),
                    )));
                }
            }
            let outcome = pipeline::run_geodesic(&cfg)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for s in &outcome.report.stages {
                println!(
                    "eps={:e} iterations={} termination={} objective={:.6e} energy={:.6e} match={:.6e}",
                    s.eps,
                    s.iterations,
                    s.termination.as_str(),
                    s.objective.total,
                    s.objective.energy,
                    s.objective.matching
                );
            }
            let a = &outcome.artifacts;
            println!("wrote {} {} {}", a.homotopy.display(), a.trace.display(), a.svg.display());
        }
        Command::Energy { run, homotopy, target } => {
            let cfg = run.resolve()?;
            let h = io::load_homotopy(&homotopy)?;
            let energy = path::path_energy(&h, &cfg.metric)?;
            println!("energy {energy:.17e}");
            if let Some(t) = target {
                let t = io::load_curve(&t, CurveFormat::Auto)?;
                let m = make_matcher(cfg.matching, &t, cfg.kernel)?;
                let parts = optimizer::objective(&h, &cfg.metric, m.as_ref())?;
                println!("match {:.17e}", parts.matching);
                println!("objective {:.17e}", parts.total);
            }
        }
        Command::CheckGrad { run, homotopy, target, coords } => {
            let mut cfg = run.resolve()?;
            if run.eps.is_none() {
                cfg.metric.eps = 1e-2;
            }
            let (h, t) = match homotopy {
                Some(p) => {
                    let h = io::load_homotopy(&p)?;
                    let t = match target {
                        Some(p) => io::load_curve(&p, CurveFormat::Auto)?,
                        None => h.last().clone(),
                    };
                    (h, t)
                }
                None => bv2geo::fixtures::random_problem(cfg.optimizer.seed, 5, 24),
            };
            let m = make_matcher(cfg.matching, &t, cfg.kernel)?;
            let check = optimizer::check_gradient(&h, &cfg.metric, m.as_ref(), coords, cfg.optimizer.seed)?;
            println!("max relative error {:.3e} over {} coordinates", check.max_rel_error, check.samples);
            if check.max_rel_error > 1e-5 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Resample { source, nodes, out } => {
            let c = io::load_curve(&source, CurveFormat::Auto)?;
            io::save_curve(&c.constant_speed_resample(nodes)?, &out, CurveFormat::Auto)?;
        }
        Command::Match { source, target, kernel, matching: kind } => {
            let a = io::load_curve(&source, CurveFormat::Auto)?;
            let b = io::load_curve(&target, CurveFormat::Auto)?;
            for w in pipeline::input_warnings(&a, &b) {
                eprintln!("warning: {w}");
            }
            let params = match kernel {
                Some((sigma, delta)) => KernelParams::new(sigma, delta)?,
                None => KernelParams::default(),
            };
            let value = match kind.map(MatchKind::from).unwrap_or_default() {
                MatchKind::Kernel => matching::match_distance(&a, &b, &params)?,
                MatchKind::Currents => matching::currents_distance_sq(&a, &b, &params)?,
            };
            println!("{value:.17e}");
        }
        Command::ExportSvg { homotopy, target, out } => {
            let h = io::load_homotopy(&homotopy)?;
            let t = target.map(|p| io::load_curve(&p, CurveFormat::Auto)).transpose()?;
            std::fs::write(out, io::render_svg(&h, t.as_ref(), &SvgStyle::default()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::LineSearchFailed => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
