use clap::{Args, Parser, Subcommand, ValueEnum};
use spectral_factors::estimator::{BinCount, GridMode, ModelAspect};
use spectral_factors::harness::{self, ExperimentSpec, Method};
use spectral_factors::io::{self, InputKind, MissingPolicy};
use spectral_factors::model::{self, ModelParams};
use spectral_factors::spectra::{empirical_density, BinGrid, ResidualSpectra};
use spectral_factors::synth::SyntheticConfig;
use spectral_factors::{estimate, Error, EstimatorConfig, SearchGrid};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable holding the default worker thread count.
const THREADS_ENV: &str = "SDFACTOR_THREADS";

#[derive(Parser)]
#[command(name = "sdfactor", version, about = "Spectral-distance factor model estimation")]
struct Cli {
    /// Worker threads (default: $SDFACTOR_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the factor count and residual AR(1) coefficient of a CSV panel.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Include the full divergence surface in JSON output.
        #[arg(long)]
        surface: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Rolling-window estimates.
    Roll {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, default_value_t = io::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo study on synthetic panels.
    Mc {
        #[command(flatten)]
        synth: SynthArgs,
        /// Noise levels 1/SNR.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5")]
        inv_snr: Vec<f64>,
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Weak-factor sweep over the weak-factor standard deviation.
    Weak {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, default_value_t = 0.25)]
        inv_snr: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,1")]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "3,4")]
        weak_counts: Vec<usize>,
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Spectral distance between heterogeneous and homogeneous AR(1) panels.
    Meanfield {
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 600)]
        t: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.35,0.5,0.65")]
        candidates: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Empirical, model and Marchenko-Pastur densities on a shared grid.
    Density {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Components to remove (estimated when omitted).
        #[arg(long)]
        p: Option<usize>,
        /// AR(1) coefficient of the model (estimated when omitted).
        #[arg(long)]
        b: Option<f64>,
        /// Output CSV path (stdout when omitted).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Dates-by-series CSV with a header row.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Price)]
    input_kind: Kind,
    #[arg(long, value_enum, default_value_t = Missing::DropSeries)]
    missing: Missing,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Price,
    Return,
}

#[derive(Clone, Copy, ValueEnum)]
enum Missing {
    DropSeries,
    DropDates,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    Common,
    PerP,
}

#[derive(Clone, Copy, ValueEnum)]
enum Aspect {
    Full,
    Reduced,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, default_value_t = 20)]
    p_max: usize,
    #[arg(long, default_value_t = 0.95)]
    b_max: f64,
    #[arg(long, default_value_t = 0.01)]
    b_step: f64,
    /// Histogram bins, or `auto`.
    #[arg(long, default_value = "auto")]
    bins: String,
    /// Imaginary offset of the model density.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Regularization mass for empty bins.
    #[arg(long)]
    js_epsilon: Option<f64>,
    #[arg(long, value_enum)]
    grid: Option<Grid>,
    #[arg(long, value_enum)]
    aspect: Option<Aspect>,
    /// Relative slack of the smallest-p rule (0 = plain argmin).
    #[arg(long)]
    parsimony: Option<f64>,
    /// Absolute ceiling on the parsimony slack.
    #[arg(long)]
    parsimony_cap: Option<f64>,
    /// Refine b on a ten times finer step around the optimum.
    #[arg(long)]
    refine: bool,
    /// Skip re-standardizing residual rows.
    #[arg(long)]
    no_restandardize: bool,
    /// Per-p 100-bin grids, midpoint model masses and plain argmin.
    #[arg(long)]
    literal: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Defaults to N.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 4)]
    p: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Neighbour range (defaults to N/10 when beta is nonzero).
    #[arg(long)]
    j: Option<usize>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, default_value_t = 50)]
    replications: usize,
    /// Replication r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "SD,BIC3,ED,ER")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 20)]
    k_max: usize,
    /// Include wall-clock timings (breaks byte-identical reruns).
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output path (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl EstimatorArgs {
    fn search(&self) -> Result<SearchGrid, Error> {
        SearchGrid::new(self.p_max, self.b_max, self.b_step)
    }

    fn config(&self) -> Result<EstimatorConfig, Error> {
        let mut c = if self.literal {
            EstimatorConfig::literal()
        } else {
            EstimatorConfig::default()
        };
        c.bins = match self.bins.as_str() {
            "auto" if !self.literal => BinCount::Auto,
            "auto" => c.bins,
            s => BinCount::Fixed(s.parse().map_err(|_| Error::InvalidGrid(format!("bins `{s}`")))?),
        };
        if let Some(e) = self.epsilon {
            c.model_epsilon = e;
        }
        if let Some(e) = self.js_epsilon {
            c.js_epsilon = e;
        }
        if let Some(g) = self.grid {
            c.grid_mode = match g {
                Grid::Common => GridMode::Common,
                Grid::PerP => GridMode::PerP,
            };
        }
        if let Some(a) = self.aspect {
            c.aspect = match a {
                Aspect::Full => ModelAspect::Full,
                Aspect::Reduced => ModelAspect::Reduced,
            };
        }
        if let Some(t) = self.parsimony {
            c.parsimony = t;
        }
        if let Some(t) = self.parsimony_cap {
            c.parsimony_cap = t;
        }
        c.refine_b = self.refine;
        c.restandardize = !self.no_restandardize;
        Ok(c)
    }
}

impl InputArgs {
    fn load(&self) -> Result<io::DatedPanel, Error> {
        let kind = match self.input_kind {
            Kind::Price => InputKind::Price,
            Kind::Return => InputKind::Return,
        };
        let policy = match self.missing {
            Missing::DropSeries => MissingPolicy::DropSeries,
            Missing::DropDates => MissingPolicy::DropDates,
        };
        io::load_path(&self.input, kind, policy)
    }
}

impl SynthArgs {
    fn base(&self, inv_snr: f64) -> SyntheticConfig {
        let c = SyntheticConfig::new(self.n, self.t.unwrap_or(self.n), self.p, inv_snr)
            .with_correlation(self.rho, self.beta);
        match self.j {
            Some(j) => c.with_neighbours(j),
            None => c,
        }
    }
}

impl StudyArgs {
    fn spec(&self, configs: Vec<SyntheticConfig>, est: &EstimatorArgs) -> Result<ExperimentSpec, Error> {
        let methods = self
            .methods
            .iter()
            .map(|m| Method::parse(m).ok_or_else(|| Error::Shape(format!("unknown method `{m}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut spec = ExperimentSpec::new(configs, self.replications, methods).with_seed_base(self.seed);
        spec.search = est.search()?;
        spec.estimator = est.config()?;
        spec.k_max = self.k_max;
        Ok(spec)
    }
}

fn emit(path: Option<&PathBuf>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn json_bytes(v: &impl serde::Serialize) -> Result<Vec<u8>, Error> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn report_out(report: &harness::ExperimentReport, study: &StudyArgs, out: &OutputArgs) -> Result<(), Error> {
    let bytes = match out.format {
        Format::Json => json_bytes(&report.to_json(study.timings))?,
        Format::Csv => {
            let mut b = Vec::new();
            report.write_csv(&mut b, study.timings)?;
            b
        }
    };
    emit(out.output.as_ref(), &bytes)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Estimate { input, est, surface, out } => {
            let data = input.load()?;
            let res = estimate(&data.panel, &est.search()?, &est.config()?)?;
            let bytes = match out.format {
                Format::Json => json_bytes(&io::estimation_json(&res, surface))?,
                Format::Csv => format!(
                    "p_hat,b_hat,min_divergence,explained_variance,variance_per_factor\n{},{},{},{},{}\n",
                    res.p_hat,
                    io::fmt12(res.b_hat),
                    io::fmt12(res.min_divergence),
                    io::fmt12(res.explained_variance_at_p_hat),
                    io::fmt12(res.variance_per_factor)
                )
                .into_bytes(),
            };
            emit(out.output.as_ref(), &bytes)
        }
        Command::Roll { input, est, window, step, out } => {
            let data = input.load()?;
            let series = io::rolling_estimate(
                &data.panel,
                Some(&data.dates),
                window,
                step,
                &est.search()?,
                &est.config()?,
            )?;
            let bytes = match out.format {
                Format::Json => json_bytes(&series)?,
                Format::Csv => {
                    let mut b = Vec::new();
                    series.write_csv(&mut b)?;
                    b
                }
            };
            emit(out.output.as_ref(), &bytes)
        }
        Command::Mc { synth, inv_snr, study, est, out } => {
            let configs = inv_snr.iter().map(|&v| synth.base(v)).collect();
            let report = harness::run_experiment(&study.spec(configs, &est)?)?;
            report_out(&report, &study, &out)
        }
        Command::Weak { synth, inv_snr, sigma, weak_counts, study, est, out } => {
            let spec = study.spec(Vec::new(), &est)?;
            let report = harness::run_weak_factor_sweep(&synth.base(inv_snr), &sigma, &weak_counts, &spec)?;
            report_out(&report, &study, &out)
        }
        Command::Meanfield { n, t, candidates, seed, out } => {
            let points = harness::run_meanfield_demo(n, t, &candidates, seed)?;
            let bytes = match out.format {
                Format::Json => json_bytes(&points)?,
                Format::Csv => {
                    let mut s = String::from("b_bar,js\n");
                    for p in &points {
                        s.push_str(&format!("{},{}\n", p.b_bar, io::fmt12(p.js)));
                    }
                    s.into_bytes()
                }
            };
            emit(out.output.as_ref(), &bytes)
        }
        Command::Density { input, est, p, b, output } => {
            let data = input.load()?;
            let panel = data.panel.normalize()?;
            let search = est.search()?;
            let config = est.config()?;
            let (p, b) = match (p, b) {
                (Some(p), Some(b)) => (p, b),
                (p0, b0) => {
                    let r = estimate(&panel, &search, &config)?;
                    (p0.unwrap_or(r.p_hat), b0.unwrap_or(r.b_hat))
                }
            };
            let spectra = ResidualSpectra::compute(&panel, search.p_max().max(p), config.restandardize)?;
            let eig = &spectra.spectra[p];
            let bins = config.bins.resolve(panel.n());
            let grid = BinGrid::for_eigenvalues(&eig[..eig.len() - p], bins)?;
            let c = (panel.n() as f64 / panel.t() as f64).min(1.0);
            let real = empirical_density(eig, &grid, p)?;
            let mdl = model::model_density_with(&ModelParams::new(b, c)?, &grid, config.model_epsilon, &config.binning)?;
            let mp = model::mp_density_with(c, &grid, &config.binning)?;
            let mut bytes = Vec::new();
            io::write_densities(&real, &mdl, &mp, &mut bytes)?;
            emit(output.as_ref(), &bytes)
        }
    }
}

fn fail(kind: &str, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{body}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string().trim().to_string());
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("threads", e.to_string());
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
