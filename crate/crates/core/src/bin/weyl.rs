use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use weyl_core::experiment::{self, ExperimentConfig, EXIT_LEMMA_FAILURE};

/// Numerical experiments on Weyl sums, complete sums and Cantor-type sets.
#[derive(Parser)]
#[command(name = "weyl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// |T_{2,p}| = sqrt(p) for every quadratic with nonzero leading term
    GaussCheck(Flags),
    /// sum over n <= p^d of e(a n^d / p^d) against p^{d-1}
    MonomialCheck(Flags),
    /// complete sum of a polynomial against (deg - 1) sqrt(p); --f c0,c1,...
    WeilCheck(Flags),
    /// full-space moment of |T_{d,p}|^{2 nu}
    Moments(Flags),
    /// moments over random boxes against the predicted main term
    BoxMoments(Flags),
    /// list the coefficient vectors with |T| >= gamma sqrt(p)
    EnumerateLp(Flags),
    /// orbit points of lambda -> (a_i lambda^i) inside boxes; --a a1,a2,...
    OrbitCount(Flags),
    /// whether every box of a given side meets the large-value set
    BoxDensity(Flags),
    /// lower bound for Weyl sums near large-value rationals
    Amplify(Flags),
    /// lower bound for monomial sums near a/p^d
    AmplifyMono(Flags),
    /// |S(x; N)| along a checkpoint grid; --x a/q,... or decimals
    WeylTrace(Flags),
    /// dyadic max of |S| / (N^{1/2} (log N)^{3/2}) over seeded points
    MrScan(Flags),
    /// growth exponent estimate from a dyadic trace
    SigmaScan(Flags),
    /// checkpoints where |S(x; N)| >= N^alpha
    ExceptionalScan(Flags),
    /// Monte Carlo measure of {x : |S(x; i)| >= i^alpha}
    MeasureEstimate(Flags),
    /// nested boxes around large-value rationals, with certificates
    CantorBuild(Flags),
    /// dimension formula against box counting for a geometric schedule
    CantorDim(Flags),
    /// lay out one (a, b, c)-pattern in the unit cube
    PatternDemo(Flags),
    /// exact discrepancy of the phases {x_1 n^{m_1} + ... }
    Discrepancy(Flags),
    /// |S| <= 2 pi D*_N on given or seeded (x, N)
    KoksmaCheck(Flags),
    /// checkpoints where D_N >= N^alpha
    DiscrepancyScan(Flags),
    /// run from a key = value file whose `command` names the subcommand
    Run {
        #[arg(long)]
        config: PathBuf,
        /// overrides `out` from the file
        #[arg(long)]
        out: Option<PathBuf>,
        /// overrides `threads` from the file
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// Parameters shared by every subcommand. Each subcommand rejects the ones
/// it does not use.
#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    /// default 1.0
    #[arg(long)]
    gamma: Option<String>,
    /// rational, e.g. 9/2
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "N-max")]
    n_max: Option<String>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    /// comma list
    #[arg(long)]
    primes: Option<String>,
    /// default 0
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// largest complete-sum table, default 10^7 entries
    #[arg(long)]
    cap: Option<String>,
    /// output directory, default ./weyl-out
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    side: Option<String>,
    #[arg(long)]
    starts: Option<String>,
    #[arg(long)]
    boxes: Option<String>,
    /// table cache file, created when missing
    #[arg(long)]
    cache: Option<String>,
    #[arg(long)]
    count: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// linear or dyadic
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    i: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    cells: Option<String>,
    /// corner, centered or random
    #[arg(long)]
    placement: Option<String>,
    #[arg(long)]
    scales: Option<String>,
    #[arg(long = "include-zero")]
    include_zero: Option<String>,
}

impl Flags {
    fn into_map(self) -> BTreeMap<String, String> {
        let pairs = [
            ("d", self.d),
            ("p", self.p),
            ("nu", self.nu),
            ("gamma", self.gamma),
            ("tau", self.tau),
            ("epsilon", self.epsilon),
            ("alpha", self.alpha),
            ("N-max", self.n_max),
            ("N", self.n),
            ("depth", self.depth),
            ("primes", self.primes),
            ("seed", self.seed),
            ("threads", self.threads),
            ("cap", self.cap),
            ("out", self.out),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("f", self.f),
            ("x", self.x),
            ("m", self.m),
            ("side", self.side),
            ("starts", self.starts),
            ("boxes", self.boxes),
            ("cache", self.cache),
            ("count", self.count),
            ("delta", self.delta),
            ("grid", self.grid),
            ("samples", self.samples),
            ("i", self.i),
            ("r", self.r),
            ("cells", self.cells),
            ("placement", self.placement),
            ("scales", self.scales),
            ("include-zero", self.include_zero),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    }
}

impl Command {
    fn into_config(self) -> anyhow::Result<ExperimentConfig> {
        use Command::*;
        let (name, flags) = match self {
            Run {
                config,
                out,
                threads,
            } => {
                let mut cfg = ExperimentConfig::from_file(&config)
                    .with_context(|| format!("reading {}", config.display()))?;
                if let Some(out) = out {
                    cfg.out = out;
                }
                if threads.is_some() {
                    cfg.threads = threads;
                }
                return Ok(cfg);
            }
            GaussCheck(f) => ("gauss-check", f),
            MonomialCheck(f) => ("monomial-check", f),
            WeilCheck(f) => ("weil-check", f),
            Moments(f) => ("moments", f),
            BoxMoments(f) => ("box-moments", f),
            EnumerateLp(f) => ("enumerate-lp", f),
            OrbitCount(f) => ("orbit-count", f),
            BoxDensity(f) => ("box-density", f),
            Amplify(f) => ("amplify", f),
            AmplifyMono(f) => ("amplify-mono", f),
            WeylTrace(f) => ("weyl-trace", f),
            MrScan(f) => ("mr-scan", f),
            SigmaScan(f) => ("sigma-scan", f),
            ExceptionalScan(f) => ("exceptional-scan", f),
            MeasureEstimate(f) => ("measure-estimate", f),
            CantorBuild(f) => ("cantor-build", f),
            CantorDim(f) => ("cantor-dim", f),
            PatternDemo(f) => ("pattern-demo", f),
            Discrepancy(f) => ("discrepancy", f),
            KoksmaCheck(f) => ("koksma-check", f),
            DiscrepancyScan(f) => ("discrepancy-scan", f),
        };
        Ok(ExperimentConfig::new(name, flags.into_map())?)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg = cli.command.into_config()?;
    let outcome = experiment::run(&cfg).with_context(|| format!("{} failed", cfg.command))?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if outcome.pass {
        println!("{}: pass", cfg.command);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{}: FAIL", cfg.command);
        Ok(ExitCode::from(EXIT_LEMMA_FAILURE as u8))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<weyl_core::Error>()
                .map_or(1, experiment::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
