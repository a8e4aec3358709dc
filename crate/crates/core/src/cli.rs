// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input (flags, parameters, matrix
//! files), 2 for runtime failures (enumeration budget, I/O, unsolved curve
//! points under `--strict`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{self, BoundVersion};
use crate::domain::{AsymptoticRatios, BetaMode, BoundConfig, ExpanderParams, ProblemSize};
use crate::ensemble::{self, CertifyOptions, Seed, SparseBinaryMatrix};
use crate::error::Error;
use crate::phase_transition::{self, CurveKind, PTCurve};
use crate::splitting;

#[derive(Debug, Parser)]
#[command(name = "sparse-expander", version, about = "Random sparse binary expander matrices")]
struct Cli {
    /// Worker threads (default: all cores; 1 runs serially).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Treat unsolved curve points as an error (exit 2).
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a matrix with d ones per column.
    Sample(SampleArgs),
    /// Check expansion of every column set of size at most s.
    Certify(CertifyArgs),
    /// Monte Carlo estimate of Prob(|A_s| <= a_s).
    McTail(McTailArgs),
    /// Evaluate a failure-probability bound.
    Bound(BoundArgs),
    /// Phase-transition curves of the constructions.
    PtCurve(PtCurveArgs),
    /// Phase-transition curves of recovery-algorithm conditions.
    AlgoPt(AlgoPtArgs),
    /// Finite-size feasibility from the union bound.
    Feasible(FeasibleArgs),
    /// Empirical RIP-1 ratios of a matrix.
    Rip1(Rip1Args),
}

#[derive(Debug, Args)]
struct SizeArgs {
    /// Rows.
    #[arg(long = "n")]
    rows: u64,
    /// Columns.
    #[arg(long = "N")]
    columns: u64,
    /// Ones per column.
    #[arg(long)]
    d: u64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    /// Matrix file.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    s: u64,
    /// Expansion coefficient, as a decimal (e.g. 0.1666666667).
    #[arg(long)]
    eps: f64,
    /// Only examine sets of size exactly s.
    #[arg(long)]
    top_level_only: bool,
    #[arg(long, default_value_t = ensemble::DEFAULT_ENUMERATION_BUDGET)]
    budget: u128,
}

#[derive(Debug, Args)]
struct McTailArgs {
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long)]
    s: u64,
    /// Neighbour-count threshold.
    #[arg(long = "a-s")]
    a_s: f64,
    /// Count a hit when any set of size k <= s has at most a_s k / s neighbours
    /// (default: only the first s columns).
    #[arg(long)]
    all_sets: bool,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ensemble::DEFAULT_ENUMERATION_BUDGET)]
    budget: u128,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BetaModeArg {
    OnePlusEps,
    Quadratic,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    cn: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, value_enum, default_value_t = BetaModeArg::OnePlusEps)]
    beta_mode: BetaModeArg,
}

impl ConfigArgs {
    fn config(&self) -> BoundConfig<f64> {
        BoundConfig {
            eta: self.eta,
            alpha: self.alpha,
            c_n: self.cn,
            nu: self.nu,
            beta_mode: match self.beta_mode {
                BetaModeArg::OnePlusEps => BetaMode::ApproxOnePlusEps,
                BetaModeArg::Quadratic => BetaMode::QuadraticRoot,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundKind {
    DyadicOld,
    DyadicNew,
    Epsilon,
    Union,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundKind,
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long)]
    s: u64,
    #[arg(long)]
    eps: f64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CurveArg {
    Bt,
    Bi,
    Bm,
    All,
}

#[derive(Debug, Args)]
struct PtCurveArgs {
    /// Curve(s) to compute; comma separated or `all`.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    kind: Vec<CurveArg>,
    #[arg(long, default_value_t = 32)]
    d: u64,
    #[arg(long, default_value_t = 1.0 / 6.0)]
    eps: f64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct AlgoPtArgs {
    #[arg(long, default_value_t = 32)]
    d: u64,
    /// Slack subtracted from the strict conditions.
    #[arg(long, default_value_t = 1e-15)]
    e: f64,
    /// Set-size multiplier for SSMP: a number, or `2+e`.
    #[arg(long = "ssmp-k", default_value = "3")]
    ssmp_k: String,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct FeasibleArgs {
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long)]
    s: u64,
    #[arg(long)]
    eps: f64,
    /// Relative slack below the curve for the `below_curve` classification.
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct Rip1Args {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::BudgetExceeded { .. } | Error::Io(_) => 2,
            _ => 1,
        };
        Failure { code, message: err.to_string() }
    }
}

type Outcome = std::result::Result<String, Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{err}");
                return 0;
            }
            let text = err.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{line}");
            return 1;
        }
    };
    let result = match cli.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(err) => Err(Failure { code: 2, message: format!("thread pool: {err}") }),
        },
        None => execute(&cli),
    };
    let written = result.and_then(|text| match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::from(Error::Io(e))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure::from(Error::Io(e))),
    });
    match written {
        Ok(()) => 0,
        Err(failure) => {
            let _ = writeln!(stderr, "error: {}", failure.message);
            failure.code
        }
    }
}

fn execute(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Sample(a) => sample(a),
        Command::Certify(a) => certify(a),
        Command::McTail(a) => mc_tail(a),
        Command::Bound(a) => bound(a),
        Command::PtCurve(a) => pt_curve(a, cli.strict),
        Command::AlgoPt(a) => algo_pt(a, cli.strict),
        Command::Feasible(a) => feasible(a),
        Command::Rip1(a) => rip1(a),
    }
}

/// Round-trip safe, locale independent: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn size(args: &SizeArgs, s: u64) -> ProblemSize {
    ProblemSize::new(s, args.rows, args.columns, args.d)
}

fn sample(a: &SampleArgs) -> Outcome {
    let m = ensemble::sample(&size(&a.size, 1), Seed(a.seed))?;
    Ok(m.to_text())
}

fn certify(a: &CertifyArgs) -> Outcome {
    let m = SparseBinaryMatrix::read_from(&a.matrix)?;
    let params = ExpanderParams::new(
        ProblemSize::new(a.s, m.rows() as u64, m.columns() as u64, m.degree() as u64),
        a.eps,
    );
    let opts = CertifyOptions { top_level_only: a.top_level_only, budget: a.budget };
    let r = ensemble::certify_with(&m, &params, opts)?;
    let set: Vec<String> = r.worst_set.iter().map(|j| j.to_string()).collect();
    Ok(format!(
        "is_expander={}\nworst_ratio={}\nworst_set={}\nsets_checked={}\n",
        r.is_expander,
        num(r.worst_ratio),
        set.join(","),
        r.sets_checked
    ))
}

fn mc_tail(a: &McTailArgs) -> Outcome {
    let est = ensemble::mc_tail_with_budget(
        &size(&a.size, a.s),
        a.a_s,
        !a.all_sets,
        a.trials,
        Seed(a.seed),
        a.budget,
    )?;
    Ok(format!(
        "estimate={}\nstd_error={}\nhits={}\ntrials={}\n",
        num(est.estimate),
        num(est.std_error),
        est.hits,
        est.trials
    ))
}

fn bound(a: &BoundArgs) -> Outcome {
    let params = ExpanderParams::new(size(&a.size, a.s), a.eps);
    let config = a.config.config();
    let result = match a.kind {
        BoundKind::DyadicOld | BoundKind::DyadicNew => {
            params.validate()?;
            let chain = bounds::bound_chain(&params)?;
            let version = match a.kind {
                BoundKind::DyadicOld => BoundVersion::Old,
                _ => BoundVersion::New,
            };
            bounds::prob_bound_dyadic(&params, &chain, version)?
        }
        BoundKind::Epsilon => bounds::prob_bound_epsilon(&params, &config)?,
        BoundKind::Union => bounds::prob_bound_union(&params, &config)?,
    };
    let mut out = String::new();
    if result.sparsity != a.s {
        let _ = writeln!(out, "# s rounded up from {} to {}", a.s, result.sparsity);
    }
    let _ = write!(
        out,
        "s={}\npoly_factor={}\nexponent={}\nlog_prob_bound={}\nprobability={}\n",
        result.sparsity,
        num(result.poly_factor()),
        num(result.exponent),
        num(result.log_prob_bound),
        num(result.probability())
    );
    Ok(out)
}

fn unsolved_check(curves: &[PTCurve<f64>], strict: bool) -> std::result::Result<(), Failure> {
    if !strict {
        return Ok(());
    }
    let missing: usize = curves.iter().map(|c| c.points.iter().filter(|p| p.rho.is_none()).count()).sum();
    if missing > 0 {
        return Err(Failure { code: 2, message: format!("{missing} curve points unsolved") });
    }
    Ok(())
}

fn cell(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn multi_csv(curves: &[PTCurve<f64>]) -> String {
    let mut out = String::from("delta");
    for c in curves {
        out.push(',');
        out.push_str(&c.label);
    }
    out.push('\n');
    let delta = phase_transition::delta_grid::<f64>();
    for (i, dl) in delta.iter().enumerate() {
        out.push_str(&num(*dl));
        for c in curves {
            out.push(',');
            out.push_str(&cell(c.points[i].rho));
        }
        out.push('\n');
    }
    out
}

fn pt_curve(a: &PtCurveArgs, strict: bool) -> Outcome {
    let config = a.config.config();
    let mut kinds: Vec<CurveKind> = Vec::new();
    for k in &a.kind {
        let add: &[CurveKind] = match k {
            CurveArg::Bt => &[CurveKind::Bt],
            CurveArg::Bi => &[CurveKind::Bi],
            CurveArg::Bm => &[CurveKind::Bm],
            CurveArg::All => &[CurveKind::Bt, CurveKind::Bi, CurveKind::Bm],
        };
        for kind in add {
            if !kinds.contains(kind) {
                kinds.push(*kind);
            }
        }
    }
    let curves = kinds
        .iter()
        .map(|&k| phase_transition::curve(k, a.d, a.eps, &config))
        .collect::<crate::error::Result<Vec<_>>>()?;
    unsolved_check(&curves, strict)?;
    let single = a.kind.len() == 1 && a.kind[0] != CurveArg::All;
    if !single {
        return Ok(multi_csv(&curves));
    }
    let mut out = String::from("delta,rho,residual,iters\n");
    for (dl, p) in curves[0].delta.iter().zip(&curves[0].points) {
        let _ = writeln!(out, "{},{},{},{}", num(*dl), cell(p.rho), cell(p.residual), p.iterations);
    }
    Ok(out)
}

fn parse_ssmp_k(text: &str, e: f64) -> std::result::Result<f64, Failure> {
    let invalid = || Failure { code: 1, message: format!("invalid --ssmp-k value {text:?}") };
    match text.trim() {
        "2+e" => Ok(2.0 + e),
        t => t.parse::<f64>().map_err(|_| invalid()),
    }
}

fn algo_pt(a: &AlgoPtArgs, strict: bool) -> Outcome {
    let k = parse_ssmp_k(&a.ssmp_k, a.e)?;
    let curves = phase_transition::algo_curves(a.d, a.e, k, &a.config.config())?;
    unsolved_check(&curves, strict)?;
    Ok(multi_csv(&curves))
}

fn feasible(a: &FeasibleArgs) -> Outcome {
    let config = a.config.config();
    let f = phase_transition::feasible(a.s, a.size.rows, a.size.columns, a.size.d, a.eps, &config)?;
    let ratios = AsymptoticRatios {
        rho: a.s as f64 / a.size.rows as f64,
        delta: a.size.rows as f64 / a.size.columns as f64,
    };
    let below = match ratios.validate() {
        Ok(()) => phase_transition::below_curve(&ratios, a.size.d, a.eps, &config, a.gamma)?
            .map(|b| b.to_string())
            .unwrap_or_else(|| "unsolved".into()),
        Err(_) => "n/a".into(),
    };
    let mut out = String::new();
    let s_used = splitting::round_up_pow2(a.s);
    if s_used != a.s {
        let _ = writeln!(out, "# s rounded up from {} to {}", a.s, s_used);
    }
    let _ = write!(
        out,
        "feasible={}\nmargin={}\nexponent={}\nlog_prob_bound={}\nd_threshold={}\nn_threshold={}\nbelow_curve={}\n",
        f.feasible,
        num(f.margin),
        num(f.exponent),
        num(f.log_prob_bound),
        num(f.d_threshold),
        num(f.n_threshold),
        below
    );
    Ok(out)
}

fn rip1(a: &Rip1Args) -> Outcome {
    let m = SparseBinaryMatrix::read_from(&a.matrix)?;
    let r = ensemble::rip1_ratio(&m, a.s, a.trials, Seed(a.seed))?;
    Ok(format!("min_ratio={}\nmax_ratio={}\n", num(r.min_ratio), num(r.max_ratio)))
}
