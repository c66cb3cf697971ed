//! Command-line front end.
//!
//! Options may come from flags or from a TOML file given with `--config`
//! whose keys are the long flag names (`tensor`, `loss`, `rank`, `reg`,
//! `seeds`, `maxiters`, `gtol`, `out`, …); flags win over the file.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gcp_core::{
    fit_gcp, Data, DenseTensor, FitProblem, FitResult, Init, LossKind, LossSpec, OptOptions, Shape,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcheck::{self, Case};
use crate::holdout::{heldout_loglik, make_holdout};
use crate::io;
use crate::synth::{random_truth, sample_from_model, SampleParams};

#[derive(Debug, Parser)]
#[command(name = "gcp", version, about = "Generalized CP tensor decomposition")]
pub struct Cli {
    /// TOML file with default option values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a tensor file and write factors, trace and summary.
    Fit(FitArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Draw a ground-truth model and sample a tensor from it.
    Synth(SynthArgs),
    /// Held-out log-likelihood experiment on binary data.
    Predict(PredictArgs),
    /// Write a fitted model as a tensor file, or convert CSV to coordinate format.
    Export(ExportArgs),
}

#[derive(Debug, Args, Default)]
pub struct LossArgs {
    /// Loss name: gaussian, bernoulli_odds, bernoulli_logit, poisson,
    /// poisson_log, gamma, rayleigh, negbinom, huber, beta_div.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Huber threshold.
    #[arg(long)]
    pub delta: Option<f64>,
    /// β-divergence exponent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Negative binomial number of failures.
    #[arg(long)]
    pub failures: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub rank: Option<usize>,
    /// L2 weight, one value for all modes or one per mode.
    #[arg(long, value_delimiter = ',')]
    pub reg: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Number of random starts, seeded consecutively from the first seed
    /// (default 1).
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub maxiters: Option<usize>,
    /// Projected-gradient tolerance.
    #[arg(long)]
    pub gtol: Option<f64>,
    /// Relative objective-change tolerance.
    #[arg(long)]
    pub ftol: Option<f64>,
    /// Number of stored curvature pairs.
    #[arg(long)]
    pub memory: Option<usize>,
    /// Constrain factors to be nonnegative even when the loss does not require it.
    #[arg(long)]
    pub nonneg: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Losses to check, in addition to --loss; all of them when both are
    /// omitted.
    #[arg(long = "losses", value_delimiter = ',')]
    pub losses: Vec<String>,
    #[command(flatten)]
    pub loss: LossArgs,
    /// Ranks to check.
    #[arg(long = "ranks", value_delimiter = ',', default_values_t = [1usize, 2, 3])]
    pub ranks: Vec<usize>,
    /// Tensor shapes, e.g. `--shape 5,4,3 --shape 4,3,2,2`.
    #[arg(long = "shape")]
    pub shapes: Vec<Dims>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Also check with only a random third of the entries observed.
    #[arg(long)]
    pub scarce: bool,
    /// Also check models with explicit component weights.
    #[arg(long)]
    pub weighted: bool,
    #[arg(long, default_value_t = gradcheck::DEFAULT_STEP)]
    pub step: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = gradcheck::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_sign_flip: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub loss: LossArgs,
    #[arg(long)]
    pub shape: Option<Dims>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Truth factor entries are uniform on [lo, hi).
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hi: f64,
    /// Gaussian noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Gaussian data without noise.
    #[arg(long)]
    pub noiseless: bool,
    /// Gamma shape parameter.
    #[arg(long, default_value_t = 1.0)]
    pub gamma_shape: f64,
    /// Storage for the written tensor: dense or coo (nonzeros only).
    #[arg(long, default_value = "dense")]
    pub storage: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    /// Losses to compare.
    #[arg(long = "losses", value_delimiter = ',', default_values_t = ["gaussian".to_string(), "bernoulli_odds".into(), "bernoulli_logit".into()])]
    pub losses: Vec<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 50)]
    pub ones: usize,
    #[arg(long, default_value_t = 50)]
    pub zeros: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Directory with factor_k.csv and lambda.csv; writes the full model.
    #[arg(long, conflicts_with = "csv")]
    pub model: Option<PathBuf>,
    /// CSV of `i1,…,id,value` rows (1-based) to convert.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Mode sizes for --csv; inferred from the largest indices otherwise.
    #[arg(long)]
    pub shape: Option<Dims>,
    /// Mark converted entries as the only observed ones.
    #[arg(long)]
    pub scarce: bool,
    /// The CSV has a header row.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Mode sizes written as `5,4,3` or `5x4x3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims(pub Vec<usize>);

impl std::str::FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split([',', 'x'])
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad size `{t}`"))
            })
            .collect::<std::result::Result<_, _>>()
            .map(Dims)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    #[default]
    None,
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::None => Vec::new(),
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Option values read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    tensor: Option<PathBuf>,
    loss: Option<String>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    beta: Option<f64>,
    failures: Option<f64>,
    rank: Option<usize>,
    reg: OneOrMany<f64>,
    seeds: OneOrMany<u64>,
    starts: Option<usize>,
    maxiters: Option<usize>,
    gtol: Option<f64>,
    ftol: Option<f64>,
    memory: Option<usize>,
    nonneg: Option<bool>,
    out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("--{name} is required (flag or config key)")))
}

fn loss_spec(args: &LossArgs, cfg: &FileConfig) -> Result<LossSpec> {
    let name = required(args.loss.clone().or_else(|| cfg.loss.clone()), "loss")?;
    build_loss(&name, args, cfg)
}

fn build_loss(name: &str, args: &LossArgs, cfg: &FileConfig) -> Result<LossSpec> {
    let kind: LossKind = name.parse()?;
    let mut spec = LossSpec::new(kind);
    if let Some(e) = args.epsilon.or(cfg.epsilon) {
        spec = spec.with_epsilon(e)?;
    }
    if let Some(d) = args.delta.or(cfg.delta) {
        spec = spec.with_delta(d)?;
    }
    if let Some(b) = args.beta.or(cfg.beta) {
        spec = spec.with_beta(b)?;
    }
    if let Some(r) = args.failures.or(cfg.failures) {
        spec = spec.with_failures(r)?;
    }
    Ok(spec)
}

struct Solver {
    rank: usize,
    reg: Vec<f64>,
    seeds: Vec<u64>,
    opts: OptOptions,
    nonneg: bool,
}

fn solver(args: &SolverArgs, cfg: &FileConfig) -> Result<Solver> {
    let rank = required(args.rank.or(cfg.rank), "rank")?;
    let reg = if args.reg.is_empty() {
        cfg.reg.to_vec()
    } else {
        args.reg.clone()
    };
    let mut seeds = if args.seeds.is_empty() {
        cfg.seeds.to_vec()
    } else {
        args.seeds.clone()
    };
    if seeds.is_empty() {
        seeds.push(1);
    }
    if let Some(n) = args.starts.or(cfg.starts) {
        if n == 0 {
            return Err(Error::Config("--starts must be at least 1".into()));
        }
        let first = seeds[0];
        seeds = (0..n as u64).map(|i| first.wrapping_add(i)).collect();
    }
    let mut opts = OptOptions::default();
    if let Some(v) = args.maxiters.or(cfg.maxiters) {
        opts.max_iters = v;
    }
    if let Some(v) = args.gtol.or(cfg.gtol) {
        opts.grad_tol = v;
    }
    if let Some(v) = args.ftol.or(cfg.ftol) {
        opts.rel_f_tol = v;
    }
    if let Some(v) = args.memory.or(cfg.memory) {
        opts.memory = v;
    }
    opts.validate()?;
    Ok(Solver {
        rank,
        reg,
        seeds,
        opts,
        nonneg: args.nonneg || cfg.nonneg.unwrap_or(false),
    })
}

fn configure(mut p: FitProblem, s: &Solver) -> Result<FitProblem> {
    p = match s.reg.len() {
        0 => p,
        1 => p.with_reg(s.reg[0])?,
        _ => p.with_reg_per_mode(s.reg.clone())?,
    };
    if s.nonneg {
        p = p.nonnegative()?;
    }
    Ok(p)
}

/// Files written to a hidden sibling directory first and moved into the
/// output directory only once everything has been produced.
struct Staged {
    out: PathBuf,
    dir: PathBuf,
    names: Vec<String>,
}

impl Staged {
    fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let dir = out.join(format!(".staging-{}", std::process::id()));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            out: out.to_path_buf(),
            dir,
            names: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn commit(self) -> Result<()> {
        for name in &self.names {
            let dst = self.out.join(name);
            if let Some(parent) = dst.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let src = self.dir.join(name);
            fs::rename(&src, &dst).map_err(|e| Error::io(&dst, e))?;
        }
        Ok(())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

#[derive(Debug, Serialize)]
struct RunSummary {
    seed: u64,
    final_f: f64,
    status: String,
    iterations: usize,
    proj_grad_norm: f64,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    loss: String,
    rank: usize,
    shape: Vec<usize>,
    storage: String,
    runs: Vec<RunSummary>,
    best_seed: u64,
    best_f: f64,
    best_status: String,
}

/// Fit once per seed in parallel; results come back in seed order.
pub fn fit_seeds(p: &FitProblem, seeds: &[u64], opts: &OptOptions) -> Result<Vec<FitResult>> {
    let runs: Vec<gcp_core::Result<FitResult>> = seeds
        .par_iter()
        .map(|&s| fit_gcp(p, Init::Seed(s), opts))
        .collect();
    Ok(runs.into_iter().collect::<gcp_core::Result<Vec<_>>>()?)
}

fn cmd_fit(args: FitArgs, cfg: &FileConfig) -> Result<()> {
    let tensor = required(args.tensor.or_else(|| cfg.tensor.clone()), "tensor")?;
    let out = required(args.out.or_else(|| cfg.out.clone()), "out")?;
    let loss = loss_spec(&args.loss, cfg)?;
    let s = solver(&args.solver, cfg)?;
    let data = io::read_tensor(&tensor)?;
    let storage = data.storage_name().to_string();
    let p = configure(FitProblem::new(data, loss, s.rank)?, &s)?;
    let runs = fit_seeds(&p, &s.seeds, &s.opts)?;
    let best = gcp_core::best_run(&runs);
    let summary = FitSummary {
        loss: loss.to_string(),
        rank: s.rank,
        shape: p.shape().dims().to_vec(),
        storage,
        runs: runs
            .iter()
            .zip(&s.seeds)
            .map(|(r, &seed)| RunSummary {
                seed,
                final_f: r.objective(),
                status: r.trace.status.to_string(),
                iterations: r.trace.iterations(),
                proj_grad_norm: r.trace.final_proj_grad_norm(),
            })
            .collect(),
        best_seed: s.seeds[best],
        best_f: runs[best].objective(),
        best_status: runs[best].trace.status.to_string(),
    };
    let mut staged = Staged::new(&out)?;
    for (name, body) in io::factor_files(&runs[best].model) {
        staged.write(&name, &body)?;
    }
    staged.write("trace.csv", &io::trace_csv(&runs[best].trace))?;
    staged.write("summary.json", &json(&summary)?)?;
    staged.commit()?;
    println!(
        "best seed {} F = {:.6e} ({}); all F: {}",
        summary.best_seed,
        summary.best_f,
        summary.best_status,
        summary
            .runs
            .iter()
            .map(|r| format!("{:.6e}", r.final_f))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))
}

fn cmd_gradcheck(args: GradcheckArgs, cfg: &FileConfig) -> Result<()> {
    let mut names = args.losses.clone();
    if let Some(n) = args.loss.loss.clone().or_else(|| cfg.loss.clone()) {
        if !names.contains(&n) {
            names.push(n);
        }
    }
    let specs: Vec<LossSpec> = if names.is_empty() {
        LossKind::ALL
            .iter()
            .map(|k| build_loss(k.as_str(), &args.loss, cfg))
            .collect::<Result<_>>()?
    } else {
        names
            .iter()
            .map(|n| build_loss(n, &args.loss, cfg))
            .collect::<Result<_>>()?
    };
    let shapes = if args.shapes.is_empty() {
        vec![vec![5, 4, 3], vec![4, 3, 2, 2]]
    } else {
        args.shapes.iter().map(|d| d.0.clone()).collect()
    };
    let seeds = if args.seeds.is_empty() {
        let s = cfg.seeds.to_vec();
        if s.is_empty() {
            vec![1]
        } else {
            s
        }
    } else {
        args.seeds.clone()
    };
    let mut cases = Vec::new();
    for spec in &specs {
        for dims in &shapes {
            for &rank in &args.ranks {
                for &seed in &seeds {
                    for scarce in [false, true] {
                        if scarce && !args.scarce {
                            continue;
                        }
                        for weighted in [false, true] {
                            if weighted && !args.weighted {
                                continue;
                            }
                            cases.push(Case {
                                loss: *spec,
                                dims: dims.clone(),
                                rank,
                                seed,
                                scarce,
                                weighted,
                            });
                        }
                    }
                }
            }
        }
    }
    let results = cases
        .par_iter()
        .map(|c| gradcheck::run_case(c, args.step, args.inject_sign_flip))
        .collect::<Result<Vec<_>>>()?;

    let mut report = String::from("loss,layout,weighted,shape,rank,seed,mode,max_rel_err\n");
    let mut worst = 0.0f64;
    for r in &results {
        let c = &r.case;
        let shape = c
            .dims
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let layout = if c.scarce { "scarce" } else { "dense" };
        let modes = r
            .per_mode
            .iter()
            .enumerate()
            .map(|(k, e)| ((k + 1).to_string(), *e));
        for (mode, e) in modes.chain(r.lambda.map(|e| ("lambda".to_string(), e))) {
            report.push_str(&format!(
                "{},{layout},{},{shape},{},{},{mode},{e:.3e}\n",
                c.loss.name(),
                c.weighted,
                c.rank,
                c.seed
            ));
        }
        worst = worst.max(r.max_error());
    }
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(report.as_bytes());
    let _ = writeln!(
        stdout,
        "worst relative error {worst:.3e} over {} cases",
        results.len()
    );
    if let Some(out) = args.out.or_else(|| cfg.out.clone()) {
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        io::write_atomic(&out.join("gradcheck.csv"), report.as_bytes())?;
    }
    if worst > args.threshold || worst.is_nan() {
        return Err(Error::GradCheck(format!(
            "worst relative error {worst:.3e} exceeds {:.1e}",
            args.threshold
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SynthSummary {
    loss: String,
    shape: Vec<usize>,
    rank: usize,
    seed: u64,
    data_mean: f64,
    model_mean: f64,
}

fn cmd_synth(args: SynthArgs, cfg: &FileConfig) -> Result<()> {
    let loss = loss_spec(&args.loss, cfg)?;
    let dims = required(args.shape, "shape")?.0;
    let rank = required(args.rank.or(cfg.rank), "rank")?;
    let seed = args
        .seed
        .or_else(|| cfg.seeds.to_vec().first().copied())
        .unwrap_or(1);
    let out = required(args.out.or_else(|| cfg.out.clone()), "out")?;
    let shape = Shape::new(dims)?;
    // Truth and data use different streams derived from the same seed.
    let truth = random_truth(&shape, rank, args.lo, args.hi, seed)?;
    let params = SampleParams {
        sigma: if args.noiseless { 0.0 } else { args.sigma },
        gamma_shape: args.gamma_shape,
    };
    let x = sample_from_model(
        &truth,
        &loss,
        &params,
        seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
    )?;
    let full = truth.full()?;
    let n = shape.total() as f64;
    let summary = SynthSummary {
        loss: loss.to_string(),
        shape: shape.dims().to_vec(),
        rank,
        seed,
        data_mean: x.values().iter().sum::<f64>() / n,
        model_mean: full.values().iter().sum::<f64>() / n,
    };
    let data = match args.storage.as_str() {
        "dense" => Data::Dense(x),
        "coo" => {
            let nz = x
                .to_coo()
                .iter()
                .filter(|(_, v)| *v != 0.0)
                .map(|(i, v)| (i.to_vec(), v))
                .collect::<Vec<_>>();
            Data::Sparse(gcp_core::CooTensor::new(shape.clone(), nz)?)
        }
        other => {
            return Err(Error::Config(format!(
                "--storage must be dense or coo, not `{other}`"
            )))
        }
    };
    let mut staged = Staged::new(&out)?;
    staged.write("tensor.gcptns", &io::format_tensor(&data))?;
    for (name, body) in io::factor_files(&truth) {
        staged.write(&format!("truth/{name}"), &body)?;
    }
    staged.write("summary.json", &json(&summary)?)?;
    staged.commit()?;
    println!(
        "wrote {} ({}); data mean {:.6}, model mean {:.6}",
        out.join("tensor.gcptns").display(),
        data.storage_name(),
        summary.data_mean,
        summary.model_mean
    );
    Ok(())
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One held-out log-likelihood per trial and loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub loss: String,
    pub loglik: f64,
}

/// Run the held-out experiment: for each trial, hold out `ones` ones and
/// `zeros` zeros, fit every loss on the rest, and score the held-out
/// entries. Trial `t` uses seed `base_seed + t` for both the split and the
/// initialization. Results are ordered by trial, then by loss.
#[allow(clippy::too_many_arguments)]
pub fn run_prediction(
    x: &DenseTensor,
    losses: &[LossSpec],
    rank: usize,
    trials: usize,
    ones: usize,
    zeros: usize,
    base_seed: u64,
    opts: &OptOptions,
) -> Result<Vec<TrialResult>> {
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<TrialResult>> {
            let seed = base_seed.wrapping_add(t as u64);
            let h = make_holdout(x, ones, zeros, seed)?;
            losses
                .iter()
                .map(|loss| {
                    let p = h.train_problem(x, *loss, rank)?;
                    let fit = fit_gcp(&p, Init::Seed(seed), opts)?;
                    Ok(TrialResult {
                        trial: t,
                        loss: loss.name().to_string(),
                        loglik: heldout_loglik(&fit.model, &h, loss)?,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

fn cmd_predict(args: PredictArgs, cfg: &FileConfig) -> Result<()> {
    let tensor = required(args.tensor.or_else(|| cfg.tensor.clone()), "tensor")?;
    let out = required(args.out.or_else(|| cfg.out.clone()), "out")?;
    let s = solver(&args.solver, cfg)?;
    let empty = LossArgs::default();
    let losses = args
        .losses
        .iter()
        .map(|n| {
            let spec = build_loss(n, &empty, cfg)?;
            spec.probability(0.5)?;
            Ok(spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let x = match io::read_tensor(&tensor)? {
        Data::Dense(t) => t,
        Data::Sparse(t) => t.to_dense()?,
        Data::Scarce(_) => {
            return Err(Error::Config(
                "the prediction experiment needs a fully observed tensor".into(),
            ));
        }
    };
    let results = run_prediction(
        &x,
        &losses,
        s.rank,
        args.trials,
        args.ones,
        args.zeros,
        s.seeds[0],
        &s.opts,
    )?;

    let mut trials_csv = String::from("trial,loss,loglik\n");
    for r in &results {
        trials_csv.push_str(&format!(
            "{},{},{}\n",
            r.trial + 1,
            r.loss,
            io::fmt_value(r.loglik)
        ));
    }
    let mut summary = String::from("loss,min,q1,median,q3,max\n");
    for loss in &losses {
        let mut v: Vec<f64> = results
            .iter()
            .filter(|r| r.loss == loss.name())
            .map(|r| r.loglik)
            .collect();
        v.sort_by(f64::total_cmp);
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            loss.name(),
            io::fmt_value(v[0]),
            io::fmt_value(quantile(&v, 0.25)),
            io::fmt_value(quantile(&v, 0.5)),
            io::fmt_value(quantile(&v, 0.75)),
            io::fmt_value(v[v.len() - 1])
        ));
    }
    let mut staged = Staged::new(&out)?;
    staged.write("trials.csv", &trials_csv)?;
    staged.write("summary.csv", &summary)?;
    staged.commit()?;
    print!("{summary}");
    Ok(())
}

fn cmd_export(args: ExportArgs, cfg: &FileConfig) -> Result<()> {
    let out = required(args.out.or_else(|| cfg.out.clone()), "out")?;
    let data = if let Some(dir) = &args.model {
        Data::Dense(io::read_factors(dir)?.full()?)
    } else if let Some(csv) = &args.csv {
        let coo = io::import_csv(
            csv,
            args.shape.as_ref().map(|d| d.0.as_slice()),
            args.header,
        )?;
        if args.scarce {
            Data::Scarce(coo)
        } else {
            Data::Sparse(coo)
        }
    } else {
        return Err(Error::Config(
            "export needs --model DIR or --csv FILE".into(),
        ));
    };
    io::write_tensor(&data, &out)?;
    println!("wrote {} ({})", out.display(), data.storage_name());
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Fit(a) => cmd_fit(a, &cfg),
        Command::Gradcheck(a) => cmd_gradcheck(a, &cfg),
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::Predict(a) => cmd_predict(a, &cfg),
        Command::Export(a) => cmd_export(a, &cfg),
    }
}

/// Parse arguments, run, and return the process exit code: 0 on success,
/// 1 for usage, validation and domain errors, 2 for numerical failure.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
