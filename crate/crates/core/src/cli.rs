//! `scoreflow` command line: dataset generation, training, sampling,
//! Monte-Carlo ensembles, evaluation, schedule dumps and benchmarks.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Every subcommand
//! writes `run.json` next to its outputs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data_io::{
    gen_conditional_gmm2d, gen_phantom_dataset, load_dataset, one_hot, read_pgm, write_csv_points,
    write_pgm, write_phantom_dir,
};
use crate::error::{Error, Result};
use crate::fmt_num;
use crate::metrics::{evaluate, Image};
use crate::noise::{slot, CounterNoise, NoiseSource};
use crate::samplers::{
    ddpm_ancestral, em_reverse, ode_sample, pc_sample, Method, SampleOutput, SamplerConfig,
};
use crate::schedules::{
    DiscreteSchedule, VeSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_SIGMA_BASE,
};
use crate::scores::{
    MlpDenoiser, OptimalGaussianNoise, Parameterization, PerturbedGaussianScore, VeNetworkScore,
};
use crate::training::{train, Objective, TrainConfig};
use crate::uncertainty::{mc_ensemble, mc_ensemble_batched, McEnsemble};

/// Upper end of the display range for standard-deviation maps.
const STD_DISPLAY_MAX: f64 = 0.5;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "scoreflow",
    version,
    about = "Conditional diffusion and score-based sampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Generate a synthetic paired dataset.
    GenData(GenDataArgs),
    /// Train a noise or score network.
    Train(TrainArgs),
    /// Draw samples from a trained network.
    Sample(SampleArgs),
    /// Monte-Carlo ensemble: mean, std map and uncertainty summary.
    Mc(McArgs),
    /// SSIM and PSNR between PGM images or directories of images.
    Eval(EvalArgs),
    /// Write a noise schedule as CSV.
    ScheduleDump(ScheduleDumpArgs),
    /// Time the samplers on an analytic task.
    Bench(BenchArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Sample(_) => "sample",
            Command::Mc(_) => "mc",
            Command::Eval(_) => "eval",
            Command::ScheduleDump(_) => "schedule-dump",
            Command::Bench(_) => "bench",
        }
    }

    fn out_dir(&self) -> &Path {
        match self {
            Command::GenData(a) => &a.out_dir,
            Command::Train(a) => &a.out_dir,
            Command::Sample(a) => &a.out_dir,
            Command::Mc(a) => &a.out_dir,
            Command::Eval(a) => &a.out_dir,
            Command::ScheduleDump(a) => &a.out_dir,
            Command::Bench(a) => &a.out_dir,
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::GenData(a) => Some(a.seed),
            Command::Train(a) => Some(a.seed),
            Command::Sample(a) => Some(a.sampler.seed),
            Command::Mc(a) => Some(a.sampler.seed),
            Command::Bench(a) => Some(a.seed),
            Command::Eval(_) | Command::ScheduleDump(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Gmm2d,
    Phantom,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: DataKind,
    /// Number of points or image pairs.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Phantom side length in pixels.
    #[arg(long, default_value_t = crate::data_io::DEFAULT_SIDE)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Ddpm,
    DsmVe,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct TrainArgs {
    /// Point CSV file or directory of phantom pairs.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub loss: LossKind,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 2)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub min_epochs: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_epochs: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "256,256,256")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = crate::scores::DEFAULT_EMBED_DIM)]
    pub embed_dim: usize,
    /// Chain length for the discrete objective.
    #[arg(long = "T", default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = DEFAULT_SIGMA_BASE)]
    pub sigma_base: f64,
    /// Plain head: no input scaling and no standard-normal skip.
    #[arg(long)]
    pub no_precondition: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct SamplerArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Euler-Maruyama step count.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 500)]
    pub pc_steps: usize,
    /// Corrector iterations per predictor step.
    #[arg(long, default_value_t = 1)]
    pub corrector_steps: usize,
    #[arg(long, default_value_t = 0.16)]
    pub snr: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub atol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SamplerArgs {
    fn config(&self, dump_every: Option<usize>) -> SamplerConfig {
        SamplerConfig {
            n_steps: self.steps,
            pc_prediction_steps: self.pc_steps,
            pc_correction_steps: self.corrector_steps,
            snr: self.snr,
            ode_rtol: self.rtol,
            ode_atol: self.atol,
            seed: self.seed,
            dump_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Ddpm,
    Em,
    Pc,
    Ode,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ddpm => Method::Ddpm,
            MethodArg::Em => Method::Em,
            MethodArg::Pc => Method::Pc,
            MethodArg::Ode => Method::Ode,
        }
    }
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct ConditionArgs {
    /// Class label for point models.
    #[arg(long)]
    pub label: Option<usize>,
    /// Conditioning image for image models.
    #[arg(long)]
    pub cond: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub condition: ConditionArgs,
    /// Number of samples.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Write every k-th intermediate state.
    #[arg(long)]
    pub dump_every: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct McArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub condition: ConditionArgs,
    /// Replicates; replicate k uses seed + k.
    #[arg(long = "K", default_value_t = crate::uncertainty::DEFAULT_REPLICATES)]
    pub replicates: usize,
    /// Draw all replicates in one batched sampler call.
    #[arg(long)]
    pub batched: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct EvalArgs {
    /// Image or directory of images.
    #[arg(long)]
    pub a: PathBuf,
    /// Reference image or directory with matching file names.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub data_range: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Ddpm,
    Ve,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct ScheduleDumpArgs {
    #[arg(long, value_enum)]
    pub kind: ScheduleKind,
    /// Step count (discrete chain length or VE grid size).
    #[arg(long = "T", default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = DEFAULT_BETA_START)]
    pub beta_start: f64,
    #[arg(long, default_value_t = DEFAULT_BETA_END)]
    pub beta_end: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA_BASE)]
    pub sigma_base: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchTask {
    Oracle2d,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "oracle2d")]
    pub task: BenchTask,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "ddpm,em,pc,ode"
    )]
    pub methods: Vec<MethodArg>,
    /// Samples per timed run.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Timed runs per method; the minimum is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(cli: &Cli, argv: &[OsString]) -> Result<()> {
    let start = Instant::now();
    let out_dir = cli.command.out_dir();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    match &cli.command {
        Command::GenData(a) => gen_data(a)?,
        Command::Train(a) => train_cmd(a)?,
        Command::Sample(a) => sample_cmd(a)?,
        Command::Mc(a) => mc_cmd(a)?,
        Command::Eval(a) => eval_cmd(a)?,
        Command::ScheduleDump(a) => schedule_dump(a)?,
        Command::Bench(a) => bench(a)?,
    }
    write_manifest(cli, argv, start.elapsed().as_secs_f64())
}

fn write_manifest(cli: &Cli, argv: &[OsString], seconds: f64) -> Result<()> {
    let manifest = serde_json::json!({
        "tool": "scoreflow",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "argv": argv.iter().map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "flags": &cli.command,
        "seed": cli.command.seed(),
        "wall_clock_seconds": seconds,
    });
    let path = cli.command.out_dir().join("run.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&path, &(text + "\n"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    match a.kind {
        DataKind::Gmm2d => write_csv_points(
            &a.out_dir.join("points.csv"),
            &gen_conditional_gmm2d(a.n, a.seed)?,
        ),
        DataKind::Phantom => {
            write_phantom_dir(&a.out_dir, &gen_phantom_dataset(a.n, a.size, a.seed)?)
        }
    }
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    data.validate()?;
    let param = match a.loss {
        LossKind::Ddpm => Parameterization::Noise(DiscreteSchedule::linear(
            a.steps,
            DEFAULT_BETA_START,
            DEFAULT_BETA_END,
        )?),
        LossKind::DsmVe => Parameterization::ScaledScore(VeSchedule::with_base(a.sigma_base)?),
    };
    let mut model = MlpDenoiser::new(
        data.target_dim(),
        data.cond_dim(),
        a.embed_dim,
        &a.hidden,
        param,
        a.seed,
    )?
    .with_preconditioning(!a.no_precondition);
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size.min(data.len()),
        min_epochs: a.min_epochs,
        max_epochs: a.max_epochs,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let objective = Objective::for_model(&model);
    let curve = train(&mut model, &objective, &data, &cfg, |epoch, loss| {
        eprintln!("epoch {epoch} loss {}", fmt_num(loss));
    })?;
    model.save(&a.out_dir.join("model.ckpt"))?;
    write_text(&a.out_dir.join("loss_curve.csv"), &curve.to_csv())
}

/// Prints `step i of N` every `every` predictor draws.
struct Progress<'a, N: NoiseSource> {
    inner: &'a N,
    total: usize,
    every: usize,
}

impl<N: NoiseSource> NoiseSource for Progress<'_, N> {
    fn normal(&self, step: u64, slot: u64, dim: usize) -> Vec<f64> {
        if slot == slot::PREDICTOR && step as usize % self.every == 0 {
            eprintln!("step {} of {}", self.total - step as usize, self.total);
        }
        self.inner.normal(step, slot, dim)
    }
}

/// Runs one sampler on a loaded network.
fn run_sampler<N: NoiseSource + ?Sized>(
    model: &MlpDenoiser,
    method: Method,
    cond: Option<&[f64]>,
    n: usize,
    noise: &N,
    cfg: &SamplerConfig,
) -> Result<SampleOutput> {
    match (method, model.parameterization()) {
        (Method::Ddpm, Parameterization::Noise(s)) => ddpm_ancestral(model, s, cond, n, noise, cfg),
        (Method::Ddpm, Parameterization::ScaledScore(_)) => Err(Error::InvalidArgument(
            "ddpm sampling needs a network trained with --loss ddpm".into(),
        )),
        (_, Parameterization::Noise(_)) => Err(Error::InvalidArgument(format!(
            "{method} sampling needs a network trained with --loss dsm-ve"
        ))),
        (m, Parameterization::ScaledScore(ve)) => {
            let score = VeNetworkScore::new(model)?;
            match m {
                Method::Em => em_reverse(&score, ve, cond, n, noise, cfg),
                Method::Pc => pc_sample(&score, ve, cond, n, noise, cfg),
                _ => ode_sample(&score, ve, cond, n, noise, cfg),
            }
        }
    }
}

/// Builds the condition vector a model expects from `--label` / `--cond`.
fn condition(model: &MlpDenoiser, c: &ConditionArgs) -> Result<Option<Vec<f64>>> {
    match (model.cond_dim(), c.label, &c.cond) {
        (0, None, None) => Ok(None),
        (0, _, _) => Err(Error::InvalidArgument("model is unconditional".into())),
        (_, Some(label), None) => {
            if label >= model.cond_dim() {
                return Err(Error::InvalidArgument(format!(
                    "label {label} out of range"
                )));
            }
            Ok(Some(one_hot(label, model.cond_dim())))
        }
        (d, None, Some(path)) => {
            let img = read_pgm(path)?;
            crate::error::check_len(d, img.data().len())?;
            Ok(Some(img.into_data()))
        }
        _ => Err(Error::InvalidArgument(
            "give exactly one of --label or --cond".into(),
        )),
    }
}

/// Side length when the sample is a square image.
fn image_side(dim: usize) -> Option<usize> {
    let side = (dim as f64).sqrt().round() as usize;
    (side * side == dim && side >= 4).then_some(side)
}

fn points_csv(rows: impl Iterator<Item = Vec<f64>>, dim: usize) -> String {
    let header: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
    let mut out = header.join(",") + "\n";
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| fmt_num(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn sample_cmd(a: &SampleArgs) -> Result<()> {
    let model = MlpDenoiser::load(&a.model)?;
    let cond = condition(&model, &a.condition)?;
    let cfg = a.sampler.config(a.dump_every);
    let method = Method::from(a.sampler.method);
    let noise = CounterNoise::new(a.sampler.seed);
    let total = match method {
        Method::Ddpm => match model.parameterization() {
            Parameterization::Noise(s) => s.steps(),
            _ => 1,
        },
        Method::Pc => cfg.pc_prediction_steps,
        _ => cfg.n_steps,
    };
    let progress = Progress {
        inner: &noise,
        total,
        every: (total / 10).max(1),
    };
    let out = run_sampler(&model, method, cond.as_deref(), a.n, &progress, &cfg)?;
    let d = out.dim;
    match image_side(d) {
        Some(side) => {
            for (j, row) in out.rows().enumerate() {
                write_pgm(
                    &a.out_dir.join(format!("sample_{j:04}.pgm")),
                    &Image::square(side, row.to_vec())?,
                )?;
            }
            for f in &out.trajectory.frames {
                let first = f.state[..d].to_vec();
                write_pgm(
                    &a.out_dir.join(format!("frame_{:04}.pgm", f.index)),
                    &Image::square(side, first)?,
                )?;
            }
        }
        None => {
            write_text(
                &a.out_dir.join("samples.csv"),
                &points_csv(out.rows().map(<[f64]>::to_vec), d),
            )?;
            for f in &out.trajectory.frames {
                let rows = f.state.chunks(d).map(<[f64]>::to_vec);
                write_text(
                    &a.out_dir.join(format!("frame_{:04}.csv", f.index)),
                    &points_csv(rows, d),
                )?;
            }
        }
    }
    eprintln!("{} samples, {} evaluations", out.n, out.evals);
    Ok(())
}

fn mc_cmd(a: &McArgs) -> Result<()> {
    let model = MlpDenoiser::load(&a.model)?;
    let cond = condition(&model, &a.condition)?;
    let cfg = a.sampler.config(None);
    let method = Method::from(a.sampler.method);
    let start = Instant::now();
    let ensemble = if a.batched {
        mc_ensemble_batched(
            |noise, n| Ok(run_sampler(&model, method, cond.as_deref(), n, noise, &cfg)?.x),
            a.replicates,
            a.sampler.seed,
        )?
    } else {
        mc_ensemble(
            |seed| {
                Ok(run_sampler(
                    &model,
                    method,
                    cond.as_deref(),
                    1,
                    &CounterNoise::new(seed),
                    &cfg,
                )?
                .x)
            },
            a.replicates,
            a.sampler.seed,
        )?
    };
    let per_sample = start.elapsed().as_secs_f64() / a.replicates as f64;
    write_ensemble(&a.out_dir, &ensemble)?;
    let summary = format!(
        "method,K,mean_uncertainty,seconds_per_sample\n{},{},{},{}\n",
        method,
        ensemble.k(),
        fmt_num(ensemble.mean_uncertainty),
        fmt_num(per_sample)
    );
    write_text(&a.out_dir.join("uncertainty.csv"), &summary)
}

fn write_ensemble(dir: &Path, e: &McEnsemble) -> Result<()> {
    let d = e.mean.len();
    match image_side(d) {
        Some(side) => {
            write_pgm(&dir.join("mean.pgm"), &Image::square(side, e.mean.clone())?)?;
            let display: Vec<f64> = e.std.iter().map(|s| s / STD_DISPLAY_MAX).collect();
            write_pgm(&dir.join("std.pgm"), &Image::square(side, display)?)?;
            for (k, r) in e.replicates.iter().enumerate() {
                write_pgm(
                    &dir.join(format!("replicate_{k}.pgm")),
                    &Image::square(side, r.clone())?,
                )?;
            }
            Ok(())
        }
        None => {
            let rows = e
                .replicates
                .iter()
                .cloned()
                .chain([e.mean.clone(), e.std.clone()]);
            let mut text = points_csv(rows, d);
            // Label the two summary rows.
            let mut lines: Vec<String> = text.lines().map(String::from).collect();
            let n = lines.len();
            lines[0].insert_str(0, "row,");
            for (k, line) in lines.iter_mut().enumerate().skip(1) {
                let tag = if k == n - 2 {
                    "mean".to_string()
                } else if k == n - 1 {
                    "std".to_string()
                } else {
                    format!("replicate_{}", k - 1)
                };
                line.insert_str(0, &format!("{tag},"));
            }
            text = lines.join("\n") + "\n";
            write_text(&dir.join("ensemble.csv"), &text)
        }
    }
}

fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    files.sort();
    Ok(files)
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let pairs: Vec<(String, PathBuf, PathBuf)> = if a.a.is_dir() {
        pgm_files(&a.a)?
            .into_iter()
            .filter_map(|p| {
                let name = p.file_name()?.to_string_lossy().into_owned();
                let other = a.b.join(&name);
                other.exists().then_some((name, p, other))
            })
            .collect()
    } else {
        let name =
            a.a.file_name()
                .map_or_else(|| "a".into(), |n| n.to_string_lossy().into_owned());
        vec![(name, a.a.clone(), a.b.clone())]
    };
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no matching image pairs".into()));
    }
    let mut out = String::from("name,ssim,psnr\n");
    for (name, pa, pb) in pairs {
        let r = evaluate(&read_pgm(&pa)?, &read_pgm(&pb)?, a.data_range)?;
        let _ = writeln!(out, "{name},{},{}", fmt_num(r.ssim), fmt_num(r.psnr_db));
    }
    write_text(&a.out_dir.join("metrics.csv"), &out)
}

fn schedule_dump(a: &ScheduleDumpArgs) -> Result<()> {
    let mut out = String::new();
    match a.kind {
        ScheduleKind::Ddpm => {
            let s = DiscreteSchedule::linear(a.steps, a.beta_start, a.beta_end)?;
            out.push_str("t,beta,alpha,alpha_bar,posterior_beta\n");
            for t in 1..=s.steps() {
                let _ = writeln!(
                    out,
                    "{t},{},{},{},{}",
                    fmt_num(s.beta(t)),
                    fmt_num(s.alpha(t)),
                    fmt_num(s.alpha_bar(t)),
                    fmt_num(s.posterior_beta(t))
                );
            }
        }
        ScheduleKind::Ve => {
            let ve = VeSchedule::with_base(a.sigma_base)?;
            if a.steps == 0 {
                return Err(Error::InvalidArgument("grid size must be positive".into()));
            }
            out.push_str("i,t,sigma,diffusion\n");
            for i in 1..=a.steps {
                let t = i as f64 * ve.t_max() / a.steps as f64;
                let _ = writeln!(
                    out,
                    "{i},{},{},{}",
                    fmt_num(t),
                    fmt_num(ve.sigma(t)?),
                    fmt_num(ve.diffusion(t))
                );
            }
        }
    }
    write_text(&a.out_dir.join("schedule.csv"), &out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub seconds: f64,
    pub evals: usize,
}

/// Times each method on the 2-D analytic task (exact scores of a
/// VE-perturbed standard normal; Bayes-optimal noise for the discrete chain),
/// taking the minimum wall-clock over `repeats` interleaved rounds.
pub fn bench_oracle2d(
    methods: &[Method],
    n: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if repeats == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "bench needs positive --n and --repeats".into(),
        ));
    }
    let ve = VeSchedule::default();
    let schedule = DiscreteSchedule::default_linear();
    let score = PerturbedGaussianScore::new(ve, 2);
    let eps = OptimalGaussianNoise::new(schedule.clone(), 2);
    let cfg = SamplerConfig::default();
    let mut rows: Vec<BenchRow> = methods
        .iter()
        .map(|m| BenchRow {
            method: *m,
            seconds: f64::INFINITY,
            evals: 0,
        })
        .collect();
    for r in 0..repeats {
        let noise = CounterNoise::new(seed.wrapping_add(r as u64));
        for row in rows.iter_mut() {
            let start = Instant::now();
            let out = match row.method {
                Method::Ddpm => ddpm_ancestral(&eps, &schedule, None, n, &noise, &cfg)?,
                Method::Em => em_reverse(&score, &ve, None, n, &noise, &cfg)?,
                Method::Pc => pc_sample(&score, &ve, None, n, &noise, &cfg)?,
                Method::Ode => ode_sample(&score, &ve, None, n, &noise, &cfg)?,
            };
            row.seconds = row.seconds.min(start.elapsed().as_secs_f64());
            row.evals = out.evals;
        }
    }
    Ok(rows)
}

fn bench(a: &BenchArgs) -> Result<()> {
    let methods: Vec<Method> = a.methods.iter().map(|m| Method::from(*m)).collect();
    let BenchTask::Oracle2d = a.task;
    let rows = bench_oracle2d(&methods, a.n, a.repeats, a.seed)?;
    let mut out = String::from("method,seconds,evals,n_samples\n");
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.method,
            fmt_num(r.seconds),
            r.evals,
            a.n
        );
    }
    write_text(&a.out_dir.join("bench.csv"), &out)
}
