//! `ffdnet` command-line tool. Noise levels are given in 8-bit units (0..=75).

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ffdnet::data::{load_image, save_image, DatasetManifest};
use ffdnet::eval::{
    format_db, psnr, psnr_quantized, sensitivity_sweep, sweep_csv, sweep_table, true_sigma_sweep,
    variant_noise_report, EvalSettings,
};
use ffdnet::model::{denoise, load_model, save_model, ModelConfig, Precision};
use ffdnet::noise::{
    add_awgn, anchored_map, gradient_map, load_map, uniform_map, NoiseLevelMap, NoiseSpec,
    RampAxis, RegionAnchor,
};
use ffdnet::optim::{train, TrainPlan};

#[derive(Parser)]
#[command(name = "ffdnet", version, about = "Denoising with a tunable noise level map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on patches from the images listed in a manifest.
    Train(TrainArgs),
    /// Denoise an image with a trained model.
    Denoise(DenoiseArgs),
    /// Add synthetic Gaussian noise to an image.
    Noise(NoiseArgs),
    /// Measure PSNR and run noise level experiments.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest: one `path [gray|color]` per line, relative to the manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Loss log file [default: <out>.log].
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    channels: usize,
    /// Train a color (RGB) model.
    #[arg(long)]
    color: bool,
    /// Epochs before batch norm is merged (fewer if the loss plateaus).
    #[arg(long, default_value_t = 80)]
    epochs: usize,
    /// Cap on epochs at the first learning rate [default: three quarters of --epochs, rounded up].
    #[arg(long)]
    stage1_epochs: Option<usize>,
    /// Fine-tuning epochs after batch norm is merged.
    #[arg(long, default_value_t = 0)]
    finetune_epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 6400)]
    patches_per_epoch: usize,
    /// Side of square training patches (even).
    #[arg(long, default_value_t = 32)]
    patch_size: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma_min: f64,
    #[arg(long, default_value_t = 75.0)]
    sigma_max: f64,
    /// Clip and quantize noisy patches to 8 bits.
    #[arg(long)]
    clipped: bool,
    /// Disable rotation/flip augmentation.
    #[arg(long)]
    no_augment: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Store parameters as 32-bit floats.
    #[arg(long)]
    f32: bool,
}

/// Exactly one way of describing the noise level map.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct MapArgs {
    /// Uniform noise level.
    #[arg(long)]
    sigma: Option<f64>,
    /// Noise level map file (.nlm or PNG preview) matching the image size.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Anchors `row,col,sigma;row,col,sigma;...` interpolated over the image.
    #[arg(long)]
    anchors: Option<String>,
}

impl MapArgs {
    fn resolve(&self, height: usize, width: usize) -> ffdnet::Result<NoiseLevelMap> {
        if let Some(s) = self.sigma {
            return uniform_map(height, width, s);
        }
        if let Some(path) = &self.map {
            let map = load_map(path)?;
            if (map.height(), map.width()) != (height, width) {
                return Err(ffdnet::Error::Data {
                    path: path.clone(),
                    message: format!(
                        "map is {}x{} but the image is {height}x{width}",
                        map.height(),
                        map.width()
                    ),
                });
            }
            return Ok(map);
        }
        let text = self.anchors.as_deref().unwrap_or_default();
        anchored_map(height, width, &parse_anchors(text)?)
    }
}

fn parse_anchors(text: &str) -> ffdnet::Result<Vec<RegionAnchor>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let fields: Vec<&str> = item.split(',').map(str::trim).collect();
            let bad = || ffdnet::Error::Contract(format!("anchor `{item}` is not `row,col,sigma`"));
            if fields.len() != 3 {
                return Err(bad());
            }
            Ok(RegionAnchor {
                row: fields[0].parse().map_err(|_| bad())?,
                col: fields[1].parse().map_err(|_| bad())?,
                sigma: fields[2].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    model: PathBuf,
    /// Noisy image (PGM, PPM or PNG).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    map: MapArgs,
}

#[derive(Args)]
struct NoiseArgs {
    /// Clean image (PGM, PPM or PNG).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    map: MapArgs,
    /// Clip to [0, 1] and quantize to 8 bits after adding noise.
    #[arg(long)]
    clipped: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// PSNR of TEST against REFERENCE; prints `inf` for identical images.
    Psnr {
        reference: PathBuf,
        test: PathBuf,
        /// Quantize TEST to 8 bits first.
        #[arg(long)]
        quantize: bool,
    },
    /// Denoise one noisy image with several input noise levels, or several
    /// noise levels with one input level.
    Sweep(SweepArgs),
    /// Matched map versus a uniform map at its mean level.
    Variant(VariantArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Table,
}

#[derive(Args)]
struct CommonEval {
    #[arg(long)]
    model: PathBuf,
    /// Clean image.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clip and quantize the noisy input.
    #[arg(long)]
    clipped: bool,
    /// Score the 8-bit quantized output.
    #[arg(long)]
    quantize: bool,
}

impl CommonEval {
    fn settings(&self) -> EvalSettings {
        EvalSettings {
            seed: self.seed,
            clipped: self.clipped,
            quantize_output: self.quantize,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonEval,
    /// Noise level used to corrupt the image.
    #[arg(long)]
    true_sigma: Option<f64>,
    /// Comma-separated input noise levels given to the model.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<f64>,
    /// Sweep the true level instead: fixed input level given to the model.
    #[arg(long, conflicts_with_all = ["true_sigma", "inputs"], requires = "true_sigmas")]
    input_sigma: Option<f64>,
    /// Comma-separated true noise levels, with --input-sigma.
    #[arg(long, value_delimiter = ',')]
    true_sigmas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    format: ReportFormat,
}

#[derive(Args)]
struct VariantArgs {
    #[command(flatten)]
    common: CommonEval,
    /// True noise map file; or use --gradient.
    #[arg(long, conflicts_with = "gradient")]
    map: Option<PathBuf>,
    /// Left-to-right ramp `lo,hi` as the true map.
    #[arg(long, value_delimiter = ',')]
    gradient: Vec<f64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Largest accepted image, in pixels.
    #[arg(long, default_value_t = ffdnet_server::DEFAULT_MAX_PIXELS)]
    max_pixels: usize,
}

type CmdResult = Result<(), Box<dyn std::error::Error>>;

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let mut manifest = DatasetManifest::load(&a.manifest, a.patch_size)?;
    manifest.clipped = a.clipped;
    manifest.augment = !a.no_augment;
    let plan = TrainPlan {
        finetune_epochs: a.finetune_epochs,
        batch_size: a.batch_size,
        patches_per_epoch: a.patches_per_epoch,
        sigma_range: (a.sigma_min, a.sigma_max),
        max_stage1_epochs: a.stage1_epochs.unwrap_or((3 * a.epochs).div_ceil(4)),
        max_epochs: a.epochs,
        ..TrainPlan::default()
    };
    let config = ModelConfig::new(a.layers, a.channels, if a.color { 3 } else { 1 });
    let mut lines = String::new();
    let outcome = train(&plan, &manifest, &config, a.seed, |r| {
        println!("{r}");
        lines.push_str(&format!("{r}\n"));
    })?;
    let precision = if a.f32 { Precision::F32 } else { Precision::F64 };
    save_model(&a.out, &outcome.params, precision)?;
    let log_path = a.log.clone().unwrap_or_else(|| with_suffix(&a.out, ".log"));
    fs::write(&log_path, lines).map_err(|e| ffdnet::Error::Data {
        path: log_path.clone(),
        message: e.to_string(),
    })?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_denoise(a: &DenoiseArgs) -> CmdResult {
    let params = load_model(&a.model)?;
    let noisy = load_image(&a.input)?;
    let s = noisy.shape();
    let map = a.map.resolve(s.height, s.width)?;
    save_image(&a.output, &denoise(&params, &noisy, &map)?)?;
    Ok(())
}

fn cmd_noise(a: &NoiseArgs) -> CmdResult {
    let clean = load_image(&a.input)?;
    let s = clean.shape();
    let map = a.map.resolve(s.height, s.width)?;
    let noisy = add_awgn(&clean, &NoiseSpec { map, clipped: a.clipped, seed: a.seed })?;
    save_image(&a.output, &noisy)?;
    Ok(())
}

fn cmd_eval(c: &EvalCommand) -> CmdResult {
    match c {
        EvalCommand::Psnr { reference, test, quantize } => {
            let (r, t) = (load_image(reference)?, load_image(test)?);
            let db = if *quantize { psnr_quantized(&r, &t)? } else { psnr(&r, &t)? };
            println!("{}", format_db(db));
        }
        EvalCommand::Sweep(a) => {
            let params = load_model(&a.common.model)?;
            let clean = load_image(&a.common.input)?;
            let settings = a.common.settings();
            let (points, column) = match a.input_sigma {
                Some(input) => (true_sigma_sweep(&params, &clean, input, &a.true_sigmas, &settings)?, "true_sigma"),
                None => {
                    let truth = a.true_sigma.ok_or("--true-sigma is required unless --input-sigma is given")?;
                    if a.inputs.is_empty() {
                        return Err("--inputs needs at least one level".into());
                    }
                    (sensitivity_sweep(&params, &clean, truth, &a.inputs, &settings)?, "input_sigma")
                }
            };
            match a.format {
                ReportFormat::Csv => print!("{}", sweep_csv(&points, column)),
                ReportFormat::Table => print!("{}", sweep_table(&points, column)),
            }
        }
        EvalCommand::Variant(a) => {
            let params = load_model(&a.common.model)?;
            let clean = load_image(&a.common.input)?;
            let s = clean.shape();
            let map = match (&a.map, a.gradient.as_slice()) {
                (Some(path), _) => load_map(path)?,
                (None, [lo, hi]) => gradient_map(s.height, s.width, *lo, *hi, RampAxis::Horizontal)?,
                _ => return Err("give the true map with --map or --gradient lo,hi".into()),
            };
            let r = variant_noise_report(&params, &clean, &map, &a.common.settings())?;
            println!("psnr_matched,psnr_uniform_mean,mean_sigma");
            println!("{},{},{:.4}", format_db(r.matched), format_db(r.uniform_mean), r.mean_sigma);
        }
    }
    Ok(())
}

fn cmd_serve(a: &ServeArgs) -> CmdResult {
    let params = load_model(&a.model)?;
    let config = ffdnet_server::ServiceConfig { max_pixels: a.max_pixels };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(ffdnet_server::serve(SocketAddr::new(a.host, a.port), params, config))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Eval(c) => cmd_eval(c),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
