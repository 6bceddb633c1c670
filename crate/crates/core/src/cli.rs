//! Command-line front end. [`run`] parses arguments, dispatches to the
//! library and maps failures to exit codes: 2 for usage errors, 1 for
//! everything else, each reported as one `error: <kind>: <message>` line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::augment::{AngleUnit, AugmentParams};
use crate::dataset_io::{
    is_grayscale, list_files, load_corpus, read_mask, read_rgb, read_soft_gray, scan_corpus, write_binary,
    write_channels, write_label_pgm, write_mask, write_rgb, write_soft_gray, DatasetConfig, IMAGE_EXTENSIONS,
    MASK_EXTENSIONS,
};
use crate::engine::{AdamConfig, Layer};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_suite, EvalOptions, Prediction, SoftStack, DEFAULT_CUTOFF};
use crate::network::{
    infer_image, load_checkpoint, save_checkpoint, History, InferOutput, Network, NetworkSpec, TrainConfig, Variant,
};
use crate::palette::{derive_saliency, to_channels, ClassConfig, ClassMode, DEFAULT_THRESHOLD};
use crate::plots::{correlation_heatmap, intensity_lines, occurrence_bars};
use crate::resample::Resolution;
use crate::stats::{correlation_csv, intensity_csv, occurrence_csv, CorpusStats};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SUIMKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "suimkit", version, about = "Underwater image segmentation toolkit")]
pub struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a palette-colored mask from a label map or a noisy color mask.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a color mask into a grayscale label map (class index per pixel).
    Decode {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a mask into one binary image per output channel.
    Channels {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = ClassMode::Major5)]
        mode: ClassMode,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Binary saliency map (divers, robots, fish, wrecks) from a mask.
    Saliency {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        /// Defaults to `<stem>_saliency.png` next to the mask.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted masks against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = ClassMode::Major5)]
        mode: ClassMode,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long, default_value_t = DEFAULT_CUTOFF)]
        cutoff: f32,
        /// Average every category over all images, present or not.
        #[arg(long)]
        all_images: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Category occurrence, co-occurrence correlation and intensity histograms.
    Stats {
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        bins: usize,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train a network on a corpus with `images/` and `masks/` folders.
    Train(TrainArgs),
    /// Segment images with a trained checkpoint.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// An image file or a directory of images.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CUTOFF)]
        cutoff: f32,
        /// Also write per-channel probabilities as grayscale images.
        #[arg(long)]
        soft: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Measure forward-pass throughput on random input.
    Bench {
        #[arg(long, default_value_t = Variant::Rsb)]
        variant: Variant,
        #[arg(long, default_value_t = ClassMode::Major5)]
        mode: ClassMode,
        /// Defaults to the variant's reference resolution.
        #[arg(long)]
        resolution: Option<Resolution>,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 3)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus root; may be omitted when `--config` names one.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON dataset config with root, resolution, mode and threshold.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = Variant::Rsb)]
    pub variant: Variant,
    #[arg(long)]
    pub mode: Option<ClassMode>,
    #[arg(long)]
    pub resolution: Option<Resolution>,
    /// Base filter count; 64 gives the reference networks.
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long)]
    pub threshold: Option<u8>,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.0)]
    pub val_split: f64,
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

/// Augmentation ranges; unset values keep the training defaults.
#[derive(Debug, Args, Default)]
pub struct AugmentArgs {
    #[arg(long)]
    pub rotation_range: Option<f64>,
    #[arg(long)]
    pub width_shift: Option<f64>,
    #[arg(long)]
    pub height_shift: Option<f64>,
    #[arg(long)]
    pub shear: Option<f64>,
    #[arg(long)]
    pub zoom: Option<f64>,
    #[arg(long)]
    pub angle_unit: Option<AngleUnit>,
    #[arg(long)]
    pub no_flip: bool,
    /// Train on the samples as they are.
    #[arg(long, conflicts_with_all = ["rotation_range", "width_shift", "height_shift", "shear", "zoom", "no_flip"])]
    pub no_augment: bool,
}

impl AugmentArgs {
    pub fn params(&self) -> Option<AugmentParams> {
        if self.no_augment {
            return None;
        }
        let d = AugmentParams::default();
        Some(AugmentParams {
            rotation_range: self.rotation_range.unwrap_or(d.rotation_range),
            width_shift: self.width_shift.unwrap_or(d.width_shift),
            height_shift: self.height_shift.unwrap_or(d.height_shift),
            shear: self.shear.unwrap_or(d.shear),
            zoom: self.zoom.unwrap_or(d.zoom),
            horizontal_flip: !self.no_flip,
            angle_unit: self.angle_unit.unwrap_or(d.angle_unit),
            seed: d.seed,
        })
    }
}

/// Parse `args` (including the program name) and execute. Returns the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: usage: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    Logger::install(cli.verbose);
    let result = configure_threads().and_then(|()| execute(cli.command));
    Logger::close_sidecar();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), one_line(&e.to_string()));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Encode { input, threshold, out } => {
            write_mask(&out, &read_mask(&input, threshold)?)?;
            println!("{}", out.display());
        }
        Command::Decode { mask, threshold, out } => {
            write_label_pgm(&out, &read_mask(&mask, threshold)?)?;
            println!("{}", out.display());
        }
        Command::Channels { mask, mode, threshold, out } => {
            let map = read_mask(&mask, threshold)?;
            let config = ClassConfig::new(mode);
            create_dir(&out)?;
            for path in write_channels(&out, &stem_of(&mask), &to_channels(&map, &config), &config)? {
                println!("{}", path.display());
            }
        }
        Command::Saliency { mask, threshold, out } => {
            let out = out.unwrap_or_else(|| mask.with_file_name(format!("{}_saliency.png", stem_of(&mask))));
            write_binary(&out, &derive_saliency(&read_mask(&mask, threshold)?))?;
            println!("{}", out.display());
        }
        Command::Eval {
            pred,
            gt,
            mode,
            threshold,
            cutoff,
            all_images,
            out,
        } => eval(&pred, &gt, mode, threshold, cutoff, all_images, out.as_deref())?,
        Command::Stats {
            masks,
            images,
            bins,
            threshold,
            out,
        } => stats(&masks, images.as_deref(), bins, threshold, &out)?,
        Command::Train(args) => train(args)?,
        Command::Infer {
            checkpoint,
            input,
            cutoff,
            soft,
            out,
        } => infer(&checkpoint, &input, cutoff, soft, &out)?,
        Command::Bench {
            variant,
            mode,
            resolution,
            width,
            iters,
            warmup,
            seed,
        } => bench(variant, mode, resolution, width, iters, warmup, seed)?,
    }
    Ok(())
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mask".into())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Predictions are palette masks or label PGMs; in saliency mode a
/// grayscale file is read as a soft map and thresholded at `cutoff`.
fn read_prediction(path: &Path, mode: ClassMode, threshold: u8) -> Result<Prediction> {
    let is_pgm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if mode == ClassMode::Saliency1 && !is_pgm && is_grayscale(path)? {
        let (w, h, data) = read_soft_gray(path)?;
        return Ok(Prediction::Soft(SoftStack::new(1, w, h, data)?));
    }
    Ok(Prediction::Labels(read_mask(path, threshold)?))
}

fn eval(
    pred: &Path,
    gt: &Path,
    mode: ClassMode,
    threshold: u8,
    cutoff: f32,
    all_images: bool,
    out: Option<&Path>,
) -> Result<()> {
    let preds: BTreeMap<String, Prediction> = list_files(pred, MASK_EXTENSIONS)?
        .into_iter()
        .map(|(stem, path)| Ok((stem, read_prediction(&path, mode, threshold)?)))
        .collect::<Result<_>>()?;
    let gts = list_files(gt, MASK_EXTENSIONS)?
        .into_iter()
        .map(|(stem, path)| Ok((stem, read_mask(&path, threshold)?)))
        .collect::<Result<_>>()?;
    let mut opts = EvalOptions::new(ClassConfig::new(mode));
    opts.cutoff = cutoff;
    opts.presence_rule = !all_images;
    let report = evaluate_suite(&preds, &gts, &opts)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    print!("{}", report.to_csv());
    if let Some(dir) = out {
        create_dir(dir)?;
        write_text(&dir.join("report.csv"), &report.to_csv())?;
        write_text(&dir.join("report.json"), &report.to_json()?)?;
        write_text(&dir.join("per_image.csv"), &report.per_image_csv())?;
    }
    Ok(())
}

fn stats(masks: &Path, images: Option<&Path>, bins: usize, threshold: u8, out: &Path) -> Result<()> {
    let masks: Vec<_> = list_files(masks, MASK_EXTENSIONS)?
        .values()
        .map(|p| read_mask(p, threshold))
        .collect::<Result<_>>()?;
    let images: Vec<_> = match images {
        Some(dir) => list_files(dir, IMAGE_EXTENSIONS)?
            .values()
            .map(read_rgb)
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let s = CorpusStats::compute(&masks, &images, bins)?;
    create_dir(out)?;
    write_text(&out.join("occurrence.csv"), &occurrence_csv(&s.occurrence))?;
    write_rgb(out.join("occurrence.png"), &occurrence_bars(&s.occurrence))?;
    if let Some(m) = &s.correlation {
        write_text(&out.join("correlation.csv"), &correlation_csv(m))?;
        write_rgb(out.join("correlation.png"), &correlation_heatmap(m))?;
    }
    if let Some(h) = &s.intensity {
        write_text(&out.join("intensity.csv"), &intensity_csv(h))?;
        write_rgb(out.join("intensity.png"), &intensity_lines(h))?;
    }
    write_text(&out.join("stats.json"), &serde_json::to_string_pretty(&s)?)?;
    print!("{}", occurrence_csv(&s.occurrence));
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let file_config = args.config.as_deref().map(DatasetConfig::load).transpose()?;
    let root = args
        .data
        .clone()
        .or_else(|| file_config.as_ref().map(|c| c.root.clone()))
        .ok_or_else(|| Error::InvalidParameter("train needs --data or a --config with a root".into()))?;
    let mode = args
        .mode
        .or(file_config.as_ref().map(|c| c.mode))
        .unwrap_or(ClassMode::Major5);
    let threshold = args
        .threshold
        .or(file_config.as_ref().map(|c| c.threshold))
        .unwrap_or(DEFAULT_THRESHOLD);
    let base = NetworkSpec::reference(args.variant, mode.output_channels());
    let resolution = args
        .resolution
        .or(file_config.as_ref().map(|c| c.resolution))
        .unwrap_or(base.input_resolution);
    let spec = match args.variant {
        Variant::Rsb => NetworkSpec::rsb_scaled(mode.output_channels(), resolution, args.width),
        Variant::Vgg => NetworkSpec::vgg_scaled(mode.output_channels(), resolution, args.width),
    }
    .with_seed(args.seed);
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        adam: AdamConfig {
            lr: args.lr,
            beta1: args.beta1,
            ..Default::default()
        },
        augment: args.augment.params(),
        validation_split: args.val_split,
        seed: args.seed,
        checkpoint_dir: Some(args.out.clone()),
        checkpoint_every: args.checkpoint_every,
    };

    create_dir(&args.out)?;
    Logger::open_sidecar(&args.out.join("train.log"))?;
    log::info!("corpus {} mode {mode} resolution {resolution}", root.display());
    let manifest = scan_corpus(&root)?;
    if manifest.is_empty() {
        return Err(Error::EmptyInput(format!("no image/mask pairs under {}", root.display())));
    }
    let samples = load_corpus(&manifest, Some(resolution), threshold)?;
    let mut net = Network::<f32>::build(&spec)?;
    log::info!("{} samples, {} parameters", samples.len(), net.param_count());
    save_checkpoint(&net, None, args.out.join("initial.ckpt"))?;
    write_text(&args.out.join("spec.json"), &spec.to_json()?)?;
    write_text(&args.out.join("config.json"), &serde_json::to_string_pretty(&config)?)?;

    let history = if config.epochs == 0 {
        History::default()
    } else {
        crate::network::fit(&mut net, &samples, &config)?
    };
    save_checkpoint(&net, None, args.out.join("final.ckpt"))?;
    write_text(&args.out.join("history.json"), &serde_json::to_string_pretty(&history)?)?;
    write_text(&args.out.join("history.csv"), &history_csv(&history))?;
    log::info!("finished after {} steps", history.steps);
    println!("{}", args.out.join("final.ckpt").display());
    Ok(())
}

fn history_csv(h: &History) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for (i, loss) in h.train_loss.iter().enumerate() {
        let val = h.val_loss.get(i).map(|v| format!("{v:.8}")).unwrap_or_default();
        out += &format!("{},{loss:.8},{val}\n", i + 1);
    }
    out
}

fn infer(checkpoint: &Path, input: &Path, cutoff: f32, soft: bool, out: &Path) -> Result<()> {
    let (mut net, _) = load_checkpoint::<f32>(checkpoint)?;
    let inputs: Vec<(String, PathBuf)> = if input.is_dir() {
        list_files(input, IMAGE_EXTENSIONS)?.into_iter().collect()
    } else {
        vec![(stem_of(input), input.to_path_buf())]
    };
    if inputs.is_empty() {
        return Err(Error::EmptyInput(format!("no images in {}", input.display())));
    }
    create_dir(out)?;
    let names = ClassConfig::new(net.spec().class_mode()?).channel_names().to_vec();
    for (stem, path) in inputs {
        let (result, probs) = infer_image(&mut net, &read_rgb(&path)?, cutoff)?;
        let target = out.join(format!("{stem}.png"));
        match &result {
            InferOutput::Labels(map) => write_mask(&target, map)?,
            InferOutput::Saliency(map) => write_binary(&target, map)?,
        }
        if soft {
            for (c, name) in names.iter().enumerate() {
                let p = out.join(format!("{stem}_{name}_soft.png"));
                write_soft_gray(&p, probs.width, probs.height, probs.channel(c))?;
            }
        }
        println!("{}", target.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchReport {
    variant: Variant,
    resolution: Resolution,
    outputs: usize,
    params: usize,
    iters: usize,
    seconds_per_frame: f64,
    fps: f64,
}

fn bench(
    variant: Variant,
    mode: ClassMode,
    resolution: Option<Resolution>,
    width: usize,
    iters: usize,
    warmup: usize,
    seed: u64,
) -> Result<()> {
    if iters == 0 {
        return Err(Error::InvalidParameter("bench needs at least one iteration".into()));
    }
    let n = mode.output_channels();
    let resolution = resolution.unwrap_or(NetworkSpec::reference(variant, n).input_resolution);
    let spec = match variant {
        Variant::Rsb => NetworkSpec::rsb_scaled(n, resolution, width),
        Variant::Vgg => NetworkSpec::vgg_scaled(n, resolution, width),
    }
    .with_seed(seed);
    let mut net = Network::<f32>::build(&spec)?;
    let x = net.probe_input(1, seed);
    for _ in 0..warmup {
        net.predict(&x)?;
    }
    let start = Instant::now();
    for _ in 0..iters {
        net.predict(&x)?;
    }
    let per_frame = start.elapsed().as_secs_f64() / iters as f64;
    let report = BenchReport {
        variant,
        resolution,
        outputs: n,
        params: net.param_count(),
        iters,
        seconds_per_frame: per_frame,
        fps: 1.0 / per_frame,
    };
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

/// Stderr logger that also copies records into an optional sidecar file
/// with wall-clock timestamps. Timestamps never reach other artifacts.
struct Logger {
    verbose: std::sync::atomic::AtomicBool,
    sidecar: Mutex<Option<File>>,
}

static LOGGER: OnceLock<Logger> = OnceLock::new();

impl Logger {
    fn get() -> &'static Logger {
        LOGGER.get_or_init(|| Logger {
            verbose: false.into(),
            sidecar: Mutex::new(None),
        })
    }

    fn install(verbose: bool) {
        let logger = Self::get();
        logger.verbose.store(verbose, std::sync::atomic::Ordering::Relaxed);
        if log::set_logger(logger).is_ok() {
            log::set_max_level(log::LevelFilter::Info);
        }
    }

    fn open_sidecar(path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        *Self::get().sidecar.lock().unwrap_or_else(|e| e.into_inner()) = Some(file);
        Ok(())
    }

    fn close_sidecar() {
        Self::get().sidecar.lock().unwrap_or_else(|e| e.into_inner()).take();
    }
}

impl log::Log for Logger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Info
    }

    fn log(&self, record: &log::Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let verbose = self.verbose.load(std::sync::atomic::Ordering::Relaxed);
        if verbose || record.level() <= log::Level::Warn {
            eprintln!("{}: {}", record.level().as_str().to_lowercase(), record.args());
        }
        if let Some(f) = self.sidecar.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            let t = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
            let _ = writeln!(f, "{}.{:03} {} {}", t.as_secs(), t.subsec_millis(), record.level(), record.args());
        }
    }

    fn flush(&self) {
        if let Some(f) = self.sidecar.lock().unwrap_or_else(|e| e.into_inner()).as_mut() {
            let _ = f.flush();
        }
    }
}
