//! `storewatch`: frames in, per-person annotations and a demographics summary out.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 on a data or format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, ValueEnum};
use storewatch_core::haar::DetectParams;
use storewatch_core::pipeline::labels::read_labels;
use storewatch_core::pipeline::{
    prepare_output_dir, run_pipeline, FrameSource, Models, OutputFormat, PipelineParams, RunOptions,
};

const USAGE_ERROR: u8 = 1;
const DATA_ERROR: u8 = 2;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "storewatch", version, about = "Detect faces in frames and estimate gender, age and expression")]
#[command(after_help = "Video files can be decoded by an external tool, e.g.\n  \
    ffmpeg -i cam1.mp4 -f rawvideo -pix_fmt rgb24 - | storewatch --input - --width 944 --height 576 ...\n\n\
    Log verbosity is read from STOREWATCH_LOG (error, warn, info, debug, trace).")]
struct Args {
    /// Frame directory, a raw RGB24 file (*.raw) or `-` for raw frames on stdin
    #[arg(long)]
    input: String,
    /// Frame width in raw mode
    #[arg(long)]
    width: Option<u32>,
    /// Frame height in raw mode
    #[arg(long)]
    height: Option<u32>,
    /// Process every Nth frame
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    frame_stride: u64,
    /// Haar cascade XML
    #[arg(long)]
    cascade: PathBuf,
    /// WRN-16-8 weight archive
    #[arg(long)]
    age_gender_weights: PathBuf,
    /// mini-Xception weight archive
    #[arg(long)]
    expression_weights: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Also write frames with boxes and labels drawn on them
    #[arg(long)]
    annotate: bool,
    #[arg(long, default_value_t = 1.1)]
    scale_factor: f64,
    #[arg(long, default_value_t = 3)]
    min_neighbors: u32,
    /// Smallest face side in pixels
    #[arg(long, default_value_t = 30)]
    min_face_size: u32,
    /// Context added around each face box, as a fraction of its size
    #[arg(long, default_value_t = 0.4)]
    crop_margin: f64,
    /// Worker threads [default: available cores]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Hand labels to score predictions against (CSV: frame,x,y,w,h,gender,age_group,expression)
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn usage_error(kind: ErrorKind, message: &str) -> ExitCode {
    // clap's own exit code for usage errors is 2, which we reserve for data errors.
    let _ = Args::command().error(kind, message).print();
    ExitCode::from(USAGE_ERROR)
}

fn source_for(args: &Args) -> Result<FrameSource, String> {
    let raw = |path: Option<PathBuf>| match (args.width, args.height) {
        (Some(width), Some(height)) if width > 0 && height > 0 => Ok(FrameSource::RawStream { path, width, height }),
        _ => Err("raw input needs positive --width and --height".to_string()),
    };
    if args.input == "-" {
        return raw(None);
    }
    let path = Path::new(&args.input);
    if path.is_dir() || !path.exists() {
        Ok(FrameSource::ImageDirectory(path.to_path_buf()))
    } else {
        raw(Some(path.to_path_buf()))
    }
}

fn run(args: &Args, source: FrameSource) -> storewatch_core::Result<()> {
    prepare_output_dir(&args.out)?;
    let params = PipelineParams {
        detect: DetectParams {
            scale_factor: args.scale_factor,
            min_neighbors: args.min_neighbors,
            min_size: Some((args.min_face_size, args.min_face_size)),
            ..DetectParams::default()
        },
        crop_margin: args.crop_margin,
    };
    params.detect.validate()?;
    let labels = args.labels.as_deref().map(read_labels).transpose()?;
    let models = Models::load(&args.cascade, &args.age_gender_weights, &args.expression_weights)?;
    let threads = match args.threads {
        Some(n) => n as usize,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let options = RunOptions {
        out_dir: args.out.clone(),
        format: match args.format {
            Format::Jsonl => OutputFormat::Jsonl,
            Format::Csv => OutputFormat::Csv,
            Format::Both => OutputFormat::Both,
        },
        annotate: args.annotate,
        threads,
        frame_stride: args.frame_stride,
        params,
        labels,
    };
    let outcome = run_pipeline(&models, &source, &options)?;
    let r = &outcome.report;
    println!(
        "{} frames processed, {} skipped, {} faces ({} failed); outputs in {}",
        r.frames_processed,
        r.frames_skipped,
        r.total_detections,
        r.failed_detections,
        args.out.display()
    );
    if let Some(ev) = &outcome.evaluation {
        println!("{} of {} labelled faces matched", ev.matched_faces, ev.labeled_faces);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STOREWATCH_LOG", "warn")).init();
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE_ERROR),
            };
        }
    };
    let source = match source_for(&args) {
        Ok(s) => s,
        Err(msg) => return usage_error(ErrorKind::MissingRequiredArgument, &msg),
    };
    match run(&args, source) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("storewatch: {e}");
            ExitCode::from(DATA_ERROR)
        }
    }
}
