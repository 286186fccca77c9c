use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::labels::{evaluate, Evaluation, FaceLabel};
use super::output::{csv_header, csv_rows, write_jsonl_line, write_summary};
use super::report::SummaryReport;
use super::source::{FrameSource, Frames};
use super::{annotate_frame, process_frame, FrameAnnotation, Models, PipelineParams};
use crate::error::{Error, Result};
use crate::imaging::write_ppm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Jsonl,
    Csv,
    Both,
}

impl OutputFormat {
    fn jsonl(self) -> bool {
        matches!(self, OutputFormat::Jsonl | OutputFormat::Both)
    }

    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub annotate: bool,
    pub threads: usize,
    pub frame_stride: u64,
    pub params: PipelineParams,
    pub labels: Option<Vec<FaceLabel>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub report: SummaryReport,
    pub evaluation: Option<Evaluation>,
}

pub const JSONL_FILE: &str = "annotations.jsonl";
pub const CSV_FILE: &str = "detections.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const ANNOTATED_DIR: &str = "annotated";

/// Creates `dir` and proves it is writable, so a bad path fails before any work.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    File::create(&probe)?;
    fs::remove_file(&probe)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Streams every selected frame through the models and writes all outputs.
///
/// Frames are processed in parallel batches; results are written strictly in
/// frame order, so output does not depend on the thread count.
pub fn run_pipeline(models: &Models, source: &FrameSource, options: &RunOptions) -> Result<RunOutcome> {
    prepare_output_dir(&options.out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;

    let out = &options.out_dir;
    let mut jsonl = if options.format.jsonl() {
        Some(BufWriter::new(File::create(out.join(JSONL_FILE))?))
    } else {
        None
    };
    let mut csv = if options.format.csv() {
        let mut w = csv::Writer::from_path(out.join(CSV_FILE)).map_err(csv_err)?;
        w.write_record(csv_header()).map_err(csv_err)?;
        Some(w)
    } else {
        None
    };
    if options.annotate {
        fs::create_dir_all(out.join(ANNOTATED_DIR))?;
    }

    let mut frames = Frames::open(source, options.frame_stride)?;
    let batch_size = options.threads.max(1) * 2;
    let mut report = SummaryReport::default();
    let mut kept: Vec<FrameAnnotation> = Vec::new();
    loop {
        let mut batch = Vec::with_capacity(batch_size);
        while batch.len() < batch_size {
            match frames.next_frame()? {
                Some(item) => batch.push(item),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let results: Vec<Option<Result<FrameAnnotation>>> = pool.install(|| {
            batch
                .par_iter()
                .map(|item| {
                    item.frame
                        .as_ref()
                        .ok()
                        .map(|img| process_frame(img, item.index, models, &options.params))
                })
                .collect()
        });
        for (item, result) in batch.iter().zip(results) {
            let Some(result) = result else {
                report.frames_skipped += 1;
                continue;
            };
            let annotation = result?;
            report.add(&annotation);
            if let Some(w) = jsonl.as_mut() {
                write_jsonl_line(w, &annotation)?;
            }
            if let Some(w) = csv.as_mut() {
                for row in csv_rows(&annotation) {
                    w.write_record(row).map_err(csv_err)?;
                }
            }
            if options.annotate {
                let img = item.frame.as_ref().expect("processed frames were read");
                let path = out.join(ANNOTATED_DIR).join(format!("frame_{:06}.ppm", item.index));
                write_ppm(&annotate_frame(img, &annotation), BufWriter::new(File::create(path)?))?;
            }
            log::debug!("frame {}: {} faces", annotation.frame_index, annotation.persons.len());
            if options.labels.is_some() {
                kept.push(annotation);
            }
        }
    }

    if let Some(mut w) = jsonl {
        w.flush()?;
    }
    if let Some(mut w) = csv {
        w.flush()?;
    }
    let mut summary = BufWriter::new(File::create(out.join(SUMMARY_FILE))?);
    write_summary(&mut summary, &report)?;
    summary.flush()?;

    let evaluation = options.labels.as_ref().map(|labels| evaluate(labels, &kept));
    if let Some(ev) = &evaluation {
        let mut w = BufWriter::new(File::create(out.join(EVALUATION_FILE))?);
        serde_json::to_writer_pretty(&mut w, ev).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    log::info!(
        "{} frames, {} faces ({} failed, {} frames skipped)",
        report.frames_processed,
        report.total_detections,
        report.failed_detections,
        report.frames_skipped
    );
    Ok(RunOutcome { report, evaluation })
}
