//! Haar-cascade face detection over integral images.

mod cascade;
mod detect;
mod group;
mod integral;

pub use cascade::{parse_cascade_xml, Cascade, Stage, WeakClassifier, WeightedRect};
pub use detect::{detect_multiscale, eval_window, scan_windows, DetectParams, Detection};
pub use group::{group_rectangles, similar, BoxI};
pub use integral::{compute_integral, IntegralImage};

impl Cascade {
    pub fn from_file(path: impl AsRef<std::path::Path>) -> crate::Result<Cascade> {
        parse_cascade_xml(&std::fs::read_to_string(path)?)
    }
}
