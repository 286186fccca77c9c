use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{is_supported_image, load_image, RgbImage};

/// Where frames come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrameSource {
    /// PPM (and PNG with the `png` feature) files, taken in byte order of file name.
    ImageDirectory(PathBuf),
    /// Concatenated RGB24 frames; `None` reads standard input.
    RawStream {
        path: Option<PathBuf>,
        width: u32,
        height: u32,
    },
}

/// One ingested frame, or the reason it was skipped.
#[derive(Debug)]
pub struct FrameItem {
    pub index: u64,
    pub frame: std::result::Result<RgbImage, String>,
}

/// Lists supported image files in `dir`, sorted by file name bytes.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_supported_image(p))
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Ordered frame stream honouring `stride`. Indices refer to the unstrided sequence.
pub struct Frames {
    inner: Inner,
    stride: u64,
    next_index: u64,
}

enum Inner {
    Files(std::vec::IntoIter<PathBuf>),
    Raw {
        reader: Box<dyn Read + Send>,
        frame_bytes: usize,
        width: u32,
        height: u32,
        done: bool,
    },
}

impl Frames {
    pub fn open(source: &FrameSource, stride: u64) -> Result<Frames> {
        if stride == 0 {
            return Err(Error::Domain("frame stride must be at least 1".into()));
        }
        let inner = match source {
            FrameSource::ImageDirectory(dir) => Inner::Files(list_frames(dir)?.into_iter()),
            FrameSource::RawStream {
                path,
                width,
                height,
            } => {
                if *width == 0 || *height == 0 {
                    return Err(Error::Domain(format!("raw frame size {width}x{height}")));
                }
                let reader: Box<dyn Read + Send> = match path {
                    Some(p) => Box::new(io::BufReader::new(fs::File::open(p)?)),
                    None => Box::new(io::BufReader::new(io::stdin())),
                };
                Inner::Raw {
                    reader,
                    frame_bytes: *width as usize * *height as usize * 3,
                    width: *width,
                    height: *height,
                    done: false,
                }
            }
        };
        Ok(Frames {
            inner,
            stride,
            next_index: 0,
        })
    }

    /// Next selected frame. `Ok(None)` ends the stream; `Err` is fatal.
    pub fn next_frame(&mut self) -> Result<Option<FrameItem>> {
        loop {
            let index = self.next_index;
            let wanted = index % self.stride == 0;
            let item = match &mut self.inner {
                Inner::Files(paths) => {
                    let Some(path) = paths.next() else {
                        return Ok(None);
                    };
                    if !wanted {
                        self.next_index += 1;
                        continue;
                    }
                    match load_image(&path) {
                        Ok(img) => Ok(img),
                        Err(Error::Io(e)) => {
                            log::warn!("skipping frame {index} ({}): {e}", path.display());
                            Err(format!("{}: {e}", path.display()))
                        }
                        Err(e) => return Err(e),
                    }
                }
                Inner::Raw {
                    reader,
                    frame_bytes,
                    width,
                    height,
                    done,
                } => {
                    if *done {
                        return Ok(None);
                    }
                    let mut buf = vec![0u8; *frame_bytes];
                    let got = read_full(reader.as_mut(), &mut buf)?;
                    if got == 0 {
                        *done = true;
                        return Ok(None);
                    }
                    if got < *frame_bytes {
                        *done = true;
                        return Err(Error::Format(format!(
                            "raw stream ends mid-frame: frame {index} has {got} of {frame_bytes} bytes"
                        )));
                    }
                    if !wanted {
                        self.next_index += 1;
                        continue;
                    }
                    Ok(RgbImage::new(*width, *height, buf)?)
                }
            };
            self.next_index += 1;
            return Ok(Some(FrameItem { index, frame: item }));
        }
    }
}

impl Iterator for Frames {
    type Item = Result<FrameItem>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Reads until `buf` is full or the stream ends; returns bytes read.
fn read_full(r: &mut dyn Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}
