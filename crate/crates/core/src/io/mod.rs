//! Frame ingestion and run configuration.
//!
//! Frames come from a directory of still images (PNG or PNM, 8 or 16 bit,
//! sorted by file name) or from a raw stream of 8-bit luma planes. Color
//! inputs are reduced to BT.601 luma `0.299 R + 0.587 G + 0.114 B` on the
//! 0-255 scale. A video decoder (ideally one compensating the in-loop
//! filter) is expected to produce these inputs beforehand.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::pipeline::{select_frames, PipelineConfig};
use crate::prnu::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSourceKind {
    ImageSequenceDir,
    RawLumaStream,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSource {
    pub kind: FrameSourceKind,
    pub path: PathBuf,
    /// Frame dimensions; required for raw streams, checked for images.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    /// Text file of I-frame indices (whitespace or comma separated, `#`
    /// starts a comment).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iframe_index_file: Option<PathBuf>,
}

impl FrameSource {
    pub fn image_dir(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: FrameSourceKind::ImageSequenceDir,
            path: path.into(),
            width: None,
            height: None,
            iframe_index_file: None,
        }
    }

    pub fn raw(path: impl Into<PathBuf>, width: usize, height: usize) -> Self {
        Self {
            kind: FrameSourceKind::RawLumaStream,
            path: path.into(),
            width: Some(width),
            height: Some(height),
            iframe_index_file: None,
        }
    }

    pub fn with_iframes(mut self, path: impl Into<PathBuf>) -> Self {
        self.iframe_index_file = Some(path.into());
        self
    }
}

/// Which frames [`load_frames`] returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameSelection {
    All,
    /// I frames after the first, padded with evenly spaced other frames.
    Analysis { n_frames: usize },
}

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "pgm", "ppm", "pnm", "pbm", "pam"];

fn luma(img: DynamicImage) -> Field {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let c = img.color();
    let deep = c.bits_per_pixel() / c.channel_count() as u16 > 8;
    // 16-bit samples map onto the 0-255 scale without rounding.
    let (k, rgb): (f64, Vec<[f64; 3]>) = match (c.has_color(), deep) {
        (true, false) => (1.0, img.to_rgb8().pixels().map(|p| p.0.map(f64::from)).collect()),
        (true, true) => (257.0, img.to_rgb16().pixels().map(|p| p.0.map(f64::from)).collect()),
        (false, false) => (1.0, img.to_luma8().pixels().map(|p| [f64::from(p.0[0]); 3]).collect()),
        (false, true) => (257.0, img.to_luma16().pixels().map(|p| [f64::from(p.0[0]); 3]).collect()),
    };
    let data = rgb
        .into_iter()
        .map(|[r, g, b]| if c.has_color() { (0.299 * r + 0.587 * g + 0.114 * b) / k } else { r / k })
        .collect();
    Field::new(w, h, data).expect("decoded buffer matches image size")
}

/// Image files of a directory, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::FrameSource(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::FrameSource(format!("no images in {}", dir.display())));
    }
    Ok(files)
}

/// Parses an I-frame index list; indices must be strictly increasing.
pub fn parse_iframe_indices(text: &str) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: usize = tok
                .parse()
                .map_err(|_| Error::FrameSource(format!("bad I-frame index {tok:?}")))?;
            if out.last().is_some_and(|&l| v <= l) {
                return Err(Error::FrameSource("I-frame indices must be sorted and unique".into()));
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn check_dims(src: &FrameSource, w: usize, h: usize) -> Result<()> {
    let (ew, eh) = (src.width.unwrap_or(w), src.height.unwrap_or(h));
    if (ew, eh) != (w, h) {
        return Err(Error::DimensionMismatch {
            expected_width: ew,
            expected_height: eh,
            width: w,
            height: h,
        });
    }
    Ok(())
}

fn read_all(src: &FrameSource) -> Result<Vec<Field>> {
    match src.kind {
        FrameSourceKind::ImageSequenceDir => {
            let mut out: Vec<Field> = Vec::new();
            for p in list_images(&src.path)? {
                let f = luma(image::open(&p)?);
                check_dims(src, f.width(), f.height())?;
                if let Some(first) = out.first() {
                    first.same_dims(&f)?;
                }
                out.push(f);
            }
            Ok(out)
        }
        FrameSourceKind::RawLumaStream => {
            let (Some(w), Some(h)) = (src.width, src.height) else {
                return Err(Error::FrameSource("raw streams need width and height".into()));
            };
            if w == 0 || h == 0 {
                return Err(Error::FrameSource("raw frame dimensions must be positive".into()));
            }
            let bytes = fs::read(&src.path).map_err(|e| Error::FrameSource(format!("{}: {e}", src.path.display())))?;
            if bytes.is_empty() || bytes.len() % (w * h) != 0 {
                return Err(Error::FrameSource(format!(
                    "stream of {} bytes is not a whole number of {w}x{h} frames",
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(w * h)
                .map(|c| Field::new(w, h, c.iter().map(|&b| b as f64).collect()))
                .collect::<Result<_>>()?)
        }
    }
}

/// Loads frames in index order, flags I frames from the sidecar file and
/// applies the selection rule.
pub fn load_frames(src: &FrameSource, selection: FrameSelection) -> Result<Vec<Frame>> {
    let fields = read_all(src)?;
    let iframes = match &src.iframe_index_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::FrameSource(format!("{}: {e}", p.display())))?;
            parse_iframe_indices(&text)?
        }
        None => Vec::new(),
    };
    if let Some(&last) = iframes.last() {
        if last >= fields.len() {
            return Err(Error::FrameSource(format!(
                "I-frame index {last} beyond the {} frames",
                fields.len()
            )));
        }
    }
    let frames: Vec<Frame> = fields
        .into_iter()
        .enumerate()
        .map(|(i, f)| Ok(Frame::new(f, i)?.with_iframe(iframes.binary_search(&i).is_ok())))
        .collect::<Result<_>>()?;
    Ok(match selection {
        FrameSelection::All => frames,
        FrameSelection::Analysis { n_frames } => select_frames(&frames, n_frames)
            .into_iter()
            .map(|i| frames[i].clone())
            .collect(),
    })
}

/// Writes frames as 8-bit grayscale PNGs named `frame_00000.png`, ...
pub fn write_frames(frames: &[Frame], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for f in frames {
        let (w, h) = f.pixels.dims();
        let data: Vec<u8> = f.pixels.as_slice().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        let img = GrayImage::from_raw(w as u32, h as u32, data).ok_or_else(|| Error::Format("frame buffer size".into()))?;
        img.save(dir.join(format!("frame_{:05}.png", f.frame_index)))?;
    }
    Ok(())
}

/// Writes the I-frame sidecar for `frames`.
pub fn write_iframe_indices(frames: &[Frame], path: &Path) -> Result<()> {
    let idx: Vec<String> = frames.iter().filter(|f| f.is_iframe).map(|f| f.frame_index.to_string()).collect();
    fs::write(path, idx.join("\n") + "\n")?;
    Ok(())
}

/// Run configuration file (TOML): pipeline parameters plus optional paths.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<FrameSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.pipeline.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Luma, Rgb};

    fn gray_dir(n: usize, w: u32, h: u32) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..n {
            let img = GrayImage::from_fn(w, h, |x, y| Luma([((x + 3 * y + 7 * i as u32) % 256) as u8]));
            img.save(dir.path().join(format!("f{i:03}.png"))).unwrap();
        }
        dir
    }

    #[test]
    fn image_dir_without_sidecar_has_no_iframes() {
        let d = gray_dir(12, 8, 6);
        let frames = load_frames(&FrameSource::image_dir(d.path()), FrameSelection::All).unwrap();
        assert_eq!(frames.len(), 12);
        assert!(frames.iter().all(|f| !f.is_iframe));
        assert_eq!(frames[2].pixels.get(1, 1), ((1 + 3 + 14) % 256) as f64);
        let sel = load_frames(&FrameSource::image_dir(d.path()), FrameSelection::Analysis { n_frames: 3 }).unwrap();
        let idx: Vec<usize> = sel.iter().map(|f| f.frame_index).collect();
        assert_eq!(idx, vec![2, 6, 10]);
    }

    #[test]
    fn sidecar_flags_exactly_the_listed_frames() {
        let d = gray_dir(70, 4, 4);
        let side = d.path().join("iframes.txt");
        fs::write(&side, "# I frames\n0, 30\n60\n").unwrap();
        let src = FrameSource::image_dir(d.path()).with_iframes(&side);
        let frames = load_frames(&src, FrameSelection::All).unwrap();
        let flagged: Vec<usize> = frames.iter().filter(|f| f.is_iframe).map(|f| f.frame_index).collect();
        assert_eq!(flagged, vec![0, 30, 60]);
    }

    #[test]
    fn malformed_sidecars_are_rejected() {
        assert!(parse_iframe_indices("0 30 30").is_err());
        assert!(parse_iframe_indices("30 0").is_err());
        assert!(parse_iframe_indices("0 x").is_err());
        assert_eq!(parse_iframe_indices("").unwrap(), Vec::<usize>::new());
        let d = gray_dir(3, 4, 4);
        let side = d.path().join("i.txt");
        fs::write(&side, "5").unwrap();
        let src = FrameSource::image_dir(d.path()).with_iframes(&side);
        assert!(load_frames(&src, FrameSelection::All).is_err());
    }

    #[test]
    fn raw_stream_size_must_divide() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("v.raw");
        fs::write(&p, vec![7u8; 4 * 3 * 2 + 1]).unwrap();
        assert!(matches!(load_frames(&FrameSource::raw(&p, 4, 3), FrameSelection::All), Err(Error::FrameSource(_))));
        fs::write(&p, (0..24u8).collect::<Vec<_>>()).unwrap();
        let frames = load_frames(&FrameSource::raw(&p, 4, 3), FrameSelection::All).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].pixels.get(0, 0), 12.0);
    }

    #[test]
    fn color_uses_bt601_luma() {
        let d = tempfile::tempdir().unwrap();
        let img: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_pixel(2, 2, Rgb([200, 100, 50]));
        img.save(d.path().join("c.png")).unwrap();
        let f = load_frames(&FrameSource::image_dir(d.path()), FrameSelection::All).unwrap();
        let expect = 0.299 * 200.0 + 0.587 * 100.0 + 0.114 * 50.0;
        assert!((f[0].pixels.get(0, 0) - expect).abs() < 1e-3);
    }

    #[test]
    fn sixteen_bit_images_keep_precision() {
        let d = tempfile::tempdir().unwrap();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_pixel(2, 2, Luma([32_896]));
        img.save(d.path().join("a.png")).unwrap();
        let f = load_frames(&FrameSource::image_dir(d.path()), FrameSelection::All).unwrap();
        assert!((f[0].pixels.get(1, 1) - 128.0).abs() < 1e-4);
    }

    #[test]
    fn mismatched_image_sizes_are_rejected() {
        let d = gray_dir(2, 8, 6);
        GrayImage::new(5, 5).save(d.path().join("z.png")).unwrap();
        assert!(matches!(
            load_frames(&FrameSource::image_dir(d.path()), FrameSelection::All),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut src = FrameSource::image_dir(gray_dir(1, 8, 6).path());
        src.width = Some(9);
        assert!(load_frames(&src, FrameSelection::All).is_err());
    }

    #[test]
    fn write_then_read_round_trips() {
        let d = gray_dir(3, 6, 5);
        let frames = load_frames(&FrameSource::image_dir(d.path()), FrameSelection::All).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_frames(&frames, out.path()).unwrap();
        let back = load_frames(&FrameSource::image_dir(out.path()), FrameSelection::All).unwrap();
        for (a, b) in frames.iter().zip(&back) {
            assert_eq!(a.pixels, b.pixels);
        }
    }

    #[test]
    fn run_config_defaults_and_validation() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c.pipeline, PipelineConfig::default());
        let c = RunConfig::from_toml_str(
            "reference = \"ref.prnu\"\n[pipeline]\nn_frames = 10\n[pipeline.search]\nvariant = \"constrained\"\nshift_range = 20\n[pipeline.validation]\npce_vld = 44.0\nn_sub = 2\npce_sub = 2.0\n",
        )
        .unwrap();
        assert_eq!(c.pipeline.n_frames, 10);
        assert_eq!(c.pipeline.search.shift_range, 20);
        assert_eq!(c.pipeline.validation.pce_vld, 44.0);
        assert!(RunConfig::from_toml_str("[pipeline]\nn_frames = 0\n").is_err());
        assert!(RunConfig::from_toml_str("[pipeline]\nbogus = 1\n").is_err());
        let again = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
    }
}
