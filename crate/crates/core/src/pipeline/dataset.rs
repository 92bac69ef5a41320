use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use image::codecs::gif::GifDecoder;
use image::AnimationDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::training::{TrainingData, Video};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "gif"];

/// Center crop to a square, then resample to `resolution`.
pub fn preprocess(image: &Image, resolution: usize) -> Image {
    image.center_crop_square().resize(resolution, resolution)
}

fn has_extension(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ImageDataset {
    pub root: PathBuf,
    pub files: Vec<PathBuf>,
    pub resolution: usize,
    pub images: Vec<Image>,
}

/// Decodes every image in `dir` (sorted by name), skipping undecodable files.
pub fn ingest_images(dir: impl AsRef<Path>, resolution: usize) -> Result<ImageDataset> {
    let root = dir.as_ref().to_path_buf();
    if resolution == 0 {
        return Err(Error::Argument("resolution must be positive".into()));
    }
    let mut files = Vec::new();
    let mut images = Vec::new();
    for path in sorted_entries(&root)? {
        if !path.is_file() || !has_extension(&path, &IMAGE_EXTENSIONS) {
            continue;
        }
        match Image::load(&path) {
            Ok(img) => {
                images.push(preprocess(&img, resolution));
                files.push(path);
            }
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if images.is_empty() {
        return Err(Error::Data(format!("no decodable images in {}", root.display())));
    }
    Ok(ImageDataset {
        root,
        files,
        resolution,
        images,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoIndexEntry {
    pub id: String,
    pub source: PathBuf,
    /// Frames kept after striding.
    pub frames: usize,
    pub fps: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct VideoDataset {
    pub root: PathBuf,
    pub resolution: usize,
    pub stride: usize,
    pub index: Vec<VideoIndexEntry>,
    pub videos: Vec<Video>,
}

impl VideoDataset {
    pub fn save_index(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = serde_json::json!({
            "root": self.root,
            "resolution": self.resolution,
            "stride": self.stride,
            "videos": self.index,
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

fn read_frame_folder(dir: &Path) -> Result<(Vec<Image>, Option<f64>)> {
    let mut frames = Vec::new();
    for path in sorted_entries(dir)? {
        if path.is_file() && has_extension(&path, &["png", "jpg", "jpeg"]) {
            frames.push(Image::load(&path)?);
        }
    }
    let fps = std::fs::read_to_string(dir.join("fps.txt"))
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok());
    Ok((frames, fps))
}

fn read_gif(path: &Path) -> Result<(Vec<Image>, Option<f64>)> {
    let decoder = GifDecoder::new(BufReader::new(File::open(path)?))?;
    let mut frames = Vec::new();
    let mut delay_ms = 0.0;
    for frame in decoder.into_frames() {
        let frame = frame?;
        let (n, d) = frame.delay().numer_denom_ms();
        delay_ms = n as f64 / d.max(1) as f64;
        let rgba = frame.into_buffer();
        let (w, h) = rgba.dimensions();
        let data = rgba.pixels().flat_map(|p| [p[0], p[1], p[2]]).map(|v| v as f32 / 127.5 - 1.0).collect();
        frames.push(Image::from_vec(w as usize, h as usize, data)?);
    }
    Ok((frames, (delay_ms > 0.0).then(|| 1000.0 / delay_ms)))
}

/// Reads every frame folder and animated GIF in `dir`, keeping every
/// `stride`-th frame. Videos with fewer than two frames or frames of varying
/// size are skipped with a warning.
pub fn ingest_videos(dir: impl AsRef<Path>, resolution: usize, stride: usize) -> Result<VideoDataset> {
    let root = dir.as_ref().to_path_buf();
    if resolution == 0 || stride == 0 {
        return Err(Error::Argument("resolution and stride must be positive".into()));
    }
    let mut index = Vec::new();
    let mut videos = Vec::new();
    for path in sorted_entries(&root)? {
        let read = if path.is_dir() {
            read_frame_folder(&path)
        } else if has_extension(&path, &["gif"]) {
            read_gif(&path)
        } else {
            continue;
        };
        let (frames, fps) = match read {
            Ok(v) => v,
            Err(e) => {
                log::warn!("skipping video {}: {e}", path.display());
                continue;
            }
        };
        let frames: Vec<Image> = frames.into_iter().step_by(stride).collect();
        if frames.len() < 2 {
            log::warn!("skipping video {}: fewer than two frames", path.display());
            continue;
        }
        if frames.iter().any(|f| !f.same_size(&frames[0])) {
            log::warn!("skipping video {}: frames differ in size", path.display());
            continue;
        }
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        index.push(VideoIndexEntry {
            id: id.clone(),
            source: path.clone(),
            frames: frames.len(),
            fps: fps.map(|f| f / stride as f64),
        });
        videos.push(Video {
            id,
            frames: frames.iter().map(|f| preprocess(f, resolution)).collect(),
        });
    }
    if videos.is_empty() {
        return Err(Error::Data(format!("no usable videos in {}", root.display())));
    }
    Ok(VideoDataset {
        root,
        resolution,
        stride,
        index,
        videos,
    })
}

/// Stills and videos from two directories.
pub fn load_training_data(images: &Path, videos: &Path, resolution: usize, stride: usize) -> Result<TrainingData> {
    let data = TrainingData {
        images: ingest_images(images, resolution)?.images,
        videos: ingest_videos(videos, resolution, stride)?.videos,
    };
    data.validate()?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize, k: f32) -> Image {
        Image::from_fn(w, h, |x, y| [x as f32 / w as f32 * k - 0.5, y as f32 / h as f32 - 0.5, 0.0])
    }

    #[test]
    fn images_are_cropped_and_resized() {
        let dir = tempfile::tempdir().unwrap();
        gradient(48, 27, 1.0).save(dir.path().join("b.png")).unwrap();
        gradient(16, 16, 0.5).save(dir.path().join("a.png")).unwrap();
        std::fs::write(dir.path().join("c.png"), b"not an image").unwrap();
        std::fs::write(dir.path().join("notes.txt"), b"x").unwrap();
        let ds = ingest_images(dir.path(), 16).unwrap();
        assert_eq!(ds.images.len(), 2);
        assert!(ds.files[0].ends_with("a.png"));
        assert!(ds.images.iter().all(|i| i.width == 16 && i.height == 16));
        assert_eq!(ds.images[0], Image::load(dir.path().join("a.png")).unwrap());
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest_images(dir.path(), 16), Err(Error::Data(_))));
    }

    #[test]
    fn videos_are_indexed_and_short_ones_dropped() {
        let dir = tempfile::tempdir().unwrap();
        for (name, n) in [("v0", 5), ("v1", 3), ("short", 1)] {
            let sub = dir.path().join(name);
            std::fs::create_dir(&sub).unwrap();
            for f in 0..n {
                gradient(20, 20, 1.0 + f as f32 * 0.1).save(sub.join(format!("{f:03}.png"))).unwrap();
            }
        }
        std::fs::write(dir.path().join("v0").join("fps.txt"), "12\n").unwrap();
        let ds = ingest_videos(dir.path(), 8, 1).unwrap();
        assert_eq!(ds.index.len(), 2);
        assert_eq!((ds.index[0].id.as_str(), ds.index[0].frames, ds.index[0].fps), ("v0", 5, Some(12.0)));
        assert_eq!(ds.index[1].frames, 3);
        let again = ingest_videos(dir.path(), 8, 1).unwrap();
        assert_eq!(again.index, ds.index);
        assert_eq!(again.videos, ds.videos);
        let strided = ingest_videos(dir.path(), 8, 2).unwrap();
        assert_eq!(strided.index[0].frames, 3);
        assert_eq!(strided.index[0].fps, Some(6.0));
    }

    #[test]
    fn gif_videos_are_read() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Image> = (0..4).map(|f| gradient(12, 12, 1.0 + f as f32 * 0.2)).collect();
        crate::animation::save_gif(&frames, dir.path().join("clip.gif"), 10.0).unwrap();
        let ds = ingest_videos(dir.path(), 12, 1).unwrap();
        assert_eq!(ds.index[0].frames, 4);
        assert_eq!(ds.index[0].fps, Some(10.0));
    }
}
