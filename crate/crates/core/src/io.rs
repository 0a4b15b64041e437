//! On-disk formats: tracklet archives, state tables and tracking results.
//!
//! An archive is a directory holding `manifest.json` and one little-endian
//! `f32` xyz file per frame under `frames/`. States are decimal text with
//! nine significant digits.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::{Frame, Point, PointCloud, Tracklet};
use crate::error::{Error, Result};
use crate::state::{BoundingBox, ObjectState};
use crate::tracker::StepDiagnostics;

pub const MANIFEST: &str = "manifest.json";
pub const GT_SHAPE: &str = "gt_shape.bin";
pub const STATES: &str = "states.txt";
pub const SHAPE: &str = "shape.bin";
pub const DIAGNOSTICS: &str = "diagnostics.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub id: String,
    pub frame_count: usize,
    pub first_box: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_states: Option<Vec<ObjectState>>,
    /// File name of the reference shape, relative to the archive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_shape: Option<String>,
}

fn archive_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Archive {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

pub fn frame_file_name(frame: usize) -> String {
    format!("{frame:06}.bin")
}

pub fn encode_points(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 12);
    for p in cloud.iter() {
        for c in [p.x, p.y, p.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    out
}

/// Decodes xyz `f32` triples; `path` only labels errors.
pub fn decode_points(bytes: &[u8], path: &Path, frame: Frame) -> Result<PointCloud> {
    if bytes.len() % 12 != 0 {
        return Err(archive_err(
            path,
            (bytes.len() - bytes.len() % 12) as u64,
            format!("length {} is not a multiple of 12 bytes", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(bytes.len() / 12);
    for (i, chunk) in bytes.chunks_exact(12).enumerate() {
        let c = |k: usize| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap()) as f64;
        let p = Point::new(c(0), c(1), c(2));
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(archive_err(path, (i * 12) as u64, "non-finite coordinate"));
        }
        points.push(p);
    }
    Ok(PointCloud::new(points, frame))
}

pub fn write_points(path: &Path, cloud: &PointCloud) -> Result<()> {
    fs::write(path, encode_points(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_points(path: &Path, frame: Frame) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_points(&bytes, path, frame)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_archive(dir: &Path, tracklet: &Tracklet) -> Result<()> {
    tracklet.validate()?;
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for (i, frame) in tracklet.frames.iter().enumerate() {
        write_points(&frames_dir.join(frame_file_name(i + 1)), frame)?;
    }
    let gt_shape = match &tracklet.gt_shape {
        Some(shape) => {
            write_points(&dir.join(GT_SHAPE), shape)?;
            Some(GT_SHAPE.to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        id: tracklet.id.clone(),
        frame_count: tracklet.len(),
        first_box: tracklet.first_box,
        gt_states: tracklet.gt_states.clone(),
        gt_shape,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

/// Lazy reader: frames are loaded one at a time on request.
#[derive(Clone, Debug)]
pub struct ArchiveReader {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl ArchiveReader {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
            let offset = text
                .lines()
                .take(e.line().saturating_sub(1))
                .map(|l| l.len() as u64 + 1)
                .sum::<u64>()
                + e.column().saturating_sub(1) as u64;
            archive_err(&path, offset, e.to_string())
        })?;
        if manifest.frame_count < 2 {
            return Err(archive_err(
                &path,
                0,
                format!("frame_count {} < 2", manifest.frame_count),
            ));
        }
        if let Some(gt) = &manifest.gt_states {
            if gt.len() != manifest.frame_count {
                return Err(archive_err(
                    &path,
                    0,
                    format!(
                        "{} ground-truth states for {} frames",
                        gt.len(),
                        manifest.frame_count
                    ),
                ));
            }
        }
        let frames_dir = dir.join("frames");
        let files = fs::read_dir(&frames_dir)
            .map_err(|e| Error::io(&frames_dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "bin"))
            .count();
        if files != manifest.frame_count {
            return Err(archive_err(
                &path,
                0,
                format!(
                    "manifest lists {} frames but {} point files exist",
                    manifest.frame_count, files
                ),
            ));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frame_count == 0
    }

    /// Frame `number`, 1-based.
    pub fn frame(&self, number: usize) -> Result<PointCloud> {
        read_points(
            &self.dir.join("frames").join(frame_file_name(number)),
            Frame::World,
        )
    }

    pub fn gt_shape(&self) -> Result<Option<PointCloud>> {
        match &self.manifest.gt_shape {
            Some(name) => read_points(&self.dir.join(name), Frame::FirstFrameAnchor).map(Some),
            None => Ok(None),
        }
    }

    pub fn load(&self) -> Result<Tracklet> {
        let frames = (1..=self.len())
            .map(|i| self.frame(i))
            .collect::<Result<Vec<_>>>()?;
        let mut t = Tracklet::new(self.manifest.id.clone(), frames, self.manifest.first_box)?;
        t.gt_states = self.manifest.gt_states.clone();
        t.gt_shape = self.gt_shape()?;
        Ok(t)
    }
}

pub fn read_archive(dir: &Path) -> Result<Tracklet> {
    ArchiveReader::open(dir)?.load()
}

/// Archive directories under `root`: `root` itself if it holds a manifest,
/// otherwise its immediate subdirectories that do, sorted by path.
pub fn list_archives(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Nine significant digits in plain decimal notation, no negative zero.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() {
            "0".into()
        } else {
            format!("{v}")
        };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).clamp(0, 15) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        "0".into()
    } else {
        s
    }
}

pub const STATES_HEADER: &str = "# frame x y z theta";

pub fn format_state_row(frame: usize, s: &ObjectState) -> String {
    format!(
        "{} {} {} {} {}",
        frame,
        format_sig9(s.x),
        format_sig9(s.y),
        format_sig9(s.z),
        format_sig9(s.theta)
    )
}

/// Incremental state writer; each row is flushed as it is written.
pub struct StatesWriter {
    path: PathBuf,
    file: fs::File,
}

impl StatesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(file, "{STATES_HEADER}").map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn write(&mut self, frame: usize, state: &ObjectState) -> Result<()> {
        writeln!(self.file, "{}", format_state_row(frame, state))
            .map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_states(path: &Path, rows: &[(usize, ObjectState)]) -> Result<()> {
    let mut w = StatesWriter::create(path)?;
    for (frame, s) in rows {
        w.write(*frame, s)?;
    }
    Ok(())
}

/// Rows of a state table as (frame number, state).
pub fn read_states(path: &Path) -> Result<Vec<(usize, ObjectState)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut offset = 0u64;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let here = offset;
        offset += line.len() as u64 + 1;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let bad = |m: &str| archive_err(path, here, m.to_string());
        if fields.len() != 5 {
            return Err(bad("expected 5 columns: frame x y z theta"));
        }
        let frame: usize = fields[0].parse().map_err(|_| bad("bad frame number"))?;
        let mut v = [0.0; 4];
        for (k, f) in fields[1..].iter().enumerate() {
            v[k] = f.parse().map_err(|_| bad("bad number"))?;
        }
        let state =
            ObjectState::try_new(v[0], v[1], v[2], v[3]).map_err(|_| bad("non-finite state"))?;
        rows.push((frame, state));
    }
    Ok(rows)
}

pub fn write_diagnostics(path: &Path, diagnostics: &[StepDiagnostics]) -> Result<()> {
    write_json(path, &diagnostics)
}
