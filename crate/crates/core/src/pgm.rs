//! Binary PGM (`P5`, maxval 255) images and capture directories.
//!
//! A capture directory holds `frame_%06d.pgm` files, a `sensors.jsonl`
//! log with one [`SensorRecord`] per frame and `camera.json` with the
//! intrinsics.

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::image::GrayImage;
use crate::stream::{nearest_imu_sample, CaptureStream, Frame, ImuSample, SensorRecord};

pub const SENSOR_LOG: &str = "sensors.jsonl";
pub const CAMERA_FILE: &str = "camera.json";

pub fn frame_file_name(id: u64) -> String {
    format!("frame_{id:06}.pgm")
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Malformed("truncated PGM header".into()));
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Malformed("non-ASCII PGM header".into()))?,
        );
    }
    if fields[0] != "P5" {
        return Err(Error::Malformed(format!("unsupported PGM magic {:?}", fields[0])));
    }
    let parse = |s: &str| s.parse::<u32>().map_err(|_| Error::Malformed(format!("bad PGM header field {s:?}")));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(Error::Malformed(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width as usize * height as usize;
    if bytes.len() < pos + n {
        return Err(Error::Malformed("truncated PGM raster".into()));
    }
    GrayImage::new(width, height, bytes[pos..pos + n].to_vec()).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

/// Writes frames, sensor log and intrinsics into `dir` (created if missing).
pub fn write_capture_dir(dir: &Path, stream: &CaptureStream) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut log = BufWriter::new(fs::File::create(dir.join(SENSOR_LOG))?);
    for f in &stream.frames {
        write_pgm(&dir.join(frame_file_name(f.id)), &f.image)?;
        let line = serde_json::to_string(&SensorRecord::from_frame(f)).expect("sensor record serializes");
        writeln!(log, "{line}")?;
    }
    log.flush()?;
    let mut cam = serde_json::to_string_pretty(&stream.intrinsics).expect("intrinsics serialize");
    cam.push('\n');
    fs::write(dir.join(CAMERA_FILE), cam)?;
    Ok(())
}

/// Reads a capture directory. Frames are the PGM files named in the sensor
/// log order; each gets the IMU record nearest in time within the match window.
pub fn read_capture_dir(dir: &Path) -> Result<CaptureStream> {
    if !dir.is_dir() {
        return Err(Error::Malformed(format!("{} is not a directory", dir.display())));
    }
    let cam_path = dir.join(CAMERA_FILE);
    let log_path = dir.join(SENSOR_LOG);
    if !cam_path.is_file() || !log_path.is_file() {
        return Err(Error::Malformed(format!("{} lacks {CAMERA_FILE} or {SENSOR_LOG}", dir.display())));
    }
    let intrinsics: CameraIntrinsics = serde_json::from_slice(&fs::read(&cam_path)?)
        .map_err(|e| Error::Malformed(format!("{}: {e}", cam_path.display())))?;
    intrinsics.validate().map_err(|e| Error::Malformed(e.to_string()))?;

    let mut records = Vec::new();
    let reader = std::io::BufReader::new(fs::File::open(&log_path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SensorRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Malformed(format!("{}:{}: {e}", log_path.display(), lineno + 1)))?;
        records.push(rec);
    }
    let samples: Vec<ImuSample> = records
        .iter()
        .map(|r| r.to_sample().map_err(|e| Error::Malformed(format!("sensor record {}: {e}", r.id))))
        .collect::<Result<_>>()?;

    let mut frames = Vec::with_capacity(records.len());
    for rec in &records {
        let path = dir.join(frame_file_name(rec.id));
        if !path.is_file() {
            continue;
        }
        let image = read_pgm(&path)?;
        let imu = *nearest_imu_sample(rec.t_us, &samples)
            .ok_or_else(|| Error::Malformed(format!("no IMU sample for frame {}", rec.id)))?;
        frames.push(Frame::new(rec.id, rec.t_us, image, imu).map_err(|e| Error::Malformed(e.to_string()))?);
    }
    CaptureStream::new(intrinsics, frames).map_err(|e| Error::Malformed(e.to_string()))
}
