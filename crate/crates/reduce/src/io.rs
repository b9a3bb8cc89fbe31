use std::fs;
use std::path::Path;

use roomscan_core::pgm::write_capture_dir;
use roomscan_core::{CaptureStream, Frame, Result};

use crate::pipeline::ReductionReport;

pub const REPORT_FILE: &str = "reduction.json";

pub fn report_to_json(report: &ReductionReport) -> String {
    let mut s = serde_json::to_string(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes the kept frames as a capture directory plus the report.
pub fn write_reduction(dir: &Path, stream: &CaptureStream, kept: &[Frame], report: &ReductionReport) -> Result<()> {
    let subset = CaptureStream::new(stream.intrinsics, kept.to_vec())?;
    write_capture_dir(dir, &subset)?;
    fs::write(dir.join(REPORT_FILE), report_to_json(report))?;
    Ok(())
}
