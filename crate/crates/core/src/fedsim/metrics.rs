// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::Path;

use super::FedError;

pub const METRICS_HEADER: &str =
    "round,test_accuracy,test_loss,bytes_uplink,bytes_downlink,cumulative_bytes,sampled_devices";

/// One row of the metrics log. Byte counts cover the round's traffic over all
/// chosen devices.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub bytes_uplink: u64,
    pub bytes_downlink: u64,
    pub cumulative_bytes: u64,
    /// Ascending.
    pub sampled_device_ids: Vec<usize>,
}

/// CSV with [`METRICS_HEADER`]; sampled ids are `;`-separated.
pub fn write_metrics_csv<W: Write>(log: &[RoundMetrics], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for m in log {
        let ids: Vec<String> = m.sampled_device_ids.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.round,
            m.test_accuracy,
            m.test_loss,
            m.bytes_uplink,
            m.bytes_downlink,
            m.cumulative_bytes,
            ids.join(";")
        )?;
    }
    out.flush()
}

/// Writes the log to `path` through a temporary sibling and a rename, so the
/// destination is either absent or complete.
pub fn emit_metrics_csv(log: &[RoundMetrics], path: &Path) -> Result<(), FedError> {
    let mut buf = Vec::new();
    write_metrics_csv(log, &mut buf).expect("writing to memory");
    atomic_write(path, &buf)
}

pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), FedError> {
    let io = |source| FedError::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path
        .file_name()
        .ok_or_else(|| FedError::Input(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}
