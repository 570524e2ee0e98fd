//! Run log: the one output file allowed to contain wall-clock data.
//!
//! Every other artifact a command writes is byte-deterministic for a fixed
//! configuration and seed; timestamps and durations go here and nowhere
//! else, so determinism checks simply skip `run.log`.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use mvsfusion::error::Result;

/// File name of the run log inside an output directory.
pub const RUN_LOG: &str = "run.log";

/// Append-only log with epoch-seconds timestamps.
pub struct RunLog {
    file: File,
    started: Instant,
}

impl RunLog {
    /// Create (truncate) `dir/run.log`.
    pub fn create(dir: &Path) -> Result<RunLog> {
        let file = File::create(dir.join(RUN_LOG))?;
        Ok(RunLog { file, started: Instant::now() })
    }

    /// Append one line, stamped with the absolute time and the elapsed time
    /// since the log was opened.
    pub fn log(&mut self, message: &str) {
        let epoch = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let elapsed = self.started.elapsed().as_secs_f64();
        // Logging is best-effort; a full disk should not fail the pipeline
        // after the real outputs were written.
        let _ = writeln!(self.file, "[{epoch:.3} +{elapsed:.3}s] {message}");
    }
}
