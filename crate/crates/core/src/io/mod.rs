//! File formats: label-probability maps, mixture models, PGM masks,
//! key-value configuration and result files.

pub mod config;
pub mod lpm;
pub mod lpmix;
pub mod pgm;
pub mod report;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::{synth_plan_from_config, Config};
pub use lpm::{read_lpm, read_lpm_file, write_lpm, write_lpm_file};
pub use lpmix::{read_lpmix, read_lpmix_file, write_lpmix, write_lpmix_file};
pub use pgm::{read_pgm, read_pgm_file, write_pgm, write_pgm_file, GrayImage};
pub use report::{format_result, format_trace, parse_key_values, RegistrationResult};

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        // temp files are created 0600
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
