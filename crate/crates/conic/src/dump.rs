//! JSON dump of a program for offline debugging.
//!
//! The file is the serde serialization of [`ConicProgram`]: `blocks`, then the
//! affine data as `{constant, terms: [[block, coef], …]}` where a coef is either
//! `{"Sym": {"Dense" | "LowRank" | "Identity": …}}` or `{"Vec": [[index, value], …]}`.

use std::io::Write;
use std::path::Path;

use crate::error::{ConicError, Result};
use crate::program::ConicProgram;

pub fn dump_program(p: &ConicProgram, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(p)?;
    let mut f = std::fs::File::create(path).map_err(|e| ConicError::InvalidProgram(format!("{}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| ConicError::InvalidProgram(format!("{}: {e}", path.display())))
}

pub fn load_program(path: &Path) -> Result<ConicProgram> {
    let text = std::fs::read_to_string(path).map_err(|e| ConicError::InvalidProgram(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}
