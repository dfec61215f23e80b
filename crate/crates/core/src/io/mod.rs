//! File formats: scene and demonstration JSON, splat PLY, mesh OBJ, RGB and
//! depth PNG.
//!
//! Dataset layout written by the `augment` command:
//!
//! ```text
//! out/
//!   stats.json
//!   <demo_id>/<spec_index>/result.json
//!   <demo_id>/<spec_index>/demo.json           (accepted only)
//!   <demo_id>/<spec_index>/<camera>_<k>.png    (accepted only)
//!   <demo_id>/<spec_index>/<camera>_<k>_depth.png
//! ```

mod obj;
mod ply;
mod png;
mod scene;

use std::fmt;
use std::path::{Path, PathBuf};

pub use obj::{load_obj, parse_obj, save_obj, write_obj};
pub use ply::{load_ply, read_ply, save_ply, write_ply};
pub use png::{depth_from_mm, depth_to_mm, load_depth, load_mask, load_rgb, load_rgbd, save_depth, save_mask, save_rgb, save_rgbd};
pub use scene::{
    load_cameras, load_demo, load_scene, parse_demo, parse_scene_file, save_cameras, save_demo, save_scene, ObjectEntry, Scene,
    SceneFile, TableEntry, WorkspaceEntry,
};

/// Where in a file parsing failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub file: String,
    pub line: Option<usize>,
    /// JSON path such as `actions[2].er`.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " at `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(ParseError),
    #[error("{file}: {message}")]
    Invalid { file: String, message: String },
}

impl IoError {
    pub(crate) fn parse(file: &Path, line: Option<usize>, field: Option<String>, message: impl Into<String>) -> Self {
        IoError::Parse(ParseError { file: file.display().to_string(), line, field, message: message.into() })
    }

    pub(crate) fn invalid(file: &Path, message: impl fmt::Display) -> Self {
        IoError::Invalid { file: file.display().to_string(), message: message.to_string() }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| IoError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, bytes).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}
