use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config: {}", join(.0))]
    Invalid(Vec<Violation>),

    #[error("unsupported MCS {mcs} at {width_mhz} MHz")]
    UnsupportedMcs { mcs: u8, width_mhz: u16 },

    #[error("unknown sweep axis {0:?} (expected fps, inter_batch_time, bitrate, mcs_index or per)")]
    UnknownAxis(String),

    #[error("trace: {0}")]
    Trace(String),

    #[error("{0}")]
    Empty(&'static str),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
