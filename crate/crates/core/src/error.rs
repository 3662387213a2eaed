use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mask contains no vessel pixels")]
    EmptyMask,

    #[error("phantom geometry does not fit: {0}")]
    GeometryOverflow(String),

    #[error("{}", format_parse(.path, .field, .line, .message))]
    Parse {
        path: Option<PathBuf>,
        field: Option<String>,
        line: Option<usize>,
        message: String,
    },

    #[error("no path between {start:?} and {goal:?}")]
    Unreachable { start: (i32, i32), goal: (i32, i32) },

    #[error("{what} {point:?} is not on a vessel pixel")]
    OffVessel {
        what: &'static str,
        point: (i32, i32),
    },

    #[error("invalid motor parameters: {0}")]
    InvalidParams(String),

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("unknown target `{0}`")]
    UnknownTarget(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Command-line usage error, already formatted for the terminal.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

fn format_parse(
    path: &Option<PathBuf>,
    field: &Option<String>,
    line: &Option<usize>,
    message: &str,
) -> String {
    let mut out = String::from("parse error");
    if let Some(p) = path {
        out.push_str(&format!(" in {}", p.display()));
    }
    if let Some(l) = line {
        out.push_str(&format!(" at line {l}"));
    }
    if let Some(f) = field {
        out.push_str(&format!(" (field `{f}`)"));
    }
    out.push_str(": ");
    out.push_str(message);
    out
}

impl Error {
    pub(crate) fn parse(field: impl Into<Option<String>>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            field: field.into(),
            line: None,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
