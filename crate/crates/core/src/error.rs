use std::fmt;

use thiserror::Error;

use crate::elliptic::SolveReport;
use crate::field::Field;

pub type Result<T> = std::result::Result<T, QpatError>;

#[derive(Debug, Error)]
pub enum QpatError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("coefficient error: {0}")]
    Coefficient(String),

    #[error("solver did not converge: {report}")]
    NotConverged {
        report: SolveReport,
        /// Best iterate reached before giving up.
        best: Box<Field>,
    },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("path leaves the data region at ({x:.4}, {y:.4})")]
    PathLeavesData { x: f64, y: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<QpatError>,
    },
}

impl QpatError {
    pub fn config(msg: impl Into<String>) -> Self {
        QpatError::Config(msg.into())
    }

    /// Strips any stage labels.
    pub fn root(&self) -> &QpatError {
        match self {
            QpatError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            QpatError::Config(_) | QpatError::Coefficient(_) => 2,
            QpatError::NotConverged { .. } => 3,
            QpatError::EmptyRegion(_) | QpatError::PathLeavesData { .. } => 4,
            QpatError::Format(_) | QpatError::Io(_) => 5,
            QpatError::Stage { .. } => unreachable!(),
        }
    }
}

/// Pipeline stage labels attached to propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ratios,
    LocalSystems,
    ReliableRegion,
    GradLnSigma,
    IntegrateLnSigma,
    Coefficient,
    SqrtD,
    Mu,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Ratios => "ratio_fields",
            Stage::LocalSystems => "local_systems",
            Stage::ReliableRegion => "reliable_region",
            Stage::GradLnSigma => "solve_grad_ln_sigma",
            Stage::IntegrateLnSigma => "integrate_ln_sigma",
            Stage::Coefficient => "helmholtz_coefficient",
            Stage::SqrtD => "solve_sqrt_d",
            Stage::Mu => "recover_mu",
        };
        f.write_str(s)
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| QpatError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
