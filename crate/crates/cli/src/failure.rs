use std::fmt;
use std::path::Path;
use std::process::ExitCode;

/// A command failure together with the exit code class it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: exit 2.
    Validation(anyhow::Error),
    /// The numerics did not succeed: exit 3.
    Numerical(anyhow::Error),
    /// Reading or writing files: exit 4.
    Io(anyhow::Error),
}

pub type CmdResult<T = ()> = Result<T, Failure>;

impl Failure {
    pub fn validation(msg: impl fmt::Display) -> Self {
        Failure::Validation(anyhow::anyhow!("{msg}"))
    }

    pub fn numerical(msg: impl fmt::Display) -> Self {
        Failure::Numerical(anyhow::anyhow!("{msg}"))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Failure::Io(anyhow::Error::new(err).context(format!("{}", path.display())))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        })
    }

    /// Prefixes the message with where the failure happened.
    pub fn context(self, what: impl fmt::Display) -> Self {
        let wrap = |e: anyhow::Error| e.context(what.to_string());
        match self {
            Failure::Validation(e) => Failure::Validation(wrap(e)),
            Failure::Numerical(e) => Failure::Numerical(wrap(e)),
            Failure::Io(e) => Failure::Io(wrap(e)),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = match self {
            Failure::Validation(e) | Failure::Numerical(e) | Failure::Io(e) => e,
        };
        write!(f, "{e:#}")
    }
}

impl From<mvswap::Error> for Failure {
    fn from(e: mvswap::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.into())
        } else if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Numerical(e.into())
        }
    }
}
