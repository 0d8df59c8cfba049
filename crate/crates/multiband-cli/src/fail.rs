//! Exit-code policy: 2 for config/schema problems, 4 for infeasible
//! constraint sets, 3 for an exhausted iteration budget (result still
//! written), 1 for any other failure.

use thiserror::Error;

/// A config or input-validation problem (exit code 2).
#[derive(Debug, Error)]
#[error("{0}")]
pub struct SchemaError(pub String);

pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<SchemaError>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<multiband::Error>() {
            return match e {
                multiband::Error::Infeasible(_) => 4,
                multiband::Error::InvalidInput(_) | multiband::Error::SubbandIndex { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}
