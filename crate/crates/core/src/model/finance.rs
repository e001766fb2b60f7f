//! Investment annuities.

use crate::{Error, Result};

/// Annualized equivalent of an overnight investment.
///
/// Uses the capital recovery factor `r / (1 - (1 + r)^-L)`; at `r = 0` this
/// degenerates to straight-line depreciation `cost / L`.
pub fn annuity(overnight_cost: f64, lifetime: f64, rate: f64) -> Result<f64> {
    if !(lifetime >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "annuity lifetime must be at least one year, got {lifetime}"
        )));
    }
    if !(rate >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "annuity rate must be non-negative, got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok(overnight_cost / lifetime);
    }
    Ok(overnight_cost * rate / (1.0 - (1.0 + rate).powf(-lifetime)))
}
