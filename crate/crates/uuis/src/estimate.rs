//! Cost estimate requests shared by the command line and the API.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uuis_core::cocomo::{self, CocomoInput, CocomoResult, CostDriver, DriverRatings, Mode, Rating};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRequest {
    pub kloc: f64,
    /// Explicit adjustment factor; computed from `drivers` when absent.
    #[serde(default)]
    pub eaf: Option<f64>,
    /// Driver key to rating, e.g. `cplx = "high"`. Unlisted drivers are nominal.
    #[serde(default)]
    pub drivers: BTreeMap<String, String>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub cost_per_pm: f64,
}

fn default_mode() -> Mode {
    Mode::Organic
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub input: CocomoInput,
    pub result: CocomoResult,
    /// Result block with the usual cost report labels.
    pub report: String,
}

pub fn ratings(drivers: &BTreeMap<String, String>) -> Result<DriverRatings> {
    drivers.iter().try_fold(DriverRatings::nominal(), |acc, (key, value)| {
        let driver = CostDriver::from_key(key).ok_or_else(|| Error::BadRequest(format!("unknown cost driver `{key}`")))?;
        let rating = Rating::parse(value).ok_or_else(|| Error::BadRequest(format!("unknown rating `{value}`")))?;
        Ok(acc.with(driver, rating))
    })
}

pub fn run(request: &EstimateRequest) -> Result<Estimate> {
    let bad = |e: cocomo::CocomoError| Error::BadRequest(e.to_string());
    let eaf = match request.eaf {
        Some(eaf) => {
            if !request.drivers.is_empty() {
                return Err(Error::BadRequest("give either an adjustment factor or driver ratings".into()));
            }
            eaf
        }
        None => cocomo::eaf(&ratings(&request.drivers)?).map_err(bad)?,
    };
    let input = CocomoInput { kloc: request.kloc, coefficients: request.mode.coefficients(), eaf, cost_per_pm: request.cost_per_pm };
    let result = cocomo::estimate(&input).map_err(bad)?;
    let report = cocomo::Report { input: &input, result: &result }.to_string();
    Ok(Estimate { input, result, report })
}
