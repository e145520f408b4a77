//! Result document assembly: every numeric value carries its unit and the
//! provenance of the number (closed-form evaluation, Monte Carlo
//! estimation, or grid quadrature).

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{CommandName, MatrixDto, RunConfig};

pub const PROVENANCE_ANALYTIC: &str = "analytic";
pub const PROVENANCE_MONTE_CARLO: &str = "monte-carlo";
pub const PROVENANCE_GRID: &str = "grid";

#[derive(Debug, Clone, Serialize)]
pub struct Scalar {
    pub value: f64,
    pub unit: &'static str,
    pub provenance: &'static str,
}

impl Scalar {
    pub fn analytic(value: f64, unit: &'static str) -> Self {
        Self {
            value,
            unit,
            provenance: PROVENANCE_ANALYTIC,
        }
    }

    pub fn grid(value: f64, unit: &'static str) -> Self {
        Self {
            value,
            unit,
            provenance: PROVENANCE_GRID,
        }
    }
}

/// A Monte Carlo estimate with its batch-means standard error.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub unit: &'static str,
    pub provenance: &'static str,
}

impl Estimate {
    pub fn monte_carlo(e: gyra_core::simulation::EstimateWithSe, unit: &'static str) -> Self {
        Self {
            value: e.value,
            std_error: e.std_error,
            unit,
            provenance: PROVENANCE_MONTE_CARLO,
        }
    }
}

/// Row-major matrix with dimension header, unit, and provenance.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixOut {
    pub n: usize,
    pub data: Vec<f64>,
    pub unit: &'static str,
    pub provenance: &'static str,
}

impl MatrixOut {
    pub fn analytic(m: &nalgebra::DMatrix<f64>, unit: &'static str) -> Self {
        let dto = MatrixDto::from_dmatrix(m);
        Self {
            n: dto.n,
            data: dto.data,
            unit,
            provenance: PROVENANCE_ANALYTIC,
        }
    }

    pub fn monte_carlo(m: &nalgebra::DMatrix<f64>, unit: &'static str) -> Self {
        let dto = MatrixDto::from_dmatrix(m);
        Self {
            n: dto.n,
            data: dto.data,
            unit,
            provenance: PROVENANCE_MONTE_CARLO,
        }
    }
}

/// The envelope written for every successful run. Wall time is reported on
/// stderr instead, so re-running an identical configuration reproduces the
/// document byte for byte.
#[derive(Debug, Serialize)]
pub struct ResultDocument {
    pub toolkit: Toolkit,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: RunConfig,
    pub results: Value,
    pub diagnostics: Value,
}

#[derive(Debug, Serialize)]
pub struct Toolkit {
    pub name: &'static str,
    pub version: &'static str,
}

impl ResultDocument {
    pub fn new(
        command: CommandName,
        config: RunConfig,
        results: Value,
        diagnostics: Value,
    ) -> Self {
        let seed = config.simulation.as_ref().map(|s| s.seed);
        Self {
            toolkit: Toolkit {
                name: "gyra",
                version: env!("CARGO_PKG_VERSION"),
            },
            command: command.as_str(),
            seed,
            config,
            results,
            diagnostics,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("document serializes");
        text.push('\n');
        text
    }
}

pub fn object(entries: Vec<(&'static str, Value)>) -> Value {
    let mut map = Map::new();
    for (key, value) in entries {
        map.insert(key.to_string(), value);
    }
    Value::Object(map)
}

pub fn json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("value serializes")
}

/// A CSV table: a unit/provenance comment line, a header line, then rows.
/// Floats are rendered with the shortest representation that round-trips.
pub struct CsvTable {
    pub comment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# ");
        out.push_str(&self.comment);
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for value in row {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&format!("{value}"));
            }
            out.push('\n');
        }
        out
    }
}
