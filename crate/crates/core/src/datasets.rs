//! Reported relaxation times, bundled as tables, and the dataset type used
//! for user-supplied measurements.

use alloc::borrow::Cow;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::fit::Series;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Center {
    Nv,
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    T1,
    T2,
}

impl Center {
    pub fn as_str(self) -> &'static str {
        match self {
            Center::Nv => "nv",
            Center::N => "n",
        }
    }
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::T1 => "t1",
            Quantity::T2 => "t2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// K
    pub temperature: f64,
    /// s
    pub value: f64,
    /// s; 0 when unknown.
    pub error: f64,
    pub source: Cow<'static, str>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelaxationDataset {
    /// Unknown for user files.
    pub center: Option<Center>,
    pub quantity: Option<Quantity>,
    pub rows: Vec<Row>,
    /// Comment lines, without the leading `#`.
    pub metadata: Vec<String>,
}

const fn row(temperature: f64, value: f64, error: f64, source: &'static str) -> Row {
    Row {
        temperature,
        value,
        error,
        source: Cow::Borrowed(source),
    }
}

// Uncertainties given only as "~" get 10% and an `approx` tag.
static NV_T2: [Row; 3] = [
    row(300.0, 6.7e-6, 0.2e-6, "reported: 6.7 +/- 0.2 us at room temperature"),
    row(20.0, 8.3e-6, 0.7e-6, "reported: 8.3 +/- 0.7 us at 20 K"),
    row(1.7, 250e-6, 25e-6, "approx: reported ~250 us at 1.7 K; error set to 10%"),
];
static N_T2: [Row; 3] = [
    row(300.0, 5.455e-6, 0.005e-6, "reported: 5.455 +/- 0.005 us at room temperature"),
    row(20.0, 5.83e-6, 0.04e-6, "reported: 5.83 +/- 0.04 us at 20 K"),
    row(2.5, 80e-6, 9e-6, "reported: 80 +/- 9 us at 2.5 K"),
];
static NV_T1: [Row; 2] = [
    row(300.0, 7.7e-3, 0.4e-3, "reported: 7.7 +/- 0.4 ms at room temperature"),
    row(40.0, 3.8, 0.5, "reported: 3.8 +/- 0.5 s at 40 K"),
];
static N_T1: [Row; 2] = [
    row(300.0, 1.4e-3, 0.01e-3, "reported: 1.4 +/- 0.01 ms at room temperature"),
    row(40.0, 8.3, 4.7, "reported: 8.3 +/- 4.7 s at 40 K"),
];

/// The bundled table for a center and quantity.
pub fn bundled(center: Center, quantity: Quantity) -> RelaxationDataset {
    let rows: &[Row] = match (center, quantity) {
        (Center::Nv, Quantity::T2) => &NV_T2,
        (Center::N, Quantity::T2) => &N_T2,
        (Center::Nv, Quantity::T1) => &NV_T1,
        (Center::N, Quantity::T1) => &N_T1,
    };
    RelaxationDataset {
        center: Some(center),
        quantity: Some(quantity),
        rows: rows.to_vec(),
        metadata: Vec::new(),
    }
}

/// Names of the bundled tables, `<center>-<quantity>`.
pub const BUNDLED_NAMES: [&str; 4] = ["nv-t2", "n-t2", "nv-t1", "n-t1"];

/// Look up `nv-t2`, `n-t1`, etc.
pub fn bundled_by_name(name: &str) -> Result<RelaxationDataset> {
    let (c, q) = name.split_once('-').ok_or_else(|| Error::UnknownDataset(name.into()))?;
    let center = match c {
        "nv" => Center::Nv,
        "n" => Center::N,
        _ => return Err(Error::UnknownDataset(name.into())),
    };
    let quantity = match q {
        "t1" => Quantity::T1,
        "t2" => Quantity::T2,
        _ => return Err(Error::UnknownDataset(name.into())),
    };
    Ok(bundled(center, quantity))
}

/// Rate units for [`RelaxationDataset::to_rate_series`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateUnit {
    PerSecond,
    PerMicrosecond,
}

impl RelaxationDataset {
    /// Check the row invariants; the error names the 1-based row.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            let n = i + 1;
            if !(r.temperature.is_finite() && r.temperature > 0.0) {
                return Err(Error::domain(format!("row {n}: temperature must be > 0 K, got {}", r.temperature)));
            }
            if !(r.value.is_finite() && r.value > 0.0) {
                return Err(Error::domain(format!("row {n}: value must be > 0 s, got {}", r.value)));
            }
            if !(r.error.is_finite() && r.error >= 0.0) {
                return Err(Error::domain(format!("row {n}: error must be >= 0 s, got {}", r.error)));
            }
            if r.source.trim().is_empty() {
                return Err(Error::domain(format!("row {n}: source tag is empty")));
            }
        }
        Ok(())
    }

    /// (T, 1/value) for rate-model fits. Unweighted unless `weighted`, in
    /// which case σ_rate = error/value² (rows with zero error are rejected).
    pub fn to_rate_series(&self, unit: RateUnit, weighted: bool) -> Result<Series> {
        self.validate()?;
        let scale = match unit {
            RateUnit::PerSecond => 1.0,
            RateUnit::PerMicrosecond => 1e-6,
        };
        let x = self.rows.iter().map(|r| r.temperature).collect();
        let y = self.rows.iter().map(|r| scale / r.value).collect();
        if weighted {
            let sigma = self
                .rows
                .iter()
                .map(|r| scale * r.error / (r.value * r.value))
                .collect();
            Series::new(x, y, sigma)
        } else {
            Series::unweighted(x, y)
        }
    }
}
