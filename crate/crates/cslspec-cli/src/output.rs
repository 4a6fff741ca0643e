//! Result serialization.
//!
//! Every numeric result is emitted as a decimal string with 17 significant
//! digits (enough to round-trip an f64 exactly); wide-range values carry the
//! scaled representation (binary mantissa and exponent) alongside the
//! decimal form, so nothing saturates and nothing loses precision in JSON or
//! CSV.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use cslspec_core::{Scaled, SpectrumResult};

/// 17 significant digits: lossless for f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// The serde (kebab-case) name of a unit-variant enum value.
pub fn kebab<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

/// A wide-range value in both decimal and scaled binary form.
#[derive(Debug, Clone, Serialize)]
pub struct ScaledOut {
    /// `m.mmmmmmmmmmmmmmmm e±EEE` with 17 significant decimal digits.
    pub decimal: String,
    /// Binary mantissa in [1, 2), 17 significant digits.
    pub mantissa2: String,
    /// Binary exponent: value = mantissa2 · 2^exp2.
    pub exp2: i64,
}

impl ScaledOut {
    pub fn from_scaled(v: Scaled) -> ScaledOut {
        let (m10, e10) = v.to_decimal_parts();
        let decimal = if m10 == 0.0 {
            "0".to_string()
        } else {
            format!("{m10:.16}e{e10}")
        };
        ScaledOut {
            decimal,
            mantissa2: fmt17(v.mantissa),
            exp2: v.exp2,
        }
    }
}

/// One row of a correction spectrum, ready for CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub q_planck: String,
    pub q_mpc_inv: String,
    pub p_standard: String,
    pub delta_p: String,
    /// |δP| / P_standard, as a decimal string (it can overflow f64).
    pub rel_err: String,
}

/// JSON document for `spectrum` / `correction` runs: the library result with
/// all numerics re-expressed as lossless strings, plus the raw parameter
/// snapshot for replay.
#[derive(Debug, Serialize)]
pub struct SpectrumDoc {
    pub command: String,
    pub era: String,
    pub method: String,
    pub kernel_variant: String,
    pub rows: Vec<SpectrumRow>,
    pub delta_r2: ScaledOut,
    pub error_estimate: String,
    /// Everything needed to reproduce the run (values round-trip exactly:
    /// JSON floats are serialized shortest-round-trip).
    pub params_snapshot: serde_json::Value,
}

impl SpectrumDoc {
    pub fn from_result(
        command: &str,
        result: &SpectrumResult,
        mpc_in_planck: f64,
    ) -> SpectrumDoc {
        let rows = result
            .k_grid
            .iter()
            .zip(&result.p_standard)
            .zip(&result.delta_p)
            .map(|((&q, &p_std), &dp)| {
                let ratio = dp.div(Scaled::from_f64(p_std)).abs();
                SpectrumRow {
                    q_planck: fmt17(q),
                    q_mpc_inv: fmt17(q * mpc_in_planck),
                    p_standard: fmt17(p_std),
                    delta_p: ScaledOut::from_scaled(dp).decimal,
                    rel_err: ScaledOut::from_scaled(ratio).decimal,
                }
            })
            .collect();
        SpectrumDoc {
            command: command.to_string(),
            era: kebab(&result.era),
            method: kebab(&result.method),
            kernel_variant: kebab(&result.kernel_variant),
            rows,
            delta_r2: ScaledOut::from_scaled(result.delta_r2),
            error_estimate: fmt17(result.error_estimate),
            params_snapshot: serde_json::to_value(&result.params_snapshot)
                .expect("snapshot serializes"),
        }
    }
}

/// Write a document to `--out` (or stdout when absent). `.csv` paths get the
/// tabular form when the document provides one; everything else is pretty
/// JSON.
pub fn emit<D: Serialize + Tabular>(out: Option<&Path>, doc: &D) -> std::io::Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, doc)?;
            writeln!(stdout)
        }
        Some(path) if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
            let mut w = csv::Writer::from_path(path)?;
            doc.write_csv(&mut w)?;
            w.flush()
        }
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            serde_json::to_writer_pretty(&mut f, doc)?;
            writeln!(f)
        }
    }
}

/// Documents that can also be written as CSV.
pub trait Tabular {
    fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()>;
}

impl Tabular for SpectrumDoc {
    fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        for row in &self.rows {
            w.serialize(row)?;
        }
        Ok(())
    }
}

/// Fallback for documents with no natural tabular form: one JSON line.
#[macro_export]
macro_rules! json_only_tabular {
    ($ty:ty) => {
        impl $crate::output::Tabular for $ty {
            fn write_csv<W: std::io::Write>(
                &self,
                w: &mut csv::Writer<W>,
            ) -> csv::Result<()> {
                let json = serde_json::to_string(self).expect("document serializes");
                w.write_record([json.as_str()])?;
                Ok(())
            }
        }
    };
}
