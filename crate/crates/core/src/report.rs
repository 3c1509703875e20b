//! Machine-readable analysis reports.
//!
//! The top-level key set (`geometry`, `validity`, `berwald`, `ricci_skew`,
//! `verdict`, `metrization`, `meta`) is stable; `SCHEMA_VERSION` bumps on any
//! field change. Every numeric verdict travels with its residual and the
//! tolerance it was compared against.

use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_NAME: &str = "mkropina";

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub geometry: GeometryEcho,
    pub validity: Option<ValiditySection>,
    pub berwald: Option<BerwaldSection>,
    pub ricci_skew: Option<RicciSkewSection>,
    pub verdict: Option<String>,
    pub metrization: Option<MetrizationSection>,
    pub meta: MetaSection,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryEcho {
    pub name: String,
    pub dimension: usize,
    pub mode: String,
    pub m: f64,
    pub coordinates: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValiditySection {
    pub closed: bool,
    pub null: bool,
    pub closed_residual: f64,
    pub null_residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BerwaldSection {
    /// parallel | closed-null-with-c | general-with-f | not-berwald
    pub kind: String,
    pub residual: f64,
    pub tolerance: f64,
    /// Mean of the closed-null scalar over the certificate sample.
    pub c_mean: Option<f64>,
    /// (first coordinate, c) samples of the closed-null scalar.
    pub c_samples: Option<Vec<[f64; 2]>>,
    /// Covector of the general condition at the first sample point.
    pub f_sample: Option<Vec<f64>>,
    /// Max deviation between the numerically detected connection and the
    /// closed-form one.
    pub numeric_gamma_deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RicciSkewSection {
    pub max: f64,
    pub tolerance: f64,
    /// Brute-force curvature contraction route.
    pub brute_force_max: f64,
    /// Closed-form route (adapted coordinates only).
    pub closed_form_max: Option<f64>,
    /// Max-abs disagreement between the two routes.
    pub route_agreement: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetrizationSection {
    pub u0: f64,
    /// (u, φ(u)) samples.
    pub phi_samples: Vec<[f64; 2]>,
    /// (u, e^ψ(u)) samples of the conformal factor.
    pub factor_samples: Vec<[f64; 2]>,
    /// Max |Γ(ã) − Γ_affine| over the verification sample.
    pub verification_deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetaSection {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: &'static str,
    pub seed: u64,
    pub grid_counts: usize,
    pub notes: Vec<String>,
    /// Unix seconds; absent under --no-timestamp so reports are
    /// byte-reproducible.
    pub timestamp_unix: Option<u64>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// Human-readable summary table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let geometry = &self.geometry;
        out.push_str(&format!(
            "geometry       {} (n = {}, mode = {}, m = {})\n",
            geometry.name, geometry.dimension, geometry.mode, geometry.m
        ));
        if let Some(v) = &self.validity {
            out.push_str(&format!(
                "validity       closed: {} (residual {:.2e}), null: {} (residual {:.2e})\n",
                v.closed, v.closed_residual, v.null, v.null_residual
            ));
        }
        if let Some(b) = &self.berwald {
            out.push_str(&format!(
                "berwald        {} (residual {:.2e}, tolerance {:.2e})\n",
                b.kind, b.residual, b.tolerance
            ));
            if let Some(dev) = b.numeric_gamma_deviation {
                out.push_str(&format!(
                    "               numeric-vs-closed-form connection deviation {dev:.2e}\n"
                ));
            }
        }
        if let Some(r) = &self.ricci_skew {
            out.push_str(&format!(
                "ricci skew     max {:.2e} (tolerance {:.2e})\n",
                r.max, r.tolerance
            ));
            if let Some(agr) = r.route_agreement {
                out.push_str(&format!(
                    "               closed-form vs brute-force agreement {agr:.2e}\n"
                ));
            }
        }
        out.push_str(&format!(
            "verdict        {}\n",
            self.verdict.as_deref().unwrap_or("undetermined")
        ));
        if let Some(m) = &self.metrization {
            out.push_str(&format!(
                "metrization    verified, max connection deviation {:.2e} (tolerance {:.2e}, u0 = {})\n",
                m.verification_deviation, m.tolerance, m.u0
            ));
        }
        for note in &self.meta.notes {
            out.push_str(&format!("note           {note}\n"));
        }
        out
    }
}
