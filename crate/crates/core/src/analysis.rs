//! Orchestration of the analysis pipeline behind the command-line surface:
//! validity → Berwald certificate → Ricci skew → verdict → metrization.

use crate::config::{GeometryConfig, LoadedGeometry};
use crate::error::{Error, Result};
use crate::finsler::{berwald_detect, sample_directions};
use crate::geodesics::{
    compare_null_geodesics, integrate, GeodesicState, IntegratorConfig, NullComparison,
};
use crate::geometry::Point;
use crate::kropina::{
    affine_connection_kundt, affine_connection_space, affine_curvature_kundt,
    affine_curvature_space, berwald_condition_general, metrizability_verdict, metrize,
    spray_from_connection, spray_generic, validate, CertificateKind, MetrizabilityReport,
    Validity, Verdict,
};
use crate::report::{
    AnalysisReport, BerwaldSection, GeometryEcho, MetaSection, MetrizationSection,
    RicciSkewSection, ValiditySection, SCHEMA_VERSION, TOOL_NAME,
};
use crate::tol;

/// Global command-line options that modulate an analysis.
#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub seed: Option<u64>,
    pub grid_density: Option<usize>,
    /// Suppressed by `--no-timestamp` for byte-reproducible reports.
    pub timestamp: bool,
}

fn effective_config(cfg: &GeometryConfig, opts: &AnalyzeOptions) -> GeometryConfig {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.sampling.seed = seed;
    }
    if let Some(density) = opts.grid_density {
        cfg.sampling.grid_counts = density;
    }
    cfg
}

struct CertificateSweep {
    kind: CertificateKind,
    residual: f64,
    tolerance: f64,
    c_mean: Option<f64>,
    c_samples: Vec<[f64; 2]>,
    f_sample: Option<Vec<f64>>,
}

fn sweep_certificates(
    loaded: &LoadedGeometry,
    points: &[Point],
) -> Result<CertificateSweep> {
    let mut residual = 0.0f64;
    let mut tolerance = 0.0f64;
    let mut c_values = Vec::new();
    let mut c_samples = Vec::new();
    let mut f_sample = None;
    let mut kind = CertificateKind::Parallel;
    for p in points {
        let cert = berwald_condition_general(&loaded.space, p)?;
        residual = residual.max(cert.residual);
        tolerance = tolerance.max(cert.tolerance);
        if let Some(c) = cert.c {
            c_values.push(c);
            c_samples.push([p[0], c]);
        }
        if f_sample.is_none() {
            f_sample = cert.f.clone();
        }
        // Severity order: NotBerwald > GeneralWithF > ClosedNullWithC > Parallel.
        kind = match (kind, cert.kind) {
            (_, CertificateKind::NotBerwald) | (CertificateKind::NotBerwald, _) => {
                CertificateKind::NotBerwald
            }
            (_, CertificateKind::GeneralWithF) | (CertificateKind::GeneralWithF, _) => {
                CertificateKind::GeneralWithF
            }
            (_, CertificateKind::ClosedNullWithC)
            | (CertificateKind::ClosedNullWithC, _) => CertificateKind::ClosedNullWithC,
            _ => CertificateKind::Parallel,
        };
    }
    let c_mean = if c_values.is_empty() {
        None
    } else {
        Some(c_values.iter().sum::<f64>() / c_values.len() as f64)
    };
    c_samples.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(CertificateSweep {
        kind,
        residual,
        tolerance,
        c_mean,
        c_samples,
        f_sample,
    })
}

/// Cross-check: connection from sampling-based detection vs the closed form.
fn numeric_gamma_deviation(
    loaded: &LoadedGeometry,
    m: f64,
    points: &[Point],
    seed: u64,
) -> Result<f64> {
    let f = loaded.space.finsler();
    let mut deviation = 0.0f64;
    for p in points {
        let dirs = sample_directions(&f, p.coords(), loaded.space.dim() + 3, seed)?;
        let detection = berwald_detect(&f, p.coords(), &dirs, tol::CROSS_MODULE)?;
        let Some(gamma_numeric) = detection.gamma else {
            return Err(Error::NotBerwald {
                residual: detection.residual,
            });
        };
        let gamma_closed = match &loaded.kundt {
            Some(kundt) => affine_connection_kundt(kundt, m, p)?,
            None => affine_connection_space(&loaded.space, p)?,
        };
        deviation = deviation.max(gamma_numeric.max_abs_diff(&gamma_closed));
    }
    Ok(deviation)
}

pub fn analyze(cfg: &GeometryConfig, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let cfg = effective_config(cfg, opts);
    let loaded = cfg.build()?;
    let n = cfg.dimension;
    let sampling = &cfg.sampling;
    let mut notes = Vec::new();

    let grid = sampling.grid(n, sampling.grid_counts)?;
    let validity_points = {
        let mut pts = grid.clone();
        pts.extend(sampling.random(n, sampling.random_points.max(20), 1)?);
        pts
    };
    let cert_points: Vec<Point> = {
        let mut pts: Vec<Point> = grid.iter().take(27).cloned().collect();
        pts.extend(sampling.random(n, 10, 2)?);
        pts
    };

    let validity = match validate(&loaded.space, &validity_points) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("validity check failed: {e}"));
            None
        }
    };

    let berwald_sweep = match sweep_certificates(&loaded, &cert_points) {
        Ok(s) => Some(s),
        Err(e) => {
            notes.push(format!("Berwald certificate failed: {e}"));
            None
        }
    };

    let is_berwald = berwald_sweep
        .as_ref()
        .map(|s| s.kind != CertificateKind::NotBerwald)
        .unwrap_or(false);

    let gamma_deviation = if is_berwald {
        match numeric_gamma_deviation(
            &loaded,
            cfg.m,
            &cert_points[..2.min(cert_points.len())],
            sampling.seed.wrapping_add(0x9e37),
        ) {
            Ok(d) => Some(d),
            Err(e) => {
                notes.push(format!("numeric connection cross-check failed: {e}"));
                None
            }
        }
    } else {
        None
    };

    let berwald = berwald_sweep.as_ref().map(|s| BerwaldSection {
        kind: s.kind.as_str().to_string(),
        residual: s.residual,
        tolerance: s.tolerance,
        c_mean: s.c_mean,
        c_samples: (!s.c_samples.is_empty()).then(|| s.c_samples.clone()),
        f_sample: s.f_sample.clone(),
        numeric_gamma_deviation: gamma_deviation,
    });

    // Ricci skew and verdict.
    let mut ricci_skew = None;
    let mut verdict: Option<Verdict> = None;
    let mut metrizability: Option<MetrizabilityReport> = None;

    if let Some(kundt) = &loaded.kundt {
        match metrizability_verdict(kundt, cfg.m, &grid) {
            Ok(rep) => {
                let mut brute = 0.0f64;
                let mut closed = 0.0f64;
                let mut agreement = 0.0f64;
                let mut scale = 0.0f64;
                for p in &grid {
                    match affine_curvature_kundt(kundt, cfg.m, p) {
                        Ok(c) => {
                            brute = brute.max(c.skew_max);
                            closed = closed.max(
                                c.closed_form_skew.as_ref().map(|s| s.amax()).unwrap_or(0.0),
                            );
                            agreement = agreement.max(c.agreement.unwrap_or(0.0));
                            scale = scale.max(c.ricci.amax());
                        }
                        Err(e) => {
                            notes.push(format!("affine curvature failed at a grid point: {e}"));
                        }
                    }
                }
                ricci_skew = Some(RicciSkewSection {
                    max: brute,
                    tolerance: tol::scaled(tol::STRUCTURAL, scale),
                    brute_force_max: brute,
                    closed_form_max: Some(closed),
                    route_agreement: Some(agreement),
                });
                verdict = Some(rep.verdict);
                metrizability = Some(rep);
            }
            Err(e) => {
                notes.push(format!("metrizability verdict failed: {e}"));
            }
        }
    } else if let Some(sweep) = &berwald_sweep {
        match sweep.kind {
            CertificateKind::NotBerwald => {
                verdict = Some(Verdict::NotBerwald);
            }
            CertificateKind::Parallel => {
                // Parallel 1-form: the affine connection is the Levi-Civita
                // connection of the defining metric itself.
                verdict = Some(Verdict::Metrizable);
                notes.push(
                    "parallel 1-form: the affine connection is metrized by the defining metric"
                        .into(),
                );
            }
            CertificateKind::ClosedNullWithC => {
                let closed_null = validity
                    .as_ref()
                    .map(|v| v.closed && v.null)
                    .unwrap_or(false);
                if closed_null {
                    let mut brute = 0.0f64;
                    let mut scale = 0.0f64;
                    let mut failed = false;
                    for p in &grid {
                        match affine_curvature_space(&loaded.space, p) {
                            Ok(c) => {
                                brute = brute.max(c.skew_max);
                                scale = scale.max(c.ricci.amax());
                            }
                            Err(e) => {
                                notes.push(format!(
                                    "affine curvature failed at a grid point: {e}"
                                ));
                                failed = true;
                                break;
                            }
                        }
                    }
                    if !failed {
                        let tolerance = tol::scaled(tol::STRUCTURAL, scale);
                        ricci_skew = Some(RicciSkewSection {
                            max: brute,
                            tolerance,
                            brute_force_max: brute,
                            closed_form_max: None,
                            route_agreement: None,
                        });
                        verdict = Some(if brute <= tolerance {
                            Verdict::Metrizable
                        } else {
                            Verdict::NotMetrizable
                        });
                        if verdict == Some(Verdict::Metrizable) {
                            notes.push(
                                "metrizable by symmetry of the affine Ricci tensor; \
                                 constructing the metrizing metric needs adapted null \
                                 coordinates (kundt mode)"
                                    .into(),
                            );
                        }
                    }
                } else {
                    notes.push(
                        "verdict undetermined: the 1-form is not closed and null, \
                         outside the scope of the metrizability analysis"
                            .into(),
                    );
                }
            }
            CertificateKind::GeneralWithF => {
                notes.push(
                    "verdict undetermined: Berwald with a non-closed or non-null 1-form \
                     is outside the scope of the metrizability analysis (symmetry of the \
                     affine Ricci tensor remains necessary)"
                        .into(),
                );
            }
        }
    }

    // Metrization construction and verification (adapted charts only).
    let metrization = if let (Some(kundt), Some(rep)) = (&loaded.kundt, &metrizability) {
        if rep.verdict == Verdict::Metrizable {
            match metrize(kundt, cfg.m, rep, cfg.u0) {
                Ok(tilde) => {
                    let verify_points = sampling.random(n, 50, 3)?;
                    match crate::kropina::verify_metrization(
                        &tilde,
                        kundt,
                        cfg.m,
                        &verify_points,
                    ) {
                        Ok((deviation, scale)) => {
                            let mut phi: Vec<[f64; 2]> = rep
                                .phi_samples
                                .iter()
                                .map(|&(u, p)| [u, p])
                                .collect();
                            phi.sort_by(|a, b| a[0].total_cmp(&b[0]));
                            phi.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12);
                            let at = grid.first().expect("non-empty grid");
                            let mut factor = Vec::with_capacity(phi.len());
                            for &[u, _] in &phi {
                                factor.push([u, tilde.factor_value(u, at)?]);
                            }
                            Some(MetrizationSection {
                                u0: cfg.u0,
                                phi_samples: phi,
                                factor_samples: factor,
                                verification_deviation: deviation,
                                tolerance: tol::scaled(tol::CROSS_MODULE, scale),
                            })
                        }
                        Err(e) => {
                            notes.push(format!("metrization verification failed: {e}"));
                            None
                        }
                    }
                }
                Err(e) => {
                    notes.push(format!("metrization failed: {e}"));
                    None
                }
            }
        } else {
            None
        }
    } else {
        None
    };

    Ok(AnalysisReport {
        geometry: GeometryEcho {
            name: cfg.name.clone(),
            dimension: n,
            mode: cfg.mode.as_str().to_string(),
            m: cfg.m,
            coordinates: cfg.coordinate_names(),
        },
        validity: validity.map(|v: Validity| ValiditySection {
            closed: v.closed,
            null: v.null,
            closed_residual: v.closed_residual,
            null_residual: v.null_residual,
            tolerance: v.tolerance,
        }),
        berwald,
        ricci_skew,
        verdict: verdict.map(|v| v.as_str().to_string()),
        metrization,
        meta: MetaSection {
            tool: TOOL_NAME,
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            seed: sampling.seed,
            grid_counts: sampling.grid_counts,
            notes,
            timestamp_unix: opts.timestamp.then(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            }),
        },
    })
}

/// The metrize command: requires an adapted chart and a metrizable verdict.
pub fn run_metrize(
    cfg: &GeometryConfig,
    opts: &AnalyzeOptions,
    u0_override: Option<f64>,
) -> Result<AnalysisReport> {
    let mut cfg = cfg.clone();
    if let Some(u0) = u0_override {
        cfg.u0 = u0;
    }
    let report = analyze(&cfg, opts)?;
    match report.verdict.as_deref() {
        Some("metrizable") => {
            if report.metrization.is_none() {
                return Err(Error::Precondition(
                    "metrizable, but the metrizing metric requires adapted null \
                     coordinates (kundt mode)"
                        .into(),
                ));
            }
            Ok(report)
        }
        Some(other) => {
            let skew = report
                .ricci_skew
                .as_ref()
                .map(|r| format!(" (skew Ricci residual {:.3e})", r.max))
                .unwrap_or_default();
            Err(Error::Precondition(format!(
                "cannot metrize: verdict is {other}{skew}"
            )))
        }
        None => Err(Error::Precondition(
            "cannot metrize: the analysis could not reach a verdict".into(),
        )),
    }
}

/// Result of the geodesic command.
pub struct GeodesicRun {
    pub trajectory: Vec<GeodesicState>,
    pub comparison: Option<NullComparison>,
}

pub fn run_geodesic(
    cfg: &GeometryConfig,
    opts: &AnalyzeOptions,
    init: GeodesicState,
    t_end: f64,
    tolerance: Option<f64>,
    compare_null: bool,
) -> Result<GeodesicRun> {
    let cfg = effective_config(cfg, opts);
    let loaded = cfg.build()?;
    let n = cfg.dimension;
    if init.x.len() != n {
        return Err(Error::Config(format!(
            "initial state has dimension {} but the geometry has {n}",
            init.x.len()
        )));
    }
    let integrator = match tolerance {
        Some(t) => IntegratorConfig::new(t, (t * 1e-2).max(1e-13), 200_000)?,
        None => IntegratorConfig::default(),
    };

    let kundt = loaded.kundt.clone();
    let space = loaded.space.clone();
    let m = cfg.m;
    let spray = (n, move |x: &[f64], y: &[f64]| -> Result<Vec<f64>> {
        match &kundt {
            Some(k) => {
                let p = Point::new(x.to_vec())?;
                let gamma = affine_connection_kundt(k, m, &p)?;
                Ok(spray_from_connection(&gamma, y))
            }
            None => spray_generic(&space, x, y),
        }
    });

    if compare_null {
        let kundt = loaded
            .kundt
            .as_ref()
            .ok_or_else(|| {
                Error::Precondition(
                    "--compare-null requires adapted null coordinates (kundt mode)".into(),
                )
            })?;
        let grid = cfg.sampling.grid(n, cfg.sampling.grid_counts)?;
        let rep = metrizability_verdict(kundt, m, &grid)?;
        if rep.verdict != Verdict::Metrizable {
            return Err(Error::Precondition(format!(
                "--compare-null requires a metrizable geometry; verdict is {}",
                rep.verdict.as_str()
            )));
        }
        let base = kundt.metric_field()?;
        let comparison = compare_null_geodesics(&spray, &base, &init, t_end, &integrator)?;
        let trajectory = integrate(&spray, &init, t_end, &integrator)?;
        Ok(GeodesicRun {
            trajectory,
            comparison: Some(comparison),
        })
    } else {
        let trajectory = integrate(&spray, &init, t_end, &integrator)?;
        Ok(GeodesicRun {
            trajectory,
            comparison: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave_config(h: &str) -> GeometryConfig {
        GeometryConfig::from_json(&format!(
            r#"{{
                "name": "wave",
                "dimension": 4,
                "mode": "kundt",
                "m": 0.5,
                "H": "{h}",
                "W": ["0", "0"],
                "h": [["1", "0"], ["0", "1"]]
            }}"#
        ))
        .unwrap()
    }

    fn opts() -> AnalyzeOptions {
        AnalyzeOptions {
            seed: Some(7),
            grid_density: Some(3),
            timestamp: false,
        }
    }

    #[test]
    fn analyze_metrizable_wave() {
        let report = analyze(&wave_config("u*v"), &opts()).unwrap();
        assert_eq!(report.verdict.as_deref(), Some("metrizable"));
        let v = report.validity.unwrap();
        assert!(v.closed && v.null);
        let b = report.berwald.unwrap();
        assert_eq!(b.kind, "closed-null-with-c");
        assert!(b.numeric_gamma_deviation.unwrap() < 1e-8);
        let m = report.metrization.unwrap();
        assert!(m.verification_deviation <= m.tolerance);
        // φ(u) = u
        for [u, phi] in &m.phi_samples {
            assert!((phi - u).abs() < 1e-12);
        }
        // factor = exp(u²/2) for m = 1/2, u0 = 0
        for [u, f] in &m.factor_samples {
            let expect = (0.5 * u * u / (2.0 * 0.5)).exp();
            assert!((f - expect).abs() < 1e-10 * expect);
        }
    }

    #[test]
    fn analyze_non_metrizable_wave() {
        let report = analyze(&wave_config("x3*v"), &opts()).unwrap();
        assert_eq!(report.verdict.as_deref(), Some("not-metrizable"));
        assert!(report.metrization.is_none());
        let skew = report.ricci_skew.unwrap();
        assert!(skew.max > 1e-3);
        assert!(skew.route_agreement.unwrap() < 1e-8);
    }

    #[test]
    fn analyze_non_berwald_wave() {
        let cfg = GeometryConfig::from_json(
            r#"{
                "name": "broken",
                "dimension": 4,
                "mode": "kundt",
                "m": 0.5,
                "H": "u*v",
                "W": ["v", "0"],
                "h": [["1", "0"], ["0", "1"]]
            }"#,
        )
        .unwrap();
        let report = analyze(&cfg, &opts()).unwrap();
        assert_eq!(report.verdict.as_deref(), Some("not-berwald"));
        assert!(report.berwald.unwrap().residual > 1e-3);
        assert!(report.ricci_skew.is_none());
    }

    #[test]
    fn analyze_general_mode_closed_null() {
        let cfg = GeometryConfig::from_json(
            r#"{
                "name": "wave-general",
                "dimension": 4,
                "mode": "general",
                "m": 0.5,
                "coordinates": ["u", "v", "x", "y"],
                "a": [["u*v","-1","0","0"],["-1","0","0","0"],["0","0","1","0"],["0","0","0","1"]],
                "b": ["1","0","0","0"]
            }"#,
        )
        .unwrap();
        let report = analyze(&cfg, &opts()).unwrap();
        assert_eq!(report.verdict.as_deref(), Some("metrizable"));
        // General route: skew measured brute-force, no adapted-chart factor.
        assert!(report.metrization.is_none());
        assert!(report.ricci_skew.unwrap().max < 1e-9);
    }

    #[test]
    fn metrize_rejects_non_metrizable() {
        let err = run_metrize(&wave_config("v^2"), &opts(), None).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn geodesic_run_and_null_comparison() {
        let cfg = wave_config("u*v");
        let x0 = vec![0.1, 0.2, 0.0, 0.0];
        let yx = 0.1;
        let yv = (0.1 * 0.2 + yx * yx) / 2.0;
        let init = GeodesicState::new(0.0, x0, vec![1.0, yv, yx, 0.0]).unwrap();
        let run = run_geodesic(&cfg, &opts(), init, 1.0, Some(1e-10), true).unwrap();
        assert!(run.trajectory.len() > 5);
        let cmp = run.comparison.unwrap();
        assert!(cmp.max_orthogonal_residual <= tol::TRAJECTORY);
    }

    #[test]
    fn reports_are_deterministic_without_timestamp() {
        let cfg = wave_config("u*v");
        let a = analyze(&cfg, &opts()).unwrap().to_json();
        let b = analyze(&cfg, &opts()).unwrap().to_json();
        assert_eq!(a, b);
        assert!(!a.contains("timestamp_unix\": 1"));
    }
}
