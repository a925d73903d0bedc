//! Intermittent jets: profiles, analytic families, band-limited grid jets and their checks.
pub mod boxgrid;
pub mod checks;
mod family;
pub mod grid;
mod profiles;

pub use family::{FrameCoords, JetFamily};
pub use profiles::ProfileSet;

/// Profiles normalized by quadrature with `quadrature_n` nodes.
pub fn build_profiles(quadrature_n: usize) -> crate::Result<ProfileSet> {
    ProfileSet::build(quadrature_n)
}

use crate::frame::{place_tubes, GeometricFrame};
use checks::{IdentityReport, OscillationReport, Quantity, ScalingReport, SupportReport};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub k: u64,
    pub lambda: f64,
    pub box_nodes: [usize; 2],
    pub scan_grid: usize,
    pub dts: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormRow {
    pub direction: usize,
    pub t: f64,
    pub l2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct JetReport {
    pub provenance: Provenance,
    pub placement_margin: Option<f64>,
    pub norms: Vec<NormRow>,
    pub identities: Vec<IdentityReport>,
    pub supports: Vec<SupportReport>,
    pub oscillation: Vec<OscillationReport>,
    /// Fitted order of the oscillation residual in dt (one per direction).
    pub oscillation_order: Vec<f64>,
    pub scaling: Vec<ScalingReport>,
}

#[derive(Clone, Debug)]
pub struct JetReportOptions {
    pub box_nodes: [usize; 2],
    pub scan_grid: usize,
    pub near_points: usize,
    pub times: Vec<f64>,
    pub dts: Vec<f64>,
    pub scaling_ks: Vec<u64>,
    pub seed: u64,
}

impl Default for JetReportOptions {
    fn default() -> Self {
        JetReportOptions {
            box_nodes: [2048, 1024],
            scan_grid: 96,
            near_points: 20_000,
            times: vec![0.0, 0.3],
            dts: vec![1e-5, 5e-6, 2.5e-6],
            scaling_ks: vec![2, 4, 5],
            seed: 7,
        }
    }
}

/// Full identity, support, oscillation and scaling battery for one k.
pub fn jet_report(
    profiles: &ProfileSet,
    frame: &GeometricFrame,
    k: u64,
    opts: &JetReportOptions,
) -> crate::Result<JetReport> {
    let placement = place_tubes(frame, k, frame.len(), 400)?;
    let fam = JetFamily::build(profiles.clone(), frame.clone(), k, Some(&placement))?;
    let mut norms = Vec::new();
    let mut identities = Vec::new();
    let mut oscillation = Vec::new();
    let mut oscillation_order = Vec::new();
    for i in 0..fam.len() {
        for &t in &opts.times {
            norms.push(NormRow {
                direction: i,
                t,
                l2: checks::w_l2_norm(&fam, i, t),
            });
        }
        identities.push(checks::identity_residuals(
            &fam,
            i,
            opts.box_nodes[0],
            opts.box_nodes[1],
        ));
        let rows: Vec<OscillationReport> = opts
            .dts
            .iter()
            .map(|&dt| {
                checks::oscillation_identity(
                    &fam,
                    i,
                    opts.times[0],
                    dt,
                    opts.box_nodes[0],
                    opts.box_nodes[1] / 4,
                )
            })
            .collect();
        oscillation_order.push(fit_order(&rows));
        oscillation.extend(rows);
    }
    let supports = opts
        .times
        .iter()
        .map(|&t| checks::support_scan(&fam, t, opts.scan_grid, opts.near_points, opts.seed))
        .collect();
    let mut scaling = Vec::new();
    for q in [Quantity::Psi, Quantity::Phi, Quantity::W] {
        for p in [1.0, 2.0, 4.0] {
            scaling.push(checks::scaling_regression(
                profiles,
                frame,
                &opts.scaling_ks,
                q,
                0,
                0,
                p,
            )?);
        }
    }
    Ok(JetReport {
        provenance: Provenance {
            k,
            lambda: fam.lambda,
            box_nodes: opts.box_nodes,
            scan_grid: opts.scan_grid,
            dts: opts.dts.clone(),
            seed: opts.seed,
        },
        placement_margin: Some(placement.margin),
        norms,
        identities,
        supports,
        oscillation,
        oscillation_order,
        scaling,
    })
}

/// Least-squares slope of log(residual) against log(dt).
pub fn fit_order(rows: &[OscillationReport]) -> f64 {
    let x: Vec<f64> = rows.iter().map(|r| r.dt.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.relative_residual.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
