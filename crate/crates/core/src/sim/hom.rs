use serde::Serialize;

use crate::error::{check_range, Result};
use crate::photon::{PhaseQuadrature, PulsePairParams, ThresholdDetector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomRow {
    pub overlap: f64,
    /// Probability that the detectors on both splitter outputs click.
    pub coincidence: f64,
    pub singles_a: f64,
    pub singles_b: f64,
    /// Dip depth relative to the largest coincidence in the scan.
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomScan {
    pub rows: Vec<HomRow>,
    /// `(C_max - C_min) / C_max` over the scan.
    pub visibility: f64,
}

/// Two-detector coincidence scan over the mode overlap, with ideal
/// detectors on both outputs of BS1.
pub fn hom_coincidence_scan(params: &PulsePairParams, overlaps: &[f64]) -> Result<HomScan> {
    hom_coincidence_scan_with(params, overlaps, &ThresholdDetector::ideal())
}

pub fn hom_coincidence_scan_with(
    params: &PulsePairParams,
    overlaps: &[f64],
    det: &ThresholdDetector,
) -> Result<HomScan> {
    let mut sorted = overlaps
        .iter()
        .map(|&o| check_range("overlap", o, 0.0, 1.0))
        .collect::<Result<Vec<_>>>()?;
    sorted.sort_by(f64::total_cmp);

    let quad = PhaseQuadrature::default();
    let mut rows = Vec::with_capacity(sorted.len());
    for overlap in sorted {
        let p = PulsePairParams::with_overlap(params.mu1(), params.mu2(), params.t(), overlap)?;
        let k = p.kernel();
        let click_a = |th: f64| det.click_coherent(k.mode_a_intensity(th));
        let click_b = |th: f64| det.click_coherent(k.mode_b_intensity(th));
        rows.push(HomRow {
            overlap,
            coincidence: quad.average(|th| click_a(th) * click_b(th)),
            singles_a: quad.average(click_a),
            singles_b: quad.average(click_b),
            visibility: 0.0,
        });
    }

    let c_max = rows.iter().map(|r| r.coincidence).fold(0.0, f64::max);
    let c_min = rows.iter().map(|r| r.coincidence).fold(f64::INFINITY, f64::min);
    let dip = |c: f64| if c_max > 0.0 { (c_max - c) / c_max } else { 0.0 };
    for r in &mut rows {
        r.visibility = dip(r.coincidence);
    }
    let visibility = if rows.is_empty() { 0.0 } else { dip(c_min) };
    Ok(HomScan { rows, visibility })
}
