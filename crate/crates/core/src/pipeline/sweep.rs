use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{reconstruct, PipelineConfig, StageTimings, SyntheticFrame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    /// Timings of the fastest repeat.
    pub timings: StageTimings,
    pub coarse_voxels_tested: u64,
    pub fine_voxels_tested: u64,
    pub triangles: u64,
}

/// Reconstructs `scene` once per value of the swept spacing, keeping the
/// fastest of `repeats` runs. The other spacing stays as in `cfg`; the ROI
/// margin follows the coarse spacing and `t_v` follows the fine spacing.
pub fn sweep(
    cfg: &PipelineConfig,
    scene: &SyntheticFrame,
    silhouettes: &[crate::silhouette::Mask],
    axis: SweepAxis,
    values: &[f64],
    repeats: usize,
) -> Result<Vec<SweepRow>> {
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("sweep values must be strictly ascending".into()));
    }
    // Repeats run round-robin over the values so a slow spell on the machine
    // inflates every value alike instead of one.
    let mut best: Vec<Option<SweepRow>> = vec![None; values.len()];
    for _ in 0..repeats.max(1) {
        for (slot, &v) in best.iter_mut().zip(values) {
            let run_cfg = match axis {
                SweepAxis::Coarse => cfg.clone().with_spacings(v, cfg.fine_spacing),
                SweepAxis::Fine => cfg.clone().with_spacings(cfg.coarse_spacing, v),
            };
            let out = reconstruct(&run_cfg, &scene.rig, 0, &scene.frames, silhouettes.to_vec())?;
            let s = out.bundle.stats;
            let row = SweepRow {
                axis,
                value: v,
                timings: out.timings,
                coarse_voxels_tested: s.coarse_voxels_tested,
                fine_voxels_tested: s.fine_voxels_tested,
                triangles: s.triangles,
            };
            if slot.as_ref().is_none_or(|b| row.timings.total_ms() < b.timings.total_ms()) {
                *slot = Some(row);
            }
        }
    }
    let rows: Vec<SweepRow> = best.into_iter().map(|r| r.expect("at least one repeat")).collect();
    Ok(rows)
}

#[derive(Serialize)]
struct CsvRecord {
    axis: SweepAxis,
    spacing_mm: f64,
    b1_ms: f64,
    b2_ms: f64,
    b3_ms: f64,
    c_ms: f64,
    d1_ms: f64,
    d2_ms: f64,
    total_ms: f64,
    coarse_voxels_tested: u64,
    fine_voxels_tested: u64,
    triangles: u64,
}

pub fn write_sweep_csv(rows: &[SweepRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        let [b1, b2, b3, c, d1, d2] = r.timings.stages();
        out.serialize(CsvRecord {
            axis: r.axis,
            spacing_mm: r.value,
            b1_ms: b1,
            b2_ms: b2,
            b3_ms: b3,
            c_ms: c,
            d1_ms: d1,
            d2_ms: d2,
            total_ms: r.timings.total_ms(),
            coarse_voxels_tested: r.coarse_voxels_tested,
            fine_voxels_tested: r.fine_voxels_tested,
            triangles: r.triangles,
        })
        .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
    }
    out.flush().map_err(|e| Error::io("sweep csv", e))
}
