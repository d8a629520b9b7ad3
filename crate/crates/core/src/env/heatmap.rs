use std::io::Write;

use super::point_reach::PointReachConfig;
use crate::approx::{DeterministicPolicy, Mlp};
use crate::error::{Error, Result};

pub const HEATMAP_CELLS: usize = 10;

/// `grid[row][col]`: `b(s, π(s, 0))` at the center of the cell in row `row` (y, bottom first)
/// and column `col` (x, left first).
pub fn export_heatmap(b: &Mlp, cfg: &PointReachConfig, policy: &DeterministicPolicy) -> Result<Vec<Vec<f64>>> {
    let layout = policy.layout();
    if b.arch().input != layout.step_dim() || b.arch().output != 1 {
        return Err(Error::InvalidInput("b does not take single-step features".into()));
    }
    let cell = cfg.grid_size / HEATMAP_CELLS as f64;
    let mut x = vec![0.0; layout.step_dim()];
    Ok((0..HEATMAP_CELLS)
        .map(|row| {
            (0..HEATMAP_CELLS)
                .map(|col| {
                    let obs = cfg.normalize([(col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell]);
                    let a = policy.act(&obs, 0);
                    layout.write_step(&obs, 0, &a, &mut x);
                    b.value(&x)
                })
                .collect()
        })
        .collect())
}

/// Ten comma-separated values per line, bottom row first.
pub fn write_heatmap_csv<W: Write>(grid: &[Vec<f64>], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in grid {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Cells whose center lies within one cell width of the start → target-center segment.
pub fn line_cell_mask(cfg: &PointReachConfig) -> Vec<Vec<bool>> {
    let cell = cfg.grid_size / HEATMAP_CELLS as f64;
    let [ax, ay] = cfg.start;
    let [bx, by] = cfg.target_center();
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    (0..HEATMAP_CELLS)
        .map(|row| {
            (0..HEATMAP_CELLS)
                .map(|col| {
                    let (px, py) = ((col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell);
                    let t = if len2 > 0.0 { (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
                    let (qx, qy) = (ax + t * dx, ay + t * dy);
                    ((px - qx).powi(2) + (py - qy).powi(2)).sqrt() <= cell
                })
                .collect()
        })
        .collect()
}
