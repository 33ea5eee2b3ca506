use std::io::Write;
use std::path::Path;

use image::{Rgb, RgbImage};

use super::SimilarityMatrix;
use crate::model::SetLabel;

/// Row order with reference datasets first, then targeting; datasets in
/// order of first appearance, records in input order inside each.
pub fn dataset_grouped_order(m: &SimilarityMatrix) -> Vec<usize> {
    let mut out = Vec::with_capacity(m.n());
    for label in [SetLabel::Reference, SetLabel::Targeting] {
        let mut datasets: Vec<&str> = Vec::new();
        for l in m.labels.iter().filter(|l| l.set_label == label) {
            if !datasets.contains(&l.dataset_id.as_str()) {
                datasets.push(&l.dataset_id);
            }
        }
        for ds in datasets {
            out.extend((0..m.n()).filter(|&i| m.labels[i].set_label == label && m.labels[i].dataset_id == ds));
        }
    }
    out
}

/// CSV with an `id` header row and column, values to 6 decimals.
pub fn write_matrix_csv<W: Write>(m: &SimilarityMatrix, order: &[usize], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(order.iter().map(|&i| m.labels[i].id.clone()));
    w.write_record(&header)?;
    for &i in order {
        let mut row = vec![m.labels[i].id.clone()];
        row.extend(order.iter().map(|&j| format!("{:.6}", m.get(i, j))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn shade(v: f64) -> Rgb<u8> {
    // white at 0 through to dark red at 1
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    Rgb([lerp(255.0, 140.0), lerp(255.0, 0.0), lerp(255.0, 10.0)])
}

/// Raster of `cell` × `cell` pixel squares, one per matrix entry.
pub fn render_heatmap(m: &SimilarityMatrix, order: &[usize], cell: u32) -> RgbImage {
    let n = order.len() as u32;
    let cell = cell.max(1);
    RgbImage::from_fn(n * cell, n * cell, |x, y| {
        let (r, c) = ((y / cell) as usize, (x / cell) as usize);
        shade(m.get(order[r], order[c]))
    })
}

pub fn write_heatmap_png(m: &SimilarityMatrix, order: &[usize], cell: u32, path: &Path) -> image::ImageResult<()> {
    render_heatmap(m, order, cell).save_with_format(path, image::ImageFormat::Png)
}
