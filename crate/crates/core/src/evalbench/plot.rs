//! Plot-ready CSV for the representation, noise-shift and loss-bar figures.

use std::fmt;

use super::experiment::{report_csv, ReportRow};
use super::pca::pca_project;
use crate::error::{Result, VenomError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Representation,
    NoiseShift,
    LossBars,
}

impl PlotKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "representation" => Some(PlotKind::Representation),
            "noise-shift" => Some(PlotKind::NoiseShift),
            "loss-bars" => Some(PlotKind::LossBars),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PlotKind::Representation => "representation",
            PlotKind::NoiseShift => "noise-shift",
            PlotKind::LossBars => "loss-bars",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `dataset_id,group,pc1,pc2[,pc3]`, one row per embedding.
pub fn representation_csv(points: &[(String, String, Vec<f64>)], dims: usize) -> Result<String> {
    let vectors: Vec<Vec<f64>> = points.iter().map(|(_, _, z)| z.clone()).collect();
    let p = pca_project(&vectors, dims)?;
    if p.degenerate {
        log::warn!("all embeddings are identical; coordinates are zero");
    }
    let mut out = String::from("dataset_id,group");
    (1..=dims).for_each(|d| out.push_str(&format!(",pc{d}")));
    out.push('\n');
    for ((id, group, _), c) in points.iter().zip(&p.coords) {
        if group.contains([',', '\n']) {
            return Err(VenomError::Contract(format!("group label {group:?} is not CSV-safe")));
        }
        out.push_str(&format!("{id},{group}"));
        c.iter().for_each(|v| out.push_str(&format!(",{v:?}")));
        out.push('\n');
    }
    Ok(out)
}

/// `noise_level,euclidean_displacement`, sorted by level.
pub fn noise_shift_csv(points: &[(f64, f64)]) -> String {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = String::from("noise_level,euclidean_displacement\n");
    sorted.iter().for_each(|(l, d)| out.push_str(&format!("{l:?},{d:?}\n")));
    out
}

/// The report rows themselves, one bar per arm.
pub fn loss_bars_csv(rows: &[ReportRow]) -> String {
    report_csv(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representation_shape() {
        let pts: Vec<(String, String, Vec<f64>)> = (0..5)
            .map(|i| (format!("d{i}"), format!("g{}", i % 2), vec![i as f64, (i * i) as f64, 1.0]))
            .collect();
        let csv = representation_csv(&pts, 2).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "dataset_id,group,pc1,pc2");
        assert_eq!(lines.len(), 6);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn noise_shift_is_sorted() {
        let csv = noise_shift_csv(&[(0.4, 3.0), (0.05, 1.0), (0.2, 2.0)]);
        assert_eq!(csv, "noise_level,euclidean_displacement\n0.05,1.0\n0.2,2.0\n0.4,3.0\n");
    }

    #[test]
    fn loss_bars_mirror_report() {
        let row = ReportRow {
            experiment: "e".into(),
            arm: "cosine".into(),
            k: 4,
            rmse: 2.0,
            mae: 1.0,
            speedup: 3.0,
            amortized_speedup: 4.0,
            reps: 10,
        };
        assert_eq!(
            loss_bars_csv(&[row]),
            "experiment,arm,k,rmse,mae,speedup,amortized_speedup,reps\ne,cosine,4,2.0,1.0,3.0,4.0,10\n"
        );
    }
}
