//! Static SVG plots of logged signals.

use crate::simulator::{series, TimeSeriesRecord, SIGNALS};
use plotters::prelude::*;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlotError {
    #[error("unknown signal `{name}`; valid names: {}", SIGNALS.join(", "))]
    UnknownSignal { name: String },
    #[error("nothing to plot: {0}")]
    Empty(&'static str),
    #[error("plot output failed: {0}")]
    Io(String),
}

const PANEL_HEIGHT: u32 = 220;
const WIDTH: u32 = 900;

/// One panel per signal against time, stacked vertically.
pub fn emit_plot(records: &[TimeSeriesRecord], signals: &[&str], dest: &Path) -> Result<(), PlotError> {
    if let Some(name) = signals.iter().find(|s| TimeSeriesRecord::column(s).is_none()) {
        return Err(PlotError::UnknownSignal { name: name.to_string() });
    }
    if signals.is_empty() {
        return Err(PlotError::Empty("no signals requested"));
    }
    if records.is_empty() {
        return Err(PlotError::Empty("no records"));
    }
    let io = |e: &dyn std::fmt::Display| PlotError::Io(e.to_string());
    let t = series(records, "time_s").expect("time column");
    let (t0, t1) = (t[0], t[t.len() - 1].max(t[0] + f64::EPSILON));

    let root = SVGBackend::new(dest, (WIDTH, PANEL_HEIGHT * signals.len() as u32)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| io(&e))?;
    for (area, name) in root.split_evenly((signals.len(), 1)).iter().zip(signals) {
        let y = series(records, name).expect("checked above");
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let pad = ((hi - lo) * 0.05).max(1e-9 * hi.abs().max(1.0));
        let mut chart = ChartBuilder::on(area)
            .caption(*name, ("sans-serif", 16))
            .margin(8)
            .x_label_area_size(30)
            .y_label_area_size(70)
            .build_cartesian_2d(t0..t1, (lo - pad)..(hi + pad))
            .map_err(|e| io(&e))?;
        chart.configure_mesh().x_desc("time (s)").draw().map_err(|e| io(&e))?;
        chart
            .draw_series(LineSeries::new(t.iter().copied().zip(y), &BLUE))
            .map_err(|e| io(&e))?;
    }
    root.present().map_err(|e| io(&e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{run_scenario, Scenario, SimConfig};

    fn records() -> Vec<TimeSeriesRecord> {
        run_scenario(&Scenario::default(), &SimConfig { t_end: 0.01, ..Default::default() }).unwrap()
    }

    #[test]
    fn single_panel_is_written_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let recs = records();
        let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        emit_plot(&recs, &["theta_pll_rad"], &a).unwrap();
        emit_plot(&recs, &["theta_pll_rad"], &b).unwrap();
        let bytes = std::fs::read(&a).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(bytes, std::fs::read(&b).unwrap());
    }

    #[test]
    fn unknown_signal_lists_valid_names() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_plot(&records(), &["theta"], &dir.path().join("x.svg")).unwrap_err();
        assert_eq!(err, PlotError::UnknownSignal { name: "theta".into() });
        assert!(err.to_string().contains("theta_pll_rad"));
    }
}
