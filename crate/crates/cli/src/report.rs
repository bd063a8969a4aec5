//! Report stage: metric tables, per-well series and the maps behind the plots.

use serde::{Deserialize, Serialize};

use shmked::esmda::Datum;
use shmked::flow::SimOutput;
use shmked::io::matrix_to_csv;
use shmked::metrics::{member_rmse_csv, reports_to_csv};
use shmked::model::{devectorize, vertical_average, StateVector};
use shmked::twin::comparison;

use crate::error::CliResult;
use crate::pipeline::{text, Artifacts, Method, Workspace};

/// Layout facts the plot stage needs, stored as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub rows: usize,
    pub cols: usize,
    pub history_end: f64,
    pub survey_times: Vec<f64>,
    pub wells: Vec<String>,
    pub ensemble_size: usize,
}

pub const SERIES_HEADER: &str = "source,member,time,well,bhp_bar,wct";

fn push_series(out: &mut String, source: &str, member: usize, sim: &SimOutput) {
    for (t, time) in sim.times.iter().enumerate() {
        for w in &sim.wells {
            out.push_str(&format!("{source},{member},{time},{},{},{}\n", w.name, w.bhp[t], w.wct[t]));
        }
    }
}

fn mean_of(maps: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = vec![0.0; maps.first().map_or(0, Vec::len)];
    for m in maps {
        for (a, b) in mean.iter_mut().zip(m) {
            *a += b;
        }
    }
    let n = maps.len().max(1) as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    mean
}

pub fn build_report(ws: &Workspace) -> CliResult<Artifacts> {
    let exp = ws.cfg.experiment()?;
    let grid = &exp.grid;
    let (rows, cols) = (grid.ny(), grid.nx());
    let truth_field = ws.load_truth_field()?;
    let truth_output = ws.load_truth_output()?;
    let truth_impedance = ws.load_truth_impedance()?;
    let obs = ws.load_observations()?;
    let initial = ws.initial_ensemble()?;
    let baseline = ws.load_result(Method::Esmda)?;
    let sparse = ws.load_result(Method::ShmKed)?;

    let reports = comparison(grid, &truth_field, &initial, &baseline, &sparse)?;
    let mut out = vec![
        text("metrics.csv", reports_to_csv(&reports)),
        text("member_rmse.csv", member_rmse_csv(&reports)),
    ];

    let mut trace = String::from("stage,esmda_mean_rmse,esmda_mean_field_rmse,shm-ked_mean_rmse,shm-ked_mean_field_rmse\n");
    let (bt, st) = (baseline.mean_rmse_trace(), sparse.mean_rmse_trace());
    for p in 0..bt.len().min(st.len()) {
        trace.push_str(&format!(
            "{p},{},{},{},{}\n",
            bt[p], baseline.mean_field_rmse[p], st[p], sparse.mean_field_rmse[p]
        ));
    }
    out.push(text("rmse_trace.csv", trace));

    let mut series = format!("{SERIES_HEADER}\n");
    push_series(&mut series, "truth", 0, &truth_output);
    // Observed BHP and WCT are paired up per history time and well.
    let mut observed: Vec<(f64, String, f64, f64)> = Vec::new();
    for (datum, &v) in obs.layout.entries.iter().zip(&obs.d_obs) {
        match datum {
            Datum::Bhp { time, well, .. } => observed.push((*time, well.clone(), v, f64::NAN)),
            Datum::Wct { time, well, .. } => {
                if let Some(row) = observed.iter_mut().rev().find(|r| r.0 == *time && &r.1 == well) {
                    row.3 = v;
                }
            }
            Datum::Impedance { .. } => {}
        }
    }
    for (time, well, bhp, wct) in &observed {
        series.push_str(&format!("observed,0,{time},{well},{bhp},{wct}\n"));
    }
    for (i, sim) in baseline.initial_outputs.iter().enumerate() {
        push_series(&mut series, "initial", i, sim);
    }
    for (label, result) in [("esmda", &baseline), ("shm-ked", &sparse)] {
        for (i, sim) in result.final_outputs.iter().enumerate() {
            push_series(&mut series, label, i, sim);
        }
    }
    out.push(text("well_series.csv", series));

    for (s, t) in exp.schedule.survey_times.iter().enumerate() {
        out.push(text(
            format!("impedance_t{t}_truth.csv"),
            matrix_to_csv(&truth_impedance[s], rows, cols),
        ));
        for (label, result) in [("esmda", &baseline), ("shm-ked", &sparse)] {
            let maps: Vec<Vec<f64>> = result.final_impedance.iter().map(|m| m[s].clone()).collect();
            out.push(text(
                format!("impedance_t{t}_{label}.csv"),
                matrix_to_csv(&mean_of(&maps), rows, cols),
            ));
        }
    }

    for (label, fields) in [
        ("truth", std::slice::from_ref(&truth_field)),
        ("initial", &initial[..]),
        ("esmda", &baseline.final_fields[..]),
        ("shm-ked", &sparse.final_fields[..]),
    ] {
        let map = vertical_average(&devectorize(&StateVector(mean_of(fields)), grid)?, grid);
        out.push(text(format!("lnk_{label}.csv"), matrix_to_csv(&map, rows, cols)));
    }

    let summary = ReportSummary {
        rows,
        cols,
        history_end: exp.schedule.history_end(),
        survey_times: exp.schedule.survey_times.clone(),
        wells: exp.flow.wells.iter().map(|w| w.name.clone()).collect(),
        ensemble_size: initial.len(),
    };
    out.push(text("summary.json", serde_json::to_string_pretty(&summary)?));
    Ok(out)
}
