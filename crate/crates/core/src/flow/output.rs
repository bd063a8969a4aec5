use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Report-time series of one well. Rates are m³/day out of the reservoir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSeries {
    pub name: String,
    /// bar
    pub bhp: Vec<f64>,
    pub wct: Vec<f64>,
    pub q_w: Vec<f64>,
    pub q_o: Vec<f64>,
}

impl WellSeries {
    pub(crate) fn new(name: &str, n: usize) -> Self {
        WellSeries {
            name: name.to_string(),
            bhp: vec![f64::NAN; n],
            wct: vec![f64::NAN; n],
            q_w: vec![f64::NAN; n],
            q_o: vec![f64::NAN; n],
        }
    }

    pub(crate) fn record(&mut self, t: usize, bhp: f64, wct: f64, q_w: f64, q_o: f64) {
        self.bhp[t] = bhp;
        self.wct[t] = wct;
        self.q_w[t] = q_w;
        self.q_o[t] = q_o;
    }
}

/// Full-grid pressure (bar) and water saturation; inactive cells hold 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub pressure: Vec<f64>,
    pub s_w: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimDiagnostics {
    pub steps: usize,
    pub pressure_solves: usize,
    pub linear_iterations: usize,
    /// Largest per-step |stored - net inflow| of water over the gross water throughput.
    pub max_water_balance_error: f64,
    /// Largest per-step |net well and boundary volume flux| over the gross flux.
    pub max_volume_balance_error: f64,
    pub min_sw: f64,
    pub max_sw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    /// Report times (days).
    pub times: Vec<f64>,
    pub wells: Vec<WellSeries>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: SimDiagnostics,
}

impl SimOutput {
    pub fn well(&self, name: &str) -> Option<&WellSeries> {
        self.wells.iter().find(|w| w.name == name)
    }

    pub fn snapshot_at(&self, time: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.time == time)
    }

    /// `time,well,bhp_bar,wct` with one row per report time and well.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,well,bhp_bar,wct\n");
        for (t, time) in self.times.iter().enumerate() {
            for w in &self.wells {
                s.push_str(&format!("{time},{},{},{}\n", w.name, w.bhp[t], w.wct[t]));
            }
        }
        s
    }

    /// Inverse of [`SimOutput::to_csv`]; snapshots and rates are not stored there.
    pub fn from_csv(text: &str) -> Result<SimOutput> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("time,well,bhp_bar,wct") {
            return Err(Error::Format("unexpected simulation CSV header".into()));
        }
        let mut times: Vec<f64> = Vec::new();
        let mut wells: Vec<WellSeries> = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Format(format!("line {}: expected 4 fields", n + 2)));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", n + 2)))
            };
            let (time, bhp, wct) = (num(f[0])?, num(f[2])?, num(f[3])?);
            if times.last() != Some(&time) {
                times.push(time);
            }
            let w = match wells.iter_mut().position(|w| w.name == f[1]) {
                Some(p) => &mut wells[p],
                None => {
                    wells.push(WellSeries::new(f[1], 0));
                    wells.last_mut().unwrap()
                }
            };
            w.bhp.push(bhp);
            w.wct.push(wct);
            w.q_w.push(f64::NAN);
            w.q_o.push(f64::NAN);
        }
        if wells.iter().any(|w| w.bhp.len() != times.len()) {
            return Err(Error::Format("every well needs one row per report time".into()));
        }
        Ok(SimOutput {
            times,
            wells,
            snapshots: Vec::new(),
            diagnostics: SimDiagnostics::default(),
        })
    }
}
