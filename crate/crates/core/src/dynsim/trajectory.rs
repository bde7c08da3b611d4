use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::BusId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SimStatus {
    Completed,
    Diverged { time: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSeries {
    pub bus: BusId,
    pub label: String,
    /// One value per recorded sample.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub bus_ids: Vec<BusId>,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `v_mag[k][j]`: sample k, bus j, pu.
    pub v_mag: Vec<Vec<f64>>,
    /// SVC output per sample, Mvar.
    pub svc_q: Vec<DeviceSeries>,
    /// Open-loop injection delivered per sample, Mvar.
    pub injection_q: Vec<DeviceSeries>,
    pub status: SimStatus,
    pub contingency: Option<String>,
    pub schedules: Vec<String>,
}

impl Trajectory {
    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self.status, SimStatus::Diverged { .. })
    }

    pub fn bus_series(&self, bus: BusId) -> Option<Vec<f64>> {
        let j = self.bus_ids.iter().position(|&b| b == bus)?;
        Some(self.v_mag.iter().map(|row| row[j]).collect())
    }

    /// Checks that `other` has the same bus ordering and time step.
    pub fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        if self.bus_ids != other.bus_ids {
            return Err(Error::GridMismatch("bus orderings differ".into()));
        }
        if self.dt.to_bits() != other.dt.to_bits() {
            return Err(Error::GridMismatch(format!("dt {} vs {}", self.dt, other.dt)));
        }
        Ok(())
    }

    /// CSV with header `t,bus_<id>,...`; floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend(self.bus_ids.iter().map(|b| format!("bus_{b}")));
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.v_mag) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Reads the voltage table written by [`Trajectory::to_csv`].
    pub fn from_csv(text: &str) -> Result<Trajectory> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::Parse("trajectory csv must start with column t".into()));
        }
        let mut bus_ids = Vec::new();
        for h in header.iter().skip(1) {
            let id = h
                .strip_prefix("bus_")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad trajectory column {h:?}")))?;
            bus_ids.push(id);
        }
        let mut times = Vec::new();
        let mut v_mag = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Parse(format!("trajectory csv: {e}")))?;
            times.push(vals[0]);
            v_mag.push(vals[1..].to_vec());
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(Trajectory {
            bus_ids,
            dt,
            times,
            v_mag,
            svc_q: Vec::new(),
            injection_q: Vec::new(),
            status: SimStatus::Completed,
            contingency: None,
            schedules: Vec::new(),
        })
    }
}
