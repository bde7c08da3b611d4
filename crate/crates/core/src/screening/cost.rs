use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Cost of one SVC.
    pub c_svc: f64,
    /// Cost of one unaddressed (contingency, duration) pair.
    pub c_fidvr: f64,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_svc > 0.0 && self.c_fidvr > 0.0 && self.c_svc.is_finite() && self.c_fidvr.is_finite()) {
            return Err(Error::InvalidInput("c_svc and c_fidvr must be positive".into()));
        }
        Ok(())
    }
}

/// C = c_svc·n_svc + c_fidvr·Σ_i (n_total − n_i)
pub fn total_cost(model: &CostModel, counts: &[usize], n_svc: usize, n_total: usize) -> Result<f64> {
    if let Some(c) = counts.iter().find(|&&c| c > n_total) {
        return Err(Error::InvalidInput(format!("addressed count {c} exceeds the {n_total} contingencies")));
    }
    let unaddressed: usize = counts.iter().map(|c| n_total - c).sum();
    Ok(model.c_svc * n_svc as f64 + model.c_fidvr * unaddressed as f64)
}

/// One row of a coverage table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub duration: f64,
    pub n_svc: usize,
    pub addressed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_svc: usize,
    /// Ordered by duration.
    pub counts: Vec<usize>,
    pub cost: f64,
}

/// Cost of every SVC count in the table and the cheapest one; ties go to the
/// smaller count.
pub fn optimal_svc_count(
    model: &CostModel,
    table: &[CoveragePoint],
    n_total: usize,
) -> Result<((usize, f64), Vec<CurvePoint>)> {
    model.validate()?;
    let mut by_n: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for p in table {
        by_n.entry(p.n_svc).or_default().push((p.duration, p.addressed));
    }
    if by_n.is_empty() {
        return Err(Error::Coverage("coverage table is empty".into()));
    }
    let mut durations: Option<Vec<f64>> = None;
    let mut curve = Vec::with_capacity(by_n.len());
    for (n, mut rows) in by_n {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ds: Vec<f64> = rows.iter().map(|r| r.0).collect();
        if ds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Coverage(format!("duplicate duration for n_svc = {n}")));
        }
        match &durations {
            None => durations = Some(ds),
            Some(prev) if *prev != ds => {
                return Err(Error::Coverage(format!("n_svc = {n} covers durations {ds:?}, expected {prev:?}")))
            }
            _ => {}
        }
        let counts: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let cost = total_cost(model, &counts, n, n_total)?;
        curve.push(CurvePoint { n_svc: n, counts, cost });
    }
    let best = curve
        .iter()
        .fold(None::<&CurvePoint>, |acc, p| match acc {
            Some(b) if b.cost <= p.cost => Some(b),
            _ => Some(p),
        })
        .expect("curve is non-empty");
    Ok(((best.n_svc, best.cost), curve))
}

#[derive(Debug, Deserialize)]
struct Row {
    duration: f64,
    n_svc: usize,
    addressed: usize,
    #[serde(default)]
    percentage: Option<f64>,
}

/// Reads `duration,n_svc,addressed[,percentage]`. When `n_total` is known the
/// percentage column, if present, must agree with it to 1e-6.
pub fn read_coverage_csv(text: &str, n_total: Option<usize>) -> Result<Vec<CoveragePoint>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (line, rec) in r.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| Error::Coverage(format!("row {}: {e}", line + 2)))?;
        if !(row.duration > 0.0) {
            return Err(Error::Coverage(format!("row {}: duration must be positive", line + 2)));
        }
        if let (Some(n), Some(p)) = (n_total, row.percentage) {
            if row.addressed > n {
                return Err(Error::Coverage(format!("row {}: {} addressed out of {n}", line + 2, row.addressed)));
            }
            let expect = row.addressed as f64 / n as f64 * 100.0;
            if (expect - p).abs() > 1e-6 {
                return Err(Error::Coverage(format!(
                    "row {}: percentage {p} does not match {} of {n}",
                    line + 2,
                    row.addressed
                )));
            }
        }
        out.push(CoveragePoint { duration: row.duration, n_svc: row.n_svc, addressed: row.addressed });
    }
    Ok(out)
}

pub(crate) fn write_coverage_csv(points: &[CoveragePoint], n_total: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["duration", "n_svc", "addressed", "percentage"])?;
    for p in points {
        let pct = if n_total == 0 { 0.0 } else { p.addressed as f64 / n_total as f64 * 100.0 };
        w.write_record([p.duration.to_string(), p.n_svc.to_string(), p.addressed.to_string(), pct.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `n_svc,cost` with cost in units of c_svc.
pub fn write_cost_curve(model: &CostModel, curve: &[CurvePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n_svc", "cost"])?;
    for p in curve {
        w.write_record([p.n_svc.to_string(), (p.cost / model.c_svc).to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: CostModel = CostModel { c_svc: 1.0, c_fidvr: 5.0 };

    #[test]
    fn worked_cost_values() {
        assert_eq!(total_cost(&UNIT, &[28, 27, 24], 25, 40).unwrap(), 230.0);
        assert_eq!(total_cost(&UNIT, &[40, 40, 40], 7, 40).unwrap(), 7.0);
        assert_eq!(total_cost(&UNIT, &[0, 0, 0], 0, 40).unwrap(), 600.0);
        assert!(total_cost(&UNIT, &[41], 1, 40).is_err());
    }

    #[test]
    fn ties_prefer_fewer_svcs() {
        let table = [
            CoveragePoint { duration: 5.0, n_svc: 2, addressed: 1 },
            CoveragePoint { duration: 5.0, n_svc: 1, addressed: 0 },
        ];
        let m = CostModel { c_svc: 1.0, c_fidvr: 1.0 };
        let ((n, c), curve) = optimal_svc_count(&m, &table, 1).unwrap();
        assert_eq!((n, c), (1, 2.0));
        assert_eq!(curve.len(), 2);
    }

    #[test]
    fn malformed_tables() {
        assert!(read_coverage_csv("duration,n_svc,addressed\n5,x,1\n", None).is_err());
        assert!(read_coverage_csv("duration,n_svc,addressed,percentage\n5,1,1,10\n", Some(40)).is_err());
        let bad = [
            CoveragePoint { duration: 4.0, n_svc: 1, addressed: 0 },
            CoveragePoint { duration: 5.0, n_svc: 2, addressed: 0 },
        ];
        assert!(optimal_svc_count(&UNIT, &bad, 40).is_err());
        assert!(optimal_svc_count(&UNIT, &[], 40).is_err());
    }
}
