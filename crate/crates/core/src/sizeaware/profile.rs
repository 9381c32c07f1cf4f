use std::path::Path;

use serde::{Deserialize, Serialize};

use super::meter::ResourceMeter;
use crate::{BoxError, Error, Result};

/// Peak cost observed for one sample. Failed samples carry no cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub sample_id: usize,
    pub features: Vec<f64>,
    pub peak_cost: Option<f64>,
}

impl ProfileRecord {
    pub fn ok(sample_id: usize, features: Vec<f64>, peak_cost: f64) -> Self {
        Self { sample_id, features, peak_cost: Some(peak_cost) }
    }

    pub fn failed(sample_id: usize, features: Vec<f64>) -> Self {
        Self { sample_id, features, peak_cost: None }
    }

    pub fn is_failed(&self) -> bool {
        self.peak_cost.is_none()
    }
}

/// Runs `workload` on every sample with the meter reset beforehand and
/// records the peak it reports. Workload or feature failures mark the record
/// failed and profiling moves on; a meter that cannot reset or report is a
/// configuration error and aborts.
pub fn collect_peak_alloc<S, M, W, F>(
    samples: impl IntoIterator<Item = S>,
    meter: &mut M,
    mut workload: W,
    mut feature_fn: F,
) -> Result<Vec<ProfileRecord>>
where
    M: ResourceMeter + ?Sized,
    W: FnMut(&S, &mut M) -> Result<(), BoxError>,
    F: FnMut(&S) -> Result<Vec<f64>, BoxError>,
{
    let mut records = Vec::new();
    for (id, sample) in samples.into_iter().enumerate() {
        meter.reset()?;
        let features = match feature_fn(&sample) {
            Ok(f) if f.iter().all(|x| x.is_finite() && *x >= 0.0) => f,
            Ok(f) => {
                records.push(ProfileRecord::failed(id, f));
                continue;
            }
            Err(_) => {
                records.push(ProfileRecord::failed(id, Vec::new()));
                continue;
            }
        };
        match workload(&sample, meter) {
            Ok(()) => {
                let peak = meter.peak()?;
                if peak.is_finite() && peak >= 0.0 {
                    records.push(ProfileRecord::ok(id, features, peak));
                } else {
                    records.push(ProfileRecord::failed(id, features));
                }
            }
            Err(_) => records.push(ProfileRecord::failed(id, features)),
        }
    }
    Ok(records)
}

/// Writes `sample_id,failed,peak_cost,f0,f1,...`; failed rows leave
/// `peak_cost` empty.
pub fn write_profile_csv(path: &Path, records: &[ProfileRecord]) -> Result<()> {
    let dim = records.iter().map(|r| r.features.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["sample_id".to_owned(), "failed".to_owned(), "peak_cost".to_owned()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in records {
        let mut row = vec![
            r.sample_id.to_string(),
            u8::from(r.is_failed()).to_string(),
            r.peak_cost.map(|c| c.to_string()).unwrap_or_default(),
        ];
        row.extend((0..dim).map(|i| r.features.get(i).map(|f| f.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_profile_csv(path: &Path) -> Result<Vec<ProfileRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = i + 2;
        let bad = |msg: &str| Error::Parse { line, msg: msg.to_owned() };
        let sample_id = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad sample_id"))?;
        let failed = match row.get(1) {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(bad("failed must be 0 or 1")),
        };
        let features = row
            .iter()
            .skip(3)
            .take_while(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| bad("bad feature")))
            .collect::<Result<Vec<_>>>()?;
        let peak_cost = if failed {
            None
        } else {
            Some(row.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad peak_cost"))?)
        };
        out.push(ProfileRecord { sample_id, features, peak_cost });
    }
    Ok(out)
}
