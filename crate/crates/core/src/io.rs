//! Spike-train CSV files with header `trial,process,time`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::train::{Sample, SpikeTrain, TrialPair};

/// Parsed sample plus validation warnings (currently duplicate timestamps).
#[derive(Debug, Clone)]
pub struct Parsed {
    pub sample: Sample,
    pub warnings: Vec<String>,
}

/// Reads a sample; trials are ordered by their integer id, times sorted per train.
pub fn read_sample<R: Read>(reader: R, horizon: f64) -> Result<Parsed> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["trial", "process", "time"] {
        return Err(Error::Input(format!(
            "expected header trial,process,time, got {:?}",
            headers
        )));
    }
    let mut trains: BTreeMap<u64, [Vec<f64>; 2]> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Input(format!("record {}: bad {what}", line + 1));
        let trial: u64 = rec[0].parse().map_err(|_| bad("trial"))?;
        let process: usize = rec[1].parse().map_err(|_| bad("process"))?;
        let time: f64 = rec[2].parse().map_err(|_| bad("time"))?;
        if !(1..=2).contains(&process) {
            return Err(bad("process (expected 1 or 2)"));
        }
        trains.entry(trial).or_default()[process - 1].push(time);
    }
    let mut warnings = Vec::new();
    let mut trials = Vec::with_capacity(trains.len());
    for (id, [a, b]) in trains {
        let pair = TrialPair::new(SpikeTrain::new(a, horizon)?, SpikeTrain::new(b, horizon)?)?;
        for (k, t) in [&pair.x1, &pair.x2].into_iter().enumerate() {
            if t.duplicates() > 0 {
                warnings.push(format!(
                    "trial {id} process {}: {} duplicate timestamps",
                    k + 1,
                    t.duplicates()
                ));
            }
        }
        trials.push(pair);
    }
    Ok(Parsed {
        sample: Sample::new(trials)?,
        warnings,
    })
}

/// Writes a sample; trials are numbered from 1.
pub fn write_sample<W: Write>(writer: W, sample: &Sample) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["trial", "process", "time"])?;
    for (i, p) in sample.trials().iter().enumerate() {
        for (k, t) in [&p.x1, &p.x2].into_iter().enumerate() {
            for x in t.times() {
                w.write_record([(i + 1).to_string(), (k + 1).to_string(), x.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
