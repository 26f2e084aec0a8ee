use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Instance, Schedule};
use crate::error::{Error, Result};
use crate::linalg::sigmoid;
use crate::seed::rng_for;

/// One labelled comparison, canonically oriented with `first < second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub state: usize,
    pub first: usize,
    pub second: usize,
    #[serde(with = "bit")]
    pub winner_is_first: bool,
}

mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("winner_is_first must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreferenceDataset {
    records: Vec<Comparison>,
}

impl PreferenceDataset {
    pub fn new(records: Vec<Comparison>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| r.first >= r.second) {
            return Err(Error::InvalidArgument(format!(
                "record ({}, {}, {}) must satisfy first < second",
                r.state, r.first, r.second
            )));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[Comparison] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Copy with every label inverted.
    pub fn flipped(&self) -> Self {
        Self {
            records: self
                .records
                .iter()
                .map(|r| Comparison {
                    winner_is_first: !r.winner_is_first,
                    ..*r
                })
                .collect(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let records = rdr.deserialize().collect::<std::result::Result<Vec<Comparison>, _>>()?;
        Self::new(records)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// `ceil(x)`, treating values within rounding noise of an integer as that integer.
pub(crate) fn ceil_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Draws `ceil(N[k][i][j] * n)` labelled comparisons for every observed slot,
/// each won by the first action with probability `sigmoid(r_i - r_j)`.
pub fn sample_dataset(v: &Instance, n: usize, seed: u64) -> Result<PreferenceDataset> {
    if n < 1 {
        return Err(Error::InvalidArgument("dataset size n must be at least 1".into()));
    }
    let rewards = v.rewards();
    let mut rng = rng_for(seed, "labels", &[]);
    let mut records = Vec::new();
    for p in v.schedule().observed() {
        let count = ceil_count(p.proportion * n as f64);
        let prob_first = sigmoid(rewards[p.state][p.first] - rewards[p.state][p.second]);
        for _ in 0..count {
            records.push(Comparison {
                state: p.state,
                first: p.first,
                second: p.second,
                winner_is_first: rng.random::<f64>() < prob_first,
            });
        }
    }
    Ok(PreferenceDataset { records })
}

/// Sample proportions `count(k, i, j) / n` of a dataset.
pub fn empirical_proportions(
    data: &PreferenceDataset,
    num_states: usize,
    num_actions: usize,
) -> Result<Schedule> {
    let mut counts = vec![0usize; num_states * num_actions * num_actions];
    for r in data.records() {
        if r.state >= num_states || r.second >= num_actions {
            return Err(Error::OutOfRange(format!(
                "record ({}, {}, {}) outside {num_states}x{num_actions}",
                r.state, r.first, r.second
            )));
        }
        counts[(r.state * num_actions + r.first) * num_actions + r.second] += 1;
    }
    let mut schedule = Schedule::zeros(num_states, num_actions);
    if data.is_empty() {
        return Ok(schedule);
    }
    let n = data.len() as f64;
    for k in 0..num_states {
        for i in 0..num_actions {
            for j in i + 1..num_actions {
                let c = counts[(k * num_actions + i) * num_actions + j];
                if c > 0 {
                    schedule.set(k, i, j, c as f64 / n)?;
                }
            }
        }
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::t1;
    use super::*;

    fn rec(state: usize, first: usize, second: usize, w: bool) -> Comparison {
        Comparison {
            state,
            first,
            second,
            winner_is_first: w,
        }
    }

    #[test]
    fn proportions_by_counting() {
        let data = PreferenceDataset::new(vec![
            rec(0, 0, 1, true),
            rec(0, 0, 1, false),
            rec(0, 0, 1, true),
            rec(0, 0, 2, true),
        ])
        .unwrap();
        let s = empirical_proportions(&data, 1, 3).unwrap();
        assert_eq!(s.get(0, 0, 1), 0.75);
        assert_eq!(s.get(0, 0, 2), 0.25);
        assert_eq!(s.get(0, 1, 2), 0.0);
        assert!(empirical_proportions(&data, 1, 2).is_err());
    }

    #[test]
    fn t1_sample_counts() {
        let data = sample_dataset(&t1(), 10, 3).unwrap();
        assert_eq!(data.len(), 10);
        assert!(data.records().iter().all(|r| (r.state, r.first, r.second) == (0, 0, 1)));
        let s = empirical_proportions(&data, 1, 2).unwrap();
        assert_eq!(s.get(0, 0, 1), 1.0);
        assert!(sample_dataset(&t1(), 0, 3).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_dataset(&t1(), 50, 9).unwrap(), sample_dataset(&t1(), 50, 9).unwrap());
        assert_ne!(sample_dataset(&t1(), 50, 9).unwrap(), sample_dataset(&t1(), 50, 10).unwrap());
    }

    #[test]
    fn ceil_count_absorbs_rounding() {
        assert_eq!(ceil_count((1.0 / 90.0) * 90.0), 1);
        assert_eq!(ceil_count(1.0 / 90.0 * 100.0), 2);
        assert_eq!(ceil_count(0.2 * 10.0), 2);
        assert_eq!(ceil_count(2.5), 3);
    }

    #[test]
    fn csv_layout() {
        let data = PreferenceDataset::new(vec![rec(0, 0, 1, true), rec(1, 2, 3, false)]).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "state,first,second,winner_is_first\n0,0,1,1\n1,2,3,0\n");
        assert_eq!(PreferenceDataset::read_csv(buf.as_slice()).unwrap(), data);
        assert!(PreferenceDataset::read_csv("state,first,second,winner_is_first\n0,1,0,1\n".as_bytes()).is_err());
    }
}
