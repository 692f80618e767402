//! Answer-count statistics over a generated dataset.

use std::fs;
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::dataset::parse_dataset;
use super::PipelineError;

pub const BUCKET_LABELS: [&str; 5] = ["2", "3", "4-5", "6-9", ">=10"];

/// Instance counts bucketed by number of answers: 2, 3, 4-5, 6-9, 10+.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnswerCountHistogram {
    pub counts: [usize; 5],
}

impl AnswerCountHistogram {
    pub fn bucket_of(answers: usize) -> Option<usize> {
        match answers {
            0 | 1 => None,
            2 => Some(0),
            3 => Some(1),
            4..=5 => Some(2),
            6..=9 => Some(3),
            _ => Some(4),
        }
    }

    pub fn add(&mut self, answers: usize) {
        match Self::bucket_of(answers) {
            Some(b) => self.counts[b] += 1,
            None => log::warn!("instance with {answers} answer(s) left out of the histogram"),
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Bucket shares in percent, rounded to one decimal. All zero when empty.
    pub fn percentages(&self) -> [f64; 5] {
        let total = self.total();
        self.counts.map(|c| {
            if total == 0 {
                0.0
            } else {
                (c as f64 * 1000.0 / total as f64).round() / 10.0
            }
        })
    }
}

impl Serialize for AnswerCountHistogram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(BUCKET_LABELS.len()))?;
        for (label, count) in BUCKET_LABELS.iter().zip(self.counts) {
            map.serialize_entry(label, &count)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub instances: usize,
    pub histogram: AnswerCountHistogram,
}

#[derive(Serialize)]
struct BucketEntry {
    count: usize,
    percent: f64,
}

impl Serialize for StatsReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        struct Buckets<'a>(&'a AnswerCountHistogram);
        impl Serialize for Buckets<'_> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(BUCKET_LABELS.len()))?;
                for ((label, count), percent) in BUCKET_LABELS
                    .iter()
                    .zip(self.0.counts)
                    .zip(self.0.percentages())
                {
                    map.serialize_entry(label, &BucketEntry { count, percent })?;
                }
                map.end()
            }
        }
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("instances", &self.instances)?;
        map.serialize_entry("answer_count_histogram", &Buckets(&self.histogram))?;
        map.end()
    }
}

pub fn stats_from_str(contents: &str) -> StatsReport {
    let mut histogram = AnswerCountHistogram::default();
    let instances = parse_dataset(contents);
    for inst in &instances {
        histogram.add(inst.answers.len());
    }
    if instances.is_empty() {
        log::warn!("dataset has no instances; histogram is all zero");
    }
    StatsReport {
        instances: instances.len(),
        histogram,
    }
}

pub fn compute_stats(dataset_path: impl AsRef<Path>) -> Result<StatsReport, PipelineError> {
    let path = dataset_path.as_ref();
    let contents = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(stats_from_str(&contents))
}
