//! Monte Carlo plumbing: per-path streams, ordered parallel maps and the
//! estimate record.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{RngStream, StreamRange};
use crate::stats::mean_stderr;

/// Path `i` runs on stream `streams.start + i`; results come back in index
/// order, so every reduction over them is independent of scheduling.
pub fn map_paths<T, F>(streams: &StreamRange, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut RngStream) -> T + Sync + Send,
{
    (0..streams.len)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(i);
            f(i, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
    pub stream_start: u64,
    pub stream_len: u64,
    /// Fraction of paths that reached the horizon before the event.
    pub truncated_fraction: f64,
    /// Raised when more than 1% of paths were truncated.
    pub flagged: bool,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64], streams: &StreamRange, truncated: usize) -> Self {
        let (mean, stderr) = mean_stderr(xs);
        let frac = if xs.is_empty() {
            0.0
        } else {
            truncated as f64 / xs.len() as f64
        };
        McEstimate {
            mean,
            stderr,
            n: xs.len(),
            seed: streams.seed,
            stream_start: streams.start,
            stream_len: streams.len,
            truncated_fraction: frac,
            flagged: frac > 0.01,
        }
    }

    /// A deterministic value with zero variance.
    pub fn exact(v: f64, streams: &StreamRange) -> Self {
        McEstimate {
            mean: v,
            stderr: 0.0,
            n: 0,
            seed: streams.seed,
            stream_start: streams.start,
            stream_len: 0,
            truncated_fraction: 0.0,
            flagged: false,
        }
    }

    /// |a − b| in units of the combined standard error.
    pub fn z_against(&self, other: f64) -> f64 {
        let d = self.mean - other;
        if self.stderr == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d.abs() / self.stderr
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results_do_not_depend_on_pool_size() {
        let s = StreamRange::new(5, 100, 1000);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| map_paths(&s, |_, r| r.uniform()))
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
        let ea = McEstimate::from_samples(&a, &s, 0);
        let eb = McEstimate::from_samples(&b, &s, 0);
        assert_eq!(ea, eb);
    }

    #[test]
    fn flag_threshold() {
        let s = StreamRange::new(0, 0, 100);
        let xs = vec![1.0; 100];
        assert!(!McEstimate::from_samples(&xs, &s, 1).flagged);
        assert!(McEstimate::from_samples(&xs, &s, 2).flagged);
    }
}
