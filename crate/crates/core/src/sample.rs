//! Deterministic quasi-random sampling of jet-space boxes.
//!
//! All sampled checks in the crate draw their points from Halton sequences,
//! so a given box, point count, and seed always produce the same points.

use crate::bundle::JetPoint1;

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

/// Radical-inverse of `index` in the given base; the Halton coordinate.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

fn map_to(range: (f64, f64), u: f64) -> f64 {
    range.0 + (range.1 - range.0) * u
}

/// Offset into the Halton stream for a user seed; seed 0 starts at index 1.
fn start_index(seed: u64) -> u64 {
    1 + seed.wrapping_mul(65_537)
}

/// An axis-aligned region of first-jet space over which sampled checks run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub q: Vec<(f64, f64)>,
    pub v: Vec<(f64, f64)>,
}

impl SampleBox {
    /// The default region: t in [0, 2], every q and v in [-2, 2].
    pub fn standard(m: usize) -> Self {
        SampleBox {
            t: (0.0, 2.0),
            q: vec![(-2.0, 2.0); m],
            v: vec![(-2.0, 2.0); m],
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `count` quasi-random jet points. The Halton dimensions are ordered
    /// t, q1..qm, v1..vm.
    pub fn jet_points(&self, count: usize, seed: u64) -> Vec<JetPoint1> {
        let m = self.dim();
        assert!(
            1 + 2 * m < PRIMES.len() + 1,
            "sample box dimension {m} exceeds the supported Halton bases"
        );
        let start = start_index(seed);
        (0..count as u64)
            .map(|k| {
                let idx = start + k;
                let t = map_to(self.t, radical_inverse(idx, PRIMES[0]));
                let q = (0..m)
                    .map(|i| map_to(self.q[i], radical_inverse(idx, PRIMES[1 + i])))
                    .collect();
                let v = (0..m)
                    .map(|i| map_to(self.v[i], radical_inverse(idx, PRIMES[1 + m + i])))
                    .collect();
                JetPoint1::new(t, q, v)
            })
            .collect()
    }

    /// `count` quasi-random configuration points (t, q), ignoring the
    /// velocity ranges.
    pub fn config_points(&self, count: usize, seed: u64) -> Vec<(f64, Vec<f64>)> {
        let m = self.dim();
        assert!(m < PRIMES.len());
        let start = start_index(seed);
        (0..count as u64)
            .map(|k| {
                let idx = start + k;
                let t = map_to(self.t, radical_inverse(idx, PRIMES[0]));
                let q = (0..m)
                    .map(|i| map_to(self.q[i], radical_inverse(idx, PRIMES[1 + i])))
                    .collect();
                (t, q)
            })
            .collect()
    }
}

/// Fixed probe velocities in [-2, 2]^m used by the quadratic-fit check.
pub fn probe_velocities(m: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|k| {
            (0..m)
                .map(|i| map_to((-2.0, 2.0), radical_inverse(1 + k, PRIMES[i])))
                .collect()
        })
        .collect()
}
