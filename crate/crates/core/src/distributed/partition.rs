use std::ops::Range;

use crate::{Error, Nanos, Result};

/// Contiguous index ranges assigned to workers, tiling `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentAssignment {
    n: usize,
    ranges: Vec<Range<usize>>,
}

/// Splits `n` elements over `p` workers: every worker gets `⌊n/p⌋` elements
/// and the first `n mod p` workers one more.
pub fn partition(n: usize, p: usize) -> Result<SegmentAssignment> {
    if p == 0 || n == 0 {
        return Err(Error::TooFewElements { n, workers: p });
    }
    if n < p {
        return Err(Error::TooFewElements { n, workers: p });
    }
    Ok(SegmentAssignment {
        n,
        ranges: split(0..n, p),
    })
}

fn split(range: Range<usize>, p: usize) -> Vec<Range<usize>> {
    let len = range.len();
    let (k, extra) = (len / p, len % p);
    let mut start = range.start;
    (0..p)
        .map(|w| {
            let size = k + usize::from(w < extra);
            let r = start..start + size;
            start += size;
            r
        })
        .collect()
}

impl SegmentAssignment {
    /// `ranks` segments by the remainder rule, each split again over `lanes`.
    /// Worker `rank * lanes + lane` owns the resulting leaf segment.
    pub fn hierarchical(n: usize, ranks: usize, lanes: usize) -> Result<Self> {
        let outer = partition(n, ranks)?;
        if lanes == 0 || n < ranks * lanes {
            return Err(Error::TooFewElements {
                n,
                workers: ranks * lanes,
            });
        }
        let ranges = outer.ranges.into_iter().flat_map(|r| split(r, lanes)).collect();
        Ok(Self { n, ranges })
    }

    /// Checks that `ranges` tile `[0, n)` with non-empty segments.
    pub fn from_ranges(n: usize, ranges: Vec<Range<usize>>) -> Result<Self> {
        let mut next = 0;
        for r in &ranges {
            if r.start != next || r.is_empty() {
                return Err(Error::InvalidPlan(format!(
                    "segment {r:?} does not continue the tiling at {next}"
                )));
            }
            next = r.end;
        }
        if next != n {
            return Err(Error::InvalidPlan(format!(
                "segments cover [0, {next}) instead of [0, {n})"
            )));
        }
        Ok(Self { n, ranges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn workers(&self) -> usize {
        self.ranges.len()
    }

    pub fn range(&self, worker: usize) -> Range<usize> {
        self.ranges[worker].clone()
    }

    /// Inclusive `(l, r)` boundaries of `worker`'s segment.
    pub fn bounds(&self, worker: usize) -> (usize, usize) {
        let r = &self.ranges[worker];
        (r.start, r.end - 1)
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.ranges.iter().map(Range::len).collect()
    }

    pub fn is_even(&self) -> bool {
        self.ranges.windows(2).all(|w| w[0].len() == w[1].len())
    }

    /// Summed cost of each segment.
    pub fn segment_sums(&self, costs: &[Nanos]) -> Vec<Nanos> {
        self.ranges.iter().map(|r| costs[r.clone()].iter().sum()).collect()
    }
}

/// Relative excess of the slowest segment over the mean segment:
/// `(max_s T_s − μ) / μ` with `T_s` the summed costs of segment `s`.
/// Returns 0 when every cost is zero.
///
/// # Panics
///
/// If `costs` does not have one entry per assigned element.
pub fn imbalance(costs: &[Nanos], assignment: &SegmentAssignment) -> f64 {
    assert_eq!(costs.len(), assignment.n(), "one cost per element");
    let sums = assignment.segment_sums(costs);
    let mean = sums.iter().map(|&s| s as f64).sum::<f64>() / sums.len() as f64;
    let max = sums.iter().copied().max().unwrap_or(0) as f64;
    if mean == 0.0 {
        0.0
    } else {
        (max - mean) / mean
    }
}
