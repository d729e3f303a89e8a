use std::sync::atomic::{AtomicU64, Ordering};

/// Which neighbour is claiming from a gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// The lane to the left of the gap; it extends rightwards and takes the
    /// lowest unclaimed index.
    FromLeftLane,
    /// The lane to the right of the gap; it extends leftwards and takes the
    /// highest unclaimed index.
    FromRightLane,
}

/// Unprocessed indices `[lo, hi)` between two adjacent lanes.
///
/// Both cursors live in one atomic word, so every claim is a single
/// compare-and-swap and each index is handed out at most once.
#[derive(Debug)]
pub struct Gap(AtomicU64);

fn pack(lo: u32, hi: u32) -> u64 {
    (u64::from(lo) << 32) | u64::from(hi)
}

fn unpack(word: u64) -> (u32, u32) {
    ((word >> 32) as u32, word as u32)
}

impl Gap {
    /// # Panics
    ///
    /// If `hi` does not fit in 32 bits.
    pub fn new(lo: usize, hi: usize) -> Self {
        let hi = u32::try_from(hi).expect("gap indices fit in 32 bits");
        let lo = u32::try_from(lo).map_or(hi, |lo| lo.min(hi));
        Self(AtomicU64::new(pack(lo, hi)))
    }

    /// Unclaimed indices remaining.
    pub fn remaining(&self) -> usize {
        let (lo, hi) = unpack(self.0.load(Ordering::Acquire));
        (hi - lo) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    /// Reserves the unclaimed index adjacent to `side`'s lane, or `None`
    /// once the gap is closed.
    pub fn claim(&self, side: Side) -> Option<usize> {
        let mut word = self.0.load(Ordering::Acquire);
        loop {
            let (lo, hi) = unpack(word);
            if lo >= hi {
                return None;
            }
            let (next, index) = match side {
                Side::FromLeftLane => (pack(lo + 1, hi), lo),
                Side::FromRightLane => (pack(lo, hi - 1), hi - 1),
            };
            match self
                .0
                .compare_exchange_weak(word, next, Ordering::AcqRel, Ordering::Acquire)
            {
                Ok(_) => return Some(index as usize),
                Err(current) => word = current,
            }
        }
    }
}
