//! Process-wide accounting of numeric buffers created by this crate.
//!
//! Every [`Vector`](super::Vector) and [`Matrix`](super::Matrix) registers its
//! byte size on creation and deregisters it on drop. The peak counter gives a
//! portable, allocator-independent view of working-set growth, which is what
//! the memory-scaling checks assert on.

use std::sync::atomic::{AtomicUsize, Ordering};

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

/// A snapshot of the ledger counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerSnapshot {
    pub current_bytes: usize,
    pub peak_bytes: usize,
}

pub(crate) fn register(bytes: usize) {
    if bytes == 0 {
        return;
    }
    let now = CURRENT.fetch_add(bytes, Ordering::Relaxed) + bytes;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

pub(crate) fn deregister(bytes: usize) {
    if bytes == 0 {
        return;
    }
    CURRENT.fetch_sub(bytes, Ordering::Relaxed);
}

pub fn current_bytes() -> usize {
    CURRENT.load(Ordering::Relaxed)
}

pub fn peak_bytes() -> usize {
    PEAK.load(Ordering::Relaxed)
}

pub fn snapshot() -> LedgerSnapshot {
    let current_bytes = current_bytes();
    LedgerSnapshot {
        current_bytes,
        peak_bytes: peak_bytes().max(current_bytes),
    }
}

/// Resets the high-water mark to the current live byte count and returns it.
pub fn reset_peak() -> usize {
    let now = CURRENT.load(Ordering::Relaxed);
    PEAK.store(now, Ordering::Relaxed);
    now
}

/// Runs `f` and reports the bytes allocated above the live baseline at its peak.
///
/// The ledger is global; concurrent work on other threads is counted too.
pub fn measure_peak<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let base = reset_peak();
    let out = f();
    let peak = peak_bytes();
    (out, peak.saturating_sub(base))
}
