//! Bit-level accounting of live big-number storage.
//!
//! A [`Ledger`] tracks the current and peak total bit size of the values that
//! are charged to it. Charges are RAII guards: the bits are released when the
//! guard drops, so the ledger follows the lifetime of the matrices it
//! describes. Ledgers are per request; a disabled ledger records nothing.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

#[derive(Debug, Default)]
struct Counters {
    current: AtomicU64,
    peak: AtomicU64,
}

#[derive(Clone, Debug, Default)]
pub struct Ledger {
    inner: Option<Arc<Counters>>,
}

/// Snapshot of a ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LedgerStats {
    pub current: u64,
    pub peak: u64,
}

impl Ledger {
    pub fn enabled() -> Self {
        Self { inner: Some(Arc::default()) }
    }

    pub fn disabled() -> Self {
        Self { inner: None }
    }

    pub fn is_enabled(&self) -> bool {
        self.inner.is_some()
    }

    /// Record `bits` as live until the returned guard drops.
    pub fn charge(&self, bits: u64) -> Charge {
        if let Some(c) = &self.inner {
            let now = c.current.fetch_add(bits, Ordering::SeqCst) + bits;
            c.peak.fetch_max(now, Ordering::SeqCst);
        }
        Charge { ledger: self.clone(), bits }
    }

    pub fn probe(&self) -> LedgerStats {
        match &self.inner {
            None => LedgerStats::default(),
            Some(c) => LedgerStats {
                current: c.current.load(Ordering::SeqCst),
                peak: c.peak.load(Ordering::SeqCst),
            },
        }
    }

    pub fn peak(&self) -> u64 {
        self.probe().peak
    }

    /// Forget the high-water mark, keeping live charges.
    pub fn reset_peak(&self) {
        if let Some(c) = &self.inner {
            c.peak.store(c.current.load(Ordering::SeqCst), Ordering::SeqCst);
        }
    }
}

#[derive(Debug)]
pub struct Charge {
    ledger: Ledger,
    bits: u64,
}

impl Charge {
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Replace the charged amount, e.g. after a value is overwritten in place.
    pub fn update(&mut self, bits: u64) {
        if let Some(c) = &self.ledger.inner {
            if bits >= self.bits {
                let now = c.current.fetch_add(bits - self.bits, Ordering::SeqCst) + bits - self.bits;
                c.peak.fetch_max(now, Ordering::SeqCst);
            } else {
                c.current.fetch_sub(self.bits - bits, Ordering::SeqCst);
            }
        }
        self.bits = bits;
    }
}

impl Drop for Charge {
    fn drop(&mut self) {
        if let Some(c) = &self.ledger.inner {
            c.current.fetch_sub(self.bits, Ordering::SeqCst);
        }
    }
}
