//! Activation-pattern fingerprints for gradient checking.
//!
//! Piecewise-linear layers (ReLU, max pooling) feed their branch decisions
//! into a thread-local hash while recording is on. Two forward passes with
//! equal fingerprints lie on the same linear piece, so a finite difference
//! between them is free of kink error.

use std::cell::RefCell;
use std::hash::{DefaultHasher, Hasher};

thread_local! {
    static PATTERN: RefCell<Option<DefaultHasher>> = const { RefCell::new(None) };
}

pub(crate) fn recording() -> bool {
    PATTERN.with(|p| p.borrow().is_some())
}

pub(crate) fn record_signs<T: PartialOrd + Default + Copy>(values: &[T]) {
    PATTERN.with(|p| {
        if let Some(h) = p.borrow_mut().as_mut() {
            let zero = T::default();
            for chunk in values.chunks(64) {
                let mut word = 0u64;
                for (i, &v) in chunk.iter().enumerate() {
                    word |= u64::from(v > zero) << i;
                }
                h.write_u64(word);
            }
        }
    });
}

pub(crate) fn record_indices(indices: &[usize]) {
    PATTERN.with(|p| {
        if let Some(h) = p.borrow_mut().as_mut() {
            for &i in indices {
                h.write_usize(i);
            }
        }
    });
}

/// Run `f` while recording and return its result with the fingerprint.
pub fn fingerprint<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let prev = PATTERN.with(|p| p.borrow_mut().replace(DefaultHasher::new()));
    let out = f();
    let hash = PATTERN.with(|p| {
        let mut slot = p.borrow_mut();
        let h = slot.take().map_or(0, |h| h.finish());
        *slot = prev;
        h
    });
    (out, hash)
}
