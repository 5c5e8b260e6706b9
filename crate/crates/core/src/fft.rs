//! Thin wrapper around `rustfft` with per-thread plan caches.
//!
//! All transforms here are unnormalized complex FFTs; callers apply the
//! 1/n factor on the analysis side so synthesis is a plain evaluation of the
//! trigonometric polynomial at the grid points. Plans are memoized per
//! thread so the stepping hot loop never takes a lock.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

type PlanMap = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static LOCAL_PLANS: RefCell<PlanMap> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    LOCAL_PLANS.with(|cell| {
        cell.borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut p = planner().lock().expect("fft planner poisoned");
                if inverse {
                    p.plan_fft_inverse(n)
                } else {
                    p.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// In-place forward FFT (no normalization).
pub fn forward(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// In-place inverse FFT (no normalization).
pub fn inverse(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// Smallest power of two >= n; keeps padded transforms on the radix-2 path.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}
