//! Central finite-difference verification of analytic gradients.
//!
//! The harness owns the loop: it runs the closure once with gradients on,
//! snapshots what the backward pass accumulated, then re-runs the closure
//! forward-only with each parameter entry nudged by ±epsilon. The closure must
//! be a pure function of the store's parameter values.

use crate::error::Result;
use crate::numerics::param::{ParamId, ParamStore};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckSettings {
    /// Half-width of the central difference.
    pub epsilon: f64,
    /// Largest acceptable relative error.
    pub tolerance: f64,
    /// Denominator guard: entries where |analytic| + |numeric| falls below
    /// this are compared against the floor instead, so finite-difference
    /// roundoff on near-zero gradients cannot fail the check on its own.
    pub denom_floor: f64,
    /// Check every `entry_stride`-th entry of each parameter (1 = all).
    pub entry_stride: usize,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings { epsilon: 1e-6, tolerance: 1e-5, denom_floor: 1e-3, entry_stride: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct WorstEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub worst: Option<WorstEntry>,
    pub passed: bool,
}

/// |a - n| / max(|a| + |n|, floor).
#[inline]
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor)
}

/// Checks every parameter in the store. The closure computes the scalar loss;
/// when its second argument is true it must also accumulate gradients.
pub fn grad_check<F>(
    store: &mut ParamStore,
    f: F,
    settings: &GradCheckSettings,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore, bool) -> Result<f64>,
{
    let ids = store.ids();
    grad_check_ids(store, &ids, f, settings)
}

/// Checks only the listed parameters (all of them still participate in the
/// forward pass; only these have their gradients verified).
pub fn grad_check_ids<F>(
    store: &mut ParamStore,
    ids: &[ParamId],
    mut f: F,
    settings: &GradCheckSettings,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore, bool) -> Result<f64>,
{
    assert!(settings.entry_stride >= 1, "entry_stride must be >= 1");
    store.zero_grads();
    f(store, true)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| store.grad(id).clone()).collect();

    let eps = settings.epsilon;
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0f64;
    let mut worst: Option<WorstEntry> = None;
    for (slot, &id) in ids.iter().enumerate() {
        let n = store.value(id).numel();
        let mut k = 0;
        while k < n {
            let orig = store.entry(id, k);
            store.set_entry(id, k, orig + eps);
            let loss_plus = f(store, false)?;
            store.set_entry(id, k, orig - eps);
            let loss_minus = f(store, false)?;
            store.set_entry(id, k, orig);
            let numeric = (loss_plus - loss_minus) / (2.0 * eps);
            let a = analytic[slot].data()[k];
            let rel = rel_err(a, numeric, settings.denom_floor);
            checked += 1;
            sum_rel += rel;
            if rel > max_rel {
                max_rel = rel;
                worst = Some(WorstEntry {
                    param: store.param(id).name.clone(),
                    index: k,
                    analytic: a,
                    numeric,
                });
            }
            k += settings.entry_stride;
        }
    }
    Ok(GradCheckReport {
        checked,
        max_rel_err: max_rel,
        mean_rel_err: if checked > 0 { sum_rel / checked as f64 } else { 0.0 },
        worst,
        passed: max_rel <= settings.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correct_quadratic_gradient_passes() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::new(&[3], vec![0.5, -1.0, 2.0]).unwrap());
        let report = grad_check(
            &mut store,
            |s, with_grad| {
                let loss: f64 = s.value(w).data().iter().map(|v| v * v).sum();
                if with_grad {
                    let g = s.value(w).scale(2.0);
                    s.accumulate(w, &g)?;
                }
                Ok(loss)
            },
            &GradCheckSettings::default(),
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.checked, 3);
        assert!(report.max_rel_err < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_flagged_with_location() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::new(&[2], vec![1.0, 1.0]).unwrap());
        let report = grad_check(
            &mut store,
            |s, with_grad| {
                let loss: f64 = s.value(w).data().iter().map(|v| v * v).sum();
                if with_grad {
                    // off by 5% on every entry
                    let g = s.value(w).scale(2.1);
                    s.accumulate(w, &g)?;
                }
                Ok(loss)
            },
            &GradCheckSettings::default(),
        )
        .unwrap();
        assert!(!report.passed);
        let worst = report.worst.unwrap();
        assert_eq!(worst.param, "w");
    }

    #[test]
    fn near_zero_gradients_guarded_by_floor() {
        let mut store = ParamStore::new();
        // loss ignores w entirely; analytic grad 0 must pass despite FD noise
        let w = store.add("w", Tensor::new(&[2], vec![3.0, -4.0]).unwrap());
        let _ = w;
        let report = grad_check(
            &mut store,
            |_, _| Ok(1.234),
            &GradCheckSettings::default(),
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn entry_stride_subsamples() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::zeros(&[10]));
        let settings = GradCheckSettings { entry_stride: 3, ..Default::default() };
        let report = grad_check(
            &mut store,
            |s, with_grad| {
                let loss: f64 = s.value(w).data().iter().sum();
                if with_grad {
                    s.accumulate(w, &Tensor::full(&[10], 1.0))?;
                }
                Ok(loss)
            },
            &settings,
        )
        .unwrap();
        assert_eq!(report.checked, 4); // entries 0, 3, 6, 9
        assert!(report.passed);
    }
}
