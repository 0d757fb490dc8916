use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};

/// `eta0 / sqrt(t)`, the decay used in the convergence analysis.
pub fn lr_inv_sqrt(t: u64, eta0: f64) -> Result<f64> {
    if t == 0 {
        return Err(FoamError::Domain("inverse-sqrt schedule starts at t = 1".into()));
    }
    Ok(eta0 / (t as f64).sqrt())
}

/// Linear warmup over `ceil(warmup_frac * total)` steps, then cosine decay
/// reaching zero at `t == total`.
///
/// The warmup length is capped at `total - 1` so the cosine phase is never
/// empty.
pub fn lr_warmup_cosine(t: u64, total: u64, lr_max: f64, warmup_frac: f64) -> Result<f64> {
    if total == 0 {
        return Err(FoamError::Domain("schedule length must be positive".into()));
    }
    if t > total {
        return Err(FoamError::Domain(format!("step {t} is past the schedule end {total}")));
    }
    if !(warmup_frac > 0.0 && warmup_frac < 1.0) {
        return Err(FoamError::Domain(format!(
            "warmup fraction must lie in (0, 1), got {warmup_frac}"
        )));
    }
    let warmup = ((warmup_frac * total as f64).ceil() as u64).min(total.saturating_sub(1));
    if t == total || t == 0 {
        return Ok(0.0);
    }
    if t <= warmup {
        return Ok(lr_max * t as f64 / warmup as f64);
    }
    let progress = (t - warmup) as f64 / (total - warmup) as f64;
    Ok(lr_max * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

/// Step-size schedule of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// The optimizer's base `lr` every step.
    Constant,
    InvSqrt { eta0: f64 },
    WarmupCosine { lr_max: f64, warmup_frac: f64 },
}

impl Schedule {
    /// Step size for step `t` (1-based) of a run of `total` steps.
    pub fn lr_at(&self, t: u64, total: u64, base_lr: f64) -> Result<f64> {
        match *self {
            Schedule::Constant => Ok(base_lr),
            Schedule::InvSqrt { eta0 } => lr_inv_sqrt(t, eta0),
            Schedule::WarmupCosine { lr_max, warmup_frac } => {
                lr_warmup_cosine(t, total, lr_max, warmup_frac)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FoamError::config(field, format!("must be positive, got {v}")))
            }
        };
        match *self {
            Schedule::Constant => Ok(()),
            Schedule::InvSqrt { eta0 } => positive("schedule.eta0", eta0),
            Schedule::WarmupCosine { lr_max, warmup_frac } => {
                positive("schedule.lr_max", lr_max)?;
                if !(warmup_frac > 0.0 && warmup_frac < 1.0) {
                    return Err(FoamError::config(
                        "schedule.warmup_frac",
                        format!("must lie in (0, 1), got {warmup_frac}"),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_sqrt_examples() {
        assert_eq!(lr_inv_sqrt(1, 0.01).unwrap(), 0.01);
        assert_eq!(lr_inv_sqrt(4, 0.01).unwrap(), 0.005);
        assert_eq!(lr_inv_sqrt(100, 1.0).unwrap(), 0.1);
        assert!(lr_inv_sqrt(0, 1.0).is_err());
    }

    #[test]
    fn warmup_cosine_examples() {
        // total 1000, warmup 100 steps, cosine phase 900 steps.
        assert_eq!(lr_warmup_cosine(100, 1000, 0.5, 0.1).unwrap(), 0.5);
        assert_eq!(lr_warmup_cosine(1000, 1000, 0.5, 0.1).unwrap(), 0.0);
        assert!((lr_warmup_cosine(550, 1000, 0.5, 0.1).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(lr_warmup_cosine(0, 1000, 0.5, 0.1).unwrap(), 0.0);
        assert!((lr_warmup_cosine(50, 1000, 0.5, 0.1).unwrap() - 0.25).abs() < 1e-15);
        assert!(lr_warmup_cosine(1001, 1000, 0.5, 0.1).is_err());
        assert!(lr_warmup_cosine(1, 1000, 0.5, 1.0).is_err());
    }

    #[test]
    fn warmup_cosine_is_monotone_after_warmup() {
        let mut prev = f64::INFINITY;
        for t in 100..=1000 {
            let lr = lr_warmup_cosine(t, 1000, 1.0, 0.1).unwrap();
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn tiny_schedules_stay_finite() {
        for total in 1..5 {
            for t in 0..=total {
                let lr = lr_warmup_cosine(t, total, 1.0, 0.9).unwrap();
                assert!(lr.is_finite() && (0.0..=1.0).contains(&lr));
            }
        }
    }

    #[test]
    fn schedule_json() {
        let s: Schedule = serde_json::from_str(r#"{"kind":"inv_sqrt","eta0":0.1}"#).unwrap();
        assert_eq!(s.lr_at(4, 10, 0.0).unwrap(), 0.05);
        assert!(serde_json::from_str::<Schedule>(r#"{"kind":"inv_sqrt","eta0":0.1,"x":1}"#).is_err());
        assert!(Schedule::WarmupCosine { lr_max: 0.1, warmup_frac: 0.0 }.validate().is_err());
    }
}
