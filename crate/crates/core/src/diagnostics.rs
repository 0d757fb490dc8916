//! Per-step measurements: residual energy ratio, trace records and spectral
//! verification of the fold projector.

use serde::{Deserialize, Serialize};

use crate::error::{FoamError, Result};
use crate::fold::{projector, residual, FoldSpec};
use crate::linalg::{spectral_radius, symmetric_eigenvalues};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

/// Version tag written into every trace line.
pub const TRACE_SCHEMA: u32 = 1;

/// Largest input width `verify_projector` will build densely.
pub const MAX_DENSE_COLS: usize = 64;

/// `(‖R‖/‖G‖, ‖R‖²/‖G‖²)` for the fold residual of `g`.
///
/// ```
/// use foam::{diagnostics::residual_ratios, fold::FoldSpec, matrix::Matrix};
///
/// let g = Matrix::from_rows(&[&[1.0, 3.0, 5.0, 7.0]]).unwrap();
/// let (norm, energy) = residual_ratios(&g, &FoldSpec::new(1, 4).unwrap()).unwrap();
/// assert!((norm - 2.0 / 84f64.sqrt()).abs() < 1e-15);
/// assert!((energy - 4.0 / 84.0).abs() < 1e-15);
/// ```
pub fn residual_ratios(g: &Matrix, spec: &FoldSpec) -> Result<(f64, f64)> {
    let g_energy = g.squared_norm();
    if g_energy == 0.0 {
        return Err(FoamError::Domain("residual ratio of a zero gradient".into()));
    }
    let r = residual(g, spec)?;
    let energy = (r.squared_norm() / g_energy).min(1.0);
    Ok((energy.sqrt(), energy))
}

/// Mean energy ratio over `samples` iid standard normal `rows × cols` draws.
pub fn mean_energy_ratio(rows: usize, cols: usize, level: u32, samples: usize, rng: &mut SplitMix64) -> Result<f64> {
    if samples == 0 {
        return Err(FoamError::Domain("need at least one sample".into()));
    }
    let spec = FoldSpec::new(level, cols)?;
    let mut total = 0.0;
    for _ in 0..samples {
        let g = Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.next_normal()).collect())?;
        total += residual_ratios(&g, &spec)?.1;
    }
    Ok(total / samples as f64)
}

/// One line of a run trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub schema: u32,
    pub step: u64,
    pub loss: f64,
    pub grad_norm: f64,
    /// Absent when every matrix gradient was zero.
    pub delta_norm_ratio: Option<f64>,
    pub delta_energy_ratio: Option<f64>,
    /// Present only when shadow Adam is enabled and FOAM parameters exist.
    pub cos_to_adam: Option<f64>,
    pub lr_t: f64,
}

impl StepRecord {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Checks the record's ranges.
    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.delta_norm_ratio {
            if !(0.0..=1.0 + 1e-12).contains(&n) {
                return Err(FoamError::Domain(format!("delta_norm_ratio {n} outside [0, 1]")));
            }
        }
        if let (Some(n), Some(e)) = (self.delta_norm_ratio, self.delta_energy_ratio) {
            if (n * n - e).abs() > 1e-12 {
                return Err(FoamError::Domain("delta_energy_ratio is not the squared norm ratio".into()));
            }
        }
        if let Some(c) = self.cos_to_adam {
            if !(-1.0..=1.0).contains(&c) {
                return Err(FoamError::Domain(format!("cos_to_adam {c} outside [-1, 1]")));
            }
        }
        Ok(())
    }
}

/// One itemized check of a [`ProjectorReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorCheck {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    /// Allowed `|observed - expected|`.
    pub tolerance: f64,
    pub passed: bool,
}

impl ProjectorCheck {
    fn new(name: &str, observed: f64, expected: f64, tolerance: f64) -> Self {
        ProjectorCheck {
            name: name.into(),
            observed,
            expected,
            tolerance,
            passed: (observed - expected).abs() <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorReport {
    pub level: u32,
    pub input_cols: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub unit_eigenvalues: usize,
    pub checks: Vec<ProjectorCheck>,
}

impl ProjectorReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ProjectorCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ProjectorCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Builds the dense projector `P = A E` for `spec` and checks it is an
/// orthogonal projector of rank `folded_cols`.
///
/// Symmetry is checked exactly. `I - P` is only checked for compressing
/// specs since it is the zero matrix otherwise.
///
/// ```
/// use foam::{diagnostics::verify_projector, fold::FoldSpec};
///
/// let report = verify_projector(&FoldSpec::new(1, 8).unwrap(), 1e-9).unwrap();
/// assert!(report.passed());
/// assert_eq!(report.unit_eigenvalues, 4);
/// ```
pub fn verify_projector(spec: &FoldSpec, tolerance: f64) -> Result<ProjectorReport> {
    let n = spec.input_cols();
    if n > MAX_DENSE_COLS {
        return Err(FoamError::Domain(format!(
            "dense projector check is limited to {MAX_DENSE_COLS} columns, got {n}"
        )));
    }
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(FoamError::Domain("tolerance must be finite and non-negative".into()));
    }
    let p = projector(spec);
    let mut checks = Vec::new();

    let asymmetry = p.max_abs_diff(&p.transpose())?;
    checks.push(ProjectorCheck::new("symmetric", asymmetry, 0.0, 0.0));

    let idempotency = p.matmul(&p)?.max_abs_diff(&p)?;
    checks.push(ProjectorCheck::new("idempotent", idempotency, 0.0, tolerance));

    let eigenvalues = symmetric_eigenvalues(&p)?;
    let off_spectrum = eigenvalues
        .iter()
        .map(|&l| l.abs().min((l - 1.0).abs()))
        .fold(0.0, f64::max);
    checks.push(ProjectorCheck::new("eigenvalues_in_0_1", off_spectrum, 0.0, tolerance));

    let unit_eigenvalues = eigenvalues.iter().filter(|&&l| (l - 1.0).abs() <= tolerance).count();
    checks.push(ProjectorCheck::new(
        "unit_eigenvalue_count",
        unit_eigenvalues as f64,
        spec.folded_cols() as f64,
        0.0,
    ));

    let iterations = 200;
    checks.push(ProjectorCheck::new(
        "spectral_radius_p",
        spectral_radius(&p, iterations)?,
        1.0,
        tolerance,
    ));
    if spec.is_compressing() {
        let complement = Matrix::identity(n).sub(&p)?;
        checks.push(ProjectorCheck::new(
            "spectral_radius_complement",
            spectral_radius(&complement, iterations)?,
            1.0,
            tolerance,
        ));
    }

    Ok(ProjectorReport {
        level: spec.level(),
        input_cols: n,
        eigenvalues,
        unit_eigenvalues,
        checks,
    })
}
