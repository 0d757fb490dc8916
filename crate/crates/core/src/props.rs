//! Self-checking property suite for the fold maps: projector spectra, dense
//! oracle equivalence, the orthogonal energy split and residual-energy
//! concentration on Gaussian matrices.
//!
//! The residual implementation under test is injectable so the suite can be
//! shown to catch a broken one.

use std::fmt;

use serde::Serialize;

use crate::diagnostics::verify_projector;
use crate::error::Result;
use crate::fold::{build_dense_fold, build_dense_unfold, fold, residual, unfold, FoldSpec};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

pub type ResidualFn = fn(&Matrix, &FoldSpec) -> Result<Matrix>;

/// Widths of the projector grid, including partial last blocks.
pub const PROJECTOR_WIDTHS: [usize; 4] = [5, 8, 12, 64];
pub const PROJECTOR_LEVELS: [u32; 4] = [0, 1, 2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    /// Reduced sample counts, for quick checks.
    Small,
    Full,
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "small" => Ok(Grid::Small),
            "full" => Ok(Grid::Full),
            _ => Err(format!("unknown grid {s:?}, expected small or full")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropCheck {
    pub name: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PropsReport {
    pub checks: Vec<PropCheck>,
}

impl PropsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: String, passed: bool, observed: String, expected: String) {
        self.checks.push(PropCheck {
            name,
            passed,
            observed,
            expected,
        });
    }
}

impl fmt::Display for PropsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: observed {}, expected {}", c.name, c.observed, c.expected)?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

#[derive(Clone, Debug)]
pub struct PropsSuite {
    grid: Grid,
    seed: u64,
    residual_fn: ResidualFn,
}

struct Sizes {
    oracle_draws: usize,
    split_draws: usize,
    energy_dim: usize,
    energy_samples: usize,
    energy_tolerance: f64,
}

impl PropsSuite {
    pub fn new(grid: Grid) -> Self {
        PropsSuite {
            grid,
            seed: 0x0f0a_5eed,
            residual_fn: residual,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Replaces the residual implementation under test.
    pub fn with_residual_fn(mut self, f: ResidualFn) -> Self {
        self.residual_fn = f;
        self
    }

    fn sizes(&self) -> Sizes {
        match self.grid {
            Grid::Small => Sizes {
                oracle_draws: 40,
                split_draws: 500,
                energy_dim: 64,
                energy_samples: 20,
                energy_tolerance: 0.02,
            },
            Grid::Full => Sizes {
                oracle_draws: 200,
                split_draws: 10_000,
                energy_dim: 256,
                energy_samples: 100,
                energy_tolerance: 0.02,
            },
        }
    }

    pub fn run(&self) -> PropsReport {
        let sizes = self.sizes();
        let mut rng = SplitMix64::new(self.seed);
        let mut report = PropsReport::default();
        self.projector_grid(&mut report);
        self.oracle_equivalence(&mut report, &mut rng, sizes.oracle_draws);
        self.energy_split(&mut report, &mut rng, sizes.split_draws);
        self.energy_concentration(&mut report, &mut rng, &sizes);
        report
    }

    fn projector_grid(&self, report: &mut PropsReport) {
        for &n in &PROJECTOR_WIDTHS {
            for &l in &PROJECTOR_LEVELS {
                let name = format!("projector l={l} n={n}");
                match FoldSpec::new(l, n).and_then(|s| verify_projector(&s, 1e-9)) {
                    Ok(r) => {
                        let failed: Vec<String> = r
                            .failures()
                            .map(|c| format!("{}={:.3e}", c.name, c.observed))
                            .collect();
                        report.push(
                            name,
                            r.passed(),
                            if failed.is_empty() {
                                format!("{} unit eigenvalues", r.unit_eigenvalues)
                            } else {
                                failed.join(", ")
                            },
                            "orthogonal projector".into(),
                        );
                    }
                    Err(e) => report.push(name, false, e.to_string(), "orthogonal projector".into()),
                }
            }
        }
    }

    fn oracle_equivalence(&self, report: &mut PropsReport, rng: &mut SplitMix64, draws: usize) {
        let mut worst = 0.0f64;
        let mut error = None;
        for _ in 0..draws {
            let (g, spec) = random_case(rng, 64);
            let outcome = (|| -> Result<f64> {
                let folded = fold(&g, &spec)?;
                let dense_folded = g.matmul(&build_dense_fold(&spec))?;
                let back = unfold(&folded, &spec)?;
                let dense_back = folded.matmul(&build_dense_unfold(&spec))?;
                Ok(folded.max_abs_diff(&dense_folded)?.max(back.max_abs_diff(&dense_back)?))
            })();
            match outcome {
                Ok(d) => worst = worst.max(d),
                Err(e) => error = Some(e.to_string()),
            }
        }
        let passed = error.is_none() && worst <= 1e-12;
        report.push(
            format!("dense oracle equivalence ({draws} draws)"),
            passed,
            error.unwrap_or_else(|| format!("max abs diff {worst:.3e}")),
            "≤ 1e-12".into(),
        );
    }

    /// `G = PG + R`, `‖G‖² = ‖PG‖² + ‖R‖²` and `‖R‖ ≤ ‖G‖`, with `PG`
    /// computed independently of the residual under test.
    fn energy_split(&self, report: &mut PropsReport, rng: &mut SplitMix64, draws: usize) {
        let mut worst_recon = 0.0f64;
        let mut worst_energy = 0.0f64;
        let mut worst_ortho = 0.0f64;
        let mut bound_violations = 0usize;
        let mut error = None;
        for _ in 0..draws {
            let (g, spec) = random_case(rng, 32);
            let outcome = (|| -> Result<(f64, f64, f64, bool)> {
                let pg = unfold(&fold(&g, &spec)?, &spec)?;
                let r = (self.residual_fn)(&g, &spec)?;
                let g2 = g.squared_norm();
                let recon = pg.add(&r)?.max_abs_diff(&g)? / g.max_abs().max(f64::MIN_POSITIVE);
                let energy = (g2 - pg.squared_norm() - r.squared_norm()).abs() / g2.max(f64::MIN_POSITIVE);
                let ortho = pg.dot(&r)?.abs() / g2.max(f64::MIN_POSITIVE);
                Ok((recon, energy, ortho, r.squared_norm() <= g2 * (1.0 + 1e-12)))
            })();
            match outcome {
                Ok((recon, energy, ortho, bounded)) => {
                    worst_recon = worst_recon.max(recon);
                    worst_energy = worst_energy.max(energy);
                    worst_ortho = worst_ortho.max(ortho);
                    bound_violations += usize::from(!bounded);
                }
                Err(e) => error = Some(e.to_string()),
            }
        }
        let err_or = |s: String| error.clone().unwrap_or(s);
        report.push(
            format!("pythagorean split G = PG + R ({draws} draws)"),
            error.is_none() && worst_recon <= 1e-12 && worst_energy <= 1e-9,
            err_or(format!(
                "max reconstruction diff {worst_recon:.3e}, max energy diff {worst_energy:.3e}"
            )),
            "≤ 1e-12 and ≤ 1e-9".into(),
        );
        report.push(
            format!("orthogonality <PG, R> = 0 ({draws} draws)"),
            error.is_none() && worst_ortho <= 1e-9,
            err_or(format!("max relative |<PG, R>| {worst_ortho:.3e}")),
            "≤ 1e-9".into(),
        );
        report.push(
            format!("residual bound ||R|| <= ||G|| ({draws} draws)"),
            error.is_none() && bound_violations == 0,
            err_or(format!("{bound_violations} violations")),
            "0 violations".into(),
        );
    }

    fn energy_concentration(&self, report: &mut PropsReport, rng: &mut SplitMix64, sizes: &Sizes) {
        let d = sizes.energy_dim;
        for level in 1..=3u32 {
            let expected = 1.0 - 0.5f64.powi(level as i32);
            let name = format!("energy ratio l={level} ({d}x{d}, {} samples)", sizes.energy_samples);
            let outcome = (|| -> Result<f64> {
                let spec = FoldSpec::new(level, d)?;
                let mut total = 0.0;
                for _ in 0..sizes.energy_samples {
                    let g = Matrix::new(d, d, (0..d * d).map(|_| rng.next_normal()).collect())?;
                    let r = (self.residual_fn)(&g, &spec)?;
                    total += r.squared_norm() / g.squared_norm();
                }
                Ok(total / sizes.energy_samples as f64)
            })();
            match outcome {
                Ok(mean) => report.push(
                    name,
                    (mean - expected).abs() <= sizes.energy_tolerance,
                    format!("{mean:.4}"),
                    format!("{expected:.4} ± {}", sizes.energy_tolerance),
                ),
                Err(e) => report.push(name, false, e.to_string(), format!("{expected:.4}")),
            }
        }
    }
}

/// Random Gaussian matrix up to `max_dim` on each side with a random level
/// in `0..=3`.
fn random_case(rng: &mut SplitMix64, max_dim: usize) -> (Matrix, FoldSpec) {
    let rows = 1 + rng.next_index(max_dim);
    let cols = 1 + rng.next_index(max_dim);
    let level = rng.next_index(4) as u32;
    let g = Matrix::from_parts(rows, cols, (0..rows * cols).map(|_| rng.next_normal()).collect());
    (g, FoldSpec::new(level, cols).expect("level within range"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped_residual(g: &Matrix, spec: &FoldSpec) -> Result<Matrix> {
        Ok(residual(g, spec)?.scale(-1.0))
    }

    #[test]
    fn small_grid_passes() {
        let r = PropsSuite::new(Grid::Small).run();
        assert!(r.passed(), "{r}");
        assert_eq!(r.checks.len(), 16 + 1 + 3 + 3);
    }

    #[test]
    fn sign_flip_is_caught() {
        let r = PropsSuite::new(Grid::Small).with_residual_fn(flipped_residual).run();
        assert!(!r.passed());
        let failed: Vec<_> = r.failures().map(|c| c.name.as_str()).collect();
        assert!(failed.iter().any(|n| n.starts_with("pythagorean")), "{failed:?}");
    }

    #[test]
    fn grid_parses() {
        assert_eq!("full".parse::<Grid>().unwrap(), Grid::Full);
        assert!("huge".parse::<Grid>().is_err());
    }
}
