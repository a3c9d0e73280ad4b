//! From computed states back to connection conditions: boundary data,
//! least-squares connection-matrix fits and zero-range convergence studies.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::connmat::ConnectionMatrix;
use crate::exact::{self, BoxSystem, ExactError, Interaction, Spectrum};
use crate::mat2::Mat2;
use crate::potential::{PotentialError, RenormalizedFamily};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("fit window [{lo}, {hi}] lies outside the sampled range")]
    WindowOutOfRange { lo: f64, hi: f64 },
    #[error("ill-conditioned boundary fit (condition number {0:e})")]
    IllConditionedFit(f64),
    #[error("wave number must be positive")]
    InvalidWaveNumber,
    #[error("need at least {need} items, got {got}")]
    TooFewInputs { need: usize, got: usize },
    #[error("boundary data inputs are (nearly) parallel; add more states")]
    DegenerateInputs,
    #[error("separations must be positive and strictly decreasing")]
    InvalidSeparations,
    #[error("reference does not provide eigenvalue #{0}")]
    MissingReference(usize),
    #[error("solver returned no eigenvalue #{index} at a = {a}")]
    MissingEigenvalue { index: usize, a: f64 },
    #[error("probe and reference kinds do not match")]
    ReferenceMismatch,
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// `(ψ₋, ψ'₋, ψ₊, ψ'₊)` on the two sides of a defect.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BoundaryData {
    pub psi_minus: f64,
    pub dpsi_minus: f64,
    pub psi_plus: f64,
    pub dpsi_plus: f64,
}

impl BoundaryData {
    /// `max(|ψ±|, |ψ'±|/k)`.
    pub fn scale(&self, k: f64) -> f64 {
        [
            self.psi_minus.abs(),
            self.psi_plus.abs(),
            self.dpsi_minus.abs() / k,
            self.dpsi_plus.abs() / k,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn incoming(&self) -> [f64; 2] {
        [self.dpsi_minus, self.psi_minus]
    }

    pub fn outgoing(&self) -> [f64; 2] {
        [self.dpsi_plus, self.psi_plus]
    }

    /// `|ψ₊ - ψ₋ - 2cψ'₋|`, zero for an exact `ε(x; c)` condition.
    pub fn epsilon_jump_residual(&self, c: f64) -> f64 {
        (self.psi_plus - self.psi_minus - 2.0 * c * self.dpsi_minus).abs()
    }
}

/// Placement of the two fit windows around a defect at `x0`.
///
/// The outer solution is fitted on `[x0 + exclusion, x0 + exclusion + fit_width]`
/// and its mirror, then evaluated at `x0 ± edge`. `edge` is zero for an ideal
/// point interaction and the outermost spike offset for a train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindows {
    pub x0: f64,
    pub edge: f64,
    pub exclusion: f64,
    pub fit_width: f64,
}

impl FitWindows {
    /// Exclusion `edge + s` and width `0.1·L`.
    pub fn defaults(x0: f64, edge: f64, s: f64, length: f64) -> Self {
        FitWindows {
            x0,
            edge,
            exclusion: edge + s,
            fit_width: 0.1 * length,
        }
    }
}

/// Fits `A cos k(x - xe) + B sin k(x - xe)` on each side and returns the
/// boundary data at `xe = x0 ± edge`.
pub fn extract_boundary_data(x: &[f64], psi: &[f64], k: f64, windows: &FitWindows) -> Result<BoundaryData, AnalysisError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(AnalysisError::InvalidWaveNumber);
    }
    let w = windows;
    let right = (w.x0 + w.exclusion, w.x0 + w.exclusion + w.fit_width);
    let left = (w.x0 - w.exclusion - w.fit_width, w.x0 - w.exclusion);
    let (psi_minus, dpsi_minus) = fit_side(x, psi, k, left, w.x0 - w.edge)?;
    let (psi_plus, dpsi_plus) = fit_side(x, psi, k, right, w.x0 + w.edge)?;
    Ok(BoundaryData {
        psi_minus,
        dpsi_minus,
        psi_plus,
        dpsi_plus,
    })
}

fn fit_side(x: &[f64], psi: &[f64], k: f64, (lo, hi): (f64, f64), at: f64) -> Result<(f64, f64), AnalysisError> {
    let (x_min, x_max) = match (x.first(), x.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(AnalysisError::WindowOutOfRange { lo, hi }),
    };
    if lo < x_min || hi > x_max {
        return Err(AnalysisError::WindowOutOfRange { lo, hi });
    }
    let (mut scc, mut scs, mut sss, mut sc, mut ss) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for (&xi, &yi) in x.iter().zip(psi) {
        if xi < lo || xi > hi {
            continue;
        }
        let (s, c) = (k * (xi - at)).sin_cos();
        scc += c * c;
        scs += c * s;
        sss += s * s;
        sc += c * yi;
        ss += s * yi;
        used += 1;
    }
    if used < 3 {
        return Err(AnalysisError::TooFewInputs { need: 3, got: used });
    }
    let det = scc * sss - scs * scs;
    let trace = scc + sss;
    let disc = ((scc - sss).powi(2) + 4.0 * scs * scs).sqrt();
    let (l_max, l_min) = (0.5 * (trace + disc), 0.5 * (trace - disc));
    let cond = if l_min > 0.0 { l_max / l_min } else { f64::INFINITY };
    let short_window = (hi - lo) < 2.0 * PI / k / 8.0;
    if (short_window && cond > 1e8) || det == 0.0 {
        return Err(AnalysisError::IllConditionedFit(cond));
    }
    let a = (sc * sss - ss * scs) / det;
    let b = (ss * scc - sc * scs) / det;
    Ok((a, k * b))
}

/// Least-squares 2×2 connection matrix; `det` is reported, not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub fitted: [[f64; 2]; 2],
    /// RMS of the connection-equation residuals over RMS of the outputs.
    pub residual: f64,
    pub det_deviation: f64,
}

impl FitReport {
    pub fn matrix(&self) -> Mat2 {
        Mat2(self.fitted)
    }

    /// `(α, β, γ, δ)` read off the fitted entries.
    pub fn parameters(&self) -> [f64; 4] {
        let [[t11, t12], [t21, t22]] = self.fitted;
        [-t11, -t12, -t22, -t21]
    }
}

/// Solves `(ψ'₊, ψ₊)ᵢ = T (ψ'₋, ψ₋)ᵢ` for `T` over all states.
///
/// Each state is weighted by the inverse norm of its incoming vector so that
/// every state counts equally.
pub fn fit_connection_matrix(data: &[BoundaryData]) -> Result<FitReport, AnalysisError> {
    if data.len() < 2 {
        return Err(AnalysisError::TooFewInputs {
            need: 2,
            got: data.len(),
        });
    }
    // normal equations G t = r for each output row
    let mut g = [[0.0; 2]; 2];
    let mut r = [[0.0; 2]; 2];
    for d in data {
        let inc = d.incoming();
        let out = d.outgoing();
        let w = 1.0 / (inc[0] * inc[0] + inc[1] * inc[1]);
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += w * inc[i] * inc[j];
            }
            for row in 0..2 {
                r[row][i] += w * out[row] * inc[i];
            }
        }
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let trace = g[0][0] + g[1][1];
    // smallest eigenvalue relative to trace = sin² of the spread of directions
    if !(det.is_finite()) || det <= (1e-6f64).powi(2) * trace * trace {
        return Err(AnalysisError::DegenerateInputs);
    }
    let inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
    let mut t = [[0.0; 2]; 2];
    for row in 0..2 {
        for j in 0..2 {
            t[row][j] = inv[j][0] * r[row][0] + inv[j][1] * r[row][1];
        }
    }
    let m = Mat2(t);
    let (mut res2, mut out2) = (0.0, 0.0);
    for d in data {
        let pred = m.apply(d.incoming());
        let out = d.outgoing();
        let w = 1.0 / (d.incoming()[0].powi(2) + d.incoming()[1].powi(2));
        res2 += w * ((pred[0] - out[0]).powi(2) + (pred[1] - out[1]).powi(2));
        out2 += w * (out[0] * out[0] + out[1] * out[1]);
    }
    Ok(FitReport {
        fitted: t,
        residual: if out2 > 0.0 { (res2 / out2).sqrt() } else { res2.sqrt() },
        det_deviation: (m.det() - 1.0).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    /// Train transfer-matrix entries at a fixed energy.
    TransferEntries { energy: f64 },
    /// The `index`-th (1-based) Dirichlet box eigenvalue.
    Eigenvalue {
        index: usize,
        length: f64,
        window: (f64, f64),
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Matrix(ConnectionMatrix),
    Spectrum(Spectrum),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    TransferEntry,
    Eigenvalue(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub a: f64,
    pub observable: f64,
    pub reference: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub kind: ObservableKind,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].abs_error < w[0].abs_error)
    }
}

/// The reference a probe should be compared with: the target matrix for
/// transfer probes, the ideal point-interaction spectrum for eigenvalue probes.
pub fn default_reference(family: &RenormalizedFamily, probe: &Probe) -> Result<Reference, AnalysisError> {
    let target = family.target()?;
    match *probe {
        Probe::TransferEntries { .. } => Ok(Reference::Matrix(target)),
        Probe::Eigenvalue {
            index,
            length,
            window,
            tol,
        } => {
            let sys = BoxSystem::dirichlet(
                length,
                Interaction::Point {
                    matrix: target,
                    position: 0.0,
                },
            )?;
            Ok(Reference::Spectrum(exact::eigenvalues(&sys, window, index, tol)?))
        }
    }
}

pub fn convergence_study(
    family: &RenormalizedFamily,
    separations: &[f64],
    reference: &Reference,
    probe: &Probe,
) -> Result<ConvergenceTable, AnalysisError> {
    if separations.is_empty()
        || separations.iter().any(|&a| !(a > 0.0))
        || separations.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(AnalysisError::InvalidSeparations);
    }
    let mut rows = Vec::with_capacity(separations.len());
    let kind = match (probe, reference) {
        (Probe::TransferEntries { energy }, Reference::Matrix(target)) => {
            let want = target.matrix();
            for &a in separations {
                let got = exact::train_transfer(&family.at(a)?, *energy)?.matrix;
                let (mut worst, mut at) = (-1.0, (0, 0));
                for i in 0..2 {
                    for j in 0..2 {
                        let e = (got.0[i][j] - want.0[i][j]).abs();
                        if e > worst {
                            worst = e;
                            at = (i, j);
                        }
                    }
                }
                rows.push(ConvergenceRow {
                    a,
                    observable: got.0[at.0][at.1],
                    reference: want.0[at.0][at.1],
                    abs_error: worst,
                    rel_error: worst / want.max_abs(),
                });
            }
            ObservableKind::TransferEntry
        }
        (
            Probe::Eigenvalue {
                index,
                length,
                window,
                tol,
            },
            Reference::Spectrum(spec),
        ) => {
            let want = *spec
                .eigenvalues
                .get(index - 1)
                .ok_or(AnalysisError::MissingReference(*index))?;
            for &a in separations {
                let sys = BoxSystem::dirichlet(*length, Interaction::Train(family.at(a)?))?;
                let got = exact::eigenvalues(&sys, *window, *index, *tol)?;
                let value = *got
                    .eigenvalues
                    .get(index - 1)
                    .ok_or(AnalysisError::MissingEigenvalue { index: *index, a })?;
                let abs_error = (value - want).abs();
                rows.push(ConvergenceRow {
                    a,
                    observable: value,
                    reference: want,
                    abs_error,
                    rel_error: abs_error / want.abs(),
                });
            }
            ObservableKind::Eigenvalue(*index)
        }
        _ => return Err(AnalysisError::ReferenceMismatch),
    };
    Ok(ConvergenceTable { kind, rows })
}

/// `(pair, (E₂ᵢ - E₂ᵢ₋₁)/E₂ᵢ₋₁)` for the consecutive pairs (1,2), (3,4), …
pub fn degeneracy_gaps(eigenvalues: &[f64]) -> Vec<(usize, f64)> {
    eigenvalues
        .chunks_exact(2)
        .enumerate()
        .map(|(i, p)| (i + 1, (p[1] - p[0]) / p[0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::UniformGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const L: f64 = 10.0;

    fn epsilon_box(c: f64) -> BoxSystem {
        BoxSystem::dirichlet(
            L,
            Interaction::Point {
                matrix: ConnectionMatrix::from_epsilon_strength(c).unwrap(),
                position: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn extraction_reproduces_analytic_data() {
        let sys = epsilon_box(5.0);
        let spec = exact::eigenvalues(&sys, (0.0, 1.0), 4, 1e-14).unwrap();
        let grid = UniformGrid::box_interior(L, 4001).unwrap();
        for &e in &spec.eigenvalues {
            let ef = exact::eigenfunction(&sys, e, &grid, 1e-13).unwrap();
            let k = (2.0 * e).sqrt();
            let w = FitWindows::defaults(0.0, 0.0, 0.05, L);
            let got = extract_boundary_data(&ef.x, &ef.psi, k, &w).unwrap();
            let want = ef.boundary;
            let scale = want.scale(k);
            for (g, w) in [
                (got.psi_minus, want.psi_minus),
                (got.dpsi_minus, want.dpsi_minus),
                (got.psi_plus, want.psi_plus),
                (got.dpsi_plus, want.dpsi_plus),
            ] {
                assert!((g - w).abs() < 1e-8 * scale, "{g} vs {w}");
            }
            assert!(got.epsilon_jump_residual(5.0) < 1e-8 * scale);
            assert!((got.dpsi_plus - got.dpsi_minus).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn extraction_on_free_state_is_continuous() {
        let sys = BoxSystem::dirichlet(L, Interaction::None).unwrap();
        let e = PI * PI / 200.0 * 4.0;
        let grid = UniformGrid::box_interior(L, 2001).unwrap();
        let ef = exact::eigenfunction(&sys, e, &grid, 1e-12).unwrap();
        let k = (2.0 * e).sqrt();
        let d = extract_boundary_data(&ef.x, &ef.psi, k, &FitWindows::defaults(0.0, 0.0, 0.1, L)).unwrap();
        let scale = d.scale(k);
        assert!((d.psi_plus - d.psi_minus).abs() < 1e-9 * scale);
        assert!((d.dpsi_plus - d.dpsi_minus).abs() < 1e-9 * scale);
    }

    #[test]
    fn extraction_errors() {
        let x: Vec<f64> = (0..100).map(|i| -1.0 + i as f64 * 0.02).collect();
        let psi = vec![1.0; 100];
        let far = FitWindows {
            x0: 0.0,
            edge: 0.0,
            exclusion: 0.5,
            fit_width: 2.0,
        };
        assert!(matches!(
            extract_boundary_data(&x, &psi, 1.0, &far),
            Err(AnalysisError::WindowOutOfRange { .. })
        ));
        let tiny = FitWindows {
            x0: 0.0,
            edge: 0.0,
            exclusion: 0.1,
            fit_width: 0.2,
        };
        assert!(matches!(
            extract_boundary_data(&x, &psi, 1e-5, &tiny),
            Err(AnalysisError::IllConditionedFit(_))
        ));
        assert!(matches!(
            extract_boundary_data(&x, &psi, 0.0, &tiny),
            Err(AnalysisError::InvalidWaveNumber)
        ));
    }

    #[test]
    fn fit_recovers_known_matrix() {
        let t = ConnectionMatrix::make_connection(-2.0, 1.0, -1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<BoundaryData> = (0..5)
            .map(|_| {
                let (dp, p) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let (dq, q) = t.apply(dp, p);
                BoundaryData {
                    psi_minus: p,
                    dpsi_minus: dp,
                    psi_plus: q,
                    dpsi_plus: dq,
                }
            })
            .collect();
        let fit = fit_connection_matrix(&data).unwrap();
        assert!(fit.matrix().max_abs_diff(&t.matrix()) < 1e-10);
        assert!(fit.residual < 1e-12);
        assert!(fit.det_deviation < 1e-10);
    }

    #[test]
    fn fit_from_exact_epsilon_states() {
        let sys = epsilon_box(5.0);
        let spec = exact::eigenvalues(&sys, (0.0, 1.0), 2, 1e-14).unwrap();
        let grid = UniformGrid::box_interior(L, 11).unwrap();
        let data: Vec<_> = spec
            .eigenvalues
            .iter()
            .map(|&e| exact::eigenfunction(&sys, e, &grid, 1e-13).unwrap().boundary)
            .collect();
        let fit = fit_connection_matrix(&data).unwrap();
        assert!(fit.matrix().max_abs_diff(&Mat2::new(1.0, 0.0, 10.0, 1.0)) < 1e-6);
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn fit_from_free_states() {
        let sys = BoxSystem::dirichlet(L, Interaction::None).unwrap();
        let grid = UniformGrid::box_interior(L, 11).unwrap();
        let data: Vec<_> = [1u32, 2]
            .iter()
            .map(|&n| {
                let k = n as f64 * PI / L;
                exact::eigenfunction(&sys, k * k / 2.0, &grid, 1e-12).unwrap().boundary
            })
            .collect();
        let fit = fit_connection_matrix(&data).unwrap();
        assert!(fit.matrix().max_abs_diff(&Mat2::IDENTITY) < 1e-10);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn fit_rejects_parallel_inputs() {
        let d = BoundaryData {
            psi_minus: 1.0,
            dpsi_minus: 0.5,
            psi_plus: 1.0,
            dpsi_plus: 0.5,
        };
        let e = BoundaryData {
            psi_minus: 2.0,
            dpsi_minus: 1.0,
            psi_plus: 2.0,
            dpsi_plus: 1.0,
        };
        assert_eq!(fit_connection_matrix(&[d, e]), Err(AnalysisError::DegenerateInputs));
        assert!(matches!(
            fit_connection_matrix(&[d]),
            Err(AnalysisError::TooFewInputs { .. })
        ));
    }

    #[test]
    fn convergence_tables_decrease() {
        let probe = Probe::TransferEntries { energy: 0.045 };
        for fam in [
            RenormalizedFamily::Epsilon { c: 5.0 },
            RenormalizedFamily::Constant { v0: 1.0, u0: 1.0 },
            RenormalizedFamily::Chi3 {
                alpha: -2.0,
                beta: 1.0,
                gamma: -1.0,
                delta: 1.0,
            },
        ] {
            let reference = default_reference(&fam, &probe).unwrap();
            let table = convergence_study(&fam, &[1e-2, 1e-3, 1e-4], &reference, &probe).unwrap();
            assert!(table.is_monotone(), "{fam:?}: {table:?}");
        }
    }

    #[test]
    fn eigenvalue_convergence_for_epsilon() {
        let fam = RenormalizedFamily::Epsilon { c: 5.0 };
        let probe = Probe::Eigenvalue {
            index: 2,
            length: L,
            window: (0.0, 1.0),
            tol: 1e-13,
        };
        let reference = default_reference(&fam, &probe).unwrap();
        let table = convergence_study(&fam, &[0.1, 0.03, 0.01], &reference, &probe).unwrap();
        assert!(table.is_monotone());
        assert!((table.rows[0].reference - 0.082_317_2).abs() < 1e-7);
        assert!(table.rows[2].rel_error < 0.01);
    }

    #[test]
    fn convergence_input_errors() {
        let fam = RenormalizedFamily::Epsilon { c: 5.0 };
        let probe = Probe::TransferEntries { energy: 0.045 };
        let reference = default_reference(&fam, &probe).unwrap();
        assert_eq!(
            convergence_study(&fam, &[1e-3, 1e-2], &reference, &probe),
            Err(AnalysisError::InvalidSeparations)
        );
        let wrong = Probe::Eigenvalue {
            index: 1,
            length: L,
            window: (0.0, 1.0),
            tol: 1e-12,
        };
        assert_eq!(
            convergence_study(&fam, &[1e-2], &reference, &wrong),
            Err(AnalysisError::ReferenceMismatch)
        );
    }

    #[test]
    fn gap_examples() {
        let free: Vec<f64> = (1..=4).map(|n| (n * n) as f64 * PI * PI / 200.0).collect();
        let gaps = degeneracy_gaps(&free);
        assert_eq!(gaps.len(), 2);
        assert!((gaps[0].1 - 3.0).abs() < 1e-12);

        let gaps = degeneracy_gaps(&[0.049_348_022, 0.082_317_19]);
        assert!((gaps[0].1 - 0.668).abs() < 1e-3);
    }
}
