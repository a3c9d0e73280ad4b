//! Delta trains, renormalized families and finite-width smearing.
//!
//! A [`DeltaTrain`] is the potential `Σ vᵢ δ(x - xᵢ)` entering
//! `-½ψ'' + Vψ = Eψ`, so each spike makes ψ' jump by `2vᵢψ(xᵢ)`.
//!
//! A [`RenormalizedFamily`] assigns separation-dependent strengths to a short
//! train so that its zero-range limit is a chosen point interaction.

use std::f64::consts::PI;

use thiserror::Error;

use crate::connmat::{ConnError, ConnectionMatrix, CONSTRAINT_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("separation a must be positive, got {0}")]
    NonPositiveSeparation(f64),
    #[error("bump width s must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("non-finite spike position or strength")]
    NonFinite,
    #[error("a delta train needs at least one spike")]
    EmptyTrain,
    #[error("spike positions must be strictly increasing")]
    UnorderedSpikes,
    #[error("law constraint violated: {0}")]
    LawConstraintViolation(String),
    #[error("singular denominator in B/D coefficients ({0})")]
    SingularDenominator(&'static str),
    #[error("bump supports overlap: width {width} is not below the minimum spike spacing {spacing}")]
    OverlappingSupports { width: f64, spacing: f64 },
    #[error("grid spacing {spacing} is too coarse for bump width {width} (need spacing <= width/{ratio})")]
    GridTooCoarse { spacing: f64, width: f64, ratio: f64 },
    #[error("grid does not cover the support [{lo}, {hi}]")]
    GridDoesNotCover { lo: f64, hi: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
}

impl From<ConnError> for PotentialError {
    fn from(e: ConnError) -> Self {
        PotentialError::LawConstraintViolation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSpike {
    pub position: f64,
    pub strength: f64,
}

impl DeltaSpike {
    pub fn new(position: f64, strength: f64) -> Self {
        DeltaSpike { position, strength }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTrain {
    spikes: Vec<DeltaSpike>,
}

impl DeltaTrain {
    pub fn new(spikes: Vec<DeltaSpike>) -> Result<Self, PotentialError> {
        if spikes.is_empty() {
            return Err(PotentialError::EmptyTrain);
        }
        if spikes
            .iter()
            .any(|s| !s.position.is_finite() || !s.strength.is_finite())
        {
            return Err(PotentialError::NonFinite);
        }
        if spikes.windows(2).any(|w| w[1].position <= w[0].position) {
            return Err(PotentialError::UnorderedSpikes);
        }
        Ok(DeltaTrain { spikes })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, PotentialError> {
        Self::new(pairs.iter().map(|&(x, v)| DeltaSpike::new(x, v)).collect())
    }

    pub fn spikes(&self) -> &[DeltaSpike] {
        &self.spikes
    }

    pub fn len(&self) -> usize {
        self.spikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    pub fn strengths(&self) -> Vec<f64> {
        self.spikes.iter().map(|s| s.strength).collect()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.spikes.iter().map(|s| s.position).collect()
    }

    pub fn total_strength(&self) -> f64 {
        self.spikes.iter().map(|s| s.strength).sum()
    }

    pub fn first_position(&self) -> f64 {
        self.spikes[0].position
    }

    pub fn last_position(&self) -> f64 {
        self.spikes[self.spikes.len() - 1].position
    }

    /// Midpoint of the outermost spikes.
    pub fn center(&self) -> f64 {
        0.5 * (self.first_position() + self.last_position())
    }

    /// Half the distance between the outermost spikes.
    pub fn half_extent(&self) -> f64 {
        0.5 * (self.last_position() - self.first_position())
    }

    pub fn min_spacing(&self) -> Option<f64> {
        self.spikes
            .windows(2)
            .map(|w| w[1].position - w[0].position)
            .reduce(f64::min)
    }

    pub fn shifted(&self, dx: f64) -> DeltaTrain {
        DeltaTrain {
            spikes: self
                .spikes
                .iter()
                .map(|s| DeltaSpike::new(s.position + dx, s.strength))
                .collect(),
        }
    }

    /// Mirror image under `x -> -x`.
    pub fn reflected(&self) -> DeltaTrain {
        DeltaTrain {
            spikes: self
                .spikes
                .iter()
                .rev()
                .map(|s| DeltaSpike::new(-s.position, s.strength))
                .collect(),
        }
    }

    /// Strength list reads the same both ways within `tol`.
    pub fn is_palindrome(&self, tol: f64) -> bool {
        let n = self.spikes.len();
        (0..n / 2).all(|i| (self.spikes[i].strength - self.spikes[n - 1 - i].strength).abs() <= tol)
    }
}

/// `v δ(x + a) + u δ(x) + v δ(x - a)`.
pub fn xi_train(v: f64, u: f64, a: f64) -> Result<DeltaTrain, PotentialError> {
    check_separation(a)?;
    DeltaTrain::from_pairs(&[(-a, v), (0.0, u), (a, v)])
}

fn check_separation(a: f64) -> Result<(), PotentialError> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(PotentialError::NonPositiveSeparation(a))
    }
}

/// A rule mapping the separation `a` to a train whose `a -> 0` limit is a
/// fixed point interaction (see [`RenormalizedFamily::target`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenormalizedFamily {
    /// Fixed strengths; limit `δ(x; 2v0 + u0)`.
    Constant { v0: f64, u0: f64 },
    /// `v = 1/(2c) - 1/(2a)`, `u = -1/a + c/a²`; limit `ε(x; c)`.
    Epsilon { c: f64 },
    /// Three spikes, general matrix with δ ≠ 0.
    Chi3 { alpha: f64, beta: f64, gamma: f64, delta: f64 },
    /// Five spikes, δ = 0 and β ≠ 0.
    Chi5 { alpha: f64, beta: f64, gamma: f64 },
    /// Five spikes, β = δ = 0.
    Chi5z { alpha: f64, gamma: f64 },
}

impl RenormalizedFamily {
    pub fn name(&self) -> &'static str {
        match self {
            RenormalizedFamily::Constant { .. } => "constant",
            RenormalizedFamily::Epsilon { .. } => "epsilon",
            RenormalizedFamily::Chi3 { .. } => "chi3",
            RenormalizedFamily::Chi5 { .. } => "chi5",
            RenormalizedFamily::Chi5z { .. } => "chi5z",
        }
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let violation = |msg: String| Err(PotentialError::LawConstraintViolation(msg));
        match *self {
            RenormalizedFamily::Constant { v0, u0 } => {
                if !finite(&[v0, u0]) {
                    return Err(PotentialError::NonFinite);
                }
            }
            RenormalizedFamily::Epsilon { c } => {
                if !c.is_finite() {
                    return Err(PotentialError::NonFinite);
                }
                if c == 0.0 {
                    return violation("epsilon law requires c != 0".into());
                }
            }
            RenormalizedFamily::Chi3 { alpha, beta, gamma, delta } => {
                if !finite(&[alpha, beta, gamma, delta]) {
                    return Err(PotentialError::NonFinite);
                }
                if delta == 0.0 {
                    return violation("chi3 requires delta != 0".into());
                }
                let c = alpha * gamma - beta * delta;
                if (c - 1.0).abs() > CONSTRAINT_TOL {
                    return violation(format!("chi3 requires alpha*gamma - beta*delta = 1, got {c}"));
                }
            }
            RenormalizedFamily::Chi5 { alpha, beta, gamma } => {
                if !finite(&[alpha, beta, gamma]) {
                    return Err(PotentialError::NonFinite);
                }
                if beta == 0.0 {
                    return violation("chi5 requires beta != 0".into());
                }
                if (alpha * gamma - 1.0).abs() > CONSTRAINT_TOL {
                    return violation(format!("chi5 requires alpha*gamma = 1, got {}", alpha * gamma));
                }
                if alpha == -1.0 || gamma == -1.0 {
                    return violation("chi5 requires alpha != -1 and gamma != -1".into());
                }
            }
            RenormalizedFamily::Chi5z { alpha, gamma } => {
                if !finite(&[alpha, gamma]) {
                    return Err(PotentialError::NonFinite);
                }
                if alpha == 0.0 || (alpha * gamma - 1.0).abs() > CONSTRAINT_TOL {
                    return violation(format!("chi5z requires alpha*gamma = 1, got {}", alpha * gamma));
                }
            }
        }
        Ok(())
    }

    /// The point interaction reached as `a -> 0`.
    pub fn target(&self) -> Result<ConnectionMatrix, PotentialError> {
        self.validate()?;
        let t = match *self {
            RenormalizedFamily::Constant { v0, u0 } => ConnectionMatrix::from_delta_strength(2.0 * v0 + u0)?,
            RenormalizedFamily::Epsilon { c } => ConnectionMatrix::from_epsilon_strength(c)?,
            RenormalizedFamily::Chi3 { alpha, beta, gamma, delta } => {
                ConnectionMatrix::make_connection(alpha, beta, gamma, delta)?
            }
            RenormalizedFamily::Chi5 { alpha, beta, gamma } => {
                ConnectionMatrix::make_connection(alpha, beta, gamma, 0.0)?
            }
            RenormalizedFamily::Chi5z { alpha, gamma } => {
                ConnectionMatrix::make_connection(alpha, 0.0, gamma, 0.0)?
            }
        };
        Ok(t)
    }

    /// Picks the train law realizing `t`; `None` for the identity.
    ///
    /// Pure epsilon matrices use [`RenormalizedFamily::Epsilon`]; pure delta
    /// matrices use a single central spike via
    /// [`RenormalizedFamily::Constant`] with `v0 = 0`.
    pub fn for_matrix(t: &ConnectionMatrix) -> Option<RenormalizedFamily> {
        use crate::connmat::{classify, InteractionClass};
        let [alpha, beta, gamma, delta] = t.parameters();
        let zero = |x: f64| x.abs() <= crate::connmat::CLASSIFY_TOL;
        match classify(t) {
            InteractionClass::Free => None,
            InteractionClass::DeltaOnly(v) => Some(RenormalizedFamily::Constant { v0: 0.0, u0: v }),
            InteractionClass::EpsilonOnly(c) => Some(RenormalizedFamily::Epsilon { c }),
            InteractionClass::General if !zero(delta) => Some(RenormalizedFamily::Chi3 {
                alpha,
                beta,
                gamma,
                delta,
            }),
            InteractionClass::General if !zero(beta) => Some(RenormalizedFamily::Chi5 { alpha, beta, gamma }),
            InteractionClass::General => Some(RenormalizedFamily::Chi5z { alpha, gamma }),
        }
    }

    /// The train at separation `a`.
    pub fn at(&self, a: f64) -> Result<DeltaTrain, PotentialError> {
        family_at(self, a)
    }
}

/// Builds the train of `family` at separation `a`.
pub fn family_at(family: &RenormalizedFamily, a: f64) -> Result<DeltaTrain, PotentialError> {
    check_separation(a)?;
    family.validate()?;
    let a2 = a * a;
    match *family {
        RenormalizedFamily::Constant { v0, u0 } => xi_train(v0, u0, a),
        RenormalizedFamily::Epsilon { c } => {
            let (v, u) = epsilon_strengths(c, a);
            xi_train(v, u, a)
        }
        RenormalizedFamily::Chi3 { alpha, gamma, delta, .. } => DeltaTrain::from_pairs(&[
            (-a, (gamma - 1.0) / (2.0 * delta) - 1.0 / (2.0 * a)),
            (0.0, -1.0 / a - delta / (2.0 * a2)),
            (a, (alpha - 1.0) / (2.0 * delta) - 1.0 / (2.0 * a)),
        ]),
        RenormalizedFamily::Chi5 { alpha, beta, gamma } => DeltaTrain::from_pairs(&[
            (-2.0 * a, beta / (alpha + 1.0) - 1.0 / (2.0 * a)),
            (-a, -1.0 / a + (alpha + 1.0) / (2.0 * beta * a2)),
            (
                0.0,
                beta / (alpha + 1.0) + beta / (gamma + 1.0) - beta / 2.0 - 1.0 / a,
            ),
            (a, -1.0 / a + (gamma + 1.0) / (2.0 * beta * a2)),
            (2.0 * a, beta / (gamma + 1.0) - 1.0 / (2.0 * a)),
        ]),
        RenormalizedFamily::Chi5z { alpha, .. } => {
            let rho = alpha.abs().sqrt();
            // upper branch of the ± signs for alpha < 0
            let pm = if alpha < 0.0 { 1.0 } else { -1.0 };
            DeltaTrain::from_pairs(&[
                (-2.0 * a, pm / (2.0 * rho) - 1.0 / (2.0 * a)),
                (-a, -1.0 / a + pm * rho / (2.0 * a2)),
                (0.0, -rho / 2.0 + pm / (2.0 * rho) - 1.0 / a),
                (a, -1.0 / a - 1.0 / (2.0 * rho * a2)),
                (2.0 * a, -rho / 2.0 - 1.0 / (2.0 * a)),
            ])
        }
    }
}

/// Flank and center strengths `(v(a), u(a))` of the epsilon law.
pub fn epsilon_strengths(c: f64, a: f64) -> (f64, f64) {
    (1.0 / (2.0 * c) - 1.0 / (2.0 * a), -1.0 / a + c / (a * a))
}

/// `B = 2v + u/(1 + au)` and `D = a/(2av + 1)` for a symmetric three-spike train.
pub fn bd_coefficients(v: f64, u: f64, a: f64) -> Result<(f64, f64), PotentialError> {
    check_separation(a)?;
    let den_b = 1.0 + a * u;
    let den_d = 2.0 * a * v + 1.0;
    if den_b.abs() < 1e-14 {
        return Err(PotentialError::SingularDenominator("1 + a*u"));
    }
    if den_d.abs() < 1e-14 {
        return Err(PotentialError::SingularDenominator("2*a*v + 1"));
    }
    Ok((2.0 * v + u / den_b, a / den_d))
}

/// Unit-area `cos²` bump of full width `s`:
/// `Δ_s(x) = (2/s) cos²(πx/s)` for `|x| < s/2`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    width: f64,
}

pub fn bump(s: f64) -> Result<Bump, PotentialError> {
    if s > 0.0 && s.is_finite() {
        Ok(Bump { width: s })
    } else {
        Err(PotentialError::NonPositiveWidth(s))
    }
}

impl Bump {
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn value(&self, x: f64) -> f64 {
        let s = self.width;
        if x.abs() >= s / 2.0 {
            0.0
        } else {
            let c = (PI * x / s).cos();
            2.0 / s * c * c
        }
    }

    /// `∫_{-∞}^{x} Δ_s`, in `[0, 1]`.
    pub fn cumulative(&self, x: f64) -> f64 {
        let s = self.width;
        let t = x.clamp(-s / 2.0, s / 2.0);
        0.5 + (t + s / (2.0 * PI) * (2.0 * PI * t / s).sin()) / s
    }

    /// Exact mean of `Δ_s` over `[lo, hi]`.
    pub fn cell_average(&self, lo: f64, hi: f64) -> f64 {
        (self.cumulative(hi) - self.cumulative(lo)) / (hi - lo)
    }
}

/// Uniform grid `x_i = x0 + i·spacing`, `i = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub x0: f64,
    pub spacing: f64,
    pub count: usize,
}

impl UniformGrid {
    pub fn new(x0: f64, spacing: f64, count: usize) -> Result<Self, PotentialError> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(PotentialError::InvalidGrid("spacing must be positive"));
        }
        if count < 2 {
            return Err(PotentialError::InvalidGrid("need at least two points"));
        }
        if !x0.is_finite() {
            return Err(PotentialError::InvalidGrid("origin must be finite"));
        }
        Ok(UniformGrid { x0, spacing, count })
    }

    /// The `n` interior nodes of `[-L/2, L/2]` with `h = L/(n+1)`.
    pub fn box_interior(length: f64, n: usize) -> Result<Self, PotentialError> {
        let h = length / (n as f64 + 1.0);
        Self::new(-length / 2.0 + h, h, n)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    pub fn last(&self) -> f64 {
        self.point(self.count - 1)
    }
}

/// Potential values on a grid; each value is the mean over the cell
/// `[x_i - h/2, x_i + h/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPotential {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl SampledPotential {
    /// `Σ V_i · h`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing
    }
}

/// Coarsest grid accepted by [`smear`], as spacing ≤ width / ratio.
pub const SMEAR_RESOLUTION_RATIO: f64 = 8.0;

/// Replaces each spike by `strength · Δ_s(x - position)` and cell-averages
/// the result onto `grid`.
pub fn smear(train: &DeltaTrain, s: f64, grid: &UniformGrid) -> Result<SampledPotential, PotentialError> {
    let shape = bump(s)?;
    if let Some(spacing) = train.min_spacing() {
        if s >= spacing {
            return Err(PotentialError::OverlappingSupports { width: s, spacing });
        }
    }
    let h = grid.spacing;
    if h > s / SMEAR_RESOLUTION_RATIO {
        return Err(PotentialError::GridTooCoarse {
            spacing: h,
            width: s,
            ratio: SMEAR_RESOLUTION_RATIO,
        });
    }
    let lo = train.first_position() - s / 2.0;
    let hi = train.last_position() + s / 2.0;
    if grid.x0 - h / 2.0 > lo || grid.last() + h / 2.0 < hi {
        return Err(PotentialError::GridDoesNotCover { lo, hi });
    }

    let mut values = vec![0.0; grid.count];
    for spike in train.spikes() {
        let first = (((spike.position - s / 2.0 - grid.x0) / h).floor() as isize - 1).max(0) as usize;
        let last = ((((spike.position + s / 2.0 - grid.x0) / h).ceil() as isize) + 1)
            .min(grid.count as isize - 1) as usize;
        for (i, value) in values.iter_mut().enumerate().take(last + 1).skip(first) {
            let x = grid.point(i);
            let avg = shape.cell_average(x - h / 2.0 - spike.position, x + h / 2.0 - spike.position);
            *value += spike.strength * avg;
        }
    }
    Ok(SampledPotential { grid: *grid, values })
}
