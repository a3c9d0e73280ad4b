//! Exact box spectra by transfer matrices.
//!
//! Between interactions the wavefunction is a free solution, so the boundary
//! vector `(ψ', ψ)` is carried across a gap `d` by
//!
//! ```text
//! P(d) = [[cos kd, -k sin kd], [sin(kd)/k, cos kd]],   k = √(2E),
//! ```
//!
//! (hyperbolic for `E < 0`), and across a spike of strength `v` by
//! `[[1, 2v], [0, 1]]`. Shooting from the left wall and reading off the
//! component the right wall must annihilate gives a spectral function that
//! is entire in `E`; its zeros are the eigenvalues.

use std::f64::consts::PI;

use thiserror::Error;

use crate::analysis::BoundaryData;
use crate::connmat::{BoundaryKind, ConnectionMatrix};
use crate::mat2::Mat2;
use crate::potential::{DeltaTrain, SampledPotential, UniformGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("propagation distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("non-finite input")]
    NonFinite,
    #[error("sampled potentials are not supported by the exact solver")]
    UnsupportedInteraction,
    #[error("box length must be positive, got {0}")]
    InvalidLength(f64),
    #[error("interaction at x = {0} lies outside the open box")]
    OutsideBox(f64),
    #[error("invalid energy window [{0}, {1}]")]
    InvalidWindow(f64, f64),
    #[error("tolerance must be positive")]
    InvalidTolerance,
    #[error("energy {energy} is not an eigenvalue (root distance {distance:e})")]
    NotAnEigenvalue { energy: f64, distance: f64 },
}

/// Unimodular map of `(ψ', ψ)`; `energy` is `None` for energy-independent steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub matrix: Mat2,
    pub energy: Option<f64>,
}

impl TransferMatrix {
    pub fn det(&self) -> f64 {
        self.matrix.det()
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        self.matrix.apply(v)
    }
}

/// Free evolution over `d`, valid for either sign of `d`.
pub(crate) fn propagate(energy: f64, d: f64) -> Mat2 {
    if energy > 0.0 {
        let k = (2.0 * energy).sqrt();
        let (s, c) = (k * d).sin_cos();
        Mat2::new(c, -k * s, s / k, c)
    } else if energy < 0.0 {
        let kappa = (-2.0 * energy).sqrt();
        let (s, c) = ((kappa * d).sinh(), (kappa * d).cosh());
        Mat2::new(c, kappa * s, s / kappa, c)
    } else {
        Mat2::new(1.0, 0.0, d, 1.0)
    }
}

pub fn free_propagator(energy: f64, d: f64) -> Result<TransferMatrix, ExactError> {
    if !energy.is_finite() || !d.is_finite() {
        return Err(ExactError::NonFinite);
    }
    if d < 0.0 {
        return Err(ExactError::NegativeDistance(d));
    }
    Ok(TransferMatrix {
        matrix: propagate(energy, d),
        energy: Some(energy),
    })
}

/// Crossing `v δ(x)`: `ψ'` jumps by `2vψ`.
pub fn delta_step(v: f64) -> Result<TransferMatrix, ExactError> {
    if !v.is_finite() {
        return Err(ExactError::NonFinite);
    }
    Ok(TransferMatrix {
        matrix: Mat2::upper(2.0 * v),
        energy: None,
    })
}

/// From just left of the first spike to just right of the last.
pub fn train_transfer(train: &DeltaTrain, energy: f64) -> Result<TransferMatrix, ExactError> {
    if !energy.is_finite() {
        return Err(ExactError::NonFinite);
    }
    let spikes = train.spikes();
    let mut m = Mat2::upper(2.0 * spikes[0].strength);
    for w in spikes.windows(2) {
        m = Mat2::upper(2.0 * w[1].strength) * propagate(energy, w[1].position - w[0].position) * m;
    }
    Ok(TransferMatrix {
        matrix: m,
        energy: Some(energy),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Interaction {
    None,
    Train(DeltaTrain),
    Point { matrix: ConnectionMatrix, position: f64 },
    Sampled(SampledPotential),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSystem {
    pub length: f64,
    pub left_bc: BoundaryKind,
    pub right_bc: BoundaryKind,
    pub interaction: Interaction,
}

/// A localized jump of `(ψ', ψ)` at `position`.
#[derive(Debug, Clone, Copy)]
struct Event {
    position: f64,
    jump: Mat2,
}

impl BoxSystem {
    pub fn new(
        length: f64,
        left_bc: BoundaryKind,
        right_bc: BoundaryKind,
        interaction: Interaction,
    ) -> Result<Self, ExactError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(ExactError::InvalidLength(length));
        }
        let half = length / 2.0;
        let inside = |x: f64| x > -half && x < half;
        match &interaction {
            Interaction::Train(t) => {
                for p in t.positions() {
                    if !inside(p) {
                        return Err(ExactError::OutsideBox(p));
                    }
                }
            }
            Interaction::Point { position, .. } => {
                if !inside(*position) {
                    return Err(ExactError::OutsideBox(*position));
                }
            }
            Interaction::None | Interaction::Sampled(_) => {}
        }
        Ok(BoxSystem {
            length,
            left_bc,
            right_bc,
            interaction,
        })
    }

    /// Dirichlet walls on both sides.
    pub fn dirichlet(length: f64, interaction: Interaction) -> Result<Self, ExactError> {
        Self::new(length, BoundaryKind::Dirichlet, BoundaryKind::Dirichlet, interaction)
    }

    fn events(&self) -> Result<Vec<Event>, ExactError> {
        match &self.interaction {
            Interaction::None => Ok(Vec::new()),
            Interaction::Train(t) => Ok(t
                .spikes()
                .iter()
                .map(|s| Event {
                    position: s.position,
                    jump: Mat2::upper(2.0 * s.strength),
                })
                .collect()),
            Interaction::Point { matrix, position } => Ok(vec![Event {
                position: *position,
                jump: matrix.matrix(),
            }]),
            Interaction::Sampled(_) => Err(ExactError::UnsupportedInteraction),
        }
    }

    fn interaction_count(&self) -> usize {
        match &self.interaction {
            Interaction::None | Interaction::Sampled(_) => 0,
            Interaction::Train(t) => t.len(),
            Interaction::Point { .. } => 1,
        }
    }

    /// Where boundary data is reported: the outermost spikes of a train,
    /// the point itself, or the box center when there is no interaction.
    pub fn defect_span(&self) -> (f64, f64) {
        match &self.interaction {
            Interaction::Train(t) => (t.first_position(), t.last_position()),
            Interaction::Point { position, .. } => (*position, *position),
            Interaction::None | Interaction::Sampled(_) => (0.0, 0.0),
        }
    }
}

fn start_vector(bc: BoundaryKind) -> [f64; 2] {
    match bc {
        BoundaryKind::Dirichlet => [1.0, 0.0],
        BoundaryKind::Neumann => [0.0, 1.0],
    }
}

fn closing_component(bc: BoundaryKind, v: [f64; 2]) -> f64 {
    match bc {
        BoundaryKind::Dirichlet => v[1],
        BoundaryKind::Neumann => v[0],
    }
}

fn shoot(sys: &BoxSystem, events: &[Event], energy: f64) -> [f64; 2] {
    let mut x = -sys.length / 2.0;
    let mut v = start_vector(sys.left_bc);
    for e in events {
        v = e.jump.apply(propagate(energy, e.position - x).apply(v));
        x = e.position;
    }
    propagate(energy, sys.length / 2.0 - x).apply(v)
}

/// `F(E)`: the right-wall component of the solution launched from the left wall.
pub fn spectral_function(sys: &BoxSystem, energy: f64) -> Result<f64, ExactError> {
    if !energy.is_finite() {
        return Err(ExactError::NonFinite);
    }
    let events = sys.events()?;
    Ok(closing_component(sys.right_bc, shoot(sys, &events, energy)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Estimated distance in energy from each returned value to the true root.
    pub residuals: Vec<f64>,
    pub window: (f64, f64),
    /// Final scan step in signed-k space.
    pub scan_step: f64,
    /// A scan cell held two roots at base resolution; the window was rescanned at 4×.
    pub scan_too_coarse: bool,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn signed_k(energy: f64) -> f64 {
    energy.signum() * (2.0 * energy.abs()).sqrt()
}

fn energy_of(s: f64) -> f64 {
    s.signum() * s * s / 2.0
}

struct Scanner<'a> {
    sys: &'a BoxSystem,
    events: Vec<Event>,
    tol: f64,
}

impl Scanner<'_> {
    fn f(&self, s: f64) -> f64 {
        closing_component(self.sys.right_bc, shoot(self.sys, &self.events, energy_of(s)))
    }

    /// Bisection in signed k until the energy bracket is below `tol`.
    fn bisect(&self, mut lo: f64, mut hi: f64, mut f_lo: f64) -> (f64, f64) {
        let mut f_hi = self.f(hi);
        for _ in 0..400 {
            if energy_of(hi) - energy_of(lo) <= self.tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = self.f(mid);
            if f_mid == 0.0 {
                return (energy_of(mid), 0.0);
            }
            if (f_mid > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        let e = energy_of(mid);
        let (e_lo, e_hi) = (energy_of(lo), energy_of(hi));
        let slope = (f_hi - f_lo) / (e_hi - e_lo);
        let distance = if slope != 0.0 && slope.is_finite() {
            (self.f(mid) / slope).abs().min(e_hi - e_lo)
        } else {
            e_hi - e_lo
        };
        (e, distance)
    }

    /// Golden-section descent of `sign·F` on `[lo, hi]`, stopping at the
    /// first point where `F` takes the opposite sign.
    fn find_opposite(&self, mut lo: f64, mut hi: f64, sign: f64) -> Option<f64> {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let g = |s: f64| sign * self.f(s);
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let (mut g1, mut g2) = (g(x1), g(x2));
        for _ in 0..200 {
            if g1 <= 0.0 {
                return Some(x1);
            }
            if g2 <= 0.0 {
                return Some(x2);
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
                break;
            }
            if g1 < g2 {
                hi = x2;
                x2 = x1;
                g2 = g1;
                x1 = hi - INV_PHI * (hi - lo);
                g1 = g(x1);
            } else {
                lo = x1;
                x1 = x2;
                g1 = g2;
                x2 = lo + INV_PHI * (hi - lo);
                g2 = g(x2);
            }
        }
        None
    }

    /// One scan of `[s_lo, s_hi]` with step at most `step`. Returns the roots
    /// and whether any cell hid a pair.
    fn scan(&self, s_lo: f64, s_hi: f64, step: f64) -> (Vec<(f64, f64)>, bool) {
        let cells = ((s_hi - s_lo) / step).ceil().max(1.0) as usize;
        let s: Vec<f64> = (0..=cells)
            .map(|i| {
                if i == cells {
                    s_hi
                } else {
                    s_lo + (s_hi - s_lo) * i as f64 / cells as f64
                }
            })
            .collect();
        let f: Vec<f64> = s.iter().map(|&x| self.f(x)).collect();
        let n = s.len();
        let mut roots = Vec::new();
        let mut pair_found = false;

        for i in 0..n {
            if f[i] == 0.0 {
                roots.push((energy_of(s[i]), 0.0));
                // a second root may hide next to an exact sample hit
                for (lo, hi, other) in [(i.checked_sub(1), Some(i), 0usize), (Some(i), (i + 1 < n).then_some(i + 1), 1)] {
                    if let (Some(lo), Some(hi)) = (lo, hi) {
                        let outer = if other == 0 { lo } else { hi };
                        if f[outer] != 0.0 {
                            let sign = f[outer].signum();
                            if let Some(m) = self.find_opposite(s[lo], s[hi], sign) {
                                let (a, b) = if other == 0 { (s[lo], m) } else { (m, s[hi]) };
                                let fa = self.f(a);
                                roots.push(self.bisect(a, b, fa));
                                pair_found = true;
                            }
                        }
                    }
                }
                continue;
            }
            if i + 1 < n && f[i + 1] != 0.0 && (f[i] > 0.0) != (f[i + 1] > 0.0) {
                roots.push(self.bisect(s[i], s[i + 1], f[i]));
            }
        }

        for i in 1..n.saturating_sub(1) {
            let (a, b, c) = (f[i - 1], f[i], f[i + 1]);
            if a == 0.0 || b == 0.0 || c == 0.0 {
                continue;
            }
            let same_sign = (a > 0.0) == (b > 0.0) && (b > 0.0) == (c > 0.0);
            if !same_sign || !(b.abs() <= a.abs() && b.abs() <= c.abs()) {
                continue;
            }
            let sign = b.signum();
            if let Some(m) = self.find_opposite(s[i - 1], s[i + 1], sign) {
                roots.push(self.bisect(s[i - 1], m, a));
                let fm = self.f(m);
                roots.push(self.bisect(m, s[i + 1], fm));
                pair_found = true;
            }
        }

        roots.sort_by(|x, y| x.0.total_cmp(&y.0));
        roots.dedup_by(|x, y| (x.0 - y.0).abs() <= self.tol);
        (roots, pair_found)
    }
}

/// Eigenvalues of `sys` in `window`, lowest first.
///
/// The window is scanned in signed `k = ±√(2|E|)` with step
/// `π / (4L(1 + n))`, `n` the number of interaction sites. Sign changes are
/// bisected to `|ΔE| < tol`; cells where `|F|` dips without crossing are
/// searched for a hidden pair of roots. If such a pair turns up, the whole
/// window is rescanned once at four times the resolution.
pub fn eigenvalues(
    sys: &BoxSystem,
    window: (f64, f64),
    max_count: usize,
    tol: f64,
) -> Result<Spectrum, ExactError> {
    let (e_min, e_max) = window;
    if !(e_min.is_finite() && e_max.is_finite()) || e_min >= e_max {
        return Err(ExactError::InvalidWindow(e_min, e_max));
    }
    if !(tol > 0.0) {
        return Err(ExactError::InvalidTolerance);
    }
    let scanner = Scanner {
        sys,
        events: sys.events()?,
        tol,
    };
    let base_step = PI / (4.0 * sys.length * (1.0 + sys.interaction_count() as f64));
    let (s_lo, s_hi) = (signed_k(e_min), signed_k(e_max));

    let (mut roots, pair_found) = scanner.scan(s_lo, s_hi, base_step);
    let mut step = base_step;
    if pair_found {
        step = base_step / 4.0;
        roots = scanner.scan(s_lo, s_hi, step).0;
    }
    roots.retain(|r| r.0 >= e_min && r.0 <= e_max);
    roots.truncate(max_count);
    Ok(Spectrum {
        eigenvalues: roots.iter().map(|r| r.0).collect(),
        residuals: roots.iter().map(|r| r.1).collect(),
        window,
        scan_step: step,
        scan_too_coarse: pair_found,
    })
}

/// One free piece of the solution: `(ψ', ψ)` at `start` (right limit).
#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    end: f64,
    init: [f64; 2],
}

/// A normalized eigenfunction in closed form.
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub energy: f64,
    pieces: Vec<Piece>,
    pub boundary: BoundaryData,
    pub defect_span: (f64, f64),
    /// Grid samples of ψ.
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
}

impl Eigenfunction {
    fn piece_at(&self, x: f64) -> &Piece {
        // right-continuous at interaction sites
        self.pieces
            .iter()
            .rev()
            .find(|p| x >= p.start)
            .unwrap_or(&self.pieces[0])
    }

    /// `(ψ'(x), ψ(x))`.
    pub fn state_at(&self, x: f64) -> [f64; 2] {
        let p = self.piece_at(x);
        propagate(self.energy, x - p.start).apply(p.init)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.state_at(x)[1]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.state_at(x)[0]
    }

    /// `∫ψ²` over the box, piece by piece (≈ 1 after normalization).
    pub fn norm_squared(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| piece_norm(self.energy, p.init, p.end - p.start))
            .sum()
    }
}

/// `∫₀ᵈ ψ²` for the free solution starting from `(ψ', ψ) = init`.
fn piece_norm(energy: f64, init: [f64; 2], d: f64) -> f64 {
    let [p, q] = init;
    if energy > 0.0 {
        let k = (2.0 * energy).sqrt();
        let (a, b) = (q, p / k);
        let (s2, c2) = (2.0 * k * d).sin_cos();
        (a * a + b * b) * d / 2.0 + (a * a - b * b) * s2 / (4.0 * k) + a * b * (1.0 - c2) / (2.0 * k)
    } else if energy < 0.0 {
        // ψ = A e^{κx} + B e^{-κx}; the cosh/sinh form cancels badly on decaying pieces
        let kappa = (-2.0 * energy).sqrt();
        let (a, b) = (0.5 * (q + p / kappa), 0.5 * (q - p / kappa));
        let x = 2.0 * kappa * d;
        (a * a * x.exp_m1() - b * b * (-x).exp_m1()) / (2.0 * kappa) + 2.0 * a * b * d
    } else {
        q * q * d + q * p * d * d + p * p * d * d * d / 3.0
    }
}

/// Closed-form eigenfunction at `energy`, normalized to `∫ψ² = 1` and
/// sampled on `grid`. The sign makes ψ positive next to the left wall.
pub fn eigenfunction(
    sys: &BoxSystem,
    energy: f64,
    grid: &UniformGrid,
    tol: f64,
) -> Result<Eigenfunction, ExactError> {
    if !energy.is_finite() {
        return Err(ExactError::NonFinite);
    }
    if !(tol > 0.0) {
        return Err(ExactError::InvalidTolerance);
    }
    let events = sys.events()?;
    check_eigenvalue(sys, &events, energy, tol)?;

    let half = sys.length / 2.0;
    let mut pieces = Vec::with_capacity(events.len() + 1);
    let mut x = -half;
    let mut v = start_vector(sys.left_bc);
    let mut before_first = None;
    let mut after_last = None;
    for e in &events {
        let arrive = propagate(energy, e.position - x).apply(v);
        pieces.push(Piece {
            start: x,
            end: e.position,
            init: v,
        });
        if before_first.is_none() {
            before_first = Some(arrive);
        }
        v = e.jump.apply(arrive);
        after_last = Some(v);
        x = e.position;
    }
    pieces.push(Piece {
        start: x,
        end: half,
        init: v,
    });

    let norm: f64 = pieces
        .iter()
        .map(|p| piece_norm(energy, p.init, p.end - p.start))
        .sum::<f64>()
        .sqrt();
    for p in &mut pieces {
        p.init = [p.init[0] / norm, p.init[1] / norm];
    }

    let mut ef = Eigenfunction {
        energy,
        pieces,
        boundary: BoundaryData::default(),
        defect_span: sys.defect_span(),
        x: grid.points(),
        psi: Vec::new(),
    };
    ef.boundary = match (before_first, after_last) {
        (Some(l), Some(r)) => BoundaryData {
            psi_minus: l[1] / norm,
            dpsi_minus: l[0] / norm,
            psi_plus: r[1] / norm,
            dpsi_plus: r[0] / norm,
        },
        _ => {
            let [dp, p] = ef.state_at(0.0);
            BoundaryData {
                psi_minus: p,
                dpsi_minus: dp,
                psi_plus: p,
                dpsi_plus: dp,
            }
        }
    };
    ef.psi = ef.x.iter().map(|&x| ef.value(x)).collect();
    Ok(ef)
}

fn check_eigenvalue(sys: &BoxSystem, events: &[Event], energy: f64, tol: f64) -> Result<(), ExactError> {
    let f = |e: f64| closing_component(sys.right_bc, shoot(sys, events, e));
    let f0 = f(energy);
    if f0 == 0.0 {
        return Ok(());
    }
    let step = 10.0 * tol;
    let (fl, fr) = (f(energy - step), f(energy + step));
    if (fl > 0.0) != (fr > 0.0) || fl == 0.0 || fr == 0.0 {
        return Ok(());
    }
    let slope = (fr - fl) / (2.0 * step);
    let distance = if slope != 0.0 { (f0 / slope).abs() } else { f64::INFINITY };
    Err(ExactError::NotAnEigenvalue { energy, distance })
}
