//! Connection matrices of point interactions.
//!
//! A point interaction at `x0` is fully described by how the boundary vector
//! `(ψ', ψ)` just left of the defect maps to the one just right of it:
//!
//! ```text
//! (ψ'₊, ψ₊)ᵀ = T · (ψ'₋, ψ₋)ᵀ,   det T = 1.
//! ```
//!
//! `T` is stored directly. The customary `(α, β, γ, δ)` parameters are the
//! negated entries, `T = [[-α, -β], [-δ, -γ]]`, and are exposed as accessors
//! only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat2::Mat2;

/// Tolerance on `|det T - 1|` when building from user-supplied values.
pub const CONSTRAINT_TOL: f64 = 1e-9;
/// Entry tolerance used by [`classify`].
pub const CLASSIFY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnError {
    #[error("connection constraint violated: alpha*gamma - beta*delta = {value} (must be 1)")]
    ConstraintViolation { value: f64 },
    #[error("non-finite connection matrix entry")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionMatrix {
    m: Mat2,
}

impl ConnectionMatrix {
    pub const IDENTITY: ConnectionMatrix = ConnectionMatrix { m: Mat2::IDENTITY };

    /// Builds `T = [[-α, -β], [-δ, -γ]]` checking `αγ - βδ = 1` to [`CONSTRAINT_TOL`].
    pub fn make_connection(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self, ConnError> {
        Self::make_connection_with_tolerance(alpha, beta, gamma, delta, CONSTRAINT_TOL)
    }

    pub fn make_connection_with_tolerance(
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
        tol: f64,
    ) -> Result<Self, ConnError> {
        Self::from_entries_with_tolerance(-alpha, -beta, -delta, -gamma, tol)
    }

    pub fn from_entries(t11: f64, t12: f64, t21: f64, t22: f64) -> Result<Self, ConnError> {
        Self::from_entries_with_tolerance(t11, t12, t21, t22, CONSTRAINT_TOL)
    }

    pub fn from_entries_with_tolerance(
        t11: f64,
        t12: f64,
        t21: f64,
        t22: f64,
        tol: f64,
    ) -> Result<Self, ConnError> {
        Self::from_mat2_with_tolerance(Mat2::new(t11, t12, t21, t22), tol)
    }

    pub fn from_mat2(m: Mat2) -> Result<Self, ConnError> {
        Self::from_mat2_with_tolerance(m, CONSTRAINT_TOL)
    }

    fn from_mat2_with_tolerance(m: Mat2, tol: f64) -> Result<Self, ConnError> {
        if !m.is_finite() {
            return Err(ConnError::NonFinite);
        }
        let det = m.det();
        if (det - 1.0).abs() > tol {
            return Err(ConnError::ConstraintViolation { value: det });
        }
        Ok(ConnectionMatrix { m })
    }

    /// `δ(x; v)`: continuous ψ, `ψ'₊ - ψ'₋ = 2vψ`.
    pub fn from_delta_strength(v: f64) -> Result<Self, ConnError> {
        if !v.is_finite() {
            return Err(ConnError::NonFinite);
        }
        Ok(ConnectionMatrix { m: Mat2::upper(2.0 * v) })
    }

    /// `ε(x; c)`: continuous ψ', `ψ₊ - ψ₋ = 2cψ'₋`.
    pub fn from_epsilon_strength(c: f64) -> Result<Self, ConnError> {
        if !c.is_finite() {
            return Err(ConnError::NonFinite);
        }
        Ok(ConnectionMatrix { m: Mat2::lower(2.0 * c) })
    }

    pub fn matrix(&self) -> Mat2 {
        self.m
    }

    pub fn t11(&self) -> f64 {
        self.m.0[0][0]
    }
    pub fn t12(&self) -> f64 {
        self.m.0[0][1]
    }
    pub fn t21(&self) -> f64 {
        self.m.0[1][0]
    }
    pub fn t22(&self) -> f64 {
        self.m.0[1][1]
    }

    pub fn alpha(&self) -> f64 {
        -self.t11()
    }
    pub fn beta(&self) -> f64 {
        -self.t12()
    }
    pub fn gamma(&self) -> f64 {
        -self.t22()
    }
    pub fn delta_p(&self) -> f64 {
        -self.t21()
    }

    /// `(α, β, γ, δ)` in that order.
    pub fn parameters(&self) -> [f64; 4] {
        [self.alpha(), self.beta(), self.gamma(), self.delta_p()]
    }

    pub fn det(&self) -> f64 {
        self.m.det()
    }

    /// Maps `(ψ'₋, ψ₋)` to `(ψ'₊, ψ₊)`.
    pub fn apply(&self, dpsi: f64, psi: f64) -> (f64, f64) {
        let [a, b] = self.m.apply([dpsi, psi]);
        (a, b)
    }

    /// `other` encountered after `self` along increasing x.
    pub fn then(&self, other: &ConnectionMatrix) -> ConnectionMatrix {
        compose(self, other)
    }

    /// The mirror image `x -> -x` of this interaction.
    ///
    /// Reflection flips the sign of ψ', so the reflected matrix is
    /// `S T⁻¹ S` with `S = diag(-1, 1)`; this swaps α and γ.
    pub fn reflected(&self) -> ConnectionMatrix {
        let [[a, b], [c, d]] = self.m.0;
        ConnectionMatrix {
            m: Mat2::new(d, b, c, a),
        }
    }
}

/// Returns `second · first`: `first` is crossed before `second`.
pub fn compose(first: &ConnectionMatrix, second: &ConnectionMatrix) -> ConnectionMatrix {
    ConnectionMatrix { m: second.m * first.m }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionClass {
    Free,
    DeltaOnly(f64),
    EpsilonOnly(f64),
    General,
}

pub fn classify(t: &ConnectionMatrix) -> InteractionClass {
    let near = |x: f64, y: f64| (x - y).abs() <= CLASSIFY_TOL;
    let unit_diag = near(t.t11(), 1.0) && near(t.t22(), 1.0);
    if !unit_diag {
        return InteractionClass::General;
    }
    match (near(t.t12(), 0.0), near(t.t21(), 0.0)) {
        (true, true) => InteractionClass::Free,
        (false, true) => InteractionClass::DeltaOnly(t.t12() / 2.0),
        (true, false) => InteractionClass::EpsilonOnly(t.t21() / 2.0),
        (false, false) => InteractionClass::General,
    }
}

/// Outer box edges and the singular limits `c -> ∞` (Neumann) and
/// `v -> ∞` (Dirichlet). Never a [`ConnectionMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// ψ = 0.
    Dirichlet,
    /// ψ' = 0.
    Neumann,
}

/// A primitive step of a factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    /// `δ(x; v)`, matrix `[[1, 2v], [0, 1]]`.
    DeltaStep(f64),
    /// `ε(x; c)`, matrix `[[1, 0], [2c, 1]]`.
    EpsilonStep(f64),
}

impl Factor {
    pub fn matrix(&self) -> Mat2 {
        match *self {
            Factor::DeltaStep(v) => Mat2::upper(2.0 * v),
            Factor::EpsilonStep(c) => Mat2::lower(2.0 * c),
        }
    }
}

/// Which identity produced a factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorBranch {
    Identity,
    /// δ ≠ 0: delta, epsilon, delta.
    DeltaNonzero,
    /// δ = 0, β ≠ 0: epsilon, delta, epsilon.
    BetaNonzero,
    /// β = δ = 0: six steps through two anti-diagonal matrices.
    Diagonal { alpha_negative: bool },
}

/// Factors listed in the order they are crossed along increasing x, so the
/// first element is the rightmost matrix of the product.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaFactorization {
    pub factors: Vec<Factor>,
    pub branch: FactorBranch,
}

impl DeltaFactorization {
    pub fn product(&self) -> Mat2 {
        self.factors
            .iter()
            .fold(Mat2::IDENTITY, |acc, f| f.matrix() * acc)
    }
}

/// Splits `T` into delta and epsilon steps.
pub fn decompose_general(t: &ConnectionMatrix) -> DeltaFactorization {
    let [alpha, beta, gamma, delta] = t.parameters();
    let zero = |x: f64| x.abs() <= CLASSIFY_TOL;

    if !zero(delta) {
        let factors = vec![
            Factor::DeltaStep((gamma + 1.0) / (2.0 * delta)),
            Factor::EpsilonStep(-delta / 2.0),
            Factor::DeltaStep((alpha + 1.0) / (2.0 * delta)),
        ];
        return DeltaFactorization {
            factors,
            branch: FactorBranch::DeltaNonzero,
        };
    }
    if !zero(beta) {
        let factors = vec![
            Factor::EpsilonStep((alpha + 1.0) / (2.0 * beta)),
            Factor::DeltaStep(-beta / 2.0),
            Factor::EpsilonStep((gamma + 1.0) / (2.0 * beta)),
        ];
        return DeltaFactorization {
            factors,
            branch: FactorBranch::BetaNonzero,
        };
    }
    if classify(t) == InteractionClass::Free {
        return DeltaFactorization {
            factors: Vec::new(),
            branch: FactorBranch::Identity,
        };
    }

    // diag(-α, -γ) = [[0, ρ], [-1/ρ, 0]] · [[0, ∓1/ρ], [±ρ, 0]], upper sign for α < 0,
    // each anti-diagonal factor expanded as delta·epsilon·delta.
    let rho = alpha.abs().sqrt();
    let sign = if alpha < 0.0 { 1.0 } else { -1.0 };
    let factors = vec![
        Factor::DeltaStep(-sign / (2.0 * rho)),
        Factor::EpsilonStep(sign * rho / 2.0),
        Factor::DeltaStep(-sign / (2.0 * rho)),
        Factor::DeltaStep(rho / 2.0),
        Factor::EpsilonStep(-1.0 / (2.0 * rho)),
        Factor::DeltaStep(rho / 2.0),
    ];
    DeltaFactorization {
        factors,
        branch: FactorBranch::Diagonal {
            alpha_negative: alpha < 0.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(t: &ConnectionMatrix) -> [[f64; 2]; 2] {
        t.matrix().0
    }

    #[test]
    fn make_connection_examples() {
        let free = ConnectionMatrix::make_connection(-1.0, 0.0, -1.0, 0.0).unwrap();
        assert_eq!(mat(&free), [[1.0, 0.0], [0.0, 1.0]]);

        let d3 = ConnectionMatrix::make_connection(-1.0, -6.0, -1.0, 0.0).unwrap();
        assert_eq!(mat(&d3), [[1.0, 6.0], [0.0, 1.0]]);

        let g = ConnectionMatrix::make_connection(-2.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(mat(&g), [[2.0, -1.0], [-1.0, 1.0]]);
        assert_eq!(g.det(), 1.0);
        assert_eq!(g.parameters(), [-2.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn make_connection_errors() {
        assert!(matches!(
            ConnectionMatrix::make_connection(1.0, 1.0, 1.0, 1.0),
            Err(ConnError::ConstraintViolation { .. })
        ));
        assert_eq!(
            ConnectionMatrix::make_connection(f64::NAN, 0.0, -1.0, 0.0),
            Err(ConnError::NonFinite)
        );
        // inside the default tolerance
        assert!(ConnectionMatrix::make_connection(-1.0, 0.0, -1.0 - 5e-10, 0.0).is_ok());
    }

    #[test]
    fn delta_and_epsilon_strengths() {
        assert_eq!(ConnectionMatrix::from_delta_strength(0.0).unwrap(), ConnectionMatrix::IDENTITY);
        assert_eq!(
            mat(&ConnectionMatrix::from_delta_strength(3.0).unwrap()),
            [[1.0, 6.0], [0.0, 1.0]]
        );
        let v = 0.5 / 5.0 - 0.5 / 0.333;
        let d = ConnectionMatrix::from_delta_strength(v).unwrap();
        assert!((d.t12() - (-2.8030)).abs() < 1e-4);

        assert_eq!(ConnectionMatrix::from_epsilon_strength(0.0).unwrap(), ConnectionMatrix::IDENTITY);
        let e = ConnectionMatrix::from_epsilon_strength(5.0).unwrap();
        assert_eq!(mat(&e), [[1.0, 0.0], [10.0, 1.0]]);
        assert_eq!(e.apply(1.0, 0.2), (1.0, 10.2));
        assert_eq!(ConnectionMatrix::from_delta_strength(f64::INFINITY), Err(ConnError::NonFinite));
        assert_eq!(ConnectionMatrix::from_epsilon_strength(f64::NAN), Err(ConnError::NonFinite));
    }

    #[test]
    fn compose_examples() {
        let t = ConnectionMatrix::make_connection(-2.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(compose(&ConnectionMatrix::IDENTITY, &t), t);

        let d1 = ConnectionMatrix::from_delta_strength(1.0).unwrap();
        let d2 = ConnectionMatrix::from_delta_strength(2.0).unwrap();
        assert_eq!(compose(&d1, &d2), ConnectionMatrix::from_delta_strength(3.0).unwrap());

        let e1 = ConnectionMatrix::from_epsilon_strength(1.0).unwrap();
        let ed = compose(&e1, &d1);
        let de = compose(&d1, &e1);
        // [[1,2],[0,1]]·[[1,0],[2,1]] = [[5,2],[2,1]]; reverse order gives [[1,2],[2,5]]
        assert_eq!(mat(&ed), [[5.0, 2.0], [2.0, 1.0]]);
        assert_eq!(mat(&de), [[1.0, 2.0], [2.0, 5.0]]);
        assert_ne!(ed, de);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&ConnectionMatrix::IDENTITY), InteractionClass::Free);
        let e = ConnectionMatrix::from_entries(1.0, 0.0, 10.0, 1.0).unwrap();
        assert_eq!(classify(&e), InteractionClass::EpsilonOnly(5.0));
        let g = ConnectionMatrix::from_entries(2.0, -1.0, -1.0, 1.0).unwrap();
        assert_eq!(classify(&g), InteractionClass::General);
    }

    #[test]
    fn decompose_delta_nonzero_example() {
        let t = ConnectionMatrix::make_connection(-2.0, 1.0, -1.0, 1.0).unwrap();
        let f = decompose_general(&t);
        assert_eq!(f.branch, FactorBranch::DeltaNonzero);
        assert_eq!(
            f.factors,
            vec![Factor::DeltaStep(0.0), Factor::EpsilonStep(-0.5), Factor::DeltaStep(-0.5)]
        );
        assert_eq!(f.product(), Mat2::new(2.0, -1.0, -1.0, 1.0));
    }

    #[test]
    fn decompose_pure_delta_uses_beta_branch() {
        let t = ConnectionMatrix::from_delta_strength(1.25).unwrap();
        let f = decompose_general(&t);
        assert_eq!(f.branch, FactorBranch::BetaNonzero);
        assert_eq!(
            f.factors,
            vec![Factor::EpsilonStep(0.0), Factor::DeltaStep(1.25), Factor::EpsilonStep(0.0)]
        );
    }

    #[test]
    fn decompose_diagonal_example() {
        let t = ConnectionMatrix::make_connection(-2.0, 0.0, -0.5, 0.0).unwrap();
        let f = decompose_general(&t);
        assert_eq!(f.branch, FactorBranch::Diagonal { alpha_negative: true });
        assert_eq!(f.factors.len(), 6);
        // hand-multiplied: six shears with rho = sqrt(2), upper sign
        let r = 2f64.sqrt();
        let by_hand = Mat2::upper(r)
            * Mat2::lower(-1.0 / r)
            * Mat2::upper(r)
            * Mat2::upper(-1.0 / r)
            * Mat2::lower(r)
            * Mat2::upper(-1.0 / r);
        assert!(by_hand.max_abs_diff(&Mat2::new(2.0, 0.0, 0.0, 0.5)) < 1e-14);
        assert!(f.product().max_abs_diff(&Mat2::new(2.0, 0.0, 0.0, 0.5)) < 1e-14);
    }

    #[test]
    fn decompose_identity_is_empty() {
        let f = decompose_general(&ConnectionMatrix::IDENTITY);
        assert!(f.factors.is_empty());
        assert_eq!(f.branch, FactorBranch::Identity);
        assert_eq!(f.product(), Mat2::IDENTITY);
    }

    #[test]
    fn decompose_positive_unit_alpha() {
        // α = γ = 1, the parity-like matrix -I
        let t = ConnectionMatrix::make_connection(1.0, 0.0, 1.0, 0.0).unwrap();
        let f = decompose_general(&t);
        assert_eq!(f.branch, FactorBranch::Diagonal { alpha_negative: false });
        assert!(f.product().max_abs_diff(&Mat2::new(-1.0, 0.0, 0.0, -1.0)) < 1e-14);
    }

    #[test]
    fn reflection_swaps_alpha_gamma() {
        let t = ConnectionMatrix::make_connection(-2.0, 1.0, -1.0, 1.0).unwrap();
        let r = t.reflected();
        assert_eq!(r.parameters(), [-1.0, 1.0, -2.0, 1.0]);
        assert_eq!(r.reflected(), t);
    }

    fn general() -> impl Strategy<Value = ConnectionMatrix> {
        (-4.0..4.0f64, -4.0..4.0f64, 0.1..4.0f64, any::<bool>()).prop_map(|(alpha, gamma, d, neg)| {
            let delta = if neg { -d } else { d };
            let beta = (alpha * gamma - 1.0) / delta;
            ConnectionMatrix::make_connection(alpha, beta, gamma, delta).unwrap()
        })
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in general(), b in general(), c in general()) {
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            let scale = 1.0 + left.matrix().max_abs();
            prop_assert!(left.matrix().max_abs_diff(&right.matrix()) < 1e-12 * scale);
            prop_assert!((left.det() - 1.0).abs() < 1e-10 * scale * scale);
        }

        #[test]
        fn classify_round_trips(v in -1e3..1e3f64, c in -1e3..1e3f64) {
            prop_assume!(v != 0.0 && c != 0.0);
            let d = ConnectionMatrix::from_delta_strength(v).unwrap();
            let e = ConnectionMatrix::from_epsilon_strength(c).unwrap();
            prop_assert_eq!(classify(&d), InteractionClass::DeltaOnly(v));
            prop_assert_eq!(classify(&e), InteractionClass::EpsilonOnly(c));
        }

        #[test]
        fn apply_matches_component_equations(t in general(), dpsi in -5.0..5.0f64, psi in -5.0..5.0f64) {
            let [alpha, beta, gamma, delta] = t.parameters();
            let (dp, p) = t.apply(dpsi, psi);
            prop_assert!((dp - (-alpha * dpsi - beta * psi)).abs() < 1e-12 * (1.0 + dp.abs()));
            prop_assert!((p - (-delta * dpsi - gamma * psi)).abs() < 1e-12 * (1.0 + p.abs()));
        }

        #[test]
        fn decomposition_reproduces_general(t in general()) {
            let f = decompose_general(&t);
            prop_assert_eq!(f.factors.len(), 3);
            prop_assert!(f.product().max_abs_diff(&t.matrix()) < 1e-10);
        }

        #[test]
        fn decomposition_reproduces_beta_branch(alpha in prop_oneof![-5.0..-0.2f64, 0.2..5.0f64], beta in -5.0..5.0f64) {
            prop_assume!(beta.abs() > 1e-3);
            let t = ConnectionMatrix::make_connection(alpha, beta, 1.0 / alpha, 0.0).unwrap();
            let f = decompose_general(&t);
            prop_assert_eq!(f.branch, FactorBranch::BetaNonzero);
            prop_assert!(f.product().max_abs_diff(&t.matrix()) < 1e-10);
        }

        #[test]
        fn decomposition_reproduces_diagonal(alpha in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64]) {
            let t = ConnectionMatrix::make_connection(alpha, 0.0, 1.0 / alpha, 0.0).unwrap();
            let f = decompose_general(&t);
            prop_assert_eq!(f.factors.len(), 6);
            prop_assert!(f.product().max_abs_diff(&t.matrix()) < 1e-10);
        }
    }
}
