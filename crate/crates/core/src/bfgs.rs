//! Powell-damped BFGS approximation of the Lagrangian Hessian.

use nalgebra::{DMatrix, DVector};

/// Curvature threshold below which Powell damping kicks in.
const DAMPING_THRESHOLD: f64 = 0.2;
/// Steps with `s'Bs` at or below this are skipped.
const DEGENERATE_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsState {
    pub b: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfgsUpdate {
    Applied { damped: bool },
    /// `s'Bs` too small; the matrix is unchanged.
    SkippedUpdate,
}

impl BfgsState {
    pub fn identity(n: usize) -> Self {
        Self { b: DMatrix::identity(n, n) }
    }

    pub fn reset(&mut self) {
        let n = self.b.nrows();
        self.b = DMatrix::identity(n, n);
    }

    /// Applies the damped update in place for the pair `(s, y)`.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> BfgsUpdate {
        let bs = &self.b * s;
        let sbs = s.dot(&bs);
        if !(sbs > DEGENERATE_STEP) {
            return BfgsUpdate::SkippedUpdate;
        }
        let sy = s.dot(y);
        let (theta, damped) = if sy >= DAMPING_THRESHOLD * sbs {
            (1.0, false)
        } else {
            ((1.0 - DAMPING_THRESHOLD) * sbs / (sbs - sy), true)
        };
        let r = y * theta + &bs * (1.0 - theta);
        let sr = s.dot(&r);
        if !(sr > 0.0) || !sr.is_finite() {
            return BfgsUpdate::SkippedUpdate;
        }
        let updated = &self.b - (&bs * bs.transpose()) / sbs + (&r * r.transpose()) / sr;
        if updated.iter().any(|v| !v.is_finite()) {
            return BfgsUpdate::SkippedUpdate;
        }
        // keep exact symmetry against rounding
        self.b = (&updated + updated.transpose()) * 0.5;
        BfgsUpdate::Applied { damped }
    }
}

/// Functional form of [`BfgsState::update`].
pub fn damped_bfgs_update(state: &BfgsState, s: &DVector<f64>, y: &DVector<f64>) -> (BfgsState, BfgsUpdate) {
    let mut next = state.clone();
    let outcome = next.update(s, y);
    (next, outcome)
}
