//! Steady-state tracking-error bounds and the step sizes that admit them.

use super::contraction::{check_alpha, check_constants};
use super::AnalysisError;
use crate::algorithms::AlgorithmId;

/// Constant of the DGT step-size rule.
pub const DGT_STEP_CONSTANT: f64 = 768.0;

/// Largest step covered by the analysis: `μ(1−β)/(10L²)` for diffusion and
/// `min{3(1−β)²/(80L), (1−β)/(2μ), (1−β)²μ/(768L²)}` for DGT. EXTRA and exact
/// diffusion have no bound here and return `None`.
pub fn max_stepsize(id: AlgorithmId, mu: f64, lipschitz: f64, beta: f64) -> Option<f64> {
    let gap = 1.0 - beta;
    match id {
        AlgorithmId::Diffusion => Some(mu * gap / (10.0 * lipschitz * lipschitz)),
        AlgorithmId::Dgt => Some(
            (3.0 * gap * gap / (80.0 * lipschitz))
                .min(gap / (2.0 * mu))
                .min(gap * gap * mu / (DGT_STEP_CONSTANT * lipschitz * lipschitz)),
        ),
        AlgorithmId::Extra | AlgorithmId::ExactDiffusion => None,
    }
}

/// `(4/(αμ) + 4βL/(μ(1−β)))Δx + 6αβLD/(μ(1−β))` for `α ≤ μ(1−β)/(10L²)`.
pub fn diffusion_bound(
    alpha: f64,
    mu: f64,
    lipschitz: f64,
    beta: f64,
    delta_x: f64,
    grad_bound: f64,
) -> Result<f64, AnalysisError> {
    check_constants(mu, lipschitz, beta)?;
    let limit = max_stepsize(AlgorithmId::Diffusion, mu, lipschitz, beta).unwrap_or(0.0);
    check_alpha(alpha, limit, "mu(1-beta)/(10L^2)")?;
    let gap = 1.0 - beta;
    Ok((4.0 / (alpha * mu) + 4.0 * beta * lipschitz / (mu * gap)) * delta_x
        + 6.0 * alpha * beta * lipschitz * grad_bound / (mu * gap))
}

/// `(4/(αμ) + 40βL/((1−β)²μ))Δx + 16αβLΔg/((1−β)²μ)` for `α ≤ (1−β)²μ/(768L²)`.
pub fn dgt_bound(
    alpha: f64,
    mu: f64,
    lipschitz: f64,
    beta: f64,
    delta_x: f64,
    grad_drift: f64,
) -> Result<f64, AnalysisError> {
    check_constants(mu, lipschitz, beta)?;
    let gap2 = (1.0 - beta).powi(2);
    let limit = gap2 * mu / (DGT_STEP_CONSTANT * lipschitz * lipschitz);
    check_alpha(alpha, limit, "(1-beta)^2 mu/(768L^2)")?;
    Ok((4.0 / (alpha * mu) + 40.0 * beta * lipschitz / (gap2 * mu)) * delta_x
        + 16.0 * alpha * beta * lipschitz * grad_drift / (gap2 * mu))
}

/// Bound for `algorithm`, or `None` when it has none or `α` lies outside its regime.
#[allow(clippy::too_many_arguments)]
pub fn theory_bound(
    id: AlgorithmId,
    alpha: f64,
    mu: f64,
    lipschitz: f64,
    beta: f64,
    delta_x: f64,
    grad_bound: f64,
    grad_drift: f64,
) -> Option<f64> {
    match id {
        AlgorithmId::Diffusion => diffusion_bound(alpha, mu, lipschitz, beta, delta_x, grad_bound).ok(),
        AlgorithmId::Dgt => dgt_bound(alpha, mu, lipschitz, beta, delta_x, grad_drift).ok(),
        AlgorithmId::Extra | AlgorithmId::ExactDiffusion => None,
    }
}

/// Entrywise upper bound on `(I − A_DGT)⁻¹`:
/// `(8/((1−β)²αμ))·[[αμ(1−β)/2, 6αL², 3L(1−β)], [α²βμ/2, αμ(1−β)/4, 3αβL], [α²βL, αL(1−β)/2, (1−β)²/2]]`.
pub fn dgt_resolvent_majorant(alpha: f64, mu: f64, lipschitz: f64, beta: f64) -> [[f64; 3]; 3] {
    let g = 1.0 - beta;
    let (a, l) = (alpha, lipschitz);
    let s = 8.0 / (g * g * a * mu);
    [
        [s * a * mu * g / 2.0, s * 6.0 * a * l * l, s * 3.0 * l * g],
        [s * a * a * beta * mu / 2.0, s * a * mu * g / 4.0, s * 3.0 * a * beta * l],
        [s * a * a * beta * l, s * a * l * g / 2.0, s * g * g / 2.0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diffusion_bound_examples() {
        assert_eq!(diffusion_bound(0.05, 1.0, 1.0, 0.0, 0.0, 3.0).unwrap(), 0.0);
        let b = diffusion_bound(0.05, 1.0, 1.0, 0.5, 1e-3, 1.0).unwrap();
        assert_relative_eq!(b, 0.384, max_relative = 1e-12);
        let b1 = diffusion_bound(0.01, 1.0, 1.0, 0.5, 0.0, 1.0).unwrap();
        let b2 = diffusion_bound(0.02, 1.0, 1.0, 0.5, 0.0, 1.0).unwrap();
        assert_relative_eq!(b2, 2.0 * b1, max_relative = 1e-12);
        assert!(diffusion_bound(0.06, 1.0, 1.0, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn dgt_bound_examples() {
        let alpha = 0.25 / 768.0;
        assert_eq!(dgt_bound(alpha, 1.0, 1.0, 0.5, 0.0, 0.0).unwrap(), 0.0);
        let b = dgt_bound(alpha, 1.0, 1.0, 0.5, 0.0, 1.0).unwrap();
        assert_relative_eq!(b, 32.0 * alpha, max_relative = 1e-12);
        assert_relative_eq!(b, 0.01042, max_relative = 1e-3);
        let a0 = 1.0 / 768.0;
        assert_relative_eq!(dgt_bound(a0, 1.0, 1.0, 0.0, 0.1, 5.0).unwrap(), 4.0 * 0.1 / a0, max_relative = 1e-12);
        assert!(dgt_bound(2.0 * alpha, 1.0, 1.0, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn step_size_rules() {
        assert_eq!(max_stepsize(AlgorithmId::Diffusion, 1.0, 1.0, 0.0), Some(0.1));
        assert_eq!(max_stepsize(AlgorithmId::Dgt, 1.0, 1.0, 0.0), Some(1.0 / 768.0));
        assert!(max_stepsize(AlgorithmId::Dgt, 1.0, 1.0, 1.0 - 1e-9).unwrap() < 1e-17);
        assert!(max_stepsize(AlgorithmId::Diffusion, 1.0, 1.0, 1.0 - 1e-9).unwrap() < 1e-9);
        assert_eq!(max_stepsize(AlgorithmId::Extra, 1.0, 1.0, 0.0), None);
    }

    #[test]
    fn dgt_rule_is_inside_contraction_regime() {
        for beta in [0.0, 0.5, 0.99] {
            for (mu, l) in [(0.5, 1.0), (1.0, 2.0), (1.0, 1.0)] {
                let a = max_stepsize(AlgorithmId::Dgt, mu, l, beta).unwrap();
                assert!(a <= (1.0 - beta) / (2.0 * l) && a <= 2.0 / (mu + l));
            }
        }
    }
}
