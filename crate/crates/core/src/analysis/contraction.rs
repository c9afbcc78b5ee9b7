//! Coupled error recursions `z^{k+1} ≤ A z^k + b` and their spectral radii.

use super::AnalysisError;

/// Small nonnegative matrix `A`, offset `b`, and `ρ(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionModel {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub rho: f64,
}

/// Inputs of the offset vector `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftInputs {
    pub n: usize,
    pub delta_x: f64,
    pub grad_bound: f64,
    pub grad_drift: f64,
}

pub(crate) fn check_constants(mu: f64, lipschitz: f64, beta: f64) -> Result<(), AnalysisError> {
    if !(mu > 0.0 && mu <= lipschitz && lipschitz.is_finite()) {
        return Err(AnalysisError::Domain(format!("need 0 < mu <= L, got mu = {mu}, L = {lipschitz}")));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(AnalysisError::Domain(format!("need 0 <= beta < 1, got {beta}")));
    }
    Ok(())
}

pub(crate) fn check_alpha(alpha: f64, limit: f64, name: &str) -> Result<(), AnalysisError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(AnalysisError::Domain(format!("step size must be positive, got {alpha}")));
    }
    if alpha > limit {
        return Err(AnalysisError::Domain(format!("alpha = {alpha} exceeds {name} = {limit}")));
    }
    Ok(())
}

/// `A = [[1−αμ/2, αL], [αβL, β]]`, valid for `α ≤ 2/(μ+L)`.
pub fn diffusion_contraction(alpha: f64, mu: f64, lipschitz: f64, beta: f64) -> Result<ContractionModel, AnalysisError> {
    check_constants(mu, lipschitz, beta)?;
    check_alpha(alpha, 2.0 / (mu + lipschitz), "2/(mu+L)")?;
    let a = vec![vec![1.0 - alpha * mu / 2.0, alpha * lipschitz], vec![alpha * beta * lipschitz, beta]];
    let rho = spectral_radius(&a);
    Ok(ContractionModel { a, b: vec![0.0; 2], rho })
}

/// `A = [[(1+β)/2, 5L, 3L], [αβ, β, 0], [0, αL, 1−αμ/2]]` on `(‖y−ȳ‖, ‖x−x̄‖, ‖x̄−x̃*‖)`,
/// valid for `α ≤ min{(1−β)/(2L), 2/(μ+L)}`.
pub fn dgt_contraction(alpha: f64, mu: f64, lipschitz: f64, beta: f64) -> Result<ContractionModel, AnalysisError> {
    check_constants(mu, lipschitz, beta)?;
    check_alpha(alpha, (1.0 - beta) / (2.0 * lipschitz), "(1-beta)/(2L)")?;
    check_alpha(alpha, 2.0 / (mu + lipschitz), "2/(mu+L)")?;
    let l = lipschitz;
    let a = vec![
        vec![(1.0 + beta) / 2.0, 5.0 * l, 3.0 * l],
        vec![alpha * beta, beta, 0.0],
        vec![0.0, alpha * l, 1.0 - alpha * mu / 2.0],
    ];
    let rho = spectral_radius(&a);
    Ok(ContractionModel { a, b: vec![0.0; 3], rho })
}

impl ContractionModel {
    /// Fills `b` for the diffusion recursion:
    /// `[(1−αμ/2)√nΔx, αβL√nΔx + αβ√nD]`.
    pub fn with_diffusion_offset(mut self, alpha: f64, mu: f64, lipschitz: f64, beta: f64, drift: DriftInputs) -> Self {
        let rn = (drift.n as f64).sqrt();
        self.b = vec![
            (1.0 - alpha * mu / 2.0) * rn * drift.delta_x,
            alpha * beta * lipschitz * rn * drift.delta_x + alpha * beta * rn * drift.grad_bound,
        ];
        self
    }

    /// Fills `b` for the DGT recursion: `[L√nΔx + √nΔg, 0, √nΔx]`.
    pub fn with_dgt_offset(mut self, lipschitz: f64, drift: DriftInputs) -> Self {
        let rn = (drift.n as f64).sqrt();
        self.b = vec![lipschitz * rn * drift.delta_x + rn * drift.grad_drift, 0.0, rn * drift.delta_x];
        self
    }

    /// `(I − A)⁻¹`, or `None` when `I − A` is singular.
    pub fn resolvent(&self) -> Option<Vec<Vec<f64>>> {
        let m: Vec<Vec<f64>> = self
            .a
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, v)| f64::from(u8::from(i == j)) - v).collect())
            .collect();
        invert(&m)
    }
}

fn det2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    a * d - b * c
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    match m.len() {
        2 => {
            let det = det2(m[0][0], m[0][1], m[1][0], m[1][1]);
            (det != 0.0).then(|| vec![vec![m[1][1] / det, -m[0][1] / det], vec![-m[1][0] / det, m[0][0] / det]])
        }
        3 => {
            // Adjugate: cof[i][j] is the (i, j) cofactor; the inverse is its transpose over det.
            let cof = |i: usize, j: usize| {
                let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
                let c: Vec<usize> = (0..3).filter(|&x| x != j).collect();
                let minor = det2(m[r[0]][c[0]], m[r[0]][c[1]], m[r[1]][c[0]], m[r[1]][c[1]]);
                if (i + j).is_multiple_of(2) { minor } else { -minor }
            };
            let det = (0..3).map(|j| m[0][j] * cof(0, j)).sum::<f64>();
            (det != 0.0).then(|| (0..3).map(|i| (0..3).map(|j| cof(j, i) / det).collect()).collect())
        }
        _ => None,
    }
}

/// Perron root of a nonnegative 2×2 or 3×3 matrix.
///
/// 2×2 uses the quadratic formula. 3×3 runs Newton on `det(λI − A)` from the
/// max row sum, which bounds ρ from above; the characteristic polynomial is
/// convex to the right of its largest root there, so the iterates decrease
/// monotonically onto ρ.
pub fn spectral_radius(a: &[Vec<f64>]) -> f64 {
    match a.len() {
        1 => a[0][0].abs(),
        2 => {
            let half_tr = 0.5 * (a[0][0] + a[1][1]);
            let disc = (0.5 * (a[0][0] - a[1][1])).powi(2) + a[0][1] * a[1][0];
            half_tr + disc.max(0.0).sqrt()
        }
        3 => {
            let char_poly = |l: f64| {
                let m = |i: usize, j: usize| if i == j { l - a[i][j] } else { -a[i][j] };
                let p = m(0, 0) * det2(m(1, 1), m(1, 2), m(2, 1), m(2, 2))
                    - m(0, 1) * det2(m(1, 0), m(1, 2), m(2, 0), m(2, 2))
                    + m(0, 2) * det2(m(1, 0), m(1, 1), m(2, 0), m(2, 1));
                // d/dλ det(λI − A) is the sum of the principal 2×2 minors of λI − A.
                let dp = det2(m(1, 1), m(1, 2), m(2, 1), m(2, 2))
                    + det2(m(0, 0), m(0, 2), m(2, 0), m(2, 2))
                    + det2(m(0, 0), m(0, 1), m(1, 0), m(1, 1));
                (p, dp)
            };
            let mut l = a.iter().map(|row| row.iter().sum::<f64>()).fold(0.0, f64::max);
            for _ in 0..500 {
                let (p, dp) = char_poly(l);
                if p <= 0.0 || dp <= 0.0 {
                    break;
                }
                let next = l - p / dp;
                // Stop once rounding halts the monotone descent.
                if next.is_nan() || next >= l {
                    break;
                }
                l = next;
            }
            l
        }
        n => panic!("spectral_radius supports 1x1 to 3x3 matrices, got {n}x{n}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diffusion_limits() {
        let m = diffusion_contraction(1e-12, 1.0, 2.0, 0.4).unwrap();
        assert_abs_diff_eq!(m.rho, 1.0, epsilon = 1e-10);
        let m = diffusion_contraction(0.3, 1.0, 2.0, 0.0).unwrap();
        assert_abs_diff_eq!(m.rho, 1.0 - 0.15, epsilon = 1e-15);
    }

    #[test]
    fn diffusion_lemma_example() {
        let m = diffusion_contraction(0.05, 1.0, 1.0, 0.5).unwrap();
        assert!(m.rho <= 1.0 - 3.0 * 0.05 / 8.0);
        assert!(m.a.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn dgt_limits() {
        let m = dgt_contraction(1e-12, 1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(m.rho, 1.0, epsilon = 1e-10);
        let alpha = 0.25 / 768.0;
        let m = dgt_contraction(alpha, 1.0, 1.0, 0.5).unwrap();
        assert!(m.rho <= 1.0 - alpha / 4.0);
        assert!(m.resolvent().is_some());
    }

    #[test]
    fn domain_errors_name_the_bound() {
        let err = diffusion_contraction(1.5, 1.0, 1.0, 0.5).unwrap_err();
        assert!(err.to_string().contains("2/(mu+L)"));
        let err = dgt_contraction(0.3, 1.0, 1.0, 0.5).unwrap_err();
        assert!(err.to_string().contains("(1-beta)/(2L)"));
        assert!(diffusion_contraction(0.1, 2.0, 1.0, 0.5).is_err());
        assert!(diffusion_contraction(0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn offsets() {
        let drift = DriftInputs { n: 4, delta_x: 0.1, grad_bound: 2.0, grad_drift: 3.0 };
        let m = diffusion_contraction(0.1, 1.0, 1.0, 0.5).unwrap().with_diffusion_offset(0.1, 1.0, 1.0, 0.5, drift);
        assert_abs_diff_eq!(m.b[0], 0.95 * 2.0 * 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.b[1], 0.05 * 2.0 * 0.1 + 0.05 * 2.0 * 2.0, epsilon = 1e-15);
        let m = dgt_contraction(0.1, 1.0, 1.0, 0.5).unwrap().with_dgt_offset(1.0, drift);
        assert_eq!(m.b, vec![0.2 + 6.0, 0.0, 0.2]);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn resolvent_inverts() {
        let m = dgt_contraction(0.01, 0.5, 2.0, 0.3).unwrap();
        let inv = m.resolvent().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|l| (f64::from(u8::from(i == l)) - m.a[i][l]) * inv[l][j]).sum();
                assert_abs_diff_eq!(prod, f64::from(u8::from(i == j)), epsilon = 1e-9);
            }
        }
    }
}
