use nalgebra::{DMatrix, SymmetricEigen};

use super::{BlockKind, BlockValue, SdpSolution, SdpStatus};

/// Duality diagnostics of a finished solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub status: SdpStatus,
    /// `<X, Z>` summed over the cone blocks
    pub gap: f64,
    /// `primal_obj - dual_obj`
    pub objective_gap: f64,
    /// `||XZ + ZX||_F` over the PSD blocks, `2 max |x_i z_i|` elsewhere
    pub complementarity: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `gap >= -1e-8`
    pub weak_duality: bool,
    pub converged: bool,
}

pub fn duality_report(sol: &SdpSolution) -> DualityReport {
    let mut gap = 0.0;
    let mut comp_sq = 0.0;
    for ((x, z), bl) in sol.x.blocks.iter().zip(&sol.z.blocks).zip(&sol.blocks) {
        match (x, z) {
            (BlockValue::Matrix(x), BlockValue::Matrix(z)) => {
                gap += x.dot(z);
                let xz = x * z;
                comp_sq += (&xz + xz.transpose()).norm_squared();
            }
            // zero blocks carry a free primal part; their Z is a residual, not a slack
            (BlockValue::Vector(x), BlockValue::Vector(z)) if bl.kind == BlockKind::Nonneg => {
                for (a, b) in x.iter().zip(z) {
                    gap += a * b;
                    comp_sq += 4.0 * a * a * b * b;
                }
            }
            _ => {}
        }
    }
    DualityReport {
        status: sol.status,
        gap,
        objective_gap: sol.gap,
        complementarity: comp_sq.sqrt(),
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        weak_duality: gap >= -1e-8,
        converged: sol.status == SdpStatus::Optimal,
    }
}

/// Smallest eigenvalue of a symmetric matrix and whether it is `>= -tol`.
pub fn psd_project_check(m: &DMatrix<f64>, tol: f64) -> (f64, bool) {
    if m.nrows() == 0 {
        return (0.0, true);
    }
    let sym = (m + m.transpose()) * 0.5;
    let min = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v));
    (min, min >= -tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_check_examples() {
        let (v, ok) = psd_project_check(&DMatrix::identity(3, 3), 1e-9);
        assert!((v - 1.0).abs() < 1e-12 && ok);
        let (v, ok) =
            psd_project_check(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), 1e-9);
        assert!((v + 1.0).abs() < 1e-12 && !ok);
        let (v, ok) = psd_project_check(&DMatrix::from_element(3, 3, 1.0), 1e-9);
        assert!(v.abs() < 1e-12 && ok);
    }
}
