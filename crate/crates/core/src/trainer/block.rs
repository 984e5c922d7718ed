use crate::anchor_graph::{reduced_laplacian, symmetrize, AnchorGraph};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Joint system over stacked anchor coordinates `[b_x; b_y]`.
///
/// `corr_block` is `CᵀC` for `C = [Z_x^m, −Z_y^m]`, the corresponded rows of
/// both graphs; `lap_block` is `blockdiag(L̃_x, L̃_y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    pub corr_block: DMatrix<f64>,
    pub lap_block: DMatrix<f64>,
    pub lambda: f64,
    pub m_x: usize,
    pub m_y: usize,
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.m_x + self.m_y
    }

    /// `corr_block + λ·lap_block`, the matrix whose smallest eigenvectors give the projections.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        &self.corr_block + &self.lap_block * self.lambda
    }

    /// `tr(Bᵀ(Z + λL)B)` for stacked projections `b`.
    pub fn objective(&self, b: &DMatrix<f64>) -> f64 {
        (b.transpose() * self.system_matrix() * b).trace()
    }
}

pub fn build_block_matrices(
    gx: &AnchorGraph,
    gy: &AnchorGraph,
    n_corr: usize,
    lambda: f64,
) -> Result<BlockSystem> {
    if n_corr == 0 {
        return Err(Error::InvalidParameter(
            "at least one corresponded pair is required".into(),
        ));
    }
    if n_corr > gx.n() || n_corr > gy.n() {
        return Err(Error::InvalidParameter(format!(
            "n_corr {n_corr} exceeds graph rows ({}, {})",
            gx.n(),
            gy.n()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    let (m_x, m_y) = (gx.m(), gy.m());
    let mut c = DMatrix::zeros(n_corr, m_x + m_y);
    c.view_mut((0, 0), (n_corr, m_x))
        .copy_from(&gx.z.rows(0, n_corr));
    c.view_mut((0, m_x), (n_corr, m_y))
        .copy_from(&(-gy.z.rows(0, n_corr)));
    let corr_block = symmetrize(c.tr_mul(&c));

    let mut lap_block = DMatrix::zeros(m_x + m_y, m_x + m_y);
    lap_block
        .view_mut((0, 0), (m_x, m_x))
        .copy_from(&reduced_laplacian(gx).matrix);
    lap_block
        .view_mut((m_x, m_x), (m_y, m_y))
        .copy_from(&reduced_laplacian(gy).matrix);

    Ok(BlockSystem {
        corr_block,
        lap_block,
        lambda,
        m_x,
        m_y,
    })
}
