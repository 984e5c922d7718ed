use super::block::BlockSystem;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use nalgebra::{DMatrix, DVector};

/// Eigenvalue magnitude below which a near-constant eigenvector counts as trivial.
pub const TRIVIAL_EIGENVALUE: f64 = 1e-7;
/// Max-minus-min spread below which an eigenvector counts as constant.
pub const CONSTANT_SPREAD: f64 = 1e-6;
/// Blocks with smaller norm would emit a constant bit in their modality.
const MIN_BLOCK_NORM: f64 = 1e-9;

/// How the `c` projection columns are chosen from the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSelection {
    /// The `c` smallest non-trivial eigenvectors.
    #[default]
    Smallest,
    /// Take the `2c` smallest non-trivial eigenvectors and keep the `c` whose
    /// energy is most evenly shared between the two modality blocks.
    BalancedFrom2c,
}

/// The `k` smallest eigenpairs of `corr_block + λ·lap_block`, ascending.
pub fn solve_eigen(sys: &BlockSystem, k: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = sys.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter(format!(
            "eigenpair count must lie in 1..={dim}, got {k}"
        )));
    }
    let (values, vectors) = symmetric_eigen(&sys.system_matrix())?;
    Ok((values.rows(0, k).into_owned(), vectors.columns(0, k).into_owned()))
}

/// Projection matrices split out of the selected eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub b_x: DMatrix<f64>,
    pub b_y: DMatrix<f64>,
    /// Eigenvalue of each selected column.
    pub eigenvalues: Vec<f64>,
}

impl Projection {
    pub fn stacked(&self) -> DMatrix<f64> {
        let (m_x, m_y, c) = (self.b_x.nrows(), self.b_y.nrows(), self.b_x.ncols());
        let mut b = DMatrix::zeros(m_x + m_y, c);
        b.view_mut((0, 0), (m_x, c)).copy_from(&self.b_x);
        b.view_mut((m_x, 0), (m_y, c)).copy_from(&self.b_y);
        b
    }
}

/// Flip `v` so its largest-magnitude entry (lowest index on ties) is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        *v *= -1.0;
    }
}

pub fn is_trivial(value: f64, v: &DVector<f64>) -> bool {
    value.abs() <= TRIVIAL_EIGENVALUE && (v.max() - v.min()) <= CONSTANT_SPREAD
}

pub fn extract_model(
    evals: &DVector<f64>,
    evecs: &DMatrix<f64>,
    c: usize,
    m_x: usize,
    selection: EigenSelection,
) -> Result<Projection> {
    if c == 0 {
        return Err(Error::InvalidParameter("code length must be at least 1".into()));
    }
    let dim = evecs.nrows();
    if m_x == 0 || m_x >= dim || evecs.ncols() != evals.len() {
        return Err(Error::DimensionMismatch {
            expected: evals.len(),
            found: evecs.ncols(),
            row: None,
        });
    }
    let m_y = dim - m_x;

    let mut usable: Vec<(f64, DVector<f64>)> = Vec::new();
    for (i, &value) in evals.iter().enumerate() {
        let mut v = evecs.column(i).into_owned();
        fix_sign(&mut v);
        if is_trivial(value, &v) {
            continue;
        }
        let nx = v.rows(0, m_x).norm();
        let ny = v.rows(m_x, m_y).norm();
        if nx <= MIN_BLOCK_NORM || ny <= MIN_BLOCK_NORM {
            continue;
        }
        usable.push((value, v));
    }
    if usable.len() < c {
        return Err(Error::TooFewEigenpairs {
            needed: c,
            available: usable.len(),
        });
    }

    let chosen: Vec<&(f64, DVector<f64>)> = match selection {
        EigenSelection::Smallest => usable.iter().take(c).collect(),
        EigenSelection::BalancedFrom2c => {
            let pool = &usable[..usable.len().min(2 * c)];
            let balance = |v: &DVector<f64>| {
                v.rows(0, m_x).norm_squared().min(v.rows(m_x, m_y).norm_squared())
            };
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            idx.sort_by(|&a, &b| balance(&pool[b].1).total_cmp(&balance(&pool[a].1)).then(a.cmp(&b)));
            idx.truncate(c);
            idx.sort_unstable();
            idx.iter().map(|&i| &pool[i]).collect()
        }
    };

    let mut b_x = DMatrix::zeros(m_x, c);
    let mut b_y = DMatrix::zeros(m_y, c);
    for (k, (_, v)) in chosen.iter().enumerate() {
        b_x.set_column(k, &v.rows(0, m_x));
        b_y.set_column(k, &v.rows(m_x, m_y));
    }
    Ok(Projection {
        b_x,
        b_y,
        eigenvalues: chosen.iter().map(|(value, _)| *value).collect(),
    })
}
