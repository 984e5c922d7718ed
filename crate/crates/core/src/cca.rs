//! Regularized CCA hashing baseline, trained on corresponded pairs only.
//!
//! File layout ("PCMHCCA", little-endian):
//!
//! ```text
//! "PCMHCCA"  u32 version = 1
//! u32 c, u32 d_x, u32 d_y
//! f64 reg
//! f64[d_x] mean_x, f64[d_y] mean_y
//! f64[d_x*c] w_x, f64[d_y*c] w_y                (row-major)
//! f64[c] thresholds_x, f64[c] thresholds_y, f64[c] correlations
//! ```

use crate::binfmt::*;
use crate::datamodel::FeatureMatrix;
use crate::encoder::{CrossModalHasher, HashCodeSet, Modality};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use nalgebra::{DMatrix, DVector};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CCA_MAGIC: &[u8; 7] = b"PCMHCCA";
const CCA_VERSION: u32 = 1;

/// Ridge added to each covariance diagonal, relative to its mean variance.
pub const DEFAULT_REG: f64 = 1e-4;

/// Whitening fails when the regularized spectrum is flatter than this.
const CONDITION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    pub w_x: DMatrix<f64>,
    pub w_y: DMatrix<f64>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    /// Column medians of the training projections.
    pub thresholds_x: Vec<f64>,
    pub thresholds_y: Vec<f64>,
    /// Canonical correlations, descending.
    pub correlations: Vec<f64>,
    pub reg: f64,
}

impl CcaModel {
    pub fn c(&self) -> usize {
        self.correlations.len()
    }
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.ncols(), |j, _| m.column(j).mean())
}

fn centered(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}

fn regularize(mut cov: DMatrix<f64>, reg: f64) -> DMatrix<f64> {
    let ridge = reg * cov.trace() / cov.nrows() as f64;
    for i in 0..cov.nrows() {
        cov[(i, i)] += ridge;
    }
    cov
}

fn inverse_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = symmetric_eigen(cov)?;
    let top = vals.max();
    if !(top > 0.0) || vals.min() <= CONDITION_FLOOR * top {
        return Err(Error::SingularCovariance);
    }
    let scale = DMatrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt()));
    Ok(&vecs * scale * vecs.transpose())
}

fn column_medians(p: &DMatrix<f64>) -> Vec<f64> {
    (0..p.ncols())
        .map(|k| {
            let mut col: Vec<f64> = p.column(k).iter().copied().collect();
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

pub fn train_cca(x: &FeatureMatrix, y: &FeatureMatrix, c: usize, reg: f64) -> Result<CcaModel> {
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.rows(),
            row: None,
        });
    }
    if x.rows() < 2 {
        return Err(Error::InvalidParameter("CCA needs at least two pairs".into()));
    }
    if c == 0 || c > x.cols().min(y.cols()) {
        return Err(Error::InvalidParameter(format!(
            "code length must lie in 1..={}, got {c}",
            x.cols().min(y.cols())
        )));
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::InvalidParameter(format!("reg must be positive, got {reg}")));
    }
    let (xm, ym) = (x.to_dmatrix(), y.to_dmatrix());
    let (mean_x, mean_y) = (column_means(&xm), column_means(&ym));
    let (xc, yc) = (centered(&xm, &mean_x), centered(&ym, &mean_y));
    let denom = (x.rows() - 1) as f64;
    let cxx = regularize(xc.transpose() * &xc / denom, reg);
    let cyy = regularize(yc.transpose() * &yc / denom, reg);
    let cxy = xc.transpose() * &yc / denom;

    let wx = inverse_sqrt(&cxx)?;
    let wy = inverse_sqrt(&cyy)?;
    let k = &wx * cxy * &wy;
    let svd = k.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    order.truncate(c);

    let mut a = DMatrix::zeros(x.cols(), c);
    let mut b = DMatrix::zeros(y.cols(), c);
    for (j, &i) in order.iter().enumerate() {
        let mut uj = u.column(i).into_owned();
        let mut vj = v_t.row(i).transpose();
        // same sign rule as the eigen path: largest |entry| of u positive
        let big = uj.iamax();
        if uj[big] < 0.0 {
            uj = -uj;
            vj = -vj;
        }
        a.set_column(j, &uj);
        b.set_column(j, &vj);
    }
    let w_x = wx * a;
    let w_y = wy * b;
    let thresholds_x = column_medians(&(&xc * &w_x));
    let thresholds_y = column_medians(&(&yc * &w_y));
    Ok(CcaModel {
        w_x,
        w_y,
        mean_x: mean_x.as_slice().to_vec(),
        mean_y: mean_y.as_slice().to_vec(),
        thresholds_x,
        thresholds_y,
        correlations: order.iter().map(|&i| svd.singular_values[i]).collect(),
        reg,
    })
}

pub fn encode_cca(model: &CcaModel, data: &FeatureMatrix, modality: Modality) -> Result<HashCodeSet> {
    let (w, mean, t) = match modality {
        Modality::X => (&model.w_x, &model.mean_x, &model.thresholds_x),
        Modality::Y => (&model.w_y, &model.mean_y, &model.thresholds_y),
    };
    if data.cols() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            found: data.cols(),
            row: None,
        });
    }
    let mean = DVector::from_column_slice(mean);
    let proj = centered(&data.to_dmatrix(), &mean) * w;
    HashCodeSet::from_fn(proj.nrows(), proj.ncols(), |i, k| proj[(i, k)] - t[k] >= 0.0)
}

impl CrossModalHasher for CcaModel {
    fn code_length(&self) -> usize {
        self.c()
    }

    fn encode_modality(&self, data: &FeatureMatrix, modality: Modality) -> Result<HashCodeSet> {
        encode_cca(self, data, modality)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn write_cca<W: Write>(model: &CcaModel, w: &mut W) -> Result<()> {
    let io = |res: std::io::Result<()>| res.map_err(|e| Error::Format(e.to_string()));
    io(w.write_all(CCA_MAGIC))?;
    io(write_u32(w, CCA_VERSION))?;
    for (v, what) in [
        (model.c(), "code length"),
        (model.mean_x.len(), "d_x"),
        (model.mean_y.len(), "d_y"),
    ] {
        io(write_u32(w, to_u32(v, what)?))?;
    }
    io(write_f64(w, model.reg))?;
    io(write_f64s(w, &model.mean_x))?;
    io(write_f64s(w, &model.mean_y))?;
    io(write_f64s(w, &row_major(&model.w_x)))?;
    io(write_f64s(w, &row_major(&model.w_y)))?;
    io(write_f64s(w, &model.thresholds_x))?;
    io(write_f64s(w, &model.thresholds_y))?;
    io(write_f64s(w, &model.correlations))
}

pub fn read_cca<R: Read>(r: &mut R) -> Result<CcaModel> {
    read_magic(r, CCA_MAGIC)?;
    let version = read_u32(r)?;
    if version != CCA_VERSION {
        return Err(Error::Format(format!("unsupported CCA model version {version}")));
    }
    let c = read_u32(r)? as usize;
    let d_x = read_u32(r)? as usize;
    let d_y = read_u32(r)? as usize;
    if c == 0 || d_x == 0 || d_y == 0 {
        return Err(Error::Format("zero dimension in CCA header".into()));
    }
    let reg = read_f64(r)?;
    let mean_x = read_f64s(r, d_x)?;
    let mean_y = read_f64s(r, d_y)?;
    let w_x = DMatrix::from_row_slice(d_x, c, &read_f64s(r, d_x * c)?);
    let w_y = DMatrix::from_row_slice(d_y, c, &read_f64s(r, d_y * c)?);
    let thresholds_x = read_f64s(r, c)?;
    let thresholds_y = read_f64s(r, c)?;
    let correlations = read_f64s(r, c)?;
    expect_eof(r)?;
    Ok(CcaModel {
        w_x,
        w_y,
        mean_x,
        mean_y,
        thresholds_x,
        thresholds_y,
        correlations,
        reg,
    })
}

pub fn save_cca(model: &CcaModel, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_cca(model, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_cca(path: &Path) -> Result<CcaModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cca(&mut BufReader::new(file))
}
