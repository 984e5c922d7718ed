//! Model file layout (all integers and reals little-endian):
//!
//! ```text
//! "PCMHMDL"  u32 version = 1
//! u32 c, u32 m_x, u32 d_x, u32 m_y, u32 d_y
//! u32 s_nearest (0 = dense rows), u32 threshold mode, u32 eigen selection
//! u64 seed, u64 n_corr
//! f64 lambda, f64 corr_ratio, f64 sigma_x, f64 sigma_y, f64 inertia_x, f64 inertia_y
//! f64[m_x*d_x] anchors_x, f64[m_y*d_y] anchors_y            (row-major)
//! f64[m_x*c] b_x, f64[m_y*c] b_y                             (row-major)
//! f64[c] thresholds_x, f64[c] thresholds_y, f64[c] eigenvalues
//! ```

use super::{EigenSelection, HashModel, ThresholdMode, TrainMeta};
use crate::anchors::AnchorSet;
use crate::binfmt::*;
use crate::datamodel::FeatureMatrix;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MODEL_MAGIC: &[u8; 7] = b"PCMHMDL";
const MODEL_VERSION: u32 = 1;

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn write_model<W: Write>(model: &HashModel, w: &mut W) -> Result<()> {
    let c = to_u32(model.c(), "code length")?;
    let dims = [
        c,
        to_u32(model.m_x(), "m_x")?,
        to_u32(model.anchors_x.dim(), "d_x")?,
        to_u32(model.m_y(), "m_y")?,
        to_u32(model.anchors_y.dim(), "d_y")?,
        to_u32(model.s_nearest.unwrap_or(0), "s_nearest")?,
        match model.meta.thresholds {
            ThresholdMode::TrainingMean => 0,
            ThresholdMode::Zero => 1,
        },
        match model.meta.selection {
            EigenSelection::Smallest => 0,
            EigenSelection::BalancedFrom2c => 1,
        },
    ];
    let io = |res: std::io::Result<()>| res.map_err(|e| Error::Format(e.to_string()));
    io(w.write_all(MODEL_MAGIC))?;
    io(write_u32(w, MODEL_VERSION))?;
    for d in dims {
        io(write_u32(w, d))?;
    }
    io(write_u64(w, model.meta.seed))?;
    io(write_u64(w, model.meta.n_corr as u64))?;
    io(write_f64s(
        w,
        &[
            model.meta.lambda,
            model.meta.corr_ratio,
            model.sigma_x,
            model.sigma_y,
            model.anchors_x.inertia,
            model.anchors_y.inertia,
        ],
    ))?;
    io(write_f64s(w, model.anchors_x.centers.data()))?;
    io(write_f64s(w, model.anchors_y.centers.data()))?;
    io(write_f64s(w, &row_major(&model.b_x)))?;
    io(write_f64s(w, &row_major(&model.b_y)))?;
    io(write_f64s(w, &model.thresholds_x))?;
    io(write_f64s(w, &model.thresholds_y))?;
    io(write_f64s(w, &model.eigenvalues))?;
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<HashModel> {
    read_magic(r, MODEL_MAGIC)?;
    let version = read_u32(r)?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let mut dims = [0usize; 8];
    for d in dims.iter_mut() {
        *d = read_u32(r)? as usize;
    }
    let [c, m_x, d_x, m_y, d_y, s_nearest, thresholds, selection] = dims;
    if c == 0 || m_x == 0 || m_y == 0 || d_x == 0 || d_y == 0 {
        return Err(Error::Format("zero dimension in model header".into()));
    }
    let thresholds = match thresholds {
        0 => ThresholdMode::TrainingMean,
        1 => ThresholdMode::Zero,
        t => return Err(Error::Format(format!("unknown threshold mode {t}"))),
    };
    let selection = match selection {
        0 => EigenSelection::Smallest,
        1 => EigenSelection::BalancedFrom2c,
        s => return Err(Error::Format(format!("unknown eigen selection {s}"))),
    };
    let seed = read_u64(r)?;
    let n_corr = read_u64(r)? as usize;
    let [lambda, corr_ratio, sigma_x, sigma_y, inertia_x, inertia_y]: [f64; 6] =
        read_f64s(r, 6)?.try_into().expect("six values");
    let centers_x = FeatureMatrix::new(m_x, d_x, read_f64s(r, m_x * d_x)?)?;
    let centers_y = FeatureMatrix::new(m_y, d_y, read_f64s(r, m_y * d_y)?)?;
    let b_x = DMatrix::from_row_slice(m_x, c, &read_f64s(r, m_x * c)?);
    let b_y = DMatrix::from_row_slice(m_y, c, &read_f64s(r, m_y * c)?);
    let thresholds_x = read_f64s(r, c)?;
    let thresholds_y = read_f64s(r, c)?;
    let eigenvalues = read_f64s(r, c)?;
    expect_eof(r)?;
    Ok(HashModel {
        anchors_x: AnchorSet::new(centers_x, inertia_x),
        anchors_y: AnchorSet::new(centers_y, inertia_y),
        sigma_x,
        sigma_y,
        s_nearest: (s_nearest > 0).then_some(s_nearest),
        b_x,
        b_y,
        thresholds_x,
        thresholds_y,
        eigenvalues,
        meta: TrainMeta {
            lambda,
            seed,
            n_corr,
            corr_ratio,
            thresholds,
            selection,
        },
    })
}

pub fn save_model(model: &HashModel, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<HashModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(&mut BufReader::new(file))
}
