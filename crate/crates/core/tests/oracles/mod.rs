//! Reference implementations that share no code with the library.

/// Cyclic Jacobi eigendecomposition of a symmetric matrix given as rows.
/// Returns eigenvalues ascending and eigenvectors as columns of `v[i][k]`.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&i| v[r][i]).collect()).collect();
    (values, vectors)
}

/// Straight-line AP: `(1/L) Σ_r P(r)·rel(r)` with `L` the hits in the list.
pub fn reference_ap(rel: &[bool]) -> f64 {
    let l = rel.iter().filter(|&&r| r).count();
    if l == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for r in 0..rel.len() {
        if rel[r] {
            let hits_to_r = rel[..=r].iter().filter(|&&x| x).count();
            total += hits_to_r as f64 / (r + 1) as f64;
        }
    }
    total / l as f64
}

/// MAP@R by comparing `±1` codes elementwise and sorting by (distance, index).
pub fn reference_map(queries: &[Vec<i8>], ql: &[i64], db: &[Vec<i8>], dl: &[i64], r: usize) -> f64 {
    let mut sum = 0.0;
    for (q, code) in queries.iter().enumerate() {
        let mut scored: Vec<(usize, usize)> = Vec::new();
        for (i, other) in db.iter().enumerate() {
            let mut d = 0;
            for k in 0..code.len() {
                if code[k] != other[k] {
                    d += 1;
                }
            }
            scored.push((d, i));
        }
        scored.sort();
        let rel: Vec<bool> = scored.iter().take(r).map(|&(_, i)| dl[i] == ql[q]).collect();
        sum += reference_ap(&rel);
    }
    sum / queries.len() as f64
}
