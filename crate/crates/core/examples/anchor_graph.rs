//! Build anchor graphs for a small dataset and check the properties the
//! trainer relies on: stochastic Z, doubly stochastic affinity, PSD Laplacian.

use pccmh::anchor_graph::estimate_sigma;
use pccmh::datamodel::{generate_synthetic, SyntheticSpec};
use pccmh::linalg::symmetric_eigen;
use pccmh::{approx_affinity, compute_z, kmeans_fit, reduced_laplacian};

fn main() -> pccmh::Result<()> {
    let spec = SyntheticSpec {
        points_per_cluster: 40,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec)?;

    let anchors = kmeans_fit(&ds.x, 30, 11, 100)?;
    let sigma = estimate_sigma(&ds.x, &anchors)?;
    println!("{} anchors, inertia {:.3}, sigma {:.4}", anchors.m(), anchors.inertia, sigma);

    for s in [None, Some(3)] {
        let g = compute_z(&ds.x, &anchors, sigma, s)?;
        let worst_row = g
            .z
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max);
        let nnz = g.z.iter().filter(|&&v| v > 0.0).count();
        println!("s_nearest {s:?}: Z is {}x{}, {nnz} nonzeros, max |row sum - 1| {worst_row:.1e}", g.n(), g.m());

        let w = approx_affinity(&g)?;
        let w_row = w.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
        println!("  W: max |row sum - 1| {w_row:.1e}");

        let lap = reduced_laplacian(&g);
        let (values, _) = symmetric_eigen(&lap.matrix)?;
        println!("  L: eigenvalues in [{:.2e}, {:.3}]", values[0], values[values.len() - 1]);
    }
    Ok(())
}
