//! Timing probe for the contrastive-objective hot path at citation-graph scale.

use std::time::Instant;

use sgcl_core::loss::{contrastive_objective, PairSignals};
use sgcl_core::rng::RngState;
use sgcl_core::tensor::{kernels_bench, Tensor};

fn main() {
    let m = 2708;
    let d = 64;
    let mut rng = RngState::new(1);
    let gh_data: Vec<f64> = (0..m * d).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    let gz_data: Vec<f64> = (0..m * d).map(|_| rng.uniform_in(-1.0, 1.0)).collect();

    // raw gemm shapes involved in one cosine backward
    let w: Vec<f64> = (0..m * m).map(|_| 0.5f64).collect();
    let t0 = Instant::now();
    let out = kernels_bench::matmul(&w, &gh_data, m, m, d);
    println!("gemm (MxM)x(Mxd): {:?} (sink {})", t0.elapsed(), out[0]);
    let bt = kernels_bench::transpose(&gz_data, m, d);
    let t0 = Instant::now();
    let out = kernels_bench::matmul(&gh_data, &bt, m, d, m);
    println!("gemm (Mxd)x(dxM): {:?} (sink {})", t0.elapsed(), out[0]);
    let t0 = Instant::now();
    let wt = kernels_bench::transpose(&w, m, m);
    println!("transpose MxM: {:?} (sink {})", t0.elapsed(), wt[0]);

    for round in 0..2 {
        let gh = Tensor::<f64>::new_var(m, d, gh_data.clone()).unwrap();
        let gz = Tensor::<f64>::new_var(m, d, gz_data.clone()).unwrap();
        let t0 = Instant::now();
        let signals = PairSignals::plain(&gh, &gz).unwrap();
        let t_sims = t0.elapsed();
        let t0 = Instant::now();
        let loss = contrastive_objective(&signals, 0.5).unwrap();
        let t_obj = t0.elapsed();
        let t0 = Instant::now();
        let store = loss.backward().unwrap();
        let t_back = t0.elapsed();
        println!(
            "round {round}: sims {t_sims:?}, objective {t_obj:?}, backward {t_back:?} (grads {})",
            store.len()
        );
    }
}
