//! The interior-point solver on a small real semidefinite program:
//! minimize tr(CX) subject to tr(X) = 1, X PSD, whose value is λmin(C).

use pencil_gauge::conic::{smat, solve, svec, svec_index, Cone, ConicProblem, Settings, SparseMatrix};
use pencil_gauge::numkern::RMat;

fn main() {
    let k = 3;
    let cm = RMat::from_row_slice(k, k, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
    let dim = k * (k + 1) / 2;
    // Rows: tr(X) = 1, then -x + s = 0 with s in the PSD cone.
    let mut a = SparseMatrix::new(1 + dim, dim);
    for i in 0..k {
        a.push(0, svec_index(k, i, i), 1.0);
    }
    for j in 0..dim {
        a.push(1 + j, j, -1.0);
    }
    let mut b = vec![0.0; 1 + dim];
    b[0] = 1.0;
    let prob = ConicProblem { c: svec(&cm), a, b, cones: vec![Cone::Zero(1), Cone::Psd(k)], objective_offset: 0.0 };
    let sol = solve(&prob, &Settings::default()).unwrap();
    let lmin = cm.symmetric_eigen().eigenvalues.min();
    println!("status {:?}, objective {:.9}, lambda_min {lmin:.9}", sol.status, sol.primal_obj);
    println!("X = {:.4}", smat(&sol.x, k));
}
