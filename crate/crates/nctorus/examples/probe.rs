use nalgebra::DMatrix;
use nctorus::algebra::AlgebraElement;
use nctorus::lattice::LatticeSpec;
use num_complex::Complex64;

// Re-implement a tiny Lanczos trace to debug convergence behavior.
fn main() {
    let theta = std::f64::consts::SQRT_2 - 1.0;
    let primal = LatticeSpec::primal(theta).unwrap();
    let u1 = AlgebraElement::u1(primal);
    let u2 = AlgebraElement::u2(primal);
    let a = AlgebraElement::delta(primal)
        .add(&u1.add(&u1.involution()).scale(Complex64::new(0.23, 0.0)))
        .add(&u2.add(&u2.involution()).scale(Complex64::new(0.17, 0.0)));
    let r = 13i64;
    let m = nctorus::spectral::left_regular_matrix(&a, r).unwrap();
    let herm = (m.clone() + m.adjoint()).scale(0.5);
    let dim = herm.nrows();
    // plain full-reorth Lanczos on the dense matrix
    let mut state = 0x12345678u64;
    let mut v: Vec<Complex64> = (0..dim).map(|_| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Complex64::new(((state >> 11) as f64 / (1u64<<53) as f64) - 0.5, 0.0)
    }).collect();
    let nrm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= nrm);
    let mut basis: Vec<Vec<Complex64>> = vec![];
    let mut alphas = vec![]; let mut betas: Vec<f64> = vec![];
    for step in 0..200usize {
        // w = H v
        let dv = nalgebra::DVector::from_vec(v.clone());
        let wv = &herm * dv;
        let mut w: Vec<Complex64> = wv.iter().cloned().collect();
        let alpha: f64 = v.iter().zip(&w).map(|(a,b)| (a.conj()*b).re).sum();
        alphas.push(alpha); basis.push(v.clone());
        for (wi, vi) in w.iter_mut().zip(&v) { *wi -= Complex64::new(alpha,0.0)*vi; }
        if let Some(bp) = betas.last() {
            let prev = &basis[basis.len()-2];
            for (wi, vi) in w.iter_mut().zip(prev) { *wi -= Complex64::new(*bp,0.0)*vi; }
        }
        for b in &basis {
            let proj: Complex64 = b.iter().zip(&w).map(|(bi,wi)| bi.conj()*wi).sum();
            for (wi,bi) in w.iter_mut().zip(b) { *wi -= proj*bi; }
        }
        let beta: f64 = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if step % 20 == 0 || step == 199 {
            let k = alphas.len();
            let mut tri = DMatrix::<f64>::zeros(k,k);
            for i in 0..k { tri[(i,i)] = alphas[i]; if i+1<k { tri[(i,i+1)] = betas[i]; tri[(i+1,i)] = betas[i]; } }
            let eg = tri.symmetric_eigen();
            let lo = eg.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = eg.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!("k={k:3} lo={lo:.12} hi={hi:.12} beta={beta:.3e}");
        }
        if beta < 1e-12 { break; }
        betas.push(beta);
        v = w.iter().map(|c| c / Complex64::new(beta,0.0)).collect();
    }
    let eig = herm.symmetric_eigen();
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("dense lo={lo:.12} hi={hi:.12}");
}
