use nalgebra::DVector;
use num_complex::Complex64 as C64;
use prymlab::curve::{make_prym_data, DoubleCoverCurve};
use prymlab::identity::{recover, verify, Sampler};
use prymlab::theta::ThetaPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let c = |re: f64, im: f64| C64::new(re, im);
    let roots: Vec<C64> = [-2.0, -1.0, 1.0, 2.0].iter().map(|&v| c(v, 0.0)).collect();
    let curve = DoubleCoverCurve::from_roots(&roots).unwrap();
    let data = make_prym_data(&curve, [c(0.3, 0.0), c(0.7, 0.2), c(0.0, 1.1)], c(0.8, 0.3), 64).unwrap();
    let policy = ThetaPolicy::default();
    let mut sampler = Sampler::new(ChaCha8Rng::seed_from_u64(42));
    let (k, _) = recover::recover_constants_fit(&data, &policy, &mut sampler).unwrap();
    let system = verify::prym_tau_system(&data, &k, &policy);

    // First: does the continuum system satisfy taud at divisor points?
    let mut s2 = Sampler::new(ChaCha8Rng::seed_from_u64(29));
    let pts = prymlab::identity::sample_divisor_points(&data.pi, &policy, &mut s2, 4, 1e-3).unwrap();
    for (n, nu) in [(0i64, 0u8), (0, 1), (1, 0), (1, 1)] {
        let z = verify::tau_divisor_point(&data, &pts[0], n, nu);
        println!("n={n} nu={nu}: taud = {:.3e}", system.taud_residual(n, nu, &z));
        let (rels, red) = system.residue_relations(n, nu, &z);
        println!("   r1..r4 = {:.3e} {:.3e} {:.3e} {:.3e}  reduction = {:.3e}", rels[0], rels[1], rels[2], rels[3], red);
        println!("   recursion = {:.3e}", system.recursion_consistency(n, nu, &z));
    }
    // Second: does (laxdd1) hold for the continuum psi at generic z?
    let z = s2.z(&data.pi);
    for (n, nu) in [(0i64, 0u8), (0, 1), (2, 0), (-1, 1)] {
        let nv = 1 - nu;
        let tau = &system.tau;
        let alpha = &system.alpha;
        let psi = |nn: i64, vv: u8, zz: &DVector<C64>| (alpha)(nn, vv, zz) / (tau)(nn, vv, zz);
        let zv = DVector::from_fn(1, |i, _| z[i] + data.v[i]);
        let u = system.c * (tau)(n + 1, nv, &z) * (tau)(n, nv, &zv)
            / ((tau)(n + 1, nu, &zv) * (tau)(n, nu, &z));
        let lhs = psi(n + 1, nu, &zv) - u * (psi(n + 1, nv, &z) - psi(n, nv, &zv)) - psi(n, nu, &z);
        let scale = psi(n + 1, nu, &zv).norm().max((u * psi(n + 1, nv, &z)).norm());
        println!("laxdd1 n={n} nu={nu}: rel defect {:.3e}", lhs.norm() / scale);
    }
}
