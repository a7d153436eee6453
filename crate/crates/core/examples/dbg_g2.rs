use num_complex::Complex64 as C64;
use prymlab::curve::{make_prym_data, DoubleCoverCurve};
use prymlab::identity::{recover, verify, Sampler};
use prymlab::theta::ThetaPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let c = |re: f64, im: f64| C64::new(re, im);
    let roots: Vec<C64> = (1..=6).map(|v| c(v as f64, 0.0)).collect();
    let curve = DoubleCoverCurve::from_roots(&roots).unwrap();
    let data = make_prym_data(&curve, [c(0.6, 0.0), c(1.4, 0.3), c(0.0, 0.5)], c(1.1, 0.8), 64).unwrap();
    println!("g = {}, Pi = {:?} ({:.1?})", data.g(), data.pi.matrix().as_slice(), t0.elapsed());
    let policy = ThetaPolicy::default();
    let mut sampler = Sampler::new(ChaCha8Rng::seed_from_u64(42));

    // W-sign trial + quadrisecant recovery
    match recover::recover_with_w_sign(&data, &policy, &mut sampler) {
        Ok((data2, k, sign, diag)) => {
            println!("recovered via {} w_sign={sign} probe={:.3e} coeff_resid={:.3e} ({:.1?})",
                diag.route, diag.probe_residual, diag.coefficient_residual, t0.elapsed());
            let mut s2 = Sampler::new(ChaCha8Rng::seed_from_u64(7));
            let rep = verify::verify_a(&data2, &k, &policy, (0, 5), (0, 5), 25, &mut s2, 1e-6).unwrap();
            println!("verify_A g2: max {:.3e} pass {} ({:.1?})", rep.max(), rep.pass, t0.elapsed());
            let repb = verify::verify_b(&data2, Some(&k), &policy, 1e-6).unwrap();
            println!("verify_B g2: max {:.3e} pass {}", repb.max(), repb.pass);
            let pts = prymlab::identity::sample_divisor_points(&data2.pi, &policy, &mut s2, 10, 1e-3).unwrap();
            let repc = verify::verify_c(&data2, &k, &policy, &pts, 1e-6).unwrap();
            println!("verify_C g2: max {:.3e} pass {}", repc.max(), repc.pass);
            let repq = verify::verify_quad(&data2, &k, &policy, 10, &mut s2, 1e-6).unwrap();
            println!("verify_quad g2: max {:.3e} pass {}", repq.max(), repq.pass);
            println!("total {:.1?}", t0.elapsed());
        }
        Err(e) => println!("RECOVERY FAILED: {e}"),
    }
}
