use super::*;
use crate::keystream::{BitStream, KeyChain, Seed};
use crate::sensing::{encode, perturbation_of, MatrixChain, SensingConfig};
use crate::signals::{sample_signal, CoefficientLaw, SignalModel};

struct Instance {
    x: Vec<f64>,
    support: Vec<usize>,
    frame1: MeasurementFrame,
    a0: EncodingMatrix,
    a1: EncodingMatrix,
    genie_gamma: f64,
}

fn instance(m: usize, n: usize, k: usize, eta: f64, seed: u64, basis: &OrthonormalBasis) -> Instance {
    let keys = KeyChain::derive(Seed(seed), 2).unwrap();
    let cfg = SensingConfig::new(m, n, alloc::vec![eta]).unwrap();
    let chain = MatrixChain::generate(&keys, &cfg, 1, 0).unwrap();
    let a0 = chain.class_matrix(0).unwrap();
    let a1 = chain.class_matrix(1).unwrap();
    let model = SignalModel::new(basis.clone(), k, CoefficientLaw::Gaussian, None).unwrap();
    let smp = sample_signal(&model, &mut BitStream::new(Seed(seed).child(99))).unwrap();
    let frame1 = encode(&a1, &smp.x, false).unwrap();
    let da = perturbation_of(&a0, &chain.flips()[0]).unwrap();
    let mut dax = alloc::vec![0.0; m];
    da.apply(&smp.x, &mut dax);
    Instance {
        x: smp.x,
        support: smp.support,
        frame1,
        a0,
        a1,
        genie_gamma: math::norm2(&dax),
    }
}

fn support_of(s: &[f64], k: usize) -> Vec<usize> {
    let mut idx = largest(s, k);
    idx.sort_unstable();
    idx
}

#[test]
fn rsnr_hand_values() {
    let x = [1.0, 0.0];
    assert_eq!(rsnr(&x, &x).unwrap(), RSNR_CAP_DB);
    assert!((rsnr(&x, &[0.0, 0.0]).unwrap()).abs() < 1e-12);
    let e = 0.0109f64.sqrt();
    let r = rsnr(&x, &[1.0 - e, 0.0]).unwrap();
    assert!((r - 19.6257).abs() < 1e-3, "{r}");
    assert!(rsnr(&[0.0, 0.0], &x).is_err());
    assert!(rsnr(&x, &[1.0]).is_err());
}

#[test]
fn arsnr_hand_values() {
    // ratios 10 and 1000
    let a = (alloc::vec![1.0], alloc::vec![1.0 - 10f64.powf(-0.5)]);
    let b = (alloc::vec![1.0], alloc::vec![1.0 - 10f64.powf(-1.5)]);
    let v = arsnr(&[a.clone(), b]).unwrap();
    assert!((v - 10.0 * 505f64.log10()).abs() < 1e-9);
    assert!((v - 27.03).abs() < 0.01);
    let single = arsnr(std::slice::from_ref(&a)).unwrap();
    assert!((single - rsnr(&a.0, &a.1).unwrap()).abs() < 1e-12);
    assert!(arsnr::<Vec<f64>, Vec<f64>>(&[]).is_err());
    assert!((arsnr_from_db(&[10.0, 30.0]).unwrap() - v).abs() < 1e-9);
}

#[test]
fn zero_measurements_give_zero() {
    let basis = OrthonormalBasis::identity(16).unwrap();
    let a = crate::sensing::gen_matrix(
        &KeyChain::derive(Seed(1), 1).unwrap(),
        &SensingConfig::new(8, 16, Vec::new()).unwrap(),
        0,
        0,
    )
    .unwrap();
    let frame = encode(&a, &[0.0; 16], false).unwrap();
    let p = RecoveryProblem::new(&frame, &a, &basis, 0.0, Some(2)).unwrap();
    let b = solve_bpdn(&p).unwrap();
    assert!(b.s_hat.iter().all(|&v| v == 0.0) && b.converged);
    let c = solve_cosamp(&p).unwrap();
    assert!(c.s_hat.iter().all(|&v| v == 0.0));
    assert_eq!(c.iterations, 1);
}

#[test]
fn bpdn_exact_recovery_small() {
    let basis = OrthonormalBasis::dct2(64).unwrap();
    for seed in 0..10 {
        let inst = instance(32, 64, 3, 0.0, seed, &basis);
        let p = RecoveryProblem::new(&inst.frame1, &inst.a1, &basis, 0.0, None).unwrap();
        let r = solve_bpdn(&p).unwrap();
        assert!(r.converged);
        let q = rsnr(&inst.x, &r.x_hat).unwrap();
        assert!(q > 80.0, "seed {seed}: {q} dB");
        let xh = basis.synthesize(&r.s_hat);
        assert!(xh.iter().zip(&r.x_hat).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}

#[test]
fn bpdn_genie_feasibility() {
    let basis = OrthonormalBasis::dct2(64).unwrap();
    for seed in 0..10 {
        let inst = instance(32, 64, 3, 0.05, seed, &basis);
        let p = RecoveryProblem::new(&inst.frame1, &inst.a0, &basis, inst.genie_gamma, None).unwrap();
        let r = solve_bpdn(&p).unwrap();
        assert!(r.converged);
        assert!(r.residual <= inst.genie_gamma * (1.0 + 1e-3), "{} > {}", r.residual, inst.genie_gamma);
    }
}

#[test]
fn bpdn_l1_optimality_probe() {
    // Feasible perturbations along the null space of Phi never lower ||s||_1.
    let basis = OrthonormalBasis::identity(48).unwrap();
    let inst = instance(24, 48, 3, 0.05, 5, &basis);
    let p = RecoveryProblem::new(&inst.frame1, &inst.a0, &basis, inst.genie_gamma, None).unwrap();
    let r = solve_bpdn(&p).unwrap();
    let phi = p.dictionary().clone();
    let pinv = PseudoInverse::new(&phi).unwrap();
    let l1 = |s: &[f64]| s.iter().map(|v| v.abs()).sum::<f64>();
    let base = l1(&r.s_hat);
    let mut stream = BitStream::new(Seed(77));
    for _ in 0..20 {
        let d = stream.normal_vec(48);
        // Project onto Ker(Phi): d - Phi^+ Phi d.
        let pd = phi.matvec(&d);
        let mut back = alloc::vec![0.0; 48];
        pinv.apply(&pd, &mut back);
        let dir: Vec<f64> = d.iter().zip(&back).map(|(a, b)| a - b).collect();
        let scale = 1e-3 * math::norm2(&r.s_hat) / math::norm2(&dir);
        let probe: Vec<f64> = r.s_hat.iter().zip(&dir).map(|(s, v)| s + scale * v).collect();
        assert!(l1(&probe) >= base * (1.0 - 1e-6));
    }
}

#[test]
fn cosamp_exact_recovery() {
    let basis = OrthonormalBasis::identity(128).unwrap();
    let mut ok = 0;
    for seed in 0..100 {
        let inst = instance(64, 128, 5, 0.0, 1000 + seed, &basis);
        let p = RecoveryProblem::new(&inst.frame1, &inst.a1, &basis, 0.0, Some(5)).unwrap();
        let r = solve_cosamp(&p).unwrap();
        if support_of(&r.s_hat, 5) == inst.support && rsnr(&inst.x, &r.x_hat).unwrap() > 80.0 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn cosamp_guards() {
    let basis = OrthonormalBasis::identity(32).unwrap();
    let inst = instance(16, 32, 2, 0.0, 3, &basis);
    let missing = RecoveryProblem::new(&inst.frame1, &inst.a1, &basis, 0.0, None).unwrap();
    assert!(solve_cosamp(&missing).is_err());
    let too_big = RecoveryProblem::new(&inst.frame1, &inst.a1, &basis, 0.0, Some(16)).unwrap();
    assert!(solve_cosamp(&too_big).is_err());
}

#[test]
fn scaled_frames_decode() {
    let basis = OrthonormalBasis::dct2(64).unwrap();
    let inst = instance(32, 64, 3, 0.0, 4, &basis);
    let scaled = encode(&inst.a1, &inst.x, true).unwrap();
    let p = RecoveryProblem::new(&scaled, &inst.a1, &basis, 0.0, Some(3)).unwrap();
    assert!(rsnr(&inst.x, &solve_bpdn(&p).unwrap().x_hat).unwrap() > 80.0);
    assert!(rsnr(&inst.x, &solve_cosamp(&p).unwrap().x_hat).unwrap() > 80.0);
}

#[test]
fn first_class_beats_second_class() {
    let basis = OrthonormalBasis::dct2(64).unwrap();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for seed in 0..50 {
        let inst = instance(32, 64, 3, 0.03, 500 + seed, &basis);
        let p1 = RecoveryProblem::new(&inst.frame1, &inst.a1, &basis, 0.0, None).unwrap();
        let p0 = RecoveryProblem::new(&inst.frame1, &inst.a0, &basis, inst.genie_gamma, None).unwrap();
        first.push(rsnr(&inst.x, &solve_bpdn(&p1).unwrap().x_hat).unwrap());
        second.push(rsnr(&inst.x, &solve_bpdn(&p0).unwrap().x_hat).unwrap());
    }
    first.sort_by(f64::total_cmp);
    second.sort_by(f64::total_cmp);
    assert!(first[25] > second[25], "{} vs {}", first[25], second[25]);
}

#[test]
fn largest_breaks_ties_by_index() {
    assert_eq!(largest(&[1.0, -2.0, 2.0, 0.5], 2), alloc::vec![1, 2]);
    assert_eq!(largest(&[1.0, 1.0, 1.0], 2), alloc::vec![0, 1]);
}
