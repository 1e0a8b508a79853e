use num_complex::Complex64;
use thinbasis_core::expsum::{p_minus, FrequencyTable, Variant, WeylSumSpec};
use thinbasis_core::numtheory::linear_fit;
use thinbasis_core::randbasis::{expected_r0, expected_rplus, BasisParams};
use thinbasis_core::repcount::{f_coefficient, rep_vs_asymptotic, Growth};
use thinbasis_core::singular::{sing_series_euler, QSumEvaluator};

#[test]
fn singular_series_tail_decay() {
    let ev = QSumEvaluator::new(2, 9, 400).unwrap();
    let qs = [25u64, 50, 100, 200];
    let mut ys = vec![0.0; qs.len()];
    for n in 1..=30i128 {
        let partial = ev.partial_sums(n);
        for (i, &q) in qs.iter().enumerate() {
            ys[i] += (partial[2 * q as usize - 1] - partial[q as usize - 1]).abs() / 30.0;
        }
    }
    let lx: Vec<f64> = qs.iter().map(|&q| (q as f64).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, _) = linear_fit(&lx, &ly);
    // Q^{-2-1/k} is an upper bound; Gauss-sum cancellation gives ~Q^{-3} for k = 2
    assert!(ys.windows(2).all(|w| w[1] < w[0]), "{ys:?}");
    assert!(slope <= -2.5 + 0.5, "slope {slope}");
}

#[test]
fn singular_partial_sums_settle() {
    let ev = QSumEvaluator::new(2, 9, 500).unwrap();
    for n in [1i128, 17, 50, 99] {
        let partial = ev.partial_sums(n);
        let tail = &partial[199..];
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 1e-2);
    }
}

#[test]
fn euler_factors_approach_one() {
    let v = sing_series_euler(&[1], 2, 9, 1e-9, 6).unwrap().remove(0);
    let far: Vec<f64> = v.factors.iter().filter(|f| f.p > 18).map(|f| (f.chi - 1.0).abs()).collect();
    assert!(far.len() > 5);
    assert!(far.windows(2).all(|w| w[1] < w[0]));
    for n in 1..=100 {
        let s = sing_series_euler(&[n], 2, 9, 1e-9, 6).unwrap().remove(0);
        assert!(s.value > 0.0);
    }
}

#[test]
fn f_coefficient_matches_quadrature() {
    let (k, s, big_n) = (2u32, 5u32, 700u64);
    let p = (2.0 * big_n as f64).sqrt();
    let r = 7.0;
    let a = [2u64, 1, 3];
    let d = s - a.len() as u32;
    let tilde = FrequencyTable::from_spec(&WeylSumSpec { k, s, p, r, variant: Variant::Truncated }).unwrap();
    let plain = FrequencyTable::from_spec(&WeylSumSpec { k, s, p, r, variant: Variant::Weighted }).unwrap();
    assert!(p_minus(p, k, s) > 1.0);
    let g = 1usize << 20;
    for m in [900u64, 1000, 1234] {
        let exact = f_coefficient(d, &a, m, big_n, k, s, r).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..g {
            let alpha = i as f64 / g as f64;
            let mut v = tilde.eval_scaled(alpha, a[0]);
            for &aj in &a[1..] {
                v *= plain.eval_scaled(alpha, aj);
            }
            let phase = ((m as u128 * i as u128) % g as u128) as f64 / g as f64;
            acc += v * Complex64::from_polar(1.0, -std::f64::consts::TAU * phase);
        }
        let quad = acc.re / g as f64;
        assert!((quad - exact.value).abs() < 1e-4, "m = {m}: {quad} vs {}", exact.value);
    }
}

#[test]
fn variants_nest() {
    let rows = rep_vs_asymptotic(2, 9, 0.5, &[20_000, 60_000], Growth::log(), 100).unwrap();
    for row in rows {
        assert!(row.r >= row.r_phi);
        assert!(row.r >= row.r_phi_eta);
        assert!(row.ratio.is_finite() && row.ratio > 0.0);
    }
}

#[test]
fn expected_r0_share_shrinks() {
    // at reachable n the small-x cutoff is 1, so E[R^0] itself still grows;
    // its share of the off-diagonal mass is what visibly decays
    let p = BasisParams::new(2, 9, 0.5, Growth::log());
    let tau0 = p.tau0().unwrap();
    let ns = [10_000u64, 50_000, 250_000];
    let share: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let z = expected_r0(n, &p, tau0).unwrap();
            let plus = expected_rplus(n, &p, tau0).unwrap();
            assert!(z.is_finite() && z >= -1e-9);
            z / (z + plus)
        })
        .collect();
    eprintln!("E[R^0] share: {share:?}");
    assert!(share.windows(2).all(|w| w[1] < w[0]));
    // no 9 distinct self-smooth squares including 1 sum to 2000
    assert!(expected_r0(2_000, &p, tau0).unwrap().abs() < 1e-9);
}
