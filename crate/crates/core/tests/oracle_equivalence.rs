use spinmarket_core::oracle::{detailed_balance_residual, max_abs_diff, null_space, product_form};
use spinmarket_core::{
    build_chain, invariant_measure, moments_general, stationary_moments, stationary_solve, Beta, ModelParams,
    Perturbation, TieRule,
};

fn frozen(n: usize, d: usize, alpha: f64) -> ModelParams<f64> {
    ModelParams::frozen(n, d, alpha).unwrap()
}

/// Full configuration-space chain for a tiny lattice, solved by power iteration,
/// then projected onto the free +1 count. Shares no code with the library.
fn lattice_oracle(n: usize, d: usize, twice_alpha: i64, pert: Perturbation) -> Vec<f64> {
    let size = 2 * d;
    let pinned_plus = pert.k_plus;
    let pinned = pert.k_plus + pert.k_minus;
    let spin = |cfg: u32, x: usize| if cfg >> x & 1 == 1 { 1i64 } else { -1 };
    let valid = |cfg: u32| (0..pinned).all(|x| (spin(cfg, x) == 1) == (x < pinned_plus));
    let configs: Vec<u32> = (0..1u32 << n).filter(|&c| valid(c)).collect();
    let index = |cfg: u32| configs.binary_search(&cfg).unwrap();

    let mut subsets = Vec::new();
    for mask in 0u32..1 << (n - 1) {
        if mask.count_ones() as usize == size {
            subsets.push(mask);
        }
    }
    let per_subset = 1.0 / subsets.len() as f64;

    // transitions[s] = (target, probability)
    let mut transitions: Vec<Vec<(usize, f64)>> = Vec::with_capacity(configs.len());
    for &cfg in &configs {
        let mag: i64 = (0..n).map(|x| spin(cfg, x)).sum();
        let mut out = vec![(index(cfg), pinned as f64 / n as f64)];
        for x in pinned..n {
            let s = spin(cfg, x);
            let others: Vec<usize> = (0..n).filter(|&y| y != x).collect();
            let mut flip = 0.0;
            for &mask in &subsets {
                let sum: i64 = (0..n - 1).filter(|b| mask >> b & 1 == 1).map(|b| spin(cfg, others[b])).sum();
                // 2N h = 2N sum − 2α s |m|
                let scaled = 2 * n as i64 * sum - twice_alpha * s * mag.abs();
                let new = if scaled > 0 {
                    1
                } else if scaled < 0 {
                    -1
                } else {
                    s
                };
                if new != s {
                    flip += per_subset;
                }
            }
            let p = 1.0 / n as f64;
            out.push((index(cfg ^ (1 << x)), p * flip));
            out[0].1 += p * (1.0 - flip);
        }
        transitions.push(out);
    }

    let mut dist = vec![1.0 / configs.len() as f64; configs.len()];
    for _ in 0..200_000 {
        let mut next = vec![0.0; configs.len()];
        for (s, out) in transitions.iter().enumerate() {
            for &(t, p) in out {
                next[t] += dist[s] * p;
            }
        }
        let delta = next.iter().zip(&dist).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        dist = next;
        if delta < 1e-16 {
            break;
        }
    }

    let m = n - pinned;
    let mut by_ell = vec![0.0; m + 1];
    for (&cfg, &p) in configs.iter().zip(&dist) {
        by_ell[cfg.count_ones() as usize - pinned_plus] += p;
    }
    by_ell
}

#[test]
fn configuration_space_chain_matches_product_form() {
    let cases = [
        (6, 1, 8, Perturbation::NONE),
        (7, 1, 9, Perturbation::NONE),
        (8, 1, 10, Perturbation::NONE),
        (8, 2, 10, Perturbation::NONE),
        (8, 1, 10, Perturbation::new(2, 0)),
        (8, 1, 6, Perturbation::new(1, 2)),
        (9, 2, 9, Perturbation::new(1, 1)),
    ];
    for (n, d, twice_alpha, pert) in cases {
        let params = frozen(n, d, twice_alpha as f64 / 2.0);
        let expected = lattice_oracle(n, d, twice_alpha, pert);
        let measure = invariant_measure(&params, pert).unwrap();
        let diff = max_abs_diff(&measure.probs, &expected).unwrap();
        assert!(diff < 1e-9, "n={n} d={d} 2α={twice_alpha} {pert:?}: diff {diff:e}");
    }
}

#[test]
fn both_solvers_agree_with_closed_form() {
    for n in [8, 16, 32, 64] {
        for d in [1, 2] {
            for alpha in [3.0, 5.0, 10.0] {
                let params = frozen(n, d, alpha);
                if !params.is_supercritical() {
                    continue;
                }
                for (kp, km) in [(0, 0), (5, 0), (10, 3)] {
                    let pert = Perturbation::new(kp, km);
                    if pert.validate(n).is_err() {
                        continue;
                    }
                    let chain = build_chain(&params, pert, Beta::Frozen, TieRule::Paper).unwrap();
                    let a = product_form(&chain).unwrap();
                    let b = null_space(&chain).unwrap();
                    assert!(max_abs_diff(&a, &b).unwrap() <= 1e-12);
                    assert!(detailed_balance_residual(&chain, &a) < 1e-15);
                    let measure = invariant_measure(&params, pert).unwrap();
                    assert!(max_abs_diff(&measure.probs, &a).unwrap() <= 1e-10);
                    let from_chain = stationary_moments(&chain, &stationary_solve(&chain).unwrap()).unwrap();
                    assert!(moments_general(&measure).max_scaled_diff(&from_chain) < 1e-10);
                }
            }
        }
    }
}

#[test]
fn finite_beta_chain_is_irreducible_and_solvable() {
    let params = ModelParams::new(24, 2, 5.0, Beta::Finite(1.5), 1.0, 1.0).unwrap();
    let chain = build_chain(&params, Perturbation::new(3, 1), params.beta, TieRule::Paper).unwrap();
    assert_eq!(chain.recurrent_class().unwrap(), (0, 20));
    let pi = stationary_solve(&chain).unwrap();
    assert!(pi.iter().all(|&p| p > 0.0));
    assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
