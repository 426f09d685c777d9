use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};
use rand::Rng;

use hdp_slds::distributions::{
    info_to_moment, is_symmetric_pd, sample_dirichlet, sample_inverse_wishart, InverseWishartParams,
};
use hdp_slds::dynamics::{
    ard_posterior, mniw_posterior, mniw_sufficient_stats, sample_ard_dynamic_matrix, sample_mniw_posterior,
    sample_mniw_prior, sample_process_mean, sample_sigma_given_a, ArdState, MniwHyper, ModeDynamics, NormalPrior,
    PseudoObsRegression,
};
use hdp_slds::eval::{hamming_with_optimal_mapping, optimal_label_mapping, windowed_roc};
use hdp_slds::hdp::{
    resample_transitions, sample_log_categorical, sample_transition_row, stick_breaking, HdpHyper, HdpPriors,
    TransitionCounts, TransitionSet,
};
use hdp_slds::linalg::{Mat, Vector};
use hdp_slds::modes::{forward_sample_modes_with, hmm_backward_messages, ModeMessages};
use hdp_slds::rng::chain_rng;
use hdp_slds::states::{
    backward_filter_from_evidence, check_bank_psd, local_evidence, BackwardForm,
};

fn random_spd<R: Rng>(n: usize, rng: &mut R) -> Mat {
    let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + Mat::identity(n, n) * 0.5
}

fn random_regression<R: Rng>(t_len: usize, d: usize, m: usize, l: usize, rng: &mut R) -> PseudoObsRegression {
    let psi = (0..t_len).map(|_| Vector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0))).collect();
    let psibar = (0..t_len).map(|_| Vector::from_fn(m, |_, _| rng.gen_range(-2.0..2.0))).collect();
    let z = (0..t_len).map(|_| rng.gen_range(0..l)).collect();
    PseudoObsRegression::new(psi, psibar, z).unwrap()
}

fn simplex_err(v: &[f64]) -> f64 {
    if v.iter().any(|&x| x < 0.0) {
        return f64::INFINITY;
    }
    (v.iter().sum::<f64>() - 1.0).abs()
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level 1e-3.
fn ks_critical(n: usize, m: usize) -> f64 {
    (-(0.5e-3f64).ln() / 2.0).sqrt() * ((n + m) as f64 / (n * m) as f64).sqrt()
}

fn same_law(a: &[f64], b: &[f64], what: &str) -> Result<(), String> {
    let d = ks_statistic(a, b);
    if d < ks_critical(a.len(), b.len()) {
        Ok(())
    } else {
        Err(format!("{what}: KS statistic {d}"))
    }
}


fn check<S: Strategy>(strategy: &S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config::with_cases(48);
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng).run(strategy, test).map_err(|e| e.to_string())
}

pub fn sampled_covariances_are_pd() -> Result<(), String> {
    check(&(any::<u64>(), 1usize..5, 0.0f64..6.0), |(seed, n, extra)| {
        let mut rng = chain_rng(seed, 0);
        let iw = InverseWishartParams::new(n as f64 + 1.0 + extra, random_spd(n, &mut rng)).unwrap();
        prop_assert!(is_symmetric_pd(&sample_inverse_wishart(&iw, &mut rng).unwrap()));
        let hyper = MniwHyper {
            m: Mat::zeros(n, n),
            k: random_spd(n, &mut rng),
            n0: n as f64 + 2.0 + extra,
            s0: random_spd(n, &mut rng),
        };
        prop_assert!(is_symmetric_pd(&sample_mniw_prior(&hyper, &mut rng).unwrap().sigma));
        let reg = random_regression(12, n, n, 2, &mut rng);
        let stats = mniw_sufficient_stats(&reg, 0, &hyper, None).unwrap();
        let post = sample_mniw_posterior(&stats, &hyper, &mut rng).unwrap();
        prop_assert!(is_symmetric_pd(&post.sigma));
        let s = sample_sigma_given_a(&reg, 1, &post.a, None, &iw, &mut rng).unwrap();
        prop_assert!(is_symmetric_pd(&s));
        Ok(())
    })
}

pub fn weights_stay_on_the_simplex() -> Result<(), String> {
    check(&(any::<u64>(), 1e-3f64..50.0, 1usize..30, 1e-4f64..5.0), |(seed, gamma, l, conc)| {
        let mut rng = chain_rng(seed, 0);
        let beta = stick_breaking(gamma, l, &mut rng).unwrap();
        prop_assert!(simplex_err(beta.as_slice()) < 1e-12);
        let d = sample_dirichlet(&vec![conc; l], &mut rng).unwrap();
        prop_assert!(simplex_err(d.as_slice()) < 1e-12);

        let z: Vec<usize> = (0..40).map(|_| rng.gen_range(0..l)).collect();
        let counts = TransitionCounts::from_modes(&z, l).unwrap();
        let hyper = HdpHyper::new(rng.gen_range(0.1..5.0), gamma, rng.gen_range(0.0..20.0)).unwrap();
        let trans = TransitionSet { beta: beta.clone(), pi: Mat::from_element(l, l, 1.0 / l as f64) };
        let (next, _) = resample_transitions(&counts, &trans, &hyper, &HdpPriors::default(), true, &mut rng).unwrap();
        prop_assert!(simplex_err(next.beta.as_slice()) < 1e-12);
        for j in 0..l {
            let row: Vec<f64> = next.pi.row(j).iter().copied().collect();
            prop_assert!(simplex_err(&row) < 1e-12);
        }
            Ok(())
    })
}

pub fn identical_seeds_give_identical_draws() -> Result<(), String> {
    check(&(any::<u64>(),), |(seed,)| {
        let draw = |seed| {
            let mut rng = chain_rng(seed, 3);
            let beta = stick_breaking(2.0, 8, &mut rng).unwrap();
            let hyper = HdpHyper::new(1.0, 2.0, 3.0).unwrap();
            let row = sample_transition_row(&beta, &hyper, &[1, 0, 2, 0, 0, 0, 0, 0], 2, &mut rng).unwrap();
            let iw = InverseWishartParams::new(5.0, Mat::identity(2, 2)).unwrap();
            (beta, row, sample_inverse_wishart(&iw, &mut rng).unwrap())
        };
        prop_assert_eq!(draw(seed), draw(seed));
            Ok(())
    })
}

pub fn ard_shrinkage_is_monotone() -> Result<(), String> {
    check(&(any::<u64>(), 0usize..3, 1.0f64..100.0), |(seed, g, factor)| {
        let mut rng = chain_rng(seed, 0);
        let reg = random_regression(15, 3, 3, 1, &mut rng);
        let sigma = random_spd(3, &mut rng);
        let mut ard = ArdState::for_slds(3);
        ard.alphas = (0..3).map(|_| rng.gen_range(0.01..10.0)).collect();
        let norm = |ard: &ArdState| {
            let (mean, _) = info_to_moment(&ard_posterior(&reg, 0, &sigma, ard, None).unwrap()).unwrap();
            mean.rows(3 * g, 3).norm()
        };
        let before = norm(&ard);
        ard.alphas[g] *= factor;
        prop_assert!(norm(&ard) <= before * (1.0 + 1e-9) + 1e-12);
            Ok(())
    })
}

pub fn flat_priors_recover_least_squares() -> Result<(), String> {
    check(&(any::<u64>(), 1usize..4), |(seed, n)| {
        let mut rng = chain_rng(seed, 0);
        let reg = random_regression(30, n, n, 1, &mut rng);
        let x = Mat::from_fn(n, 30, |i, t| reg.psibar[t][i]);
        let y = Mat::from_fn(n, 30, |i, t| reg.psi[t][i]);
        let ls = (&y * x.transpose()) * (&x * x.transpose()).try_inverse().unwrap();
        let hyper = MniwHyper { m: Mat::zeros(n, n), k: Mat::identity(n, n) * 1e-12, n0: n as f64 + 2.0, s0: Mat::identity(n, n) };
        let stats = mniw_sufficient_stats(&reg, 0, &hyper, None).unwrap();
        let (mniw_mean, _, _) = mniw_posterior(&stats, &hyper).unwrap();
        prop_assert!((&mniw_mean - &ls).amax() < 1e-6);
        let mut ard = ArdState::for_slds(n);
        ard.alphas = vec![1e-12; n];
        let (ard_mean, _) = info_to_moment(&ard_posterior(&reg, 0, &random_spd(n, &mut rng), &ard, None).unwrap()).unwrap();
        let ard_a = Mat::from_column_slice(n, n, ard_mean.as_slice());
        prop_assert!((&ard_a - &ls).amax() < 1e-6);
            Ok(())
    })
}

pub fn message_scaling_leaves_draws_unchanged() -> Result<(), String> {
    check(&(any::<u64>(), 1usize..12, 1usize..5), |(seed, t_len, l)| {
        let mut rng = chain_rng(seed, 0);
        let loglik = Mat::from_fn(t_len, l, |_, _| rng.gen_range(-30.0..0.0));
        let pi = Mat::from_fn(l, l, |_, _| rng.gen_range(0.05..1.0));
        let pi = Mat::from_fn(l, l, |j, k| pi[(j, k)] / pi.row(j).sum());
        let trans = TransitionSet { beta: Vector::from_element(l, 1.0 / l as f64), pi };
        let msgs = hmm_backward_messages(&loglik, &trans.pi);
        let shifts: Vec<f64> = (0..t_len).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let scaled = ModeMessages { log_m: Mat::from_fn(t_len, l, |t, k| msgs.log_m[(t, k)] + shifts[t]) };
        let mut r1 = chain_rng(seed, 1);
        let mut r2 = chain_rng(seed, 1);
        let a = forward_sample_modes_with(&loglik, &msgs, &trans, |w| sample_log_categorical(w, &mut r1)).unwrap();
        let b = forward_sample_modes_with(&loglik, &scaled, &trans, |w| sample_log_categorical(w, &mut r2)).unwrap();
        prop_assert_eq!(a, b);
            Ok(())
    })
}

pub fn relabeling_permutes_the_mode_draw() -> Result<(), String> {
    check(&(any::<u64>(), 1usize..15, Just(vec![0usize, 1, 2, 3]).prop_shuffle()), |(seed, t_len, perm)| {
        let l = perm.len();
        let mut inv = vec![0; l];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mut rng = chain_rng(seed, 0);
        let loglik = Mat::from_fn(t_len, l, |_, _| rng.gen_range(-5.0..0.0));
        let raw = Mat::from_fn(l, l, |_, _| rng.gen_range(0.05..1.0));
        let trans = TransitionSet {
            beta: Vector::from_fn(l, |k, _| (k + 1) as f64 / 10.0),
            pi: Mat::from_fn(l, l, |j, k| raw[(j, k)] / raw.row(j).sum()),
        };
        let ploglik = Mat::from_fn(t_len, l, |t, k| loglik[(t, inv[k])]);
        let ptrans = TransitionSet {
            beta: Vector::from_fn(l, |k, _| trans.beta[inv[k]]),
            pi: Mat::from_fn(l, l, |j, k| trans.pi[(inv[j], inv[k])]),
        };
        let mut r1 = chain_rng(seed, 1);
        let mut r2 = chain_rng(seed, 1);
        let a = forward_sample_modes_with(&loglik, &hmm_backward_messages(&loglik, &trans.pi), &trans, |w| {
            sample_log_categorical(w, &mut r1)
        })
        .unwrap();
        let b = forward_sample_modes_with(&ploglik, &hmm_backward_messages(&ploglik, &ptrans.pi), &ptrans, |w| {
            let orig: Vec<f64> = (0..l).map(|k| w[perm[k]]).collect();
            sample_log_categorical(&orig, &mut r2).map(|k| perm[k])
        })
        .unwrap();
        prop_assert_eq!(a.iter().map(|&k| perm[k]).collect::<Vec<_>>(), b);
            Ok(())
    })
}

pub fn backward_forms_agree_and_stay_psd() -> Result<(), String> {
    check(&(any::<u64>(), 1usize..12, 1usize..4, 1usize..3), |(seed, t_len, n, d)| {
        let d = d.min(n);
        let mut rng = chain_rng(seed, 0);
        let dynamics: Vec<ModeDynamics> = (0..2)
            .map(|_| ModeDynamics {
                a: Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)),
                sigma: random_spd(n, &mut rng),
                mu: if rng.gen_bool(0.5) { Some(Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))) } else { None },
            })
            .collect();
        let y: Vec<Vector> = (0..t_len).map(|_| Vector::from_fn(d, |_, _| rng.gen_range(-3.0..3.0))).collect();
        let z: Vec<usize> = (0..t_len).map(|_| rng.gen_range(0..2)).collect();
        let local = local_evidence(&y, n, &[random_spd(d, &mut rng)]).unwrap();
        let stable = backward_filter_from_evidence(&local, &z, &dynamics, BackwardForm::Stable).unwrap();
        let direct = backward_filter_from_evidence(&local, &z, &dynamics, BackwardForm::Direct).unwrap();
        check_bank_psd(&stable).unwrap();
        check_bank_psd(&direct).unwrap();
        for (s, r) in stable.predicted.iter().zip(&direct.predicted).chain(std::iter::once((&stable.initial, &direct.initial))) {
            let scale = 1.0 + s.lambda.amax();
            prop_assert!((&s.lambda - &r.lambda).amax() < 1e-8 * scale);
            prop_assert!((&s.theta - &r.theta).amax() < 1e-8 * (1.0 + s.theta.amax()));
        }
            Ok(())
    })
}

pub fn hamming_is_a_relabel_invariant_pseudo_metric() -> Result<(), String> {
    check(&(prop::collection::vec(0usize..5, 1..30), any::<u64>(), Just(vec![0usize, 1, 2, 3, 4]).prop_shuffle()), |(a, seed, perm)| {
        let mut rng = chain_rng(seed, 0);
        let b: Vec<usize> = a.iter().map(|_| rng.gen_range(0..4)).collect();
        let c: Vec<usize> = a.iter().map(|_| rng.gen_range(0..6)).collect();
        let d = |x: &[usize], y: &[usize]| hamming_with_optimal_mapping(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&d(&a, &b)));
        let relabeled: Vec<usize> = a.iter().map(|&k| perm[k] * 3 + 1).collect();
        prop_assert!((d(&relabeled, &b) - d(&a, &b)).abs() < 1e-12);
        prop_assert!((d(&b, &relabeled) - d(&b, &a)).abs() < 1e-12);
            Ok(())
    })
}

pub fn assignment_matches_exhaustive_search() -> Result<(), String> {
    check(&(prop::collection::vec((0usize..6, 0usize..6), 1..40),), |(pairs,)| {
        let (ze, zt): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = optimal_label_mapping(&ze, &zt).unwrap();
        prop_assert_eq!(m.overlap, brute_force_overlap(&ze, &zt));
            Ok(())
    })
}

pub fn roc_is_monotone_with_auc_in_unit_interval() -> Result<(), String> {
    check(&(prop::collection::vec(prop_oneof![Just(0.0f64), Just(0.5), 0.0f64..1.0], 4..80), 1usize..5, any::<u64>()), |(prob, window, seed)| {
        let mut rng = chain_rng(seed, 0);
        let t_len = prob.len();
        let window = window.min(t_len / 2);
        let windows = t_len.div_ceil(window);
        let hit = rng.gen_range(0..windows - 1);
        let events = vec![hit * window];
        let roc = windowed_roc(&prob, &events, window).unwrap();
        prop_assert!((0.0..=1.0).contains(&roc.auc));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].threshold < w[0].threshold);
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        let last = roc.points.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            Ok(())
    })
}

fn brute_force_overlap(ze: &[usize], zt: &[usize]) -> usize {
    // Try every map from estimated labels {0..5} into true labels {0..5} ∪ {none}, keeping injectivity.
    fn go(i: usize, used: &mut [bool; 6], map: &mut [Option<usize>; 6], ze: &[usize], zt: &[usize]) -> usize {
        if i == 6 {
            return ze.iter().zip(zt).filter(|(a, b)| map[**a] == Some(**b)).count();
        }
        map[i] = None;
        let mut best = go(i + 1, used, map, ze, zt);
        for j in 0..6 {
            if !used[j] {
                used[j] = true;
                map[i] = Some(j);
                best = best.max(go(i + 1, used, map, ze, zt));
                used[j] = false;
            }
        }
        map[i] = None;
        best
    }
    go(0, &mut [false; 6], &mut [None; 6], ze, zt)
}

pub fn non_sticky_rows_match_plain_hdp_rows() -> Result<(), String> {
    let mut rng = chain_rng(21, 0);
    let beta = Vector::from_vec(vec![0.4, 0.3, 0.2, 0.1]);
    let hyper = HdpHyper::new(3.0, 1.0, 0.0).unwrap();
    let conc: Vec<f64> = beta.iter().map(|b| 3.0 * b).collect();
    let n = 10_000;
    let sticky: Vec<f64> = (0..n)
        .map(|_| sample_transition_row(&beta, &hyper, &[0; 4], 1, &mut rng).unwrap()[1])
        .collect();
    let plain: Vec<f64> = (0..n).map(|_| sample_dirichlet(&conc, &mut rng).unwrap()[1]).collect();
    same_law(&sticky, &plain, "pi_jj with kappa = 0")
}

/// With no observations assigned to a mode, every conditional sampler returns a prior draw.
pub fn empty_modes_reproduce_the_prior() -> Result<(), String> {
    let n = 2;
    let mut rng = chain_rng(22, 0);
    // Every observation belongs to mode 0; mode 1 is empty.
    let psi: Vec<Vector> = (0..20).map(|_| Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))).collect();
    let psibar: Vec<Vector> = (0..20).map(|_| Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))).collect();
    let reg = PseudoObsRegression::new(psi, psibar, vec![0; 20]).unwrap();
    let draws = 10_000;

    let hyper = MniwHyper {
        m: Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.1, -0.3]),
        k: Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        n0: 5.0,
        s0: Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
    };
    let stats = mniw_sufficient_stats(&reg, 1, &hyper, None).unwrap();
    let (mut post_a, mut prior_a, mut post_s, mut prior_s) = (vec![], vec![], vec![], vec![]);
    for _ in 0..draws {
        let p = sample_mniw_posterior(&stats, &hyper, &mut rng).unwrap();
        let q = sample_mniw_prior(&hyper, &mut rng).unwrap();
        post_a.push(p.a[(0, 1)] + p.a[(1, 0)]);
        prior_a.push(q.a[(0, 1)] + q.a[(1, 0)]);
        post_s.push(p.sigma[(0, 0)]);
        prior_s.push(q.sigma[(0, 0)]);
    }
    same_law(&post_a, &prior_a, "MNIW A")?;
    same_law(&post_s, &prior_s, "MNIW Sigma")?;

    let mut ard = ArdState::for_slds(n);
    ard.alphas = vec![0.5, 4.0];
    let sigma = Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
    let (mut post, mut prior) = (vec![], vec![]);
    for _ in 0..draws {
        let a = sample_ard_dynamic_matrix(&reg, 1, &sigma, &ard, None, &mut rng).unwrap();
        post.push(a[(0, 0)] + a[(1, 1)]);
        let a00: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) / 0.5f64.sqrt();
        let a11: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) / 4.0f64.sqrt();
        prior.push(a00 + a11);
    }
    same_law(&post, &prior, "ARD A")?;

    let iw = InverseWishartParams::new(6.0, Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
    let mu_prior = NormalPrior {
        mean: Vector::from_vec(vec![1.0, -1.0]),
        cov: Mat::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]),
    };
    let a = Mat::identity(2, 2) * 0.5;
    let (mut ps, mut qs, mut pm, mut qm) = (vec![], vec![], vec![], vec![]);
    for _ in 0..draws {
        let s = sample_sigma_given_a(&reg, 1, &a, None, &iw, &mut rng).unwrap();
        ps.push(s[(0, 0)] + s[(0, 1)]);
        let s = sample_inverse_wishart(&iw, &mut rng).unwrap();
        qs.push(s[(0, 0)] + s[(0, 1)]);
        pm.push(sample_process_mean(&reg, 1, &a, &sigma, &mu_prior, &mut rng).unwrap()[1]);
        let sd = mu_prior.cov[(1, 1)].sqrt();
        qm.push(mu_prior.mean[1] + sd * rng.sample::<f64, _>(rand_distr::StandardNormal));
    }
    same_law(&ps, &qs, "N-IW-N Sigma")?;
    same_law(&pm, &qm, "N-IW-N mu")
}

/// Every property with its name, in a fixed order.
pub fn all() -> Vec<(&'static str, fn() -> Result<(), String>)> {
    vec![
        ("sampled_covariances_are_pd", sampled_covariances_are_pd),
        ("weights_stay_on_the_simplex", weights_stay_on_the_simplex),
        ("identical_seeds_give_identical_draws", identical_seeds_give_identical_draws),
        ("ard_shrinkage_is_monotone", ard_shrinkage_is_monotone),
        ("flat_priors_recover_least_squares", flat_priors_recover_least_squares),
        ("message_scaling_leaves_draws_unchanged", message_scaling_leaves_draws_unchanged),
        ("relabeling_permutes_the_mode_draw", relabeling_permutes_the_mode_draw),
        ("backward_forms_agree_and_stay_psd", backward_forms_agree_and_stay_psd),
        ("hamming_is_a_relabel_invariant_pseudo_metric", hamming_is_a_relabel_invariant_pseudo_metric),
        ("assignment_matches_exhaustive_search", assignment_matches_exhaustive_search),
        ("roc_is_monotone_with_auc_in_unit_interval", roc_is_monotone_with_auc_in_unit_interval),
        ("non_sticky_rows_match_plain_hdp_rows", non_sticky_rows_match_plain_hdp_rows),
        ("empty_modes_reproduce_the_prior", empty_modes_reproduce_the_prior),
    ]
}
