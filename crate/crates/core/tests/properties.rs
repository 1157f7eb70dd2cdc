use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use plaggm::evaluation::{roc_from_estimates, support_confusion, DEFAULT_ZERO_TOL};
use plaggm::kernel::{
    build_dij, indicator, profile_design, smoother_row, IndicatorSpec, KernelFamily, KernelSpec,
    SmootherOptions,
};
use plaggm::model::node_design;
use plaggm::objective::{assemble_quadratic, ppl_gradient, ppl_value};
use plaggm::simulation::f_of_g;
use plaggm::solver::{fit_single, kkt_violation, soft_threshold, SolverConfig};
use plaggm::{ConfoundedDataset, FlatIndex, SymmetricParam};

fn dataset(n: usize, p: usize) -> impl Strategy<Value = ConfoundedDataset> {
    (
        prop::collection::vec(-3.0f64..3.0, n),
        prop::collection::vec(-2.0f64..2.0, n * p),
    )
        .prop_map(move |(g, z)| ConfoundedDataset::new(g, DMatrix::from_row_slice(n, p, &z)).unwrap())
}

fn param(p: usize) -> impl Strategy<Value = SymmetricParam> {
    prop::collection::vec(-1.0f64..1.0, p * (p + 1) / 2)
        .prop_map(move |flat| SymmetricParam::from_flat(p, &flat).unwrap())
}

fn smoothed(data: &ConfoundedDataset) -> plaggm::kernel::ProfileDesign {
    let ind = IndicatorSpec::soft(0.8).unwrap();
    let spec = KernelSpec::new(KernelFamily::Gaussian, 2.0).unwrap();
    profile_design(data, &ind, &spec, &SmootherOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flat_index_is_a_bijection(p in 1usize..12) {
        let idx = FlatIndex::new(p);
        let mut seen = vec![false; idx.len()];
        for j in 0..p {
            for k in 0..p {
                let m = idx.flat(j, k);
                prop_assert_eq!(m, idx.flat(k, j));
                let (a, b) = idx.pair(m);
                prop_assert_eq!((a.min(b), a.max(b)), (j.min(k), j.max(k)));
                prop_assert_eq!(idx.is_diag(m), j == k);
                seen[m] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn gradient_matches_central_differences(data in dataset(25, 3), theta in param(3)) {
        let pd = smoothed(&data);
        let grad = ppl_gradient(&theta, &pd).unwrap();
        let flat = theta.to_flat();
        for m in 0..flat.len() {
            let h = 1e-5;
            let mut up = flat.clone();
            let mut down = flat.clone();
            up[m] += h;
            down[m] -= h;
            let fup = ppl_value(&SymmetricParam::from_flat(3, &up).unwrap(), &pd).unwrap();
            let fdown = ppl_value(&SymmetricParam::from_flat(3, &down).unwrap(), &pd).unwrap();
            let fd = (fup - fdown) / (2.0 * h);
            prop_assert!((fd - grad[m]).abs() <= 1e-6 * grad[m].abs().max(1.0), "{} vs {}", fd, grad[m]);
        }
    }

    #[test]
    fn objective_is_convex(data in dataset(20, 3), a in param(3), b in param(3), t in 0.0f64..1.0) {
        let pd = smoothed(&data);
        let mix: Vec<f64> = a.to_flat().iter().zip(b.to_flat()).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let mid = ppl_value(&SymmetricParam::from_flat(3, &mix).unwrap(), &pd).unwrap();
        let ends = t * ppl_value(&a, &pd).unwrap() + (1.0 - t) * ppl_value(&b, &pd).unwrap();
        prop_assert!(mid <= ends + 1e-10 * ends.abs().max(1.0));
    }

    #[test]
    fn smoother_reproduces_local_linear_fits(
        data in dataset(30, 3),
        i in 0usize..30,
        j in 0usize..3,
        beta in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let ind = IndicatorSpec::soft(0.5).unwrap();
        let spec = KernelSpec::new(KernelFamily::Gaussian, 1.5).unwrap();
        let s = smoother_row(i, j, &data, &ind, &spec, &SmootherOptions::default()).unwrap();
        let d = build_dij(i, j, &data, &ind, &spec).unwrap();
        let beta = DVector::from_vec(beta);
        let x = node_design(&data, j).unwrap().x;
        let want: f64 = (0..3).map(|k| x[(i, k)] * beta[k]).sum();
        prop_assert!((s.dot(&(d * &beta)) - want).abs() < 1e-10);
    }

    #[test]
    fn indicator_is_even_bounded_and_monotone(k in 0.01f64..5.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let s = IndicatorSpec::soft(k).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert_eq!(indicator(lo, &s), indicator(-lo, &s));
        prop_assert!(indicator(lo, &s) <= indicator(hi, &s));
        prop_assert!(indicator(a, &s) > 0.0 && indicator(a, &s) <= 1.0);
    }

    #[test]
    fn confounding_profile_is_odd(g in -500.0f64..500.0) {
        prop_assume!((g.abs() - 12.0).abs() > 1e-9);
        prop_assert_eq!(f_of_g(-g), -f_of_g(g));
    }

    #[test]
    fn soft_threshold_shrinks(z in -10.0f64..10.0, gamma in 0.0f64..5.0) {
        let s = soft_threshold(z, gamma);
        prop_assert!(s.abs() <= z.abs());
        prop_assert!(s == 0.0 || s.signum() == z.signum());
        prop_assert!(((z - s).abs() - gamma.min(z.abs())).abs() < 1e-12);
    }

    #[test]
    fn solutions_satisfy_kkt(data in dataset(40, 4), frac in 0.05f64..1.0) {
        let qf = assemble_quadratic(&smoothed(&data));
        let lambda = frac * plaggm::solver::lambda_max(&qf).unwrap();
        let fit = fit_single(&qf, lambda, &SymmetricParam::zeros(4), &SolverConfig::default()).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(kkt_violation(&qf, &fit.theta.to_flat(), lambda) < 1e-6);
    }

    #[test]
    fn confusion_and_auc_survive_node_relabelling(
        truth in param(5),
        ests in prop::collection::vec(param(5), 1..6),
        perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
        cut in 0.0f64..0.8,
    ) {
        let sparsify = |t: &SymmetricParam| {
            let mut out = t.clone();
            for (j, k) in t.index().pairs().collect::<Vec<_>>() {
                if t.get(j, k).abs() < cut {
                    out.set(j, k, 0.0);
                }
            }
            out
        };
        let relabel = |t: &SymmetricParam| {
            let mut out = SymmetricParam::zeros(5);
            for j in 0..5 {
                for k in j..5 {
                    out.set(perm[j], perm[k], t.get(j, k));
                }
            }
            out
        };
        let truth = sparsify(&truth);
        let ests: Vec<SymmetricParam> = ests.iter().map(sparsify).collect();
        let moved: Vec<SymmetricParam> = ests.iter().map(relabel).collect();
        for (e, m) in ests.iter().zip(&moved) {
            prop_assert_eq!(
                support_confusion(e, &truth, DEFAULT_ZERO_TOL).unwrap(),
                support_confusion(m, &relabel(&truth), DEFAULT_ZERO_TOL).unwrap()
            );
        }
        let pairs: Vec<(f64, &SymmetricParam)> = ests.iter().enumerate().map(|(k, e)| (k as f64, e)).collect();
        let moved_pairs: Vec<(f64, &SymmetricParam)> = moved.iter().enumerate().map(|(k, e)| (k as f64, e)).collect();
        let a = roc_from_estimates(&pairs, &truth).unwrap();
        let b = roc_from_estimates(&moved_pairs, &relabel(&truth)).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.auc));
        prop_assert_eq!(a.auc, b.auc);
        let mut reversed = pairs.clone();
        reversed.reverse();
        prop_assert_eq!(roc_from_estimates(&reversed, &truth).unwrap().auc, a.auc);
    }
}
