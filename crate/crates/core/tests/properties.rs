use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ulab::cfrac::{cf_expand, cf_expand_by_inversion};
use ulab::dani::{brute_force_solutions, max_solution_degree, solve_rt, solve_rt_raw, PsiSpec};
use ulab::harness::{parse_config, ExperimentConfig, Kind};
use ulab::lattice::{apply_flow, cartan_distance, det, mat_mul, weak_popov_reduce, FlowSpec, LaurentMatrix, PolyLattice};
use ulab::{Fq, Laurent, LogNorm, Poly};

fn field(q: u64) -> Fq {
    Fq::new(q).unwrap()
}

fn poly_from(c: &[u32], q: u32) -> Poly {
    Poly::from_coeffs(c.iter().map(|x| x % q).collect())
}

fn matrix(q: u32, d: usize, entries: &[Vec<u32>]) -> Vec<Vec<Poly>> {
    (0..d).map(|i| (0..d).map(|j| poly_from(&entries[i * d + j], q)).collect()).collect()
}

fn entries(d: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0u32..9, 0..5), d * d)
}

/// v lies in rowspan(B) iff v·adj(B) is divisible by det B.
fn in_rowspan(v: &[Poly], b: &[Vec<Poly>], f: &Fq) -> bool {
    let d = b.len();
    let dt = det(b, f);
    (0..d).all(|i| {
        // Cramer: coordinate i is det(B with row i replaced by v) / det B.
        let mut m = b.to_vec();
        m[i] = v.to_vec();
        det(&m, f).rem(&dt, f).unwrap().is_zero()
    })
}

fn exact(terms: &[(i64, u32)], f: &Fq) -> Laurent {
    Laurent::from_terms(terms, None, f)
}

fn unipotent(u: Laurent, upper: bool) -> LaurentMatrix {
    if upper {
        vec![vec![Laurent::one(), u], vec![Laurent::zero(), Laurent::one()]]
    } else {
        vec![vec![Laurent::one(), Laurent::zero()], vec![u, Laurent::one()]]
    }
}

fn laurent_terms() -> impl Strategy<Value = Vec<(i64, u32)>> {
    prop::collection::vec((-4i64..5, 1u32..2), 0..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn popov_rows_generate_the_same_lattice(q in prop::sample::select(vec![2u32, 3, 5]), d in 2usize..4, e in entries(3)) {
        let f = field(q as u64);
        let b = matrix(q, d, &e);
        prop_assume!(!det(&b, &f).is_zero());
        let r = weak_popov_reduce(&b, &f).unwrap();
        for row in &r {
            prop_assert!(in_rowspan(row, &b, &f));
        }
        for row in &b {
            prop_assert!(in_rowspan(row, &r, &f));
        }
        prop_assert_eq!(det(&r, &f).deg(), det(&b, &f).deg());
    }

    #[test]
    fn popov_minimum_is_attained_by_a_row(q in prop::sample::select(vec![2u32, 3]), d in 2usize..4, e in entries(3), sigma in -3i64..4) {
        let f = field(q as u64);
        let b = matrix(q, d, &e);
        prop_assume!(!det(&b, &f).is_zero());
        let l = PolyLattice::new(b, sigma, &f).unwrap();
        let row_min = l.reduced().iter().map(|r| r.iter().filter_map(Poly::deg_i).max().unwrap()).min().unwrap();
        prop_assert_eq!(l.delta(), LogNorm::Exp(row_min - sigma));
        let minima = l.successive_minima();
        let sum: i64 = minima.iter().map(|m| m.exp().unwrap()).sum();
        prop_assert_eq!(sum, l.covolume_exp());
    }

    #[test]
    fn flow_preserves_covolume(q in prop::sample::select(vec![2u32, 3]), e in entries(3), t in -6i64..7, m in 1usize..3) {
        let f = field(q as u64);
        let b = matrix(q, 3, &e);
        prop_assume!(!det(&b, &f).is_zero());
        let l = PolyLattice::new(b, 0, &f).unwrap();
        let n = 3 - m;
        let g = apply_flow(&l, FlowSpec::new(m, n, t)).unwrap();
        prop_assert_eq!(g.covolume_exp(), l.covolume_exp());
        let back = apply_flow(&g, FlowSpec::new(m, n, -t)).unwrap();
        prop_assert_eq!(back.successive_minima(), l.successive_minima());
    }

    #[test]
    fn scaling_by_x_shifts_minima(q in prop::sample::select(vec![2u32, 3]), e in entries(2), k in -5i64..6) {
        let f = field(q as u64);
        let b = matrix(q, 2, &e);
        prop_assume!(!det(&b, &f).is_zero());
        let l = PolyLattice::new(b, 0, &f).unwrap();
        let s = l.apply_scaling(&[k, k]).unwrap();
        prop_assert_eq!(s.delta(), l.delta().shift(k));
    }

    #[test]
    fn cartan_distance_symmetric_and_subadditive(
        a in laurent_terms(), b in laurent_terms(), c in laurent_terms(), e1 in -4i64..5, e2 in -4i64..5
    ) {
        let f = field(2);
        let (ua, ub, uc) = (exact(&a, &f), exact(&b, &f), exact(&c, &f));
        let dg = vec![vec![Laurent::monomial(1, e1), Laurent::zero()], vec![Laurent::zero(), Laurent::monomial(1, e2)]];
        let dinv = vec![vec![Laurent::monomial(1, -e1), Laurent::zero()], vec![Laurent::zero(), Laurent::monomial(1, -e2)]];
        let g = mat_mul(&mat_mul(&unipotent(ua.clone(), true), &dg, &f), &unipotent(ub.clone(), false), &f);
        let ginv = mat_mul(
            &mat_mul(&unipotent(ub.neg(&f), false), &dinv, &f),
            &unipotent(ua.neg(&f), true),
            &f,
        );
        let h = mat_mul(&unipotent(uc, true), &dg, &f);
        let prec = 64;
        let dgv = cartan_distance(&g, &f, prec).unwrap();
        prop_assert_eq!(dgv, cartan_distance(&ginv, &f, prec).unwrap());
        let dh = cartan_distance(&h, &f, prec).unwrap();
        let dgh = cartan_distance(&mat_mul(&g, &h, &f), &f, prec).unwrap();
        prop_assert!(dgh <= dgv + dh);
    }

    #[test]
    fn cf_methods_agree(q in prop::sample::select(vec![2u64, 3, 4]), seed in any::<u64>()) {
        let f = field(q);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = Laurent::random_unit_ball(&f, 96, &mut rng);
        let a = cf_expand(&alpha, 12, &f).unwrap();
        let b = cf_expand_by_inversion(&alpha, 12, &f, 96).unwrap();
        let k = a.len().min(b.len());
        prop_assert_eq!(&a.partials[..k], &b.partials[..k]);
    }

    #[test]
    fn cf_recomposition_matches(q in prop::sample::select(vec![2u64, 3]), seed in any::<u64>()) {
        let f = field(q);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = Laurent::random_unit_ball(&f, 80, &mut rng);
        let cf = cf_expand(&alpha, 10, &f).unwrap();
        let back = cf.recompose(&f, 80).unwrap();
        let n = cf.len() - 1;
        let tol = -((cf.q_deg(n) * 2) as i64);
        let diff = back.sub(&alpha, &f);
        prop_assert!(diff.norm().map_or(true, |x| x.le_exp(tol)));
    }

    #[test]
    fn r_is_monotone_and_matches_closed_form(tau_num in 1i64..6, tau_den in 1i64..4, m in 1usize..3, n in 1usize..3) {
        let tau = num_rational::Ratio::new(tau_num, tau_den);
        prop_assume!(tau >= num_rational::Ratio::from_integer(1));
        let psi = PsiSpec::power_law(tau);
        let (mi, ni) = (m as i64, n as i64);
        let mut prev = i64::MIN;
        for t in 1..40i64 {
            let r = solve_rt(&psi, m, n, t).unwrap();
            prop_assert!(r >= prev);
            prev = r;
            let num = mi * ni * t * (tau_num - tau_den);
            let den = mi * tau_den + tau_num * ni;
            prop_assert_eq!(r, num.div_euclid(den));
            prop_assert_eq!(solve_rt_raw(&psi, m, n, t), Some(r));
        }
    }

    #[test]
    fn kernel_detector_matches_enumeration(seed in any::<u64>(), tau in 1i64..4) {
        let f = field(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = ulab::dani::random_matrix(&f, 1, 1, 48, &mut rng);
        let psi = PsiSpec::power_int(tau);
        let brute = brute_force_solutions(&a, &psi, 8, &f).unwrap();
        let want = brute.iter().map(|s| s.deg as usize).max();
        prop_assert_eq!(max_solution_degree(&a, &psi, 8, &f).unwrap(), want);
    }

    #[test]
    fn config_echo_round_trips(
        kind in prop::sample::select(Kind::ALL.to_vec()),
        q in prop::sample::select(vec![2u32, 3, 4, 5, 7, 8, 9]),
        samples in 1usize..100_000,
        seed in any::<u64>(),
        degree in 2usize..40,
    ) {
        let mut c = ExperimentConfig::new(kind);
        c.q = q;
        c.samples = samples;
        c.seed = seed;
        c.degree = degree;
        c.d0 = degree / 2;
        let again = parse_config(&c.echo()).unwrap();
        prop_assert_eq!(again, c);
    }
}
