use bandsample::analysis::{
    expected_mse, noise_sensitivity, noiseless_error, noiseless_error_raw, removal_effect,
    sample_rank, NoiseModel,
};
use bandsample::graph::{generate_ba, generate_er, generate_sbm, shift_operator};
use bandsample::reconstruction::{glr_operator, ls_operator, reconstruct, Observation};
use bandsample::sampling::{gram, greedy_select, weighted_random_select};
use bandsample::{BandBasis, Criterion, Graph, SampleSet, ShiftOperatorKind, SpectralBasis};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn kind_strategy() -> impl Strategy<Value = ShiftOperatorKind> {
    prop_oneof![
        Just(ShiftOperatorKind::Combinatorial),
        Just(ShiftOperatorKind::Normalized)
    ]
}

/// A connected ER graph, its basis with a random bandwidth, and an RNG for
/// drawing sample sets and signals.
fn instance(
    n: usize,
    p: f64,
    seed: u64,
    kind: ShiftOperatorKind,
    k_frac: f64,
) -> (Graph, BandBasis, ChaCha8Rng) {
    let g = generate_er(n, p, seed).unwrap();
    let k = ((k_frac * n as f64).ceil() as usize).clamp(1, n);
    let b = SpectralBasis::of_graph(&g, kind).unwrap().band(k).unwrap();
    (g, b, ChaCha8Rng::seed_from_u64(seed ^ 0x5eed))
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, size: usize) -> SampleSet {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v.truncate(size);
    SampleSet::new(v, n).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shift_operators_are_symmetric_psd(
        n in 3usize..25, p in 0.3f64..1.0, seed in any::<u64>(), kind in kind_strategy()
    ) {
        let g = generate_er(n, p, seed).unwrap();
        let l = shift_operator(&g, kind);
        prop_assert_eq!(&l, &l.transpose());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let v = gaussian(&mut rng, n);
            prop_assert!((v.transpose() * &l * &v)[0] >= -1e-10 * v.norm_squared());
        }
        if kind == ShiftOperatorKind::Combinatorial {
            for row in l.row_iter() {
                prop_assert!(row.sum().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generators_are_deterministic_and_well_formed(n in 5usize..40, seed in any::<u64>()) {
        let graphs = [
            (generate_er(n, 0.6, seed).unwrap(), generate_er(n, 0.6, seed).unwrap()),
            (generate_ba(n, 2, seed).unwrap(), generate_ba(n, 2, seed).unwrap()),
            (
                generate_sbm(n, 2, 0.9, 0.3, seed).unwrap(),
                generate_sbm(n, 2, 0.9, 0.3, seed).unwrap(),
            ),
        ];
        for (a, b) in &graphs {
            prop_assert_eq!(a.edges(), b.edges());
            prop_assert!(a.edges().iter().all(|&(u, v, _)| u < v));
            // Graph::new rejects disconnected graphs, so a round trip
            // through it re-checks connectivity.
            prop_assert!(Graph::new(n, a.edges().to_vec()).is_ok());
            let adj = a.adjacency();
            prop_assert_eq!(&adj, &adj.transpose());
            prop_assert!((0..n).all(|i| adj[(i, i)] == 0.0));
        }
    }

    #[test]
    fn gram_eigenvalues_lie_in_unit_interval(
        n in 4usize..30, seed in any::<u64>(), k_frac in 0.05f64..1.0, size_frac in 0.0f64..1.0,
        kind in kind_strategy()
    ) {
        let (_, b, mut rng) = instance(n, 0.7, seed, kind, k_frac);
        let size = ((size_frac * n as f64) as usize).max(1);
        let s = random_set(&mut rng, n, size);
        for l in gram(&b, &s).unwrap().symmetric_eigenvalues().iter() {
            prop_assert!(*l >= -1e-10 && *l <= 1.0 + 1e-10, "eigenvalue {}", l);
        }
    }

    #[test]
    fn least_squares_range_linearity_and_exactness(
        n in 4usize..30, seed in any::<u64>(), k_frac in 0.05f64..0.6, size_frac in 0.0f64..1.0
    ) {
        let (_, b, mut rng) = instance(n, 0.7, seed, ShiftOperatorKind::Combinatorial, k_frac);
        let size = ((size_frac * n as f64) as usize).max(1);
        let s = random_set(&mut rng, n, size);
        let r = ls_operator(&b, &s).unwrap();
        let projector = b.projector();

        let y1 = gaussian(&mut rng, n);
        let y2 = gaussian(&mut rng, n);
        let (a, c) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let x1 = reconstruct(&r, &Observation::sample(&y1, &s).unwrap()).unwrap();
        let x2 = reconstruct(&r, &Observation::sample(&y2, &s).unwrap()).unwrap();
        let combined = &y1 * a + &y2 * c;
        let x12 = reconstruct(&r, &Observation::sample(&combined, &s).unwrap()).unwrap();
        prop_assert!((&x12 - (&x1 * a + &x2 * c)).amax() < 1e-8);
        prop_assert!((&x1 - &projector * &x1).norm() < 1e-8);

        if sample_rank(&b, &s).unwrap() == b.k() {
            let x = b.u_k() * gaussian(&mut rng, b.k());
            let back = reconstruct(&r, &Observation::sample(&x, &s).unwrap()).unwrap();
            prop_assert!((back - x).amax() < 1e-6);
        }
    }

    #[test]
    fn regularized_smoothness_decreases_with_mu(
        n in 5usize..25, seed in any::<u64>(), size_frac in 0.1f64..1.0
    ) {
        let g = generate_er(n, 0.5, seed).unwrap();
        let l = shift_operator(&g, ShiftOperatorKind::Combinatorial);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = ((size_frac * n as f64) as usize).max(1);
        let s = random_set(&mut rng, n, size);
        let y = gaussian(&mut rng, n);
        let obs = Observation::sample(&y, &s).unwrap();
        let mut previous = f64::INFINITY;
        for mu in [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0] {
            let x = reconstruct(&glr_operator(&l, &s, mu).unwrap(), &obs).unwrap();
            let smoothness = (x.transpose() * &l * &x)[0];
            prop_assert!(smoothness <= previous * (1.0 + 1e-9) + 1e-12, "mu {}: {} > {}", mu, smoothness, previous);
            previous = smoothness;
        }
    }

    #[test]
    fn error_decomposition_identities(
        n in 4usize..30, seed in any::<u64>(), k_frac in 0.05f64..1.0, size_frac in 0.0f64..1.0,
        log_snr in -3.0f64..3.0, kind in kind_strategy()
    ) {
        let (g, b, mut rng) = instance(n, 0.7, seed, kind, k_frac);
        let k = b.k();
        let size = ((size_frac * n as f64) as usize).max(1);
        let s = random_set(&mut rng, n, size);
        let nm = NoiseModel::for_basis(10f64.powf(log_snr), &b).unwrap();

        let r = ls_operator(&b, &s).unwrap();
        let rank = sample_rank(&b, &s).unwrap();
        let raw = noiseless_error_raw(&b, &r).unwrap();
        prop_assert!((raw - (k - rank) as f64).abs() <= 1e-6);

        let mut eig: Vec<f64> = gram(&b, &s).unwrap().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        let reciprocal: f64 = eig[..rank].iter().map(|l| 1.0 / l).sum();
        let sens = noise_sensitivity(&r);
        prop_assert!((sens - reciprocal).abs() <= 1e-6 * sens.max(1e-300));

        let glr = glr_operator(&shift_operator(&g, kind), &s, 0.05).unwrap();
        for op in [&r, &glr] {
            let rep = expected_mse(&b, op, &nm).unwrap();
            let direct = noiseless_error(&b, op).unwrap() + nm.sigma_sq() * noise_sensitivity(op);
            prop_assert!((rep.expected_mse - direct).abs() <= 1e-10);
        }
    }

    #[test]
    fn removal_changes_are_discrete_and_opposite(
        n in 4usize..30, seed in any::<u64>(), k_frac in 0.05f64..1.0, size_frac in 0.0f64..1.0
    ) {
        let (_, b, mut rng) = instance(n, 0.8, seed, ShiftOperatorKind::Combinatorial, k_frac);
        let size = ((size_frac * n as f64) as usize).max(1);
        let s = random_set(&mut rng, n, size);
        let v = s.vertices()[rng.random_range(0..size)];
        let eff = removal_effect(&b, &s, v).unwrap();
        let d = eff.noiseless_change;
        prop_assert!(d == 0.0 || d == -1.0, "noiseless change {}", d);
        prop_assert_eq!(d < 0.0, eff.sensitivity_change > 0.0);
        let tau = eff.snr_threshold;
        prop_assert!((tau - b.k() as f64 / n as f64 * eff.sensitivity_change).abs() <= 1e-12 * tau.abs().max(1.0));
    }

    #[test]
    fn greedy_prefixes_nest_and_have_full_row_rank(
        n in 6usize..24, seed in any::<u64>(), k_frac in 0.1f64..0.5,
        which in 0usize..3
    ) {
        let (_, b, _) = instance(n, 0.8, seed, ShiftOperatorKind::Combinatorial, k_frac);
        let c = [Criterion::AOpt, Criterion::DOpt, Criterion::EOpt][which];
        let m = (2 * b.k()).min(n);
        let long = greedy_select(&b, c, m).unwrap();
        let short = greedy_select(&b, c, m / 2).unwrap();
        prop_assert_eq!(short.vertices(), &long.vertices()[..m / 2]);
        for i in 1..=b.k() {
            prop_assert_eq!(sample_rank(&b, &long.prefix(i)).unwrap(), i);
        }
    }

    #[test]
    fn weighted_random_is_seed_deterministic(n in 4usize..30, seed in any::<u64>(), m_frac in 0.0f64..1.0) {
        let (_, b, _) = instance(n, 0.7, seed, ShiftOperatorKind::Combinatorial, 0.3);
        let m = (m_frac * n as f64) as usize;
        let a = weighted_random_select(&b, m, seed).unwrap();
        prop_assert_eq!(&a, &weighted_random_select(&b, m, seed).unwrap());
        prop_assert_eq!(a.len(), m);
    }

    #[test]
    fn leverage_scores_ignore_column_signs(n in 4usize..25, seed in any::<u64>(), flips in any::<u32>()) {
        let (_, b, _) = instance(n, 0.7, seed, ShiftOperatorKind::Combinatorial, 0.4);
        let mut u = b.u_k().clone();
        for j in 0..u.ncols() {
            if flips >> (j % 32) & 1 == 1 {
                u.column_mut(j).neg_mut();
            }
        }
        let flipped = BandBasis::from_orthonormal(u).unwrap();
        for (x, y) in b.leverage_scores().iter().zip(flipped.leverage_scores()) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }
}

#[test]
fn degenerate_band_projector_is_basis_independent() {
    // K₄: the eigenvalue 4 has multiplicity three, so a band of width 2 cuts
    // through it and U_k depends on the eigensolver's choice of basis.
    let g = generate_er(4, 1.0, 0).unwrap();
    let b = SpectralBasis::of_graph(&g, ShiftOperatorKind::Combinatorial)
        .unwrap()
        .band(2)
        .unwrap();
    assert!(b.is_degenerate());

    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let rotation = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let full = SpectralBasis::of_graph(&g, ShiftOperatorKind::Combinatorial).unwrap();
    let mut other = full.eigenvectors().columns(0, 3).clone_owned();
    let rotated = other.columns(1, 2) * rotation;
    other.columns_mut(1, 2).copy_from(&rotated);
    let alt = BandBasis::from_orthonormal(other.columns(0, 2).clone_owned()).unwrap();

    for p in [b.projector(), alt.projector()] {
        assert!((&p * &p - &p).amax() < 1e-12);
        assert!((p.trace() - 2.0).abs() < 1e-12);
    }
    // Projector equality is only meaningful with a positive gap.
    let gapped = SpectralBasis::of_graph(&g, ShiftOperatorKind::Combinatorial)
        .unwrap()
        .band(1)
        .unwrap();
    assert!(!gapped.is_degenerate());
    assert!((gapped.projector() - DMatrix::from_element(4, 4, 0.25)).amax() < 1e-12);
}
