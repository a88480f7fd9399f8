use proptest::prelude::*;

use coincidence::linalg::{min_norm_solve, smallest_singular_value};
use coincidence::majorant::{tau_sequence, MajorantPair, Radius, ScalarFn};
use coincidence::problems::BilinearMap;
use coincidence::solver::{certify_trace, coincidence_solve};
use coincidence::{build_quadratic_instance, Matrix, NormTag, QuadraticProblem, Vector};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |data| {
        let rows: Vec<Vec<f64>> = data.chunks(cols).map(<[f64]>::to_vec).collect();
        Matrix::from_rows(&rows).unwrap()
    })
}

fn wide_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=5, 0usize..=3).prop_flat_map(|(m, extra)| matrix(m, m + extra))
}

fn vector(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-5.0..5.0f64, dim).prop_map(Vector::from)
}

fn norm_tag() -> impl Strategy<Value = NormTag> {
    prop_oneof![Just(NormTag::L2), Just(NormTag::LInf)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn min_norm_correction_is_exact_bounded_and_minimal(
        (b, y, v) in wide_matrix().prop_flat_map(|b| {
            let (m, n) = (b.rows(), b.cols());
            (Just(b), vector(m), vector(n))
        })
    ) {
        let sigma = smallest_singular_value(&b);
        prop_assume!(sigma > 0.05);
        let delta = min_norm_solve(&b, &y).unwrap();
        let scale = 1.0 + y.norm(NormTag::L2);
        prop_assert!(b.mul_vec(&delta).distance(&y, NormTag::L2) <= 1e-9 * scale);
        prop_assert!(delta.norm(NormTag::L2) <= y.norm(NormTag::L2) / sigma * (1.0 + 1e-9) + 1e-12);
        // any other solution differs by a null-space vector
        let null = &v - &min_norm_solve(&b, &b.mul_vec(&v)).unwrap();
        prop_assert!(b.mul_vec(&null).norm(NormTag::L2) <= 1e-9 * (1.0 + v.norm(NormTag::L2)));
        let other = &delta + &null;
        prop_assert!(delta.norm(NormTag::L2) <= other.norm(NormTag::L2) + 1e-9 * scale);
    }

    #[test]
    fn smallest_singular_value_is_rotation_and_permutation_invariant(
        b in wide_matrix(),
        angle in 0.0..std::f64::consts::TAU,
        seed in 0usize..100,
    ) {
        let (m, n) = (b.rows(), b.cols());
        let sigma = smallest_singular_value(&b);
        let (i, j) = (seed % n, (seed / n + 1 + seed % n) % n);
        prop_assume!(i != j);
        let mut givens = Matrix::identity(n);
        let (c, s) = (angle.cos(), angle.sin());
        givens[(i, i)] = c;
        givens[(j, j)] = c;
        givens[(i, j)] = -s;
        givens[(j, i)] = s;
        let rotated = b.matmul(&givens);
        prop_assert!((smallest_singular_value(&rotated) - sigma).abs() <= 1e-9 * (1.0 + sigma));
        let mut rows = b.to_rows();
        rows.rotate_left(seed % m);
        let permuted = Matrix::from_rows(&rows).unwrap();
        prop_assert!((smallest_singular_value(&permuted) - sigma).abs() <= 1e-9 * (1.0 + sigma));
    }

    #[test]
    fn norms_are_homogeneous_and_subadditive(
        (x, y) in (1usize..8).prop_flat_map(|n| (vector(n), vector(n))),
        t in -10.0..10.0f64,
        tag in norm_tag(),
    ) {
        let (nx, ny) = (x.norm(tag), y.norm(tag));
        prop_assert!((&x + &y).norm(tag) <= nx + ny + 1e-12);
        prop_assert!((x.scaled(t).norm(tag) - t.abs() * nx).abs() <= 1e-12 * (1.0 + t.abs() * nx));
        prop_assert!(x.norm(NormTag::LInf) <= x.norm(NormTag::L2) + 1e-15);
    }

    #[test]
    fn tau_sequence_increases_to_the_crossing(
        a in 0.2..3.0f64,
        b in 0.5..3.0f64,
        fraction in 0.05..1.0f64,
    ) {
        let c = fraction * b * b / (4.0 * a);
        let pair = MajorantPair::new(
            ScalarFn::linear(b, 0.0),
            ScalarFn::polynomial(vec![c, 0.0, a]),
            0.0,
            Radius::Unbounded,
        )
        .unwrap();
        let seq = tau_sequence(&pair, 500, 1e-14).unwrap();
        let d = (b * b - 4.0 * a * c).max(0.0);
        let closed = (b - d.sqrt()) / (2.0 * a);
        prop_assert!((seq.tau_star - closed).abs() <= 1e-9 * (1.0 + closed));
        for w in seq.taus.windows(2) {
            prop_assert!(w[0] <= w[1]);
            prop_assert!(w[1] <= seq.tau_star + 1e-12);
        }
    }

    #[test]
    fn scalar_quadratic_traces_certify(
        a in 0.2..3.0f64,
        b in 0.5..3.0f64,
        fraction in 0.0..0.95f64,
        negative in any::<bool>(),
    ) {
        let c = fraction * b * b / (4.0 * a);
        let offset = if negative { -c } else { c };
        let tensor = BilinearMap::new(1, 1, vec![a], a, (NormTag::L2, NormTag::L2)).unwrap();
        let q = QuadraticProblem::new(tensor, Matrix::from_diagonal(&[b]), Vector::from(vec![offset])).unwrap();
        let p = build_quadratic_instance(&q).unwrap();
        let sol = coincidence_solve(&p, 1e-10, 10_000).unwrap();
        prop_assert!(sol.converged());
        prop_assert!(certify_trace(&sol.trace, p.majorants()).holds());
        prop_assert!(sol.x_star.norm(NormTag::L2) <= q.tau_star() + 1e-8);
    }
}
