use bbsp_core::blackbox::{
    bb_backward, bb_forward, f_lambda_value, linearized_loss, BlackboxConfig,
};
use bbsp_core::grid::{hamming, hamming_grad, Cell, GridProblem, PathMask, WeightGrid};
use bbsp_core::solver::{brute_force_shortest, dijkstra, Heuristic, SolverKind};
use bbsp_core::WEIGHT_FLOOR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row-major sum over the mask, start excluded.
fn masked_cost(w: &WeightGrid, m: &PathMask, p: &GridProblem) -> f64 {
    m.iter_cells()
        .filter(|&c| c != p.start())
        .map(|c| w.get(c))
        .sum()
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[test]
fn gradient_is_scaled_mask_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for i in 0..200 {
        let k = 2 + i % 7;
        let p = GridProblem::new(k).unwrap();
        let w = WeightGrid::from_fn(k, |_| rng.random_range(0.2..5.0)).unwrap();
        let truth =
            PathMask::from_bools(k, (0..k * k).map(|_| rng.random_bool(0.3)).collect()).unwrap();
        let scale = rng.random_range(0.01..1.0);
        let up: Vec<f64> = hamming_grad(&truth).iter().map(|g| g * scale).collect();
        let cfg = BlackboxConfig::new(rng.random_range(0.5..50.0)).unwrap();
        let solver = if i % 2 == 0 {
            SolverKind::Dijkstra
        } else {
            SolverKind::AStar(Heuristic::MinWeightChebyshev)
        };

        let (y_hat, ctx) = bb_forward(&w, solver, &p).unwrap();
        let out = bb_backward(&ctx, &up, solver, &cfg).unwrap();

        let shifted: Vec<f64> = w
            .as_slice()
            .iter()
            .zip(&up)
            .map(|(w, g)| (w + cfg.lambda * g).max(WEIGHT_FLOOR))
            .collect();
        let y_lambda = solver
            .solve(&WeightGrid::new(k, shifted.clone()).unwrap(), &p)
            .unwrap()
            .mask;
        assert_eq!(out.y_lambda, y_lambda);
        for j in 0..k * k {
            let expected = -(bit(y_hat.as_slice()[j]) - bit(y_lambda.as_slice()[j])) / cfg.lambda;
            assert_eq!(out.grad_w[j], expected);
        }

        // perturbed argmin: c(w′, y_λ) ≤ c(w′, ŷ)
        let w_prime = WeightGrid::new(k, shifted).unwrap();
        assert!(masked_cost(&w_prime, &y_lambda, &p) <= masked_cost(&w_prime, &y_hat, &p) + 1e-12);

        let zero = bb_backward(&ctx, &vec![0.0; k * k], solver, &cfg).unwrap();
        assert!(zero.grad_w.iter().all(|&g| g == 0.0));
    }
}

/// 3×3, start (0,0), goal (0,2): the two 2-step routes pass through (0,1) or (1,1).
fn two_route_instance() -> (GridProblem, WeightGrid) {
    let p = GridProblem::with_endpoints(3, Cell::new(0, 0), Cell::new(0, 2)).unwrap();
    let w = WeightGrid::from_fn(3, |c| match (c.row, c.col) {
        (0, 1) => 1.0,
        (1, 1) => 1.5,
        (0, 2) => 1.0,
        _ => 10.0,
    })
    .unwrap();
    (p, w)
}

#[test]
fn perturbation_flips_between_two_routes() {
    let (p, w) = two_route_instance();
    let via_top =
        PathMask::from_cells(3, [Cell::new(0, 0), Cell::new(0, 1), Cell::new(0, 2)]).unwrap();
    let via_mid =
        PathMask::from_cells(3, [Cell::new(0, 0), Cell::new(1, 1), Cell::new(0, 2)]).unwrap();
    assert_eq!(
        brute_force_shortest(&w, &p).unwrap().optimal,
        vec![via_top.clone()]
    );

    let mut up = vec![0.0; 9];
    up[Cell::new(0, 1).index(3)] = 1.0;
    let cfg = BlackboxConfig::new(1.0).unwrap();
    let (y_hat, ctx) = bb_forward(&w, SolverKind::Dijkstra, &p).unwrap();
    assert_eq!(y_hat, via_top);
    let out = bb_backward(&ctx, &up, SolverKind::Dijkstra, &cfg).unwrap();

    let mut w_prime = w.as_slice().to_vec();
    w_prime[Cell::new(0, 1).index(3)] = 2.0;
    let oracle = brute_force_shortest(&WeightGrid::new(3, w_prime).unwrap(), &p).unwrap();
    assert_eq!(oracle.optimal, vec![via_mid.clone()]);
    assert_eq!(out.y_lambda, via_mid);

    let mut expected = vec![0.0; 9];
    expected[Cell::new(0, 1).index(3)] = -1.0;
    expected[Cell::new(1, 1).index(3)] = 1.0;
    assert_eq!(out.grad_w, expected);
    assert!(out.grad_w.iter().all(|g| [-1.0, 0.0, 1.0].contains(g)));
}

#[test]
fn f_lambda_matches_hand_evaluation() {
    let (p, w) = two_route_instance();
    let mut up = vec![0.0; 9];
    up[Cell::new(0, 1).index(3)] = 1.0;
    let cfg = BlackboxConfig::new(1.0).unwrap();
    let (_, ctx) = bb_forward(&w, SolverKind::Dijkstra, &p).unwrap();
    // f(y_λ) = 2 + (0 − 1) = 1; c(w,y) − c(w,y_λ) = 2 − 2.5 = −0.5; f_λ = 1 + 0.5
    let v = f_lambda_value(&w, &ctx, SolverKind::Dijkstra, &cfg, 2.0, &up).unwrap();
    assert_eq!(v, 1.5);

    // no flip: the bracketed term vanishes and f_λ = f(y(w)) = L(ŷ)
    let small = BlackboxConfig::new(0.1).unwrap();
    assert_eq!(
        f_lambda_value(&w, &ctx, SolverKind::Dijkstra, &small, 2.0, &up).unwrap(),
        2.0
    );
    assert_eq!(
        f_lambda_value(&w, &ctx, SolverKind::Dijkstra, &cfg, 2.0, &[0.0; 9]).unwrap(),
        2.0
    );
}

#[test]
fn linearized_loss_with_hamming_upstream() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let k = 5;
        let p = GridProblem::new(k).unwrap();
        let w = WeightGrid::from_fn(k, |_| rng.random_range(0.5..3.0)).unwrap();
        let truth_w = WeightGrid::from_fn(k, |_| rng.random_range(0.5..3.0)).unwrap();
        let other_w = WeightGrid::from_fn(k, |_| rng.random_range(0.5..3.0)).unwrap();
        let truth = dijkstra(&truth_w, &p).unwrap().mask;
        let y = dijkstra(&other_w, &p).unwrap().mask;
        let (y_hat, ctx) = bb_forward(&w, SolverKind::Dijkstra, &p).unwrap();
        let l_hat = hamming(&y_hat, &truth).unwrap() as f64;
        let up = hamming_grad(&truth);
        // Hamming loss is affine in y, so the linearization is exact on masks
        assert_eq!(
            linearized_loss(&ctx, l_hat, &up, &y).unwrap(),
            hamming(&y, &truth).unwrap() as f64
        );
    }
}

#[test]
fn positive_upstream_keeps_off_path_cells_off() {
    // every 3×3 grid with weights in {1, 2, 3}
    let p = GridProblem::new(3).unwrap();
    let cfg = BlackboxConfig::new(2.0).unwrap();
    for code in 0..3usize.pow(9) {
        let w = WeightGrid::from_fn(3, |c| {
            1.0 + ((code / 3usize.pow(c.index(3) as u32)) % 3) as f64
        })
        .unwrap();
        let (y_hat, ctx) = bb_forward(&w, SolverKind::Dijkstra, &p).unwrap();
        for i in 0..9 {
            if y_hat.as_slice()[i] {
                continue;
            }
            let mut up = vec![0.0; 9];
            up[i] = 1.0;
            let out = bb_backward(&ctx, &up, SolverKind::Dijkstra, &cfg).unwrap();
            assert!(!out.y_lambda.as_slice()[i]);
            assert_eq!(out.grad_w[i], 0.0);
        }
    }
}

#[test]
fn gradient_never_points_toward_larger_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..200 {
        let k = 3 + i % 6;
        let p = GridProblem::new(k).unwrap();
        let w = WeightGrid::from_fn(k, |_| rng.random_range(0.2..5.0)).unwrap();
        let truth =
            PathMask::from_bools(k, (0..k * k).map(|_| rng.random_bool(0.3)).collect()).unwrap();
        let up: Vec<f64> = hamming_grad(&truth).iter().map(|g| g / 8.0).collect();
        let cfg = BlackboxConfig::new(20.0).unwrap();
        let (y_hat, ctx) = bb_forward(&w, SolverKind::Dijkstra, &p).unwrap();
        let out = bb_backward(&ctx, &up, SolverKind::Dijkstra, &cfg).unwrap();

        // ⟨g, w⟩ = (c(w, y_λ) − c(w, ŷ))/λ ≥ 0, so descent always shrinks w
        let radial: f64 = out
            .grad_w
            .iter()
            .zip(w.as_slice())
            .map(|(g, w)| g * w)
            .sum();
        let expected =
            (masked_cost(&w, &out.y_lambda, &p) - masked_cost(&w, &y_hat, &p)) / cfg.lambda;
        assert!((radial - expected).abs() < 1e-9);
        assert!(radial >= -1e-12);
    }
}
