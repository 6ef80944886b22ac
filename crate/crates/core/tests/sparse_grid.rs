use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::Arc;

use cubature_bsde::sparse_grid::{count_nodes, recursive_surplus};
use cubature_bsde::study::fit_slope;
use cubature_bsde::{Hypercube, LevelIndex, SparseGrid, SparseInterpolant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(d: usize) -> Hypercube {
    Hypercube::new(vec![0.0; d], vec![1.0; d]).unwrap()
}

fn interpolant(cube: Hypercube, p: usize, f: impl Fn(&[f64]) -> f64) -> SparseInterpolant {
    Arc::new(SparseGrid::new(cube, p)).hierarchize(f)
}

fn random_point(rng: &mut impl Rng, cube: &Hypercube) -> Vec<f64> {
    (0..cube.dim()).map(|i| rng.random_range(cube.lower[i]..=cube.upper[i])).collect()
}

// Piecewise-linear interpolation through sorted (x, y) pairs.
fn linear_interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

#[test]
fn one_dimensional_grid_is_linear_interpolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = |x: &[f64]| (3.0 * x[0]).sin() + x[0] * x[0];
    for (a, b, p) in [(0.0, 1.0, 1), (-2.0, 3.5, 4), (10.0, 10.5, 7), (-1.0, 1.0, 10)] {
        let cube = Hypercube::new(vec![a], vec![b]).unwrap();
        let interp = interpolant(cube.clone(), p, f);
        let m = 1usize << p;
        let xs: Vec<f64> = (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(&[x])).collect();
        assert_eq!(interp.len(), m + 1);
        for _ in 0..1000 {
            let x = random_point(&mut rng, &cube);
            let diff = (interp.eval(&x).unwrap() - linear_interp(&xs, &ys, x[0])).abs();
            assert!(diff < 1e-13, "p={p} x={x:?} diff={diff:e}");
        }
    }
}

#[test]
fn sweeps_match_direct_recursion() {
    let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| ((i + 1) as f64 * v).cos()).product::<f64>() + x[0];
    let cubes = [
        unit(2),
        Hypercube::new(vec![-1.0, 0.5], vec![2.0, 0.75]).unwrap(),
        Hypercube::new(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 3.0]).unwrap(),
        // collapsed middle axis
        Hypercube::new(vec![0.0, 0.3, -1.0], vec![1.0, 0.3, 1.0]).unwrap(),
    ];
    for cube in cubes {
        for p in 0..=5 {
            let grid = Arc::new(SparseGrid::new(cube.clone(), p));
            let interp = grid.hierarchize(f);
            for (index, _) in grid.nodes() {
                let reference = recursive_surplus(&cube, &index, &f);
                let got = interp.coefficient(&index).unwrap();
                assert!((got - reference).abs() < 1e-12, "{index:?}: {got} vs {reference}");
            }
        }
    }
}

// Brute-force enumeration of the index set.
fn enumerate(p: usize, d: usize) -> HashSet<LevelIndex> {
    let mut out = HashSet::new();
    let mut levels = vec![0u8; d];
    loop {
        if levels.iter().map(|&l| l as usize).sum::<usize>() <= p {
            let ranges: Vec<Vec<u32>> = levels
                .iter()
                .map(|&l| if l == 0 { vec![0, 1] } else { (1..1u32 << l).step_by(2).collect() })
                .collect();
            let mut pos = vec![0usize; d];
            loop {
                out.insert(LevelIndex {
                    levels: levels.clone(),
                    positions: (0..d).map(|i| ranges[i][pos[i]]).collect(),
                });
                let mut k = 0;
                while k < d {
                    pos[k] += 1;
                    if pos[k] < ranges[k].len() {
                        break;
                    }
                    pos[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
        }
        let mut k = 0;
        while k < d {
            levels[k] += 1;
            if levels[k] as usize <= p {
                break;
            }
            levels[k] = 0;
            k += 1;
        }
        if k == d {
            return out;
        }
    }
}

#[test]
fn node_counts_match_enumeration() {
    for d in 1..=4 {
        for p in 0..=10 {
            let set = enumerate(p, d);
            assert_eq!(set.len() as u128, count_nodes(p, d), "p={p} d={d}");
            let grid = SparseGrid::new(unit(d), p);
            assert_eq!(grid.len(), set.len());
            for k in 0..grid.len() {
                assert!(set.contains(&grid.level_index(k)));
            }
        }
    }
}

#[test]
fn sin_product_error_decay() {
    let f = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let probes: Vec<[f64; 2]> =
        (0..=100).flat_map(|i| (0..=100).map(move |j| [i as f64 / 100.0, j as f64 / 100.0])).collect();
    let mut points = Vec::new();
    for p in 3..=9 {
        let interp = interpolant(unit(2), p, f);
        let err = probes.iter().map(|x| (interp.eval(x).unwrap() - f(x)).abs()).fold(0.0, f64::max);
        points.push((p as f64, err.log2()));
    }
    let slope = fit_slope(&points).unwrap();
    assert!(slope <= -1.7, "slope {slope}");
}

#[test]
fn positivity_fails_beyond_one_dimension() {
    // ψ = 1 on corners, 0 on edge midpoints: the combination I_10 + I_01 - I_00
    // gives -1 at the centre.
    let f = |x: &[f64]| {
        let corner = |v: f64| v == 0.0 || v == 1.0;
        if corner(x[0]) && corner(x[1]) {
            1.0
        } else {
            0.0
        }
    };
    let interp = interpolant(unit(2), 1, f);
    assert_eq!(interp.len(), 8);
    assert!((interp.eval(&[0.5, 0.5]).unwrap() + 1.0).abs() < 1e-15);
    // and the sup bound: flip the signs and lift the midpoints
    let g = |x: &[f64]| 1.0 - 2.0 * f(x);
    let interp = interpolant(unit(2), 1, g);
    assert!((interp.eval(&[0.5, 0.5]).unwrap() - 3.0).abs() < 1e-15);
}

fn cube_strategy(d: usize) -> impl Strategy<Value = Hypercube> {
    prop::collection::vec((-5.0f64..5.0, 0.01f64..4.0), d)
        .prop_map(|v| Hypercube::new(v.iter().map(|p| p.0).collect(), v.iter().map(|p| p.0 + p.1).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interpolates_at_nodes(cube in cube_strategy(3), p in 0usize..6, seed in any::<u64>()) {
        let grid = Arc::new(SparseGrid::new(cube, p));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let interp = SparseInterpolant::from_values(Arc::clone(&grid), values.clone(), 1);
        for (k, x) in grid.points().iter().enumerate() {
            prop_assert!((interp.eval(x).unwrap() - values[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_and_linear_functions_are_exact(
        cube in cube_strategy(2), p in 0usize..7, c in -3.0f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0, seed in any::<u64>()
    ) {
        let one = interpolant(cube.clone(), p, |_| c);
        // multilinear functions live in the level-0 space
        let lin = interpolant(cube.clone(), p, |x| c + a * x[0] + b * x[1] + a * b * x[0] * x[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x = random_point(&mut rng, &cube);
            prop_assert!((one.eval(&x).unwrap() - c).abs() < 1e-12);
            let exact = c + a * x[0] + b * x[1] + a * b * x[0] * x[1];
            prop_assert!((lin.eval(&x).unwrap() - exact).abs() < 1e-10 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn operator_is_linear(cube in cube_strategy(3), p in 0usize..5, alpha in -2.0f64..2.0, beta in -2.0f64..2.0, seed in any::<u64>()) {
        let grid = Arc::new(SparseGrid::new(cube.clone(), p));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| alpha * x + beta * y).collect();
        let iu = SparseInterpolant::from_values(Arc::clone(&grid), u, 1);
        let iv = SparseInterpolant::from_values(Arc::clone(&grid), v, 1);
        let iw = SparseInterpolant::from_values(Arc::clone(&grid), w, 1);
        for _ in 0..30 {
            let x = random_point(&mut rng, &cube);
            let lhs = iw.eval(&x).unwrap();
            let rhs = alpha * iu.eval(&x).unwrap() + beta * iv.eval(&x).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-11);
        }
    }

    // Positivity and the sup bound hold for linear interpolation, i.e. d = 1.
    #[test]
    fn one_dimensional_positivity_and_sup_bound(a in -5.0f64..5.0, w in 0.01f64..4.0, p in 0usize..9, seed in any::<u64>()) {
        let cube = Hypercube::new(vec![a], vec![a + w]).unwrap();
        let grid = Arc::new(SparseGrid::new(cube.clone(), p));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let sup = values.iter().copied().fold(0.0, f64::max);
        let interp = SparseInterpolant::from_values(grid, values, 1);
        for _ in 0..100 {
            let y = interp.eval(&random_point(&mut rng, &cube)).unwrap();
            prop_assert!(y >= -1e-15 && y <= sup + 1e-15);
        }
    }
}
