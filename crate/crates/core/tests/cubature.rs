use cubature_bsde::cubature::{brownian_stratonovich_moment, iterated_integral, validate_moments, Path};
use cubature_bsde::multiindex::enumerate_degree_set;
use cubature_bsde::{CubatureFormula, MultiIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// Piecewise-linear interpolation of a Brownian path on [0, 1].
fn brownian_path(rng: &mut ChaCha8Rng, r: usize, steps: usize) -> Path {
    let h = 1.0 / steps as f64;
    let mut times = vec![0.0];
    let mut points = vec![vec![0.0; r]];
    for k in 0..steps {
        let last = points[k].clone();
        let next = last
            .iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(rng);
                x + h.sqrt() * z
            })
            .collect();
        times.push((k + 1) as f64 * h);
        points.push(next);
    }
    Path { times, points }
}

// Wong-Zakai: iterated integrals of the interpolated path converge to the
// Stratonovich ones, so a sample mean is an independent check of the table.
#[test]
fn monte_carlo_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let r = 2;
    let words: Vec<MultiIndex> = enumerate_degree_set(4, r as u16).into_iter().filter(|w| !w.is_empty()).collect();
    let samples = 3000;
    let steps = 32;
    let mut sum = vec![0.0; words.len()];
    let mut sum_sq = vec![0.0; words.len()];
    for _ in 0..samples {
        let path = brownian_path(&mut rng, r, steps);
        for (k, w) in words.iter().enumerate() {
            let v = iterated_integral(&path, w).unwrap();
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    for (k, w) in words.iter().enumerate() {
        let mean = sum[k] / samples as f64;
        let var = (sum_sq[k] / samples as f64 - mean * mean).max(0.0);
        let se = (var / samples as f64).sqrt();
        let exact = brownian_stratonovich_moment(w).unwrap();
        // 5 standard errors plus the O(1/steps) interpolation bias at degree 4
        let tol = 5.0 * se + 0.05 / steps as f64;
        assert!((mean - exact).abs() < tol, "{w}: mc {mean} ± {se}, exact {exact}");
    }
}

#[test]
fn validation_passes_up_to_five_dimensions() {
    for r in 1..=5 {
        let formula = CubatureFormula::order3(r).unwrap();
        let report = validate_moments(&formula).unwrap();
        assert!(report.pass, "r={r}");
        assert!(report.odd_moments_vanish);
        assert!(report.max_defect < 1e-12);
        let single = report.matched.iter().find(|e| e.index == MultiIndex::new(vec![1])).unwrap();
        assert_eq!(single.defect, 0.0);
        assert!(report.error_constant > 0.0);
    }
}

#[test]
fn unit_endpoints_fail_in_two_dimensions() {
    let mut formula = CubatureFormula::order3(2).unwrap();
    for p in &mut formula.paths {
        for x in &mut p.points[1] {
            *x /= 2f64.sqrt();
        }
    }
    let report = validate_moments(&formula).unwrap();
    assert!(!report.pass);
    assert!((report.max_defect - 0.25).abs() < 1e-15);
}
