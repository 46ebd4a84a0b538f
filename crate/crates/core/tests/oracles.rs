//! Cross-checks against independent reference computations.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use squac_core::baselines::{
    kendall_stat, lin_dep_stat, ols_residuals, spearman_rho, spearman_stat, tied_ranks,
};
use squac_core::fdr::threshold_bp;
use squac_core::quantreg::{fit_pinball, pinball_objective};
use squac_core::simgen::se1_sigma1;
use squac_core::specialfn::{chi2_sf, normal_cdf, normal_quantile};
use squac_core::squac::{build_table, squac_statistic};
use squac_core::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    let m = 0.5 * (a + b);
    let whole = simpson(f, a, b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

/// Phi(z) as 0.5 plus the integral of the density from 0 to z.
fn quadrature_cdf(z: f64) -> f64 {
    let half = adaptive_simpson(&density, 0.0, z.abs(), 1e-14, 40);
    if z >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

#[test]
fn normal_cdf_matches_density_quadrature() {
    assert!((quadrature_cdf(1.959964) - 0.975).abs() < 1e-7);
    assert!((f64::from(normal_cdf(-1.0).unwrap()) - 0.158_655_3).abs() < 1e-7);
    for k in -60..=60 {
        let z = k as f64 * 0.1;
        let got = f64::from(normal_cdf(z).unwrap());
        assert!((got - quadrature_cdf(z)).abs() < 1e-12, "z = {z}");
    }
}

#[test]
fn normal_quantile_matches_bisection() {
    for &p in &[1e-10, 1e-4, 0.01, 0.2, 0.5, 0.8, 0.975, 0.999_999] {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f64::from(normal_cdf(mid).unwrap()) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = normal_quantile(p).unwrap();
        assert!(
            (q - 0.5 * (lo + hi)).abs() < 1e-9 * q.abs().max(1.0),
            "p = {p}: {q} vs {lo}"
        );
    }
    assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-6);
}

#[test]
fn chi_square_against_normal_and_closed_forms() {
    assert!((f64::from(chi2_sf(4, 2.0).unwrap()) - 0.735_758_882_3).abs() < 1e-10);
    assert!((f64::from(chi2_sf(2, 5.991465).unwrap()) - 0.05).abs() < 1e-7);
    assert!((f64::from(chi2_sf(2, 1.386294).unwrap()) - 0.5).abs() < 1e-6);
    for k in 0..=600 {
        let z = k as f64 * 0.01;
        let lhs = f64::from(chi2_sf(1, z * z).unwrap());
        let rhs = 2.0 * quadrature_cdf(-z);
        assert!((lhs - rhs).abs() < 1e-9, "z = {z}");
    }
}

/// Exact LP minimum by enumerating every basis of `px` interpolated points.
fn vertex_enumeration(y: &[f64], x: &DMatrix<f64>, tau: f64) -> f64 {
    let (n, px) = x.shape();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..px).collect();
    loop {
        let a = DMatrix::from_fn(px, px, |r, c| x[(idx[r], c)]);
        let b = DMatrix::from_fn(px, 1, |r, _| y[idx[r]]);
        if let Some(beta) = a.lu().solve(&b) {
            let beta: Vec<f64> = beta.iter().copied().collect();
            if beta.iter().all(|v| v.is_finite()) {
                best = best.min(pinball_objective(y, x, &beta, tau));
            }
        }
        // next combination
        let mut k = px;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < n - px + k {
                idx[k] += 1;
                for m in k + 1..px {
                    idx[m] = idx[m - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn pinball_fit_reaches_enumerated_lp_minimum() {
    let mut r = rng(11);
    for case in 0..300 {
        let n = r.random_range(4..=12usize);
        let px = r.random_range(1..=3usize).min(n - 1);
        let x = DMatrix::from_fn(n, px, |_, c| {
            if c == 0 {
                1.0
            } else {
                r.random_range(-2.0..2.0)
            }
        });
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let tau = [0.2, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.9][case % 5];
        let beta = fit_pinball(&y, &x, tau).unwrap();
        let got = pinball_objective(&y, &x, &beta, tau);
        let exact = vertex_enumeration(&y, &x, tau);
        assert!(got <= exact + 1e-9, "case {case}: {got} vs {exact}");
    }
}

#[test]
fn quartile_of_four_points_against_grid_search() {
    let y = [1.0, 2.0, 3.0, 4.0];
    let x = DMatrix::from_element(4, 1, 1.0);
    let beta = fit_pinball(&y, &x, 0.25).unwrap();
    assert!(beta[0] == 1.0 || beta[0] == 2.0, "{beta:?}");
    let grid_min = (0..=5000)
        .map(|k| pinball_objective(&y, &x, &[k as f64 * 0.001], 0.25))
        .fold(f64::INFINITY, f64::min);
    assert!((pinball_objective(&y, &x, &beta, 0.25) - grid_min).abs() < 1e-9);
}

#[test]
fn sample_median_of_normal_draws() {
    let y = normals(&mut rng(5), 300);
    let beta = fit_pinball(&y, &DMatrix::from_element(300, 1, 1.0), 0.5).unwrap();
    assert!(beta[0].abs() < 0.15);
}

fn naive_table(yi: &[f64], yj: &[f64], qi: &[f64], qj: &[f64], d: usize) -> Vec<u64> {
    let m = d - 1;
    let mut counts = vec![0u64; d * d];
    for k in 0..yi.len() {
        for s in 0..d {
            for t in 0..d {
                let in_cell = |y: f64, q: &[f64], c: usize| {
                    let lower = if c == 0 {
                        f64::NEG_INFINITY
                    } else {
                        q[k * m + c - 1]
                    };
                    let upper = if c == m { f64::INFINITY } else { q[k * m + c] };
                    y > lower && y <= upper
                };
                if in_cell(yi[k], qi, s) && in_cell(yj[k], qj, t) {
                    counts[s * d + t] += 1;
                }
            }
        }
    }
    counts
}

#[test]
fn table_counts_match_naive_loop() {
    let mut r = rng(21);
    for _ in 0..500 {
        let n = r.random_range(1..=50usize);
        let d = r.random_range(2..=5usize);
        let grid = QuantileGrid::even(d).unwrap();
        // small integer values so ties with the cut points occur
        let draw = |r: &mut ChaCha8Rng| r.random_range(-3..=3) as f64;
        let yi: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let yj: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let cuts = |r: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n)
                .flat_map(|_| {
                    let mut row: Vec<f64> = (0..d - 1).map(|_| draw(r)).collect();
                    row.sort_by(f64::total_cmp);
                    row
                })
                .collect()
        };
        let qi = cuts(&mut r);
        let qj = cuts(&mut r);
        let table = build_table(&yi, &yj, &qi, &qj, &grid).unwrap();
        assert_eq!(
            table.counts(),
            naive_table(&yi, &yj, &qi, &qj, d).as_slice()
        );
    }
}

#[test]
fn two_level_statistic_is_pearson_on_median_split() {
    let mut r = rng(31);
    for _ in 0..100 {
        let n = 2 * r.random_range(10..=100usize);
        let yi = normals(&mut r, n);
        let yj: Vec<f64> = yi
            .iter()
            .map(|&v| 0.4 * v + r.sample::<f64, _>(StandardNormal))
            .collect();
        let median = |y: &[f64]| {
            let mut s = y.to_vec();
            s.sort_by(f64::total_cmp);
            0.5 * (s[n / 2 - 1] + s[n / 2])
        };
        let (mi, mj) = (median(&yi), median(&yj));
        let grid = QuantileGrid::even(2).unwrap();
        let table = build_table(&yi, &yj, &vec![mi; n], &vec![mj; n], &grid).unwrap();
        // classical Pearson statistic with the nominal margins n/2
        let mut o = [[0.0f64; 2]; 2];
        for k in 0..n {
            o[usize::from(yi[k] > mi)][usize::from(yj[k] > mj)] += 1.0;
        }
        let e = n as f64 / 4.0;
        let pearson: f64 = o.iter().flatten().map(|v| (v - e).powi(2) / e).sum();
        assert!((squac_statistic(&table) - pearson).abs() < 1e-9 * pearson.max(1.0));
    }
}

#[test]
fn statistic_is_transpose_symmetric() {
    let mut r = rng(41);
    let grid = QuantileGrid::even(4).unwrap();
    for _ in 0..50 {
        let n = 120;
        let yi = normals(&mut r, n);
        let yj = normals(&mut r, n);
        let ds = Dataset::intercept_only(vec![yi.clone(), yj.clone()]).unwrap();
        let fits = fit_all(&ds, &grid).unwrap();
        let (qi, qj) = (fits.outcome_quantiles(0), fits.outcome_quantiles(1));
        let a = squac_statistic(&build_table(&yi, &yj, qi, qj, &grid).unwrap());
        let b = squac_statistic(&build_table(&yj, &yi, qj, qi, &grid).unwrap());
        assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }
}

#[test]
fn identical_outcomes_give_the_diagonal_maximum() {
    let y = normals(&mut rng(51), 300);
    let other = normals(&mut rng(52), 300);
    let ds = Dataset::intercept_only(vec![y.clone(), y, other]).unwrap();
    let grid = QuantileGrid::even(3).unwrap();
    let net = infer_network(&ds, &grid, 0.05).unwrap();
    let top = net.edges[0];
    assert_eq!((top.i, top.j), (0, 1));
    assert!(top.rejected);
    // diag(100, 100, 100) against expectations of 100/3
    assert!((top.statistic - 600.0).abs() < 1e-9, "{}", top.statistic);
}

/// A single dataset's mean of 15 statistics has standard error near 0.73,
/// so the mean is averaged over 20 datasets before applying the 0.8 band.
#[test]
fn null_mean_of_many_pairs() {
    let mut r = rng(61);
    let grid = QuantileGrid::even(3).unwrap();
    let mut total = 0.0;
    for _ in 0..20 {
        let outcomes: Vec<Vec<f64>> = (0..6).map(|_| normals(&mut r, 2000)).collect();
        let ds = Dataset::intercept_only(outcomes).unwrap();
        let fits = fit_all(&ds, &grid).unwrap();
        let stats = all_pair_statistics(&ds, &fits, &grid).unwrap();
        total += stats.values.upper().map(|(_, v)| v).sum::<f64>() / 15.0;
    }
    let mean = total / 20.0;
    assert!((mean - 4.0).abs() <= 0.8, "{mean}");
}

#[test]
fn residuals_match_normal_equations() {
    let mut r = rng(71);
    let n = 80;
    let x1 = normals(&mut r, n);
    let x2: Vec<f64> = (0..n).map(|_| f64::from(r.random::<f64>() < 0.3)).collect();
    let outcomes: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            (0..n)
                .map(|k| 1.0 + 0.5 * x1[k] - x2[k] + r.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let ds = Dataset::with_covariates(outcomes.clone(), &[x1, x2]).unwrap();
    let res = ols_residuals(&ds).unwrap();
    let x = ds.design();
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky().unwrap();
    for (i, y) in outcomes.iter().enumerate() {
        let yv = DMatrix::from_column_slice(n, 1, y);
        let beta = chol.solve(&(x.transpose() * &yv));
        let fitted = x * beta;
        for k in 0..n {
            assert!((res.columns[i][k] - (y[k] - fitted[(k, 0)])).abs() < 1e-10);
        }
    }
    // three-point line fit: residuals (1, -2, 1)/6
    let ds = Dataset::with_covariates(vec![vec![1.0, 2.0, 4.0]], &[vec![0.0, 1.0, 2.0]]).unwrap();
    let res = ols_residuals(&ds).unwrap();
    for (got, want) in res.columns[0]
        .iter()
        .zip([1.0 / 6.0, -2.0 / 6.0, 1.0 / 6.0])
    {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn lin_dep_direct_formula() {
    assert!(
        (lin_dep_stat(&[1.0, 0.0, -1.0], &[2.0, -1.0, -1.0]).unwrap() - 3.0 / 2f64.sqrt()).abs()
            < 1e-12
    );
    assert_eq!(
        lin_dep_stat(&[1.0, -1.0, 1.0, -1.0], &[1.0, -1.0, -1.0, 1.0]).unwrap(),
        0.0
    );
    let mut r = rng(81);
    for _ in 0..100 {
        let a = normals(&mut r, 50);
        let b = normals(&mut r, 50);
        assert_eq!(lin_dep_stat(&a, &b).unwrap(), lin_dep_stat(&b, &a).unwrap());
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn spearman_is_pearson_of_ranks() {
    let mut r = rng(91);
    for _ in 0..200 {
        let n = r.random_range(3..=80usize);
        let a = normals(&mut r, n);
        let b: Vec<f64> = a
            .iter()
            .map(|&v| v + r.sample::<f64, _>(StandardNormal))
            .collect();
        let rho = spearman_rho(&a, &b).unwrap();
        assert!((rho - pearson(&tied_ranks(&a), &tied_ranks(&b))).abs() < 1e-10);
    }
    // n = 5 with d = (0, 0, 1, -1, 0)
    let rho = spearman_rho(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap();
    assert!((rho - 0.9).abs() < 1e-12);
    let stat = spearman_stat(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap();
    assert!((stat - 3f64.sqrt() * 0.9 / 0.19f64.sqrt()).abs() < 1e-9);
}

#[test]
fn kendall_hand_counts() {
    let up = [1.0, 2.0, 3.0, 4.0];
    // N_c = 6, tau = 1: sqrt(9 * 4 * 3 / (2 * 13)) = sqrt(108 / 26)
    let full = (108.0f64 / 26.0).sqrt();
    assert!((kendall_stat(&up, &up).unwrap() - full).abs() < 1e-12);
    assert!((kendall_stat(&up, &[4.0, 3.0, 2.0, 1.0]).unwrap() + full).abs() < 1e-12);
    let one_swap = kendall_stat(&up, &[1.0, 2.0, 4.0, 3.0]).unwrap();
    assert!((one_swap - 2.0 / 3.0 * full).abs() < 1e-12);
    assert!((one_swap - 1.3587).abs() < 1e-3);
}

#[test]
fn two_sided_cap_and_prerejection() {
    let inner = 4.0 * 100f64.ln() - 100f64.ln().ln() - 100f64.ln().ln().ln();
    assert!((threshold_bp(100).unwrap() - inner.sqrt()).abs() < 1e-12);
    let mut m = PairMatrix::zeros(100);
    assert_eq!(m.pair_count(), 4950);
    m.set(10, 20, 10.0);
    let out = control_fdr_two_sided(&m, TailDistribution::StandardNormal, 0.05).unwrap();
    assert_eq!(out.rejections, vec![(10, 20)]);
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[test]
fn first_block_condition_number() {
    let mut r = rng(101);
    for _ in 0..20 {
        let sigma = se1_sigma1(5, &mut r).unwrap();
        for k in 0..5 {
            assert!((sigma[(k, k)] - 1.0).abs() < 1e-12);
        }
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| sigma[(i, j)]).collect())
            .collect();
        let eig = jacobi_eigenvalues(rows);
        let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let lmax = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lmin > 0.0);
        assert!((lmax / lmin - 100.0).abs() < 1e-6, "{}", lmax / lmin);
    }
}
