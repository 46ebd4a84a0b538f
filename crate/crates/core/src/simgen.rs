//! Synthetic datasets for the six dependence scenarios.
//!
//! Outcomes follow
//! `Y_i = b0_i + b1_i X1 + (b20_i + U_i) X2 + sigma_i F^{-1}(U_i)`
//! where the uniform scores `U` carry the dependence. Internally every
//! scenario produces standard normal scores `Z` with `U = Phi(Z)`, which keeps
//! the far tails exact when mapping back to Gaussian or Cauchy noise.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::{invalid_arg, Error, Result};
use crate::specialfn::{normal_quantile, phi};

/// The simulation stream: ChaCha with 8 rounds, a counter-based generator.
pub type SimRng = ChaCha8Rng;

/// Variance of the truncated normal covariate `X1` (before truncation).
pub const X1_VARIANCE: f64 = 0.2;
/// Truncation bound for `X1`.
pub const X1_BOUND: f64 = 2.0;
/// Success probability of the binary covariate `X2`.
pub const X2_PROB: f64 = 0.3;
/// Variance of each component of the coefficient mixture `0.5 N(0.1, .) + 0.5 N(-0.1, .)`.
pub const MIXTURE_VARIANCE: f64 = 0.3;
/// Probability that an SE2 noise entry is replaced by a Cauchy outlier.
pub const OUTLIER_RATE: f64 = 0.1;
/// Size of the mutually dependent block.
pub const P1: usize = 5;
/// Number of variables arranged in dependent pairs after the first block.
pub const P2: usize = 40;
/// Number of dependent pairs in the quadratic scenarios.
pub const QUADRATIC_PAIRS: usize = 30;
/// Target condition number of the SE1 first block.
pub const SIGMA1_CONDITION: f64 = 100.0;

const SE5_SLOPE: f64 = 0.992_156_741_649_221_6; // sqrt(63) / 8
const SE5_NOISE: f64 = 0.125;

pub fn stream(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep`: `seed XOR splitmix64(rep)`.
pub fn derive_seed(seed: u64, rep: usize) -> u64 {
    seed ^ splitmix64(rep as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioId {
    Se1,
    Se2,
    Se3,
    Se4,
    Se5,
    Se6,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 6] = [
        ScenarioId::Se1,
        ScenarioId::Se2,
        ScenarioId::Se3,
        ScenarioId::Se4,
        ScenarioId::Se5,
        ScenarioId::Se6,
    ];

    pub fn family(self) -> TailFamily {
        match self {
            ScenarioId::Se6 => TailFamily::Cauchy,
            _ => TailFamily::Gaussian,
        }
    }

    pub fn min_p(self) -> usize {
        match self {
            ScenarioId::Se3 | ScenarioId::Se6 => 2 * QUADRATIC_PAIRS,
            _ => P1 + P2,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = ScenarioId::ALL.iter().position(|s| s == self).unwrap() + 1;
        write!(f, "SE{k}")
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SE1" => Ok(ScenarioId::Se1),
            "SE2" => Ok(ScenarioId::Se2),
            "SE3" => Ok(ScenarioId::Se3),
            "SE4" => Ok(ScenarioId::Se4),
            "SE5" => Ok(ScenarioId::Se5),
            "SE6" => Ok(ScenarioId::Se6),
            _ => Err(invalid_arg(format!(
                "unknown scenario '{s}' (valid: SE1, SE2, SE3, SE4, SE5, SE6)"
            ))),
        }
    }
}

/// Noise distribution `F_Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailFamily {
    Gaussian,
    Cauchy,
}

/// One simulated study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimScenario {
    pub id: ScenarioId,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    /// When false the covariate terms are dropped from the outcome model
    /// (marginal-dependence experiments); `X` is still drawn.
    pub covariate_effects: bool,
}

impl SimScenario {
    pub fn new(id: ScenarioId, n: usize, p: usize, seed: u64) -> Self {
        SimScenario {
            id,
            n,
            p,
            seed,
            covariate_effects: true,
        }
    }

    pub fn marginal(mut self) -> Self {
        self.covariate_effects = false;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < self.id.min_p() {
            return Err(invalid_arg(format!(
                "{} needs p >= {}, got {}",
                self.id,
                self.id.min_p(),
                self.p
            )));
        }
        if self.n < 2 {
            return Err(invalid_arg(format!("n = {} is too small", self.n)));
        }
        Ok(())
    }
}

/// Truly dependent pairs `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub dependent_pairs: BTreeSet<(usize, usize)>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.dependent_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dependent_pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.dependent_pairs.contains(&key)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeCoefficients {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta20: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Generated data plus the quantities needed to check it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    /// Outcomes by column.
    pub y: Vec<Vec<f64>>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Uniform dependence scores by column.
    pub u0: Vec<Vec<f64>>,
    pub truth: GroundTruth,
    pub coeffs: OutcomeCoefficients,
    pub scenario: SimScenario,
}

impl SimData {
    /// Dataset with design `[1, X1, X2]` (conditional) or intercept only.
    pub fn dataset(&self, conditional: bool) -> Result<Dataset> {
        if conditional {
            Dataset::with_covariates(self.y.clone(), &[self.x1.clone(), self.x2.clone()])?
                .with_covariate_names(vec!["X1".into(), "X2".into()])
        } else {
            Dataset::intercept_only(self.y.clone())
        }
    }
}

/// `F_Y^{-1}(u)`.
pub fn f_y_inverse(u: f64, family: TailFamily) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid_arg(format!("u = {u} outside (0, 1)")));
    }
    Ok(match family {
        TailFamily::Gaussian => normal_quantile(u)?,
        TailFamily::Cauchy => (PI * (u - 0.5)).tan(),
    })
}

/// Cauchy quantile at `Phi(z)`, using whichever tail probability is accurate.
fn cauchy_from_score(z: f64) -> f64 {
    if z > 0.0 {
        1.0 / (PI * phi(-z)).tan()
    } else {
        -1.0 / (PI * phi(z)).tan()
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn open01<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * open01(rng)
}

fn mixture<R: Rng>(rng: &mut R) -> f64 {
    let mean = if open01(rng) < 0.5 { 0.1 } else { -0.1 };
    mean + MIXTURE_VARIANCE.sqrt() * normal(rng)
}

fn truncated_x1<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let v = X1_VARIANCE.sqrt() * normal(rng);
        if v.abs() <= X1_BOUND {
            return v;
        }
    }
}

fn cauchy<R: Rng>(rng: &mut R) -> f64 {
    (PI * (open01(rng) - 0.5)).tan()
}

/// Correlation matrix of the SE1 mutually dependent block.
///
/// `M` has zero diagonal and Unif(0.5, 0.6) off-diagonals; `M + M' + aI` is
/// tuned to condition number 100 and then scaled to unit diagonal.
pub fn se1_sigma1<R: Rng>(p1: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if p1 < 2 {
        return Err(invalid_arg(format!("p1 = {p1} must be at least 2")));
    }
    for _ in 0..100 {
        let mut m = DMatrix::<f64>::zeros(p1, p1);
        for r in 0..p1 {
            for c in 0..p1 {
                if r != c {
                    m[(r, c)] = uniform(rng, 0.5, 0.6);
                }
            }
        }
        let sym = &m + m.transpose();
        let (lmin, lmax) = sigma1_shift_bounds(&sym);
        let a = (lmax - SIGMA1_CONDITION * lmin) / (SIGMA1_CONDITION - 1.0);
        if !(a > 0.0 && lmin + a > 0.0) {
            continue;
        }
        let shifted = sym + DMatrix::identity(p1, p1) * a;
        let scale: Vec<f64> = (0..p1).map(|k| shifted[(k, k)].sqrt()).collect();
        return Ok(DMatrix::from_fn(p1, p1, |r, c| {
            shifted[(r, c)] / (scale[r] * scale[c])
        }));
    }
    Err(Error::Numeric(
        "could not tune the SE1 block to the target condition number".into(),
    ))
}

fn sigma1_shift_bounds(sym: &DMatrix<f64>) -> (f64, f64) {
    let eig = sym.clone().symmetric_eigen();
    let lmin = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let lmax = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (lmin, lmax)
}

/// Normal scores of a quadratic pair: `Z` and the score of `Z^2 + E`, `E ~ chi2(1)`.
fn quadratic_scores<R: Rng>(rng: &mut R) -> (f64, f64) {
    let z = normal(rng);
    let e = normal(rng);
    let x = z * z + e * e;
    // U_next = 1 - exp(-x/2); its score is -Phi^{-1}(exp(-x/2))
    let upper = (-x / 2.0).exp().clamp(1e-300, 1.0 - 1e-16);
    (z, -normal_quantile(upper).expect("upper tail in (0, 1)"))
}

/// `n` draws of the quadratic pair on the uniform scale.
pub fn quadratic_pair<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|_| {
            let (a, b) = quadratic_scores(rng);
            (phi(a), phi(b))
        })
        .unzip()
}

fn latent_mix(z: f64, l: f64, e: f64) -> f64 {
    (4.0 * l * z + e) / (16.0 * l * l + 1.0).sqrt()
}

fn se5_piecewise(driver: f64, e: f64) -> f64 {
    if driver.abs() > 1.0 {
        SE5_SLOPE * driver.abs() + SE5_NOISE * e
    } else {
        e
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

fn std_density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Lower (`upper = false`) or upper tail probability of the SE5 piecewise
/// output when its driver and noise are independent standard normals.
pub(crate) fn se5_tail(y: f64, upper: bool) -> f64 {
    let inner = 2.0 * phi(1.0) - 1.0;
    let base = inner * if upper { phi(-y) } else { phi(y) };
    // Phi(8 (y - c z)) is 0 or 1 to double precision outside this window
    let lo = ((y - 1.05) / SE5_SLOPE).max(1.0);
    let hi = ((y + 1.05) / SE5_SLOPE).max(1.0);
    let window = simpson(
        |z| {
            let arg = (y - SE5_SLOPE * z) / SE5_NOISE;
            std_density(z) * if upper { phi(-arg) } else { phi(arg) }
        },
        lo,
        hi,
        256,
    );
    let outside = if upper {
        phi(-hi)
    } else {
        phi(-1.0) - phi(-lo)
    };
    base + 2.0 * (window + outside)
}

/// Normal score of an SE5 output, so that the piecewise construction has
/// exactly uniform `U` and standard normal marginals.
fn se5_score(y: f64) -> f64 {
    // the law is skewed (median above 0), so invert whichever tail is smaller
    let (tiny, half) = (1e-300, 0.5 + 1e-12);
    let lower = se5_tail(y, false);
    if lower <= 0.5 {
        normal_quantile(lower.clamp(tiny, half)).expect("tail in (0, 1)")
    } else {
        -normal_quantile(se5_tail(y, true).clamp(tiny, half)).expect("tail in (0, 1)")
    }
}

fn block_truth(p1: usize, p2: usize) -> GroundTruth {
    let mut set = BTreeSet::new();
    for i in 0..p1 {
        for j in i + 1..p1 {
            set.insert((i, j));
        }
    }
    for i in (p1..p1 + p2).step_by(2) {
        set.insert((i, i + 1));
    }
    GroundTruth {
        dependent_pairs: set,
    }
}

fn quadratic_truth() -> GroundTruth {
    GroundTruth {
        dependent_pairs: (0..QUADRATIC_PAIRS).map(|m| (2 * m, 2 * m + 1)).collect(),
    }
}

/// Ground-truth dependent pairs of a scenario.
pub fn truth_for(id: ScenarioId) -> GroundTruth {
    match id {
        ScenarioId::Se3 | ScenarioId::Se6 => quadratic_truth(),
        _ => block_truth(P1, P2),
    }
}

/// Normal scores `Z` (by column) carrying the scenario's dependence.
fn dependence_scores<R: Rng>(
    id: ScenarioId,
    n: usize,
    p: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let mut z = vec![vec![0.0; n]; p];
    match id {
        ScenarioId::Se1 | ScenarioId::Se2 => {
            let sigma1 = se1_sigma1(P1, rng)?;
            let chol = sigma1
                .cholesky()
                .ok_or_else(|| Error::Numeric("SE1 block is not positive definite".into()))?;
            let l = chol.l();
            let rhos: Vec<f64> = (0..P2 / 2)
                .map(|_| {
                    if open01(rng) < 0.5 {
                        uniform(rng, 0.2, 0.6)
                    } else {
                        uniform(rng, -0.6, -0.2)
                    }
                })
                .collect();
            for k in 0..n {
                let e: Vec<f64> = (0..P1).map(|_| normal(rng)).collect();
                for r in 0..P1 {
                    z[r][k] = (0..=r).map(|c| l[(r, c)] * e[c]).sum();
                }
                for (b, &rho) in rhos.iter().enumerate() {
                    let i = P1 + 2 * b;
                    let a = normal(rng);
                    let e = normal(rng);
                    z[i][k] = a;
                    z[i + 1][k] = rho * a + (1.0 - rho * rho).sqrt() * e;
                }
                for col in z.iter_mut().skip(P1 + P2) {
                    col[k] = normal(rng);
                }
            }
        }
        ScenarioId::Se3 | ScenarioId::Se6 => {
            for k in 0..n {
                for m in 0..QUADRATIC_PAIRS {
                    let (a, b) = quadratic_scores(rng);
                    z[2 * m][k] = a;
                    z[2 * m + 1][k] = b;
                }
                for col in z.iter_mut().skip(2 * QUADRATIC_PAIRS) {
                    col[k] = normal(rng);
                }
            }
        }
        ScenarioId::Se4 => {
            for k in 0..n {
                let z0 = normal(rng);
                for col in z.iter_mut().take(P1) {
                    let l = uniform(rng, -1.0, 1.0);
                    col[k] = latent_mix(z0, l, normal(rng));
                }
                for i in (P1..P1 + P2).step_by(2) {
                    let a = normal(rng);
                    let l = uniform(rng, -1.0, 1.0);
                    z[i][k] = a;
                    z[i + 1][k] = latent_mix(a, l, normal(rng));
                }
                for col in z.iter_mut().skip(P1 + P2) {
                    col[k] = normal(rng);
                }
            }
        }
        ScenarioId::Se5 => {
            for k in 0..n {
                let z0 = normal(rng);
                for col in z.iter_mut().take(P1) {
                    col[k] = se5_score(se5_piecewise(z0, normal(rng)));
                }
                for i in (P1..P1 + P2).step_by(2) {
                    let a = normal(rng);
                    z[i][k] = a;
                    z[i + 1][k] = se5_score(se5_piecewise(a, normal(rng)));
                }
                for col in z.iter_mut().skip(P1 + P2) {
                    col[k] = normal(rng);
                }
            }
        }
    }
    Ok(z)
}

/// Draws one dataset; the same scenario (seed included) gives identical output.
pub fn generate(scenario: &SimScenario) -> Result<SimData> {
    scenario.validate()?;
    let SimScenario { id, n, p, .. } = *scenario;
    let mut rng = stream(scenario.seed);

    let beta0: Vec<f64> = (0..p).map(|_| uniform(&mut rng, 0.0, 0.5)).collect();
    let beta1: Vec<f64> = (0..p).map(|_| mixture(&mut rng)).collect();
    let beta20: Vec<f64> = (0..p).map(|_| mixture(&mut rng)).collect();
    let sigma: Vec<f64> = (0..p).map(|_| uniform(&mut rng, 0.2, 0.5)).collect();

    let x1: Vec<f64> = (0..n).map(|_| truncated_x1(&mut rng)).collect();
    let x2: Vec<f64> = (0..n)
        .map(|_| if open01(&mut rng) < X2_PROB { 1.0 } else { 0.0 })
        .collect();

    let scores = dependence_scores(id, n, p, &mut rng)?;
    let u0: Vec<Vec<f64>> = scores
        .iter()
        .map(|c| c.iter().map(|&v| phi(v)).collect())
        .collect();
    let mut noise: Vec<Vec<f64>> = match id.family() {
        TailFamily::Gaussian => scores.clone(),
        TailFamily::Cauchy => scores
            .iter()
            .map(|c| c.iter().map(|&v| cauchy_from_score(v)).collect())
            .collect(),
    };
    if id == ScenarioId::Se2 {
        for col in noise.iter_mut() {
            for v in col.iter_mut() {
                if open01(&mut rng) < OUTLIER_RATE {
                    *v = cauchy(&mut rng);
                }
            }
        }
    }

    let y: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let mut v = beta0[i] + sigma[i] * noise[i][k];
                    if scenario.covariate_effects {
                        v += beta1[i] * x1[k] + (beta20[i] + u0[i][k]) * x2[k];
                    }
                    v
                })
                .collect()
        })
        .collect();

    Ok(SimData {
        y,
        x1,
        x2,
        u0,
        truth: truth_for(id),
        coeffs: OutcomeCoefficients {
            beta0,
            beta1,
            beta20,
            sigma,
        },
        scenario: *scenario,
    })
}

/// Conditional `tau`-quantile of outcome `i` at covariates `(x1, x2)`.
pub fn conditional_quantile(
    coeffs: &OutcomeCoefficients,
    family: TailFamily,
    i: usize,
    x1: f64,
    x2: f64,
    tau: f64,
) -> Result<f64> {
    Ok(coeffs.beta0[i]
        + coeffs.beta1[i] * x1
        + (coeffs.beta20[i] + tau) * x2
        + coeffs.sigma[i] * f_y_inverse(tau, family)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_y_inverse_examples() {
        assert_eq!(f_y_inverse(0.5, TailFamily::Gaussian).unwrap(), 0.0);
        assert!((f_y_inverse(0.75, TailFamily::Cauchy).unwrap() - 1.0).abs() < 1e-12);
        assert!(f_y_inverse(0.5, TailFamily::Cauchy).unwrap().abs() < 1e-15);
        assert!(f_y_inverse(1.0, TailFamily::Gaussian).is_err());
    }

    #[test]
    fn chi2_two_cdf_at_median() {
        let x: f64 = 1.386_294;
        assert!((1.0 - (-x / 2.0).exp() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn scenario_parsing() {
        assert_eq!("se4".parse::<ScenarioId>().unwrap(), ScenarioId::Se4);
        let err = "SE9".parse::<ScenarioId>().unwrap_err().to_string();
        assert!(err.contains("SE1") && err.contains("SE6"));
        assert_eq!(ScenarioId::Se6.to_string(), "SE6");
    }

    #[test]
    fn truth_sizes() {
        for id in ScenarioId::ALL {
            assert_eq!(truth_for(id).len(), 30, "{id}");
        }
        assert!(truth_for(ScenarioId::Se3).contains(59, 58));
        assert!(truth_for(ScenarioId::Se1).contains(0, 4));
        assert!(truth_for(ScenarioId::Se1).contains(43, 44));
        assert!(!truth_for(ScenarioId::Se1).contains(44, 45));
    }

    #[test]
    fn rejects_small_p() {
        assert!(generate(&SimScenario::new(ScenarioId::Se3, 50, 59, 1)).is_err());
        assert!(generate(&SimScenario::new(ScenarioId::Se1, 50, 44, 1)).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: BTreeSet<u64> = (0..1000).map(|r| derive_seed(42, r)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn se5_tails_sum_to_one() {
        for y in [-3.0, -0.5, 0.0, 0.7, 1.0, 2.5, 5.0] {
            let s = se5_tail(y, false) + se5_tail(y, true);
            assert!((s - 1.0).abs() < 1e-9, "y={y}: {s}");
        }
    }
}
