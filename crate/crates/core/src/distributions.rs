//! CDFs of the chi-square family: central and noncentral chi-square and F,
//! plus signed weighted sums of independent chi-squares (generalized F),
//! which back every swap-probability bound.
//!
//! All results are [`Probability`] values that carry both tails. The noncentral
//! laws use Poisson mixtures truncated with an explicit tail bound; the
//! weighted sums invert the characteristic function by numerical integration
//! of the Imhof integrand and report the achieved absolute error.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by std methods when dev-dependencies link std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::{beta_inc, gamma_inc, ln_gamma};

/// Neglected Poisson mass allowed when truncating a noncentral series.
pub const SERIES_TAIL_TOL: f64 = 1e-12;
/// Hard cap on the number of summed Poisson terms.
pub const SERIES_MAX_TERMS: u64 = 100_000;
/// Absolute accuracy a characteristic-function inversion must reach.
pub const QUADFORM_ACCURACY: f64 = 1e-6;

const QUADFORM_INTERNAL_TOL: f64 = 1e-13;
const QUADFORM_MAX_PANELS: usize = 4_000;

/// Degrees of freedom of a real chi-square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dof(u32);

impl Dof {
    pub fn new(value: u32) -> Result<Self> {
        if value == 0 {
            return Err(Error::Validation("degrees of freedom must be >= 1".into()));
        }
        Ok(Dof(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    fn half(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl TryFrom<u32> for Dof {
    type Error = Error;
    fn try_from(value: u32) -> Result<Self> {
        Dof::new(value)
    }
}

impl From<Dof> for u32 {
    fn from(d: Dof) -> u32 {
        d.0
    }
}

/// Noncentrality parameter of a noncentral chi-square or F law.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Noncentrality(f64);

impl Noncentrality {
    pub const ZERO: Noncentrality = Noncentrality(0.0);

    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain {
                what: "noncentrality",
                value: delta,
            });
        }
        Ok(Noncentrality(delta))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Noncentrality {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Noncentrality::new(value)
    }
}

impl From<Noncentrality> for f64 {
    fn from(n: Noncentrality) -> f64 {
        n.0
    }
}

/// A probability stored together with its complement. Whichever tail is
/// smaller was computed directly, so `ln()` stays accurate far below 1e-10.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    value: f64,
    complement: f64,
}

impl Probability {
    pub fn new(value: f64, complement: f64) -> Self {
        Probability {
            value: value.clamp(0.0, 1.0),
            complement: complement.clamp(0.0, 1.0),
        }
    }

    pub fn from_value(value: f64) -> Self {
        Self::new(value, 1.0 - value)
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn complement(self) -> f64 {
        self.complement
    }

    /// Natural log of the probability, taken from the complementary branch
    /// when the probability is close to one.
    pub fn ln(self) -> f64 {
        if self.value < 0.5 {
            self.value.ln()
        } else {
            (-self.complement).ln_1p()
        }
    }

    pub fn ln_complement(self) -> f64 {
        if self.complement < 0.5 {
            self.complement.ln()
        } else {
            (-self.value).ln_1p()
        }
    }

    pub fn swap(self) -> Self {
        Probability {
            value: self.complement,
            complement: self.value,
        }
    }
}

/// Positively weighted sum `sum a_i xi_i` of independent chi-squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedChiSquareMix {
    weights: Vec<f64>,
    dofs: Vec<Dof>,
}

impl WeightedChiSquareMix {
    pub fn new(weights: Vec<f64>, dofs: Vec<Dof>) -> Result<Self> {
        if weights.len() != dofs.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: dofs.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::Validation("empty chi-square mix".into()));
        }
        if let Some(&w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain {
                what: "chi-square mix weight",
                value: w,
            });
        }
        Ok(WeightedChiSquareMix { weights, dofs })
    }

    pub fn single(weight: f64, dof: Dof) -> Result<Self> {
        Self::new(alloc::vec![weight], alloc::vec![dof])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.weights.iter().map(|w| w * c).collect(),
            self.dofs.clone(),
        )
    }
}

/// Outcome of a characteristic-function inversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadformProbability {
    pub probability: Probability,
    /// Estimated absolute error (quadrature plus truncated tail).
    pub abs_error: f64,
}

fn check_x(x: f64, what: &'static str) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain { what, value: x });
    }
    Ok(())
}

/// `P(chi2_d <= x)`.
pub fn chi2_cdf(x: f64, d: Dof) -> Result<Probability> {
    check_x(x, "chi2_cdf")?;
    let (p, q) = gamma_inc(d.half(), x / 2.0)?;
    Ok(Probability::new(p, q))
}

/// `P(chi2_d(delta) <= x)` as a Poisson mixture of central chi-squares.
pub fn noncentral_chi2_cdf(x: f64, d: Dof, nc: Noncentrality) -> Result<Probability> {
    check_x(x, "noncentral_chi2_cdf")?;
    if nc.get() == 0.0 {
        return chi2_cdf(x, d);
    }
    if x.is_infinite() {
        return Ok(Probability::new(1.0, 0.0));
    }
    poisson_mixture(nc.get() / 2.0, |j| {
        gamma_inc(d.half() + j as f64, x / 2.0)
    })
}

/// `P(F_{d1,d2} <= x)` through the regularized incomplete beta function.
pub fn f_cdf(x: f64, d1: Dof, d2: Dof) -> Result<Probability> {
    check_x(x, "f_cdf")?;
    if x.is_infinite() {
        return Ok(Probability::new(1.0, 0.0));
    }
    let (a, b) = (d1.half(), d2.half());
    let n = f64::from(d1.get()) * x;
    let y = n / (n + f64::from(d2.get()));
    let (p, q) = beta_inc(a, b, y)?;
    Ok(Probability::new(p, q))
}

/// `P(F_{d1,d2}(delta) <= x)`. A zero noncentrality goes through [`f_cdf`].
pub fn noncentral_f_cdf(x: f64, d1: Dof, d2: Dof, nc: Noncentrality) -> Result<Probability> {
    check_x(x, "noncentral_f_cdf")?;
    if nc.get() == 0.0 {
        return f_cdf(x, d1, d2);
    }
    if x.is_infinite() {
        return Ok(Probability::new(1.0, 0.0));
    }
    let n = f64::from(d1.get()) * x;
    let y = n / (n + f64::from(d2.get()));
    let (a, b) = (d1.half(), d2.half());
    poisson_mixture(nc.get() / 2.0, |j| beta_inc(a + j as f64, b, y))
}

/// Chernoff bound on `ln P(N <= k)` for `k <= lambda`, or `ln P(N >= k)` for
/// `k >= lambda`, with `N ~ Poisson(lambda)`.
fn ln_poisson_tail_bound(lambda: f64, k: f64) -> f64 {
    if k <= 0.0 {
        return -lambda;
    }
    -lambda + k - k * (k / lambda).ln()
}

/// Sums `sum_j Pois(j; lambda) (lower_j, upper_j)` where `lower_j` is
/// nonincreasing in `j`. Terms are kept for the Poisson window outside of
/// which the mass is below `SERIES_TAIL_TOL`; the lower-tail sum also stops
/// early once `lower_j` itself is negligible, since every later term is
/// smaller still.
fn poisson_mixture(
    lambda: f64,
    mut term: impl FnMut(u64) -> Result<(f64, f64)>,
) -> Result<Probability> {
    let half_tol = SERIES_TAIL_TOL / 2.0;
    let ln_half_tol = half_tol.ln();
    let mode = lambda.floor();

    // Largest lower cut whose left tail P(N <= lo - 1) is below half_tol.
    let lo = if -lambda > ln_half_tol {
        0.0
    } else {
        let (mut good, mut bad) = (0.0_f64, mode);
        // invariant: tail(good - 1) <= tol, tail(bad - 1) > tol (or bad == mode)
        if ln_poisson_tail_bound(lambda, mode - 1.0) <= ln_half_tol {
            good = mode;
        } else {
            while bad - good > 1.0 {
                let mid = ((good + bad) / 2.0).floor();
                if ln_poisson_tail_bound(lambda, mid - 1.0) <= ln_half_tol {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
        }
        good
    };
    // Smallest upper cut whose right tail P(N >= hi + 1) is below half_tol.
    let hi = {
        let mut bad = mode.max(lambda.ceil());
        let mut step = 1.0_f64.max(lambda.sqrt());
        let mut good = bad + step;
        while ln_poisson_tail_bound(lambda, good + 1.0) > ln_half_tol {
            bad = good;
            step *= 2.0;
            good += step;
        }
        while good - bad > 1.0 {
            let mid = ((good + bad) / 2.0).floor();
            if ln_poisson_tail_bound(lambda, mid + 1.0) <= ln_half_tol {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };

    let ln_lambda = lambda.ln();
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut mass = 0.0;
    let mut terms: u64 = 0;
    let mut j = lo as u64;
    let end = hi as u64;
    let mut stopped_early = false;
    while j <= end {
        terms += 1;
        if terms > SERIES_MAX_TERMS {
            return Err(Error::Accuracy {
                what: "noncentral series exceeded its term cap",
                achieved: 1.0 - mass,
            });
        }
        let jf = j as f64;
        let w = (-lambda + jf * ln_lambda - ln_gamma(jf + 1.0)).exp();
        let (l, u) = term(j)?;
        lower += w * l;
        upper += w * u;
        mass += w;
        if l < half_tol {
            stopped_early = true;
            break;
        }
        j += 1;
    }
    if stopped_early {
        // Remaining lower-tail contributions are each below l_j <= half_tol.
        Ok(Probability::new(lower, 1.0 - lower))
    } else {
        Ok(Probability::new(lower, upper))
    }
}

/// Imhof characteristic-function inversion of `P(Q < 0)` with
/// `Q = sum_k lambda_k chi2_{h_k}` (signed coefficients).
fn imhof_below_zero(coeffs: &[(f64, f64)]) -> Result<QuadformProbability> {
    let scale = coeffs.iter().map(|(l, _)| l.abs()).fold(0.0, f64::max);
    let terms: Vec<(f64, f64)> = coeffs.iter().map(|&(l, h)| (l / scale, h)).collect();

    // Integrand sin(theta(u)) / (u rho(u)).
    let theta0: f64 = terms.iter().map(|(l, h)| 0.5 * h * l).sum();
    let integrand = |u: f64| -> f64 {
        if u == 0.0 {
            return theta0;
        }
        let mut theta = 0.0;
        let mut ln_rho = 0.0;
        for &(l, h) in &terms {
            let lu = l * u;
            theta += 0.5 * h * lu.atan();
            ln_rho += 0.25 * h * (lu * lu).ln_1p();
        }
        theta.sin() / (u * ln_rho.exp())
    };

    // Upper limit: with terms sorted by |lambda| descending, any prefix S gives
    // rho(u) >= prod_S (|l| u)^{h/2}, hence a tail bound of
    // 1 / (pi s_S C_S U^{s_S}). Take the best prefix.
    let mut sorted = terms.clone();
    sorted.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    let tail_tol = QUADFORM_INTERNAL_TOL;
    let mut s = 0.0;
    let mut ln_c = 0.0;
    let mut ln_upper = f64::INFINITY;
    for &(l, h) in &sorted {
        s += h / 2.0;
        ln_c += (h / 2.0) * l.abs().ln();
        let candidate = (-(PI * s * tail_tol).ln() - ln_c) / s;
        ln_upper = ln_upper.min(candidate);
    }
    let upper = ln_upper.exp().max(1e-6);

    // Geometric breakpoints starting at the scale where rho starts to decay.
    let curvature: f64 = terms.iter().map(|(l, h)| h * l * l).sum();
    let first = (2.0 / curvature.sqrt()).min(upper);
    let mut breaks = alloc::vec![0.0, first];
    while *breaks.last().unwrap() < upper {
        let next = (breaks.last().unwrap() * 2.0).min(upper);
        breaks.push(next);
    }
    let integral = quadrature::integrate(
        integrand,
        &breaks,
        QUADFORM_INTERNAL_TOL * PI,
        QUADFORM_MAX_PANELS,
    );
    let abs_error = (integral.error / PI) + tail_tol;
    if !integral.value.is_finite() || abs_error > QUADFORM_ACCURACY {
        return Err(Error::Accuracy {
            what: "characteristic-function inversion missed its accuracy target",
            achieved: abs_error,
        });
    }
    let lower = 0.5 - integral.value / PI;
    let upper_tail = 0.5 + integral.value / PI;
    Ok(QuadformProbability {
        probability: Probability::new(lower, upper_tail),
        abs_error,
    })
}

/// `P(sum a_i xi_i - sum b_j nu_j < 0)` for independent chi-squares.
pub fn quadform_below_zero(
    mix_pos: &WeightedChiSquareMix,
    mix_neg: &WeightedChiSquareMix,
) -> Result<QuadformProbability> {
    let coeffs: Vec<(f64, f64)> = mix_pos
        .weights()
        .iter()
        .zip(mix_pos.dofs())
        .map(|(&w, d)| (w, f64::from(d.get())))
        .chain(
            mix_neg
                .weights()
                .iter()
                .zip(mix_neg.dofs())
                .map(|(&w, d)| (-w, f64::from(d.get()))),
        )
        .collect();
    imhof_below_zero(&coeffs)
}

/// `P( (sum_i w_i xi_i / (p * num_dof_each)) / (nu / den_dof) < 1 )` with
/// `xi_i ~ chi2_{num_dof_each}` and `nu ~ chi2_{den_dof}`.
pub fn generalized_f_below_one(
    weights: &[f64],
    num_dof_each: Dof,
    den_dof: Dof,
) -> Result<QuadformProbability> {
    if weights.is_empty() {
        return Err(Error::Validation("generalized F needs at least one weight".into()));
    }
    let p = weights.len() as f64;
    let num_total = p * f64::from(num_dof_each.get());
    let pos = WeightedChiSquareMix::new(
        weights.iter().map(|w| w / num_total).collect(),
        alloc::vec![num_dof_each; weights.len()],
    )?;
    let neg = WeightedChiSquareMix::single(1.0 / f64::from(den_dof.get()), den_dof)?;
    quadform_below_zero(&pos, &neg)
}
