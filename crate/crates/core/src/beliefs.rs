//! Descriptive beliefs about group mean opinions and their two update channels.
//!
//! Organizational signals are filtered through a uniform constraint window and
//! folded in with a Monte Carlo Bayes update; expressed community opinions
//! enter through a conjugate Beta pseudo-count update.

use rand::Rng;

use crate::error::{check_range, Error, Result};
use crate::game::Side;
use crate::scalar::{clamp, Scalar};

/// Beta-distributed belief about one group's mean opinion.
///
/// The Beta mean `a / (a + b)` is read directly as the believed mean opinion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBelief<F> {
    pub a: F,
    pub b: F,
    /// Group the belief describes.
    pub side: Side,
}

impl<F: Scalar> BetaBelief<F> {
    pub fn new(a: F, b: F, side: Side) -> Result<Self> {
        if !(a > F::zero()) || !a.is_finite() {
            return Err(Error::Domain { name: "a", value: a.to_f64_lossy(), expected: "a > 0" });
        }
        if !(b > F::zero()) || !b.is_finite() {
            return Err(Error::Domain { name: "b", value: b.to_f64_lossy(), expected: "b > 0" });
        }
        Ok(BetaBelief { a, b, side })
    }

    pub fn mean(&self) -> F {
        self.a / (self.a + self.b)
    }

    pub fn pseudo_count(&self) -> F {
        self.a + self.b
    }

    /// Log density up to an additive constant.
    fn log_kernel(&self, x: F) -> F {
        (self.a - F::one()) * x.ln() + (self.b - F::one()) * (F::one() - x).ln()
    }

    /// Beta with the given mean and the same pseudo-count total.
    pub fn moment_matched(&self, mean: F) -> Result<Self> {
        let eps = F::lit(1e-9);
        let m = clamp(mean, eps, F::one() - eps);
        let total = self.pseudo_count();
        BetaBelief::new(m * total, (F::one() - m) * total, self.side)
    }
}

/// Uniform bounded-confidence window of width `tau` around a believed mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintWindow<F> {
    tau: F,
}

impl<F: Scalar> ConstraintWindow<F> {
    pub fn new(tau: F) -> Result<Self> {
        if tau > F::zero() && tau.is_finite() {
            Ok(ConstraintWindow { tau })
        } else {
            Err(Error::Domain { name: "tau", value: tau.to_f64_lossy(), expected: "tau > 0" })
        }
    }

    pub fn tau(&self) -> F {
        self.tau
    }

    pub fn half_width(&self) -> F {
        self.tau / F::lit(2.0)
    }

    /// True when `|signal - o_hat| <= tau / 2`; the boundary is inside.
    pub fn contains(&self, signal: F, o_hat: F) -> bool {
        // a few ulps of slack so that e.g. |0.8 - 0.7| counts as 0.1
        let slack = F::one() + F::lit(8.0) * F::epsilon();
        (signal - o_hat).abs() <= self.half_width() * slack
    }

    /// `[signal - tau/2, signal + tau/2]`.
    pub fn interval(&self, signal: F) -> (F, F) {
        (signal - self.half_width(), signal + self.half_width())
    }
}

impl<F: Scalar> Default for ConstraintWindow<F> {
    fn default() -> Self {
        ConstraintWindow { tau: F::lit(0.2) }
    }
}

/// Likelihood of a signal given the true mean: `1/tau` inside the window, 0 outside.
pub fn constraint_likelihood<F: Scalar>(signal: F, o_hat: F, window: &ConstraintWindow<F>) -> F {
    if window.contains(signal, o_hat) {
        F::one() / window.tau()
    } else {
        F::zero()
    }
}

/// Probability masses over `bins` equal-width bins of one side's support.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedBelief<F> {
    side: Side,
    weights: Vec<F>,
}

impl<F: Scalar> GriddedBelief<F> {
    pub fn uniform(side: Side, bins: usize) -> Self {
        let w = F::one() / F::from_usize(bins).unwrap();
        GriddedBelief { side, weights: vec![w; bins] }
    }

    /// Normalizes the supplied non-negative weights.
    pub fn from_weights(side: Side, weights: Vec<F>) -> Result<Self> {
        let total: F = weights.iter().copied().sum();
        if weights.is_empty() || weights.iter().any(|w| !(*w >= F::zero())) || !(total > F::zero()) {
            return Err(Error::Domain {
                name: "weights",
                value: total.to_f64_lossy(),
                expected: "non-negative with positive total",
            });
        }
        Ok(GriddedBelief { side, weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn bin_width(&self) -> F {
        let (lo, hi) = self.side.support::<F>();
        (hi - lo) / F::from_usize(self.bins()).unwrap()
    }

    /// `[left, right)` edges of bin `k`.
    pub fn bin_edges(&self, k: usize) -> (F, F) {
        let (lo, _) = self.side.support::<F>();
        let w = self.bin_width();
        (lo + w * F::from_usize(k).unwrap(), lo + w * F::from_usize(k + 1).unwrap())
    }

    pub fn bin_center(&self, k: usize) -> F {
        let (l, r) = self.bin_edges(k);
        (l + r) / F::lit(2.0)
    }

    pub fn bin_of(&self, x: F) -> usize {
        let (lo, _) = self.side.support::<F>();
        let k = ((x - lo) / self.bin_width()).floor().to_f64_lossy();
        (k.max(0.0) as usize).min(self.bins() - 1)
    }

    fn density(&self, x: F) -> F {
        let (lo, hi) = self.side.support::<F>();
        if x < lo || x > hi {
            return F::zero();
        }
        self.weights[self.bin_of(x)] / self.bin_width()
    }

    pub fn mean(&self) -> F {
        self.weights.iter().enumerate().map(|(k, &w)| w * self.bin_center(k)).sum()
    }
}

/// Prior belief usable in a window update.
pub trait WindowPrior<F: Scalar> {
    fn side(&self) -> Side;
    /// Log of an unnormalized density; `None` where the density is zero.
    fn log_density(&self, x: F) -> Option<F>;
}

impl<F: Scalar> WindowPrior<F> for BetaBelief<F> {
    fn side(&self) -> Side {
        self.side
    }

    fn log_density(&self, x: F) -> Option<F> {
        if x <= F::zero() || x >= F::one() {
            return None;
        }
        let l = self.log_kernel(x);
        l.is_finite().then_some(l)
    }
}

impl<F: Scalar> WindowPrior<F> for GriddedBelief<F> {
    fn side(&self) -> Side {
        self.side
    }

    fn log_density(&self, x: F) -> Option<F> {
        let d = self.density(x);
        (d > F::zero()).then(|| d.ln())
    }
}

/// Result of a window update.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<F> {
    pub belief: GriddedBelief<F>,
    /// The window held no prior mass; `belief` carries the prior unchanged.
    pub rejected: bool,
}

/// Bayes update of a belief on a constraint-window signal.
///
/// The posterior `C(signal; o, tau) * prior(o)`, restricted to the side's
/// support, is estimated by importance sampling: `n_samples` stratified draws
/// from the uniform proposal over window ∩ support, weighted by the prior
/// density, binned onto `bins` bins. A window without prior mass yields the
/// prior (gridded) and `rejected = true`.
pub fn posterior_from_signal<F: Scalar, R: Rng + ?Sized>(
    prior: &impl WindowPrior<F>,
    signal: F,
    window: &ConstraintWindow<F>,
    n_samples: usize,
    bins: usize,
    rng: &mut R,
) -> Result<Posterior<F>> {
    let side = prior.side();
    let (s_lo, s_hi) = side.support::<F>();
    check_range("signal", signal, s_lo, s_hi, "signal within the side's support")?;
    if n_samples == 0 || bins == 0 {
        return Err(Error::Domain { name: "n_samples", value: 0.0, expected: "n_samples, bins >= 1" });
    }
    let mut grid = GriddedBelief::<F> { side, weights: vec![F::zero(); bins] };
    let (w_lo, w_hi) = window.interval(signal);
    let lo = w_lo.max(s_lo);
    let hi = w_hi.min(s_hi);

    let rejected = |grid: GriddedBelief<F>| -> Posterior<F> {
        let mut belief = grid;
        for k in 0..bins {
            let c = belief.bin_center(k);
            let (l, r) = belief.bin_edges(k);
            // prior mass per bin by a midpoint rule on the density
            belief.weights[k] = prior.log_density(c).map_or(F::zero(), |d| d.exp()) * (r - l);
        }
        let belief = GriddedBelief::from_weights(side, belief.weights)
            .unwrap_or_else(|_| GriddedBelief::uniform(side, bins));
        Posterior { belief, rejected: true }
    };

    if !(hi > lo) {
        return Ok(rejected(grid));
    }

    let n = F::from_usize(n_samples).unwrap();
    let width = hi - lo;
    let mut draws: Vec<(F, F)> = Vec::with_capacity(n_samples);
    let mut max_log = F::neg_infinity();
    for k in 0..n_samples {
        let u = (F::from_usize(k).unwrap() + F::lit(rng.random::<f64>())) / n;
        let x = lo + u * width;
        if let Some(l) = prior.log_density(x) {
            max_log = max_log.max(l);
            draws.push((x, l));
        }
    }
    if draws.is_empty() || !max_log.is_finite() {
        return Ok(rejected(grid));
    }
    for (x, l) in draws {
        let k = grid.bin_of(x);
        grid.weights[k] = grid.weights[k] + (l - max_log).exp();
    }
    let belief = GriddedBelief::from_weights(side, grid.weights)?;
    Ok(Posterior { belief, rejected: false })
}

/// Outcome of applying an organizational signal to a Beta belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalUptake {
    Accepted,
    /// The signal lies further than `tau / 2` from the believed mean.
    OutOfWindow,
    /// The window carried no prior mass.
    NoMass,
}

/// Window update of a Beta belief, moment-matched back to a Beta with the same
/// pseudo-count total.
///
/// A receiver only takes up signals the constraint window allows around its
/// current believed mean; anything else leaves the belief untouched.
pub fn update_from_signal<F: Scalar, R: Rng + ?Sized>(
    belief: &BetaBelief<F>,
    signal: F,
    window: &ConstraintWindow<F>,
    n_samples: usize,
    bins: usize,
    rng: &mut R,
) -> Result<(BetaBelief<F>, SignalUptake)> {
    if constraint_likelihood(signal, belief.mean(), window) == F::zero() {
        return Ok((*belief, SignalUptake::OutOfWindow));
    }
    let post = posterior_from_signal(belief, signal, window, n_samples, bins, rng)?;
    if post.rejected {
        return Ok((*belief, SignalUptake::NoMass));
    }
    Ok((belief.moment_matched(post.belief.mean())?, SignalUptake::Accepted))
}

/// Conjugate update on the mean expressed opinion: `Beta(a + s, b + 1 - s)`.
pub fn beta_update_from_community<F: Scalar>(belief: &BetaBelief<F>, mean_expressed: F) -> Result<BetaBelief<F>> {
    let s = check_range("mean_expressed", mean_expressed, F::zero(), F::one(), "0 <= mean <= 1")?;
    BetaBelief::new(belief.a + s, belief.b + (F::one() - s), belief.side)
}
