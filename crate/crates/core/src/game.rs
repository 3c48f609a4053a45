//! The opinion-expression game.
//!
//! A focal player with private opinion `o` picks a rhetorical intensity
//! `gamma` in `[0, 1]` against a partner playing `gamma_other`. With believed
//! probability `n_hat` the partner shares the focal player's side (utility
//! boosted by `lambda_in`, partner rhetoric substitutes for own rhetoric),
//! otherwise the partner is from the other side (utility dampened by
//! `lambda_out^gamma_other`). Rhetoric costs `alpha` per unit.

use crate::error::{check_range, Error, Result};
use crate::scalar::{clamp, Scalar};

/// Which side of the focal issue an opinion (or a belief, or a signal) is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Approval,
    Disapproval,
}

impl Side {
    pub fn of<F: Scalar>(opinion: F) -> Side {
        if opinion >= F::lit(0.5) {
            Side::Approval
        } else {
            Side::Disapproval
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Approval => Side::Disapproval,
            Side::Disapproval => Side::Approval,
        }
    }

    /// Opinion interval `[lo, hi]` belonging to this side.
    pub fn support<F: Scalar>(self) -> (F, F) {
        match self {
            Side::Approval => (F::lit(0.5), F::one()),
            Side::Disapproval => (F::zero(), F::lit(0.5)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Approval => "approval",
            Side::Disapproval => "disapproval",
        }
    }
}

/// Exogenous constants of one game plus the behavioural silence cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams<F> {
    pub alpha: F,
    pub lambda_in: F,
    pub lambda_out: F,
    pub n_hat: F,
    pub gamma_silence: F,
}

impl<F: Scalar> GameParams<F> {
    pub fn new(alpha: F, lambda_in: F, lambda_out: F, n_hat: F, gamma_silence: F) -> Result<Self> {
        let p = GameParams {
            alpha,
            lambda_in,
            lambda_out,
            n_hat,
            gamma_silence,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= F::zero()) || !self.alpha.is_finite() {
            return Err(domain("alpha", self.alpha, "alpha >= 0"));
        }
        if !(self.lambda_in > F::one()) || !self.lambda_in.is_finite() {
            return Err(domain("lambda_in", self.lambda_in, "lambda_in > 1"));
        }
        if !(self.lambda_out > F::zero() && self.lambda_out < F::one()) {
            return Err(domain("lambda_out", self.lambda_out, "0 < lambda_out < 1"));
        }
        check_range("n_hat", self.n_hat, F::zero(), F::one(), "0 <= n_hat <= 1")?;
        check_range(
            "gamma_silence",
            self.gamma_silence,
            F::zero(),
            F::one(),
            "0 <= gamma_silence <= 1",
        )?;
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: F) -> Self {
        self.alpha = alpha;
        self
    }
}

impl<F: Scalar> Default for GameParams<F> {
    fn default() -> Self {
        GameParams {
            alpha: F::lit(0.6),
            lambda_in: F::lit(2.0),
            lambda_out: F::lit(0.5),
            n_hat: F::lit(0.5),
            gamma_silence: F::lit(0.3),
        }
    }
}

fn domain<F: Scalar>(name: &'static str, value: F, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value: value.to_f64_lossy(),
        expected,
    }
}

fn check_gamma<F: Scalar>(name: &'static str, g: F) -> Result<F> {
    check_range(name, g, F::zero(), F::one(), "0 <= gamma <= 1")
}

fn check_value<F: Scalar>(v: F) -> Result<F> {
    check_range("v_bar", v, F::lit(0.5), F::one(), "0.5 <= v <= 1")
}

/// `base^exponent` with `0^0 = 1`.
fn pow00<F: Scalar>(base: F, exponent: F) -> F {
    if exponent == F::zero() {
        F::one()
    } else if base == F::zero() {
        F::zero()
    } else {
        base.powf(exponent)
    }
}

/// Type transform: distance of the opinion from the far end of the other side.
pub fn opinion_value<F: Scalar>(o: F) -> Result<F> {
    check_range("opinion", o, F::zero(), F::one(), "0 <= o <= 1")?;
    Ok(if o >= F::lit(0.5) { o } else { F::one() - o })
}

/// Common shape of the match utility: `w_in * value * lambda_in * g^(1-go) +
/// w_out * value * lambda_out^go * g - alpha * g`.
fn shaped_utility<F: Scalar>(g: F, go: F, value: F, w_in: F, w_out: F, p: &GameParams<F>) -> F {
    w_in * value * p.lambda_in * pow00(g, F::one() - go) + w_out * value * p.lambda_out.powf(go) * g
        - p.alpha * g
}

/// Utility of a focal player with opinion `o` choosing `gamma` against `gamma_other`.
///
/// Approval opinions weight the in-group match by `n_hat`; disapproval
/// opinions swap the weights and value their opinion as `1 - o`.
pub fn utility<F: Scalar>(gamma: F, gamma_other: F, o: F, p: &GameParams<F>) -> Result<F> {
    let g = check_gamma("gamma", gamma)?;
    let go = check_gamma("gamma_other", gamma_other)?;
    check_range("opinion", o, F::zero(), F::one(), "0 <= o <= 1")?;
    let (w_in, w_out, value) = match Side::of(o) {
        Side::Approval => (p.n_hat, F::one() - p.n_hat, o),
        Side::Disapproval => (F::one() - p.n_hat, p.n_hat, F::one() - o),
    };
    Ok(shaped_utility(g, go, value, w_in, w_out, p))
}

/// Expected utility of a representative player when the population's mean
/// opinion value is `v_bar` and both sides have equal support.
pub fn ex_ante_utility<F: Scalar>(gamma: F, gamma_other: F, v_bar: F, p: &GameParams<F>) -> Result<F> {
    let g = check_gamma("gamma", gamma)?;
    let go = check_gamma("gamma_other", gamma_other)?;
    let v = check_value(v_bar)?;
    Ok(shaped_utility(g, go, v, p.n_hat, F::one() - p.n_hat, p))
}

/// Utility-maximizing intensity against `gamma_other` for a player of value `v`.
///
/// Closed form from the first-order condition, clamped to `[0, 1]`. At
/// `gamma_other = 0` the utility is linear in `gamma` and the answer is the
/// corner picked by the sign of the slope; a non-positive denominator means the
/// marginal utility never vanishes and the answer is 1.
pub fn best_response<F: Scalar>(gamma_other: F, v: F, p: &GameParams<F>) -> Result<F> {
    let go = check_gamma("gamma_other", gamma_other)?;
    let v = check_value(v)?;
    let one = F::one();
    if go == F::zero() {
        let slope = p.n_hat * v * p.lambda_in + (one - p.n_hat) * v - p.alpha;
        return Ok(if slope > F::zero() { one } else { F::zero() });
    }
    let denominator = p.alpha - (one - p.n_hat) * v * p.lambda_out.powf(go);
    if denominator <= F::zero() {
        return Ok(one);
    }
    let numerator = p.n_hat * v * p.lambda_in * (one - go);
    if numerator <= F::zero() {
        return Ok(F::zero());
    }
    let ratio = numerator / denominator;
    if ratio >= one {
        return Ok(one);
    }
    Ok(clamp((ratio.ln() / go).exp(), F::zero(), one))
}

/// Cutoff on the mean opinion value below which silence is an equilibrium.
pub fn silence_threshold<F: Scalar>(p: &GameParams<F>) -> F {
    p.alpha / (F::one() - p.n_hat * (F::one() - p.lambda_in))
}

/// Number of bracketing subintervals scanned for fixed points.
pub const FIXED_POINT_SCAN: usize = 64;
/// Bisection iteration cap.
pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Every symmetric fixed point `gamma = BR(gamma)` in `[0, 1]`, ascending.
///
/// `[0, 1]` is cut into [`FIXED_POINT_SCAN`] pieces; each piece whose end
/// points bracket a sign change of `BR(g) - g` is bisected.
pub fn equilibrium_fixed_points<F: Scalar>(v_bar: F, p: &GameParams<F>) -> Result<Vec<F>> {
    let v = check_value(v_bar)?;
    let g = |x: F| -> Result<F> { Ok(best_response(x, v, p)? - x) };
    let tol = F::solver_tolerance();
    let n = F::from_usize(FIXED_POINT_SCAN).unwrap();

    let mut roots: Vec<F> = Vec::new();
    let push = |r: F, roots: &mut Vec<F>| {
        if roots.last().is_none_or(|&last| (r - last).abs() > tol) {
            roots.push(r);
        }
    };

    let mut lo = F::zero();
    let mut g_lo = g(lo)?;
    for k in 1..=FIXED_POINT_SCAN {
        let hi = F::from_usize(k).unwrap() / n;
        let g_hi = g(hi)?;
        if g_lo == F::zero() {
            push(lo, &mut roots);
        } else if g_lo.signum() != g_hi.signum() && g_hi != F::zero() {
            push(bisect(&g, lo, hi, g_lo, tol)?, &mut roots);
        }
        lo = hi;
        g_lo = g_hi;
    }
    if g_lo == F::zero() {
        push(lo, &mut roots);
    }
    Ok(roots)
}

fn bisect<F: Scalar>(g: &impl Fn(F) -> Result<F>, mut lo: F, mut hi: F, g_lo: F, tol: F) -> Result<F> {
    let lo_sign = g_lo.signum();
    let two = F::lit(2.0);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid)?;
        if gm == F::zero() {
            return Ok(mid);
        }
        if gm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever bracket end has the smaller residual.
    let (r_lo, r_hi) = (g(lo)?.abs(), g(hi)?.abs());
    let (best, residual) = if r_lo <= r_hi { (lo, r_lo) } else { (hi, r_hi) };
    if residual <= tol {
        Ok(best)
    } else {
        Err(Error::Solver {
            iterations: MAX_BISECTION_ITERATIONS,
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
            residual: residual.to_f64_lossy(),
        })
    }
}

/// Ex-ante symmetric equilibrium intensity for mean opinion value `v_bar`.
///
/// Returns 0 whenever `v_bar` lies below [`silence_threshold`]; otherwise the
/// largest fixed point of the best-response map.
pub fn symmetric_equilibrium<F: Scalar>(v_bar: F, p: &GameParams<F>) -> Result<F> {
    let v = check_value(v_bar)?;
    if v < silence_threshold(p) {
        return Ok(F::zero());
    }
    let roots = equilibrium_fixed_points(v, p)?;
    roots.last().copied().ok_or(Error::Solver {
        iterations: 0,
        lo: 0.0,
        hi: 1.0,
        residual: f64::NAN,
    })
}

/// Ex-interim response: the player's own type value against the population equilibrium.
pub fn interim_response<F: Scalar>(o: F, gamma_ex_ante: F, p: &GameParams<F>) -> Result<F> {
    best_response(gamma_ex_ante, opinion_value(o)?, p)
}

/// Mean opinion value implied by believed group means, `n_hat * o_a + (1 - n_hat) * (1 - o_d)`.
pub fn believed_value<F: Scalar>(approval_mean: F, disapproval_mean: F, p: &GameParams<F>) -> F {
    let v = p.n_hat * approval_mean + (F::one() - p.n_hat) * (F::one() - disapproval_mean);
    clamp(v, F::lit(0.5), F::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_game() -> GameParams<f64> {
        GameParams::new(0.7, 2.0, 0.5, 0.5, 0.3).unwrap()
    }

    fn grid_argmax(go: f64, v: f64, p: &GameParams<f64>, steps: usize) -> f64 {
        (0..=steps)
            .map(|k| k as f64 / steps as f64)
            .map(|g| (g, ex_ante_utility(g, go, v, p).unwrap()))
            .fold((0.0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
            .0
    }

    #[test]
    fn opinion_value_branches() {
        assert_eq!(opinion_value(0.9).unwrap(), 0.9);
        assert!((opinion_value(0.3f64).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(opinion_value(0.5).unwrap(), 0.5);
        assert!(opinion_value(1.2).is_err());
        assert!(opinion_value(-0.1).is_err());
    }

    #[test]
    fn utility_values() {
        let p = reference_game();
        assert_eq!(utility(0.0, 0.5, 0.8, &p).unwrap(), 0.0);
        // 0.8*sqrt(0.5) + 0.2*sqrt(0.5) - 0.35, evaluated term by term
        let u = utility(0.5, 0.5, 0.8, &p).unwrap();
        assert!((u - 0.357_106_781_186_547_5).abs() < 1e-12, "{u}");
        let mirrored = utility(0.5, 0.5, 0.2, &p).unwrap();
        assert!((u - mirrored).abs() < 1e-12);
    }

    #[test]
    fn utility_zero_power_corner() {
        // gamma = 0 against gamma_other = 1: in-group term uses 0^0 = 1.
        let p = reference_game();
        let u = utility(0.0, 1.0, 0.8, &p).unwrap();
        assert!((u - 0.5 * 0.8 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn ex_ante_values() {
        let p = reference_game();
        assert_eq!(ex_ante_utility(0.0, 0.3, 0.6, &p).unwrap(), 0.0);
        let u = ex_ante_utility(1.0, 0.0, 0.5, &p).unwrap();
        assert!((u - 0.05).abs() < 1e-12);
        assert!(ex_ante_utility(0.5, 0.5, 0.4, &p).is_err());
    }

    #[test]
    fn best_response_corners() {
        let p = reference_game();
        assert_eq!(best_response(1.0, 0.9, &p).unwrap(), 0.0);
        assert_eq!(best_response(0.0, 0.5, &p).unwrap(), 1.0);
        // the slope at gamma_other = 0 agrees with a grid maximization
        assert_eq!(grid_argmax(0.0, 0.5, &p, 1000), 1.0);
    }

    #[test]
    fn best_response_matches_grid_search() {
        let p = reference_game();
        let br = best_response(0.5, 0.6, &p).unwrap();
        let grid = grid_argmax(0.5, 0.6, &p, 10_000);
        assert!((br - grid).abs() < 1e-3, "{br} vs {grid}");
    }

    #[test]
    fn best_response_nonpositive_denominator() {
        // alpha below (1 - n_hat) * v * lambda_out^go: marginal utility always positive
        let p = GameParams::new(0.1, 2.0, 0.9, 0.5, 0.3).unwrap();
        assert_eq!(best_response(0.4, 0.9, &p).unwrap(), 1.0);
    }

    #[test]
    fn silence_threshold_values() {
        assert!((silence_threshold(&reference_game()) - 0.7 / 1.5).abs() < 1e-15);
        let p = reference_game().with_alpha(0.9);
        assert!((silence_threshold(&p) - 0.6).abs() < 1e-15);
        assert_eq!(silence_threshold(&reference_game().with_alpha(0.0)), 0.0);
    }

    #[test]
    fn silent_equilibrium_below_threshold() {
        let p = reference_game().with_alpha(2.0);
        assert_eq!(symmetric_equilibrium(0.5, &p).unwrap(), 0.0);
    }

    #[test]
    fn equilibrium_increases_with_value() {
        let p = reference_game();
        let low = symmetric_equilibrium(0.6, &p).unwrap();
        let high = symmetric_equilibrium(0.9, &p).unwrap();
        assert!(high > low, "{high} <= {low}");
    }

    #[test]
    fn equilibrium_is_a_fixed_point_found_by_iteration() {
        use rand::{Rng, SeedableRng};
        let p = reference_game();
        let star = symmetric_equilibrium(0.7, &p).unwrap();
        assert!((best_response(star, 0.7, &p).unwrap() - star).abs() <= 1e-6);
        let roots = equilibrium_fixed_points(0.7, &p).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut hit = false;
        for _ in 0..20 {
            // damped iteration; the plain map can oscillate around a steep fixed point
            let mut g: f64 = rng.random();
            for _ in 0..5000 {
                g = 0.9 * g + 0.1 * best_response(g, 0.7, &p).unwrap();
            }
            if (best_response(g, 0.7, &p).unwrap() - g).abs() <= 1e-6 {
                assert!(roots.iter().any(|r| (r - g).abs() < 1e-4), "{g} not in {roots:?}");
                hit |= (g - star).abs() < 1e-4;
            }
        }
        assert!(hit, "no iteration reached the bisection answer {star}");
    }

    #[test]
    fn interim_response_properties() {
        let p = reference_game();
        let star = symmetric_equilibrium(0.7, &p).unwrap();
        assert_eq!(
            interim_response(0.7, star, &p).unwrap(),
            best_response(star, 0.7, &p).unwrap()
        );
        assert!(interim_response(0.95, 0.4, &p).unwrap() >= interim_response(0.55, 0.4, &p).unwrap());
        assert_eq!(interim_response(0.5, 1.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(GameParams::new(0.7, 1.0, 0.5, 0.5, 0.3).is_err());
        assert!(GameParams::new(0.7, 2.0, 1.0, 0.5, 0.3).is_err());
        assert!(GameParams::new(-0.1, 2.0, 0.5, 0.5, 0.3).is_err());
        assert!(GameParams::new(0.7, 2.0, 0.5, 1.5, 0.3).is_err());
        assert!(GameParams::new(0.7f32, 2.0, 0.5, 0.5, 0.3).is_ok());
    }

    #[test]
    fn single_precision_equilibrium() {
        let p = GameParams::<f32>::new(0.7, 2.0, 0.5, 0.5, 0.3).unwrap();
        let star = symmetric_equilibrium(0.7f32, &p).unwrap();
        let p64 = reference_game();
        let star64 = symmetric_equilibrium(0.7, &p64).unwrap();
        assert!((star as f64 - star64).abs() < 1e-3);
    }
}
