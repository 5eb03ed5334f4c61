//! CRRA expected utility and single-good duality.
//!
//! Payoff lotteries are valued directly with `u(x) = x^(1-r)/(1-r)` (log at
//! `r = 1`). Price lotteries are valued through the indirect utility of
//! spending an endowment `M` on widgets at buy price `P` and selling them at
//! `s`, i.e. `V(P, M) = u(s * M / P)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the probability sum of a lottery.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilityError {
    #[error("CRRA utility is undefined for non-positive amount {0}")]
    NonPositiveAmount(f64),
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityRange(f64),
    #[error("lottery has no outcomes")]
    Empty,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("finite-difference step {0} is degenerate")]
    DegenerateStep(f64),
}

/// Relative risk aversion coefficient of a CRRA agent.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Crra(pub f64);

impl Crra {
    pub const RISK_NEUTRAL: Crra = Crra(0.0);

    pub fn new(r: f64) -> Result<Self, UtilityError> {
        if r.is_finite() {
            Ok(Crra(r))
        } else {
            Err(UtilityError::NonFinite(r))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `x^(1-r)/(1-r)`, or `ln x` when `r = 1`.
    pub fn utility(self, x: f64) -> Result<f64, UtilityError> {
        check_amount(x)?;
        let a = 1.0 - self.0;
        if a == 0.0 {
            Ok(x.ln())
        } else {
            Ok(x.powf(a) / a)
        }
    }

    /// Affine-normalized utility `(x^(1-r) - 1)/(1-r)`.
    ///
    /// Same preferences as [`Crra::utility`] but continuous in `r` through
    /// `r = 1`, which the crossover solver relies on.
    pub fn normalized_utility(self, x: f64) -> Result<f64, UtilityError> {
        check_amount(x)?;
        let a = 1.0 - self.0;
        let l = x.ln();
        if a == 0.0 {
            Ok(l)
        } else {
            Ok((a * l).exp_m1() / a)
        }
    }

    /// Inverse of [`Crra::normalized_utility`].
    pub fn inverse_normalized_utility(self, v: f64) -> Result<f64, UtilityError> {
        let a = 1.0 - self.0;
        let x = if a == 0.0 { v.exp() } else { ((a * v).ln_1p() / a).exp() };
        if x.is_finite() && x > 0.0 {
            Ok(x)
        } else {
            Err(UtilityError::NonFinite(x))
        }
    }
}

/// `u(x)` for the CRRA coefficient `r`.
pub fn crra_utility(x: f64, r: Crra) -> Result<f64, UtilityError> {
    r.utility(x)
}

fn check_amount(x: f64) -> Result<(), UtilityError> {
    if !x.is_finite() {
        Err(UtilityError::NonFinite(x))
    } else if x <= 0.0 {
        Err(UtilityError::NonPositiveAmount(x))
    } else {
        Ok(())
    }
}

fn check_probabilities(probs: impl Iterator<Item = f64>) -> Result<(), UtilityError> {
    let mut sum = 0.0;
    let mut any = false;
    for p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(UtilityError::ProbabilityRange(p));
        }
        sum += p;
        any = true;
    }
    if !any {
        return Err(UtilityError::Empty);
    }
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(UtilityError::ProbabilitySum(sum));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub probability: f64,
    pub payoff: f64,
}

/// A lottery over strictly positive monetary payoffs (USD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Outcome>", into = "Vec<Outcome>")]
pub struct OutcomeLottery {
    outcomes: Vec<Outcome>,
}

impl TryFrom<Vec<Outcome>> for OutcomeLottery {
    type Error = UtilityError;

    fn try_from(outcomes: Vec<Outcome>) -> Result<Self, Self::Error> {
        check_probabilities(outcomes.iter().map(|o| o.probability))?;
        for o in &outcomes {
            check_amount(o.payoff)?;
        }
        Ok(OutcomeLottery { outcomes })
    }
}

impl From<OutcomeLottery> for Vec<Outcome> {
    fn from(l: OutcomeLottery) -> Self {
        l.outcomes
    }
}

impl OutcomeLottery {
    /// Builds a lottery from `(probability, payoff)` pairs.
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self, UtilityError> {
        pairs.iter().map(|&(probability, payoff)| Outcome { probability, payoff }).collect::<Vec<_>>().try_into()
    }

    /// A sure payoff.
    pub fn certain(payoff: f64) -> Result<Self, UtilityError> {
        Self::new(&[(1.0, payoff)])
    }

    /// Two-outcome lottery paying `hi` with probability `p_hi`, else `lo`.
    pub fn binary(p_hi: f64, hi: f64, lo: f64) -> Result<Self, UtilityError> {
        Self::new(&[(p_hi, hi), (1.0 - p_hi, lo)])
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// True when a single payoff carries all the probability mass.
    pub fn is_degenerate(&self) -> bool {
        let mut support = self.outcomes.iter().filter(|o| o.probability > 0.0);
        match support.next() {
            None => true,
            Some(first) => support.all(|o| o.payoff == first.payoff),
        }
    }

    pub fn min_payoff(&self) -> f64 {
        self.outcomes.iter().map(|o| o.payoff).fold(f64::INFINITY, f64::min)
    }

    pub fn max_payoff(&self) -> f64 {
        self.outcomes.iter().map(|o| o.payoff).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multiplies every payoff by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self, UtilityError> {
        self.outcomes
            .iter()
            .map(|o| Outcome { probability: o.probability, payoff: o.payoff * k })
            .collect::<Vec<_>>()
            .try_into()
    }

    pub fn expected_value(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability * o.payoff).sum()
    }

    pub fn expected_utility(&self, r: Crra) -> Result<f64, UtilityError> {
        self.outcomes.iter().map(|o| Ok(o.probability * r.utility(o.payoff)?)).sum()
    }

    /// Expected normalized utility, see [`Crra::normalized_utility`].
    pub fn expected_normalized_utility(&self, r: Crra) -> Result<f64, UtilityError> {
        self.outcomes.iter().map(|o| Ok(o.probability * r.normalized_utility(o.payoff)?)).sum()
    }

    /// Sure amount with the same expected utility.
    ///
    /// Evaluated as the power mean `(E[x^(1-r)])^(1/(1-r))` in log space so
    /// that it stays accurate for `r` near 1 and is exactly homogeneous of
    /// degree one in the payoffs.
    pub fn certainty_equivalent(&self, r: Crra) -> Result<f64, UtilityError> {
        let a = 1.0 - r.0;
        let mut log_mean = 0.0;
        let mut excess = 0.0;
        for o in &self.outcomes {
            check_amount(o.payoff)?;
            let l = o.payoff.ln();
            log_mean += o.probability * l;
            if a != 0.0 {
                excess += o.probability * (a * l).exp_m1();
            }
        }
        let ln_ce = if a == 0.0 {
            log_mean
        } else {
            // ln E[x^a] / a; ln_1p keeps precision when a is tiny.
            let v = excess.ln_1p() / a;
            if v.is_finite() {
                v
            } else {
                // Extreme a: fall back to log-sum-exp.
                log_sum_exp_power_mean(&self.outcomes, a)
            }
        };
        let ce = ln_ce.exp();
        if ce.is_finite() && ce > 0.0 {
            Ok(ce)
        } else {
            Err(UtilityError::NonFinite(ce))
        }
    }

    pub fn risk_premium(&self, r: Crra) -> Result<f64, UtilityError> {
        Ok(self.expected_value() - self.certainty_equivalent(r)?)
    }
}

fn log_sum_exp_power_mean(outcomes: &[Outcome], a: f64) -> f64 {
    let terms: Vec<f64> =
        outcomes.iter().filter(|o| o.probability > 0.0).map(|o| o.probability.ln() + a * o.payoff.ln()).collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    (m + s.ln()) / a
}

pub fn expected_value(l: &OutcomeLottery) -> f64 {
    l.expected_value()
}

pub fn expected_utility(l: &OutcomeLottery, r: Crra) -> Result<f64, UtilityError> {
    l.expected_utility(r)
}

pub fn certainty_equivalent(l: &OutcomeLottery, r: Crra) -> Result<f64, UtilityError> {
    l.certainty_equivalent(r)
}

pub fn risk_premium(l: &OutcomeLottery, r: Crra) -> Result<f64, UtilityError> {
    l.risk_premium(r)
}

/// Decimal places used when menus are converted between payoffs and prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoneyRounding {
    pub quantity_decimals: u32,
    pub money_decimals: u32,
}

impl MoneyRounding {
    /// Widgets to one decimal, money to cents: matches the reference
    /// widget/payoff equivalence tables (1.56 -> 9.6 units -> USD 9.60).
    pub const WIDGET_TENTHS: MoneyRounding = MoneyRounding { quantity_decimals: 1, money_decimals: 2 };
    pub const CENTS: MoneyRounding = MoneyRounding { quantity_decimals: 2, money_decimals: 2 };

    pub fn quantity(&self, q: f64) -> f64 {
        round_half_up(q, self.quantity_decimals)
    }

    pub fn money(&self, x: f64) -> f64 {
        round_half_up(x, self.money_decimals)
    }
}

/// Rounds half away from zero at `decimals` places.
///
/// A relative nudge of a few ulps absorbs binary representation error, so
/// `1.005` rounds to `1.01` as decimal arithmetic would.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    let nudged = scaled + scaled.signum() * scaled.abs() * 4.0 * f64::EPSILON;
    nudged.round() / scale
}

/// Widgets bought with budget `m` at price `p`: `q = M / P`.
pub fn marshallian_demand(p: f64, m: f64) -> Result<f64, UtilityError> {
    check_amount(p)?;
    check_amount(m)?;
    Ok(m / p)
}

/// Indirect utility of buying `M/P` widgets and reselling them at `s`.
pub fn indirect_utility(p: f64, m: f64, s: f64, r: Crra) -> Result<f64, UtilityError> {
    check_amount(s)?;
    r.utility(s * marshallian_demand(p, m)?)
}

/// Normalized-utility twin of [`indirect_utility`].
pub fn indirect_normalized_utility(p: f64, m: f64, s: f64, r: Crra) -> Result<f64, UtilityError> {
    check_amount(s)?;
    r.normalized_utility(s * marshallian_demand(p, m)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceOutcome {
    pub probability: f64,
    pub buy_price: f64,
}

/// A lottery over buy prices, with the budget and resale price that turn a
/// realized price into a payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceLottery {
    prices: Vec<PriceOutcome>,
    endowment: f64,
    sell_price: f64,
}

impl PriceLottery {
    pub fn new(pairs: &[(f64, f64)], endowment: f64, sell_price: f64) -> Result<Self, UtilityError> {
        check_probabilities(pairs.iter().map(|p| p.0))?;
        for &(_, price) in pairs {
            check_amount(price)?;
        }
        check_amount(endowment)?;
        check_amount(sell_price)?;
        Ok(PriceLottery {
            prices: pairs.iter().map(|&(probability, buy_price)| PriceOutcome { probability, buy_price }).collect(),
            endowment,
            sell_price,
        })
    }

    pub fn prices(&self) -> &[PriceOutcome] {
        &self.prices
    }

    pub fn endowment(&self) -> f64 {
        self.endowment
    }

    pub fn sell_price(&self) -> f64 {
        self.sell_price
    }

    /// Expected indirect utility `sum p V(P, M)`.
    pub fn expected_utility(&self, r: Crra) -> Result<f64, UtilityError> {
        self.prices
            .iter()
            .map(|o| Ok(o.probability * indirect_utility(o.buy_price, self.endowment, self.sell_price, r)?))
            .sum()
    }

    pub fn expected_normalized_utility(&self, r: Crra) -> Result<f64, UtilityError> {
        self.prices
            .iter()
            .map(|o| Ok(o.probability * indirect_normalized_utility(o.buy_price, self.endowment, self.sell_price, r)?))
            .sum()
    }

    /// Final payoff lottery, optionally rounded the way a lab menu would be.
    pub fn to_payoff_lottery(&self, rounding: Option<MoneyRounding>) -> Result<OutcomeLottery, UtilityError> {
        price_lottery_to_payoff_lottery(self, rounding)
    }
}

/// Maps each buy price `P` to the payoff `s * M / P`, keeping order and
/// probabilities. With rounding, the widget count is rounded before the
/// payoff.
pub fn price_lottery_to_payoff_lottery(
    pl: &PriceLottery,
    rounding: Option<MoneyRounding>,
) -> Result<OutcomeLottery, UtilityError> {
    pl.prices
        .iter()
        .map(|o| {
            let q = marshallian_demand(o.buy_price, pl.endowment)?;
            let payoff = match rounding {
                Some(rd) => rd.money(rd.quantity(q) * pl.sell_price),
                None => q * pl.sell_price,
            };
            Ok(Outcome { probability: o.probability, payoff })
        })
        .collect::<Result<Vec<_>, _>>()?
        .try_into()
}

/// Buy price that makes a widget purchase pay `payoff`: `P = s * M / x`.
pub fn price_for_payoff(payoff: f64, m: f64, s: f64, rounding: Option<MoneyRounding>) -> Result<f64, UtilityError> {
    check_amount(payoff)?;
    check_amount(m)?;
    check_amount(s)?;
    let p = s * m / payoff;
    Ok(match rounding {
        Some(rd) => rd.money(p),
        None => p,
    })
}

/// Relative error of Roy's identity `-V_P / V_M = M / P`, using central
/// differences with step `h` on the indirect utility.
pub fn roy_identity_residual(p: f64, m: f64, s: f64, r: Crra, h: f64) -> Result<f64, UtilityError> {
    if !(h.is_finite() && h > 0.0 && h < p && h < m) {
        return Err(UtilityError::DegenerateStep(h));
    }
    let v = |p: f64, m: f64| indirect_normalized_utility(p, m, s, r);
    let dv_dp = (v(p + h, m)? - v(p - h, m)?) / (2.0 * h);
    let dv_dm = (v(p, m + h)? - v(p, m - h)?) / (2.0 * h);
    if dv_dm == 0.0 || !dv_dm.is_finite() {
        return Err(UtilityError::DegenerateStep(h));
    }
    let demand = marshallian_demand(p, m)?;
    Ok(((-dv_dp / dv_dm) - demand).abs() / demand)
}

/// Arrow-Pratt relative risk aversion `-x u''(x) / u'(x)` by central
/// differences of the utility function.
pub fn arrow_pratt_rra(x: f64, r: Crra, h: f64) -> Result<f64, UtilityError> {
    if !(h.is_finite() && h > 0.0 && h < x) {
        return Err(UtilityError::DegenerateStep(h));
    }
    let u = |x: f64| r.normalized_utility(x);
    let u0 = u(x)?;
    let up = u(x + h)?;
    let um = u(x - h)?;
    let d1 = (up - um) / (2.0 * h);
    let d2 = (up - 2.0 * u0 + um) / (h * h);
    Ok(-x * d2 / d1)
}
