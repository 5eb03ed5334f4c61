//! Task menus for the three list designs in payoff and price form.

mod format;

pub use format::{parse_menu, render_menu, MenuFormatError};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::interval::{interval_index, BoundarySchedule, IntervalError, ATTITUDE_CUTOFFS};
use crate::solver::{find_root, Bracket, SolverError};
use crate::utility::{price_for_payoff, Crra, MoneyRounding, OutcomeLottery, PriceLottery, UtilityError};

/// Endowment handed to subjects in price tasks, USD.
pub const DEFAULT_ENDOWMENT: f64 = 15.0;
/// Resale price per widget, USD.
pub const DEFAULT_SELL_PRICE: f64 = 1.0;
/// Default high payoff of the risky HL option.
pub const DEFAULT_HL_HIGH_B: f64 = 23.10;
/// Alternative high payoffs for the risky HL option.
pub const HL_HIGH_B_VARIANTS: [f64; 3] = [23.05, 23.08, 23.10];

/// Reconstructed CvU lottery: even odds of 20.00 or 2.00.
pub const DEFAULT_CVU_LOTTERY: (f64, f64, f64) = (0.5, 20.00, 2.00);
/// Reconstructed CvU end points (row 1 and row 10 certain amounts).
pub const DEFAULT_CVU_ENDS: (f64, f64) = (14.43, 4.00);

/// Reconstructed Bins low payoffs.
pub const DEFAULT_BINS_LOWS: [f64; 10] = [0.60, 2.00, 3.50, 4.80, 5.90, 6.80, 7.60, 8.30, 8.90, 9.40];
pub const DEFAULT_BINS_ANCHOR: f64 = 23.10;
/// Indifference point between Bins decisions 9 and 10, which share an interval.
pub const BINS_LAST_INDIFFERENCE: f64 = 2.5;
/// Price-grid Bins menu (high price, low price per decision) produced by
/// `bins_price_menu_with` from a 23.05..=23.10 anchor and the default first low.
pub const DEFAULT_BINS_PRICE_GRID: [(f64, f64); 10] = [
    (0.65, 25.00),
    (0.66, 3.92),
    (0.67, 3.26),
    (0.70, 2.59),
    (0.73, 2.30),
    (0.76, 2.13),
    (0.79, 2.02),
    (0.83, 1.92),
    (0.86, 1.87),
    (1.00, 1.77),
];
/// Largest high-price step, in grid ticks, between price-grid Bins decisions.
const BINS_HIGH_STEPS: usize = 15;
/// Chains kept per decision by the price-grid Bins search.
const BINS_BEAM_WIDTH: usize = 64;
/// Tie error below which price-grid Bins chains are not told apart by error.
const BINS_TIE_TOLERANCE: f64 = 0.002;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("schedule must have 10 entries, got {0}")]
    ScheduleLength(usize),
    #[error("schedule is not strictly {direction} at entry {index}")]
    ScheduleOrder { index: usize, direction: &'static str },
    #[error("no feasible high payoff for decision {decision}")]
    Infeasible { decision: usize },
    #[error("menu invariant violated: {0}")]
    Invariant(String),
    #[error("crossovers not increasing at boundary {0}")]
    NonMonotone(usize),
    #[error("row {row}: {source}")]
    Solver { row: usize, source: SolverError },
    #[error("operation needs a {0} menu")]
    WrongDomain(MenuDomain),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DesignKind {
    Hl,
    Cvu,
    Bins,
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::Hl => "HL",
            DesignKind::Cvu => "CVU",
            DesignKind::Bins => "BINS",
        })
    }
}

impl std::str::FromStr for DesignKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HL" => Ok(DesignKind::Hl),
            "CVU" => Ok(DesignKind::Cvu),
            "BINS" => Ok(DesignKind::Bins),
            other => Err(format!("unknown design kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MenuDomain {
    Payoff,
    Price,
}

impl fmt::Display for MenuDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MenuDomain::Payoff => "PAYOFF",
            MenuDomain::Price => "PRICE",
        })
    }
}

impl std::str::FromStr for MenuDomain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PAYOFF" => Ok(MenuDomain::Payoff),
            "PRICE" => Ok(MenuDomain::Price),
            other => Err(format!("unknown menu domain {other:?}")),
        }
    }
}

/// Option A or B of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

/// A two-outcome option. `hi` is the amount tied to `p_hi`; in the price
/// domain both amounts are buy prices, so `hi` is the price that yields the
/// larger payoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryOption {
    pub p_hi: f64,
    pub hi: f64,
    pub lo: f64,
}

impl BinaryOption {
    pub fn certain(x: f64) -> Self {
        BinaryOption { p_hi: 1.0, hi: x, lo: x }
    }

    pub fn is_certain(&self) -> bool {
        self.p_hi == 1.0 || self.p_hi == 0.0 || self.hi == self.lo
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        if self.p_hi == 1.0 {
            vec![(1.0, self.hi)]
        } else if self.p_hi == 0.0 {
            vec![(1.0, self.lo)]
        } else {
            vec![(self.p_hi, self.hi), (1.0 - self.p_hi, self.lo)]
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        BinaryOption { p_hi: self.p_hi, hi: f(self.hi), lo: f(self.lo) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuRow {
    pub row_index: usize,
    pub option_a: BinaryOption,
    /// Absent for Bins, where each row is one of ten lotteries.
    pub option_b: Option<BinaryOption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMenu {
    pub kind: DesignKind,
    pub domain: MenuDomain,
    pub rows: Vec<MenuRow>,
    /// Budget `M` for price menus.
    pub endowment: Option<f64>,
    /// Resale price `s` for price menus.
    pub sell_price: Option<f64>,
    /// False for reconstructed default schedules.
    pub authentic: bool,
}

/// Budget, resale price and rounding used to turn payoffs into prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceParams {
    pub endowment: f64,
    pub sell_price: f64,
    pub rounding: Option<MoneyRounding>,
}

impl Default for PriceParams {
    fn default() -> Self {
        PriceParams {
            endowment: DEFAULT_ENDOWMENT,
            sell_price: DEFAULT_SELL_PRICE,
            rounding: Some(MoneyRounding::CENTS),
        }
    }
}

impl PriceParams {
    pub fn unrounded() -> Self {
        PriceParams { rounding: None, ..Default::default() }
    }
}

impl TaskMenu {
    /// Lottery of option `which` in row `row` (1-based) as payoffs, converting
    /// prices without rounding.
    pub fn payoff_lottery(&self, row: usize, which: Choice) -> Result<OutcomeLottery, CalibrationError> {
        let opt = self.option(row, which)?;
        match self.domain {
            MenuDomain::Payoff => Ok(OutcomeLottery::new(&opt.pairs())?),
            MenuDomain::Price => Ok(self.price_lottery_of(&opt)?.to_payoff_lottery(None)?),
        }
    }

    /// Lottery of option `which` in row `row` as buy prices.
    pub fn price_lottery(&self, row: usize, which: Choice) -> Result<PriceLottery, CalibrationError> {
        if self.domain != MenuDomain::Price {
            return Err(CalibrationError::WrongDomain(MenuDomain::Price));
        }
        self.price_lottery_of(&self.option(row, which)?)
    }

    fn price_lottery_of(&self, opt: &BinaryOption) -> Result<PriceLottery, CalibrationError> {
        let m = self.endowment.unwrap_or(DEFAULT_ENDOWMENT);
        let s = self.sell_price.unwrap_or(DEFAULT_SELL_PRICE);
        Ok(PriceLottery::new(&opt.pairs(), m, s)?)
    }

    pub fn option(&self, row: usize, which: Choice) -> Result<BinaryOption, CalibrationError> {
        let r =
            self.rows.get(row.wrapping_sub(1)).ok_or_else(|| CalibrationError::Invariant(format!("no row {row}")))?;
        match which {
            Choice::A => Ok(r.option_a),
            Choice::B => r.option_b.ok_or_else(|| CalibrationError::Invariant(format!("row {row} has no option B"))),
        }
    }

    /// Expected normalized utility of an option. Price options are valued
    /// through the indirect utility function rather than by conversion.
    pub fn option_utility(&self, row: usize, which: Choice, r: Crra) -> Result<f64, CalibrationError> {
        let opt = self.option(row, which)?;
        match self.domain {
            MenuDomain::Payoff => Ok(OutcomeLottery::new(&opt.pairs())?.expected_normalized_utility(r)?),
            MenuDomain::Price => Ok(self.price_lottery_of(&opt)?.expected_normalized_utility(r)?),
        }
    }

    /// Payoffs a subject can actually be paid, after the rounding applied to
    /// realized widgets and cents.
    pub fn realizable_payoffs(&self, payout_rounding: MoneyRounding) -> Vec<f64> {
        let mut v = Vec::new();
        for row in &self.rows {
            for opt in std::iter::once(row.option_a).chain(row.option_b) {
                for (p, amount) in opt.pairs() {
                    if p > 0.0 {
                        v.push(self.payout_for_amount(amount, payout_rounding));
                    }
                }
            }
        }
        v
    }

    /// Payoff when `amount` is realized: the amount itself for payoff menus,
    /// resale value of `M/P` widgets for price menus.
    pub fn payout_for_amount(&self, amount: f64, rounding: MoneyRounding) -> f64 {
        match self.domain {
            MenuDomain::Payoff => rounding.money(amount),
            MenuDomain::Price => {
                let m = self.endowment.unwrap_or(DEFAULT_ENDOWMENT);
                let s = self.sell_price.unwrap_or(DEFAULT_SELL_PRICE);
                rounding.money(rounding.quantity(m / amount) * s)
            }
        }
    }

    pub fn min_payoff(&self, rounding: MoneyRounding) -> f64 {
        self.realizable_payoffs(rounding).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_payoff(&self, rounding: MoneyRounding) -> f64 {
        self.realizable_payoffs(rounding).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every payoff multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<TaskMenu, CalibrationError> {
        if self.domain != MenuDomain::Payoff {
            return Err(CalibrationError::WrongDomain(MenuDomain::Payoff));
        }
        let mut m = self.clone();
        for row in &mut m.rows {
            row.option_a = row.option_a.map(|x| x * k);
            row.option_b = row.option_b.map(|o| o.map(|x| x * k));
        }
        Ok(m)
    }

    /// Structural checks: ten rows numbered 1..=10, the row shape of the
    /// design, and positive amounts.
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |s: String| Err(CalibrationError::Invariant(s));
        if self.rows.len() != 10 {
            return bad(format!("{} rows, expected 10", self.rows.len()));
        }
        if self.domain == MenuDomain::Price {
            for (name, v) in [("endowment", self.endowment), ("sell_price", self.sell_price)] {
                match v {
                    Some(x) if x > 0.0 && x.is_finite() => {}
                    _ => return bad(format!("price menu needs a positive {name}")),
                }
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.row_index != i + 1 {
                return bad(format!("row {} carries index {}", i + 1, row.row_index));
            }
            for opt in std::iter::once(row.option_a).chain(row.option_b) {
                if !(0.0..=1.0).contains(&opt.p_hi) {
                    return bad(format!("row {}: probability {}", i + 1, opt.p_hi));
                }
                if !(opt.hi > 0.0 && opt.lo > 0.0 && opt.hi.is_finite() && opt.lo.is_finite()) {
                    return bad(format!("row {}: non-positive amount", i + 1));
                }
            }
            let n = (i + 1) as f64;
            match self.kind {
                DesignKind::Hl => {
                    let Some(b) = row.option_b else {
                        return bad(format!("row {}: HL row without option B", i + 1));
                    };
                    if (row.option_a.p_hi - n / 10.0).abs() > 1e-12 || (b.p_hi - n / 10.0).abs() > 1e-12 {
                        return bad(format!("row {}: HL probabilities must be {}/10", i + 1, i + 1));
                    }
                }
                DesignKind::Cvu => {
                    let Some(b) = row.option_b else {
                        return bad(format!("row {}: CvU row without option B", i + 1));
                    };
                    if !row.option_a.is_certain() {
                        return bad(format!("row {}: CvU option A must be certain", i + 1));
                    }
                    if b != self.rows[0].option_b.unwrap_or(b) {
                        return bad(format!("row {}: CvU lottery must be the same on every row", i + 1));
                    }
                }
                DesignKind::Bins => {
                    if row.option_b.is_some() {
                        return bad(format!("row {}: Bins rows have a single lottery", i + 1));
                    }
                    if (row.option_a.p_hi - 0.5).abs() > 1e-12 {
                        return bad(format!("row {}: Bins odds must be 0.5/0.5", i + 1));
                    }
                }
            }
        }
        Ok(())
    }
}

fn hl_payoff_rows(high_b: f64) -> Vec<MenuRow> {
    (1..=10)
        .map(|n| {
            let p = n as f64 / 10.0;
            MenuRow {
                row_index: n,
                option_a: BinaryOption { p_hi: p, hi: 12.00, lo: 9.60 },
                option_b: Some(BinaryOption { p_hi: p, hi: high_b, lo: 0.60 }),
            }
        })
        .collect()
}

/// Scaled HL menu: safe option 12.00/9.60, risky option `high_b`/0.60.
/// The price form uses the default budget and resale price with prices
/// rounded to cents.
pub fn hl_menu(high_b: f64, domain: MenuDomain) -> Result<TaskMenu, CalibrationError> {
    let menu = TaskMenu {
        kind: DesignKind::Hl,
        domain: MenuDomain::Payoff,
        rows: hl_payoff_rows(high_b),
        endowment: None,
        sell_price: None,
        authentic: true,
    };
    menu.validate()?;
    match domain {
        MenuDomain::Payoff => Ok(menu),
        MenuDomain::Price => to_price_domain(&menu, PriceParams::default()),
    }
}

fn check_schedule(xs: &[f64], increasing: bool) -> Result<(), CalibrationError> {
    if xs.len() != 10 {
        return Err(CalibrationError::ScheduleLength(xs.len()));
    }
    for i in 1..xs.len() {
        let ok = if increasing { xs[i] > xs[i - 1] } else { xs[i] < xs[i - 1] };
        if !ok {
            let direction = if increasing { "increasing" } else { "decreasing" };
            return Err(CalibrationError::ScheduleOrder { index: i + 1, direction });
        }
    }
    for &x in xs {
        if !(x > 0.0 && x.is_finite()) {
            return Err(UtilityError::NonPositiveAmount(x).into());
        }
    }
    Ok(())
}

/// CvU menu: certain `schedule[n]` against the fixed binary `lottery_b`.
pub fn cvu_menu(schedule: &[f64], lottery_b: BinaryOption, domain: MenuDomain) -> Result<TaskMenu, CalibrationError> {
    check_schedule(schedule, false)?;
    let menu = TaskMenu {
        kind: DesignKind::Cvu,
        domain: MenuDomain::Payoff,
        rows: schedule
            .iter()
            .enumerate()
            .map(|(i, &c)| MenuRow { row_index: i + 1, option_a: BinaryOption::certain(c), option_b: Some(lottery_b) })
            .collect(),
        endowment: None,
        sell_price: None,
        authentic: true,
    };
    menu.validate()?;
    match domain {
        MenuDomain::Payoff => Ok(menu),
        MenuDomain::Price => cvu_price_menu(&menu, PriceParams::default()),
    }
}

/// Certain amounts equal to the lottery's certainty equivalent at each
/// cutoff (rounded to cents), framed by the given first and last amounts.
pub fn cvu_schedule_from_cutoffs(
    lottery_b: BinaryOption,
    cutoffs: &[f64],
    first: f64,
    last: f64,
) -> Result<Vec<f64>, CalibrationError> {
    let l = OutcomeLottery::binary(lottery_b.p_hi, lottery_b.hi, lottery_b.lo)?;
    let mut s = vec![first];
    for &c in cutoffs {
        s.push(MoneyRounding::CENTS.money(l.certainty_equivalent(Crra(c))?));
    }
    s.push(last);
    check_schedule(&s, false)?;
    Ok(s)
}

pub fn default_cvu_lottery() -> BinaryOption {
    let (p, hi, lo) = DEFAULT_CVU_LOTTERY;
    BinaryOption { p_hi: p, hi, lo }
}

/// Reconstructed CvU menu (not the original schedule).
pub fn default_cvu_menu(domain: MenuDomain) -> Result<TaskMenu, CalibrationError> {
    let b = default_cvu_lottery();
    let schedule = cvu_schedule_from_cutoffs(b, &ATTITUDE_CUTOFFS, DEFAULT_CVU_ENDS.0, DEFAULT_CVU_ENDS.1)?;
    let mut m = cvu_menu(&schedule, b, domain)?;
    m.authentic = false;
    Ok(m)
}

/// Bins menu of ten even-odds lotteries. High payoffs are chained so that
/// decisions `k` and `k+1` are indifferent at the `k`-th cutoff; decisions 9
/// and 10 are indifferent at `last_indifference`.
pub fn bins_menu_with(
    lows: &[f64],
    anchor_high: f64,
    cutoffs: &[f64],
    last_indifference: f64,
) -> Result<TaskMenu, CalibrationError> {
    check_schedule(lows, true)?;
    if cutoffs.len() != 8 || !(last_indifference > cutoffs[7]) {
        return Err(CalibrationError::Invariant("bins needs 8 cutoffs below the last indifference point".into()));
    }
    if !(anchor_high > lows[0]) {
        return Err(CalibrationError::Infeasible { decision: 1 });
    }
    let targets: Vec<f64> = cutoffs.iter().copied().chain(std::iter::once(last_indifference)).collect();
    let mut highs = vec![anchor_high];
    for k in 0..9 {
        let r = Crra(targets[k]);
        let prev = OutcomeLottery::binary(0.5, highs[k], lows[k])?;
        let target_eu = prev.expected_normalized_utility(r)?;
        let low_next = lows[k + 1];
        let u_low = r.normalized_utility(low_next)?;
        // 0.5 u(h) + 0.5 u(low) = target, solved for h in the bracket
        // (low, previous high).
        let g = |h: f64| -> Result<f64, UtilityError> { Ok(0.5 * r.normalized_utility(h)? + 0.5 * u_low - target_eu) };
        let lo = low_next;
        let hi = highs[k];
        if !(g(lo)? < 0.0 && g(hi)? > 0.0) {
            return Err(CalibrationError::Infeasible { decision: k + 2 });
        }
        let step = (hi - lo) / 64.0;
        let h = find_root(g, Bracket { lo, hi, scan_step: step })
            .map_err(|source| CalibrationError::Solver { row: k + 2, source })?;
        highs.push(h);
    }
    let menu = TaskMenu {
        kind: DesignKind::Bins,
        domain: MenuDomain::Payoff,
        rows: (0..10)
            .map(|i| MenuRow {
                row_index: i + 1,
                option_a: BinaryOption { p_hi: 0.5, hi: highs[i], lo: lows[i] },
                option_b: None,
            })
            .collect(),
        endowment: None,
        sell_price: None,
        authentic: true,
    };
    menu.validate()?;
    for i in 1..10 {
        let spread = |j: usize| menu.rows[j].option_a.hi - menu.rows[j].option_a.lo;
        if !(spread(i) < spread(i - 1)) {
            return Err(CalibrationError::Invariant(format!("spread not decreasing at decision {}", i + 1)));
        }
    }
    Ok(menu)
}

pub fn bins_menu(lows: &[f64], anchor_high: f64) -> Result<TaskMenu, CalibrationError> {
    bins_menu_with(lows, anchor_high, &ATTITUDE_CUTOFFS, BINS_LAST_INDIFFERENCE)
}

/// Reconstructed Bins menu: highs rounded to cents in payoff form, cent
/// price grid in price form.
pub fn default_bins_menu(domain: MenuDomain) -> Result<TaskMenu, CalibrationError> {
    default_bins_menu_anchored(domain, DEFAULT_BINS_ANCHOR)
}

/// [`default_bins_menu`] with a different decision-1 high payoff.
pub fn default_bins_menu_anchored(domain: MenuDomain, anchor: f64) -> Result<TaskMenu, CalibrationError> {
    if domain == MenuDomain::Price {
        let params = PriceParams::default();
        let top = price_for_payoff(anchor, params.endowment, params.sell_price, params.rounding)?;
        if top == DEFAULT_BINS_PRICE_GRID[0].0 {
            return price_grid_bins_menu(&DEFAULT_BINS_PRICE_GRID, params);
        }
        return bins_price_menu_with(anchor, DEFAULT_BINS_LOWS[0], &ATTITUDE_CUTOFFS, BINS_LAST_INDIFFERENCE, params);
    }
    let mut m = bins_menu(&DEFAULT_BINS_LOWS, anchor)?;
    for row in &mut m.rows {
        row.option_a.hi = MoneyRounding::CENTS.money(row.option_a.hi);
    }
    m.authentic = false;
    Ok(m)
}

/// Replaces every payoff `x` by the buy price `s * M / x`.
pub fn to_price_domain(menu: &TaskMenu, params: PriceParams) -> Result<TaskMenu, CalibrationError> {
    if menu.domain != MenuDomain::Payoff {
        return Err(CalibrationError::WrongDomain(MenuDomain::Payoff));
    }
    let conv = |x: f64| price_for_payoff(x, params.endowment, params.sell_price, params.rounding);
    let conv_opt = |o: BinaryOption| -> Result<BinaryOption, UtilityError> {
        Ok(BinaryOption { p_hi: o.p_hi, hi: conv(o.hi)?, lo: conv(o.lo)? })
    };
    let rows = menu
        .rows
        .iter()
        .map(|r| {
            Ok(MenuRow {
                row_index: r.row_index,
                option_a: conv_opt(r.option_a)?,
                option_b: r.option_b.map(conv_opt).transpose()?,
            })
        })
        .collect::<Result<Vec<_>, UtilityError>>()?;
    Ok(TaskMenu {
        kind: menu.kind,
        domain: MenuDomain::Price,
        rows,
        endowment: Some(params.endowment),
        sell_price: Some(params.sell_price),
        authentic: menu.authentic,
    })
}

/// Grid prices on either side of the exact price of `payoff`.
fn price_ticks(payoff: f64, params: PriceParams) -> Result<Vec<f64>, UtilityError> {
    let p = price_for_payoff(payoff, params.endowment, params.sell_price, None)?;
    let Some(rd) = params.rounding else { return Ok(vec![p]) };
    let scale = 10f64.powi(rd.money_decimals as i32);
    let lo = rd.money((p * scale).floor() / scale);
    let hi = rd.money((p * scale).ceil() / scale);
    Ok(if lo == hi || lo <= 0.0 { vec![hi] } else { vec![lo, hi] })
}

fn payoff_for_price(price: f64, params: PriceParams) -> f64 {
    params.sell_price * params.endowment / price
}

fn even_odds_gap(first: (f64, f64), second: (f64, f64), r: f64) -> Result<f64, UtilityError> {
    let eu = |(h, l): (f64, f64)| OutcomeLottery::binary(0.5, h, l)?.expected_normalized_utility(Crra(r));
    Ok(eu(first)? - eu(second)?)
}

/// Price twin of a CvU menu. Each certain amount takes whichever neighbouring
/// grid price keeps the row's indifference point closest to the payoff row's.
pub fn cvu_price_menu(menu: &TaskMenu, params: PriceParams) -> Result<TaskMenu, CalibrationError> {
    if menu.kind != DesignKind::Cvu {
        return Err(CalibrationError::Invariant("cvu_price_menu needs a CvU menu".into()));
    }
    let mut twin = to_price_domain(menu, params)?;
    let targets = all_crossovers(menu, Bracket::default())?;
    for (i, target) in targets.into_iter().enumerate() {
        let Some(target) = target else { continue };
        let mut best: Option<(f64, f64)> = None;
        for tick in price_ticks(menu.rows[i].option_a.hi, params)? {
            twin.rows[i].option_a = BinaryOption::certain(tick);
            let row = i + 1;
            let cross = find_root(|r| eu_gap(&twin, (row, Choice::A), (row, Choice::B), r), Bracket::default());
            if let Ok(c) = cross {
                if best.is_none_or(|(_, e)| (c - target).abs() < e) {
                    best = Some((tick, (c - target).abs()));
                }
            }
        }
        let (tick, _) = best.ok_or(CalibrationError::Infeasible { decision: i + 1 })?;
        twin.rows[i].option_a = BinaryOption::certain(tick);
    }
    twin.validate()?;
    Ok(twin)
}

/// Bins menu laid out on the price grid, starting from the grid prices of
/// `anchor_high` and `first_low`. A beam search picks each following pair of
/// grid prices so that adjacent decisions tie as close to their targets as
/// the grid allows; ties are scored by the worst error along the chain.
pub fn bins_price_menu_with(
    anchor_high: f64,
    first_low: f64,
    cutoffs: &[f64],
    last_indifference: f64,
    params: PriceParams,
) -> Result<TaskMenu, CalibrationError> {
    if cutoffs.len() != 8 || !(last_indifference > cutoffs[7]) {
        return Err(CalibrationError::Invariant("bins needs 8 cutoffs below the last indifference point".into()));
    }
    if !(anchor_high > first_low) {
        return Err(CalibrationError::Infeasible { decision: 1 });
    }
    let tick = params.rounding.map_or(0.01, |rd| 10f64.powi(-(rd.money_decimals as i32)));
    let round = |p: f64| params.rounding.map_or(p, |rd| rd.money(p));
    let price = |x: f64| price_for_payoff(x, params.endowment, params.sell_price, None).map(round);
    let targets: Vec<f64> = cutoffs.iter().copied().chain(std::iter::once(last_indifference)).collect();

    struct Chain {
        highs: Vec<f64>,
        lows: Vec<f64>,
        worst: f64,
    }
    let mut beam = vec![Chain { highs: vec![price(anchor_high)?], lows: vec![price(first_low)?], worst: 0.0 }];
    for (k, &target) in targets.iter().enumerate() {
        let r = Crra(target);
        let near = Bracket { lo: target - 0.5, hi: target + 0.5, scan_step: 0.05 };
        let mut next = Vec::new();
        for chain in &beam {
            let prev = (payoff_for_price(chain.highs[k], params), payoff_for_price(chain.lows[k], params));
            let eu = OutcomeLottery::binary(0.5, prev.0, prev.1)?.expected_normalized_utility(r)?;
            for steps in 1..=BINS_HIGH_STEPS {
                let high_price = round(chain.highs[k] + steps as f64 * tick);
                let h = payoff_for_price(high_price, params);
                let Ok(exact_low) = r.inverse_normalized_utility(2.0 * eu - r.normalized_utility(h)?) else {
                    continue;
                };
                if !(exact_low > prev.1 && exact_low < h) {
                    continue;
                }
                for p in price_ticks(exact_low, params)? {
                    let l = payoff_for_price(p, params);
                    if !(l > prev.1 && h - l < prev.0 - prev.1) {
                        continue;
                    }
                    let Ok(c) = find_root(|x| even_odds_gap(prev, (h, l), x), near) else { continue };
                    let mut highs = chain.highs.clone();
                    let mut lows = chain.lows.clone();
                    highs.push(high_price);
                    lows.push(p);
                    next.push(Chain { highs, lows, worst: chain.worst.max((c - target).abs()) });
                }
            }
        }
        if next.is_empty() {
            return Err(CalibrationError::Infeasible { decision: k + 2 });
        }
        // Chains already within tolerance rank by the spread left for later
        // decisions.
        let key = |c: &Chain| {
            let spread = payoff_for_price(c.highs[k + 1], params) - payoff_for_price(c.lows[k + 1], params);
            (c.worst.max(BINS_TIE_TOLERANCE), -spread)
        };
        next.sort_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite scores"));
        next.truncate(BINS_BEAM_WIDTH);
        beam = next;
    }
    let best = beam.into_iter().min_by(|a, b| a.worst.total_cmp(&b.worst)).expect("beam is never empty");
    let grid: Vec<(f64, f64)> = best.highs.into_iter().zip(best.lows).collect();
    price_grid_bins_menu(&grid, params)
}

/// Even-odds Bins menu from (high price, low price) pairs.
pub fn price_grid_bins_menu(grid: &[(f64, f64)], params: PriceParams) -> Result<TaskMenu, CalibrationError> {
    let menu = TaskMenu {
        kind: DesignKind::Bins,
        domain: MenuDomain::Price,
        rows: grid
            .iter()
            .enumerate()
            .map(|(i, &(hi, lo))| MenuRow {
                row_index: i + 1,
                option_a: BinaryOption { p_hi: 0.5, hi, lo },
                option_b: None,
            })
            .collect(),
        endowment: Some(params.endowment),
        sell_price: Some(params.sell_price),
        authentic: false,
    };
    menu.validate()?;
    Ok(menu)
}

/// Default menu for each task number 1..=6. `high_b` is both the H&L
/// high payoff and the Bins decision-1 high payoff.
pub fn default_task_menus(high_b: f64) -> Result<[TaskMenu; 6], CalibrationError> {
    Ok([
        hl_menu(high_b, MenuDomain::Payoff)?,
        default_cvu_menu(MenuDomain::Payoff)?,
        default_bins_menu_anchored(MenuDomain::Payoff, high_b)?,
        default_bins_menu_anchored(MenuDomain::Price, high_b)?,
        default_cvu_menu(MenuDomain::Price)?,
        hl_menu(high_b, MenuDomain::Price)?,
    ])
}

/// Design kind and domain of task number 1..=6.
pub fn task_design(task: u8) -> Option<(DesignKind, MenuDomain)> {
    Some(match task {
        1 => (DesignKind::Hl, MenuDomain::Payoff),
        2 => (DesignKind::Cvu, MenuDomain::Payoff),
        3 => (DesignKind::Bins, MenuDomain::Payoff),
        4 => (DesignKind::Bins, MenuDomain::Price),
        5 => (DesignKind::Cvu, MenuDomain::Price),
        6 => (DesignKind::Hl, MenuDomain::Price),
        _ => return None,
    })
}

fn eu_gap(menu: &TaskMenu, first: (usize, Choice), second: (usize, Choice), r: f64) -> Result<f64, UtilityError> {
    let r = Crra(r);
    let u = |(row, c): (usize, Choice)| {
        menu.option_utility(row, c, r).map_err(|e| match e {
            CalibrationError::Utility(u) => u,
            _ => UtilityError::Empty,
        })
    };
    Ok(u(first)? - u(second)?)
}

/// Every indifference point of the menu. For HL and CvU entry `n-1` is the
/// crossover of row `n`; for Bins it is the point where decisions `n` and
/// `n+1` tie. `None` where no crossing exists in the bracket.
pub fn all_crossovers(menu: &TaskMenu, bracket: Bracket) -> Result<Vec<Option<f64>>, CalibrationError> {
    let pairs: Vec<((usize, Choice), (usize, Choice))> = match menu.kind {
        DesignKind::Hl | DesignKind::Cvu => (1..=10).map(|n| ((n, Choice::A), (n, Choice::B))).collect(),
        DesignKind::Bins => (1..10).map(|n| ((n, Choice::A), (n + 1, Choice::A))).collect(),
    };
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (x, y))| match find_root(|r| eu_gap(menu, x, y, r), bracket) {
            Ok(r) => Ok(Some(r)),
            Err(SolverError::NoCrossover { .. }) => Ok(None),
            Err(source) => Err(CalibrationError::Solver { row: i + 1, source }),
        })
        .collect()
}

/// The eight crossovers that should reproduce the attitude cutoffs: rows
/// 2..=9 for HL/CvU, decision pairs 1/2..=8/9 for Bins.
pub fn boundaries_from_menu(menu: &TaskMenu) -> Result<Vec<f64>, CalibrationError> {
    let all = all_crossovers(menu, Bracket::default())?;
    let picked: Vec<Option<f64>> = match menu.kind {
        DesignKind::Hl | DesignKind::Cvu => all[1..9].to_vec(),
        DesignKind::Bins => all[0..8].to_vec(),
    };
    let mut out = Vec::with_capacity(8);
    for (i, r) in picked.into_iter().enumerate() {
        let r =
            r.ok_or(CalibrationError::Solver { row: i + 2, source: SolverError::NoCrossover { lo: -5.0, hi: 5.0 } })?;
        if let Some(&prev) = out.last() {
            if !(r > prev) {
                return Err(CalibrationError::NonMonotone(i));
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Checks the ordering invariants a calibrated menu must satisfy: interior
/// boundaries increasing, row 1 (HL/CvU) switching below the first cutoff,
/// and the last row either dominated or switching above the last cutoff.
pub fn check_calibration(menu: &TaskMenu, schedule: &BoundarySchedule) -> Result<Vec<f64>, CalibrationError> {
    menu.validate()?;
    let b = boundaries_from_menu(menu)?;
    let all = all_crossovers(menu, Bracket::default())?;
    let cut = schedule.cutoffs();
    match menu.kind {
        DesignKind::Hl | DesignKind::Cvu => {
            if let Some(r1) = all[0] {
                if !(r1 < b[0]) {
                    return Err(CalibrationError::NonMonotone(0));
                }
            }
            if let Some(r10) = all[9] {
                if !(r10 > cut[7]) {
                    return Err(CalibrationError::Invariant(format!(
                        "row 10 switches at {r10}, inside the last interval"
                    )));
                }
            }
        }
        DesignKind::Bins => {
            if let Some(r9) = all[8] {
                if !(r9 > b[7]) {
                    return Err(CalibrationError::NonMonotone(8));
                }
            }
        }
    }
    Ok(b)
}

/// Row-by-row choices of an expected-utility maximizer; ties go to A.
pub fn simulate_eut_choices(menu: &TaskMenu, r: Crra) -> Result<Vec<Choice>, CalibrationError> {
    (1..=menu.rows.len())
        .map(|n| {
            let a = menu.option_utility(n, Choice::A, r)?;
            let b = menu.option_utility(n, Choice::B, r)?;
            Ok(if a >= b { Choice::A } else { Choice::B })
        })
        .collect()
}

/// Response of an expected-utility maximizer: safe count for HL/CvU,
/// argmax decision (lowest on ties) for Bins.
pub fn simulate_eut_agent(menu: &TaskMenu, r: Crra) -> Result<u8, CalibrationError> {
    match menu.kind {
        DesignKind::Hl | DesignKind::Cvu => {
            let choices = simulate_eut_choices(menu, r)?;
            let safe = choices.iter().take_while(|&&c| c == Choice::A).count();
            if choices[safe..].contains(&Choice::A) {
                return Err(CalibrationError::Invariant(format!("agent r={} switches twice", r.0)));
            }
            Ok(safe as u8)
        }
        DesignKind::Bins => {
            let mut best = (1usize, f64::NEG_INFINITY);
            for n in 1..=menu.rows.len() {
                let u = menu.option_utility(n, Choice::A, r)?;
                if u > best.1 {
                    best = (n, u);
                }
            }
            Ok(best.0 as u8)
        }
    }
}

/// Interval index the agent's response maps to.
pub fn simulated_interval_index(menu: &TaskMenu, r: Crra) -> Result<usize, CalibrationError> {
    Ok(interval_index(menu.kind, simulate_eut_agent(menu, r)?)?)
}
