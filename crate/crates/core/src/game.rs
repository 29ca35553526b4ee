//! Multi-operator resource trading.
//!
//! Operators keep their portfolios private and talk to the market only
//! through [`best_response`]: a net lease demand per traded resource at the
//! posted prices. Prices move by tâtonnement on excess demand. A cooperative
//! benchmark ([`solve_suboperator`]) and a generic pure-strategy Nash checker
//! ([`verify_nash`]) support comparing the two regimes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{pool_usage, Allocation, ResourcePool, ResourceVector};
use crate::multiplex::{solve_exhaustive, DEFAULT_SCHEME_CAP};
use crate::orthogonal::SolveResult;
use crate::scenario::Scenario;
use crate::sizing::ties;

/// Largest demand grid a market will enumerate.
pub const GRID_BUDGET: u128 = 1_000_000;

/// Slices and pool share owned by one operator, as declared in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub id: String,
    /// Indices into the scenario's slice list.
    pub slices: Vec<usize>,
    /// Own capacity per resource.
    pub capacity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    /// Price step per unit of excess demand.
    pub eta: f64,
    pub rounds: usize,
    /// Clearing tolerance on `max_j |z_j|`.
    pub tol: f64,
    pub initial_prices: Vec<f64>,
    /// Odd number of demand levels per traded resource.
    pub grid_points: usize,
    /// Half-width of the demand grid per traded resource; defaults to the
    /// largest idle capacity among operators.
    pub grid_span: Option<Vec<f64>>,
}

impl MarketConfig {
    pub fn new(
        eta: f64,
        rounds: usize,
        tol: f64,
        initial_prices: Vec<f64>,
        grid_points: usize,
        grid_span: Option<Vec<f64>>,
    ) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::Domain(format!("eta {eta} must be finite and >= 0")));
        }
        if rounds == 0 {
            return Err(Error::Domain("rounds must be >= 1".into()));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Domain(format!("tolerance {tol} must be > 0")));
        }
        if initial_prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("initial prices must be finite and >= 0".into()));
        }
        if grid_points == 0 || grid_points.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "grid_points {grid_points} must be odd so that the grid contains zero"
            )));
        }
        if let Some(span) = &grid_span {
            if span.len() != initial_prices.len() {
                return Err(Error::Domain(format!(
                    "{} grid spans for {} traded resources",
                    span.len(),
                    initial_prices.len()
                )));
            }
            if span.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(Error::Domain("grid spans must be finite and >= 0".into()));
            }
        }
        Ok(MarketConfig {
            eta,
            rounds,
            tol,
            initial_prices,
            grid_points,
            grid_span,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorsConfig {
    pub members: Vec<OperatorSpec>,
    /// Resource indices open for leasing.
    pub traded: Vec<usize>,
    pub market: MarketConfig,
}

/// A trading participant. Its portfolio is private; the market only sees
/// its responses.
#[derive(Debug, Clone)]
pub struct Operator {
    id: String,
    portfolio: Scenario,
    traded: Vec<usize>,
    scheme_cap: usize,
}

impl Operator {
    /// `portfolio` holds the operator's slices over its own capacity share.
    pub fn new(id: impl Into<String>, portfolio: Scenario, traded: Vec<usize>) -> Result<Self> {
        if let Some(&j) = traded.iter().find(|&&j| j >= portfolio.n()) {
            return Err(Error::Config(format!("traded resource {j} outside the pool")));
        }
        Ok(Operator {
            id: id.into(),
            portfolio,
            traded,
            scheme_cap: DEFAULT_SCHEME_CAP,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn traded(&self) -> &[usize] {
        &self.traded
    }

    pub fn capacity(&self) -> &[f64] {
        &self.portfolio.pool.capacity
    }

    fn leased_portfolio(&self, lease: &[f64]) -> Result<Option<Scenario>> {
        if lease.len() != self.traded.len() {
            return Err(Error::Config(format!(
                "{} lease entries for {} traded resources",
                lease.len(),
                self.traded.len()
            )));
        }
        let mut cap = self.portfolio.pool.capacity.to_vec();
        for (&j, &d) in self.traded.iter().zip(lease) {
            let c = cap[j] + d;
            if c < -1e-12 * cap[j].max(1.0) {
                return Ok(None);
            }
            cap[j] = c.max(0.0);
        }
        let mut s = self.portfolio.clone();
        s.pool = ResourcePool::new(ResourceVector::new(cap)?, s.pool.unit_cost.clone())?;
        Ok(Some(s))
    }

    fn solve_leased(&self, lease: &[f64]) -> Result<Option<SolveResult>> {
        let Some(s) = self.leased_portfolio(lease)? else {
            return Ok(None);
        };
        match solve_exhaustive(&s, self.scheme_cap) {
            Ok(r) => Ok(Some(r)),
            Err(Error::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Best internal profit with `lease` added to the own capacity of each
    /// traded resource; `None` if the portfolio cannot be run.
    pub fn valuation(&self, lease: &[f64]) -> Result<Option<f64>> {
        Ok(self.solve_leased(lease)?.map(|r| r.outcome.total_profit))
    }

    /// Capacity left unused by the no-trade optimum, per traded resource.
    pub fn idle(&self) -> Result<Vec<f64>> {
        let zero = vec![0.0; self.traded.len()];
        let Some(r) = self.solve_leased(&zero)? else {
            return Ok(zero);
        };
        let scheme = self.portfolio.scheme_with(&r.sharing)?;
        let alloc = Allocation::new(&self.portfolio.slices, &scheme, r.sizes)?;
        let usage = pool_usage(&alloc, &scheme)?;
        Ok(self
            .traded
            .iter()
            .map(|&j| (self.portfolio.pool.capacity[j] - usage[j]).max(0.0))
            .collect())
    }
}

/// Builds one [`Operator`] per member of the scenario's operators block.
pub fn operators_from_scenario(scenario: &Scenario) -> Result<Vec<Operator>> {
    let cfg = scenario
        .operators
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario `{}` has no operators block", scenario.name)))?;
    cfg.members
        .iter()
        .map(|m| {
            let pool = ResourcePool::new(
                ResourceVector::new(m.capacity.clone())?,
                scenario.pool.unit_cost.clone(),
            )?;
            let portfolio = scenario.restrict(&m.id, &m.slices, pool)?;
            Operator::new(m.id.clone(), portfolio, cfg.traded.clone())
        })
        .collect()
}

/// Cartesian grid of net lease vectors, one axis per traded resource.
/// Every axis is symmetric around an exact zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandGrid {
    axes: Vec<Vec<f64>>,
}

impl DemandGrid {
    pub fn new(span: &[f64], points: usize) -> Result<Self> {
        if points == 0 || points.is_multiple_of(2) {
            return Err(Error::Domain(format!("grid points {points} must be odd")));
        }
        if span.is_empty() {
            return Err(Error::Domain("grid needs at least one axis".into()));
        }
        let half = (points / 2) as i64;
        let axes: Vec<Vec<f64>> = span
            .iter()
            .map(|&w| {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::Domain(format!("grid span {w} must be finite and >= 0")));
                }
                if w == 0.0 || half == 0 {
                    return Ok(vec![0.0]);
                }
                Ok((-half..=half).map(|k| w * k as f64 / half as f64).collect())
            })
            .collect::<Result<_>>()?;
        let size = axes.iter().fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128));
        if size > GRID_BUDGET {
            return Err(Error::BudgetExceeded {
                required: size,
                budget: GRID_BUDGET,
            });
        }
        Ok(DemandGrid { axes })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `index` in lexicographic order (last axis fastest).
    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut rest = index;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = axis[rest % axis.len()];
            rest /= axis.len();
        }
        out
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn zero_index(&self) -> usize {
        self.axes
            .iter()
            .fold(0, |acc, axis| acc * axis.len() + axis.len() / 2)
    }
}

/// Demand grid of a market: the configured span, or the largest idle
/// capacity among the operators.
pub fn market_grid(operators: &[Operator], market: &MarketConfig) -> Result<DemandGrid> {
    let span = match &market.grid_span {
        Some(s) => s.clone(),
        None => {
            let idle = operators
                .par_iter()
                .map(Operator::idle)
                .collect::<Result<Vec<_>>>()?;
            (0..market.initial_prices.len())
                .map(|j| idle.iter().map(|v| v[j]).fold(0.0, f64::max))
                .collect()
        }
    };
    DemandGrid::new(&span, market.grid_points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    /// Grid index of `demand`.
    pub index: usize,
    /// Net lease per traded resource; positive leases in.
    pub demand: Vec<f64>,
    /// Internal profit at `demand`.
    pub value: f64,
    /// `value - prices . demand`.
    pub surplus: f64,
    /// False when the portfolio cannot run even without trading.
    pub feasible: bool,
}

fn cost(prices: &[f64], d: &[f64]) -> f64 {
    prices.iter().zip(d).map(|(p, x)| p * x).sum()
}

/// Picks the best grid point given precomputed valuations. Ties go to the
/// smallest-norm point, then the lexicographically smallest.
fn respond(grid: &DemandGrid, values: &[Option<f64>], prices: &[f64]) -> Response {
    let zero = grid.zero_index();
    if values[zero].is_none() {
        return Response {
            index: zero,
            demand: grid.point(zero),
            value: 0.0,
            surplus: 0.0,
            feasible: false,
        };
    }
    let mut best: Option<(usize, f64, f64, f64)> = None;
    for (k, v) in values.iter().enumerate() {
        let Some(v) = *v else { continue };
        let d = grid.point(k);
        let surplus = v - cost(prices, &d);
        let norm: f64 = d.iter().map(|x| x * x).sum();
        let better = match best {
            None => true,
            Some((_, _, bs, bn)) => {
                if ties(surplus, bs) {
                    norm < bn
                } else {
                    surplus > bs
                }
            }
        };
        if better {
            best = Some((k, v, surplus, norm));
        }
    }
    let (index, value, surplus, _) = best.expect("zero point is feasible");
    Response {
        index,
        demand: grid.point(index),
        value,
        surplus,
        feasible: true,
    }
}

/// Internal profit at every grid point.
pub fn valuations(operator: &Operator, grid: &DemandGrid) -> Result<Vec<Option<f64>>> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| operator.valuation(&grid.point(k)))
        .collect()
}

/// Net lease demand maximizing internal profit minus lease cost over `grid`.
pub fn best_response(operator: &Operator, prices: &[f64], grid: &DemandGrid) -> Result<Response> {
    if prices.len() != operator.traded.len() || prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Domain("prices must be finite, >= 0, one per traded resource".into()));
    }
    Ok(respond(grid, &valuations(operator, grid)?, prices))
}

/// One executed lease.
#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    /// Position in the traded-resource list.
    pub resource: usize,
    pub seller: usize,
    pub buyer: usize,
    pub volume: f64,
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub trades: Vec<Trade>,
    /// Per operator, per traded resource.
    pub net_lease: Vec<Vec<f64>>,
    pub paid: Vec<f64>,
    pub received: Vec<f64>,
}

/// Executes the requested net demands at fixed prices. The short side of
/// each resource is served in full, the long side pro rata; each buyer
/// takes from each seller in proportion to the seller's offer.
pub fn execute(prices: &[f64], demands: &[Vec<f64>]) -> Execution {
    let ops = demands.len();
    let r = prices.len();
    let mut trades = Vec::new();
    let mut net_lease = vec![vec![0.0; r]; ops];
    let mut paid = vec![0.0; ops];
    let mut received = vec![0.0; ops];
    for j in 0..r {
        let bought: f64 = demands.iter().map(|d| d[j].max(0.0)).sum();
        let sold: f64 = demands.iter().map(|d| (-d[j]).max(0.0)).sum();
        let volume = bought.min(sold);
        if volume <= 0.0 {
            continue;
        }
        for (b, db) in demands.iter().enumerate() {
            if db[j] <= 0.0 {
                continue;
            }
            for (s, ds) in demands.iter().enumerate() {
                if ds[j] >= 0.0 {
                    continue;
                }
                let v = volume * (db[j] / bought) * (-ds[j] / sold);
                let payment = prices[j] * v;
                net_lease[b][j] += v;
                net_lease[s][j] -= v;
                paid[b] += payment;
                received[s] += payment;
                trades.push(Trade {
                    resource: j,
                    seller: s,
                    buyer: b,
                    volume: v,
                    payment,
                });
            }
        }
    }
    Execution {
        trades,
        net_lease,
        paid,
        received,
    }
}

fn settled_profit(op: &Operator, exec: &Execution, o: usize) -> Result<Option<f64>> {
    let net = &exec.net_lease[o];
    let value = match op.valuation(net)? {
        Some(v) => v,
        None if net.iter().all(|x| *x == 0.0) => 0.0,
        None => return Ok(None),
    };
    Ok(Some(value + exec.received[o] - exec.paid[o]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub prices: Vec<f64>,
    pub excess: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeOutcome {
    pub operator_ids: Vec<String>,
    /// Prices the final responses were given.
    pub prices: Vec<f64>,
    pub responses: Vec<Response>,
    pub execution: Execution,
    /// Internal profit at the executed lease plus income minus payments.
    pub profits: Vec<f64>,
    pub no_trade_profits: Vec<f64>,
    pub converged: bool,
    pub trace: Vec<RoundRecord>,
    pub grid: DemandGrid,
}

impl TradeOutcome {
    pub fn rounds(&self) -> usize {
        self.trace.len()
    }

    pub fn excess(&self) -> &[f64] {
        &self.trace.last().expect("at least one round").excess
    }
}

/// Tâtonnement: collect best responses, stop when `max |z| <= tol`,
/// otherwise move prices to `max(0, p + eta z)`. Trades are executed at the
/// last posted prices, also when the round limit is hit.
pub fn run_market(operators: &[Operator], market: &MarketConfig) -> Result<TradeOutcome> {
    if operators.len() < 2 {
        return Err(Error::Domain("a market needs at least two operators".into()));
    }
    let r = market.initial_prices.len();
    if let Some(op) = operators.iter().find(|op| op.traded.len() != r) {
        return Err(Error::Config(format!(
            "operator `{}` trades {} resources, market prices {r}",
            op.id,
            op.traded.len()
        )));
    }
    let grid = market_grid(operators, market)?;
    let values = operators
        .iter()
        .map(|op| valuations(op, &grid))
        .collect::<Result<Vec<_>>>()?;
    let no_trade_profits: Vec<f64> = values
        .iter()
        .map(|v| v[grid.zero_index()].unwrap_or(0.0))
        .collect();

    let mut prices = market.initial_prices.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut responses;
    loop {
        responses = values
            .par_iter()
            .map(|v| respond(&grid, v, &prices))
            .collect::<Vec<_>>();
        let excess: Vec<f64> = (0..r)
            .map(|j| responses.iter().map(|resp| resp.demand[j]).sum())
            .collect();
        let worst = excess.iter().fold(0.0, |m: f64, z| m.max(z.abs()));
        trace.push(RoundRecord {
            prices: prices.clone(),
            excess: excess.clone(),
        });
        if worst <= market.tol {
            converged = true;
            break;
        }
        if trace.len() >= market.rounds {
            break;
        }
        for (p, z) in prices.iter_mut().zip(&excess) {
            *p = (*p + market.eta * z).max(0.0);
        }
    }

    let demands: Vec<Vec<f64>> = responses.iter().map(|resp| resp.demand.clone()).collect();
    let execution = execute(&prices, &demands);
    let profits = operators
        .par_iter()
        .enumerate()
        .map(|(o, op)| {
            settled_profit(op, &execution, o)?.ok_or_else(|| {
                Error::Infeasible(format!("operator `{}` cannot run its executed lease", op.id))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TradeOutcome {
        operator_ids: operators.iter().map(|op| op.id.clone()).collect(),
        prices,
        responses,
        execution,
        profits,
        no_trade_profits,
        converged,
        trace,
        grid,
    })
}

/// A finite game in pure strategies.
pub trait StrategicGame {
    fn players(&self) -> usize;
    fn strategies(&self, player: usize) -> usize;
    fn payoff(&self, player: usize, profile: &[usize]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub player: usize,
    pub strategy: usize,
    pub payoff: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashVerdict {
    pub is_nash: bool,
    /// Largest improving unilateral deviation, if any.
    pub deviation: Option<Deviation>,
    /// Number of deviations evaluated.
    pub checked: u128,
}

/// Enumerates every unilateral deviation from `profile`. The profile is a
/// Nash equilibrium iff no deviation gains more than `tol`.
pub fn verify_nash<G: StrategicGame + Sync>(
    game: &G,
    profile: &[usize],
    tol: f64,
    budget: u128,
) -> Result<NashVerdict> {
    let players = game.players();
    if profile.len() != players {
        return Err(Error::Config(format!(
            "profile has {} entries for {players} players",
            profile.len()
        )));
    }
    let required: u128 = (0..players).map(|p| game.strategies(p) as u128).sum();
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    for (p, &s) in profile.iter().enumerate() {
        if s >= game.strategies(p) {
            return Err(Error::Config(format!("player {p} has no strategy {s}")));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..players)
        .flat_map(|p| (0..game.strategies(p)).map(move |s| (p, s)))
        .filter(|&(p, s)| profile[p] != s)
        .collect();
    let base = (0..players)
        .map(|p| game.payoff(p, profile))
        .collect::<Result<Vec<_>>>()?;
    let gains = pairs
        .par_iter()
        .map(|&(p, s)| {
            let mut dev = profile.to_vec();
            dev[p] = s;
            let payoff = game.payoff(p, &dev)?;
            Ok(Deviation {
                player: p,
                strategy: s,
                payoff,
                gain: payoff - base[p],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<Deviation> = None;
    for d in gains {
        if d.gain > tol && best.as_ref().is_none_or(|b| d.gain > b.gain) {
            best = Some(d);
        }
    }
    Ok(NashVerdict {
        is_nash: best.is_none(),
        deviation: best,
        checked: pairs.len() as u128,
    })
}

/// The trading stage at fixed prices as a strategic game: each operator
/// picks a grid point, trades execute with rationing, payoffs are settled
/// profits. A strategy the operator cannot run pays `-inf`.
pub struct MarketGame<'a> {
    operators: &'a [Operator],
    grid: &'a DemandGrid,
    prices: Vec<f64>,
}

impl<'a> MarketGame<'a> {
    pub fn new(operators: &'a [Operator], grid: &'a DemandGrid, prices: Vec<f64>) -> Self {
        MarketGame {
            operators,
            grid,
            prices,
        }
    }

    /// Profile of an outcome's final responses.
    pub fn profile(outcome: &TradeOutcome) -> Vec<usize> {
        outcome.responses.iter().map(|r| r.index).collect()
    }
}

impl StrategicGame for MarketGame<'_> {
    fn players(&self) -> usize {
        self.operators.len()
    }

    fn strategies(&self, _player: usize) -> usize {
        self.grid.len()
    }

    fn payoff(&self, player: usize, profile: &[usize]) -> Result<f64> {
        let demands: Vec<Vec<f64>> = profile.iter().map(|&k| self.grid.point(k)).collect();
        let exec = execute(&self.prices, &demands);
        Ok(settled_profit(&self.operators[player], &exec, player)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// `a >= b` everywhere and `a > b` somewhere.
pub fn pareto_dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "profit vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuboperatorResult {
    pub result: SolveResult,
    /// Slice indices of the merged portfolio, in scenario order.
    pub slices: Vec<usize>,
    /// Profit of each member's slices under the central optimum.
    pub profits: Vec<f64>,
}

/// Cooperative benchmark: all members' slices solved centrally over the
/// scenario's full pool.
pub fn solve_suboperator(scenario: &Scenario, members: &[OperatorSpec]) -> Result<SuboperatorResult> {
    if members.is_empty() {
        return Err(Error::Domain("no sub-operators".into()));
    }
    let mut slices: Vec<usize> = members.iter().flat_map(|m| m.slices.iter().copied()).collect();
    slices.sort_unstable();
    let before = slices.len();
    slices.dedup();
    if slices.len() != before {
        return Err(Error::Config("a slice belongs to more than one sub-operator".into()));
    }
    let merged = scenario.restrict("cooperative", &slices, scenario.pool.clone())?;
    let result = solve_exhaustive(&merged, DEFAULT_SCHEME_CAP)?;
    let profits = members
        .iter()
        .map(|m| {
            m.slices
                .iter()
                .map(|i| {
                    let k = slices.binary_search(i).expect("merged above");
                    result.outcome.profits[k]
                })
                .sum()
        })
        .collect();
    Ok(SuboperatorResult {
        result,
        slices,
        profits,
    })
}
