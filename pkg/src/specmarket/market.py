"""Core market dynamics: information states, order formation, clearing, settlement.

The market is a deterministic sequential state machine. Every step, each agent
commits a fraction ``use_param`` of one asset according to its fixed strategy
bit for the current information state, the price clears as total demand over
total supply, and speculator holdings are settled at that single price.
Producers trade but their holdings are restored, so they act as a predictable
source of liquidity.

Log returns are base 10 throughout (most libraries default to natural log, so
this is worth repeating: every return in this package is ``log10 p' - log10 p``).

Randomness comes from one Philox counter-based generator per market, fully
determined by the config seed, so equal configs replay bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from .errors import ConfigError, MemoryBudgetError

#: refill size of the buffered exogenous-draw queue
_EXO_CHUNK = 4096

#: default cap on per-agent trajectory storage (bytes)
DEFAULT_MEMORY_BUDGET = 1 << 30

#: strategy matrices above this size (bytes) are rejected at config time
_MAX_STRATEGY_BYTES = 1 << 32


# ---------------------------------------------------------------------------
# information modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Endogenous:
    """Information built from the signs of the last ``memory_bits`` log returns."""

    memory_bits: int

    @property
    def n_states(self) -> int:
        return 1 << self.memory_bits

    def validate(self) -> None:
        if not isinstance(self.memory_bits, int) or self.memory_bits < 1:
            raise ConfigError(
                f"info_mode.memory_bits must be a positive integer, got {self.memory_bits!r}"
            )

    def __eq__(self, other):
        return isinstance(other, Endogenous) and other.memory_bits == self.memory_bits


@dataclass(frozen=True, eq=False)
class Exogenous:
    """Information drawn i.i.d. from a fixed distribution over states."""

    weights: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.weights)

    def validate(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ConfigError("info_mode.weights must be a non-empty 1-d vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ConfigError("info_mode.weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError(
                f"info_mode.weights must sum to 1 within 1e-12, got sum {w.sum()!r}"
            )

    def __eq__(self, other):
        return isinstance(other, Exogenous) and np.array_equal(other.weights, self.weights)


@dataclass(frozen=True, eq=False)
class Mixed:
    """Index composed of an exogenous part (high bits) and an endogenous part (low bits)."""

    endo_bits: int
    exo_bits: int
    exo_weights: np.ndarray

    @property
    def n_states(self) -> int:
        return 1 << (self.endo_bits + self.exo_bits)

    def validate(self) -> None:
        if not isinstance(self.endo_bits, int) or self.endo_bits < 1:
            raise ConfigError(f"info_mode.endo_bits must be a positive integer, got {self.endo_bits!r}")
        if not isinstance(self.exo_bits, int) or self.exo_bits < 1:
            raise ConfigError(f"info_mode.exo_bits must be a positive integer, got {self.exo_bits!r}")
        w = np.asarray(self.exo_weights, dtype=float)
        if w.shape != (1 << self.exo_bits,):
            raise ConfigError(
                f"info_mode.exo_weights must have length 2**exo_bits = {1 << self.exo_bits}, got {w.shape}"
            )
        Exogenous(w).validate()

    def __eq__(self, other):
        return (
            isinstance(other, Mixed)
            and other.endo_bits == self.endo_bits
            and other.exo_bits == self.exo_bits
            and np.array_equal(other.exo_weights, self.exo_weights)
        )


InformationMode = Union[Endogenous, Exogenous, Mixed]


def uniform_weights(n_states: int) -> np.ndarray:
    """Uniform exogenous distribution over ``n_states`` states."""
    if n_states < 1:
        raise ConfigError(f"n_states must be >= 1, got {n_states}")
    return np.full(n_states, 1.0 / n_states)


def exponential_weights(rate: float, n_states: int) -> np.ndarray:
    """Exogenous distribution with weights proportional to exp(-rate * mu)."""
    if n_states < 1:
        raise ConfigError(f"n_states must be >= 1, got {n_states}")
    w = np.exp(-rate * np.arange(n_states, dtype=float))
    return w / w.sum()


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

PRODUCER_KINDS = ("deterministic", "random")


@dataclass(frozen=True)
class MarketConfig:
    """All parameters of one simulation.

    Producers occupy agent indices ``0 .. n_producers-1``; speculators follow.
    """

    n_speculators: int
    use_param: float
    info_mode: InformationMode
    horizon: int
    seed: int
    n_producers: int = 0
    producer_kind: str = "deterministic"
    epsilon: float = 1e-10
    record_agents: bool = False

    @property
    def n_agents(self) -> int:
        return self.n_producers + self.n_speculators

    @property
    def n_states(self) -> int:
        return self.info_mode.n_states


def validate_config(config: MarketConfig) -> None:
    """Raise :class:`ConfigError` naming the offending field on any violation."""
    if not isinstance(config.n_speculators, int) or config.n_speculators < 1:
        raise ConfigError(f"n_speculators must be a positive integer, got {config.n_speculators!r}")
    if not isinstance(config.n_producers, int) or config.n_producers < 0:
        raise ConfigError(f"n_producers must be a nonnegative integer, got {config.n_producers!r}")
    if config.producer_kind not in PRODUCER_KINDS:
        raise ConfigError(
            f"producer_kind must be one of {PRODUCER_KINDS}, got {config.producer_kind!r}"
        )
    if not (0.0 < config.use_param <= 1.0):
        raise ConfigError(f"use_param must be in (0, 1], got {config.use_param!r}")
    # epsilon only guards against empty order-book sides; anything near 1e-3
    # would start to distort prices.
    if not (0.0 < config.epsilon < 1e-3):
        raise ConfigError(f"epsilon must satisfy 0 < epsilon << 1e-3, got {config.epsilon!r}")
    if not isinstance(config.horizon, int) or config.horizon < 1:
        raise ConfigError(f"horizon must be a positive integer, got {config.horizon!r}")
    if not isinstance(config.seed, int) or config.seed < 0 or config.seed >= 1 << 64:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {config.seed!r}")
    if not isinstance(config.info_mode, (Endogenous, Exogenous, Mixed)):
        raise ConfigError(f"info_mode must be Endogenous, Exogenous or Mixed, got {config.info_mode!r}")
    config.info_mode.validate()
    if config.n_states * config.n_agents > _MAX_STRATEGY_BYTES:
        raise ConfigError(
            "info_mode/n_speculators: strategy matrix of "
            f"{config.n_states} x {config.n_agents} bits exceeds the supported size"
        )


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

@dataclass
class MarketState:
    """Mutable state of one market; owned by a single thread."""

    config: MarketConfig
    t: int
    money: np.ndarray       # (N,) holdings, producers first
    stocks: np.ndarray      # (N,)
    strategies: np.ndarray  # (D, N) bool, row per information state
    mu: int
    last_price: float
    last_return: float
    last_seen: np.ndarray   # (D,) int64, -1 = never seen
    rng: np.random.Generator
    # buffered inverse-CDF sampling for exogenous draws (part of the state so
    # that replay is independent of how the caller interleaves operations)
    _exo_cum: Optional[np.ndarray] = field(default=None, repr=False)
    _exo_queue: Optional[np.ndarray] = field(default=None, repr=False)
    _exo_pos: int = field(default=0, repr=False)


class Orders(NamedTuple):
    """One step's order book: totals include the epsilon regularizer."""

    demand: float
    supply: float
    money_orders: np.ndarray  # m_i, zero for sellers
    stock_orders: np.ndarray  # s_i, zero for buyers


class StepOutput(NamedTuple):
    price: float
    log_return: float
    mu: int
    tau: Optional[int]


@dataclass
class SimulationRecord:
    """Per-step time series of one run."""

    prices: np.ndarray             # (T,)
    returns: np.ndarray            # (T-1,), returns[i] = log10 prices[i+1] - log10 prices[i]
    mus: np.ndarray                # (T,) int
    taus: np.ndarray               # (T,) float, NaN where the state had not occurred before
    mean_spec_capital: np.ndarray  # (T,)
    final_spec_capitals: np.ndarray  # (N_s,)
    agent_capitals: Optional[np.ndarray] = None  # (T, N_s) when recorded


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def new_market(config: MarketConfig) -> MarketState:
    """Initialize a market: unit holdings, random fixed strategies, random mu(0)."""
    validate_config(config)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    n = config.n_agents
    d = config.n_states
    strategies = rng.integers(0, 2, size=(d, n), dtype=np.uint8).view(np.bool_)
    mu0 = int(rng.integers(d))
    state = MarketState(
        config=config,
        t=0,
        money=np.ones(n),
        stocks=np.ones(n),
        strategies=strategies,
        mu=mu0,
        last_price=1.0,  # nominal price of the symmetric initial allocation
        last_return=0.0,
        last_seen=np.full(d, -1, dtype=np.int64),
        rng=rng,
    )
    if isinstance(config.info_mode, Exogenous):
        state._exo_cum = _cumulative(config.info_mode.weights)
    elif isinstance(config.info_mode, Mixed):
        state._exo_cum = _cumulative(config.info_mode.exo_weights)
    return state


def _cumulative(weights: np.ndarray) -> np.ndarray:
    cum = np.cumsum(np.asarray(weights, dtype=float))
    cum[-1] = 1.0  # close the last bin against u ~ U[0,1) rounding
    return cum


def _draw_exogenous(state: MarketState) -> int:
    if state._exo_queue is None or state._exo_pos >= len(state._exo_queue):
        u = state.rng.random(_EXO_CHUNK)
        state._exo_queue = np.searchsorted(state._exo_cum, u, side="right")
        state._exo_pos = 0
    value = int(state._exo_queue[state._exo_pos])
    state._exo_pos += 1
    return value


def _return_bit(state: MarketState) -> int:
    # Heaviside of the last return; exact ties broken by a fair coin, which
    # realizes the vanishing symmetric tie-break noise.
    r = state.last_return
    if r > 0.0:
        return 1
    if r < 0.0:
        return 0
    return int(state.rng.random() < 0.5)


def next_information(state: MarketState, mode: Optional[InformationMode] = None) -> int:
    """Next information index; shifts in the return sign (endogenous) or samples (exogenous)."""
    if mode is None:
        mode = state.config.info_mode
    if isinstance(mode, Endogenous):
        return ((state.mu << 1) | _return_bit(state)) % mode.n_states
    if isinstance(mode, Exogenous):
        return _draw_exogenous(state)
    endo_states = 1 << mode.endo_bits
    endo = ((state.mu % endo_states) << 1 | _return_bit(state)) % endo_states
    exo = _draw_exogenous(state)
    return exo * endo_states + endo


def form_orders(state: MarketState) -> Orders:
    """Orders for the current information state.

    A set strategy bit commits ``use_param`` of the agent's money to buying,
    an unset bit commits the same fraction of its stocks to selling. Random
    producers redraw their decision bit fairly every step instead of reading
    the strategy matrix.
    """
    config = state.config
    buy = state.strategies[state.mu]
    if config.n_producers and config.producer_kind == "random":
        buy = buy.copy()
        buy[: config.n_producers] = state.rng.random(config.n_producers) < 0.5
    gamma = config.use_param
    money_orders = gamma * state.money * buy
    stock_orders = gamma * state.stocks * ~buy
    demand = float(money_orders.sum()) + config.epsilon
    supply = float(stock_orders.sum()) + config.epsilon
    return Orders(demand, supply, money_orders, stock_orders)


def clear_price(demand: float, supply: float) -> float:
    """Market-clearing price: demand over supply (both strictly positive)."""
    return demand / supply


def settle(state: MarketState, orders: Orders, price: float) -> MarketState:
    """Settle all orders at ``price``; producers are restored, time advances."""
    k = state.config.n_producers
    m = orders.money_orders
    s = orders.stock_orders
    state.money[k:] += s[k:] * price - m[k:]
    state.stocks[k:] += m[k:] / price - s[k:]
    state.last_seen[state.mu] = state.t
    state.last_return = math.log10(price / state.last_price)
    state.last_price = price
    state.t += 1
    return state


def step(state: MarketState) -> StepOutput:
    """Advance one step: update information, form orders, clear, settle.

    The initial step uses the mu(0) drawn at construction; afterwards the
    information rule of the configured mode applies. ``tau`` is the number of
    steps since the step's information state occurred last, absent on first
    occurrence.
    """
    if state.t > 0:
        state.mu = next_information(state)
    mu = state.mu
    seen = int(state.last_seen[mu])
    tau = state.t - seen if seen >= 0 else None
    orders = form_orders(state)
    price = clear_price(orders.demand, orders.supply)
    settle(state, orders, price)
    return StepOutput(price, state.last_return, mu, tau)


def run(config: MarketConfig, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> SimulationRecord:
    """Execute ``config.horizon`` steps and return the full record.

    Equal configs produce bit-identical records. ``memory_budget`` caps the
    optional per-agent capital storage.
    """
    validate_config(config)
    horizon = config.horizon
    n_spec = config.n_speculators
    if config.record_agents:
        needed = horizon * n_spec * 8
        if needed > memory_budget:
            raise MemoryBudgetError(
                f"record_agents needs {needed} bytes for horizon={horizon}, "
                f"n_speculators={n_spec}; budget is {memory_budget}"
            )
    state = new_market(config)
    k = config.n_producers

    prices = np.empty(horizon)
    returns = np.empty(max(horizon - 1, 0))
    mus = np.empty(horizon, dtype=np.int64)
    taus = np.full(horizon, np.nan)
    mean_cap = np.empty(horizon)
    agent_caps = np.empty((horizon, n_spec)) if config.record_agents else None

    money = state.money
    stocks = state.stocks
    for t in range(horizon):
        out = step(state)
        prices[t] = out.price
        mus[t] = out.mu
        if out.tau is not None:
            taus[t] = out.tau
        if t > 0:
            returns[t - 1] = out.log_return
        mean_cap[t] = (money[k:].sum() + stocks[k:].sum()) / (2.0 * n_spec)
        if agent_caps is not None:
            agent_caps[t] = (money[k:] + stocks[k:]) / 2.0

    return SimulationRecord(
        prices=prices,
        returns=returns,
        mus=mus,
        taus=taus,
        mean_spec_capital=mean_cap,
        final_spec_capitals=(money[k:] + stocks[k:]) / 2.0,
        agent_capitals=agent_caps,
    )
