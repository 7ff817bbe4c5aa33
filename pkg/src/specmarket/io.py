"""Config files, run artifacts, and empirical price-series ingestion.

Configs are flat INI files with one section per concern, so diffs stay
reviewable. Every emitted artifact carries a format version and the hash of
the resolved config; re-running from the echoed config reproduces the files
byte for byte. Model output and empirical data go through the same estimator
pipeline so their statistics are directly comparable.
"""

from __future__ import annotations

import configparser
import datetime
import hashlib
import io as _io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DataFormatError, DegenerateInputError, SampleSizeError
from .market import (
    Endogenous,
    Exogenous,
    MarketConfig,
    Mixed,
    SimulationRecord,
    exponential_weights,
    uniform_weights,
    validate_config,
)
from .sweep import SweepAxis, SweepSpec
from . import stats

FORMAT_VERSION = 1

_MARKET_KEYS = {
    "n_speculators", "n_producers", "producer_kind", "use_param",
    "epsilon", "horizon", "seed", "record_agents",
}
_INFO_KEYS = {
    "mode", "memory_bits", "distribution", "states", "rate", "weights",
    "endo_bits", "exo_bits", "exo_distribution", "exo_states", "exo_rate", "exo_weights",
}
_SWEEP_KEYS = {"axes", "repetitions", "metrics"}


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise DataFormatError(f"config parse error in {path}: {exc}") from exc
    return parser


def _get(section, key, convert, where):
    raw = section.get(key)
    if raw is None:
        raise ConfigError(f"{where}.{key} is required")
    try:
        return convert(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}.{key}: {exc}") from exc


def _to_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}")


def _to_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}")


def _to_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _to_floats(raw: str) -> np.ndarray:
    parts = [p for chunk in raw.split(",") for p in chunk.split()]
    return np.array([_to_float(p) for p in parts])


def _reject_unknown(parser, section, known):
    if section not in parser:
        return
    unknown = set(parser[section]) - known
    if unknown:
        raise ConfigError(f"unknown key {section}.{sorted(unknown)[0]}")


def _parse_weights(section, prefix, where):
    """Common weight-vector grammar: explicit list or a named distribution."""
    w_key = f"{prefix}weights"
    d_key = f"{prefix}distribution"
    if section.get(w_key) is not None:
        if section.get(d_key) is not None:
            raise ConfigError(f"{where}.{w_key} and {where}.{d_key} are mutually exclusive")
        return _get(section, w_key, _to_floats, where)
    dist = _get(section, d_key, str, where).strip().lower()
    states = _get(section, f"{prefix}states", _to_int, where)
    if dist == "uniform":
        return uniform_weights(states)
    if dist == "exp":
        rate = _get(section, f"{prefix}rate", _to_float, where)
        return exponential_weights(rate, states)
    raise ConfigError(f"{where}.{d_key} must be 'uniform' or 'exp', got {dist!r}")


def parse_info_mode(parser: configparser.ConfigParser):
    if "info" not in parser:
        raise ConfigError("info section is required")
    section = parser["info"]
    _reject_unknown(parser, "info", _INFO_KEYS)
    mode = _get(section, "mode", str, "info").strip().lower()
    if mode == "endogenous":
        return Endogenous(_get(section, "memory_bits", _to_int, "info"))
    if mode == "exogenous":
        return Exogenous(_parse_weights(section, "", "info"))
    if mode == "mixed":
        return Mixed(
            endo_bits=_get(section, "endo_bits", _to_int, "info"),
            exo_bits=_get(section, "exo_bits", _to_int, "info"),
            exo_weights=_parse_weights(section, "exo_", "info"),
        )
    raise ConfigError(f"info.mode must be endogenous, exogenous or mixed, got {mode!r}")


def parse_market_config(path) -> MarketConfig:
    """Parse a market config file; unknown keys are rejected, defaults documented.

    Defaults: epsilon 1e-10, n_producers 0 (deterministic), record_agents false.
    """
    parser = _read_ini(path)
    if "market" not in parser:
        raise ConfigError("market section is required")
    for name in parser.sections():
        if name not in ("market", "info", "sweep"):
            raise ConfigError(f"unknown section [{name}]")
    _reject_unknown(parser, "market", _MARKET_KEYS)
    section = parser["market"]
    config = MarketConfig(
        n_speculators=_get(section, "n_speculators", _to_int, "market"),
        n_producers=_get(section, "n_producers", _to_int, "market") if "n_producers" in section else 0,
        producer_kind=section.get("producer_kind", "deterministic").strip().lower(),
        use_param=_get(section, "use_param", _to_float, "market"),
        epsilon=_get(section, "epsilon", _to_float, "market") if "epsilon" in section else 1e-10,
        info_mode=parse_info_mode(parser),
        horizon=_get(section, "horizon", _to_int, "market"),
        seed=_get(section, "seed", _to_int, "market"),
        record_agents=_get(section, "record_agents", _to_bool, "market") if "record_agents" in section else False,
    )
    validate_config(config)
    return config


def parse_sweep_spec(path) -> SweepSpec:
    """Parse a sweep config: the market sections plus a [sweep] section."""
    base = parse_market_config(path)
    parser = _read_ini(path)
    if "sweep" not in parser:
        raise ConfigError("sweep section is required")
    section = parser["sweep"]
    axis_names = [a.strip() for chunk in _get(section, "axes", str, "sweep").split(",")
                  for a in chunk.split() if a.strip()]
    known = _SWEEP_KEYS | set(axis_names)
    _reject_unknown(parser, "sweep", known)
    axes = []
    for name in axis_names:
        values = _get(section, name, _to_floats, "sweep")
        if name in ("n_states", "n_speculators", "n_producers"):
            values = values.astype(int)
        axes.append(SweepAxis(name, tuple(values.tolist())))
    repetitions = _get(section, "repetitions", _to_int, "sweep") if "repetitions" in section else 50
    if "metrics" in section:
        metrics = tuple(m.strip() for chunk in section["metrics"].split(",")
                        for m in chunk.split() if m.strip())
    else:
        metrics = ("variance", "kurtosis", "reduction")
    spec = SweepSpec(base=base, axes=tuple(axes), repetitions=repetitions, metrics=metrics)
    spec.validate()
    return spec


# ---------------------------------------------------------------------------
# config emission
# ---------------------------------------------------------------------------

def _format_float(x: float) -> str:
    return repr(float(x))


def emit_config(config: MarketConfig) -> str:
    """Resolved config as INI text; parsing it back reproduces the config."""
    lines = [
        "[market]",
        f"n_speculators = {config.n_speculators}",
        f"n_producers = {config.n_producers}",
        f"producer_kind = {config.producer_kind}",
        f"use_param = {_format_float(config.use_param)}",
        f"epsilon = {_format_float(config.epsilon)}",
        f"horizon = {config.horizon}",
        f"seed = {config.seed}",
        f"record_agents = {'true' if config.record_agents else 'false'}",
        "",
        "[info]",
    ]
    mode = config.info_mode
    if isinstance(mode, Endogenous):
        lines += ["mode = endogenous", f"memory_bits = {mode.memory_bits}"]
    elif isinstance(mode, Exogenous):
        lines.append("mode = exogenous")
        lines += _emit_weights(mode.weights, "")
    else:
        lines += ["mode = mixed", f"endo_bits = {mode.endo_bits}", f"exo_bits = {mode.exo_bits}"]
        lines += _emit_weights(mode.exo_weights, "exo_")
    return "\n".join(lines) + "\n"


def _emit_weights(weights: np.ndarray, prefix: str) -> list:
    w = np.asarray(weights)
    if np.all(w == w[0]):
        return [f"{prefix}distribution = uniform", f"{prefix}states = {w.size}"]
    return [f"{prefix}weights = " + ", ".join(_format_float(v) for v in w)]


def config_hash(config: MarketConfig) -> str:
    return hashlib.sha256(emit_config(config).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# analysis pipeline shared by model runs and empirical series
# ---------------------------------------------------------------------------

@dataclass
class ReturnsAnalysis:
    """Estimator bundle over one window of returns, std-normalized."""

    n: int
    kurtosis: float
    tail: stats.TailFit
    ccdf: stats.CcdfCurve
    autocorr: np.ndarray

    def summary(self) -> dict:
        return {
            "n": self.n,
            "kurtosis": self.kurtosis,
            "tail": {
                "exponent": self.tail.exponent,
                "cutoff": self.tail.cutoff,
                "ks_distance": self.tail.ks_distance,
                "n_tail": self.tail.n_tail,
            },
        }


def analyze_returns(returns: np.ndarray, max_lag: Optional[int] = None) -> ReturnsAnalysis:
    """The single estimator path: normalize, rank-order, Hill fit, autocorrelate."""
    normalized = stats.normalize_by_std(returns)
    magnitudes = np.abs(normalized)
    if max_lag is None:
        max_lag = min(1000, normalized.size - 2)
    return ReturnsAnalysis(
        n=int(normalized.size),
        kurtosis=stats.kurtosis(normalized),
        tail=stats.hill_fit_ks(magnitudes),
        ccdf=stats.ccdf_rank_ordered(magnitudes),
        autocorr=stats.autocorr_abs(normalized, max_lag),
    )


def post_transient(returns: np.ndarray) -> np.ndarray:
    """The analysis window of a model run: the final half of the return series."""
    return returns[len(returns) // 2:]


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _header(chash: str) -> str:
    return f"# specmarket-format: {FORMAT_VERSION}\n# config-hash: {chash}\n"


def write_run_artifact(outdir, config: MarketConfig, record: SimulationRecord) -> dict:
    """Write run.csv, ccdf.csv, autocorr.csv, surprise.csv, summary.json, config.ini.

    Statistics are computed on the post-transient (final-half) window; the
    reduction ratio compares the first 10 return magnitudes against it.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(config)
    files = {}

    files["config"] = outdir / "config.ini"
    files["config"].write_text(_header(chash) + emit_config(config))

    buf = _io.StringIO()
    buf.write(_header(chash))
    buf.write("t,mu,tau,price,log_return\n")
    taus = record.taus
    for t in range(len(record.prices)):
        tau = "" if math.isnan(taus[t]) else str(int(taus[t]))
        ret = "" if t == 0 else _format_float(record.returns[t - 1])
        buf.write(f"{t},{record.mus[t]},{tau},{_format_float(record.prices[t])},{ret}\n")
    files["run"] = outdir / "run.csv"
    files["run"].write_text(buf.getvalue())

    window = post_transient(record.returns)
    analysis = analyze_returns(window)
    reduction = stats.reduction_ratio(np.abs(record.returns), 10, window.size)

    files["ccdf"] = outdir / "ccdf.csv"
    _write_columns(files["ccdf"], chash, ("x", "ccdf"),
                   (analysis.ccdf.values, analysis.ccdf.probabilities))
    files["autocorr"] = outdir / "autocorr.csv"
    _write_columns(files["autocorr"], chash, ("lag", "autocorr"),
                   (np.arange(analysis.autocorr.size), analysis.autocorr))

    summary = {
        "format": FORMAT_VERSION,
        "config_hash": chash,
        "seed": config.seed,
        "variance": float(np.var(window)),
        "reduction": reduction,
        "analysis": analysis.summary(),
    }
    half = len(record.prices) // 2
    if np.isfinite(record.taus[half:]).any():
        tail_rec = SimulationRecord(
            prices=record.prices[half:], returns=record.returns[half:],
            mus=record.mus[half:], taus=record.taus[half:],
            mean_spec_capital=record.mean_spec_capital[half:],
            final_spec_capitals=record.final_spec_capitals,
        )
        try:
            surprise = stats.surprise_stats(tail_rec)
        except (SampleSizeError, DegenerateInputError):
            surprise = None
        if surprise is not None:
            files["surprise"] = outdir / "surprise.csv"
            _write_columns(files["surprise"], chash, ("tau_bin", "mean_abs_return", "count"),
                           (surprise.bin_centers, surprise.bin_means, surprise.bin_counts))
            summary["surprise"] = {"log_correlation": surprise.log_correlation}
            if surprise.tau_tail is not None:
                summary["surprise"].update({
                    "tau_ccdf_exponent": surprise.tau_tail.exponent,
                    "tau_density_exponent": surprise.tau_tail.exponent + 1.0,
                    "tau_ks_distance": surprise.tau_tail.ks_distance,
                    "tau_n_tail": surprise.tau_tail.n_tail,
                })
    files["summary"] = outdir / "summary.json"
    files["summary"].write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return files


def _write_columns(path, chash, names, columns):
    buf = _io.StringIO()
    buf.write(_header(chash))
    buf.write(",".join(names) + "\n")
    for row in zip(*columns):
        buf.write(",".join(str(int(v)) if isinstance(v, (int, np.integer)) else _format_float(v)
                           for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


def read_run_csv(path) -> dict:
    """Read back a run.csv; refuses files with an unknown format version."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# specmarket-format:"):
        raise DataFormatError(f"{path}: missing format header; not a specmarket file?")
    version = lines[0].split(":", 1)[1].strip()
    if version != str(FORMAT_VERSION):
        raise DataFormatError(f"{path}: unknown format version {version!r}")
    chash = lines[1].split(":", 1)[1].strip() if lines[1].startswith("# config-hash:") else ""
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    header = body[0].split(",")
    if header != ["t", "mu", "tau", "price", "log_return"]:
        raise DataFormatError(f"{path}: unexpected columns {header}")
    n = len(body) - 1
    prices = np.empty(n)
    mus = np.empty(n, dtype=np.int64)
    taus = np.full(n, np.nan)
    returns = np.empty(max(n - 1, 0))
    for i, line in enumerate(body[1:]):
        parts = line.split(",")
        if len(parts) != 5:
            raise DataFormatError(f"{path}: row {i + 1}: expected 5 fields, got {len(parts)}")
        mus[i] = int(parts[1])
        if parts[2]:
            taus[i] = float(parts[2])
        prices[i] = float(parts[3])
        if i > 0:
            returns[i - 1] = float(parts[4])
    return {"config_hash": chash, "prices": prices, "mus": mus, "taus": taus, "returns": returns}


# ---------------------------------------------------------------------------
# empirical series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalSeries:
    dates: tuple
    closes: np.ndarray

    def log_returns(self) -> np.ndarray:
        return np.diff(np.log10(self.closes))


_DATE_FORMATS = ("%Y-%m-%d", "%Y%m%d", "%Y.%m.%d", "%Y/%m/%d", "%m/%d/%Y")


def _parse_date(token: str) -> Optional[datetime.date]:
    for fmt in _DATE_FORMATS:
        try:
            return datetime.datetime.strptime(token, fmt).date()
        except ValueError:
            continue
    return None


def load_empirical(path) -> EmpiricalSeries:
    """Load a two-column (date, close) text file; header lines are tolerated.

    Dates must be strictly increasing and prices positive; violations are
    reported with their row number.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    dates, closes = [], []
    started = False
    for row, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for chunk in line.split(",") for p in chunk.split()]
        if len(parts) < 2:
            if started:
                raise DataFormatError(f"{path}: row {row}: expected date and close, got {line!r}")
            continue
        date = _parse_date(parts[0])
        if date is None:
            if started:
                raise DataFormatError(f"{path}: row {row}: unparseable date {parts[0]!r}")
            continue  # header tolerance: skip leading non-data lines
        started = True
        try:
            close = float(parts[1])
        except ValueError:
            raise DataFormatError(f"{path}: row {row}: unparseable close {parts[1]!r}") from None
        if close <= 0:
            raise DataFormatError(f"{path}: row {row}: close must be positive, got {close}")
        if dates and date <= dates[-1]:
            raise DataFormatError(f"{path}: row {row}: dates must be strictly increasing")
        dates.append(date)
        closes.append(close)
    if len(closes) < 2:
        raise DataFormatError(f"{path}: fewer than 2 data rows")
    return EmpiricalSeries(dates=tuple(dates), closes=np.array(closes))
