"""Event-wise fuzzy-weighted TOPSIS suitability scores.

Criteria per candidate are distance (cost), charging speed and popularity
(benefits). They are min-max normalised inside each event, weighted by
role- and pressure-dependent fuzzy weights, and scored by the closeness
coefficient to the event's ideal and anti-ideal points.

Batch functions work on CSR-style event layouts: ``ptr[e]:ptr[e+1]`` are
the rows of event ``e``; every event must have at least one candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CRITERIA = ("d", "s", "a")
REGIMES = ("low", "med", "high")
ROLES = ("consumer", "supplier")

TFN_HIGH = (0.7, 0.9, 1.0)
TFN_MEDIUM = (0.3, 0.5, 0.7)
TFN_LOW = (0.1, 0.3, 0.5)

# Linguistic importance per role and pressure regime, ordered (d, s, a).
# Not given numerically in the source method; chosen so consumers escalate
# distance/availability urgency with pressure and eager suppliers shift
# towards throughput and demand.
LINGUISTIC_TABLE = {
    "consumer": {
        "low": ("M", "H", "M"),
        "med": ("M", "M", "H"),
        "high": ("H", "M", "H"),
    },
    "supplier": {
        "low": ("H", "M", "L"),
        "med": ("M", "H", "M"),
        "high": ("L", "H", "H"),
    },
}


def tfn_centroid(tfn) -> float:
    a, b, c = tfn
    if not a <= b <= c:
        raise ValueError(f"TFN must satisfy a <= b <= c, got {tfn}")
    return (a + b + c) / 3.0


def build_regime_weights(tfn_high=TFN_HIGH, tfn_medium=TFN_MEDIUM, tfn_low=TFN_LOW, table=None) -> np.ndarray:
    """Defuzzify the linguistic table into a (role, regime, criterion) array.

    Each (role, regime) row is normalised to sum to 1.
    """
    table = LINGUISTIC_TABLE if table is None else table
    crisp = {"H": tfn_centroid(tfn_high), "M": tfn_centroid(tfn_medium), "L": tfn_centroid(tfn_low)}
    w = np.empty((len(ROLES), len(REGIMES), len(CRITERIA)))
    for i, role in enumerate(ROLES):
        for g, regime in enumerate(REGIMES):
            row = np.array([crisp[level] for level in table[role][regime]])
            w[i, g] = row / row.sum()
    return w


@dataclass
class TopsisConfig:
    epsilon: float = 1e-9
    tfn_high: tuple = TFN_HIGH
    tfn_medium: tuple = TFN_MEDIUM
    tfn_low: tuple = TFN_LOW
    regime_low: tuple = (0.0, 0.0, 0.5)
    regime_med: tuple = (0.25, 0.5, 0.75)
    regime_high: tuple = (0.5, 1.0, 1.0)
    degenerate_value: float = 0.5
    single_candidate_score: float = 0.5
    regime_weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.regime_weights is None:
            self.regime_weights = build_regime_weights(self.tfn_high, self.tfn_medium, self.tfn_low)
        self.regime_weights = np.asarray(self.regime_weights, dtype=float)
        if np.any(self.regime_weights <= 0):
            raise ValueError("regime weights must be positive")
        if not np.allclose(self.regime_weights.sum(axis=-1), 1.0, atol=1e-12):
            raise ValueError("each regime weight row must sum to 1")


def role_index(role: str) -> int:
    """Map ``P``/``supplier``/``provider`` to 1 and ``C``/``consumer`` to 0."""
    r = str(role).lower()
    if r in ("c", "consumer"):
        return 0
    if r in ("p", "supplier", "provider"):
        return 1
    raise ValueError(f"unknown role {role!r}")


def transaction_pressure(soc_e, role) -> float:
    soc = float(np.clip(soc_e, 0.0, 1.0))
    return 1.0 - soc if role_index(role) == 0 else soc


def triangular(x, abc) -> np.ndarray:
    """Triangular membership; ``a == b`` or ``b == c`` gives a flat shoulder."""
    a, b, c = abc
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if a == b:
        out = np.where(x <= b, 1.0, out)
    else:
        rising = (x > a) & (x < b)
        out = np.where(rising, (x - a) / (b - a), out)
        out = np.where(x == b, 1.0, out)
    if b == c:
        out = np.where(x >= b, 1.0, out)
    else:
        falling = (x > b) & (x < c)
        out = np.where(falling, (c - x) / (c - b), out)
    return out


def regime_memberships(p, cfg: TopsisConfig | None = None) -> np.ndarray:
    """Memberships ``(low, med, high)``; last axis of the result has size 3."""
    cfg = cfg or TopsisConfig()
    return np.stack(
        [triangular(p, cfg.regime_low), triangular(p, cfg.regime_med), triangular(p, cfg.regime_high)],
        axis=-1,
    )


def event_weights(role, p, cfg: TopsisConfig | None = None) -> np.ndarray:
    """Membership-weighted interpolation of regime weights, normalised to sum 1.

    ``role`` and ``p`` may be scalars or equal-length arrays.
    """
    cfg = cfg or TopsisConfig()
    scalar = np.ndim(p) == 0
    roles = np.atleast_1d(role)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    idx = np.array([role_index(r) for r in roles]) if roles.dtype.kind in "UO" else roles.astype(int)
    if idx.size == 1 and p.size > 1:
        idx = np.full(p.size, idx[0])
    mu = regime_memberships(p, cfg)  # (n, 3)
    raw = np.einsum("ng,ngc->nc", mu, cfg.regime_weights[idx])
    w = raw / raw.sum(axis=1, keepdims=True)
    return w[0] if scalar else w


def _segment_reduce(ufunc, x: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    return ufunc.reduceat(x, ptr[:-1], axis=0)


def normalize_batch(raw: np.ndarray, ptr: np.ndarray, cfg: TopsisConfig | None = None) -> np.ndarray:
    """Normalise ``raw`` (n, 3) columns (distance, speed, popularity) per event."""
    cfg = cfg or TopsisConfig()
    raw = np.asarray(raw, dtype=float)
    ptr = np.asarray(ptr)
    sizes = np.diff(ptr)
    if np.any(sizes < 1):
        raise ValueError("every event needs at least one candidate")
    lo = np.repeat(_segment_reduce(np.minimum, raw, ptr), sizes, axis=0)
    hi = np.repeat(_segment_reduce(np.maximum, raw, ptr), sizes, axis=0)
    scaled = (raw - lo) / (hi - lo + cfg.epsilon)
    scaled[:, 0] = 1.0 - scaled[:, 0]
    scaled = np.where(hi == lo, cfg.degenerate_value, scaled)
    return np.clip(scaled, 0.0, 1.0)


def normalize_event(candidates, cfg: TopsisConfig | None = None) -> np.ndarray:
    """Normalised (distance, speed, popularity) matrix for one event.

    ``candidates`` is a sequence of objects with ``distance_km``,
    ``charging_speed_kw`` and ``popularity`` or an (n, 3) array.
    """
    raw = _as_raw(candidates)
    return normalize_batch(raw, np.array([0, len(raw)]), cfg)


def _as_raw(candidates) -> np.ndarray:
    if isinstance(candidates, np.ndarray):
        return candidates.astype(float)
    return np.array([[c.distance_km, c.charging_speed_kw, c.popularity] for c in candidates], dtype=float)


@dataclass
class TopsisResult:
    x_norm: np.ndarray
    weights: np.ndarray  # per event
    v: np.ndarray
    v_plus: np.ndarray  # per event
    v_minus: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    closeness: np.ndarray


def closeness_from_weighted(v: np.ndarray, ptr: np.ndarray, cfg: TopsisConfig | None = None):
    cfg = cfg or TopsisConfig()
    sizes = np.diff(ptr)
    v_plus = _segment_reduce(np.maximum, v, ptr)
    v_minus = _segment_reduce(np.minimum, v, ptr)
    d_plus = np.sqrt(np.sum((v - np.repeat(v_plus, sizes, axis=0)) ** 2, axis=1))
    d_minus = np.sqrt(np.sum((v - np.repeat(v_minus, sizes, axis=0)) ** 2, axis=1))
    # 1 / (1 + D+/D-) keeps r monotone in (D+, D-) under rounding
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 1.0 / (1.0 + d_plus / d_minus)
    r = np.where(d_minus == 0.0, 0.0, r)
    r = np.where(d_plus + d_minus == 0.0, cfg.single_candidate_score, r)
    return v_plus, v_minus, d_plus, d_minus, r


def topsis_batch(raw, ptr, roles, pressures, cfg: TopsisConfig | None = None) -> TopsisResult:
    """Score every candidate of every event.

    ``roles`` and ``pressures`` are per event.
    """
    cfg = cfg or TopsisConfig()
    ptr = np.asarray(ptr)
    x = normalize_batch(raw, ptr, cfg)
    w = event_weights(np.asarray(roles), np.asarray(pressures, dtype=float), cfg)
    w = np.atleast_2d(w)
    v = x * np.repeat(w, np.diff(ptr), axis=0)
    v_plus, v_minus, d_plus, d_minus, r = closeness_from_weighted(v, ptr, cfg)
    return TopsisResult(x, w, v, v_plus, v_minus, d_plus, d_minus, r)


def topsis_score(event, cfg: TopsisConfig | None = None) -> np.ndarray:
    """Closeness coefficient per candidate of a single :class:`DecisionEvent`."""
    raw = _as_raw(event.candidates)
    p = transaction_pressure(event.soc_e, event.role)
    res = topsis_batch(raw, np.array([0, len(raw)]), [event.role], [p], cfg)
    return res.closeness
