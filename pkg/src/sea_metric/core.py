"""Core abstraction-efficiency score.

The score combines three signals for one sketch: the size E of the class's
commonsense element set, the number V of elements visibly expressed, and the
ground-truth-class probability P from a zero-shot classifier. With v = V/E,

    score = tanh(alpha * (reward(P, v) - penalty(P, v)))

where the reward P^gamma * u(v) * g(P, v) pays for recognizability achieved
with few elements (u is a log economy term, g a centered gate that is zero on
the self-consistency line v = P), and the penalty
lambda_ * v^eta * (1-P)^k + tau * (1-P)^r charges for detail that does not
buy recognition and for unrecognizable sketches regardless of detail.

All math functions accept scalars or numpy arrays and are pure; `sea` is the
record-level entry point returning a full term-by-term breakdown.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Hyperparams",
    "Provenance",
    "Signals",
    "ScoreBreakdown",
    "InvalidCapacityError",
    "clip_signals",
    "visual_ratio",
    "economy",
    "gate",
    "reward",
    "penalty",
    "balance",
    "score",
    "sea",
]

# Largest float64 strictly inside (-1, 1). tanh rounds to exactly +-1.0 for
# |x| >~ 19, which would leak outside the open interval the score is defined on.
_ONE_INSIDE = float(np.nextafter(1.0, 0.0))


class InvalidCapacityError(ValueError):
    """Raised when a signal triple carries an element capacity E < 1."""


@dataclass(frozen=True)
class Hyperparams:
    """The nine scoring constants plus the probability-clipping margin.

    Defaults are the fixed operating point used for every analysis in this
    package. `eta` may exceed 1 (ablation mode); every field must be > 0.
    """

    alpha: float = 2.2
    beta: float = 8.0
    lambda_: float = 1.0
    eta: float = 0.8
    k: float = 2.3
    tau: float = 0.4
    r: float = 1.7
    gamma: float = 1.7
    delta: float = 1e-6
    epsilon_clip: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "lambda_", "eta", "k", "tau", "r",
                     "gamma", "delta", "epsilon_clip"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"hyperparameter {name!r} must be finite and > 0, got {value!r}")
        if self.epsilon_clip >= 0.5:
            raise ValueError(f"epsilon_clip must be < 0.5, got {self.epsilon_clip!r}")

    def replace(self, **changes) -> "Hyperparams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_HYPERPARAMS = Hyperparams()


class Provenance(NamedTuple):
    """Source tag for each of the three signals (fixture | mock | provider id)."""

    E: str = "unspecified"
    V: str = "unspecified"
    P: str = "unspecified"


@dataclass(frozen=True)
class Signals:
    """One sketch's (E, V, P) triple.

    V is real-valued so fractional detections (e.g. annotator averages) stay
    representable; integer counts are the common case. Construction only
    checks E; range normalization is `clip_signals`'s job.
    """

    E: int
    V: float
    P: float
    provenance: Provenance = Provenance()

    def __post_init__(self) -> None:
        if int(self.E) != self.E:
            raise InvalidCapacityError(f"E must be an integer, got {self.E!r}")
        object.__setattr__(self, "E", int(self.E))
        if self.E < 1:
            raise InvalidCapacityError(f"E must be >= 1, got {self.E}")


@dataclass(frozen=True)
class ScoreBreakdown:
    """Every term of one score evaluation, for diagnosis of why a sketch scored as it did."""

    v: float
    u: float
    g: float
    reward: float
    penalty: float
    z: float
    sea: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def clip_signals(raw: Signals, hp: Hyperparams = DEFAULT_HYPERPARAMS) -> Signals:
    """Clamp V into [0, E] and P into [epsilon_clip, 1 - epsilon_clip].

    Provenance is preserved. Raises InvalidCapacityError if E < 1 (also
    enforced at construction).
    """
    if raw.E < 1:
        raise InvalidCapacityError(f"E must be >= 1, got {raw.E}")
    v_clamped = min(max(float(raw.V), 0.0), float(raw.E))
    p_clamped = min(max(float(raw.P), hp.epsilon_clip), 1.0 - hp.epsilon_clip)
    return Signals(E=raw.E, V=v_clamped, P=p_clamped, provenance=raw.provenance)


def visual_ratio(signals: Signals) -> float:
    """V/E for already-clipped signals; lies in [0, 1]."""
    return float(signals.V) / float(signals.E)


def economy(v, hp: Hyperparams = DEFAULT_HYPERPARAMS):
    """Economy-of-expression term u(v) = ln((1+delta)/(v+delta)).

    Strictly decreasing in v, exactly 0 at v = 1.
    """
    v = np.asarray(v, dtype=float)
    out = np.log((1.0 + hp.delta) / (v + hp.delta))
    return out if out.ndim else float(out)


def gate(P, v, hp: Hyperparams = DEFAULT_HYPERPARAMS):
    """Centered gate g(P, v) = tanh((beta/2) * ln((P+delta)/(v+delta))).

    Zero exactly at v == P; positive when recognizability exceeds the visual
    ratio, negative when the sketch is more detailed than its recognizability
    warrants. Antisymmetric under swapping the arguments.
    """
    P = np.asarray(P, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.tanh(0.5 * hp.beta * np.log((P + hp.delta) / (v + hp.delta)))
    return out if out.ndim else float(out)


def reward(P, v, hp: Hyperparams = DEFAULT_HYPERPARAMS):
    """Reward term P^gamma * u(v) * g(P, v); zero when v == P or v == 1."""
    P = np.asarray(P, dtype=float)
    out = P ** hp.gamma * economy(v, hp) * gate(P, v, hp)
    return out if out.ndim else float(out)


def penalty(P, v, hp: Hyperparams = DEFAULT_HYPERPARAMS):
    """Penalty term lambda_ * v^eta * (1-P)^k + tau * (1-P)^r.

    Non-negative on the admissible box; non-increasing in P, non-decreasing
    in v.
    """
    P = np.asarray(P, dtype=float)
    v = np.asarray(v, dtype=float)
    out = hp.lambda_ * v ** hp.eta * (1.0 - P) ** hp.k + hp.tau * (1.0 - P) ** hp.r
    return out if out.ndim else float(out)


def balance(P, v, hp: Hyperparams = DEFAULT_HYPERPARAMS):
    """Pre-squash score Z = reward - penalty."""
    out = np.asarray(reward(P, v, hp) - penalty(P, v, hp))
    return out if out.ndim else float(out)


def score(P, v, hp: Hyperparams = DEFAULT_HYPERPARAMS):
    """Final score tanh(alpha * Z), clamped to the open interval (-1, 1).

    The clamp only moves values that float64 tanh rounded to exactly +-1.0,
    by one ulp.
    """
    out = np.tanh(hp.alpha * np.asarray(balance(P, v, hp)))
    out = np.clip(out, -_ONE_INSIDE, _ONE_INSIDE)
    return out if out.ndim else float(out)


def sea(signals: Signals, hp: Hyperparams = DEFAULT_HYPERPARAMS) -> ScoreBreakdown:
    """Score one sketch's signals, returning the full term breakdown.

    Clipping is applied internally, so callers cannot produce NaN. Pure and
    deterministic: identical inputs give bit-identical breakdowns.
    """
    clipped = clip_signals(signals, hp)
    v = visual_ratio(clipped)
    P = clipped.P
    u_val = economy(v, hp)
    g_val = gate(P, v, hp)
    reward_val = P ** hp.gamma * u_val * g_val
    penalty_val = penalty(P, v, hp)
    z_val = reward_val - penalty_val
    sea_val = float(np.clip(np.tanh(hp.alpha * z_val), -_ONE_INSIDE, _ONE_INSIDE))
    return ScoreBreakdown(v=v, u=float(u_val), g=float(g_val),
                          reward=float(reward_val), penalty=float(penalty_val),
                          z=float(z_val), sea=sea_val)
