"""System-assumption coverage: binomial fault tails and composite reliabilities.

Everything is computed with mpmath at ``DPS`` significant digits, and the
quantities reported are failure probabilities (nu = 1 - R) so that values
around 1e-15 survive intact.  Tails are summed directly, never as ``1 - Q``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath

from .adversary import scope_bound, third

DPS = 60
P_WARN = 1e-4

def _ctx():
    return mpmath.workdps(DPS)


def _check_ts(t, s, p):
    if not (isinstance(s, int) and s >= 1):
        raise ValueError(f"s must be a positive integer, got {s!r}")
    if not 0 <= t <= s:
        raise ValueError(f"t={t} outside 0..{s}")
    if not 0 < p < 1:
        raise ValueError(f"p={p} outside (0, 1)")


def _term(s: int, i: int, p) -> mpmath.mpf:
    return mpmath.mpf(math.comb(s, i)) * p**i * (1 - p) ** (s - i)


def _mpf(p) -> mpmath.mpf:
    if isinstance(p, Fraction):
        return mpmath.mpf(p.numerator) / p.denominator
    if isinstance(p, float):
        # go through the decimal repr so 1e-4 means 1/10000, not its binary neighbour
        return mpmath.mpf(repr(p))
    return mpmath.mpf(p)


def q_exact(t: int, s: int, p) -> mpmath.mpf:
    """Probability of at most ``t`` failures among ``s`` independent nodes."""
    _check_ts(t, s, p)
    with _ctx():
        p = _mpf(p)
        return +mpmath.fsum(_term(s, i, p) for i in range(t + 1))


def p_exact(t: int, s: int, p, truncate: bool = False, beta: float = 2) -> mpmath.mpf:
    """Probability of more than ``t`` failures among ``s`` nodes.

    With ``truncate`` only the first ``ceil(beta*p*s) + t`` tail terms are
    summed, the shortcut suggested for very large ``s``.
    """
    _check_ts(t, s, p)
    with _ctx():
        pm = _mpf(p)
        last = s
        if truncate:
            last = min(s, t + math.ceil(beta * float(p) * s) + t)
        return +mpmath.fsum(_term(s, i, pm) for i in range(t + 1, last + 1))


@dataclass(frozen=True)
class TailResult:
    t: int
    s: int
    p: float
    beta: float
    exact: mpmath.mpf
    approx: mpmath.mpf
    bound: mpmath.mpf
    flags: dict = field(default_factory=dict)

    @property
    def bound_holds(self) -> bool:
        return self.exact < self.bound

    def to_dict(self) -> dict:
        return {
            "inputs": {"t": self.t, "s": self.s, "p": self.p, "beta": self.beta},
            "exact_nu": mpmath.nstr(self.exact, 20),
            "approx_nu": mpmath.nstr(self.approx, 20),
            "bound_nu": mpmath.nstr(self.bound, 20),
            "flags": dict(self.flags),
        }


def ratio_regime(s: int, p, beta) -> bool:
    """True when adjacent binomial terms shrink by at least ``beta``: ``p <= 1/(beta*s + 1)``."""
    return _frac(p) <= 1 / (_frac(beta) * s + 1)


def _frac(x) -> Fraction:
    return Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


def tail_bound(t: int, s: int, p, beta: float = 2) -> TailResult:
    """Geometric-tail bound on ``p_exact(t, s, p)`` from the ``t``-th binomial term."""
    if not beta > 1:
        raise ValueError(f"beta={beta} must exceed 1")
    _check_ts(t, s, p)
    with _ctx():
        pm = _mpf(p)
        bound = _term(s, t, pm) / (_mpf(beta) - 1)
        exact = p_exact(t, s, p)
        approx = stirling_tail_approx(t, s, p) / (_mpf(beta) - 1) if t >= 1 else bound
    return TailResult(t, s, float(p), float(beta), exact, approx, bound, {"ratio_regime": ratio_regime(s, p, beta)})


def stirling_tail_approx(t, s: int, p) -> mpmath.mpf:
    """``sqrt(1/(2 pi t)) (e s p / t)^t (1-p)^(s-t)``; ``t`` may be fractional (e.g. s/3).

    ``t = 0`` has no Stirling factor and returns ``(1-p)^s``.
    """
    if not 0 < p < 1:
        raise ValueError(f"p={p} outside (0, 1)")
    if t < 0 or t > s:
        raise ValueError(f"t={t} outside 0..{s}")
    with _ctx():
        pm = _mpf(p)
        if t == 0:
            return (1 - pm) ** s
        tm = _mpf(t)
        return mpmath.sqrt(1 / (2 * mpmath.pi * tm)) * (mpmath.e * s * pm / tm) ** tm * (1 - pm) ** (s - tm)


def generic_clique_form(s: int, p) -> mpmath.mpf:
    """``(3 e p)^(s/3)``: the closed form for a clique of ``s`` nodes."""
    with _ctx():
        return (3 * mpmath.e * _mpf(p)) ** (mpmath.mpf(s) / 3)


def generic_pair_form(s: int, p) -> mpmath.mpf:
    """``(6 e p)^(s/3)``: the closed form for two adjacent cliques."""
    with _ctx():
        return (6 * mpmath.e * _mpf(p)) ** (mpmath.mpf(s) / 3)


def _nu_of_product(factors: Sequence[tuple[mpmath.mpf, int]]) -> mpmath.mpf:
    """``1 - prod (1 - x)^k`` for (x, k) pairs, without cancellation."""
    total = mpmath.fsum(k * mpmath.log1p(-x) for x, k in factors)
    return -mpmath.expm1(total)


# ---------------------------------------------------------------------------
# composite reliabilities


@dataclass(frozen=True)
class ScaleDescriptor:
    s: int
    count: int
    alpha: Callable = third
    tolerated: int = 0

    @property
    def fault_bound(self) -> int:
        return scope_bound(self.s, self.alpha)


@dataclass(frozen=True)
class ReliabilityParams:
    p: float
    n: int
    scales: tuple[ScaleDescriptor, ...]
    beta: float = 2

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError(f"p={self.p} outside (0, 1)")
        if self.p > P_WARN:
            warnings.warn(
                f"p={self.p} is above the {P_WARN:g} per-mission failure rate the bounds are tuned for",
                stacklevel=2,
            )
        for sc in self.scales:
            if sc.s > self.n or sc.count < 0:
                raise ValueError(f"scale {sc} does not fit n={self.n}")

    @classmethod
    def for_stack(cls, n: int, sizes: Sequence[int], p: float, tolerated: Sequence[int] | None = None, **kw):
        tolerated = list(tolerated or [0] * len(sizes))
        if len(tolerated) != len(sizes):
            raise ValueError("one tolerated count per layer is required")
        scales = []
        for s, t in zip(sizes, tolerated):
            if n % s:
                raise ValueError(f"n={n} is not divisible by s={s}")
            scales.append(ScaleDescriptor(s, n // s, tolerated=t))
        return cls(p, n, tuple(scales), **kw)

    def nu(self) -> mpmath.mpf:
        with _ctx():
            return -mpmath.expm1(
                mpmath.fsum(mpmath.log1p(-_scale_nu(sc, self.p)) for sc in self.scales)
            )


def _scale_nu(sc: ScaleDescriptor, p) -> mpmath.mpf:
    P = p_exact(sc.fault_bound, sc.s, p)
    if sc.tolerated == 0:
        return _nu_of_product([(P, sc.count)])
    if sc.tolerated >= sc.count:
        return mpmath.mpf(0)
    return _binomial_tail(sc.tolerated, sc.count, P)


def _binomial_tail(t: int, r: int, P: mpmath.mpf) -> mpmath.mpf:
    return mpmath.fsum(mpmath.mpf(math.comb(r, i)) * P**i * (1 - P) ** (r - i) for i in range(t + 1, r + 1))


@dataclass(frozen=True)
class BroadcastReliability:
    s: int
    n: int
    p: float
    nu: mpmath.mpf
    closed_form_nu: mpmath.mpf
    clique_tail: mpmath.mpf
    pair_tail: mpmath.mpf
    flags: dict

    @property
    def R(self) -> mpmath.mpf:
        with _ctx():
            return 1 - self.nu

    def to_dict(self) -> dict:
        return {
            "inputs": {"s": self.s, "n": self.n, "p": self.p},
            "exact_nu": mpmath.nstr(self.nu, 20),
            "bound_nu": mpmath.nstr(self.closed_form_nu, 20),
            "approx_nu": None,
            "flags": dict(self.flags),
        }


def broadcast_reliability(s: int, n: int, p) -> BroadcastReliability:
    """Coverage of the two-scale adversary on an ``n``-node hypercube of base ``s``.

    ``n/s`` clique instances must keep at most ``floor(s/3)`` faults and
    ``n/s - 1`` initiation instances (two adjacent cliques) the same bound.
    """
    if n % s:
        raise ValueError(f"n={n} is not divisible by s={s}")
    if p > P_WARN:
        warnings.warn(f"p={p} is above {P_WARN:g}", stacklevel=2)
    m = n // s
    t = s // 3
    with _ctx():
        clique = p_exact(t, s, p)
        pair = p_exact(t, 2 * s, p)
        nu = _nu_of_product([(clique, m), (pair, m - 1)])
        g = generic_pair_form(s, p)
        closed = _nu_of_product([(g, m)]) if g < 1 else mpmath.mpf(1)
    flags = {
        "clique_regime": ratio_regime(s, p, 2),
        "pair_regime": ratio_regime(2 * s, p, 2),
        "closed_form_valid": bool(g < 1),
    }
    return BroadcastReliability(s, n, float(p), nu, closed, clique, pair, flags)


@dataclass(frozen=True)
class LayerReliability:
    layer: int
    s: int
    instances: int
    fault_bound: int
    tolerated: int
    instance_tail: mpmath.mpf
    strict_nu: mpmath.mpf
    nu: mpmath.mpf
    bound: mpmath.mpf | None
    bound_flag: bool


@dataclass(frozen=True)
class SecureCommReliability:
    n: int
    p: float
    layers: tuple[LayerReliability, ...]

    @property
    def nu(self) -> mpmath.mpf:
        with _ctx():
            return -mpmath.expm1(mpmath.fsum(mpmath.log1p(-l.nu) for l in self.layers))

    @property
    def strict_nu(self) -> mpmath.mpf:
        with _ctx():
            return -mpmath.expm1(mpmath.fsum(mpmath.log1p(-l.strict_nu) for l in self.layers))

    @property
    def R(self) -> mpmath.mpf:
        with _ctx():
            return 1 - self.nu

    def to_dict(self) -> dict:
        return {
            "inputs": {"n": self.n, "p": self.p, "sizes": [l.s for l in self.layers],
                       "tolerated": [l.tolerated for l in self.layers]},
            "exact_nu": mpmath.nstr(self.nu, 20),
            "strict_nu": mpmath.nstr(self.strict_nu, 20),
            "layers": [
                {
                    "layer": l.layer,
                    "s": l.s,
                    "nu": mpmath.nstr(l.nu, 20),
                    "strict_nu": mpmath.nstr(l.strict_nu, 20),
                    "bound_nu": None if l.bound is None else mpmath.nstr(l.bound, 20),
                    "bound_flag": l.bound_flag,
                }
                for l in self.layers
            ],
        }


def securecomm_reliability(
    sizes: Sequence[int],
    n: int,
    p,
    tolerated: Sequence[int] | None = None,
    alpha: Callable = third,
) -> SecureCommReliability:
    """Per-layer coverage of the expander stack.

    A layer with ``tolerated = 0`` needs every one of its ``n/s_l`` instances
    within bound.  With ``tolerated = t`` up to ``t`` instances may fail, so
    its failure probability is the binomial tail above ``t`` over instances;
    the ratio-style bound on that tail is reported with its precondition
    ``P_l <= 1/(n+1)``.
    """
    tolerated = list(tolerated or [0] * len(sizes))
    if len(tolerated) != len(sizes):
        raise ValueError("one tolerated count per layer is required")
    if p > P_WARN:
        warnings.warn(f"p={p} is above {P_WARN:g}", stacklevel=2)
    out = []
    with _ctx():
        for l, (s, t) in enumerate(zip(sizes, tolerated)):
            if n % s:
                raise ValueError(f"layer {l}: n={n} is not divisible by s={s}")
            r = n // s
            fb = scope_bound(s, alpha)
            P = p_exact(fb, s, p)
            strict = _nu_of_product([(P, r)])
            if t == 0:
                nu, bound, flag = strict, None, False
            else:
                nu = _binomial_tail(t, r, P) if t < r else mpmath.mpf(0)
                tt = min(t, r)
                bound = mpmath.mpf(math.comb(r, tt)) * P**tt * (1 - P) ** (r - tt) / (s - 1) if s > 1 else None
                flag = bool(P <= mpmath.mpf(1) / (n + 1))
            out.append(LayerReliability(l, s, r, fb, t, P, strict, nu, bound, flag))
    return SecureCommReliability(n, float(p), tuple(out))
