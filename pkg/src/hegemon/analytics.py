"""Evenly spaced worlds, closed-form thresholds and parameter sweeps.

Small countries 1..n-1 sit at i/n on the unit segment with A at 0 and B at 1;
both superpowers choose among the n+1 sites {0, 1/n, ..., 1}.  Three families
are supported: symmetric dependencies (g, g), asymmetric ones (g, 1-g), and
symmetric dependencies with enlarged measures on a subset of A's side.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .equilibrium import solve_spne
from .errors import ConfigError, DomainError
from .model import Country, NoClub, Site, World, format_site

MIN_ANALYTIC_N = 13


class Case(str, enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"
    MEASURE = "measure"


class Order(str, enum.Enum):
    NO_HEGEMON = "NoHegemon"
    UNIPOLAR_A = "UnipolarA"
    UNIPOLAR_B = "UnipolarB"
    BIPOLAR = "Bipolar"


@dataclass(frozen=True)
class SpecialCaseSpec:
    n: int
    case: Case
    g: float
    heavy: frozenset = frozenset()   # members of I': small indices and/or "A"
    m: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "case", Case(self.case))
        object.__setattr__(self, "heavy", frozenset(self.heavy))
        if self.n < 3 or self.n % 2 == 0:
            raise ConfigError(f"n must be odd and >= 3, got {self.n}")
        if not 0 <= self.g <= 1:
            raise ConfigError(f"g={self.g} outside [0, 1]")
        if self.case is Case.MEASURE:
            if self.m < 1:
                raise ConfigError("measure m must be >= 1")
            if not self.heavy:
                raise ConfigError("measure case needs a non-empty I'")
            half = (self.n - 1) // 2
            for j in self.heavy:
                if j != "A" and not (isinstance(j, int) and 1 <= j <= half):
                    raise ConfigError(f"I' member {j!r} not in {{1..{half}}} or 'A'")


def build_special_world(spec: SpecialCaseSpec) -> World:
    n = spec.n
    if spec.case is Case.ASYMMETRIC:
        ga, gb = spec.g, 1.0 - spec.g
    else:
        ga = gb = spec.g

    def weight(j) -> float:
        return spec.m if spec.case is Case.MEASURE and j in spec.heavy else 1.0

    smalls = tuple(Country(i, Fraction(i, n), weight(i), ga, gb) for i in range(1, n))
    return World(
        super_a=Country("A", Fraction(0), weight("A")),
        super_b=Country("B", Fraction(1), 1.0),
        smalls=smalls,
        grid=tuple(Fraction(k, n) for k in range(n + 1)),
    )


# --------------------------------------------------------------------------
# closed forms


def delta_star(n: int) -> int:
    """Last-stronghold size: floor((sqrt(1+4n) - 1) / 2), computed exactly."""
    return (math.isqrt(1 + 4 * n) - 1) // 2


def sigma(n: int, k) -> float:
    return k / n + 1 / (k + 1) - 1 / (n + 1 - k)


def lam(n: int, k) -> float:
    return 1 - k / n - 1 / (k + 1) + 1 / (n - 1)


def sigma_min(n: int) -> int:
    """Brute-force minimizer of sigma over 1..floor(n/2) (smallest on ties)."""
    return min(range(1, n // 2 + 1), key=lambda k: (sigma(n, k), k))


def lambda_max(n: int) -> int:
    """Brute-force maximizer of lambda over 1..floor(n/2) (smallest on ties)."""
    return min(range(1, n // 2 + 1), key=lambda k: (-lam(n, k), k))


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def g_star(n: int) -> float:
    r = _round_half_up(Fraction(3 * n + 2, 4))
    return n / ((n + 1 - r) * (2 * r - n))


def k_of_g(n: int, g: float) -> int:
    """Largest club size A reaches as the measure grows, for g above g*(n).

    Floor of the smaller root of (n+1-k)(2k-n) = n/g.
    """
    if not g > g_star(n):
        raise DomainError(f"k(g) needs g > g*({n}) = {g_star(n):.6g}, got {g}")
    disc = (3 * n + 2) ** 2 - 8 * (n * (n + 1) + n / g)
    if disc < 0:
        raise DomainError(f"no real root for n={n}, g={g}")
    return math.floor(((3 * n + 2) - math.sqrt(disc)) / 4)


def lower_gb_curve(n: int, k: int) -> float:
    """g below which A abandons a home-side club {1..k} (asymmetric case)."""
    return n / (n + k) * (k / n + 1 / (k + 1) - 1 / (n + 1 - k))


def upper_gb_curve(n: int, k: int) -> float:
    """g above which B abandons a club of its last k countries (asymmetric case)."""
    return n / (n + k) * (k / (k + 1) + 1 / (n - 1))


def upper_gbh_curve(n: int, k: int) -> float:
    return 1 - k / n - 1 / (k + 1) - 1 / (n - 1)


@dataclass(frozen=True)
class ThresholdSet:
    n: int
    g_U: float
    g_B: float
    g_B_h: float
    g_eq_lo: float
    g_eq_hi: float
    g_lo_B: float
    g_lo_B_h: float
    g_hi_B_h: float
    g_hi_B: float
    delta_star: int
    g_star: float
    k_lo_B: int
    k_lo_B_h: int
    k_hi_B_h: int
    k_hi_B: int
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def thresholds(n: int) -> ThresholdSet:
    """All closed-form thresholds for evenly spaced worlds with n-1 small countries.

    Binding club sizes defined through an arg-min/arg-max are found by explicit
    search and compared with the discrete-convexity closed forms; mismatches
    are reported in ``notes``.
    """
    if n % 2 == 0 or n < MIN_ANALYTIC_N:
        raise DomainError(f"closed forms need odd n >= {MIN_ANALYTIC_N}, got {n}")
    ds = delta_star(n)
    ks = range(1, (n - 1) // 2 + 1)
    notes = []

    k_lo_B = min(ks, key=lambda k: (lower_gb_curve(n, k), k))
    if k_lo_B != ds + 1:
        notes.append(f"argmin of the lower g_B curve is {k_lo_B}, closed form says {ds + 1}")
    k_hi_B = min(ks, key=lambda k: (-upper_gb_curve(n, k), k))
    if k_hi_B not in (ds, ds + 1):
        notes.append(f"argmax of the upper g_B curve is {k_hi_B}, closed form says {ds} or {ds + 1}")
    k_lo_B_h = sigma_min(n)
    if k_lo_B_h not in (ds, ds + 1):
        notes.append(f"sigma minimizer {k_lo_B_h} outside {{{ds}, {ds + 1}}}")
    k_hi_B_h = lambda_max(n)
    if k_hi_B_h != ds:
        notes.append(f"lambda maximizer {k_hi_B_h} differs from {ds}")

    return ThresholdSet(
        n=n,
        g_U=2 * n / ((n + 3) * (n - 1)),
        g_B=4 * n / ((n + 3) * (n + 1)),
        g_B_h=4 * n / (n + 1) ** 2,
        g_eq_lo=(n - 1) / (2 * n) - 2 / (n + 3) + 2 / (n + 1),
        g_eq_hi=(n + 1) / (2 * n) + 2 / (n + 3) - 2 / (n + 1),
        g_lo_B=lower_gb_curve(n, k_lo_B),
        g_lo_B_h=sigma(n, k_lo_B_h),
        g_hi_B_h=lam(n, k_hi_B_h),
        g_hi_B=upper_gb_curve(n, k_hi_B),
        delta_star=ds,
        g_star=g_star(n),
        k_lo_B=k_lo_B,
        k_lo_B_h=k_lo_B_h,
        k_hi_B_h=k_hi_B_h,
        k_hi_B=k_hi_B,
        notes=tuple(notes),
    )


# --------------------------------------------------------------------------
# sweeps


def classify(size_a: int, size_b: int) -> Order:
    if size_a and size_b:
        return Order.BIPOLAR
    if size_a:
        return Order.UNIPOLAR_A
    if size_b:
        return Order.UNIPOLAR_B
    return Order.NO_HEGEMON


@dataclass(frozen=True)
class PhasePoint:
    n: int
    case: Case
    g: float
    m: float
    order: Order
    ell_a: Site
    ell_b: Site
    size_a: int
    size_b: int
    payoff_a: float
    payoff_b: float
    club_a: frozenset = field(default=frozenset(), compare=False)
    club_b: frozenset = field(default=frozenset(), compare=False)
    ell_a_without_b: Optional[Site] = None
    error: Optional[str] = None

    def row(self) -> dict:
        def site(s):
            if s is None:
                return ""
            return "NoClub" if s is NoClub else format_site(s)

        return {
            "g": repr(self.g),
            "m": repr(self.m),
            "order": self.order.value if self.order else "",
            "ell_a": site(self.ell_a),
            "ell_b": site(self.ell_b),
            "size_a": self.size_a,
            "size_b": self.size_b,
            "payoff_a": repr(self.payoff_a),
            "payoff_b": repr(self.payoff_b),
            "ell_a_without_b": site(self.ell_a_without_b),
            "error": self.error or "",
        }


def solve_point(spec: SpecialCaseSpec, without_b: bool = False) -> PhasePoint:
    try:
        w = build_special_world(spec)
        out = solve_spne(w)
        alone = solve_spne(w, follower=False).ell_a if without_b else None
    except (ConfigError, DomainError) as exc:
        return PhasePoint(spec.n, spec.case, spec.g, spec.m, None, None, None, 0, 0,
                          float("nan"), float("nan"), error=str(exc))
    return PhasePoint(
        n=spec.n, case=spec.case, g=spec.g, m=spec.m,
        order=classify(len(out.club_a), len(out.club_b)),
        ell_a=out.ell_a, ell_b=out.ell_b,
        size_a=len(out.club_a), size_b=len(out.club_b),
        payoff_a=out.payoff_a, payoff_b=out.payoff_b,
        club_a=out.club_a, club_b=out.club_b,
        ell_a_without_b=alone,
    )


def _solve_star(args):
    return solve_point(*args)


def g_grid(g_min: float, g_max: float, step: float) -> list[float]:
    """Inclusive grid; points are rounded so that k*step prints cleanly."""
    if step <= 0:
        raise ConfigError("step must be positive")
    count = int(math.floor((g_max - g_min) / step + 1e-9))
    digits = max(0, -math.floor(math.log10(step))) + 3
    return [round(g_min + k * step, digits) for k in range(count + 1)]


DEFAULT_M_GRID = (1, 1.5, 2, 3, 5, 10, 20, 50, 100)


def phase_sweep(
    n: int,
    case: Case,
    g_values: Sequence[float] = (),
    m_values: Optional[Sequence[float]] = None,
    g: Optional[float] = None,
    heavy: Iterable = ("A",),
    without_b: bool = False,
    jobs: int = 1,
) -> list[PhasePoint]:
    """Solve the game at every grid point.

    For the symmetric and asymmetric cases sweep ``g_values``; for the measure
    case sweep ``m_values`` at fixed ``g``.  Output order follows the input
    grid regardless of ``jobs``.
    """
    case = Case(case)
    if case is Case.MEASURE:
        if g is None or m_values is None:
            raise ConfigError("measure sweeps need g and an m grid")
        specs = [SpecialCaseSpec(n, case, g, frozenset(heavy), float(m)) for m in m_values]
    else:
        specs = [SpecialCaseSpec(n, case, float(x)) for x in g_values]
    args = [(s, without_b) for s in specs]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_solve_star, args, chunksize=max(1, len(args) // (4 * jobs))))
    return [_solve_star(a) for a in args]


def transitions(points: Sequence[PhasePoint]) -> list[tuple[float, Order, Order]]:
    """(g at first point of new order, old order, new order) for each change."""
    out = []
    for prev, cur in zip(points, points[1:]):
        if prev.order != cur.order:
            out.append((cur.g, prev.order, cur.order))
    return out


def local_extrema(values: Sequence) -> list[int]:
    """Indices of strict interior turning points of a sequence (plateaus collapsed)."""
    runs = []
    for i, v in enumerate(values):
        if not runs or runs[-1][1] != v:
            runs.append((i, v))
    idx = []
    for (_, a), (i, b), (_, c) in zip(runs, runs[1:], runs[2:]):
        if (b > a and b > c) or (b < a and b < c):
            idx.append(i)
    return idx


PHASE_COLUMNS = ("order", "ell_a", "ell_b", "size_a", "size_b", "payoff_a", "payoff_b",
                 "ell_a_without_b", "error")


def phases_csv(points: Sequence[PhasePoint]) -> str:
    """Plot-ready table; the first column is g, or m for measure sweeps."""
    key = "m" if points and points[0].case is Case.MEASURE else "g"
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow((key,) + PHASE_COLUMNS)
    for p in points:
        row = p.row()
        wr.writerow([row[key]] + [row[c] for c in PHASE_COLUMNS])
    return buf.getvalue()
