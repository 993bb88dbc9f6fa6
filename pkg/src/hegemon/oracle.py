"""Brute-force ground truth for small instances.

Nothing here calls the coalition engine's fixed-point code: payoffs are
tabulated per (club, membership bitmask) straight from the world primitives,
cores are found by exhaustive blocking search, and random admissible schedules
replay the formation and shifting sequences step by step.
"""
from __future__ import annotations

import itertools
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .coalition import form_club, shift_clubs
from .errors import OracleBoundExceeded
from .model import EPS, Assignment, Club, Country, NoClub, Site, World, format_site

STAGE1_BOUND = 12
STAGE2_BOUND = 9

NONE, IN_A, IN_B = 0, 1, 2
_CLUB_CODE = {None: NONE, Club.A: IN_A, Club.B: IN_B}
_CODE_CLUB = {NONE: None, IN_A: Club.A, IN_B: Club.B}


# --------------------------------------------------------------------------
# payoff tables


class PayoffTable:
    """u[e][mask][i]: payoff of country i as a member of club e = bits of mask."""

    def __init__(self, w: World, ell_a: Site, ell_b: Site):
        n = w.n_small
        self.n = n
        self.full = (1 << n) - 1
        masks = np.array([[(k >> i) & 1 for i in range(n)] for k in range(1 << n)], dtype=bool)
        self.u = {}
        for e, loc in ((Club.A, ell_a), (Club.B, ell_b)):
            if loc is NoClub:
                continue
            ben = w.benefit(e, loc)
            self.u[e] = np.array([ben - w.shares(e, mk) for mk in masks])
        self.lists = {e: t.tolist() for e, t in self.u.items()}

    def payoff(self, e: Club, mask: int, i: int) -> float:
        return self.lists[e][mask][i]


def _bits(mask: int, n: int) -> list[int]:
    return [i for i in range(n) if mask >> i & 1]


def _to_ids(mask: int, n: int) -> frozenset:
    return frozenset(i + 1 for i in _bits(mask, n))


def _to_mask(ids) -> int:
    out = 0
    for i in ids:
        out |= 1 << (i - 1)
    return out


# --------------------------------------------------------------------------
# core enumeration


@dataclass
class CoreSet:
    stage: int
    outcomes: list
    closed: bool
    degenerate: bool
    indifferent: frozenset = frozenset()

    def a_clubs(self) -> list[frozenset]:
        return [c.members(Club.A) for c in self.outcomes]

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "outcomes": [str(c) for c in self.outcomes],
            "lattice_closed": self.closed,
            "degenerate": self.degenerate,
            "indifferent": sorted(self.indifferent),
        }


def enumerate_core(w: World, ell_a: Site, ell_b: Site = NoClub, stage: int = 2,
                   bound: Optional[int] = None) -> CoreSet:
    """Every assignment that no coalition can strictly improve upon.

    A deviation to ``c'`` blocks ``c`` iff every country whose choice differs
    is strictly better off; larger coalitions only add constraints.
    """
    n = w.n_small
    if bound is None:
        bound = STAGE1_BOUND if stage == 1 else STAGE2_BOUND
    if n > bound:
        raise OracleBoundExceeded(f"{n} small countries exceeds the exhaustive bound {bound}")
    alphabet = [NONE, IN_A]
    if stage == 2 and ell_b is not NoClub:
        alphabet.append(IN_B)
    if ell_a is NoClub:
        alphabet.remove(IN_A)
    codes = np.array(list(itertools.product(alphabet, repeat=n)), dtype=np.int8).reshape(-1, n)
    util = np.zeros(codes.shape)
    zero = np.zeros(n, dtype=bool)
    for e, code, loc in ((Club.A, IN_A, ell_a), (Club.B, IN_B, ell_b)):
        if code not in alphabet:
            continue
        ben = w.benefit(e, loc)
        for k, row in enumerate(codes):
            mk = row == code
            if mk.any():
                u = ben - w.shares(e, mk)
                util[k, mk] = u[mk]
                zero |= mk & (np.abs(u) <= 1e-9)
    blocked = np.zeros(len(codes), dtype=bool)
    chunk = max(1, 2_000_000 // (len(codes) * max(n, 1)))
    for lo in range(0, len(codes), chunk):
        cur = codes[lo:lo + chunk]
        changed = codes[None, :, :] != cur[:, None, :]
        better = util[None, :, :] > util[lo:lo + chunk, None, :] + EPS
        ok = (better | ~changed).all(axis=2) & changed.any(axis=2)
        blocked[lo:lo + chunk] = ok.any(axis=1)
    core = [Assignment(tuple(_CODE_CLUB[int(x)] for x in row)) for row in codes[~blocked]]
    indifferent = frozenset(int(i) + 1 for i in np.flatnonzero(zero))
    return CoreSet(stage, core, _lattice_closed(core, indifferent), bool(indifferent), indifferent)


def _lattice_closed(core: list, ignore: frozenset = frozenset()) -> bool:
    """Closure under (E&E', F|F') and (E|E', F&F').

    Countries in ``ignore`` (indifferent somewhere) are projected out before
    comparing, which is the relaxed check used for degenerate instances.
    """
    pairs = {(c.members(Club.A), c.members(Club.B)) for c in core}
    seen = {(e - ignore, f - ignore) for e, f in pairs}
    for (e1, f1), (e2, f2) in itertools.combinations(pairs, 2):
        for e, f in ((e1 & e2, f1 | f2), (e1 | e2, f1 & f2)):
            if (e - ignore, f - ignore) not in seen:
                return False
    return True


# --------------------------------------------------------------------------
# random admissible schedules


class _Scheduler:
    """Random replays of the formation and shifting sequences."""

    def __init__(self, w: World, ell_a: Site, ell_b: Site):
        self.n = w.n_small
        self.ell_a, self.ell_b = ell_a, ell_b
        self.tab = PayoffTable(w, ell_a, ell_b)
        self._join_cache: dict = {}
        self._shift_cache: dict = {}

    def _subsets(self, pool: int):
        sub = pool
        while sub:
            yield sub
            sub = (sub - 1) & pool

    def joins(self, club: int) -> list[int]:
        """Non-empty outsider groups that can join A together."""
        hit = self._join_cache.get(club)
        if hit is not None:
            return hit
        ua = self.tab.lists.get(Club.A)
        out = []
        if ua is not None:
            for sub in self._subsets(self.tab.full & ~club):
                row = ua[club | sub]
                if all(row[i] >= -EPS for i in _bits(sub, self.n)):
                    out.append(sub)
        out.sort()
        self._join_cache[club] = out
        return out

    def formation(self, rng: random.Random) -> int:
        club = 0
        while True:
            options = self.joins(club)
            if not options:
                return club
            club |= rng.choice(options)

    def shift_options(self, star: int, a: int, b: int) -> tuple[list[int], int]:
        key = (star, a, b)
        hit = self._shift_cache.get(key)
        if hit is not None:
            return hit
        n = self.n
        ua_row = self.tab.lists[Club.A][a] if Club.A in self.tab.lists else [0.0] * n
        ub = self.tab.lists[Club.B]
        shifts = []
        for sub in self._subsets(self.tab.full & ~b):
            row = ub[b | sub]
            good = True
            for i in _bits(sub, n):
                if row[i] < -EPS or (star >> i & 1 and not row[i] - ua_row[i] > EPS):
                    good = False
                    break
            if good:
                shifts.append(sub)
        shifts.sort()
        leakable = sum(1 << i for i in _bits(a, n) if ua_row[i] < -EPS)
        self._shift_cache[key] = (shifts, leakable)
        return shifts, leakable

    def shifting(self, star: int, rng: random.Random) -> tuple[int, int]:
        a, b = star, 0
        if self.ell_b is NoClub:
            return a, b
        while True:
            shifts, leakable = self.shift_options(star, a, b)
            if not shifts and not leakable:
                return a, b
            while True:
                s = rng.choice(shifts + [0])
                pool = leakable & ~s
                lk = 0
                for i in _bits(pool, self.n):
                    if rng.random() < 0.5:
                        lk |= 1 << i
                if s or lk:
                    break
            b |= s
            a &= ~(s | lk)


@dataclass
class FuzzReport:
    seed: int
    trials: int
    ell_a: Optional[str]
    ell_b: Optional[str]
    engine_star: list
    engine_a: list
    engine_b: list
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_json(self) -> dict:
        return {
            "seed": self.seed, "trials": self.trials, "ell_a": self.ell_a, "ell_b": self.ell_b,
            "engine": {"i_star": self.engine_star, "club_a": self.engine_a, "club_b": self.engine_b},
            "mismatches": self.mismatches, "ok": self.ok,
        }


def fuzz_order_independence(w: World, ell_a: Site, ell_b: Site, trials: int = 100,
                            seed: int = 0) -> FuzzReport:
    """Replay both sequences under ``trials`` random admissible schedules and
    compare every endpoint with the engine's."""
    s1 = form_club(w, ell_a)
    s2 = shift_clubs(w, s1, ell_b, trace=False)
    report = FuzzReport(seed, trials, format_site(ell_a), format_site(ell_b),
                        sorted(s1.i_star), sorted(s2.club_a), sorted(s2.club_b))
    if ell_a is NoClub:
        return report
    sched = _Scheduler(w, ell_a, ell_b)
    rng = random.Random(seed)
    n = w.n_small
    for t in range(trials):
        star = sched.formation(rng)
        a, b = sched.shifting(star, rng)
        got = (_to_ids(star, n), _to_ids(a, n), _to_ids(b, n))
        if got != (s1.i_star, s2.club_a, s2.club_b):
            report.mismatches.append({"trial": t, "i_star": sorted(got[0]),
                                      "club_a": sorted(got[1]), "club_b": sorted(got[2])})
    return report


# --------------------------------------------------------------------------
# random instances and the equivalence campaign


DEFAULT_INSTANCE_CONFIG = {
    "n_small": [1, 6],
    "grid_points": [2, 5],
    "resolution": 20,
    "g_range": [0.0, 1.0],
    "measure_range": [0.5, 2.0],
}


def random_instance(seed: int, config: Optional[dict] = None) -> tuple[World, Site, Site]:
    """A random line world plus a random pair of sites (B may stay out)."""
    cfg = {**DEFAULT_INSTANCE_CONFIG, **(config or {})}
    rng = random.Random(seed)
    n = rng.randint(*cfg["n_small"])
    res = int(cfg["resolution"])
    k = rng.randint(*cfg["grid_points"])
    grid = tuple(sorted(Fraction(x, res) for x in rng.sample(range(res + 1), k)))
    g_lo, g_hi = cfg["g_range"]
    m_lo, m_hi = cfg["measure_range"]

    def loc():
        return Fraction(rng.randint(0, res), res)

    smalls = tuple(
        Country(i + 1, loc(), rng.uniform(m_lo, m_hi), rng.uniform(g_lo, g_hi), rng.uniform(g_lo, g_hi))
        for i in range(n)
    )
    w = World(
        super_a=Country("A", loc(), rng.uniform(m_lo, m_hi)),
        super_b=Country("B", loc(), rng.uniform(m_lo, m_hi)),
        smalls=smalls,
        grid=grid,
    )
    ell_a = rng.choice(grid)
    ell_b = rng.choice(grid + (NoClub,))
    return w, ell_a, ell_b


def saddle_ok(core: CoreSet, club_a: frozenset, club_b: frozenset) -> bool:
    """No core outcome has more A members; none with the same A club has more B members."""
    for c in core.outcomes:
        ca, cb = c.members(Club.A), c.members(Club.B)
        if len(ca) > len(club_a):
            return False
        if ca == club_a and len(cb) > len(club_b):
            return False
    return True


def check_instance(seed: int, trials: int = 100, config: Optional[dict] = None) -> dict:
    w, ell_a, ell_b = random_instance(seed, config)
    s1 = form_club(w, ell_a)
    s2 = shift_clubs(w, s1, ell_b, trace=False)
    core1 = enumerate_core(w, ell_a, stage=1)
    maximal = max(core1.a_clubs(), key=len, default=frozenset())
    union = frozenset().union(*core1.a_clubs()) if core1.outcomes else frozenset()
    core2 = enumerate_core(w, ell_a, ell_b, stage=2)
    engine2 = Assignment.from_sets(w.n_small, s2.club_a, s2.club_b)
    fuzz = fuzz_order_independence(w, ell_a, ell_b, trials, seed)
    return {
        "seed": seed,
        "n_small": w.n_small,
        "ell_a": format_site(ell_a),
        "ell_b": format_site(ell_b),
        "degenerate": core1.degenerate or core2.degenerate,
        "stage1_max": s1.i_star == maximal == union and Assignment.from_sets(w.n_small, s1.i_star) in core1.outcomes,
        "stage2_in_core": engine2 in core2.outcomes,
        "stage2_saddle": saddle_ok(core2, s2.club_a, s2.club_b),
        "lattice": core1.closed and core2.closed,
        "fuzz": fuzz.ok,
        "fuzz_mismatches": fuzz.mismatches[:3],
    }


def _check_star(args):
    return check_instance(*args)


def run_campaign(n_instances: int = 1000, trials: int = 100, seed: int = 42,
                 config: Optional[dict] = None, jobs: int = 1) -> dict:
    """Engine-vs-oracle equivalence over seeded random instances.

    Instance ``k`` uses seed ``seed + k`` so any failure can be replayed alone.
    """
    args = [(seed + k, trials, config) for k in range(n_instances)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_check_star, args, chunksize=16))
    else:
        rows = [_check_star(a) for a in args]
    keys = ("stage1_max", "stage2_in_core", "stage2_saddle", "fuzz", "lattice")
    summary = {k: sum(r[k] for r in rows) for k in keys}
    return {
        "instances": n_instances,
        "trials": trials,
        "seed": seed,
        "config": {**DEFAULT_INSTANCE_CONFIG, **(config or {})},
        "passed": summary,
        "degenerate": sum(r["degenerate"] for r in rows),
        "failures": [r for r in rows if not all(r[k] for k in keys)],
        "ok": all(summary[k] == n_instances for k in keys),
    }
