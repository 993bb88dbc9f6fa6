"""Club formation (stage one) and club shifting (stage two).

Both processes are computed as deterministic fixed points that always take the
largest admissible step.  Because both sequences are order-independent, the
endpoint equals that of any other admissible schedule; ``hegemon.oracle``
checks this by replaying random schedules.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ContractError, OracleBoundExceeded
from .model import EPS, Assignment, Club, NoClub, Site, World, format_site

DEFAULT_CORE_BOUND = 12


def _ids(mask: np.ndarray) -> frozenset:
    return frozenset(int(i) + 1 for i in np.flatnonzero(mask))


@dataclass(frozen=True)
class Step:
    """One step of a coalition process.

    ``moved`` are the countries entering the club (the joiners in stage one,
    the shift set in stage two); ``changed`` additionally holds countries that
    leak out of A's club without joining B.  ``before``/``after`` map every
    changed country to its payoff before and after the step.
    """

    moved: frozenset
    changed: frozenset
    before: dict = field(default_factory=dict)
    after: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "moved": sorted(self.moved),
            "changed": sorted(self.changed),
            "leaked": sorted(self.changed - self.moved),
            "before": {str(k): v for k, v in sorted(self.before.items())},
            "after": {str(k): v for k, v in sorted(self.after.items())},
        }


@dataclass(frozen=True)
class StageOneOutcome:
    ell_a: Site
    i_star: frozenset
    trace: tuple[Step, ...] = ()

    def to_json(self) -> dict:
        return {
            "stage": 1,
            "ell_a": format_site(self.ell_a),
            "i_star": sorted(self.i_star),
            "steps": [s.to_json() for s in self.trace],
        }


@dataclass(frozen=True)
class StageTwoOutcome:
    ell_a: Site
    ell_b: Site
    i_star: frozenset
    club_a: frozenset
    club_b: frozenset
    trace: tuple[Step, ...] = ()

    def to_json(self) -> dict:
        return {
            "stage": 2,
            "ell_a": format_site(self.ell_a),
            "ell_b": format_site(self.ell_b),
            "i_star": sorted(self.i_star),
            "club_a": sorted(self.club_a),
            "club_b": sorted(self.club_b),
            "steps": [s.to_json() for s in self.trace],
        }


def largest_self_supporting(w: World, e: Club, loc: Fraction, pool: np.ndarray | None = None,
                            base: np.ndarray | None = None) -> np.ndarray:
    """Largest subset S of ``pool`` such that every member of S gets a
    non-negative payoff in club ``base | S`` located at ``loc``.

    Found by iterated deletion from the whole pool; payoffs are increasing in
    the club, so the admissible sets are closed under union.
    """
    ben = w.benefit(e, loc)
    s = np.ones(w.n_small, dtype=bool) if pool is None else pool.copy()
    base = np.zeros(w.n_small, dtype=bool) if base is None else base
    while s.any():
        u = ben - w.shares(e, base | s)
        bad = s & (u < -EPS)
        if not bad.any():
            break
        s &= ~bad
    return s


def form_club(w: World, ell_a: Site) -> StageOneOutcome:
    """A's maximum sphere of influence at ``ell_a``.

    Countries whose payoff is exactly zero (within EPS) stay in the club.
    """
    if ell_a is NoClub:
        return StageOneOutcome(NoClub, frozenset(), ())
    club = largest_self_supporting(w, Club.A, ell_a)
    if not club.any():
        return StageOneOutcome(ell_a, frozenset(), ())
    u = w.benefit(Club.A, ell_a) - w.shares(Club.A, club)
    joined = _ids(club)
    step = Step(joined, joined, {i: 0.0 for i in joined}, {i: float(u[i - 1]) for i in joined})
    return StageOneOutcome(ell_a, joined, (step,))


def _shift_set(w: World, in_star: np.ndarray, club_a: np.ndarray, club_b: np.ndarray,
               ben_b: np.ndarray, u_a: np.ndarray) -> np.ndarray:
    """Largest set of non-B countries that can jointly move to B.

    Outsiders of the stage-one club need a non-negative B payoff; countries
    from the stage-one club (current A members and earlier leavers) need a B
    payoff that is non-negative and strictly above ``u_a``, their A payoff
    against A's current membership.
    """
    s = ~club_b
    while s.any():
        u_b = ben_b - w.shares(Club.B, club_b | s)
        ok = (u_b >= -EPS) & (~in_star | (u_b - u_a > EPS))
        nxt = s & ok
        if (nxt == s).all():
            break
        s = nxt
    return s


def _leak(w: World, club_a: np.ndarray, ben_a: np.ndarray) -> np.ndarray:
    """Countries that leave A (one after another) because their payoff is negative."""
    out = np.zeros_like(club_a)
    club = club_a.copy()
    while club.any():
        u = ben_a - w.shares(Club.A, club)
        bad = club & (u < -EPS)
        if not bad.any():
            break
        club &= ~bad
        out |= bad
    return out


def _stage2_payoffs(w: World, ell_a, ell_b, club_a: np.ndarray, club_b: np.ndarray) -> np.ndarray:
    u = np.zeros(w.n_small)
    if club_a.any():
        ua = w.benefit(Club.A, ell_a) - w.shares(Club.A, club_a)
        u[club_a] = ua[club_a]
    if club_b.any():
        ub = w.benefit(Club.B, ell_b) - w.shares(Club.B, club_b)
        u[club_b] = ub[club_b]
    return u


def shift_clubs(w: World, s1: StageOneOutcome, ell_b: Site, trace: bool = True) -> StageTwoOutcome:
    """Final clubs after B enters at ``ell_b`` given the stage-one outcome ``s1``."""
    ell_a = s1.ell_a
    if ell_b is NoClub or not w.n_small:
        return StageTwoOutcome(ell_a, ell_b, s1.i_star, s1.i_star, frozenset(), ())
    in_star = w.mask(s1.i_star)
    club_a = in_star.copy()
    club_b = np.zeros(w.n_small, dtype=bool)
    ben_b = w.benefit(Club.B, ell_b)
    ben_a = w.benefit(Club.A, ell_a) if ell_a is not NoClub else np.zeros(w.n_small)
    steps = []
    while True:
        u_a = ben_a - w.shares(Club.A, club_a)
        s = _shift_set(w, in_star, club_a, club_b, ben_b, u_a)
        if trace:
            before = _stage2_payoffs(w, ell_a, ell_b, club_a, club_b)
        club_b = club_b | s
        club_a = club_a & ~s
        leaked = _leak(w, club_a, ben_a)
        club_a &= ~leaked
        if not s.any() and not leaked.any():
            break
        if trace:
            after = _stage2_payoffs(w, ell_a, ell_b, club_a, club_b)
            changed = s | leaked
            steps.append(Step(
                _ids(s), _ids(changed),
                {i: float(before[i - 1]) for i in _ids(changed)},
                {i: float(after[i - 1]) for i in _ids(changed)},
            ))
    return StageTwoOutcome(ell_a, ell_b, s1.i_star, _ids(club_a), _ids(club_b), tuple(steps))


def verify_core_stage1(w: World, ell_a: Fraction, c: Assignment, bound: int = DEFAULT_CORE_BOUND) -> bool:
    """True iff no coalition can strictly improve every member by deviating.

    Exhaustive over deviation targets; any changed set is a candidate
    coalition, and adding unchanged countries only adds constraints.
    """
    n = w.n_small
    if n > bound:
        raise OracleBoundExceeded(f"{n} small countries exceeds the exhaustive bound {bound}")
    if len(c) != n or any(x is Club.B for x in c.choices):
        raise ContractError("stage-one assignment must range over {A, None}")
    ben = w.benefit(Club.A, ell_a)
    cur = c.mask(Club.A)

    def payoffs(mask):
        return np.where(mask, ben - w.shares(Club.A, mask), 0.0)

    u0 = payoffs(cur)
    for bits in itertools.product((False, True), repeat=n):
        alt = np.array(bits, dtype=bool)
        changed = alt != cur
        if not changed.any():
            continue
        u1 = payoffs(alt)
        if (u1[changed] - u0[changed] > EPS).all():
            return False
    return True
