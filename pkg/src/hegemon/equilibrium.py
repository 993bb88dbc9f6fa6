"""Backward induction over the location grid.

B best-responds to every site of A; A picks the site that maximizes its payoff
anticipating that reply.  Ties are broken by distance to home (closest wins),
a zero payoff means no club, and remaining ties between equidistant sites go
toward the superpower's own side of the segment (smaller coordinate for A,
larger for B) with a warning.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

from .coalition import (
    StageOneOutcome,
    StageTwoOutcome,
    form_club,
    largest_self_supporting,
    shift_clubs,
)
from .errors import InvariantViolation
from .model import EPS, Club, NoClub, Site, World, format_site, hegemon_utility

log = logging.getLogger(__name__)


class BestResponse(NamedTuple):
    ell_b: Site
    outcome: StageTwoOutcome


@dataclass(frozen=True)
class ResponseEntry:
    ell_a: Site
    ell_b: Site
    club_a: frozenset
    club_b: frozenset
    payoff_a: float
    payoff_b: float

    def to_json(self) -> dict:
        return {
            "ell_a": format_site(self.ell_a),
            "ell_b": format_site(self.ell_b),
            "club_a": sorted(self.club_a),
            "club_b": sorted(self.club_b),
            "payoff_a": self.payoff_a,
            "payoff_b": self.payoff_b,
        }


@dataclass(frozen=True)
class SpneOutcome:
    ell_a: Site
    ell_b: Site
    club_a: frozenset
    club_b: frozenset
    payoff_a: float
    payoff_b: float
    response_table: dict = field(default_factory=dict, compare=False)
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def to_json(self, table: bool = False) -> dict:
        doc = {
            "ell_a": format_site(self.ell_a),
            "ell_b": format_site(self.ell_b),
            "club_a": sorted(self.club_a),
            "club_b": sorted(self.club_b),
            "payoff_a": self.payoff_a,
            "payoff_b": self.payoff_b,
            "warnings": list(self.warnings),
        }
        if table:
            doc["response_table"] = [e.to_json() for e in self.response_table.values()]
        return doc


def candidate_order(w: World, e: Club) -> list[Fraction]:
    """Grid sites in preference order for equal payoffs."""
    sign = 1 if e is Club.A else -1
    return sorted(w.grid, key=lambda loc: (w.home_distance(e, loc), sign * loc))


def _club_upper_bound(w: World, e: Club, loc: Fraction) -> float:
    """Payoff e would get if every country that could ever support its club joined."""
    cache = w.memo.setdefault(("ub", e), {})
    ub = cache.get(loc)
    if ub is None:
        if e is Club.A:
            club = w.mask(stage_one(w, loc).i_star)
        else:
            club = largest_self_supporting(w, Club.B, loc)
        ub = cache[loc] = hegemon_utility(w, e, loc, club)
    return ub


def stage_one(w: World, ell_a: Site) -> StageOneOutcome:
    cache = w.memo.setdefault("stage_one", {})
    s1 = cache.get(ell_a)
    if s1 is None:
        s1 = cache[ell_a] = form_club(w, ell_a)
    return s1


class _Argmax:
    """Running argmax with the superpower tie rules; feed sites in preference order."""

    def __init__(self, w: World, e: Club, warnings: list):
        self.w, self.e, self.warnings = w, e, warnings
        self.site: Site = NoClub
        self.payoff = 0.0
        self.data = None
        self._dist: Optional[Fraction] = None

    def hopeless(self, loc: Fraction, upper: float) -> bool:
        if upper < self.payoff - EPS:
            return True
        d = self.w.home_distance(self.e, loc)
        return upper <= self.payoff + EPS and (self.site is NoClub or d != self._dist)

    def offer(self, loc: Fraction, payoff: float, data) -> None:
        d = self.w.home_distance(self.e, loc)
        if payoff > self.payoff + EPS:
            self.site, self.payoff, self.data, self._dist = loc, payoff, data, d
        elif self.site is not NoClub and abs(payoff - self.payoff) <= EPS and d == self._dist:
            msg = (f"{self.e.value}: sites {format_site(self.site)} and {format_site(loc)} tie on "
                   f"payoff and distance; kept {format_site(self.site)}")
            log.warning(msg)
            self.warnings.append(msg)


def _best_response(w: World, s1: StageOneOutcome, prune: bool, warnings: list):
    pick = _Argmax(w, Club.B, warnings)
    for loc in candidate_order(w, Club.B):
        if prune and pick.hopeless(loc, _club_upper_bound(w, Club.B, loc)):
            continue
        out = shift_clubs(w, s1, loc, trace=False)
        pick.offer(loc, hegemon_utility(w, Club.B, loc, out.club_b), out)
    if pick.site is NoClub:
        return shift_clubs(w, s1, NoClub), 0.0
    # recompute with a trace for the chosen site only
    return shift_clubs(w, s1, pick.site), pick.payoff


def follower_best_response(w: World, ell_a: Site, prune: bool = True) -> BestResponse:
    out, _ = _best_response(w, stage_one(w, ell_a), prune, [])
    return BestResponse(out.ell_b, out)


def _entry(w: World, s1: StageOneOutcome, prune: bool, warnings: list) -> ResponseEntry:
    out, pay_b = _best_response(w, s1, prune, warnings)
    pay_a = hegemon_utility(w, Club.A, s1.ell_a, out.club_a)
    return ResponseEntry(s1.ell_a, out.ell_b, out.club_a, out.club_b, pay_a, pay_b)


def solve_spne(w: World, follower: bool = True, table: bool = False, prune: bool = True) -> SpneOutcome:
    """Subgame perfect equilibrium of the two-stage location game.

    With ``follower=False`` B is forced to stay out, giving A's optimum in a
    world without a rival.  With ``table=True`` every site of A is evaluated
    and recorded in ``response_table``; otherwise sites that cannot beat the
    incumbent choice are skipped.
    """
    warnings: list[str] = []
    pick = _Argmax(w, Club.A, warnings)
    rows: dict = {}
    for loc in candidate_order(w, Club.A):
        if not table and prune and pick.hopeless(loc, _club_upper_bound(w, Club.A, loc)):
            continue
        s1 = stage_one(w, loc)
        if follower:
            row = _entry(w, s1, prune, warnings)
        else:
            pay = hegemon_utility(w, Club.A, loc, w.mask(s1.i_star))
            row = ResponseEntry(loc, NoClub, s1.i_star, frozenset(), pay, 0.0)
        rows[loc] = row
        pick.offer(loc, row.payoff_a, row)
    if table or pick.site is NoClub:
        s1 = stage_one(w, NoClub)
        rows[NoClub] = _entry(w, s1, prune, warnings) if follower else ResponseEntry(
            NoClub, NoClub, frozenset(), frozenset(), 0.0, 0.0)
    best = rows[pick.site]
    return SpneOutcome(
        ell_a=best.ell_a, ell_b=best.ell_b, club_a=best.club_a, club_b=best.club_b,
        payoff_a=best.payoff_a, payoff_b=best.payoff_b,
        response_table=rows if table else {pick.site: best},
        warnings=tuple(dict.fromkeys(warnings)),
    )


def check_outcome(w: World, out: SpneOutcome) -> None:
    """Raise InvariantViolation if an outcome is internally inconsistent."""
    for e, site, club, pay in ((Club.A, out.ell_a, out.club_a, out.payoff_a),
                               (Club.B, out.ell_b, out.club_b, out.payoff_b)):
        if site is NoClub:
            if club or pay != 0.0:
                raise InvariantViolation(f"{e.value} has no club but members/payoff")
            continue
        if abs(hegemon_utility(w, e, site, club) - pay) > EPS:
            raise InvariantViolation(f"{e.value} payoff does not match its club")
        if pay <= EPS:
            raise InvariantViolation(f"{e.value} forms a club with non-positive payoff")
    if out.club_a & out.club_b:
        raise InvariantViolation("clubs overlap")
    row = out.response_table.get(out.ell_a)
    if row is not None and row.ell_b != out.ell_b:
        raise InvariantViolation("reported ell_b disagrees with the response table")
