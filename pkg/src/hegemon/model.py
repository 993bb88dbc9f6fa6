"""Game primitives: countries, locations, distances, cost shares and utilities.

Everything downstream is a pure function of a :class:`World`.  Locations are
exact rationals (:class:`fractions.Fraction`) so that distance comparisons used
for tie-breaking are exact; utilities are evaluated in floating point and
compared with the global tolerance :data:`EPS`.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, ContractError

EPS = 1e-12

Location = Fraction


class Club(str, enum.Enum):
    A = "A"
    B = "B"

    @property
    def rival(self) -> "Club":
        return Club.B if self is Club.A else Club.A


class _NoClub:
    """Sentinel for a superpower that does not establish a club."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NoClub"

    def __reduce__(self):
        return (_NoClub, ())


NoClub = _NoClub()
Site = Union[Fraction, _NoClub]


def as_location(value) -> Fraction:
    """Parse ``"num/den"`` strings, ints, Fractions or decimal strings."""
    if isinstance(value, Fraction):
        loc = value
    elif isinstance(value, float):
        loc = Fraction(str(value))
    else:
        try:
            loc = Fraction(value)
        except (ValueError, ZeroDivisionError, TypeError) as exc:
            raise ConfigError(f"bad location {value!r}") from exc
    if not 0 <= loc <= 1:
        raise ConfigError(f"location {loc} outside [0, 1]")
    return loc


def format_site(site: Site) -> Optional[str]:
    if site is NoClub:
        return None
    return f"{site.numerator}/{site.denominator}"


def parse_site(text) -> Site:
    """Inverse of ``format_site``; ``None``, "none" and "NoClub" mean no club."""
    if text is None or (isinstance(text, str) and text.strip().lower() in ("", "none", "noclub")):
        return NoClub
    return as_location(text)


# --------------------------------------------------------------------------
# distance models


@dataclass(frozen=True)
class LineDistance:
    """d(x, y) = |x - y| on the unit segment."""

    kind = "line"

    def __call__(self, x: Fraction, y: Fraction) -> Fraction:
        return abs(x - y)

    def to_json(self) -> dict:
        return {"kind": "line"}


@dataclass(frozen=True)
class MatrixDistance:
    """Explicit symmetric distance table over a finite set of points.

    Points are identified by their location label; the label also serves as
    the coordinate used for residual tie-breaking.
    """

    points: tuple[Fraction, ...]
    table: tuple[tuple[Fraction, ...], ...]

    kind = "matrix"

    def __post_init__(self):
        k = len(self.points)
        if len(set(self.points)) != k:
            raise ConfigError("duplicate points in distance matrix")
        if len(self.table) != k or any(len(row) != k for row in self.table):
            raise ConfigError("distance matrix must be square over its points")
        for i in range(k):
            if self.table[i][i] != 0:
                raise ConfigError("distance matrix must have a zero diagonal")
            for j in range(k):
                dij = self.table[i][j]
                if not 0 <= dij <= 1:
                    raise ConfigError(f"distance d[{i}][{j}]={dij} outside [0, 1]")
                if dij != self.table[j][i]:
                    raise ConfigError("distance matrix is not symmetric")
                for h in range(k):
                    if self.table[i][h] > dij + self.table[j][h]:
                        raise ConfigError("distance matrix violates the triangle inequality")

    @cached_property
    def _index(self) -> dict:
        return {p: i for i, p in enumerate(self.points)}

    def __call__(self, x: Fraction, y: Fraction) -> Fraction:
        try:
            return self.table[self._index[x]][self._index[y]]
        except KeyError as exc:
            raise ConfigError(f"location {exc.args[0]} unknown to the distance matrix") from None

    def to_json(self) -> dict:
        return {
            "kind": "matrix",
            "points": [format_site(p) for p in self.points],
            "table": [[format_site(d) for d in row] for row in self.table],
        }


DistanceModel = Union[LineDistance, MatrixDistance]


# --------------------------------------------------------------------------
# cost models


@dataclass(frozen=True)
class ProportionalCost:
    """rho_je(E) = m_j / (m_e + sum_{i in E} m_i)."""

    kind = "proportional"

    def shares(self, m_small: np.ndarray, m_super: float, members: np.ndarray) -> np.ndarray:
        # share each small country pays (or would pay) against the club `members`
        return m_small / (m_super + m_small[members].sum())

    def super_share(self, m_small: np.ndarray, m_super: float, members: np.ndarray) -> float:
        return m_super / (m_super + m_small[members].sum())

    def to_json(self) -> dict:
        return {"kind": "proportional"}


@dataclass(frozen=True)
class TabulatedCost:
    """Share depends only on the number of small members: ``table[k]``.

    Every member, the superpower included, pays ``table[k]`` when the club has
    ``k`` small members.  The table must be positive and strictly decreasing.
    """

    table: tuple[float, ...]

    kind = "tabulated"

    def __post_init__(self):
        t = self.table
        if not t or any(x <= 0 for x in t):
            raise ConfigError("tabulated cost shares must be positive")
        if any(t[k + 1] >= t[k] for k in range(len(t) - 1)):
            raise ConfigError("tabulated cost shares must be strictly decreasing")

    def _at(self, k: int) -> float:
        if k >= len(self.table):
            raise ConfigError(f"tabulated cost has no entry for club size {k}")
        return self.table[k]

    def shares(self, m_small, m_super, members):
        return np.full(len(m_small), self._at(int(members.sum())))

    def super_share(self, m_small, m_super, members):
        return self._at(int(members.sum()))

    def to_json(self) -> dict:
        return {"kind": "tabulated", "table": list(self.table)}


CostModel = Union[ProportionalCost, TabulatedCost]


# --------------------------------------------------------------------------
# countries and worlds


@dataclass(frozen=True)
class Country:
    """A player.  ``id`` is ``"A"``, ``"B"`` or a small-country index >= 1."""

    id: Union[str, int]
    location: Fraction
    measure: float = 1.0
    dep_a: float = 1.0
    dep_b: float = 1.0
    code: Optional[str] = None

    def __post_init__(self):
        if not self.measure > 0:
            raise ConfigError(f"country {self.id}: measure must be positive")
        for name in ("dep_a", "dep_b"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"country {self.id}: {name}={v} outside [0, 1]")


@dataclass(frozen=True)
class World:
    """A full game instance.

    ``smalls`` are indexed 1..N in order; ``grid`` is the set of feasible
    club-good sites shared by both superpowers.
    """

    super_a: Country
    super_b: Country
    smalls: tuple[Country, ...]
    grid: tuple[Fraction, ...]
    distance: DistanceModel = field(default_factory=LineDistance)
    cost: CostModel = field(default_factory=ProportionalCost)

    def __post_init__(self):
        if self.super_a.id != "A" or self.super_b.id != "B":
            raise ConfigError("superpowers must carry ids 'A' and 'B'")
        ids = [c.id for c in self.smalls]
        if ids != list(range(1, len(ids) + 1)):
            raise ConfigError("small-country indices must be contiguous from 1")
        if not self.grid:
            raise ConfigError("location grid is empty")
        if len(set(self.grid)) != len(self.grid):
            raise ConfigError("location grid has duplicates")
        for loc in self.grid:
            if not 0 <= loc <= 1:
                raise ConfigError(f"grid location {loc} outside [0, 1]")

    # -- basic accessors ---------------------------------------------------

    @property
    def n_small(self) -> int:
        return len(self.smalls)

    def superpower(self, e: Club) -> Country:
        return self.super_a if e is Club.A else self.super_b

    @property
    def resolution(self) -> int:
        """Common denominator of every location in the world."""
        locs = [c.location for c in self.smalls] + list(self.grid)
        locs += [self.super_a.location, self.super_b.location]
        return math.lcm(*(x.denominator for x in locs))

    @cached_property
    def measures(self) -> np.ndarray:
        return np.array([c.measure for c in self.smalls], dtype=float)

    @cached_property
    def _deps(self) -> dict:
        return {
            Club.A: np.array([c.dep_a for c in self.smalls], dtype=float),
            Club.B: np.array([c.dep_b for c in self.smalls], dtype=float),
        }

    def dependency(self, e: Club) -> np.ndarray:
        return self._deps[e]

    @cached_property
    def _benefit_cache(self) -> dict:
        return {}

    @cached_property
    def memo(self) -> dict:
        """Scratch cache for quantities derived from this (immutable) world."""
        return {}

    def benefit(self, e: Club, loc: Fraction) -> np.ndarray:
        """g_ie * (1 - d(i, loc)) for every small country (read-only array)."""
        key = (e, loc)
        vec = self._benefit_cache.get(key)
        if vec is None:
            close = np.array(
                [float(1 - self.distance(c.location, loc)) for c in self.smalls], dtype=float
            )
            vec = self.dependency(e) * close
            vec.flags.writeable = False
            self._benefit_cache[key] = vec
        return vec

    def home_distance(self, e: Club, loc: Fraction) -> Fraction:
        return self.distance(self.superpower(e).location, loc)

    def shares(self, e: Club, members: np.ndarray) -> np.ndarray:
        """Cost share each small country pays (or would pay) in club ``members``."""
        return self.cost.shares(self.measures, self.superpower(e).measure, members)

    def super_share(self, e: Club, members: np.ndarray) -> float:
        return self.cost.super_share(self.measures, self.superpower(e).measure, members)

    def mask(self, members: Iterable[int]) -> np.ndarray:
        m = np.zeros(self.n_small, dtype=bool)
        for i in members:
            if not 1 <= i <= self.n_small:
                raise ContractError(f"{i} is not a small-country index")
            m[i - 1] = True
        return m

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        def country(c: Country) -> dict:
            d = {
                "id": c.id,
                "location": format_site(c.location),
                "measure": c.measure,
                "dep_a": c.dep_a,
                "dep_b": c.dep_b,
            }
            if c.code is not None:
                d["code"] = c.code
            return d

        return {
            "superpowers": [country(self.super_a), country(self.super_b)],
            "smalls": [country(c) for c in self.smalls],
            "grid": [format_site(x) for x in self.grid],
            "resolution": self.resolution,
            "distance": self.distance.to_json(),
            "cost": self.cost.to_json(),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "World":
        try:
            supers = {s["id"]: s for s in doc["superpowers"]}
            if set(supers) != {"A", "B"} or len(doc["superpowers"]) != 2:
                raise ConfigError("need exactly one superpower 'A' and one 'B'")

            def country(d, cid) -> Country:
                return Country(
                    id=cid,
                    location=as_location(d["location"]),
                    measure=float(d.get("measure", 1.0)),
                    dep_a=float(d.get("dep_a", 1.0 if cid == "A" else 0.0)),
                    dep_b=float(d.get("dep_b", 1.0 if cid == "B" else 0.0)),
                    code=d.get("code"),
                )

            smalls = tuple(country(d, i + 1) for i, d in enumerate(doc["smalls"]))
            for i, d in enumerate(doc["smalls"]):
                if "id" in d and d["id"] != i + 1:
                    raise ConfigError("small-country ids must be 1..N in listed order")
            dist_doc = doc.get("distance", {"kind": "line"})
            if dist_doc["kind"] == "line":
                dist: DistanceModel = LineDistance()
            elif dist_doc["kind"] == "matrix":
                dist = MatrixDistance(
                    points=tuple(as_location(p) for p in dist_doc["points"]),
                    table=tuple(tuple(Fraction(x) for x in row) for row in dist_doc["table"]),
                )
            else:
                raise ConfigError(f"unknown distance kind {dist_doc['kind']!r}")
            cost_doc = doc.get("cost", {"kind": "proportional"})
            if cost_doc["kind"] == "proportional":
                cost: CostModel = ProportionalCost()
            elif cost_doc["kind"] == "tabulated":
                cost = TabulatedCost(tuple(float(x) for x in cost_doc["table"]))
            else:
                raise ConfigError(f"unknown cost kind {cost_doc['kind']!r}")
            world = cls(
                super_a=country(supers["A"], "A"),
                super_b=country(supers["B"], "B"),
                smalls=smalls,
                grid=tuple(as_location(x) for x in doc["grid"]),
                distance=dist,
                cost=cost,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed world document: {exc!r}") from exc
        if "resolution" in doc and int(doc["resolution"]) % world.resolution:
            raise ConfigError(
                f"declared resolution {doc['resolution']} is not a multiple of {world.resolution}"
            )
        return world

    @classmethod
    def load(cls, path) -> "World":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_json(doc)


def line_world(
    small_locations: Sequence,
    grid: Sequence,
    dep_a: Union[float, Sequence[float]],
    dep_b: Union[float, Sequence[float]],
    measures: Union[float, Sequence[float]] = 1.0,
    loc_a=0,
    loc_b=1,
    measure_a: float = 1.0,
    measure_b: float = 1.0,
    cost: Optional[CostModel] = None,
) -> World:
    """Convenience constructor for worlds on the unit segment."""
    n = len(small_locations)

    def spread(v):
        return [float(v)] * n if np.isscalar(v) else [float(x) for x in v]

    ga, gb, ms = spread(dep_a), spread(dep_b), spread(measures)
    smalls = tuple(
        Country(i + 1, as_location(x), ms[i], ga[i], gb[i]) for i, x in enumerate(small_locations)
    )
    return World(
        super_a=Country("A", as_location(loc_a), measure_a),
        super_b=Country("B", as_location(loc_b), measure_b),
        smalls=smalls,
        grid=tuple(as_location(x) for x in grid),
        cost=cost or ProportionalCost(),
    )


# --------------------------------------------------------------------------
# assignments and utilities


@dataclass(frozen=True)
class Assignment:
    """Club choice of every small country: ``choices[i-1]`` in {A, B, None}."""

    choices: tuple[Optional[Club], ...]

    @classmethod
    def from_sets(cls, n: int, club_a: Iterable[int] = (), club_b: Iterable[int] = ()) -> "Assignment":
        ch: list = [None] * n
        for i in club_a:
            ch[i - 1] = Club.A
        for i in club_b:
            if ch[i - 1] is not None:
                raise ContractError(f"country {i} assigned to both clubs")
            ch[i - 1] = Club.B
        return cls(tuple(ch))

    def __getitem__(self, i: int) -> Optional[Club]:
        return self.choices[i - 1]

    def __len__(self) -> int:
        return len(self.choices)

    def members(self, e: Club) -> frozenset:
        return frozenset(i + 1 for i, c in enumerate(self.choices) if c is e)

    def mask(self, e: Club) -> np.ndarray:
        return np.array([c is e for c in self.choices], dtype=bool)

    def __str__(self) -> str:
        return "".join("0" if c is None else c.value for c in self.choices)


def _check_assignment(w: World, c: Assignment) -> None:
    if len(c) != w.n_small:
        raise ContractError(f"assignment covers {len(c)} countries, world has {w.n_small}")


def distance(w: World, p, loc: Fraction) -> Fraction:
    """Distance from a player id (``"A"``, ``"B"``, small index) or a location to ``loc``."""
    if isinstance(p, str):
        src = w.superpower(Club(p)).location
    elif isinstance(p, Fraction):
        src = p
    elif isinstance(p, int):
        src = w.smalls[p - 1].location
    else:
        src = as_location(p)
    return w.distance(src, loc)


def small_utility_stage1(w: World, ell_a: Fraction, c: Assignment, i: int) -> float:
    _check_assignment(w, c)
    if any(x is Club.B for x in c.choices):
        raise ContractError("stage-one assignments cannot contain B")
    if c[i] is None:
        return 0.0
    members = c.mask(Club.A)
    return float(w.benefit(Club.A, ell_a)[i - 1] - w.shares(Club.A, members)[i - 1])


def small_utility_stage2(w: World, ell_a: Fraction, ell_b: Site, c: Assignment, i: int) -> float:
    _check_assignment(w, c)
    if ell_b is NoClub and any(x is Club.B for x in c.choices):
        raise ContractError("B has no club, so no country can choose B")
    e = c[i]
    if e is None:
        return 0.0
    loc = ell_a if e is Club.A else ell_b
    members = c.mask(e)
    return float(w.benefit(e, loc)[i - 1] - w.shares(e, members)[i - 1])


def hegemon_utility(w: World, e: Club, ell_e: Site, members: Iterable[int]) -> float:
    if ell_e is NoClub:
        return 0.0
    mask = members if isinstance(members, np.ndarray) else w.mask(members)
    return float(float(1 - w.home_distance(e, ell_e)) - w.super_share(e, mask))
