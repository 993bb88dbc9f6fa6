"""Country panel data to yearly equilibria.

Inputs are two CSV files (see ``COUNTRY_COLUMNS`` and ``GLOBAL_COLUMNS``).
Every exogenous variable is smoothed with a trailing moving average, DI scores
become locations on [0, 1] (most democratic at 0), GDP becomes the cost-share
measure in trillions, and dependencies come either from the world
trade-to-GDP ratio (symmetric mode) or from bilateral trade shares
(asymmetric mode).  Each year is then solved independently.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import ConfigError, DomainError
from .equilibrium import check_outcome, solve_spne
from .model import Club, Country, NoClub, World, format_site

log = logging.getLogger(__name__)

COUNTRY_COLUMNS = ("year", "code", "di", "gdp_usd", "trade_us_usd", "trade_china_usd")
GLOBAL_COLUMNS = ("year", "world_trade_to_gdp")
SUMMARY_COLUMNS = ("year", "count_a", "count_b", "gdp_a", "gdp_b", "gdp_a_excl", "gdp_b_excl",
                   "ell_a", "ell_b")
GDP_UNIT = 1e12
DI_PRECISION = 10_000
MIN_COUNTRIES = 3


class Mode(str, enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


@dataclass(frozen=True)
class CountryYearRecord:
    year: int
    code: str
    di: Optional[float] = None
    gdp: Optional[float] = None
    trade_us: Optional[float] = None
    trade_china: Optional[float] = None


@dataclass(frozen=True)
class GlobalsRecord:
    year: int
    world_trade_to_gdp: float


@dataclass(frozen=True)
class SimConfig:
    mode: Mode = Mode.SYMMETRIC
    grid_steps: int = 500
    ma_window: int = 5
    year_range: Optional[tuple[int, int]] = None
    superpowers: tuple[str, str] = ("USA", "CHN")
    di_norm: str = "year"
    base_year: Optional[int] = None   # projections mode only

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.grid_steps < 1:
            raise ConfigError("grid_steps must be >= 1")
        if self.ma_window < 1:
            raise ConfigError("ma_window must be >= 1")
        if self.di_norm not in ("year", "panel"):
            raise ConfigError("di_norm must be 'year' or 'panel'")
        if self.superpowers[0] == self.superpowers[1]:
            raise ConfigError("the two superpowers must differ")

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["mode"] = self.mode.value
        return doc


# --------------------------------------------------------------------------
# reading and validation


def _number(raw: str, where: str, problems: list, lo: float = 0.0) -> Optional[float]:
    raw = raw.strip()
    if not raw:
        return None
    try:
        x = float(raw)
    except ValueError:
        problems.append(f"{where}: not a number: {raw!r}")
        return None
    if not math.isfinite(x) or x < lo:
        problems.append(f"{where}: value {raw} out of range")
        return None
    return x


def _rows(path, columns: Sequence[str], problems: list):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            problems.append(f"{path}: empty file")
            return
        header = [h.strip() for h in header]
        if tuple(header) != tuple(columns):
            missing = [c for c in columns if c not in header]
            extra = [c for c in header if c not in columns]
            msg = f"{path}: header must be {','.join(columns)}"
            if missing:
                msg += f"; missing: {','.join(missing)}"
            if extra:
                msg += f"; unexpected: {','.join(extra)}"
            if not missing and not extra:
                msg += "; columns out of order"
            problems.append(msg)
            return
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(columns):
                problems.append(f"{path}:{lineno}: expected {len(columns)} fields, got {len(row)}")
                continue
            yield lineno, row


def _year(raw: str, where: str, problems: list) -> Optional[int]:
    try:
        return int(raw.strip())
    except ValueError:
        problems.append(f"{where}: bad year {raw!r}")
        return None


def read_countries(path, strict: bool = True) -> tuple[list[CountryYearRecord], list[str]]:
    problems: list[str] = []
    out: list[CountryYearRecord] = []
    seen = set()
    for lineno, row in _rows(path, COUNTRY_COLUMNS, problems):
        where = f"{path}:{lineno}"
        year = _year(row[0], where, problems)
        code = row[1].strip()
        if not code:
            problems.append(f"{where}: empty code")
            continue
        di = _number(row[2], f"{where} di", problems)
        if di is not None and di > 10:
            problems.append(f"{where} di: value {di} above 10")
        rec = CountryYearRecord(
            year, code, di,
            _number(row[3], f"{where} gdp_usd", problems),
            _number(row[4], f"{where} trade_us_usd", problems),
            _number(row[5], f"{where} trade_china_usd", problems),
        )
        if year is None:
            continue
        if (year, code) in seen:
            problems.append(f"{where}: duplicate row for {code} in {year}")
            continue
        seen.add((year, code))
        out.append(rec)
    if strict and problems:
        raise ConfigError("\n".join(problems))
    return out, problems


def read_globals(path, strict: bool = True) -> tuple[list[GlobalsRecord], list[str]]:
    problems: list[str] = []
    out: list[GlobalsRecord] = []
    seen = set()
    for lineno, row in _rows(path, GLOBAL_COLUMNS, problems):
        where = f"{path}:{lineno}"
        year = _year(row[0], where, problems)
        ratio = _number(row[1], f"{where} world_trade_to_gdp", problems)
        if year is None:
            continue
        if ratio is None or not 0 < ratio < 2:
            problems.append(f"{where} world_trade_to_gdp: must be in (0, 2)")
            continue
        if year in seen:
            problems.append(f"{where}: duplicate year {year}")
            continue
        seen.add(year)
        out.append(GlobalsRecord(year, ratio))
    if strict and problems:
        raise ConfigError("\n".join(problems))
    return out, problems


def validate_files(countries=None, globals_=None) -> list[str]:
    """All schema problems found in the given files (empty list if clean)."""
    problems: list[str] = []
    if countries is not None:
        problems += read_countries(countries, strict=False)[1]
    if globals_ is not None:
        problems += read_globals(globals_, strict=False)[1]
    return problems


# --------------------------------------------------------------------------
# transformations


def moving_average(series: Mapping[int, float], window: int) -> dict[int, float]:
    """Trailing mean over the last ``window`` observations up to each year.

    Only observed years get a value; early years average what exists.
    """
    if window < 1:
        raise ConfigError("window must be >= 1")
    if not series:
        raise DomainError("moving average of an empty series")
    years = sorted(series)
    out = {}
    for k, y in enumerate(years):
        vals = [series[t] for t in years[max(0, k - window + 1):k + 1]]
        out[y] = math.fsum(vals) / len(vals)
    return out


MODE_FIELDS = {
    Mode.SYMMETRIC: ("di", "gdp"),
    Mode.ASYMMETRIC: ("di", "gdp", "trade_us", "trade_china"),
}


def smooth_panel(records: Sequence[CountryYearRecord], window: int,
                 fields: Sequence[str] = MODE_FIELDS[Mode.ASYMMETRIC]) -> list[CountryYearRecord]:
    """Apply ``moving_average`` per country to ``fields``; other fields are dropped."""
    by_code: dict[str, list[CountryYearRecord]] = {}
    for r in records:
        by_code.setdefault(r.code, []).append(r)
    dropped = {f: None for f in MODE_FIELDS[Mode.ASYMMETRIC] if f not in fields}
    out = []
    for code in sorted(by_code):
        rows = sorted(by_code[code], key=lambda r: r.year)
        smoothed = {}
        for f in fields:
            series = {r.year: getattr(r, f) for r in rows if getattr(r, f) is not None}
            smoothed[f] = moving_average(series, window) if series else {}
        for r in rows:
            out.append(replace(r, **dropped, **{f: smoothed[f].get(r.year) for f in fields}))
    return sorted(out, key=lambda r: (r.year, r.code))


def normalize_locations(records: Sequence[CountryYearRecord],
                        span: Optional[tuple[float, float]] = None) -> dict[str, Fraction]:
    """Min-max scale DI to [0, 1] with the highest score at 0.

    ``span`` overrides the (min, max) taken from ``records``; results are
    exact fractions at 1e-4 resolution.
    """
    scored = {r.code: r.di for r in records if r.di is not None}
    if len(scored) < 2:
        raise DomainError("need at least two countries with a DI score")
    lo, hi = span if span is not None else (min(scored.values()), max(scored.values()))
    if hi <= lo:
        raise DomainError("all DI scores are equal")
    return {code: Fraction(round((hi - di) / (hi - lo) * DI_PRECISION), DI_PRECISION)
            for code, di in sorted(scored.items())}


def build_dependencies(records: Sequence[CountryYearRecord], mode: Mode,
                       world_ratio: Optional[float] = None) -> dict[str, tuple[float, float]]:
    """(g_a, g_b) per country.  Symmetric mode ignores bilateral trade and
    asymmetric mode ignores the world ratio."""
    mode = Mode(mode)
    out = {}
    if mode is Mode.SYMMETRIC:
        if world_ratio is None:
            raise DomainError("symmetric mode needs the world trade-to-GDP ratio")
        if not 0 <= world_ratio <= 1:
            raise DomainError(f"world trade-to-GDP ratio {world_ratio:.4f} is not a valid dependency")
        for r in records:
            out[r.code] = (world_ratio, world_ratio)
        return out
    for r in records:
        us, cn = r.trade_us or 0.0, r.trade_china or 0.0
        if us + cn > 0:
            out[r.code] = (us / (us + cn), cn / (us + cn))
        else:
            # both missing (or both zero): no dependency on either side
            out[r.code] = (0.0, 0.0)
    return out


# --------------------------------------------------------------------------
# yearly worlds


@dataclass(frozen=True)
class YearInput:
    """Everything needed to solve one year, already smoothed and normalized."""

    year: int
    codes: tuple[str, ...]            # small countries, sorted
    world: World
    gdp: dict = field(default_factory=dict)   # code -> GDP in trillions, incl. superpowers


@dataclass
class YearResult:
    year: int
    memberships: list[tuple[str, str]]
    summary: dict
    warnings: list[str] = field(default_factory=list)


def build_year(records: Sequence[CountryYearRecord], config: SimConfig, year: int,
               world_ratio: Optional[float] = None,
               span: Optional[tuple[float, float]] = None) -> YearInput:
    """World for one year.  Raises DomainError when the year cannot be used."""
    code_a, code_b = config.superpowers
    usable = [r for r in records if r.di is not None and r.gdp is not None and r.gdp > 0]
    usable.sort(key=lambda r: r.code)
    codes = {r.code for r in usable}
    for sp in (code_a, code_b):
        if sp not in codes:
            raise DomainError(f"superpower {sp} lacks DI or GDP")
    if len(usable) < MIN_COUNTRIES:
        raise DomainError(f"only {len(usable)} usable countries")
    locs = normalize_locations(usable, span)
    deps = build_dependencies([r for r in usable if r.code not in (code_a, code_b)],
                              config.mode, world_ratio)
    gdp = {r.code: r.gdp / GDP_UNIT for r in usable}
    smalls = []
    small_codes = []
    for r in usable:
        if r.code in (code_a, code_b):
            continue
        small_codes.append(r.code)
        ga, gb = deps[r.code]
        smalls.append(Country(len(smalls) + 1, locs[r.code], gdp[r.code], ga, gb, code=r.code))
    w = World(
        super_a=Country("A", locs[code_a], gdp[code_a], code=code_a),
        super_b=Country("B", locs[code_b], gdp[code_b], code=code_b),
        smalls=tuple(smalls),
        grid=tuple(Fraction(x, config.grid_steps) for x in range(config.grid_steps + 1)),
    )
    return YearInput(year, tuple(small_codes), w, gdp)


def _fmt(x: float) -> str:
    return format(x, ".12g")


def solve_year(inp: YearInput) -> YearResult:
    w = inp.world
    out = solve_spne(w)
    check_outcome(w, out)
    code_a, code_b = w.super_a.code, w.super_b.code
    club_of = {}
    for i, code in enumerate(inp.codes, start=1):
        club_of[code] = "A" if i in out.club_a else "B" if i in out.club_b else "none"
    club_of[code_a] = "none" if out.ell_a is NoClub else "A"
    club_of[code_b] = "none" if out.ell_b is NoClub else "B"
    members = {e: sorted(c for c, k in club_of.items() if k == e.value) for e in Club}

    def total(codes):
        return math.fsum(inp.gdp[c] for c in codes)

    summary = {
        "year": inp.year,
        "count_a": len(out.club_a),
        "count_b": len(out.club_b),
        "gdp_a": total(members[Club.A]),
        "gdp_b": total(members[Club.B]),
        "gdp_a_excl": total(c for c in members[Club.A] if c != code_a),
        "gdp_b_excl": total(c for c in members[Club.B] if c != code_b),
        "ell_a": format_site(out.ell_a) or "",
        "ell_b": format_site(out.ell_b) or "",
    }
    return YearResult(inp.year, sorted(club_of.items()), summary, list(out.warnings))


def _panel_span(records: Sequence[CountryYearRecord]) -> tuple[float, float]:
    scores = [r.di for r in records if r.di is not None]
    if not scores:
        raise DomainError("no DI scores in the panel")
    return min(scores), max(scores)


def prepare_years(countries: Sequence[CountryYearRecord], globals_: Sequence[GlobalsRecord],
                  config: SimConfig,
                  projections: Optional[Sequence[CountryYearRecord]] = None,
                  ) -> tuple[list[YearInput], list[str]]:
    """Smoothed per-year inputs plus the reasons for every skipped year."""
    smoothed = smooth_panel(countries, config.ma_window, MODE_FIELDS[config.mode])
    ratios: dict[int, float] = {}
    if config.mode is Mode.SYMMETRIC and globals_:
        ratios = moving_average({g.year: g.world_trade_to_gdp for g in globals_}, config.ma_window)
    span = _panel_span(smoothed) if config.di_norm == "panel" else None

    by_year: dict[int, list[CountryYearRecord]] = {}
    if projections is None:
        for r in smoothed:
            by_year.setdefault(r.year, []).append(r)
    else:
        # only GDP moves; everything else stays at the base year
        if config.base_year is None:
            raise ConfigError("projections need a base year")
        base = {r.code: r for r in smoothed if r.year == config.base_year}
        if not base:
            raise ConfigError(f"base year {config.base_year} not in the country panel")
        for p in projections:
            if p.code in base:
                by_year.setdefault(p.year, []).append(replace(base[p.code], year=p.year, gdp=p.gdp))
        ratios = {y: ratios[config.base_year] for y in by_year} if config.base_year in ratios else {}

    inputs, skipped = [], []
    for year in sorted(by_year):
        if config.year_range and not config.year_range[0] <= year <= config.year_range[1]:
            continue
        try:
            if config.mode is Mode.SYMMETRIC and year not in ratios:
                raise DomainError("no world trade-to-GDP ratio")
            inputs.append(build_year(by_year[year], config, year, ratios.get(year), span))
        except DomainError as exc:
            msg = f"{year}: skipped ({exc})"
            log.warning(msg)
            skipped.append(msg)
    return inputs, skipped


def run_simulation(config: SimConfig, countries: Sequence[CountryYearRecord],
                   globals_: Sequence[GlobalsRecord] = (),
                   projections: Optional[Sequence[CountryYearRecord]] = None,
                   jobs: int = 1) -> tuple[list[YearResult], list[str]]:
    inputs, skipped = prepare_years(countries, globals_, config, projections)
    if jobs > 1 and len(inputs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(solve_year, inputs))
    else:
        results = [solve_year(x) for x in inputs]
    return results, skipped


# --------------------------------------------------------------------------
# output


def memberships_csv(results: Sequence[YearResult]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(("year", "code", "club"))
    for res in results:
        for code, club in res.memberships:
            wr.writerow((res.year, code, club))
    return buf.getvalue()


def summary_csv(results: Sequence[YearResult]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SUMMARY_COLUMNS)
    for res in results:
        row = res.summary
        wr.writerow([_fmt(row[c]) if isinstance(row[c], float) else row[c] for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def write_outputs(out_dir, results: Sequence[YearResult], meta: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "memberships.csv").write_text(memberships_csv(results), encoding="utf-8", newline="")
    (out / "summary.csv").write_text(summary_csv(results), encoding="utf-8", newline="")
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")


def simulate_files(config: SimConfig, countries_path, globals_path=None, out_dir=None,
                   projections_path=None, jobs: int = 1, meta: Optional[dict] = None):
    """File-level driver used by the CLI."""
    t0 = time.perf_counter()
    countries, _ = read_countries(countries_path)
    globals_ = read_globals(globals_path)[0] if globals_path else []
    projections = read_countries(projections_path)[0] if projections_path else None
    results, skipped = run_simulation(config, countries, globals_, projections, jobs)
    warnings = skipped + [w for r in results for w in r.warnings]
    doc = dict(meta or {})
    doc.update({
        "config": config.to_json(),
        "inputs": {"countries": str(countries_path), "globals": str(globals_path) if globals_path else None,
                   "projections": str(projections_path) if projections_path else None},
        "years": [r.year for r in results],
        "warnings": warnings,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    })
    if out_dir is not None:
        write_outputs(out_dir, results, doc)
    return results, doc
