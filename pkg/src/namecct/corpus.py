"""Reference corpus: name normalization, source ingestion, post-stratification.

A reference source is a TSV file with columns ``name, decade, country, wf, wm``
holding female and male observation weights per name and context. Sources are
read into :class:`SourceTable` objects, optionally reweighted so that their
female and male totals match, and folded into an immutable :class:`NameTable`.
"""

from __future__ import annotations

import csv
import math
import re
import unicodedata
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

UNKNOWN_COUNTRY = "--"
UNKNOWN_DECADE = -1
DECADE_RANGE = (1600, 2020)

SOURCE_COLUMNS = ("name", "decade", "country", "wf", "wm")
TABLE_COLUMNS = ("name", "source_id", "country", "decade", "wf", "wm")

_SPLIT = re.compile(r"[\s\-‐‑‒–'’.]+")
_NON_ALPHA = re.compile(r"[^a-z]+")
_COUNTRY = re.compile(r"^[A-Z]{2}$")


class CorpusFormatError(ValueError):
    """A reference file violates the standardized TSV format."""

    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {reason}")


def normalize_name(raw: str) -> str | None:
    """Reduce a raw name to its matching key, or ``None`` when nothing is left.

    Diacritics are stripped via compatibility decomposition, the string is
    lowercased, split on whitespace/hyphens/apostrophes/periods, and only the
    first token is kept with any non-``[a-z]`` characters removed.

    >>> normalize_name("Jean-Pierre Dupont")
    'jean'
    >>> normalize_name("José")
    'jose'
    """
    decomposed = unicodedata.normalize("NFKD", raw)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    tokens = [t for t in _SPLIT.split(stripped.lower()) if t]
    if not tokens:
        return None
    key = _NON_ALPHA.sub("", tokens[0])
    return key or None


class ContextKey(NamedTuple):
    """Country/decade of origin; ``"--"`` and ``-1`` mean unknown."""

    country: str = UNKNOWN_COUNTRY
    decade: int = UNKNOWN_DECADE

    @property
    def known_country(self) -> bool:
        return self.country != UNKNOWN_COUNTRY

    @property
    def known_decade(self) -> bool:
        return self.decade != UNKNOWN_DECADE


def parse_country(value: str) -> str:
    value = value.strip()
    if value in ("", UNKNOWN_COUNTRY):
        return UNKNOWN_COUNTRY
    value = value.upper()
    if not _COUNTRY.match(value):
        raise ValueError(f"invalid country code {value!r}")
    return value


def parse_decade(value: str, decade_range=DECADE_RANGE) -> int:
    value = value.strip()
    if value in ("", "-", "-1"):
        return UNKNOWN_DECADE
    decade = int(value)
    lo, hi = decade_range
    if decade % 10 or not lo <= decade <= hi:
        raise ValueError(f"decade {decade} is not a multiple of 10 in [{lo}, {hi}]")
    return decade


def format_decade(decade: int) -> str:
    return "-" if decade == UNKNOWN_DECADE else str(decade)


@dataclass(frozen=True)
class SourceTable:
    """Observation weights of a single reference source.

    ``entries`` maps ``(name, ContextKey)`` to ``(wf, wm)``. ``skipped`` counts
    input rows whose name normalized to nothing; ``warning`` is set when
    post-stratification could not be applied.
    """

    source_id: str
    entries: Mapping[tuple[str, ContextKey], tuple[float, float]]
    stratified: bool = False
    skipped: int = 0
    warning: str | None = None

    def totals(self) -> tuple[float, float]:
        wf = math.fsum(v[0] for v in self.entries.values())
        wm = math.fsum(v[1] for v in self.entries.values())
        return wf, wm

    @property
    def names(self) -> set[str]:
        return {name for name, _ in self.entries}

    def __len__(self):
        return len(self.entries)


def _parse_weight(value: str) -> float:
    w = float(value)
    if not math.isfinite(w):
        raise ValueError("non-finite weight")
    return w


def ingest_source(path, source_id: str | None = None, decade_range=DECADE_RANGE) -> SourceTable:
    """Read one standardized reference TSV into a :class:`SourceTable`.

    Rows with the same normalized name and context are summed. Rows whose
    name normalizes to nothing are skipped and counted; rows with zero total
    weight carry no observation and are dropped.
    """
    path = Path(path)
    if source_id is None:
        source_id = path.stem
    if not source_id:
        raise ValueError("source_id must be nonempty")

    entries: dict[tuple[str, ContextKey], list[float]] = {}
    skipped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None:
            raise CorpusFormatError(path, None, "empty file")
        header = [h.strip().lower() for h in header]
        if tuple(header) != SOURCE_COLUMNS:
            raise CorpusFormatError(path, 1, f"expected header {'/'.join(SOURCE_COLUMNS)}, got {'/'.join(header)}")
        n_rows = 0
        for row in reader:
            lineno = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            n_rows += 1
            if len(row) != len(SOURCE_COLUMNS):
                raise CorpusFormatError(path, lineno, f"expected {len(SOURCE_COLUMNS)} columns, got {len(row)}")
            raw, decade_s, country_s, wf_s, wm_s = row
            try:
                decade = parse_decade(decade_s, decade_range)
            except ValueError as exc:
                raise CorpusFormatError(path, lineno, f"unparsable decade {decade_s!r} ({exc})") from None
            try:
                country = parse_country(country_s)
            except ValueError as exc:
                raise CorpusFormatError(path, lineno, str(exc)) from None
            try:
                wf, wm = _parse_weight(wf_s), _parse_weight(wm_s)
            except ValueError:
                raise CorpusFormatError(path, lineno, f"unparsable weight at line {lineno}") from None
            if wf < 0 or wm < 0:
                raise CorpusFormatError(path, lineno, f"negative weight at line {lineno}")
            name = normalize_name(raw)
            if name is None:
                skipped += 1
                continue
            acc = entries.setdefault((name, ContextKey(country, decade)), [0.0, 0.0])
            acc[0] += wf
            acc[1] += wm
    if n_rows == 0:
        raise CorpusFormatError(path, None, "empty file")
    return SourceTable(
        source_id,
        {k: (v[0], v[1]) for k, v in entries.items() if v[0] + v[1] > 0},
        skipped=skipped,
    )


def poststratify(table: SourceTable) -> SourceTable:
    """Upweight the smaller gender group so both totals are equal.

    If one group is entirely absent the scaling is undefined; the table is
    returned unchanged with ``warning`` set.
    """
    if table.stratified:
        raise ValueError(f"source {table.source_id!r} is already post-stratified")
    total_f, total_m = table.totals()
    if total_f <= 0 or total_m <= 0:
        msg = f"source {table.source_id!r} has only one gender group; not post-stratified"
        warnings.warn(msg, stacklevel=2)
        return SourceTable(table.source_id, table.entries, False, table.skipped, msg)
    if total_f == total_m:
        return SourceTable(table.source_id, table.entries, True, table.skipped)
    if total_f < total_m:
        k = total_m / total_f
        entries = {key: (wf * k, wm) for key, (wf, wm) in table.entries.items()}
    else:
        k = total_f / total_m
        entries = {key: (wf, wm * k) for key, (wf, wm) in table.entries.items()}
    return SourceTable(table.source_id, entries, True, table.skipped)


class NameTable:
    """Immutable aggregate of several sources, keyed by normalized name.

    Sources are stored in sorted ``source_id`` order so the table does not
    depend on the order in which sources were supplied. Names absent from
    every source are absent from the table.
    """

    def __init__(self, data: Mapping[str, Mapping[str, Mapping[ContextKey, tuple[float, float]]]]):
        self._data = {
            name: {sid: dict(sorted(ctx.items())) for sid, ctx in sorted(per_source.items())}
            for name, per_source in sorted(data.items())
        }
        self.sources = tuple(sorted({sid for per in self._data.values() for sid in per}))
        self.names = tuple(self._data)
        self._totals = {}
        self._pooled = {}
        country_totals: dict[str, float] = {}
        decade_totals: dict[int, float] = {}
        joint_totals: dict[ContextKey, float] = {}
        for name, per_source in self._data.items():
            pooled: dict[ContextKey, list[float]] = {}
            for ctx_map in per_source.values():
                for ctx, (wf, wm) in ctx_map.items():
                    acc = pooled.setdefault(ctx, [0.0, 0.0])
                    acc[0] += wf
                    acc[1] += wm
            pooled_t = {ctx: (v[0], v[1]) for ctx, v in sorted(pooled.items())}
            self._pooled[name] = pooled_t
            self._totals[name] = math.fsum(wf + wm for wf, wm in pooled_t.values())
            for ctx, (wf, wm) in pooled_t.items():
                w = wf + wm
                if ctx.known_country:
                    country_totals[ctx.country] = country_totals.get(ctx.country, 0.0) + w
                if ctx.known_decade:
                    decade_totals[ctx.decade] = decade_totals.get(ctx.decade, 0.0) + w
                if ctx.known_country and ctx.known_decade:
                    joint_totals[ctx] = joint_totals.get(ctx, 0.0) + w
        self.country_totals = dict(sorted(country_totals.items()))
        self.decade_totals = dict(sorted(decade_totals.items()))
        self.joint_totals = dict(sorted(joint_totals.items()))

    def __contains__(self, name):
        return name in self._data

    def __len__(self):
        return len(self._data)

    def __iter__(self):
        return iter(self.names)

    def __eq__(self, other):
        if not isinstance(other, NameTable):
            return NotImplemented
        return self._data == other._data

    def __repr__(self):
        return f"NameTable(n_names={len(self)}, sources={list(self.sources)})"

    def entries(self, name: str) -> dict[str, dict[ContextKey, tuple[float, float]]]:
        """Per-source, per-context ``(wf, wm)`` for ``name``."""
        return self._data[name]

    def pooled(self, name: str) -> dict[ContextKey, tuple[float, float]]:
        """Weights for ``name`` summed over sources, per context."""
        return self._pooled[name]

    def total_weight(self, name: str) -> float:
        return self._totals[name]

    def female_weight(self, name: str) -> float:
        return math.fsum(wf for wf, _ in self._pooled[name].values())

    def p_f(self, name: str) -> float:
        """Pooled empirical female proportion across all sources and contexts."""
        return self.female_weight(name) / self._totals[name]

    def p_f_by_source(self, name: str, countries=None, decades=None) -> dict[str, float]:
        """Female proportion per source, optionally restricted to contexts.

        Sources with no weight inside the restriction are omitted.
        """
        out = {}
        for sid, ctx_map in self._data[name].items():
            wf = wm = 0.0
            for ctx, (f, m) in ctx_map.items():
                if countries is not None and ctx.country not in countries:
                    continue
                if decades is not None and ctx.decade not in decades:
                    continue
                wf += f
                wm += m
            if wf + wm > 0:
                out[sid] = wf / (wf + wm)
        return out

    def average_p_f(self, name: str, countries=None, decades=None) -> float | None:
        """Unweighted mean of per-source proportions; ``None`` when nothing remains."""
        props = list(self.p_f_by_source(name, countries, decades).values())
        if not props:
            return None
        return math.fsum(props) / len(props)

    def source_names(self, source_id: str) -> list[str]:
        return [n for n, per in self._data.items() if source_id in per]

    def source_totals(self, source_id: str) -> tuple[float, float]:
        wf = math.fsum(f for per in self._data.values() for f, _ in per.get(source_id, {}).values())
        wm = math.fsum(m for per in self._data.values() for _, m in per.get(source_id, {}).values())
        return wf, wm

    def countries(self) -> set[str]:
        """All country codes present, including the unknown sentinel."""
        return {ctx.country for pooled in self._pooled.values() for ctx in pooled}

    def scaled(self, k: float) -> "NameTable":
        """Copy with every weight multiplied by ``k``."""
        return NameTable(
            {
                name: {sid: {ctx: (wf * k, wm * k) for ctx, (wf, wm) in cm.items()} for sid, cm in per.items()}
                for name, per in self._data.items()
            }
        )

    def swapped(self) -> "NameTable":
        """Copy with female and male weights exchanged."""
        return NameTable(
            {
                name: {sid: {ctx: (wm, wf) for ctx, (wf, wm) in cm.items()} for sid, cm in per.items()}
                for name, per in self._data.items()
            }
        )


def build_name_table(sources: Iterable[SourceTable]) -> NameTable:
    """Fold source tables into a :class:`NameTable`."""
    sources = list(sources)
    if not sources:
        raise ValueError("at least one source is required")
    seen = set()
    data: dict[str, dict[str, dict[ContextKey, tuple[float, float]]]] = {}
    for src in sources:
        if src.source_id in seen:
            raise ValueError(f"duplicate source_id {src.source_id!r}")
        seen.add(src.source_id)
        for (name, ctx), w in src.entries.items():
            data.setdefault(name, {}).setdefault(src.source_id, {})[ctx] = w
    return NameTable(data)


def ingest_directory(directory, stratify=True, decade_range=DECADE_RANGE) -> list[SourceTable]:
    """Ingest every ``*.tsv`` in ``directory`` in filename order.

    ``stratify`` is ``True`` (all sources), ``False`` (none), or a collection
    of source ids to post-stratify.
    """
    paths = sorted(Path(directory).glob("*.tsv"))
    if not paths:
        raise FileNotFoundError(f"no .tsv sources in {directory}")
    tables = []
    for p in paths:
        table = ingest_source(p, decade_range=decade_range)
        if stratify is True or (stratify and table.source_id in stratify):
            table = poststratify(table)
        tables.append(table)
    return tables


def write_name_table(table: NameTable, path) -> None:
    """Serialize to TSV; floats use ``repr`` so reading back is exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("\t".join(TABLE_COLUMNS) + "\n")
        for name in table.names:
            for sid, ctx_map in table.entries(name).items():
                for ctx, (wf, wm) in ctx_map.items():
                    fh.write(f"{name}\t{sid}\t{ctx.country}\t{format_decade(ctx.decade)}\t{wf!r}\t{wm!r}\n")


def read_name_table(path) -> NameTable:
    path = Path(path)
    data: dict[str, dict[str, dict[ContextKey, tuple[float, float]]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None:
            raise CorpusFormatError(path, None, "empty file")
        if tuple(h.strip().lower() for h in header) != TABLE_COLUMNS:
            raise CorpusFormatError(path, 1, f"expected header {'/'.join(TABLE_COLUMNS)}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(TABLE_COLUMNS):
                raise CorpusFormatError(path, reader.line_num, f"expected {len(TABLE_COLUMNS)} columns, got {len(row)}")
            name, sid, country, decade, wf, wm = row
            try:
                ctx = ContextKey(parse_country(country), parse_decade(decade, (-10**9, 10**9)))
                w = (_parse_weight(wf), _parse_weight(wm))
            except ValueError as exc:
                raise CorpusFormatError(path, reader.line_num, str(exc)) from None
            if w[0] < 0 or w[1] < 0:
                raise CorpusFormatError(path, reader.line_num, f"negative weight at line {reader.line_num}")
            data.setdefault(name, {}).setdefault(sid, {})[ctx] = w
    if not data:
        raise CorpusFormatError(path, None, "empty file")
    return NameTable(data)


def load_corpus(path, stratify=True) -> NameTable:
    """Load a serialized table (file) or ingest a directory of sources."""
    path = Path(path)
    if path.is_dir():
        return build_name_table(ingest_directory(path, stratify=stratify))
    return read_name_table(path)


def fixture_dir() -> Path:
    """Directory of the bundled reference sources."""
    return Path(__file__).parent / "data" / "fixture"


def load_fixture(stratify=True) -> NameTable:
    return build_name_table(ingest_directory(fixture_dir(), stratify=stratify))
