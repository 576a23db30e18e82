"""Evaluation of name-based classifiers against labeled samples."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .classify import FEMALE, MALE, UNCLASSIFIED, Classification, parse_label
from .corpus import NameTable, normalize_name
from .taxonomy import TaxonLabel


class LabeledRow(NamedTuple):
    name: str
    label: str
    countries: tuple[str, ...] = ()


def read_labeled_sample(path) -> list[LabeledRow]:
    """Read a TSV with columns ``name``, ``label`` and optionally ``country``.

    Several countries may be given in one cell, separated by ``,`` or ``;``.
    """
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        idx = {h.strip().lower(): i for i, h in enumerate(header)}
        if "name" not in idx or "label" not in idx:
            raise ValueError(f"{path}: need 'name' and 'label' columns")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            cells = line.rstrip("\n").split("\t")
            try:
                label = parse_label(cells[idx["label"]])
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            countries = ()
            if "country" in idx and idx["country"] < len(cells):
                countries = tuple(c for c in cells[idx["country"]].replace(";", ",").split(",") if c.strip())
            rows.append(LabeledRow(cells[idx["name"]], label, countries))
    if not rows:
        raise ValueError(f"{path}: empty labeled sample")
    return rows


def _labels(sample) -> np.ndarray:
    return np.array([r.label if isinstance(r, LabeledRow) else parse_label(r[1]) for r in sample], dtype=object)


def _check_aligned(preds, sample):
    if len(preds) != len(sample):
        raise ValueError(f"{len(preds)} predictions for {len(sample)} labeled rows")
    if len(sample) == 0:
        raise ValueError("empty labeled sample")


def match_vector(preds: Sequence[Classification], sample) -> np.ndarray:
    """1 where the prediction matches the label; abstentions count as 0."""
    _check_aligned(preds, sample)
    pred = np.array([p.label for p in preds], dtype=object)
    return (pred == _labels(sample)).astype(np.int64)


@dataclass
class TaxonStats:
    count: int
    n_classified: int
    coverage: float
    correspondence: float | None


@dataclass
class EvalReport:
    n: int
    n_classified: int
    coverage: float
    correspondence: float | None
    per_taxon: dict[str, TaxonStats]
    misclassification: dict[str, float | None]
    misclassified: dict[str, int]
    bias_error: int
    composition_estimate: float | None
    composition_target: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        def pct(v):
            return "     -" if v is None else f"{100 * v:6.2f}"

        lines = [
            f"n                     {self.n}",
            f"classified            {self.n_classified}",
            f"coverage (%)          {pct(self.coverage).strip()}",
            f"correspondence (%)    {pct(self.correspondence).strip()}",
            f"misclassified F / M   {self.misclassified[FEMALE]} / {self.misclassified[MALE]}",
            f"misclass. rate F (%)  {pct(self.misclassification[FEMALE]).strip()}",
            f"misclass. rate M (%)  {pct(self.misclassification[MALE]).strip()}",
            f"bias error (F - M)    {self.bias_error}",
            f"male share, est. (%)  {pct(self.composition_estimate).strip()}",
            f"male share, true (%)  {pct(self.composition_target).strip()}",
            "",
            f"{'taxon':<30}{'count':>7}{'cover%':>8}{'corr%':>8}",
        ]
        for label, s in self.per_taxon.items():
            lines.append(f"{label:<30}{s.count:>7}{pct(s.coverage):>8}{pct(s.correspondence):>8}")
        return "\n".join(lines) + "\n"


def evaluate(preds: Sequence[Classification], sample) -> EvalReport:
    """Coverage, correspondence, per-taxon breakdown and fairness counts.

    ``preds[i]`` is the classification of ``sample[i]``.
    """
    _check_aligned(preds, sample)
    truth = _labels(sample)
    pred = np.array([p.label for p in preds], dtype=object)
    made = pred != UNCLASSIFIED
    n, n_made = len(pred), int(made.sum())
    match = (pred == truth) & made

    per_taxon = {}
    taxa = np.array([p.taxon.value for p in preds], dtype=object)
    for label in TaxonLabel:
        sel = taxa == label.value
        cnt = int(sel.sum())
        k = int((sel & made).sum())
        per_taxon[label.value] = TaxonStats(
            cnt, k, k / cnt if cnt else 0.0, float(match[sel].sum() / k) if k else None
        )

    misclassified, rates = {}, {}
    for cls in (FEMALE, MALE):
        sel = (truth == cls) & made
        wrong = int((sel & ~match).sum())
        misclassified[cls] = wrong
        rates[cls] = wrong / int(sel.sum()) if sel.any() else None

    notes = []
    if n_made == 0:
        notes.append("no rows classified; correspondence undefined")
    return EvalReport(
        n=n,
        n_classified=n_made,
        coverage=n_made / n,
        correspondence=float(match.sum() / n_made) if n_made else None,
        per_taxon=per_taxon,
        misclassification=rates,
        misclassified=misclassified,
        bias_error=misclassified[FEMALE] - misclassified[MALE],
        composition_estimate=float((pred[made] == MALE).mean()) if n_made else None,
        composition_target=float((truth == MALE).mean()),
        notes=notes,
    )


class Band(NamedTuple):
    lo: float
    hi: float
    n: int
    strength: float
    correspondence: float
    expected: float


def reference_strength(table: NameTable, consensus: Mapping[str, float] | None = None) -> dict[str, float]:
    """``max(p_f, 1 - p_f)`` for every reference name."""
    out = {}
    for name in table.names:
        p = consensus.get(name) if consensus is not None else table.average_p_f(name)
        if p is not None:
            out[name] = max(p, 1.0 - p)
    return out


def calibration_bands(preds, sample, table: NameTable, n_bands=5, holdouts=(), edges=None,
                      consensus: Mapping[str, float] | None = None):
    """Correspondence by how strongly names are gendered in the reference data.

    Classified rows are grouped by reference strength ``s = max(p_f, 1 - p_f)``.
    Default band edges are quantiles of ``s`` over those rows, pinned to 0.5
    and 1.0; bands are ``[0.5, e1], (e1, e2], ...``. Each band reports the
    observed correspondence and the mean of ``s``, which is the correspondence
    expected of a classifier that knows only the name. Rows whose names are in
    ``holdouts`` are kept out of the bands and returned per name.

    Returns
    -------
    bands : list of Band
        Empty bands are omitted.
    held : dict
        Holdout name to Band over that name's rows.
    """
    _check_aligned(preds, sample)
    match = match_vector(preds, sample)
    strength = reference_strength(table, consensus)
    holdouts = {normalize_name(h) for h in holdouts}
    rows, held_rows = [], {}
    for i, p in enumerate(preds):
        if p.label == UNCLASSIFIED:
            continue
        key = p.normalized if p.normalized is not None else normalize_name(p.name)
        if key not in strength:
            continue
        if key in holdouts:
            held_rows.setdefault(key, []).append(i)
        else:
            rows.append(i)
    keys = [preds[i].normalized or normalize_name(preds[i].name) for i in rows]
    s = np.array([strength[k] for k in keys], dtype=float)
    m = match[rows].astype(float) if rows else np.array([])

    if edges is None:
        if s.size:
            inner = np.quantile(s, np.linspace(0, 1, n_bands + 1)[1:-1])
        else:
            inner = np.array([])
        edges = np.unique(np.concatenate([[0.5], np.clip(inner, 0.5, 1.0), [1.0]]))
    edges = np.asarray(edges, dtype=float)
    if edges[0] != 0.5 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
        raise ValueError("band edges must increase from 0.5 to 1.0")
    which = np.searchsorted(edges[1:-1], s, side="left")
    bands = []
    for b in range(len(edges) - 1):
        sel = which == b
        if not sel.any():
            continue
        bands.append(Band(float(edges[b]), float(edges[b + 1]), int(sel.sum()),
                          float(s[sel].mean()), float(m[sel].mean()), float(s[sel].mean())))
    held = {}
    for key, idx in sorted(held_rows.items()):
        sv = strength[key]
        held[key] = Band(sv, sv, len(idx), sv, float(match[idx].mean()), sv)
    return bands, held


class PairedDiff(NamedTuple):
    diff: float
    ci_low: float
    ci_high: float
    n: int
    R: int
    seed: int | None


_CHUNK = 256


def bootstrap_paired_diff(preds_a, preds_b, sample, R=10000, seed=None, alpha=0.05) -> PairedDiff:
    """Change in matched classifications when B is used in place of A.

    Rows are resampled with replacement; each resample's statistic is
    ``matches(B) - matches(A)``. The interval is the percentile interval over
    ``R`` resamples. Resamples are drawn in fixed-size blocks, each from its
    own stream spawned from ``seed``, so the result does not depend on how
    blocks are scheduled.
    """
    if R < 100:
        raise ValueError("R must be at least 100 for a meaningful interval")
    a = match_vector(preds_a, sample)
    b = match_vector(preds_b, sample)
    d = b - a
    n = d.size
    observed = float(d.sum())
    stats = np.empty(R, dtype=float)
    n_chunks = -(-R // _CHUNK)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    for k, ss in enumerate(streams):
        lo, hi = k * _CHUNK, min(R, (k + 1) * _CHUNK)
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, n, size=(hi - lo, n))
        stats[lo:hi] = d[idx].sum(axis=1)
    ci_low, ci_high = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return PairedDiff(observed, float(ci_low), float(ci_high), n, R, seed)
