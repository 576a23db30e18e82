"""Turn consensus estimates into female/male/unclassified decisions."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .consensus import average_consensus, binarize_reports, cct_fit
from .corpus import NameTable, normalize_name, parse_country, parse_decade
from .taxonomy import TaxonLabel, TaxonomyParams, describe_name

FEMALE = "female"
MALE = "male"
UNCLASSIFIED = "unclassified"
LABELS = (FEMALE, MALE, UNCLASSIFIED)

_LABEL_ALIASES = {"f": FEMALE, "female": FEMALE, "w": FEMALE, "woman": FEMALE,
                  "m": MALE, "male": MALE, "man": MALE}


def parse_label(value: str) -> str:
    try:
        return _LABEL_ALIASES[value.strip().lower()]
    except KeyError:
        raise ValueError(f"unrecognized gender label {value!r}") from None


@dataclass(frozen=True)
class Classification:
    """Decision for one query name.

    ``basis`` is ``"average"``, ``"cct"``, ``"majority"`` or
    ``"country:XX,YY"`` / ``"decade:1980,..."`` for conditioned results.
    ``fallback`` marks a conditioned query that had no data in the requested
    contexts and fell back to the global estimate.
    """

    label: str
    p_f: float | None
    basis: str
    taxon: TaxonLabel
    name: str = ""
    normalized: str | None = None
    fallback: bool = False


def threshold(p_f: float | None, band: float = 0.0) -> str:
    """Female above ``0.5 + band``, male below ``0.5 - band``, otherwise abstain."""
    if p_f is None or math.isnan(p_f):
        return UNCLASSIFIED
    if p_f > 0.5 + band:
        return FEMALE
    if p_f < 0.5 - band:
        return MALE
    return UNCLASSIFIED


def _check_band(band):
    if not band >= 0:
        raise ValueError(f"abstention band must be >= 0, got {band}")


def classify(raw: str, table: NameTable, consensus: Mapping[str, float], basis: str = "average",
             band: float = 0.0, params: TaxonomyParams | None = None, taxon: TaxonLabel | None = None) -> Classification:
    """Classify one raw name with a precomputed ``name -> p_f`` consensus map."""
    _check_band(band)
    key = normalize_name(raw)
    if taxon is None:
        taxon = describe_name(key, table, params).label
    if key is None or key not in table:
        return Classification(UNCLASSIFIED, None, basis, TaxonLabel.NO_DATA, raw, key)
    p = consensus.get(key)
    return Classification(threshold(p, band), p, basis, taxon, raw, key)


def classify_conditioned(raw: str, countries: Sequence[str] | None, table: NameTable, band: float = 0.0,
                         decades: Sequence[int] | None = None, consensus: Mapping[str, float] | None = None,
                         params: TaxonomyParams | None = None, taxon: TaxonLabel | None = None) -> Classification:
    """Classify using only reference data from the given countries (and/or decades).

    The requested contexts are pooled; each source's proportion is computed
    over its restricted entries and the proportions are averaged across
    sources. With no data in the restriction the global estimate is returned
    with ``fallback=True``.
    """
    if countries is not None:
        countries = [parse_country(c) for c in countries]
        if not countries:
            raise ValueError("countries must be a nonempty list")
    if decades is not None:
        decades = [parse_decade(str(d)) for d in decades]
        if not decades:
            raise ValueError("decades must be a nonempty list")
    if countries is None and decades is None:
        raise ValueError("give countries and/or decades to condition on")
    _check_band(band)
    parts = []
    if countries is not None:
        parts.append("country:" + ",".join(countries))
    if decades is not None:
        parts.append("decade:" + ",".join(map(str, decades)))
    basis = ";".join(parts)

    key = normalize_name(raw)
    if taxon is None:
        taxon = describe_name(key, table, params).label
    if key is None or key not in table:
        return Classification(UNCLASSIFIED, None, basis, TaxonLabel.NO_DATA, raw, key, fallback=True)
    p = table.average_p_f(key, set(countries) if countries is not None else None,
                          set(decades) if decades is not None else None)
    if p is None:
        global_p = consensus.get(key) if consensus is not None else table.average_p_f(key)
        return Classification(threshold(global_p, band), global_p, basis, taxon, raw, key, fallback=True)
    return Classification(threshold(p, band), p, basis, taxon, raw, key)


class MajorityGuess:
    """Assigns every input the majority class seen in the training labels."""

    def __init__(self, counts: Mapping[str, int]):
        counts = {parse_label(k): int(v) for k, v in counts.items()}
        if not any(v > 0 for v in counts.values()):
            raise ValueError("at least one class count must be positive")
        self.counts = counts
        f, m = counts.get(FEMALE, 0), counts.get(MALE, 0)
        self.label = FEMALE if f > m else MALE if m > f else UNCLASSIFIED

    def __call__(self, raw: str, taxon: TaxonLabel = TaxonLabel.NO_DATA) -> Classification:
        return Classification(self.label, None, "majority", taxon, raw, normalize_name(raw))


def guess_majority(counts: Mapping[str, int]) -> Callable[[str], Classification]:
    """Classifier returning the majority class of ``counts``; ties abstain."""
    return MajorityGuess(counts)


class NameGenderClassifier(ClassifierMixin, BaseEstimator):
    """Name-based gender classifier over a reference :class:`NameTable`.

    Parameters
    ----------
    estimator : {"average", "cct"}, default="average"
        Simple source average, or the cultural consensus fit.
    band : float, default=0.0
        Abstention half-width around 0.5.
    entropy_threshold : float, default=0.47
    coverage_threshold : float, default=10
        Taxonomy parameters used to tag each result.
    init_competence, tol, max_iter
        Passed to the consensus fit when ``estimator="cct"``.

    Attributes
    ----------
    consensus_ : dict
        Normalized name to estimated probability of being gendered female.
    fit_ : ConsensusFit or None
    skipped_names_ : list of str
        Names dropped from the consensus fit because every source tied.
    classes_ : ndarray
    """

    def __init__(self, estimator="average", band=0.0, entropy_threshold=0.47, coverage_threshold=10.0,
                 init_competence=0.9, tol=1e-8, max_iter=500):
        self.estimator = estimator
        self.band = band
        self.entropy_threshold = entropy_threshold
        self.coverage_threshold = coverage_threshold
        self.init_competence = init_competence
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, table: NameTable, y=None):
        if not isinstance(table, NameTable):
            raise TypeError("fit expects a NameTable of reference data")
        _check_band(self.band)
        self.params_ = TaxonomyParams(self.entropy_threshold, self.coverage_threshold)
        self.table_ = table
        self.fit_ = None
        self.skipped_names_ = []
        if self.estimator in ("average", "avg"):
            self.consensus_ = average_consensus(table)
            self.basis_ = "average"
        elif self.estimator == "cct":
            reports, self.skipped_names_ = binarize_reports(table)
            self.fit_ = cct_fit(reports, self.init_competence, self.tol, self.max_iter)
            self.consensus_ = self.fit_.consensus()
            self.basis_ = "cct"
        else:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        self.classes_ = np.array([FEMALE, MALE])
        self._taxa = {}
        return self

    def taxon(self, key: str | None) -> TaxonLabel:
        check_is_fitted(self, "table_")
        if key not in self._taxa:
            self._taxa[key] = describe_name(key, self.table_, self.params_).label
        return self._taxa[key]

    def classify(self, raw: str, countries=None, decades=None) -> Classification:
        check_is_fitted(self, "table_")
        taxon = self.taxon(normalize_name(raw))
        if countries or decades:
            return classify_conditioned(raw, countries or None, self.table_, self.band, decades or None,
                                        self.consensus_, self.params_, taxon)
        return classify(raw, self.table_, self.consensus_, self.basis_, self.band, self.params_, taxon)

    def classify_many(self, names, countries=None) -> list[Classification]:
        countries = countries if countries is not None else [None] * len(names)
        return [self.classify(raw, c) for raw, c in zip(names, countries)]

    def predict(self, X):
        return np.array([c.label for c in self.classify_many(list(X))], dtype=object)

    def predict_proba(self, X):
        """Columns ``[P(female), P(male)]``; NaN rows for names without data."""
        p = np.array([np.nan if c.p_f is None else c.p_f for c in self.classify_many(list(X))])
        return np.column_stack([p, 1.0 - p])

    def score(self, X, y, sample_weight=None):
        """Correspondence: fraction of classified names whose label matches ``y``."""
        pred = self.predict(X)
        y = np.array([parse_label(v) for v in y], dtype=object)
        made = pred != UNCLASSIFIED
        return float(np.mean(pred[made] == y[made])) if made.any() else float("nan")


def format_p(p):
    return "" if p is None else f"{p:.6f}"


def write_classifications(results, fh) -> None:
    """Batch output TSV: name, normalized, label, p_f, basis, taxon."""
    fh.write("name\tnormalized\tlabel\tp_f\tbasis\ttaxon\n")
    for c in results:
        basis = c.basis + (" (fallback)" if c.fallback else "")
        fh.write(f"{c.name}\t{c.normalized or ''}\t{c.label}\t{format_p(c.p_f)}\t{basis}\t{c.taxon.value}\n")


def read_classifications(path) -> list[Classification]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        idx = {h: i for i, h in enumerate(header)}
        for col in ("name", "label", "p_f", "taxon"):
            if col not in idx:
                raise ValueError(f"{path}: missing column {col!r}")
        out = []
        for line in fh:
            if not line.strip():
                continue
            row = line.rstrip("\n").split("\t")
            label = row[idx["label"]]
            if label not in LABELS:
                raise ValueError(f"{path}: bad label {label!r}")
            p = row[idx["p_f"]]
            basis = row[idx["basis"]] if "basis" in idx else ""
            out.append(Classification(
                label, float(p) if p else None, basis.replace(" (fallback)", ""), TaxonLabel(row[idx["taxon"]]),
                row[idx["name"]], row[idx["normalized"]] if "normalized" in idx else normalize_name(row[idx["name"]]),
                basis.endswith("(fallback)"),
            ))
    return out
