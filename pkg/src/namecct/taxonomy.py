"""Entropy-based taxonomy of names.

A name is informative when the entropy of its empirical gender distribution
is at most ``entropy_threshold`` bits (0.47 bits is a 0.9/0.1 split).
Uninformative names are checked again after conditioning on country or
decade of origin, using Bayes' rule to weigh the strata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, NamedTuple

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import ContextKey, NameTable, normalize_name


class TaxonLabel(str, Enum):
    NO_DATA = "NoData"
    GENDERED_HIGH_COVERAGE = "GenderedHighCoverage"
    GENDERED_LOW_COVERAGE = "GenderedLowCoverage"
    CONDITIONALLY_GENDERED_COUNTRY = "ConditionallyGenderedCountry"
    CONDITIONALLY_GENDERED_DECADE = "ConditionallyGenderedDecade"
    WEAKLY_GENDERED = "WeaklyGendered"

    def __str__(self):
        return self.value


class Conditioning(str, Enum):
    COUNTRY = "country"
    DECADE = "decade"
    COUNTRY_AND_DECADE = "country_and_decade"


@dataclass(frozen=True)
class TaxonomyParams:
    """Thresholds and context priors.

    ``country_prior`` / ``decade_prior`` map a country code / decade to its
    prior probability; ``None`` means uniform over contexts seen in the corpus.
    """

    entropy_threshold: float = 0.47
    coverage_threshold: float = 10.0
    country_prior: Mapping[str, float] | None = None
    decade_prior: Mapping[int, float] | None = None
    joint_prior: Mapping[ContextKey, float] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 < self.entropy_threshold <= 1:
            raise ValueError("entropy_threshold must lie in (0, 1]")
        if not self.coverage_threshold > 0:
            raise ValueError("coverage_threshold must be positive")
        for prior in (self.country_prior, self.decade_prior, self.joint_prior):
            if prior is None:
                continue
            if any(p < 0 for p in prior.values()):
                raise ValueError("prior probabilities must be nonnegative")
            if abs(math.fsum(prior.values()) - 1.0) > 1e-9:
                raise ValueError("supplied prior must sum to 1")


def entropy(p_f: float) -> float:
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    if not 0.0 <= p_f <= 1.0:
        raise ValueError(f"probability out of range: {p_f}")
    h = 0.0
    for p in (p_f, 1.0 - p_f):
        if p > 0:
            h -= p * math.log2(p)
    return h


class ConditionalEntropy(NamedTuple):
    """Result of conditioning a name's gender distribution on a context.

    ``marginal`` is the entropy of the stratum mixture under the same
    posterior weights, so ``bits <= marginal`` always holds. ``vacuous`` is
    set when no known stratum carries weight and ``bits`` falls back to the
    unconditional entropy.
    """

    bits: float
    marginal: float
    vacuous: bool
    posterior: dict


def _strata(table: NameTable, name: str, by: Conditioning):
    pooled = table.pooled(name)
    strata: dict = {}
    for ctx, (wf, wm) in pooled.items():
        if by is Conditioning.COUNTRY:
            if not ctx.known_country:
                continue
            key = ctx.country
        elif by is Conditioning.DECADE:
            if not ctx.known_decade:
                continue
            key = ctx.decade
        else:
            if not (ctx.known_country and ctx.known_decade):
                continue
            key = ctx
        acc = strata.setdefault(key, [0.0, 0.0])
        acc[0] += wf
        acc[1] += wm
    return strata


def _context_totals(table: NameTable, by: Conditioning):
    if by is Conditioning.COUNTRY:
        return table.country_totals
    if by is Conditioning.DECADE:
        return table.decade_totals
    return table.joint_totals


def _prior(params: TaxonomyParams, by: Conditioning):
    if by is Conditioning.COUNTRY:
        return params.country_prior
    if by is Conditioning.DECADE:
        return params.decade_prior
    return params.joint_prior


def conditional_entropy(name: str, by, table: NameTable, params: TaxonomyParams | None = None) -> ConditionalEntropy:
    """Expected entropy of ``name`` after conditioning on country and/or decade.

    Strata are weighted by ``P(context | name)``, proportional to
    ``P(name | context) * P(context)`` where ``P(name | context)`` is the
    name's share of all weight observed in that context. Unknown contexts
    are ignored.
    """
    params = params or TaxonomyParams()
    by = Conditioning(by)
    if name not in table:
        raise KeyError(name)
    totals = _context_totals(table, by)
    prior = _prior(params, by)
    uniform = 1.0 / len(totals) if totals else 0.0
    strata = _strata(table, name, by)
    scores = {}
    for key, (wf, wm) in strata.items():
        w = wf + wm
        if w <= 0:
            continue
        p_ctx = uniform if prior is None else prior.get(key, 0.0)
        score = (w / totals[key]) * p_ctx
        if score > 0:
            scores[key] = score
    if not scores:
        h = entropy(table.p_f(name))
        return ConditionalEntropy(h, h, True, {})
    norm = math.fsum(scores.values())
    posterior = {k: s / norm for k, s in scores.items()}
    bits = math.fsum(post * entropy(strata[k][0] / (strata[k][0] + strata[k][1])) for k, post in posterior.items())
    mix = math.fsum(post * strata[k][0] / (strata[k][0] + strata[k][1]) for k, post in posterior.items())
    marginal = entropy(min(max(mix, 0.0), 1.0))
    return ConditionalEntropy(bits, marginal, False, posterior)


class TaxonRecord(NamedTuple):
    name: str
    label: TaxonLabel
    entropy: float | None = None
    entropy_country: float | None = None
    entropy_decade: float | None = None
    total_weight: float | None = None


def describe_name(name: str | None, table: NameTable, params: TaxonomyParams | None = None) -> TaxonRecord:
    """Taxon label plus the entropies that decided it."""
    params = params or TaxonomyParams()
    if name is None or name not in table:
        return TaxonRecord(name or "", TaxonLabel.NO_DATA)
    total = table.total_weight(name)
    h = entropy(table.p_f(name))
    if h <= params.entropy_threshold:
        label = (
            TaxonLabel.GENDERED_HIGH_COVERAGE if total >= params.coverage_threshold
            else TaxonLabel.GENDERED_LOW_COVERAGE
        )
        return TaxonRecord(name, label, h, None, None, total)
    h_country = conditional_entropy(name, Conditioning.COUNTRY, table, params).bits
    h_decade = conditional_entropy(name, Conditioning.DECADE, table, params).bits
    if h_country <= params.entropy_threshold:
        label = TaxonLabel.CONDITIONALLY_GENDERED_COUNTRY
    elif h_decade <= params.entropy_threshold:
        label = TaxonLabel.CONDITIONALLY_GENDERED_DECADE
    else:
        label = TaxonLabel.WEAKLY_GENDERED
    return TaxonRecord(name, label, h, h_country, h_decade, total)


def assign_taxon(name: str | None, table: NameTable, params: TaxonomyParams | None = None) -> TaxonLabel:
    """Place a normalized name in exactly one of the six taxonomy leaves."""
    return describe_name(name, table, params).label


class NameTaxonomy(TransformerMixin, BaseEstimator):
    """Assigns taxonomy leaves to raw names against a reference table.

    Parameters
    ----------
    entropy_threshold : float, default=0.47
    coverage_threshold : float, default=10
    country_prior, decade_prior : mapping or None, default=None
        ``None`` is the uninformative prior.
    """

    def __init__(self, entropy_threshold=0.47, coverage_threshold=10.0, country_prior=None, decade_prior=None):
        self.entropy_threshold = entropy_threshold
        self.coverage_threshold = coverage_threshold
        self.country_prior = country_prior
        self.decade_prior = decade_prior

    def fit(self, table: NameTable, y=None):
        if not isinstance(table, NameTable):
            raise TypeError("NameTaxonomy.fit expects a NameTable")
        self.params_ = TaxonomyParams(
            self.entropy_threshold, self.coverage_threshold, self.country_prior, self.decade_prior
        )
        self.table_ = table
        self._cache = {}
        return self

    def describe(self, raw: str) -> TaxonRecord:
        check_is_fitted(self, "table_")
        key = normalize_name(raw)
        if key not in self._cache:
            self._cache[key] = describe_name(key, self.table_, self.params_)
        return self._cache[key]

    def transform(self, X):
        """Taxon label for every raw name in ``X``."""
        return [self.describe(raw).label for raw in X]


def write_taxonomy(records, fh) -> None:
    """Write ``taxonomy.tsv`` rows: name, label, H, H_country, H_decade, total_weight."""

    def fmt(v):
        return "" if v is None else f"{v:.6f}"

    fh.write("name\tlabel\tH\tH_country\tH_decade\ttotal_weight\n")
    for r in records:
        fh.write(
            f"{r.name}\t{r.label.value}\t{fmt(r.entropy)}\t{fmt(r.entropy_country)}"
            f"\t{fmt(r.entropy_decade)}\t{'' if r.total_weight is None else f'{r.total_weight:.4f}'}\n"
        )
