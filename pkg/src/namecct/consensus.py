"""Cultural consensus model fitted by expectation maximization.

Sources report each name as gendered female (1) or male (0). The model
alternates between the posterior probability ``z`` that each name's consensus
is female, given source competences, and each source's competence ``c`` as
its mean agreement with the current consensus.

Report matrices are laid out sklearn-style: one row per name (sample), one
column per source (feature), ``NaN`` where a source has no report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import NameTable

COMPETENCE_EPS = 1e-9
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ReportMatrix:
    """Binary reports, ``values[m, n]`` for name ``m`` and source ``n``."""

    values: np.ndarray
    names: tuple[str, ...]
    sources: tuple[str, ...]

    def __post_init__(self):
        check_reports(self.values)
        if self.values.shape != (len(self.names), len(self.sources)):
            raise ValueError("index lengths do not match the report matrix shape")

    @property
    def n_names(self):
        return self.values.shape[0]

    @property
    def n_sources(self):
        return self.values.shape[1]

    def flipped(self) -> "ReportMatrix":
        return ReportMatrix(1.0 - self.values, self.names, self.sources)


def check_reports(X) -> np.ndarray:
    """Validate a report matrix: entries in {0, 1, NaN}, no empty row or column."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise ValueError(f"expected a nonempty 2d report matrix, got shape {X.shape}")
    observed = ~np.isnan(X)
    if not np.all((X[observed] == 0) | (X[observed] == 1)):
        raise ValueError("reports must be exactly 0 or 1 (NaN for missing)")
    if not observed.any(axis=1).all():
        raise ValueError("every name needs at least one report")
    if not observed.any(axis=0).all():
        raise ValueError("every source needs at least one report")
    return X


def binarize_reports(table: NameTable) -> tuple[ReportMatrix, list[str]]:
    """Threshold each source's female proportion at 0.5.

    Exact ties (within ``1e-12``) are treated as missing. Names left with no
    report at all are dropped and returned as the second element.
    """
    if len(table) == 0:
        raise ValueError("empty name table")
    sources = table.sources
    col = {s: j for j, s in enumerate(sources)}
    rows, kept, skipped = [], [], []
    for name in table.names:
        row = np.full(len(sources), np.nan)
        for sid, p in table.p_f_by_source(name).items():
            if abs(p - 0.5) <= TIE_TOL:
                continue
            row[col[sid]] = 1.0 if p > 0.5 else 0.0
        if np.isnan(row).all():
            skipped.append(name)
            continue
        rows.append(row)
        kept.append(name)
    values = np.vstack(rows) if rows else np.empty((0, len(sources)))
    active = ~np.isnan(values).all(axis=0)
    return ReportMatrix(values[:, active], tuple(kept), tuple(s for s, a in zip(sources, active) if a)), skipped


def _sorted_sum(a, axis):
    # sorted values in a fixed memory layout: the sum no longer depends on
    # row/column order or on whether the input was C- or F-ordered
    return np.ascontiguousarray(np.sort(a, axis=axis)).sum(axis=axis)


def _sym_sigmoid(d):
    # sigmoid with _sym_sigmoid(-d) == 1 - _sym_sigmoid(d) exactly: the branch
    # >= 0.5 is computed directly and the other by an exact subtraction
    pos = 1.0 / (1.0 + np.exp(-np.abs(d)))
    return np.where(d >= 0, pos, 1.0 - pos)


def _log_odds(X, c):
    c = np.clip(np.asarray(c, dtype=float), COMPETENCE_EPS, 1 - COMPETENCE_EPS)
    log_c, log_1c = np.log(c), np.log1p(-c)
    observed = ~np.isnan(X)
    ones = observed & (X == 1)
    zeros = observed & (X == 0)
    # log P(x | y=1) and log P(x | y=0), summed over reporting sources only
    a = np.where(ones, log_c, 0.0) + np.where(zeros, log_1c, 0.0)
    b = np.where(ones, log_1c, 0.0) + np.where(zeros, log_c, 0.0)
    return _sorted_sum(a, 1) - _sorted_sum(b, 1)


def cct_expectation(X, c) -> np.ndarray:
    """Posterior probability that each name's consensus is female.

    Products over reporting sources are taken in log space with competences
    clamped to ``[1e-9, 1 - 1e-9]``.
    """
    X = X.values if isinstance(X, ReportMatrix) else np.asarray(X, dtype=float)
    return _sym_sigmoid(_log_odds(X, c))


def cct_maximization(X, z) -> np.ndarray:
    """Each source's mean agreement with the consensus over the names it reports."""
    X = X.values if isinstance(X, ReportMatrix) else np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    observed = ~np.isnan(X)
    zf = np.broadcast_to(z[:, None], X.shape)
    agree = np.where(X == 1, zf, 1.0 - zf)
    agree = np.where(observed, agree, 0.0)
    return _sorted_sum(agree, 0) / observed.sum(axis=0)


@dataclass(frozen=True)
class ConsensusFit:
    """Consensus ``z`` per name and competence ``c`` per source at an EM fixed point."""

    z: np.ndarray
    c: np.ndarray
    iterations: int
    converged: bool
    names: tuple[str, ...] = ()
    sources: tuple[str, ...] = ()

    def consensus(self) -> dict[str, float]:
        return dict(zip(self.names, self.z.tolist()))

    def competences(self) -> dict[str, float]:
        return dict(zip(self.sources, self.c.tolist()))


def _em(X, c0, tol, max_iter):
    # agreement is taken from sigmoid(+d) / sigmoid(-d) rather than 1 - z, so
    # flipped reports (d -> -d) give bit-identical competences
    observed = ~np.isnan(X)
    counts = observed.sum(axis=0)
    c = np.full(X.shape[1], float(c0)) if np.ndim(c0) == 0 else np.asarray(c0, dtype=float).copy()
    z = None
    for it in range(1, max_iter + 1):
        d = _log_odds(X, c)
        z_new = _sym_sigmoid(d)
        p_agree = np.where(X == 1, z_new[:, None], _sym_sigmoid(-d)[:, None])
        c_new = _sorted_sum(np.where(observed, p_agree, 0.0), 0) / counts
        done = z is not None and np.max(np.abs(z_new - z)) < tol and np.max(np.abs(c_new - c)) < tol
        z, c = z_new, c_new
        if done:
            return z, c, it, True
    return z, c, max_iter, False


def cct_fit(X, c0=0.9, tol=1e-8, max_iter=500) -> ConsensusFit:
    """Alternate expectation and maximization steps until neither moves by ``tol``.

    Parameters
    ----------
    X : ReportMatrix or array of shape (n_names, n_sources)
        Binary reports, ``NaN`` for missing.
    c0 : float, default=0.9
        Initial competence for every source; must lie in (0.5, 1).
    tol : float, default=1e-8
        Max-norm stopping tolerance on both ``z`` and ``c``.
    max_iter : int, default=500

    Returns
    -------
    ConsensusFit
        ``converged`` is False when ``max_iter`` was reached first.
    """
    if not 0.5 < c0 < 1:
        raise ValueError(f"initial competence must lie in (0.5, 1), got {c0}")
    if isinstance(X, ReportMatrix):
        names, sources, values = X.names, X.sources, X.values
    else:
        values = check_reports(X)
        names, sources = (), ()
    z, c, it, ok = _em(values, c0, tol, max_iter)
    return ConsensusFit(z, c, it, ok, tuple(names), tuple(sources))


def average_consensus(table: NameTable) -> dict[str, float]:
    """Unweighted mean of per-source female proportions for every name."""
    if len(table) == 0:
        raise ValueError("empty name table")
    return {name: table.average_p_f(name) for name in table.names}


def synth_generate(c_true, z_true, seed=None) -> ReportMatrix:
    """Dense synthetic reports: each source reports the planted consensus with
    probability equal to its competence, the opposite label otherwise."""
    c_true = np.asarray(c_true, dtype=float)
    z_true = np.asarray(z_true)
    if np.any((c_true <= 0.5) | (c_true > 1)):
        raise ValueError("planted competences must lie in (0.5, 1]")
    if not np.isin(z_true, (0, 1)).all():
        raise ValueError("planted consensus must be binary")
    rng = np.random.default_rng(seed)
    correct = rng.random((z_true.size, c_true.size)) < c_true[None, :]
    values = np.where(correct, z_true[:, None], 1 - z_true[:, None]).astype(float)
    return ReportMatrix(
        values,
        tuple(f"name{m}" for m in range(z_true.size)),
        tuple(f"source{n}" for n in range(c_true.size)),
    )


class CulturalConsensus(TransformerMixin, BaseEstimator):
    """Consensus/competence estimator over a binary report matrix.

    Parameters
    ----------
    init_competence : float, default=0.9
        Starting competence of every source, in (0.5, 1).
    tol : float, default=1e-8
    max_iter : int, default=500

    Attributes
    ----------
    consensus_ : ndarray of shape (n_names,)
        Posterior probability that each training name is gendered female.
    competence_ : ndarray of shape (n_sources,)
    n_iter_ : int
    converged_ : bool
    n_features_in_ : int
        Number of sources.
    """

    def __init__(self, init_competence=0.9, tol=1e-8, max_iter=500):
        self.init_competence = init_competence
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        values = X.values if isinstance(X, ReportMatrix) else check_reports(X)
        fit = cct_fit(values, self.init_competence, self.tol, self.max_iter)
        self.consensus_ = fit.z
        self.competence_ = fit.c
        self.n_iter_ = fit.iterations
        self.converged_ = fit.converged
        self.n_features_in_ = values.shape[1]
        return self

    def _reports(self, X):
        check_is_fitted(self, "competence_")
        X = np.asarray(X.values if isinstance(X, ReportMatrix) else X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} source columns, got shape {X.shape}")
        return X

    def transform(self, X):
        """Consensus probability for each row, using the fitted competences.

        Rows with no report get 0.5.
        """
        return cct_expectation(self._reports(X), self.competence_)[:, None]

    def predict_proba(self, X):
        z = cct_expectation(self._reports(X), self.competence_)
        return np.column_stack([1.0 - z, z])

    def predict(self, X):
        """1 where the consensus leans female, 0 where male, -1 at exactly 0.5."""
        z = cct_expectation(self._reports(X), self.competence_)
        return np.where(z > 0.5, 1, np.where(z < 0.5, 0, -1))


def write_fit(fit: ConsensusFit, prefix) -> tuple[Path, Path]:
    """Write ``<prefix>competences.tsv`` and ``<prefix>consensus.tsv``."""
    prefix = str(prefix)
    comp, cons = Path(prefix + "competences.tsv"), Path(prefix + "consensus.tsv")
    with open(comp, "w", encoding="utf-8") as fh:
        fh.write("source_id\tc\n")
        for sid, c in zip(fit.sources, fit.c.tolist()):
            fh.write(f"{sid}\t{c!r}\n")
    with open(cons, "w", encoding="utf-8") as fh:
        fh.write("name\tz\n")
        for name, z in zip(fit.names, fit.z.tolist()):
            fh.write(f"{name}\t{z!r}\n")
    return comp, cons


def read_fit(prefix) -> tuple[dict[str, float], dict[str, float]]:
    """Read back ``(competences, consensus)`` written by :func:`write_fit`."""
    prefix = str(prefix)
    out = []
    for suffix in ("competences.tsv", "consensus.tsv"):
        with open(prefix + suffix, encoding="utf-8") as fh:
            next(fh)
            rows = (line.rstrip("\n").split("\t") for line in fh if line.strip())
            out.append({k: float(v) for k, v in rows})
    return out[0], out[1]


def agreement_rate(reports: ReportMatrix, z_true) -> np.ndarray:
    """Fraction of each source's reports that match a known consensus."""
    X = reports.values
    observed = ~np.isnan(X)
    match = (X == np.asarray(z_true)[:, None]) & observed
    return match.sum(axis=0) / observed.sum(axis=0)


def expected_agreement_sd(c: float, m: int) -> float:
    return math.sqrt(c * (1 - c) / m)
