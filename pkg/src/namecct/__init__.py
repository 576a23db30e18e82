"""Consensus-based name-gender classification from open reference data."""

__version__ = "0.1.0"

from .classify import (
    FEMALE,
    MALE,
    UNCLASSIFIED,
    Classification,
    NameGenderClassifier,
    classify,
    classify_conditioned,
    guess_majority,
)
from .consensus import (
    ConsensusFit,
    CulturalConsensus,
    ReportMatrix,
    average_consensus,
    binarize_reports,
    cct_expectation,
    cct_fit,
    cct_maximization,
    synth_generate,
)
from .corpus import (
    ContextKey,
    NameTable,
    SourceTable,
    build_name_table,
    ingest_source,
    load_corpus,
    load_fixture,
    normalize_name,
    poststratify,
)
from .evaluation import EvalReport, bootstrap_paired_diff, calibration_bands, evaluate
from .taxonomy import NameTaxonomy, TaxonLabel, TaxonomyParams, assign_taxon, conditional_entropy, entropy
