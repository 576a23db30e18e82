"""Command-line interface: ``namecct <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .classify import MajorityGuess, NameGenderClassifier, read_classifications, write_classifications
from .consensus import binarize_reports, cct_fit, write_fit
from .corpus import (
    CorpusFormatError,
    build_name_table,
    ingest_directory,
    load_corpus,
    normalize_name,
    write_name_table,
)
from .evaluation import bootstrap_paired_diff, evaluate, read_labeled_sample
from .taxonomy import NameTaxonomy, write_taxonomy

SUBCOMMANDS = ("ingest", "fit-cct", "classify", "taxonomy", "evaluate", "compare", "sources")


def read_queries(path, name_col="name", countries_col=None):
    """Query names (and optional country lists) from a plain list or a TSV.

    A file whose first line contains a tab is read as a TSV with a header;
    otherwise every nonblank line is one raw name.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines:
        return [], []
    if "\t" not in lines[0] and countries_col is None:
        names = [line for line in lines if line.strip()]
        return names, [None] * len(names)
    header = lines[0].split("\t")
    if name_col not in header:
        raise ValueError(f"{path}: no column {name_col!r} in header")
    ni = header.index(name_col)
    ci = None
    if countries_col is not None:
        if countries_col not in header:
            raise ValueError(f"{path}: no column {countries_col!r} in header")
        ci = header.index(countries_col)
    names, countries = [], []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split("\t")
        names.append(cells[ni])
        if ci is None or ci >= len(cells) or not cells[ci].strip():
            countries.append(None)
        else:
            countries.append([c.strip() for c in cells[ci].replace(";", ",").split(",") if c.strip()])
    return names, countries


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _emit(text, path):
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def _rows_json(header, rows):
    return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"


def cmd_ingest(args):
    if args.stratify == "all":
        stratify = True
    elif args.stratify == "none":
        stratify = False
    else:
        stratify = {s.strip() for s in args.stratify.split(",") if s.strip()}
    sources = ingest_directory(args.directory, stratify=stratify)
    table = build_name_table(sources)
    write_name_table(table, args.out)
    for src in sources:
        status = "stratified" if src.stratified else "pass-through"
        extra = f" ({src.warning})" if src.warning else ""
        print(f"{src.source_id}\t{len(src)} entries\t{src.skipped} skipped\t{status}{extra}", file=sys.stderr)
    print(f"wrote {len(table)} names from {len(sources)} sources to {args.out}", file=sys.stderr)
    return 0


def cmd_fit_cct(args):
    table = load_corpus(args.corpus)
    reports, skipped = binarize_reports(table)
    fit = cct_fit(reports, args.init_competence, args.tol, args.max_iter)
    comp, cons = write_fit(fit, args.out_prefix)
    print(f"names\t{reports.n_names}")
    print(f"sources\t{reports.n_sources}")
    print(f"skipped_names\t{len(skipped)}")
    print(f"iterations\t{fit.iterations}")
    print(f"converged\t{str(fit.converged).lower()}")
    print(f"competences\t{comp}")
    print(f"consensus\t{cons}")
    return 0


def _classifier(args, table):
    return NameGenderClassifier(
        estimator="cct" if args.estimator == "cct" else "average",
        band=args.band,
        entropy_threshold=args.entropy_threshold,
        coverage_threshold=args.coverage_threshold,
    ).fit(table)


def cmd_classify(args):
    table = load_corpus(args.corpus)
    clf = _classifier(args, table)
    names, countries = read_queries(args.input, args.name_col, args.countries_col)
    results = clf.classify_many(names, countries)
    if args.format == "json":
        header = ("name", "normalized", "label", "p_f", "basis", "taxon", "fallback")
        rows = [(c.name, c.normalized, c.label, c.p_f, c.basis, c.taxon.value, c.fallback) for c in results]
        _emit(_rows_json(header, rows), args.out)
    else:
        fh, close = _open_out(args.out)
        try:
            write_classifications(results, fh)
        finally:
            if close:
                fh.close()
    return 0


def cmd_taxonomy(args):
    table = load_corpus(args.corpus)
    tax = NameTaxonomy(args.entropy_threshold, args.coverage_threshold).fit(table)
    names, _ = read_queries(args.input, args.name_col)
    records = [tax.describe(raw)._replace(name=raw) for raw in names]
    if args.format == "json":
        header = ("name", "label", "H", "H_country", "H_decade", "total_weight")
        rows = [(r.name, r.label.value, r.entropy, r.entropy_country, r.entropy_decade, r.total_weight) for r in records]
        _emit(_rows_json(header, rows), args.out)
    else:
        fh, close = _open_out(args.out)
        try:
            write_taxonomy(records, fh)
        finally:
            if close:
                fh.close()
    return 0


def _aligned(preds, sample, path):
    if len(preds) != len(sample):
        raise ValueError(f"{path}: {len(preds)} predictions for {len(sample)} labeled rows")
    for i, (p, row) in enumerate(zip(preds, sample), start=2):
        if normalize_name(p.name) != normalize_name(row.name):
            raise ValueError(f"{path}:{i}: prediction for {p.name!r} does not match labeled name {row.name!r}")


def cmd_evaluate(args):
    sample = read_labeled_sample(args.labels)
    preds = read_classifications(args.preds)
    _aligned(preds, sample, args.preds)
    report = evaluate(preds, sample)
    _emit(report.to_json() if args.format == "json" else report.to_text(), args.out)
    return 0


def cmd_compare(args):
    sample = read_labeled_sample(args.labels)
    if args.a == "majority":
        counts = {"female": sum(r.label == "female" for r in sample), "male": sum(r.label == "male" for r in sample)}
        guess = MajorityGuess(counts)
        preds_a = [guess(r.name) for r in sample]
    else:
        preds_a = read_classifications(args.a)
        _aligned(preds_a, sample, args.a)
    preds_b = read_classifications(args.b)
    _aligned(preds_b, sample, args.b)
    res = bootstrap_paired_diff(preds_a, preds_b, sample, R=args.bootstrap, seed=args.seed)
    if args.format == "json":
        text = json.dumps({"seed": res.seed, "R": res.R, "n": res.n, "diff": res.diff,
                           "ci_low": res.ci_low, "ci_high": res.ci_high, "a": args.a, "b": args.b},
                          indent=2, sort_keys=True) + "\n"
    else:
        text = (
            f"# seed={res.seed} R={res.R} n={res.n} a={args.a} b={args.b}\n"
            "diff\tci_low\tci_high\n"
            f"{res.diff:g}\t{res.ci_low:g}\t{res.ci_high:g}\n"
        )
    _emit(text, args.out)
    return 0


def cmd_sources(args):
    table = load_corpus(args.corpus)
    reports, _ = binarize_reports(table)
    fit = cct_fit(reports, args.init_competence, args.tol, args.max_iter)
    comp = fit.competences()
    header = ("source_id", "n_names", "total_f", "total_m", "competence")
    rows = []
    for sid in table.sources:
        wf, wm = table.source_totals(sid)
        c = comp.get(sid)
        rows.append((sid, len(table.source_names(sid)), round(wf, 4), round(wm, 4),
                     None if c is None else round(c, 6)))
    if args.format == "json":
        text = _rows_json(header, rows)
    else:
        lines = ["\t".join(header)]
        for sid, n, wf, wm, c in rows:
            lines.append(f"{sid}\t{n}\t{wf:.4f}\t{wm:.4f}\t{'' if c is None else f'{c:.6f}'}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


def _add_taxonomy_flags(p):
    p.add_argument("--entropy-threshold", type=float, default=0.47, help="bits (default: 0.47)")
    p.add_argument("--coverage-threshold", type=float, default=10.0, help="observation weight (default: 10)")


def _add_cct_flags(p):
    p.add_argument("--init-competence", type=float, default=0.9)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="namecct", description="Consensus name-gender classification toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file with default flag values (flags on the command line win)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")

    p = sub.add_parser("ingest", help="build a corpus table from a directory of reference TSVs")
    p.add_argument("directory")
    p.add_argument("--out", required=True)
    p.add_argument("--stratify", default="all",
                   help="post-stratify 'all' (default), 'none', or a comma-separated list of source ids")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit-cct", help="fit the consensus model; write competences.tsv and consensus.tsv")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-prefix", required=True)
    _add_cct_flags(p)
    p.set_defaults(func=cmd_fit_cct)

    p = sub.add_parser("classify", help="classify a batch of names")
    p.add_argument("--corpus", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--name-col", default="name")
    p.add_argument("--countries-col", default=None)
    p.add_argument("--estimator", choices=("avg", "cct"), default="avg")
    p.add_argument("--band", type=float, default=0.0)
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--out", default=None)
    _add_taxonomy_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("taxonomy", help="assign taxonomy leaves to a batch of names")
    p.add_argument("--corpus", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--name-col", default="name")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--out", default=None)
    _add_taxonomy_flags(p)
    p.set_defaults(func=cmd_taxonomy)

    p = sub.add_parser("evaluate", help="score classifications against labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="bootstrap CI of the change in matches when B replaces A")
    p.add_argument("--a", required=True, help="classification TSV, or 'majority' for the guess-majority baseline")
    p.add_argument("--b", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--bootstrap", type=int, default=10000, metavar="R")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sources", help="per-source coverage and consensus competence")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--out", default=None)
    _add_cct_flags(p)
    p.set_defaults(func=cmd_sources)
    return parser


def _config_defaults(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config, encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ValueError(f"{known.config}: expected a JSON object")
    config = {k.replace("-", "_"): v for k, v in config.items()}
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in config.items() if k in dests})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _config_defaults(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except (CorpusFormatError, ValueError, KeyError, OSError) as exc:
        print(f"namecct: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
