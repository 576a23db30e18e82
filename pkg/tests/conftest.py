import pytest

from namecct.corpus import ContextKey, NameTable, SourceTable, build_name_table, load_fixture


def make_table(layout):
    """Build a NameTable from ``{source: {name: {(country, decade): (wf, wm)}}}``.

    A bare ``(wf, wm)`` tuple in place of the context mapping means unknown context.
    """
    sources = []
    for sid, names in layout.items():
        entries = {}
        for name, ctx in names.items():
            if isinstance(ctx, tuple):
                ctx = {("--", -1): ctx}
            for (country, decade), w in ctx.items():
                entries[(name, ContextKey(country, decade))] = (float(w[0]), float(w[1]))
        sources.append(SourceTable(sid, entries, stratified=True))
    return build_name_table(sources)


@pytest.fixture(scope="session")
def fixture_table() -> NameTable:
    return load_fixture()


def write_tsv(path, rows, header=("name", "decade", "country", "wf", "wm")):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(str(x) for x in r) + "\n")
    return path
