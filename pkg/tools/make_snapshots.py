"""Regenerate the frozen CLI outputs in tests/snapshots from the bundled fixture.

Run only when an output format changes on purpose; the acceptance suite
compares fresh runs against these files byte for byte.
"""

from pathlib import Path

from namecct.cli import main
from namecct.corpus import fixture_dir, load_fixture

SNAP = Path(__file__).resolve().parent.parent / "tests" / "snapshots"

EXTRA = [
    ("José-María", "ES"), ("JEAN", "FR"), ("Jean", "US"), ("Andrea", "IT"), ("Andrea", ""),
    ("O'Brien", ""), ("  maría  ", ""), ("Kim", "KR"), ("Zoë", ""), ("Ngozi", "ZZ"),
    ("", ""), ("123", ""), ("Dr. Smith", ""), ("Leslie", "GB,US"), ("Akira", "JP"),
]

COMMANDS = {
    "classify_avg.tsv": ["classify", "--countries-col", "country"],
    "classify_cct.tsv": ["classify", "--countries-col", "country", "--estimator", "cct", "--band", "0.1"],
    "taxonomy.tsv": ["taxonomy"],
}


def write_queries(path):
    names = load_fixture().names[::10]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("name\tcountry\n")
        for n in names:
            fh.write(f"{n.capitalize()}\t\n")
        for n, c in EXTRA:
            fh.write(f"{n}\t{c}\n")


def snapshot_argv(name, queries, out):
    if name == "sources.tsv":
        return ["sources", "--corpus", str(fixture_dir()), "--out", str(out)]
    return [*COMMANDS[name][:1], "--corpus", str(fixture_dir()), "--input", str(queries),
            *COMMANDS[name][1:], "--out", str(out)]


SNAPSHOTS = [*COMMANDS, "sources.tsv"]

if __name__ == "__main__":
    queries = SNAP / "queries.tsv"
    write_queries(queries)
    for name in SNAPSHOTS:
        assert main(snapshot_argv(name, queries, SNAP / name)) == 0
        print("wrote", SNAP / name)
