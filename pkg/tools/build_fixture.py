"""Rebuild the bundled fixture corpus from public name registries.

Raw inputs (not bundled, fetch them with pip):

    pip download --no-deps gender-detector==0.1.0 gender-guesser==0.4.0

``gender-detector`` ships aggregate counts from the US Social Security
Administration (via OpenGenderTracking), the UK Office for National
Statistics, the Montevideo civil registry and a Buenos Aires name list.
``gender-guesser`` ships Jörg Michael's ``nam_dict.txt`` (GFDL), which gives
per-country popularity codes.

Usage::

    python tools/build_fixture.py RAW_DIR src/namecct/data/fixture
"""

import argparse
import csv
import sys
import tarfile
import zipfile
from collections import defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from namecct.corpus import normalize_name  # noqa: E402

N_US, N_UK, N_UY = 2000, 600, 400
EXTRA = ["jean", "andrea", "kim", "leslie", "akira", "toru", "alexis", "jan", "anita", "jose", "fatima",
         "alexander", "madelyn", "abdellah", "garreth", "finneus", "maria", "ali", "nicola", "simone"]

# nam_dict.txt column order, mapped to ISO 3166-1 alpha-2
NAM_COUNTRIES = [
    "GB", "IE", "US", "IT", "MT", "PT", "ES", "FR", "BE", "LU", "NL", "DE", "DE", "AT",
    "CH", "IS", "DK", "NO", "SE", "FI", "EE", "LV", "LT", "PL", "CZ", "SK", "HU", "RO",
    "BG", "BA", "HR", "XK", "MK", "ME", "RS", "SI", "AL", "GR", "RU", "BY", "MD", "UA",
    "AM", "AZ", "GE", "KZ", "TR", "SA", "IL", "CN", "IN", "JP", "KR", "VN", "--",
]
NAM_SPLIT = {"M": (0.0, 1.0), "1M": (0.0, 1.0), "?M": (0.25, 0.75),
             "F": (1.0, 0.0), "1F": (1.0, 0.0), "?F": (0.75, 0.25), "?": (0.5, 0.5)}


def read_counts(fh, skip_header=True):
    """Rows of (raw name, count_male, count_female) from a gender-detector csv."""
    reader = csv.reader(fh)
    if skip_header:
        next(reader)
    for row in reader:
        if row[2] and row[3]:
            yield row[0], float(row[2]), float(row[3])


def top(rows, n):
    ranked = sorted(rows, key=lambda r: (-(r[1] + r[2]), r[0]))
    return [normalize_name(r[0]) for r in ranked[:n]]


def write(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("name\tdecade\tcountry\twf\twm\n")
        for name, decade, country, wf, wm in rows:
            fh.write(f"{name}\t{decade}\t{country}\t{wf:g}\t{wm:g}\n")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("raw_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args(argv)

    with tarfile.open(args.raw_dir / "gender-detector-0.1.0.tar.gz") as tar:
        def member(name):
            return (line.decode("latin-1") for line in tar.extractfile(f"gender-detector-0.1.0/gender_detector/data/{name}"))
        us = list(read_counts(member("usprocessed.csv")))
        uk = list(read_counts(member("ukprocessed.csv")))
        uy = list(read_counts(member("uyprocessed.csv"), skip_header=False))
        ar = [line.rstrip("\n").split(",") for line in member("arprocessed.csv")][1:]
    with zipfile.ZipFile(args.raw_dir / "gender_guesser-0.4.0-py2.py3-none-any.whl") as zf:
        nam = zf.read("gender_guesser/data/nam_dict.txt").decode("utf-8").splitlines()

    keep = set(top(us, N_US)) | set(top(uk, N_UK)) | set(top(uy, N_UY)) | set(EXTRA)
    keep.discard(None)

    def counted(rows, country):
        return sorted(
            (r[0], "-", country, r[2], r[1]) for r in rows if normalize_name(r[0]) in keep
        )

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write(args.out_dir / "ssa_us.tsv", counted(us, "US"))
    write(args.out_dir / "ons_uk.tsv", counted(uk, "GB"))
    write(args.out_dir / "montevideo_uy.tsv", counted(uy, "UY"))
    write(args.out_dir / "buenosaires_ar.tsv", sorted(
        (r[0], "-", "AR", 1.0 if r[4] == "female" else 0.0, 1.0 if r[4] == "male" else 0.0)
        for r in ar if r[4] in ("female", "male") and normalize_name(r[0]) in keep
    ))

    nam_rows = defaultdict(lambda: [0.0, 0.0])
    for line in nam:
        if not line or line[0] in "#=":
            continue
        code, raw = line.split()[:2]
        if code not in NAM_SPLIT or normalize_name(raw) not in keep:
            continue
        share_f, share_m = NAM_SPLIT[code]
        for country, ch in zip(NAM_COUNTRIES, line[30:30 + len(NAM_COUNTRIES)]):
            if ch.strip():
                w = 2.0 ** (int(ch, 16) - 1)
                acc = nam_rows[(raw.replace("+", ""), country)]
                acc[0] += share_f * w
                acc[1] += share_m * w
    write(args.out_dir / "namdict.tsv", sorted((n, "-", c, wf, wm) for (n, c), (wf, wm) in nam_rows.items()))


if __name__ == "__main__":
    main()
