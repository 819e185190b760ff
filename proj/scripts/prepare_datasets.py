#!/usr/bin/env python3
"""Writes the tabular datasets and their schema files into data/.

breast-cancer-wisconsin and wine come from the copies bundled with
scikit-learn. balance-scale is generated: the UCI file is the full
enumeration of the four attributes with a rule-defined class. car and
cylinder-bands are fetched from the UCI archive when it is reachable.
"""

import argparse
import csv
import itertools
import json
import sys
import urllib.request
from pathlib import Path

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"


def write_table(out_dir, name, header, rows, kinds, missing=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{name}.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    schema = {"header": True, "columns": [{"name": h, "kind": k} for h, k in zip(header, kinds)]}
    if missing is not None:
        schema["missing_tokens"] = missing
    with open(out_dir / f"{name}.schema.json", "w") as f:
        json.dump(schema, f, indent=2)
        f.write("\n")
    print(f"{name}: {len(rows)} rows")


def sklearn_table(out_dir, name, loader, label_names):
    bunch = loader()
    header = [n.replace(" ", "_") for n in bunch.feature_names] + ["class"]
    rows = [[repr(float(v)) for v in x] + [label_names[int(y)]] for x, y in zip(bunch.data, bunch.target)]
    write_table(out_dir, name, header, rows, ["numeric"] * len(bunch.feature_names) + ["label"])


def balance_scale(out_dir):
    rows = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        label = "L" if left > right else "R" if right > left else "B"
        rows.append([lw, ld, rw, rd, label])
    header = ["left_weight", "left_distance", "right_weight", "right_distance", "class"]
    write_table(out_dir, "balance-scale", header, rows, ["numeric"] * 4 + ["label"])


def fetch(url):
    with urllib.request.urlopen(url, timeout=30) as r:
        return r.read().decode("latin-1")


def car(out_dir):
    text = fetch(f"{UCI}/car/car.data")
    rows = [line.split(",") for line in text.splitlines() if line.strip()]
    header = ["buying", "maint", "doors", "persons", "lug_boot", "safety", "class"]
    write_table(out_dir, "car", header, rows, ["categorical"] * 6 + ["label"])


# Cylinder bands: 1-4 are identifiers, 5-20 categorical, 21-39 numeric, 40 the class.
BANDS_NAMES = [
    "timestamp", "cylinder_number", "customer", "job_number", "grain_screened", "ink_color", "proof_on_ctd_ink",
    "blade_mfg", "cylinder_division", "paper_type", "ink_type", "direct_steam", "solvent_type", "type_on_cylinder",
    "press_type", "press", "unit_number", "cylinder_size", "paper_mill_location", "plating_tank", "proof_cut",
    "viscosity", "caliper", "ink_temperature", "humifity", "roughness", "blade_pressure", "varnish_pct",
    "press_speed", "ink_pct", "solvent_pct", "esa_voltage", "esa_amperage", "wax", "hardener", "roller_durometer",
    "current_density", "anode_space_ratio", "chrome_content", "band_type",
]


def cylinder_bands(out_dir):
    text = fetch(f"{UCI}/cylinder-bands/bands.data")
    rows = []
    for line in text.splitlines():
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 40:
            continue
        rows.append([f.lower() for f in fields])
    kinds = ["ignore"] * 4 + ["categorical"] * 16 + ["numeric"] * 19 + ["label"]
    write_table(out_dir, "cylinder-bands", BANDS_NAMES, rows, kinds, missing=["?", ""])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    out = Path(args.out)

    from sklearn.datasets import load_breast_cancer, load_wine

    sklearn_table(out, "breast-cancer-wisconsin", load_breast_cancer, ["M", "B"])
    sklearn_table(out, "wine", load_wine, ["1", "2", "3"])
    balance_scale(out)

    failed = []
    for name, fn in [("car", car), ("cylinder-bands", cylinder_bands)]:
        try:
            fn(out)
        except OSError as e:
            failed.append(name)
            print(f"{name}: not available ({e})", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
