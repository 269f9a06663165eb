"""The command-line pipeline, end to end, in a temporary directory.

Equivalent shell session:

    volevent simulate --out data --seed 1
    volevent study --set data.prices=data/prices.csv --set data.cases=data/cases.csv --out results
    volevent regress --set data.prices=data/prices.csv --set data.cases=data/cases.csv --out results
    volevent fit C001 --set data.prices=data/prices.csv --set data.cases=data/cases.csv --out results

    python3 notebooks/05_command_line.py
"""

import tempfile
from pathlib import Path

from volevent.cli import main

root = Path(tempfile.mkdtemp())
data, out = root / "data", root / "results"
inputs = ["--set", f"data.prices={data / 'prices.csv'}", "--set", f"data.cases={data / 'cases.csv'}"]

main(["simulate", "--out", str(data), "--seed", "1", "--set", "simulate.K=45"])
main(["study", *inputs, "--out", str(out), "--set", "bootstrap.replications=500"])
main(["regress", *inputs, "--out", str(out)])
main(["fit", "C001", *inputs, "--out", str(out), "--window=-2d,+2d"])
print(sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()))
