"""
End to end through the command line
===================================

Writes a synthetic book to CSV, then runs every subcommand into a scratch
directory and prints the comparison table. The same steps work from a shell
as ``wrongway <command> ...``.
"""
import os
import tempfile
from pathlib import Path

from wrongway.cli import main
from wrongway.synthetic import synthetic_portfolio, write_portfolio

os.environ.setdefault("SOURCE_DATE_EPOCH", "0")
work = Path(tempfile.mkdtemp(prefix="wrongway-"))
x, cps = synthetic_portfolio(25, 200, seed=4)
e, c = write_portfolio(x, cps, work / "exposures.csv", work / "counterparties.csv")
book = ["--exposures", str(e), "--counterparties", str(c), "--grid-n", "200", "--alpha", "0.95,0.99"]

assert main(["report", "--exposures", str(e), "--out-dir", str(work / "report")]) == 0
assert main(["wcc", *book, "--out-dir", str(work / "wcc")]) == 0
assert main(["compare", *book, "--out-dir", str(work / "compare")]) == 0
assert main(["simulate", *book, "--coupling", str(work / "wcc" / "coupling_a0.99.csv"),
             "--n-draws", "100000", "--out-dir", str(work / "sim")]) == 0
assert main(["mps-export", *book, "--out-dir", str(work / "mps")]) == 0

print((work / "compare" / "compare_table.txt").read_text())
for d in sorted(p for p in work.iterdir() if p.is_dir()):
    print(d.name + ":", ", ".join(sorted(f.name for f in d.iterdir())))
