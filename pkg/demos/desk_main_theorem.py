"""Monte Carlo check of the line approximation on a small cube.

Runs the main experiment at reduced size and prints the report rows, then
writes them as a CSV scan table next to this script.  Takes seconds at
this size; raise N, the margin and sweeps for a serious run.
"""
import sys
from pathlib import Path

from hlgt.harness import ExperimentConfig, run_main_theorem, write_report_csv

# the 8x8 u-shaped path is the shortest with enough support; margin 1 lets it fit in N=5
cfg = ExperimentConfig(N=5, beta=0.6, kappa=1.7, l1=8, l2=8, margin=1, sweeps=256, chains=1)
rows = run_main_theorem(cfg)
for r in rows:
    shown = next((v for v in (r.estimate, r.theory, r.bound) if v is not None), None)
    value = "-" if shown is None else f"{shown:.6g}"
    err = "" if r.stderr is None else f" +- {r.stderr:.4f}"
    print(f"{r.quantity:>18}  {value}{err}  {r.verdict}  {r.note}".rstrip())

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).with_name("desk_main_theorem.csv")
with out.open("w", newline="") as fh:
    write_report_csv(rows, fh)
print("wrote", out)
