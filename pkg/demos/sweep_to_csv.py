"""
Running a sweep and writing CSV
===============================

The same thing as ``bench run --config FILE --out PREFIX`` from Python.
"""

import sys
import tempfile
from pathlib import Path

from lowrank_mtl import bench

config = """
# noise sweep at a small scale
sweep_axis=sigma
sweep_values=0,0.5,1
d=20
r=2
m=10
T=100
n_seeds=2
estimators=nuc,mom,single,oracle
transfer=true
"""

out = Path(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp()) / "sigma_sweep"
records, aggregates = bench.run_sweep(bench.parse_config(config))
bench.write_csv(records, aggregates, out)

print(f"wrote {out}.raw.csv ({len(records)} rows) and {out}.agg.csv ({len(aggregates)} rows)")
print(Path(f"{out}.agg.csv").read_text().splitlines()[0])
