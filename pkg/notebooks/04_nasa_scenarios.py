"""
The three NASA hide-the-tail splits
===================================

Needs the NASA capacity CSV (see ``scripts/nasa_mat_to_csv.py``), located via
``CELLGP_NASA_CSV`` or ``data/nasa_capacity.csv``. Each split fits a
two-latent model with ten restarts, which takes a few minutes per split.
"""

# %%
import sys

from cellgp.bench import PUBLISHED_ERRORS, run_scenario
from cellgp.data import BUILTIN_SCENARIOS, default_nasa_csv, load_csv
from cellgp.optimizer import OptimizerConfig

path = default_nasa_csv()
if path is None:
    sys.exit("NASA capacity CSV not found; see scripts/nasa_mat_to_csv.py")
series = load_csv(path)
print({s.cell_id: len(s) for s in series})

# %%
for name, sc in BUILTIN_SCENARIOS.items():
    rep = run_scenario(series, sc, R=2, cfg=OptimizerConfig(restarts=10, seed=0))
    pub = PUBLISHED_ERRORS[name]
    print(f"split {name} (target {sc.target_cell})")
    for row in rep.rows:
        key = "MCGP" if row.model == "mcgp" else "IGP"
        print(f"  {row.model:<11} MAE {row.mae:.3e}  (published {pub[key][0]:.3e})")
    print(f"  loglik {rep.loglik:.1f}  deviance {rep.deviance:.1f}")
