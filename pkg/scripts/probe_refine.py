"""Reference run for the outlier-removal refit loop on clean and contaminated blobs."""
import argparse
import time

from milpmetric.active import remove_refit_loop
from milpmetric.data import SynthSpec, normalize, synth_generate
from milpmetric.models import FitParams
from milpmetric.solver import SolverParams

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--nodes", type=int, default=100)
args = ap.parse_args()
for kind, flips in (("outlier-injected", 3), ("gaussian-blobs", 0)):
    raw = synth_generate(SynthSpec(kind, 30, seed=args.seed, flips=flips))
    d, norm = normalize(raw)
    t = time.time()
    m, hist, kept = remove_refit_loop(d, FitParams(), SolverParams(node_limit=args.nodes), 3, norm)
    print(kind, "flipped", raw.meta.get("flipped"), f"{time.time() - t:.1f}s")
    for h in hist:
        print("  ", {k: h[k] for k in ("iteration", "n_points", "fit_outliers", "removed")},
              h.get("converged"), h.get("halted"))
