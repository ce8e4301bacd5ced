"""Reference runs for the K-NN model and the Gershgorin and sparsification extensions."""
import argparse
import time

import numpy as np

from milpmetric.data import SynthSpec, normalize, synth_generate
from milpmetric.metric import check_feasibility, eigen_sym
from milpmetric.models import FitParams, fit
from milpmetric.solver import SolverParams

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--nodes", type=int, default=100)
ap.add_argument("--which", default="knn,gersh,sparse")
args = ap.parse_args()
sp = SolverParams(node_limit=args.nodes)
which = args.which.split(",")

if "knn" in which:
    raw = synth_generate(SynthSpec("gaussian-blobs", 10, seed=args.seed, n_classes=3))
    d, norm = normalize(raw)
    t = time.time()
    r = fit(d, FitParams(K=3), sp, norm)
    feas = check_feasibility(r.metric.with_norm(None), d, 3, r.outliers)
    print("knn", f"{time.time() - t:.1f}s", r.solution.stats(False), r.breakdown.to_dict(),
          "counts", feas.counts.tolist())

for name, fp in (("gersh", FitParams(gershgorin=True)), ("sparse", FitParams(sparsify_U=1))):
    if name not in which:
        continue
    raw = synth_generate(SynthSpec("two-lines", 10, seed=args.seed))
    d, norm = normalize(raw)
    t = time.time()
    r = fit(d, fp, sp, norm)
    B = r.metric.B
    dom = [B[k, k] - (np.abs(B[k]).sum() - abs(B[k, k])) for k in range(len(B))]
    print(name, f"{time.time() - t:.1f}s", r.solution.stats(False), r.breakdown.to_dict(),
          "B", B.tolist(), "dom", dom, "eig", eigen_sym(B).values.tolist(),
          "nnz", int(np.sum(np.abs(r.metric.b_upper) > 1e-8)))
