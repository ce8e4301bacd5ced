"""Reference run for the diabetes subsample: learned-metric 1-NN error against the
baselines on a fixed-seed 60 train / 200 test draw."""
import argparse
import time
from pathlib import Path

from milpmetric.data import load_csv, normalize, sample_split
from milpmetric.metric import Metric, error_rate
from milpmetric.models import FitParams, fit
from milpmetric.solver import SolverParams

ROOT = Path(__file__).resolve().parents[1]
ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--nodes", type=int, default=30)
args = ap.parse_args()

full = load_csv(ROOT / "data" / "diabetes.csv")
train, test = sample_split(full, 60, 200, args.seed)
d, norm = normalize(train)
t = time.time()
r = fit(d, FitParams(), SolverParams(node_limit=args.nodes), norm)
te = test.with_points(norm.apply(test.points))
print(f"fit {time.time() - t:.1f}s", r.solution.stats(False), r.breakdown.to_dict())
print("learned", error_rate(r.metric, d, te))
print("learned-excl", error_rate(r.metric, d, te, exclude=r.outliers))
for kind in ("euclidean", "manhattan", "chebyshev"):
    print(kind, error_rate(Metric.baseline(kind, d.D), d, te))
