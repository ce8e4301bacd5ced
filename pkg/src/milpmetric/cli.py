"""``milpmetric`` command line: fit, eval, recommend, refine, synth and export.

Every flag has a config-file key; flags given on the command line override the file.
Exit codes: 0 success, 1 input error, 2 infeasible model or single-class data,
3 solver limit reached without an incumbent, 4 metric/data dimension mismatch.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import report as rpt
from .active import (class_cdf, compute_r_profile, knees_for, metric_id, partition,
                     rank_acquisition, remove_refit_loop)
from .config import RunConfig
from .data import (Dataset, NormParams, SynthSpec, build_delta_cache, load_csv, load_libsvm,
                   normalize, sample_split, split, synth_generate, write_csv)
from .metric import Metric, coordinate_significance, eigen_sym, transform_coords
from .models import FitError, build_model, fit
from .solver import export_mps

log = logging.getLogger("milpmetric")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_DIMENSION = 0, 1, 2, 3, 4
COMMANDS = ("fit", "eval", "recommend", "refine", "synth", "export")
MELL0_PROTOCOL = ("training points flagged as outliers by the fit are excluded as neighbor "
                  "candidates; test points are never excluded")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- argument parsing -------------------------------------------------------------
def _global_flags(p, default):
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=default, help="JSON run configuration")
    g.add_argument("--seed", type=int, default=default)
    g.add_argument("--deterministic", action="store_true", default=default,
                   help="byte-identical outputs; wall-clock limits are ignored")
    g.add_argument("--out", default=default, help="output directory")
    g.add_argument("--threads", type=int, default=default)
    g.add_argument("-v", "--verbose", action="store_true", default=default)


def _fit_flags(p):
    S = argparse.SUPPRESS
    g = p.add_argument_group("model options")
    g.add_argument("--model", choices=("nn1", "knn"), default=S)
    g.add_argument("--k", type=int, default=S, help="neighbors K")
    g.add_argument("--rho", type=float, default=S, help="outlier penalty")
    g.add_argument("--dmin", type=float, default=S, help="minimum non-class distance")
    g.add_argument("--epsilon-alpha", type=float, default=S)
    g.add_argument("--no-outliers", action="store_true", default=S)
    g.add_argument("--gershgorin", action="store_true", default=S)
    g.add_argument("--sparsify-u", type=int, default=S)
    g.add_argument("--bmax", type=float, default=S)
    g.add_argument("--relax-outlier-rows", choices=("on", "off"), default=S)
    g.add_argument("--a-mode", choices=("free", "nonneg", "zero"), default=S)
    g = p.add_argument_group("solver options")
    g.add_argument("--time-limit", type=float, default=S, help="seconds")
    g.add_argument("--gap", type=float, default=S, help="relative gap tolerance")
    g.add_argument("--node-limit", type=int, default=S)


def _data_flags(p, *names):
    S = argparse.SUPPRESS
    for n in names:
        p.add_argument(f"--{n}", default=S)
    p.add_argument("--label-column", default=S, help="header name or index (default -1)")
    p.add_argument("--format", choices=("auto", "csv", "libsvm"), default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="milpmetric", description=__doc__.splitlines()[0])
    _global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="learn a metric from labeled data")
    _global_flags(p, S)
    _data_flags(p, "data", "test")
    _fit_flags(p)

    p = sub.add_parser("eval", help="K-NN error of a metric against the baselines")
    _global_flags(p, S)
    _data_flags(p, "metric", "train", "test", "data")
    p.add_argument("--k", type=int, default=S)
    p.add_argument("--train-fraction", type=float, default=S)
    p.add_argument("--train-size", type=int, default=S)
    p.add_argument("--test-size", type=int, default=S)
    p.add_argument("--exclude-outliers", action="store_true", default=S,
                   help="exclude the fit's training outliers as neighbor candidates")

    p = sub.add_parser("recommend", help="partition points and rank acquisition regions")
    _global_flags(p, S)
    _data_flags(p, "metric", "data")
    p.add_argument("--radius", type=float, default=S)
    p.add_argument("--test-rule", choices=("chord", "slopes"), default=S)
    p.add_argument("--exclude-outliers", action="store_true", default=S)

    p = sub.add_parser("refine", help="fit, drop points with R >= 1, refit")
    _global_flags(p, S)
    _data_flags(p, "data")
    _fit_flags(p)
    p.add_argument("--max-iters", type=int, default=S)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    _global_flags(p, S)
    p.add_argument("--kind", default=S)
    p.add_argument("--per-class", type=int, default=S)
    p.add_argument("--noise", type=float, default=S)
    p.add_argument("--n-classes", type=int, default=S)
    p.add_argument("--flips", type=int, default=S)
    p.add_argument("--gap", type=float, dest="synth_gap", default=S,
                   help="class separation for two-lines")
    p.add_argument("--output", default=S)

    p = sub.add_parser("export", help="write a model (MPS), metric (JSON) or coordinates (CSV)")
    _global_flags(p, S)
    _data_flags(p, "metric", "data")
    _fit_flags(p)
    p.add_argument("--what", choices=("model", "metric", "coords"), default=S)
    p.add_argument("--output", default=S)
    return parser


_FIT_MAP = {"model": "model", "k": "K", "rho": "rho", "dmin": "d_min",
            "epsilon_alpha": "epsilon_alpha", "gershgorin": "gershgorin",
            "sparsify_u": "sparsify_U", "bmax": "b_max", "a_mode": "a_mode"}
_RUN_MAP = ("seed", "out", "data", "train", "test", "metric", "label_column", "format",
            "radius", "max_iters", "train_fraction", "train_size", "test_size",
            "exclude_outliers", "test_rule", "output")
_SYNTH_MAP = {"kind": "kind", "per_class": "per_class", "noise": "noise",
              "n_classes": "n_classes", "flips": "flips", "synth_gap": "gap"}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    a = vars(args)
    cfg = RunConfig.load(a["config"]) if a.get("config") else RunConfig()
    run = {k: a.get(k) for k in _RUN_MAP}
    run["command"] = args.command
    if run["label_column"] is not None:
        run["label_column"] = str(run["label_column"])
    synth = {dst: a[src] for src, dst in _SYNTH_MAP.items() if a.get(src) is not None}
    if synth:
        run["synth"] = {**cfg.synth, **synth}
    if a.get("what"):
        run["export"] = {**cfg.export, "what": a["what"]}
    fitp = {dst: a.get(src) for src, dst in _FIT_MAP.items()}
    if a.get("no_outliers"):
        fitp["allow_outliers"] = False
    if a.get("relax_outlier_rows") is not None:
        fitp["relax_outlier_rows"] = a["relax_outlier_rows"] == "on"
    solver = {"time_limit": a.get("time_limit"), "rel_gap_tol": a.get("gap"),
              "node_limit": a.get("node_limit"), "threads": a.get("threads"),
              "deterministic": True if a.get("deterministic") else None}
    return cfg.with_overrides(run, fitp, solver)


# -- helpers ----------------------------------------------------------------------
def _load(path, cfg: RunConfig, rep: dict | None = None) -> Dataset:
    if not path:
        raise CliError(EXIT_INPUT, "missing dataset path")
    fmt = cfg.format
    if fmt == "auto":
        fmt = "libsvm" if Path(path).suffix.lower() in (".libsvm", ".svm") else "csv"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        d = load_libsvm(path) if fmt == "libsvm" else load_csv(path, cfg.label_column)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
        if rep is not None:
            rep["warnings"].append({"code": "data", "message": str(w.message)})
    return d


def _file_ref(path) -> dict:
    data = Path(path).read_bytes()
    return {"path": str(path), "sha256": hashlib.sha256(data).hexdigest()}


def _need_two_classes(d: Dataset):
    if d.n_classes < 2:
        raise CliError(EXIT_INFEASIBLE, f"dataset {d.name!r} has a single class; "
                                        "a metric needs at least two")


def _check_dim(m: Metric, d: Dataset):
    dim = m.dimension
    if dim is None and m.norm is not None:
        dim = m.norm.minimum.size
    if dim is not None and dim != d.D:
        raise CliError(EXIT_DIMENSION,
                       f"dimension mismatch: metric has D={dim}, data {d.name!r} has D={d.D}")


def _in_metric_space(m: Metric, d: Dataset) -> Dataset:
    return d if m.norm is None else d.with_points(m.norm.apply(d.points))


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_fit(d: Dataset, cfg: RunConfig, norm: NormParams):
    try:
        return fit(d, cfg.fit, cfg.solver, norm)
    except FitError as e:
        code = EXIT_INFEASIBLE if e.solution.status == "infeasible" else EXIT_LIMIT
        raise CliError(code, f"fit failed: {e}") from None


def _fit_report(rep, res, raw, d, cfg):
    rep["dataset"] = rpt.dataset_summary(raw)
    rep["solver"] = res.solution.stats(include_time=not cfg.solver.deterministic)
    fitd = res.breakdown.to_dict()
    fitd["outlier_labels"] = [raw.classes[raw.labels[i]] for i in res.outliers]
    rep["fit"] = fitd
    rep["condition"] = rpt.condition_status(res, d)
    B = res.metric.B
    rep["eigen"] = {"values": eigen_sym(B).values,
                    "coordinate_significance": coordinate_significance(B)}
    rep["warnings"].extend(rpt.metric_warnings(res.metric, d.points, cfg.fit.b_max))


def _save_metric(m: Metric, out: Path, extra: dict) -> dict:
    m = Metric(m.a, m.B, m.kind, m.norm, {**m.provenance, **extra})
    path = out / "metric.json"
    m.save(path)
    return {"path": str(path), "id": metric_id(m)}


# -- commands ---------------------------------------------------------------------
def cmd_fit(cfg: RunConfig, rep: dict) -> int:
    raw = _load(cfg.data, cfg, rep)
    _need_two_classes(raw)
    d, norm = normalize(raw)
    res = _run_fit(d, cfg, norm)
    out = _outdir(cfg)
    rep["metric"] = _save_metric(res.metric, out, {"training_outliers": res.outliers,
                                                   "training_data": _file_ref(cfg.data)})
    _fit_report(rep, res, raw, d, cfg)
    rep["normalization"] = norm.to_dict()
    if cfg.test:
        test = _in_metric_space(res.metric, _load(cfg.test, cfg, rep))
        _check_dim(res.metric, test)
        rep["error_rates"] = rpt.error_table(res.metric, d, test, cfg.fit.K)
    return EXIT_OK


def _eval_sets(cfg: RunConfig, rep: dict):
    if cfg.train and cfg.test:
        return _load(cfg.train, cfg, rep), _load(cfg.test, cfg, rep)
    if not cfg.data:
        raise CliError(EXIT_INPUT, "eval needs --train and --test, or --data with a split")
    d = _load(cfg.data, cfg, rep)
    if cfg.train_size is not None and cfg.test_size is not None:
        return sample_split(d, cfg.train_size, cfg.test_size, cfg.seed)
    if cfg.train_fraction is not None:
        return split(d, cfg.train_fraction, cfg.seed)
    raise CliError(EXIT_INPUT, "give --train-size and --test-size, or --train-fraction")


def cmd_eval(cfg: RunConfig, rep: dict) -> int:
    if not cfg.metric:
        raise CliError(EXIT_INPUT, "eval needs --metric")
    m = Metric.load(cfg.metric)
    train, test = _eval_sets(cfg, rep)
    for part in (train, test):
        _check_dim(m, part)
    if train.D != test.D:
        raise CliError(EXIT_DIMENSION, f"dimension mismatch: train D={train.D}, test D={test.D}")
    exclude = []
    if cfg.exclude_outliers:
        if not cfg.train:
            raise CliError(EXIT_INPUT, "--exclude-outliers needs the fit's training file as --train")
        exclude = [int(i) for i in m.provenance.get("training_outliers", [])]
        if any(i >= train.N for i in exclude):
            raise CliError(EXIT_INPUT, "metric outlier indices do not fit the training file")
    train_m, test_m = _in_metric_space(m, train), _in_metric_space(m, test)
    rep["metric"] = {"path": cfg.metric, "id": metric_id(m), "kind": m.kind}
    rep["dataset"] = {"train": rpt.dataset_summary(train), "test": rpt.dataset_summary(test)}
    rep["evaluation"] = {"K": cfg.fit.K, "space": "normalized" if m.norm else "raw",
                         "excluded_training_points": exclude,
                         "protocol": MELL0_PROTOCOL if cfg.exclude_outliers else "all training points"}
    rep["error_rates"] = rpt.error_table(m, train_m, test_m, cfg.fit.K, exclude)
    rep["warnings"].extend(rpt.metric_warnings(m, np.vstack([train_m.points, test_m.points])))
    return EXIT_OK


def cmd_recommend(cfg: RunConfig, rep: dict) -> int:
    if not cfg.metric:
        raise CliError(EXIT_INPUT, "recommend needs --metric")
    m = Metric.load(cfg.metric)
    raw = _load(cfg.data, cfg, rep)
    _need_two_classes(raw)
    _check_dim(m, raw)
    d = _in_metric_space(m, raw)
    ignore = m.provenance.get("training_outliers", []) if cfg.exclude_outliers else []
    prof = compute_r_profile(m, d, ignore=ignore)
    knees = knees_for(prof, cfg.test_rule)
    part = partition(prof, knees)
    plan = rank_acquisition(part, prof, cfg.radius, d, m.norm)
    out = _outdir(cfg)
    cdfs = {}
    for c in sorted(prof.by_class):
        path = out / f"cdf_class_{raw.classes[c]}.csv"
        rpt.write_cdf_csv(path, class_cdf(prof, c))
        cdfs[raw.classes[c]] = str(path)
    rep["metric"] = {"path": cfg.metric, "id": metric_id(m)}
    rep["dataset"] = rpt.dataset_summary(raw)
    rep["r_values"] = prof.values
    rep["partition"] = {"summary": part.summary(), "interior": part.flat("interior"),
                        "boundary": part.flat("boundary"), "outlier": part.flat("outlier")}
    rep["plan"] = plan.to_list()
    rep["cdf_files"] = cdfs
    return EXIT_OK


def cmd_refine(cfg: RunConfig, rep: dict) -> int:
    raw = _load(cfg.data, cfg, rep)
    _need_two_classes(raw)
    d, norm = normalize(raw)
    try:
        metric, history, kept = remove_refit_loop(d, cfg.fit, cfg.solver, cfg.max_iters, norm)
    except FitError as e:
        code = EXIT_INFEASIBLE if e.solution.status == "infeasible" else EXIT_LIMIT
        raise CliError(code, f"fit failed: {e}") from None
    out = _outdir(cfg)
    rep["metric"] = _save_metric(metric, out, {"kept_points": [int(i) for i in kept],
                                               "training_data": _file_ref(cfg.data)})
    rpt.write_history_csv(out / "refine_history.csv", history)
    rep["dataset"] = rpt.dataset_summary(raw)
    rep["history"] = history
    rep["kept_points"] = kept
    rep["warnings"].extend(rpt.metric_warnings(metric, d.points, cfg.fit.b_max))
    return EXIT_OK


def cmd_synth(cfg: RunConfig, rep: dict) -> int:
    kw = dict(cfg.synth)
    if "kind" not in kw:
        raise CliError(EXIT_INPUT, "synth needs --kind")
    d = synth_generate(SynthSpec(seed=cfg.seed, **kw))
    path = Path(cfg.output) if cfg.output else _outdir(cfg) / f"{d.name}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(d, path)
    summary = rpt.dataset_summary(d)
    summary["path"] = str(path)
    summary["flipped"] = d.meta.get("flipped", [])
    print(json.dumps(rpt.jsonable(summary), sort_keys=True))
    rep["dataset"] = summary
    return EXIT_OK


def cmd_export(cfg: RunConfig, rep: dict) -> int:
    what = cfg.export.get("what")
    if what not in ("model", "metric", "coords"):
        raise CliError(EXIT_INPUT, "export needs --what {model,metric,coords}")
    default = {"model": "model.mps", "metric": "metric.json", "coords": "coords.csv"}[what]
    path = Path(cfg.output) if cfg.output else _outdir(cfg) / default
    path.parent.mkdir(parents=True, exist_ok=True)
    if what == "model":
        raw = _load(cfg.data, cfg, rep)
        _need_two_classes(raw)
        d, _ = normalize(raw)
        model, _ = build_model(d, build_delta_cache(d), cfg.fit)
        export_mps(model, path)
        rep["export"] = {"what": what, "path": str(path), "rows": int(model.A.shape[0]),
                         "columns": int(model.A.shape[1])}
        return EXIT_OK
    if not cfg.metric:
        raise CliError(EXIT_INPUT, f"exporting {what} needs --metric")
    m = Metric.load(cfg.metric)
    if what == "metric":
        m.save(path)
        rep["export"] = {"what": what, "path": str(path), "id": metric_id(m)}
        return EXIT_OK
    raw = _load(cfg.data, cfg, rep)
    _check_dim(m, raw)
    coords = transform_coords(m, _in_metric_space(m, raw).points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"c{k + 1}" for k in range(coords.shape[1])] + ["label"])
        for row, lab in zip(coords, raw.label_names()):
            w.writerow([repr(float(v)) for v in row] + [lab])
    rep["export"] = {"what": what, "path": str(path), "rows": int(coords.shape[0])}
    return EXIT_OK


HANDLERS = {"fit": cmd_fit, "eval": cmd_eval, "recommend": cmd_recommend,
            "refine": cmd_refine, "synth": cmd_synth, "export": cmd_export}


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute ``cfg.command``; returns ``(exit code, report)`` and writes the report."""
    rep = rpt.new_report(cfg.command, cfg)
    try:
        code = HANDLERS[cfg.command](cfg, rep)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        rep["error"] = {"exit_code": e.code, "message": str(e)}
        code = e.code
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        msg = str(e)
        code = EXIT_DIMENSION if "dimension mismatch" in msg else EXIT_INPUT
        print(f"error: {msg}", file=sys.stderr)
        rep["error"] = {"exit_code": code, "message": msg}
    rep["exit_code"] = code
    if cfg.command != "synth" or code != EXIT_OK:
        try:
            rpt.write_report(_outdir(cfg) / f"{cfg.command}_report.json", rep)
        except OSError as e:
            print(f"error: cannot write report: {e}", file=sys.stderr)
            code = code or EXIT_INPUT
    return code, rep


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", None) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as e:
        print(f"error: bad configuration: {e}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)[0]


if __name__ == "__main__":
    sys.exit(main())
