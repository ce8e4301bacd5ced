"""Shared fixtures.

Every call to ``milpmetric.models.fit`` made anywhere in the suite is wrapped so that
each incumbent is checked for two invariants: a positive separation with no outliers
must be certified by the nearest-neighbor check, and the linearized products must
equal the true products. Tallies are printed in the terminal summary.
"""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import milpmetric.active
import milpmetric.cli
import milpmetric.models
from milpmetric.data import Dataset, build_delta_cache
from milpmetric.metric import check_feasibility

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIT_AUDIT = {"fits": 0, "certified": 0, "violations": [], "max_mccormick_gap": 0.0}
CRITERIA = {}
_ORIGINAL_FIT = milpmetric.models.fit


def audit_fit(res, d):
    """Apply the suite-wide invariants to one fit result."""
    FIT_AUDIT["fits"] += 1
    br = res.breakdown
    if br.lam is not None and br.lam > 0 and not res.outliers:
        feas = check_feasibility(res.metric.with_norm(None), d, 1)
        if feas.holds and feas.min_margin >= br.lam - 1e-6:
            FIT_AUDIT["certified"] += 1
        else:
            FIT_AUDIT["violations"].append(
                f"{d.name}: lambda={br.lam} but min margin {feas.min_margin}")
    if res.vmap.w:
        gap = milpmetric.models.mccormick_gap(res.vmap, build_delta_cache(d), res.solution.x)
        FIT_AUDIT["max_mccormick_gap"] = max(FIT_AUDIT["max_mccormick_gap"], gap)
        if gap > 1e-5:
            FIT_AUDIT["violations"].append(f"{d.name}: McCormick gap {gap}")


def _audited_fit(d, *args, **kwargs):
    res = _ORIGINAL_FIT(d, *args, **kwargs)
    audit_fit(res, d)
    return res


def pytest_configure(config):
    for mod in (milpmetric.models, milpmetric.active, milpmetric.cli):
        mod.fit = _audited_fit


def pytest_terminal_summary(terminalreporter):
    tr = terminalreporter
    tr.section("fit audit")
    tr.write_line(f"fits audited: {FIT_AUDIT['fits']}, certified separations: "
                  f"{FIT_AUDIT['certified']}, max McCormick gap: "
                  f"{FIT_AUDIT['max_mccormick_gap']:.3e}")
    for v in FIT_AUDIT["violations"]:
        tr.write_line(f"VIOLATION {v}")
    if CRITERIA:
        tr.section("acceptance criteria")
        for n in sorted(CRITERIA):
            ok, detail = CRITERIA[n]
            tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(points, labels, name="t"):
    pts = np.asarray(points, float)
    lab = np.asarray(labels)
    classes = tuple(str(c) for c in range(int(lab.max()) + 1))
    return Dataset(pts, lab.astype(np.int64), classes, name)


@pytest.fixture
def tiny():
    """Two well separated classes of three points in the plane, already in [0, 1]."""
    pts = [[0.0, 0.0], [0.1, 0.05], [0.05, 0.1], [1.0, 1.0], [0.9, 0.95], [0.95, 0.9]]
    return make_dataset(pts, [0, 0, 0, 1, 1, 1], "tiny")
