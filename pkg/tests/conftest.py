import numpy as np
import pytest
from hypothesis import settings

from levelset_lab import RngStream, build_dgff, build_iid, build_sign_field, normalize_to_spec

settings.register_profile("lab", deadline=None, max_examples=40)
settings.load_profile("lab")

SEED = 20261015


@pytest.fixture
def rng():
    return RngStream(SEED, 0)


@pytest.fixture(scope="session")
def suite_models():
    """Small models that every structural invariant is checked on."""
    return {
        "iid16": normalize_to_spec(build_iid(16, 1.0)),
        "sign3": build_sign_field(3),
        "sign4": build_sign_field(4),
        "dgff5": build_dgff(5),
        "dgff9": build_dgff(9),
    }


def all_ones(size):
    from levelset_lab.field_models import IndexSet, _model

    C = np.ones((size, size))
    return _model(IndexSet(size), "dense", C, np.ones(size), f"ones({size})")


def dense_model(C, name="dense"):
    from levelset_lab.field_models import IndexSet, _model

    C = np.asarray(C, dtype=float)
    return _model(IndexSet(len(C)), "dense", C, np.diag(C).copy(), name)


def cov_z_scores(S, C, n):
    """|S - C| in units of the Gaussian standard error of each covariance entry."""
    d = np.diag(C)
    se = np.sqrt((np.outer(d, d) + C**2) / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(S - C) / se, 0.0)
    return z


def bonferroni_z(entries, level=1e-3):
    from scipy.stats import norm

    return float(norm.isf(level / (2 * entries)))


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
