import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from cocyclebounds.cocycle import LocallyConstantCocycle, rotation  # noqa: E402
from cocyclebounds.sft import TransitionSystem  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden():
    return TransitionSystem.golden_mean()


@pytest.fixture(scope="session")
def full2():
    return TransitionSystem.full_shift(2)


@pytest.fixture(scope="session")
def g0(full2):
    return LocallyConstantCocycle.from_symbols(
        full2, {1: rotation(2 * np.pi * 0.29), 2: np.diag([2.0, 0.5])}, group="SL")


@pytest.fixture(scope="session")
def identity_stack(golden):
    """Perturbation, covering, multi-cover and a depth-3 tree for the identity
    cocycle over the golden-mean shift; shared by the module tests."""
    from cocyclebounds.branching import build_tree
    from cocyclebounds.cocycle import product_over_transition
    from cocyclebounds.covering import cocycle_multi_cover, verify_covering
    from cocyclebounds.perturb import covering_perturbation, default_targets

    A = LocallyConstantCocycle.constant(golden, np.eye(2), group="SL")
    U, targets, _, _ = default_targets(A)
    A2, plan = covering_perturbation(A, (1,), targets, 0.25)
    cov = verify_covering([(W, product_over_transition(A2, W)) for W in plan.words], U, 0.05)
    mc = cocycle_multi_cover(A2, [plan.letter], U, 0.05, candidates={plan.letter: plan.words})
    tree = build_tree(A2, mc, 3)
    return {"A": A, "U": U, "targets": targets, "A2": A2, "plan": plan, "covering": cov,
            "multi": mc, "tree": tree}


@pytest.fixture(scope="session")
def identity_pipeline(golden, tmp_path_factory):
    """theorem_a_pipeline on the identity cocycle, written to a directory."""
    from cocyclebounds.perturb import theorem_a_pipeline
    out = tmp_path_factory.mktemp("identity_pipeline")
    A = LocallyConstantCocycle.constant(golden, np.eye(2), group="SL")
    rep = theorem_a_pipeline(A, 0.25, depth=8, horizon=12, out=str(out))
    return rep, str(out)
