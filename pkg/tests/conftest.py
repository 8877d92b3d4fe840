import numpy as np
import pytest

from contactrecon.model import build_human_model, build_object_model


@pytest.fixture(scope="session")
def human():
    return build_human_model()


@pytest.fixture(scope="session")
def stick():
    return build_object_model(contact_slots=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lift_scene():
    """Noiseless lift-object scene: (measurements, ground truth)."""
    from contactrecon.eval import generate_synthetic
    return generate_synthetic("lift-object", seed=1)


@pytest.fixture(scope="session")
def lift_problem(human, lift_scene):
    """Problem on the lift scene with the ground-truth state."""
    from contactrecon.costs import assemble_problem
    from contactrecon.io import state_from_solution
    meas, truth = lift_scene
    problem = assemble_problem(human, meas)
    return problem, state_from_solution(problem, truth)


def crop(meas, start, stop):
    """Measurement sub-sequence ``[start, stop)``."""
    from dataclasses import replace
    sl = slice(start, stop)
    return replace(meas, joints2d=meas.joints2d[sl], joint_conf=meas.joint_conf[sl],
                   endpoints2d=None if meas.endpoints2d is None else meas.endpoints2d[sl],
                   endpoint_conf=None if meas.endpoint_conf is None else meas.endpoint_conf[sl],
                   contacts={k: v[sl] for k, v in meas.contacts.items()})


@pytest.fixture(scope="session")
def lift_window(human, lift_scene, lift_problem):
    """12-frame window of the lift scene with both hands on the handle:
    (problem, ground-truth state)."""
    from contactrecon.costs import assemble_problem
    from contactrecon.solver import State
    meas, _ = lift_scene
    _, st = lift_problem
    a, b = 40, 52
    return assemble_problem(human, crop(meas, a, b)), State(st.X[a:b].copy(), st.G.copy())


# --------------------------------------------------------------------------
# acceptance summary: one line per criterion after the run

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    n, title = mark.args
    entry = ACCEPTANCE.setdefault(n, {"detail": ""})
    entry["title"] = title
    entry["ok"] = entry.get("ok", True) and rep.passed
    if rep.failed and not entry["detail"]:
        entry["detail"] = str(call.excinfo.value).splitlines()[0][:200] if call.excinfo else "error"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        e = ACCEPTANCE[n]
        status = "PASS" if e.get("ok") else "FAIL"
        terminalreporter.write_line(f"criterion {n} {status}: {e['title']} | {e['detail']}")


def note(n, text):
    """Attach measured values to criterion ``n`` for the summary line."""
    ACCEPTANCE.setdefault(n, {"title": "", "detail": ""})["detail"] = text
