import datetime as dt

import numpy as np
import pytest

from rnncast.core import ModelConfig, init_params
from rnncast.data import load_active
from rnncast.synthetic import write_india_csv, write_jhu_csv

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def jhu_csv(tmp_path_factory):
    return write_jhu_csv(tmp_path_factory.mktemp("data") / "jhu.csv")


@pytest.fixture(scope="session")
def india_csv(tmp_path_factory):
    return write_india_csv(tmp_path_factory.mktemp("data") / "india.csv")


@pytest.fixture(scope="session")
def regions(jhu_csv):
    active, _ = load_active(jhu_csv)
    return active


@pytest.fixture(scope="session")
def maharashtra(regions):
    return regions["Maharashtra"]


def perturbed_params(config, seed=0, scale=0.1):
    """Init params plus small noise so no gradient block is trivially zero."""
    rng = np.random.default_rng(seed)
    p = init_params(config)
    for layer in p.layers:
        layer.W += rng.normal(0, scale, layer.W.shape)
        layer.U += rng.normal(0, scale, layer.U.shape)
        layer.b += rng.normal(0, scale, layer.b.shape)
    p.dense_w += rng.normal(0, scale, p.dense_w.shape)
    p.dense_b = 0.1
    return p


class StubModel:
    """Duck-typed model: prediction is ``fn(window)``, hidden state is the window."""

    def __init__(self, w, fn):
        self.window_size = w
        self.fn = fn

    def describe(self):
        return "stub"

    def predict(self, windows, capture=False):
        windows = np.atleast_2d(np.asarray(windows, dtype=float))
        preds = np.array([self.fn(row) for row in windows])
        return (preds, windows.copy()) if capture else preds


@pytest.fixture
def stub_last():
    return lambda w: StubModel(w, lambda row: row[-1])


def day(s):
    return dt.date.fromisoformat(s)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "acceptance", None)
    if marker:
        ACCEPTANCE[marker] = (report.outcome, report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m:
        rep.acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), (outcome, secs) in sorted(ACCEPTANCE.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"AC{num:<2} {status}  {title}  ({secs:.1f}s)")
