import numpy as np
import pytest
from hypothesis import settings

from tinycompress.data import make_binary_task, synth_te
from tinycompress.nn import DenseModel, init_model

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("repo")


def random_model(arch, seed=0, scale=1.0) -> DenseModel:
    rng = np.random.default_rng(seed)
    ws = [(scale * rng.standard_normal((o, i))).astype(np.float32) for i, o in zip(arch[:-1], arch[1:])]
    bs = [(scale * rng.standard_normal(o)).astype(np.float32) for o in arch[1:]]
    return DenseModel(tuple(arch), ws, bs)


@pytest.fixture(scope="session")
def small_dataset():
    return synth_te(seed=3, samples_per_fault=120, faults=(0, 1, 6, 11, 14))


@pytest.fixture(scope="session")
def small_task(small_dataset):
    return make_binary_task(small_dataset, 6, split_seed=0)


@pytest.fixture(scope="session")
def default_model():
    return init_model(seed=11)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
