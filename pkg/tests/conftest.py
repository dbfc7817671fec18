import functools
import time
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rcmsim.kinematics import default_chain

settings.register_profile("rcmsim", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rcmsim")


@pytest.fixture(scope="session")
def chain():
    return default_chain()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    """One expert and one novice, both conditions (40 records)."""
    from rcmsim.sim import ExperimentConfig, run_experiment
    return run_experiment(ExperimentConfig(seed=3, n_expert=1, n_novice=1))


# ---------------------------------------------------------------- shared trial batches
# 100 seeded trials per condition, operators alternating expert/novice by seed.
# Several property tests and acceptance criterion 1 reuse these.

N_SEEDS = 100


def _models(tremor_scale: float):
    from rcmsim.sim import default_operator_models
    return {t: m.replace(tremor_rms=m.tremor_rms * tremor_scale)
            for t, m in default_operator_models().items()}


BATCH_SECONDS = {}  # wall time of each batch when it was first computed


@functools.lru_cache(maxsize=None)
def trial_batch(mode: str, tremor_scale: float = 1.0, n: int = N_SEEDS):
    from rcmsim.sim import ConditionConfig, generate_board, run_trial
    cond = ConditionConfig.manual() if mode == "manual" else ConditionConfig.robotic()
    models = _models(tremor_scale)
    t0 = time.perf_counter()
    out = []
    for seed in range(n):
        tier = ("expert", "novice")[seed % 2]
        out.append(run_trial(cond, models[tier], generate_board(seed), seed))
    BATCH_SECONDS[mode, tremor_scale, n] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def batch():
    return trial_batch


# ---------------------------------------------------------------- default CLI run
# `simulate` + `analyze` on the bundled default config, shared by the CLI tests
# and the acceptance criteria that need the 5+5 experiment.

@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    from rcmsim.cli import main
    from rcmsim.config import default_config_text
    root = tmp_path_factory.mktemp("default_run")
    cfg = root / "default.config"
    cfg.write_text(default_config_text())
    out = root / "run1"
    t0 = time.perf_counter()
    assert main(["simulate", str(cfg), "--out", str(out)]) == 0
    seconds = time.perf_counter() - t0
    assert main(["analyze", str(out / "trials.csv")]) == 0
    return SimpleNamespace(config=cfg, out=out, simulate_seconds=seconds)


# ---------------------------------------------------------------- acceptance summary
# test_acceptance.py appends one line per criterion; they are echoed at the end
# of the run so they show up even with output capture on.

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
