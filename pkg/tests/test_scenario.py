from fractions import Fraction

import numpy as np
import pytest

from qsnncl.errors import ConfigurationError
from qsnncl.network import NetworkConfig, build_model
from qsnncl.neuron import LifParams
from qsnncl.plasticity import StdpParams
from qsnncl.scenario import (
    AccuracyMatrix,
    ScenarioConfig,
    low_accuracy_tasks,
    memory_report,
    prepare_tasks,
    run_dynamic,
    run_nondynamic,
    summary,
)

SMALL = ScenarioConfig(samples_per_class=10, test_per_class=15, label_samples_per_class=10)


def model(fmt="Q0.7", n=40, seed=0, **net):
    return build_model(NetworkConfig(num_excitatory=n, weight_format=fmt, **net), LifParams(), StdpParams(), seed)


class Recorder:
    def __init__(self):
        self.events = []

    def __call__(self, event, **info):
        self.events.append((event, info))


def check_alg1_structure(m, rec, tasks):
    n = tasks.num_tasks
    lower = np.tril(np.ones((n, n), dtype=bool))
    assert np.all(np.isfinite(m.acc[lower])) and np.all(np.isnan(m.acc[~lower]))
    trained = [info for ev, info in rec.events if ev == "train"]
    phases = [t["phase"] for t in trained]
    assert phases == sorted(phases)
    seen = [t["index"] for t in trained]
    assert len(seen) == len(set(seen)), "a training sample was fed twice"
    for i in range(n):
        idx = [t["index"] for t in trained if t["phase"] == i]
        assert sorted(idx) == sorted(tasks.train_by_class[i].tolist())
        assert np.all(tasks.train.labels[idx] == i)
    tests = [(t["phase"], t["task"]) for ev, t in rec.events if ev == "test"]
    assert tests == [(i, k) for i in range(n) for k in range(i + 1)]
    # nothing is trained after a phase's tests begin
    last_test = {}
    for pos, (ev, info) in enumerate(rec.events):
        if ev == "test":
            last_test[info["phase"]] = pos
        else:
            assert all(info["phase"] > p for p in last_test)


def test_alg1_structure(mnist):
    train, test = mnist
    tasks = prepare_tasks(train, test, SMALL, seed=0)
    rec = Recorder()
    _, m = run_dynamic(model(), tasks, observer=rec)
    check_alg1_structure(m, rec, tasks)
    assert np.all((m.acc[np.isfinite(m.acc)] >= 0) & (m.acc[np.isfinite(m.acc)] <= 1))


def test_silent_model_scores_chance(mnist):
    """A model that never fires always predicts its fallback class, so each phase averages 1/(i+1)."""
    train, test = mnist
    tasks = prepare_tasks(train, test, SMALL, seed=1)
    net = NetworkConfig(num_excitatory=20, weight_format="fp32", init_weight_max=0.0, w_decay=0.0)
    mdl = build_model(net, LifParams(theta_inc=0.0), StdpParams(eta_post=0.0), 0)
    _, m = run_dynamic(mdl, tasks)
    for i, avg in enumerate(m.per_phase_avg):
        assert Fraction(avg).limit_denominator(100) == Fraction(1, i + 1)


def test_nondynamic_runs(mnist):
    train, test = mnist
    tasks = prepare_tasks(train, test, SMALL, seed=0)
    rec = Recorder()
    mdl, acc = run_nondynamic(model(), tasks, observer=rec)
    seen = [info["index"] for ev, info in rec.events if ev == "train"]
    assert sorted(seen) == sorted(np.concatenate(tasks.train_by_class).tolist())
    assert set(tasks.train.labels[seen[:20]]) != {tasks.train.labels[seen[0]]}  # shuffled
    assert 0 <= acc <= 1 and mdl.label_classes == tuple(range(10))


def test_prepare_tasks(mnist):
    train, test = mnist
    a = prepare_tasks(train, test, SMALL, seed=4)
    b = prepare_tasks(train, test, SMALL, seed=4)
    assert all(np.array_equal(x, y) for x, y in zip(a.train_by_class, b.train_by_class))
    assert all(len(ix) == 15 and np.all(test.labels[ix] == c) for c, ix in enumerate(a.test_by_class))
    assert np.array_equal(a.train_encoder(3)[1], b.train_encoder(3)[1])
    with pytest.raises(ConfigurationError):
        prepare_tasks(train, test, ScenarioConfig(samples_per_class=0), seed=0)


def test_dynamic_run_is_deterministic(mnist):
    train, test = mnist
    runs = []
    for _ in range(2):
        tasks = prepare_tasks(train, test, SMALL, seed=2)
        mdl, m = run_dynamic(model(seed=2), tasks)
        runs.append((m.to_csv(), mdl.synapses.weights.copy()))
    assert runs[0][0] == runs[1][0] and np.array_equal(runs[0][1], runs[1][1])


def test_accuracy_matrix_metrics_and_csv():
    m = AccuracyMatrix.empty(3)
    m.acc[0, 0] = 1.0
    m.acc[1, :2] = [0.5, 0.25]
    assert not m.is_complete
    m.acc[2, :] = [0.1, 0.2, 0.3]
    assert m.is_complete
    assert np.allclose(m.per_phase_avg, [1.0, 0.375, 0.2])
    assert m.overall_avg == pytest.approx(0.2)
    text = m.to_csv()
    assert text.splitlines()[0] == "phase,task_0,task_1,task_2"
    assert text.splitlines()[1] == "0,1.000000,,"
    back = AccuracyMatrix.from_csv(text)
    assert np.array_equal(np.isnan(back.acc), np.isnan(m.acc))
    assert np.allclose(back.acc[~np.isnan(m.acc)], m.acc[~np.isnan(m.acc)])


@pytest.mark.parametrize("fmt,bits,ratio", [("Q0.3", 4, 0.125), ("Q0.7", 8, 0.25), ("Q0.5", 6, 0.1875),
                                            ("fp32", 32, 1.0)])
def test_memory_report(fmt, bits, ratio):
    rep = memory_report(model(fmt, n=400))
    assert rep.synapse_count == 313_600
    assert rep.bits_per_weight == bits and rep.total_bits == 313_600 * bits
    assert rep.ratio_vs_32bit == ratio
    assert rep.saving_factor == 32 / bits


def test_low_accuracy_tasks():
    m = AccuracyMatrix(np.tril(np.ones((10, 10))) + np.triu(np.full((10, 10), np.nan), 1))
    assert low_accuracy_tasks(m, 0.2) == []
    m.acc[9, 7] = 0.1
    assert low_accuracy_tasks(m, 0.2) == [(9, 7)]
    m.acc[9, 3] = 0.2
    assert low_accuracy_tasks(m, 0.2) == [(9, 3), (9, 7)]
    with pytest.raises(ConfigurationError):
        low_accuracy_tasks(m, 1.0)
    s = summary(m, memory_report(model("Q0.3", n=10)), 0.2)
    assert s["low_accuracy_tasks"] == [[9, 3], [9, 7]] and s["memory"]["bits_per_weight"] == 4
