import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsnncl.data import SpikeTrain, encode_rate
from qsnncl.errors import DimensionError, UnlabeledModelError
from qsnncl.network import (
    UNASSIGNED,
    NetworkConfig,
    assign_labels,
    build_model,
    classify,
    classify_counts,
    labels_from_counts,
    load_checkpoint,
    present_sample,
    present_sample_reference,
    save_checkpoint,
)
from qsnncl.neuron import LifParams
from qsnncl.plasticity import StdpParams


def small_model(fmt="Q0.5", n=7, inputs=30, seed=0, lif=None, stdp=None, **net):
    cfg = NetworkConfig(num_excitatory=n, num_inputs=inputs, weight_format=fmt, **net)
    return build_model(cfg, lif or LifParams(), stdp or StdpParams(), seed)


def random_train(rng, steps=40, inputs=30, p=0.3):
    return SpikeTrain(rng.random((steps, inputs)) < p)


def test_synapse_counts_and_seeding():
    assert small_model("fp32", n=400, inputs=784).synapses.weights.size == 313_600
    assert small_model("fp32", n=200, inputs=784).synapses.weights.size == 156_800
    a, b = small_model(seed=3), small_model(seed=3)
    assert np.array_equal(a.synapses.weights, b.synapses.weights)
    assert a.neuron_labels is None and np.all(a.neuron_states.v_mem == a.lif_params.v_rest)


KERNEL_CASES = [
    dict(fmt="fp32"),
    dict(fmt="Q0.3"),
    dict(fmt="Q0.7", inhibition_strength=0.0),
    dict(fmt="Q0.5", rounding="nearest"),
    dict(fmt="Q1.4", stdp=StdpParams(eta_post=0.1, eta_pre=0.04), w_decay=0.05),
    dict(fmt="fp32", stdp=StdpParams(eta_pre=0.02), w_decay=0.01, inhibition_strength=3.0),
]


@pytest.mark.parametrize("case", KERNEL_CASES)
def test_kernel_matches_reference_bit_for_bit(case):
    rng = np.random.default_rng(11)
    lif = LifParams(v_decay=0.95, theta_inc=0.4, t_ref=2)
    case = dict(case)
    stdp = case.pop("stdp", StdpParams(eta_post=0.08))
    case.setdefault("w_decay", 0.02)
    fast = small_model(lif=lif, stdp=stdp, init_weight_max=0.9, **case)
    slow = fast.clone()
    for k in range(12):
        train = random_train(rng, p=0.25)
        learn = k % 4 != 3
        a = present_sample(fast, train, learn)
        b = present_sample_reference(slow, train, learn)
        assert np.array_equal(a.counts, b.counts)
        assert np.array_equal(fast.synapses.weights, slow.synapses.weights)
        assert np.array_equal(fast.neuron_states.theta, slow.neuron_states.theta)
    assert fast.synapses.weights.any()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**16), st.sampled_from(["fp32", "Q0.3", "Q0.6"]), st.floats(0, 10),
       st.booleans())
def test_kernel_matches_reference_property(seed, fmt, inhibition, learn):
    rng = np.random.default_rng(seed)
    lif = LifParams(v_decay=0.9, theta_inc=0.3, t_ref=1)
    fast = small_model(fmt, n=5, inputs=20, seed=seed, lif=lif, stdp=StdpParams(eta_post=0.1),
                       inhibition_strength=inhibition, w_decay=0.1, init_weight_max=1.0)
    slow = fast.clone()
    for _ in range(3):
        train = random_train(rng, steps=25, inputs=20, p=0.4)
        assert np.array_equal(present_sample(fast, train, learn).counts,
                              present_sample_reference(slow, train, learn).counts)
    assert np.array_equal(fast.synapses.weights, slow.synapses.weights)


def test_zero_input():
    m = small_model(w_decay=0.0)
    w = m.synapses.weights.copy()
    out = present_sample(m, SpikeTrain(np.zeros((50, 30), dtype=bool)), learn=True)
    assert out.total == 0 and np.array_equal(w, m.synapses.weights)


def test_inference_is_side_effect_free():
    rng = np.random.default_rng(2)
    m = small_model(lif=LifParams(theta_inc=0.5), init_weight_max=1.0)
    for _ in range(3):
        present_sample(m, random_train(rng), learn=True)
    w, theta = m.synapses.weights.copy(), m.neuron_states.theta.copy()
    out = present_sample(m, random_train(rng, p=0.5), learn=False)
    assert out.total > 0
    assert np.array_equal(w, m.synapses.weights) and np.array_equal(theta, m.neuron_states.theta)


def test_conservation():
    rng = np.random.default_rng(4)
    m = small_model(init_weight_max=1.0)
    out = present_sample(m, random_train(rng, p=0.5), learn=True)
    assert out.total == int(out.counts.sum()) > 0


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        present_sample(small_model(), SpikeTrain(np.zeros((5, 31), dtype=bool)), learn=False)


def test_single_channel_single_winner():
    """Two neurons, one input; the stronger neuron wins and inhibition keeps the other silent."""
    cfg = NetworkConfig(num_excitatory=2, num_inputs=1, weight_format="fp32", inhibition_strength=50.0,
                        w_decay=0.0, w_max=10.0, init_weight_max=0.0)
    m = build_model(cfg, LifParams(theta_inc=0.0), StdpParams(eta_post=0.0), 0)
    m.synapses.weights[:] = [[8.0, 6.0]]
    train = SpikeTrain(np.ones((60, 1), dtype=bool))
    for _ in range(5):
        counts = present_sample(m, train, learn=True).counts
        assert counts[0] > 0 and counts[1] == 0


def test_homeostasis_evens_activity(blobs):
    rng = np.random.default_rng(0)
    trains = [encode_rate(blobs.images[j], 100, 63.75, 1.0, rng) for j in rng.permutation(len(blobs))]

    def cv(theta_inc):
        cfg = NetworkConfig(num_excitatory=20, weight_format="fp32", w_decay=0.0)
        m = build_model(cfg, LifParams(theta_inc=theta_inc), StdpParams(eta_post=0.01), 0)
        total = np.zeros(20)
        for t in trains * 2:
            total += present_sample(m, t, learn=True).counts
        return total.std() / total.mean()

    assert cv(1.0) < cv(0.0)


def test_training_is_deterministic(blobs):
    def train():
        rng = np.random.default_rng(5)
        m = small_model("Q0.7", n=10, inputs=784, seed=5, w_decay=0.01)
        for j in range(20):
            present_sample(m, encode_rate(blobs.images[j * 5], 50, 63.75, 1.0, rng), learn=True)
        return m.synapses.weights

    assert np.array_equal(train(), train())


def test_labels_from_counts():
    counts = np.array([
        [0, 5, 0, 2],   # class 1
        [0, 5, 0, 2],   # class 1
        [3, 1, 0, 2],   # class 3
    ])
    classes = np.array([1, 1, 3])
    labels = labels_from_counts(counts, classes)
    assert labels.tolist() == [3, 1, UNASSIGNED, 1]  # neuron 3 ties, lower class wins


def test_assign_labels_and_classify():
    cfg = NetworkConfig(num_excitatory=3, num_inputs=3, weight_format="fp32", inhibition_strength=0.0,
                        init_weight_max=0.0)
    m = build_model(cfg, LifParams(theta_inc=0.0), StdpParams(), 0)
    m.synapses.weights[:] = np.diag([20.0, 20.0, 0.0])
    on = lambda k: SpikeTrain(np.tile(np.eye(3, dtype=bool)[k], (30, 1)))
    assign_labels(m, [(on(0), 3), (on(1), 5), (on(2), 3)])
    assert m.neuron_labels.tolist() == [3, 5, UNASSIGNED]
    assert m.label_classes == (3, 5)
    assert classify(m, on(0)) == 3 and classify(m, on(1)) == 5
    assert classify(m, on(2)) == 3  # silent: most common label (3 and 5 tie, lower wins)
    with pytest.raises(ValueError):
        assign_labels(m, [])


def test_classify_counts_fixture():
    labels = np.array([0, 0, 1, 2, 2, UNASSIGNED])
    counts = np.array([
        [4, 0, 1, 0, 0, 9],
        [0, 0, 3, 1, 1, 0],
        [1, 1, 0, 2, 3, 0],
        [0, 0, 0, 0, 0, 0],
    ])
    expected = []
    for row in counts:
        means = {c: row[labels == c].mean() for c in (0, 1, 2)}
        expected.append(max(means, key=lambda c: (means[c], -c)) if row.sum() else 0)
    assert classify_counts(counts, labels, (0, 1, 2)).tolist() == expected
    assert classify_counts(np.zeros((2, 3)), np.full(3, UNASSIGNED), (4, 7)).tolist() == [4, 4]


def test_classify_requires_labels():
    with pytest.raises(UnlabeledModelError):
        classify(small_model(), SpikeTrain(np.zeros((5, 30), dtype=bool)))


@pytest.mark.parametrize("fmt", ["fp32", "Q0.3", "Q1.6"])
def test_checkpoint_round_trip(tmp_path, fmt):
    rng = np.random.default_rng(0)
    m = small_model(fmt, init_weight_max=1.0, lif=LifParams(theta_inc=0.7))
    for _ in range(3):
        present_sample(m, random_train(rng), learn=True)
    m.neuron_labels = np.array([0, 1, UNASSIGNED, 1, 0, 2, 2])
    m.label_classes = (0, 1, 2)
    path = tmp_path / "m.npz"
    save_checkpoint(m, path)
    back = load_checkpoint(path)
    assert np.array_equal(back.synapses.weights, m.synapses.weights)
    assert np.array_equal(back.neuron_states.theta, m.neuron_states.theta)
    assert np.array_equal(back.neuron_labels, m.neuron_labels)
    assert back.label_classes == m.label_classes and back.format == m.format
    assert back.lif_params == m.lif_params and back.stdp_params == m.stdp_params
    with np.load(path) as z:
        assert ("weight_codes" in z) == (fmt != "fp32")
        if fmt != "fp32":
            assert z["weight_codes"].dtype == np.int64
