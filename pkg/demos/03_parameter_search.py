"""
Refining decay and threshold for a quantized model
==================================================

Sweeps w_decay upward and the threshold increment downward on a small
4-bit network, retraining from the same initial weights at every point,
and keeps the best point that clears both constraints.
"""

from dataclasses import replace
from pathlib import Path

from qsnncl import LifParams, NetworkConfig, ScenarioConfig, StdpParams, build_model, load_mnist
from qsnncl import SearchConfig, prepare_tasks, refine_parameters
from qsnncl.search import baseline_average

data = Path(__file__).resolve().parents[1] / "data" / "mnist"
train = load_mnist(data / "train-images-idx3-ubyte.gz", data / "train-labels-idx1-ubyte.gz")
test = load_mnist(data / "test-images-idx3-ubyte.gz", data / "test-labels-idx1-ubyte.gz")
tasks = prepare_tasks(train, test, ScenarioConfig(samples_per_class=50, test_per_class=50), seed=0)

net = NetworkConfig(num_excitatory=100, weight_format="Q0.3")
lif, stdp = LifParams(), StdpParams()

# The acceptable loss is measured against the full-precision twin.
baseline = baseline_average(build_model(replace(net, weight_format="fp32"), lif, stdp, 0), tasks)
print(f"full-precision baseline average {baseline:.3f}")

sc = SearchConfig(step_w=0.03, w_decay_upper=net.w_decay + 0.09, step_vth=0.1,
                  vth_lower=lif.theta_inc - 0.2, acc_low=0.2, acc_loss=0.02, baseline_avg=baseline)
result = refine_parameters(build_model(net, lif, stdp, 0), tasks, sc)

for p in result.evaluated_points:
    print(f"w_decay={p.w_decay:<7g} theta_inc={p.threshold_term:<4g} "
          f"avg={p.overall_avg:.3f} min={p.min_task_acc:.2f} pass={p.constraint_pass}")
if result.feasible:
    print("chosen", result.chosen_w_decay, result.chosen_threshold_term)
else:
    print("no grid point met both constraints; the baseline-parameter model is returned")
