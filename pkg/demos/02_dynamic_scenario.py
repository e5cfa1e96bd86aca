"""
Class-incremental training at full and low precision
====================================================

Trains on digit 0, then 1, ..., then 9, testing all classes seen so far
after each phase.  Prints the final row of the accuracy matrix for a
full-precision and a 4-bit network.  Takes about a minute.
"""

from pathlib import Path

import numpy as np

from qsnncl import LifParams, NetworkConfig, ScenarioConfig, StdpParams, build_model, load_mnist
from qsnncl import memory_report, prepare_tasks, run_dynamic

data = Path(__file__).resolve().parents[1] / "data" / "mnist"
train = load_mnist(data / "train-images-idx3-ubyte.gz", data / "train-labels-idx1-ubyte.gz")
test = load_mnist(data / "test-images-idx3-ubyte.gz", data / "test-labels-idx1-ubyte.gz")

tasks = prepare_tasks(train, test, ScenarioConfig(samples_per_class=200, test_per_class=100), seed=0)

for fmt in ("fp32", "Q0.3"):
    model = build_model(NetworkConfig(num_excitatory=200, weight_format=fmt), LifParams(), StdpParams(), seed=0)
    model, acc = run_dynamic(model, tasks)
    mem = memory_report(model)
    print(f"{fmt:>5}: final row {np.round(acc.final_row, 2)}")
    print(f"       overall {acc.overall_avg:.3f}, weight memory {mem.total_bits / 8e3:.0f} kB "
          f"({mem.ratio_vs_32bit:.3f} of 32-bit)")

# The accuracy matrix is lower triangular; write it out for plotting.
print(acc.to_csv())
