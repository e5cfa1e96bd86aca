"""Quantized spiking neural networks for unsupervised class-incremental learning."""

from .data import Dataset, SpikeTrain, encode_rate, load_mnist, split_by_class
from .errors import (
    ConfigurationError,
    DimensionError,
    IdxFormatError,
    IncompleteMatrixError,
    InsufficientSamplesError,
    QsnnclError,
    UnlabeledModelError,
)
from .network import (
    NetworkConfig,
    SnnModel,
    assign_labels,
    build_model,
    classify,
    load_checkpoint,
    present_sample,
    save_checkpoint,
)
from .neuron import LifNeuronState, LifParams, step_neuron
from .plasticity import SynapseMatrix, StdpParams, decay_weights, on_post_spikes, on_pre_spikes
from .quant import FixedPointFormat, QuantizedValue, parse_format, quantize, quantize_weights
from .scenario import (
    AccuracyMatrix,
    EncodingConfig,
    MemoryReport,
    ScenarioConfig,
    memory_report,
    prepare_tasks,
    run_dynamic,
    run_nondynamic,
)
from .search import SearchConfig, SearchResult, check_constraints, refine_parameters

__version__ = "0.1.0"
