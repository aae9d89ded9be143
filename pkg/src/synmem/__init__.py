"""synmem: voltage-scaled SRAM synaptic storage simulator.

Models feedforward sigmoid networks whose 8-bit weights live in voltage-scaled
SRAM, where 6T bitcells fail probabilistically and 8T bitcells do not. Covers
quantization, fault injection (static masks or per-access Bernoulli flips),
memory layouts that shield the most significant bits, and a closed-form
power/area model, plus a sweep harness that ties them together.
"""

__version__ = "1.0.0"

from .data import gen_synthetic, load_idx, load_idx_images, load_idx_labels
from .faultmem import (
    AccessMode,
    BitcellKind,
    ChipInstance,
    FailureModel,
    FailureType,
    FaultyWeightStore,
    LayoutKind,
    MemoryLayout,
    failure_prob,
    protected_positions,
    read_weight,
    sample_chip,
    write_weights,
)
from .harness import (
    Experiment,
    ExperimentConfig,
    PointResult,
    compare_sensitivity_profiles,
    parse_layout,
    run_point,
    sweep,
)
from .kernels import HAVE_FASTPATH, backend_name
from .powerarea import (
    AccessTrace,
    PowerAreaReport,
    PowerParams,
    Savings,
    aggregate,
    cell_area,
    cell_power,
    evaluation_trace,
    savings,
)
from .quantnet import (
    Dataset,
    EvalResult,
    FixedPointFormat,
    FloatNetwork,
    NetworkArch,
    QuantizedNetwork,
    TrainConfig,
    evaluate,
    forward,
    forward_batch,
    init_network,
    quantize,
    sigmoid,
    train_backprop,
)
from .seeding import derive_seed, hash_u64, mix64

__all__ = [
    "AccessMode",
    "AccessTrace",
    "BitcellKind",
    "ChipInstance",
    "Dataset",
    "EvalResult",
    "Experiment",
    "ExperimentConfig",
    "FailureModel",
    "FailureType",
    "FaultyWeightStore",
    "FixedPointFormat",
    "FloatNetwork",
    "HAVE_FASTPATH",
    "LayoutKind",
    "MemoryLayout",
    "NetworkArch",
    "PointResult",
    "PowerAreaReport",
    "PowerParams",
    "QuantizedNetwork",
    "Savings",
    "TrainConfig",
    "aggregate",
    "backend_name",
    "cell_area",
    "cell_power",
    "compare_sensitivity_profiles",
    "derive_seed",
    "evaluate",
    "evaluation_trace",
    "failure_prob",
    "forward",
    "forward_batch",
    "gen_synthetic",
    "hash_u64",
    "init_network",
    "load_idx",
    "load_idx_images",
    "load_idx_labels",
    "mix64",
    "parse_layout",
    "protected_positions",
    "quantize",
    "read_weight",
    "run_point",
    "sample_chip",
    "savings",
    "sigmoid",
    "sweep",
    "train_backprop",
    "write_weights",
    "__version__",
]
