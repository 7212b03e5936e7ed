"""Erasure cost of sequential qubit measurement, via the process's epsilon-transducer."""

from ._version import __version__

from .errors import (
    ConsistencyError,
    ConvergenceError,
    PreconditionError,
    RangeError,
    SampleSizeError,
    SchemaError,
    SizeError,
    UnreachableTargetError,
    ValidationError,
)
from .qubit import MAX_N, MeasurementFamily, closure_check, collapse, outcome_probability
from .transducer import (
    Transducer,
    build_exact,
    output_determinism_check,
    predecessor_distribution,
    stationary_distribution,
    statistical_complexity,
)
from .measures import Distribution, JointDistribution, conditional_entropy, mutual_information, shannon_entropy
from .erasure import (
    BOLTZMANN_CONSTANT,
    ErasureReport,
    erased_information_decomposed,
    erased_information_direct,
    erased_scaling_sweep,
    erasure_report,
    landauer_heat_bound,
)
from .simulation import (
    RedactedTrace,
    SimulationConfig,
    Trace,
    empirical_erased_information,
    empirical_predecessor_distribution,
    simulate,
)
from .inference import (
    MorphTable,
    PartitionMachine,
    compare_machines,
    erased_info_of_partition,
    estimate_morphs,
    history_machine,
    reconstruct,
)
