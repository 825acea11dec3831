"""Coded computing for distributed matrix-vector multiplication.

Models, designs, and evaluates coded schemes (partitioned MDS and
rateless codes) under straggling servers: shuffle communication load,
per-phase computational delay, storage-assignment optimization, and
fountain-code design under inactivation decoding.
"""

__version__ = "0.1.0"

from .params import PartitionedParams, SystemParams, derive, partition_limit
from .runtime import Complexity
from .schemes import SchemeMetrics, SchemeSpec, evaluate

__all__ = [
    "__version__",
    "SystemParams", "PartitionedParams", "derive", "partition_limit",
    "Complexity", "SchemeSpec", "SchemeMetrics", "evaluate",
]
