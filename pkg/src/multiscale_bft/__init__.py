"""Multi-scale Byzantine protocols on sparse networks, with a lock-step simulator
and system-assumption-coverage calculators."""

__version__ = "0.1.0"

from .adversary import (  # noqa: E402
    SCRIPT_FAMILY,
    AdversarySpec,
    InfeasiblePlacement,
    Scope,
    Verdict,
    sample_corruption,
    scopes_for_agreement,
    scopes_for_broadcast,
    scopes_for_stack,
    validate_corruption,
)
from .engine import (  # noqa: E402
    ContractBreach,
    CorruptionRejected,
    Execution,
    RoundBudgetExceeded,
    SyncProgram,
    run_sync_execution,
)
from .kernels import (  # noqa: E402
    KernelConfig,
    KernelPreconditionError,
    majority_relay,
    run_differential_ba_Bs,
    run_immediate_ba_As,
    run_initiation_Is,
)
from .protocols import (  # noqa: E402
    DisseminationTree,
    ProtocolOutcome,
    compute_incompleteness,
    multiscale_agreement,
    multiscale_broadcast,
    secure_communicate,
)
from .reliability import (  # noqa: E402
    ReliabilityParams,
    TailResult,
    broadcast_reliability,
    p_exact,
    q_exact,
    securecomm_reliability,
    stirling_tail_approx,
    tail_bound,
)
from .topology import (  # noqa: E402
    ExpanderStack,
    HypercubeTopology,
    SizingError,
    build_expander_stack,
    build_hypercube,
    expansion_check,
)
