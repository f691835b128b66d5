from .hypercube import (
    HypercubeProgram,
    agreement_rounds,
    broadcast_rounds,
    lower_median,
    multiscale_agreement,
    multiscale_broadcast,
)
from .outcome import IncompletenessEstimate, ProtocolOutcome, compute_incompleteness
from .securecomm import (
    NpcReport,
    SecureCommProgram,
    UnsupportedSubnetwork,
    check_upward_flow,
    layer0_npc,
    npc_sets,
    secure_communicate,
    securecomm_rounds,
)
from .tree import DisseminationTree

__all__ = [
    "DisseminationTree",
    "HypercubeProgram",
    "IncompletenessEstimate",
    "ProtocolOutcome",
    "agreement_rounds",
    "broadcast_rounds",
    "compute_incompleteness",
    "lower_median",
    "multiscale_agreement",
    "multiscale_broadcast",
    "NpcReport",
    "SecureCommProgram",
    "UnsupportedSubnetwork",
    "check_upward_flow",
    "layer0_npc",
    "npc_sets",
    "secure_communicate",
    "securecomm_rounds",
]
