"""Free noncommutative functions on matrix tuples: domains, automorphisms and checks."""

from .domains import DomainSpec, MembershipVerdict, membership, spectral_disk_search
from .maps import (
    HA,
    Compose,
    CounterexampleMap,
    Identity,
    LinearIsometry,
    MobiusTuple,
    TransposeAmplification,
    invert,
    map_from_json,
)
from .matcore import (
    BlockShape,
    NcPoint,
    conjugate,
    direct_sum,
    directional_derivative,
    gamma_pack,
    gamma_unpack,
    herm_sqrt_inv,
    operator_norm,
)
from .verify import CheckReport, RigidityVerdict, rigidity_probe

__version__ = "0.1.0"
