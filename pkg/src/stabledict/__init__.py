"""Space-efficient dynamic dictionaries with stable perfect hashing.

Key in, small stable integer out: every resident key of a dictionary holds
a hashcode in [capacity + slack] that never changes while the key stays
resident, which makes the codes usable as array indices for payloads that
must not move.  The package provides the hash family the dictionaries are
built on, the dictionaries themselves, a retrieval wrapper, bit-exact
space accounting, and a measurement CLI (`stabledict`).
"""

from .basedict import BaseDict, CodeAllocator
from .config import Tunables
from .membdict import MembPhDict, MembPhParams, TileFilterBucket
from .perm import AffinePerm, ShiftFamily, StoredPerm, sample_affine, sample_stored
from .phdict import PhOnlyDict, PhOnlyParams
from .qhf import CollisionCensus, QhfParams, QuotientHashFn, sample_qhf
from .retrieval import PayloadStore, RetrievalDict
from .rng import SplitMix64, derive_seed
from .spacemeter import ArenaModel, SpaceLedger

__all__ = [
    "AffinePerm", "ArenaModel", "BaseDict", "CodeAllocator", "CollisionCensus",
    "MembPhDict", "MembPhParams", "PayloadStore", "PhOnlyDict", "PhOnlyParams",
    "QhfParams", "QuotientHashFn", "RetrievalDict", "ShiftFamily", "SpaceLedger",
    "SplitMix64", "StoredPerm", "TileFilterBucket", "Tunables",
    "derive_seed", "sample_affine", "sample_qhf", "sample_stored",
]

__version__ = "0.1.0"
