"""Counter-based random streams.

Every random number consumed by a simulation is addressed by the tuple
(master_seed, sample_index, step, draw).  This makes ensemble output a pure
function of the master seed and the sample index, independent of worker
scheduling, and lets an interrupted run be replayed bit-exactly by rerunning
the same sample.
"""

import numba
import numpy as np

_U64 = np.uint64

_GAMMA = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@numba.njit(numba.uint64(numba.uint64), cache=True, nogil=True, inline="always")
def _mix64(z):
    # splitmix64 finalizer: a bijective avalanche on 64 bits
    z = (z + _GAMMA) & _U64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


@numba.njit(numba.uint64(numba.uint64, numba.uint64, numba.uint64, numba.uint64),
            cache=True, nogil=True, inline="always")
def counter_bits(master_seed, sample, step, draw):
    h = _mix64(master_seed)
    h = _mix64(h ^ sample)
    h = _mix64(h ^ step)
    h = _mix64(h ^ draw)
    return h


@numba.njit(numba.float64(numba.uint64, numba.uint64, numba.uint64, numba.uint64),
            cache=True, nogil=True, inline="always")
def counter_uniform(master_seed, sample, step, draw):
    """Uniform on the half-open interval (0, 1]; never exactly 0."""
    bits = counter_bits(master_seed, sample, step, draw)
    return float((bits >> _U64(11)) + _U64(1)) * _INV53


def uniform(master_seed: int, sample: int, step: int, draw: int = 0) -> float:
    """Python-callable view of the counter stream used inside kernels."""
    return float(counter_uniform(_U64(master_seed & 0xFFFFFFFFFFFFFFFF),
                                 _U64(sample), _U64(step), _U64(draw)))


def derive_generator(master_seed: int, sample: int) -> np.random.Generator:
    """Philox generator keyed by (master_seed, sample); counter-based too."""
    return np.random.Generator(np.random.Philox(key=[master_seed & (2**64 - 1), sample]))
