"""Counter-based random streams.

Every stream is Philox4x32-10 keyed by the 64-bit master seed. The 128-bit
counter is ``(block_lo, block_hi, replica, channel)``, so a stream id picks a
disjoint slice of counter space and any block can be generated on demand.
Simulation kernels read whole blocks (four 32-bit words, i.e. two 53-bit
uniforms) straight from the buffer.
"""
import zlib

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_SHIFT = np.uint64(32)

_INV53 = 1.0 / 9007199254740992.0

MAX_BUFFER_BLOCKS = 1 << 16


@nb.njit(cache=True, nogil=True)
def _philox_fill_flat(flat, start, c2, c3, k0, k1):
    x2 = np.uint32(c2)
    x3 = np.uint32(c3)
    key0 = np.uint32(k0)
    key1 = np.uint32(k1)
    # flat 1-d indexing keeps this loop SIMD-vectorizable
    for i in range(flat.shape[0] // 4):
        a = np.uint32(start + i)
        b = np.uint32((start + i) >> 32)
        c = x2
        d = x3
        s0 = key0
        s1 = key1
        for _ in range(10):
            p0 = _M0 * np.uint64(a)
            p1 = _M1 * np.uint64(c)
            a, b, c, d = (
                np.uint32(p1 >> _SHIFT) ^ b ^ s0,
                np.uint32(p1),
                np.uint32(p0 >> _SHIFT) ^ d ^ s1,
                np.uint32(p0),
            )
            s0 = np.uint32(s0 + _W0)
            s1 = np.uint32(s1 + _W1)
        flat[4 * i] = a
        flat[4 * i + 1] = b
        flat[4 * i + 2] = c
        flat[4 * i + 3] = d


def philox_fill(out, start, c2, c3, k0, k1):
    """Write blocks ``start, start+1, ...`` of one stream into ``out`` (C-contiguous, shape (n, 4), uint32)."""
    _philox_fill_flat(out.reshape(-1), start, c2, c3, k0, k1)


@nb.njit(inline="always")
def u53(a, b):
    """Uniform on [0, 1) with 53 random bits from two 32-bit words."""
    x = ((np.uint64(a) << _SHIFT) | np.uint64(b)) >> np.uint64(11)
    return np.int64(x) * _INV53


@nb.njit(inline="always")
def u53_open(a, b):
    """Uniform on (0, 1); safe to take a logarithm of."""
    x = ((np.uint64(a) << _SHIFT) | np.uint64(b)) >> np.uint64(11)
    return (np.int64(x) + 0.5) * _INV53


@nb.njit(cache=True, nogil=True)
def _blocks_to_uniforms(blocks, out):
    n = out.shape[0]
    for i in range(n):
        j = i >> 1
        if i & 1:
            out[i] = u53(blocks[j, 2], blocks[j, 3])
        else:
            out[i] = u53(blocks[j, 0], blocks[j, 1])


def channel_code(channel):
    """Stable 32-bit code for a channel tag."""
    return zlib.crc32(channel.encode("utf-8")) & 0xFFFFFFFF


class RngStream:
    """A position in one Philox stream identified by ``(master_seed, replica, channel)``.

    The stream is a pure function of its id; the only mutable state is the
    index of the next unconsumed block.
    """

    def __init__(self, master_seed, replica=0, channel="dynamics"):
        master_seed = int(master_seed)
        replica = int(replica)
        if not 0 <= master_seed < 2**64:
            raise ValueError(f"master_seed must fit in 64 bits, got {master_seed}")
        if not 0 <= replica < 2**32:
            raise ValueError(f"replica must fit in 32 bits, got {replica}")
        self.master_seed = master_seed
        self.replica = replica
        self.channel = str(channel)
        self._key = (master_seed & 0xFFFFFFFF, master_seed >> 32)
        self._ctr = (replica, channel_code(self.channel))
        self.position = 0

    @property
    def stream_id(self):
        return (self.replica, self.channel)

    def __repr__(self):
        return (f"RngStream(master_seed={self.master_seed}, replica={self.replica}, "
                f"channel={self.channel!r}, position={self.position})")

    def spawn(self, replica=None, channel=None):
        """A fresh stream sharing the master seed, positioned at block 0."""
        return RngStream(
            self.master_seed,
            self.replica if replica is None else replica,
            self.channel if channel is None else channel,
        )

    def peek_blocks(self, n, start=None):
        """Blocks ``[start, start+n)`` (default: from the current position) without consuming them."""
        out = np.empty((int(n), 4), dtype=np.uint32)
        philox_fill(out, self.position if start is None else int(start),
                    self._ctr[0], self._ctr[1], self._key[0], self._key[1])
        return out

    def advance(self, n_blocks):
        self.position += int(n_blocks)

    def blocks(self, n):
        out = self.peek_blocks(n)
        self.advance(n)
        return out

    def uniforms(self, n):
        """``n`` uniforms on [0, 1); consumes ``ceil(n / 2)`` blocks."""
        n = int(n)
        out = np.empty(n, dtype=np.float64)
        if n:
            _blocks_to_uniforms(self.blocks((n + 1) // 2), out)
        return out
