"""Counter-based deterministic randomness.

All randomized operations in the package draw from this generator so that
runs are bit-reproducible given a seed.  Substreams are derived by label,
which keeps parallel trials independent without shared state.
"""

import hashlib
import struct


class Rng:
    """Seedable counter-based generator (blake2b over a 128-bit counter)."""

    __slots__ = ("_key", "_counter", "_buf", "_pos")

    def __init__(self, seed):
        if isinstance(seed, int):
            seed = seed.to_bytes((seed.bit_length() + 8) // 8, "little", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode()
        self._key = hashlib.blake2b(seed, digest_size=32).digest()
        self._counter = 0
        self._buf = b""
        self._pos = 0

    def derive(self, label):
        """Independent substream; `label` may be a string or an integer."""
        if isinstance(label, int):
            label = str(label)
        return Rng(self._key + b"/" + label.encode())

    def _refill(self):
        block = hashlib.blake2b(
            struct.pack("<QQ", self._counter & (2**64 - 1), self._counter >> 64),
            key=self._key,
            digest_size=64,
        ).digest()
        self._counter += 1
        self._buf = block
        self._pos = 0

    def bytes(self, n):
        out = bytearray()
        while n > 0:
            if self._pos >= len(self._buf):
                self._refill()
            take = min(n, len(self._buf) - self._pos)
            out += self._buf[self._pos : self._pos + take]
            self._pos += take
            n -= take
        return bytes(out)

    def bits(self, k):
        """Uniform integer in [0, 2^k)."""
        nbytes = (k + 7) // 8
        v = int.from_bytes(self.bytes(nbytes), "little")
        return v >> (8 * nbytes - k)

    def randint(self, lo, hi):
        """Uniform integer in [lo, hi] inclusive."""
        span = hi - lo + 1
        k = span.bit_length()
        while True:
            v = self.bits(k)
            if v < span:
                return lo + v

    def signed_bits(self, k):
        """Uniform integer in (-2^k, 2^k), symmetric."""
        return self.randint(-(2**k) + 1, 2**k - 1)

    def unit(self):
        """Uniform float in [0, 1) with 53 bits."""
        return self.bits(53) / float(2**53)

    def coin(self, p):
        """Bernoulli with probability `p`, consuming 64 bits."""
        return self.bits(64) < int(p * 2**64)
