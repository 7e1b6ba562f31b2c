"""Bit supply for the parties' protocol choices.

Two backings exist:

* a file of random bytes (e.g. a pre-stored QRNG dump), read MSB-first and
  never rewound;
* a seeded counter-based stream. Block ``i`` of stream ``(seed, stream_id)``
  is ``blake2b(i as 8-byte little endian, key=sha256("qscf:<seed>:<stream_id>"),
  digest_size=64)``, giving 512 bits per block, MSB-first within each byte.

Because the seeded stream is addressable, bits can be skipped without being
generated, which the protocol engine uses to avoid materialising all ``2K``
preparation bits of a flip.

Physics randomness (loss, dark counts, measurement collapse) lives in a
separate numpy Generator, see :func:`physics_rng`.
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .qubit_states import LABELS, StateLabel

__all__ = [
    "EntropyExhausted",
    "BitSource",
    "FileBitSource",
    "SeededBitSource",
    "open_bit_source",
    "physics_rng",
    "ALICE_STREAM",
    "BOB_STREAM",
    "PHYSICS_STREAM",
]

ALICE_STREAM = 0
BOB_STREAM = 1
PHYSICS_STREAM = 2

_BLOCK_BYTES = 64


class EntropyExhausted(RuntimeError):
    def __init__(self, requested: int, available: int, consumed: int):
        super().__init__(
            f"entropy exhausted: requested {requested} bits, {available} left "
            f"after {consumed} consumed"
        )
        self.requested = requested
        self.available = available
        self.bits_consumed = consumed


class BitSource:
    """Forward-only bit cursor over some byte backing."""

    def __init__(self):
        self._cursor = 0

    @property
    def bits_consumed(self) -> int:
        return self._cursor

    @property
    def bits_remaining(self) -> Optional[int]:
        """Remaining bits, or ``None`` for an unbounded stream."""
        return None

    def _bytes(self, start: int, stop: int) -> bytes:
        raise NotImplementedError

    def _check(self, end: int, requested: int):
        rem = self.bits_remaining
        if rem is not None and end - self._cursor > rem:
            raise EntropyExhausted(requested, rem, self._cursor)

    def _bits_at(self, pos: int, n: int) -> np.ndarray:
        first, last = pos // 8, (pos + n + 7) // 8
        raw = np.frombuffer(self._bytes(first, last), dtype=np.uint8)
        off = pos - 8 * first
        return np.unpackbits(raw)[off:off + n]

    def peek_bits(self, offset: int, n: int) -> np.ndarray:
        """Bits ``[cursor + offset, cursor + offset + n)`` without consuming them."""
        if offset < 0 or n < 0:
            raise ValueError("offset and n must be non-negative")
        self._check(self._cursor + offset + n, offset + n)
        return self._bits_at(self._cursor + offset, n)

    def skip(self, n: int):
        """Consume ``n`` bits without returning them."""
        if n < 0:
            raise ValueError("n must be non-negative")
        self._check(self._cursor + n, n)
        self._cursor += n

    def draw_bits(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"must draw at least one bit, got n={n}")
        self._check(self._cursor + n, n)
        bits = self._bits_at(self._cursor, n)
        self._cursor += n
        return bits

    def draw_bit(self) -> int:
        return int(self.draw_bits(1)[0])

    def draw_state_choice(self) -> StateLabel:
        alpha, c = self.draw_bits(2)
        return StateLabel(int(alpha), int(c))

    def peek_state(self, slot: int) -> StateLabel:
        """Label of pulse ``slot`` (1-based) within the next ``2K``-bit block."""
        alpha, c = self.peek_bits(2 * (slot - 1), 2)
        return LABELS[2 * int(alpha) + int(c)]


class FileBitSource(BitSource):
    def __init__(self, path: Union[str, Path]):
        super().__init__()
        self.path = Path(path)
        self._data = self.path.read_bytes()
        if not self._data:
            raise OSError(f"random file {self.path} is empty")

    @property
    def bits_remaining(self) -> int:
        return 8 * len(self._data) - self._cursor

    def _bytes(self, start: int, stop: int) -> bytes:
        return self._data[start:stop]

    def __repr__(self):
        return f"FileBitSource({str(self.path)!r}, cursor={self._cursor})"


class SeededBitSource(BitSource):
    def __init__(self, seed: int, stream_id: int = 0):
        super().__init__()
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._key = hashlib.sha256(f"qscf:{self.seed}:{self.stream_id}".encode()).digest()
        self._cache: dict[int, bytes] = {}

    def _block(self, i: int) -> bytes:
        blk = self._cache.get(i)
        if blk is None:
            blk = hashlib.blake2b(
                i.to_bytes(8, "little"), key=self._key, digest_size=_BLOCK_BYTES
            ).digest()
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[i] = blk
        return blk

    def _bytes(self, start: int, stop: int) -> bytes:
        b0, b1 = start // _BLOCK_BYTES, (stop - 1) // _BLOCK_BYTES
        if b0 == b1:
            blk = self._block(b0)
            return blk[start - b0 * _BLOCK_BYTES:stop - b0 * _BLOCK_BYTES]
        joined = b"".join(self._block(i) for i in range(b0, b1 + 1))
        return joined[start - b0 * _BLOCK_BYTES:stop - b0 * _BLOCK_BYTES]

    def __repr__(self):
        return f"SeededBitSource(seed={self.seed}, stream_id={self.stream_id}, cursor={self._cursor})"


def open_bit_source(spec: Union[int, str, Path], stream_id: int = 0) -> BitSource:
    """Integer spec -> seeded stream; path spec -> random-byte file."""
    if isinstance(spec, (bool,)):
        raise TypeError("bit source spec must be a seed or a file path")
    if isinstance(spec, (int, np.integer)):
        return SeededBitSource(int(spec), stream_id)
    return FileBitSource(spec)


def physics_rng(seed: int, stream_id: int = PHYSICS_STREAM) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),)))
