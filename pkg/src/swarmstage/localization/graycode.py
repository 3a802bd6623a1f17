"""Reflected-binary gray codes and the projected-pattern position channel.

Tabletop robots read a per-axis gray code flashed from overhead: each
frame carries one bit of the current grid cell index. Decoding the frame
sequence recovers the cell, hence the position to within half a cell
pitch. The projector refresh itself is abstracted away; frames arrive as
an ordered sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..errors import InvalidInputError

DEFAULT_WIDTH_BITS = 10


def gray_encode(cell: int, width_bits: int = DEFAULT_WIDTH_BITS) -> tuple[int, ...]:
    """Bits (MSB first) of the reflected-binary code g = n ^ (n >> 1)."""
    if not 0 <= cell < (1 << width_bits):
        raise InvalidInputError(f"cell {cell} outside [0, 2^{width_bits})")
    g = cell ^ (cell >> 1)
    return tuple((g >> (width_bits - 1 - i)) & 1 for i in range(width_bits))


def gray_decode(bits: Sequence[int]) -> int:
    """Exact inverse of :func:`gray_encode` for an MSB-first bit sequence."""
    g = 0
    for b in bits:
        if b not in (0, 1):
            raise InvalidInputError("bits must be 0 or 1")
        g = (g << 1) | b
    n = g
    mask = g >> 1
    while mask:
        n ^= mask
        mask >>= 1
    return n


@dataclass(frozen=True)
class GrayFrame:
    """One photodiode sample: a single bit of one axis' cell code."""

    axis: str            # "x" or "y"
    bit_index: int       # 0 = MSB
    sample: int          # photodiode reading, 0 or 1

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise InvalidInputError("axis must be 'x' or 'y'")
        if self.sample not in (0, 1):
            raise InvalidInputError("sample must be a bit")
        if self.bit_index < 0:
            raise InvalidInputError("bit_index must be >= 0")


def cell_pitch(extent: float, width_bits: int = DEFAULT_WIDTH_BITS) -> float:
    return extent / float(1 << width_bits)


def simulate_projection(
    tag_xy: tuple[float, float],
    venue: tuple[float, float] = (6.0, 12.0),
    width_bits: int = DEFAULT_WIDTH_BITS,
) -> Optional[list[GrayFrame]]:
    """Frames a photodiode at ``tag_xy`` would read, or None out of coverage."""
    x, y = tag_xy
    w, d = venue
    if not (0.0 <= x <= w and 0.0 <= y <= d):
        return None
    n_cells = 1 << width_bits
    frames = []
    for axis, value, extent in (("x", x, w), ("y", y, d)):
        cell = min(int(value / cell_pitch(extent, width_bits)), n_cells - 1)
        for i, bit in enumerate(gray_encode(cell, width_bits)):
            frames.append(GrayFrame(axis, i, bit))
    return frames


def decode_projection(
    frames: Sequence[GrayFrame],
    venue: tuple[float, float] = (6.0, 12.0),
    width_bits: int = DEFAULT_WIDTH_BITS,
) -> tuple[float, float]:
    """Recover the cell-center position from a full frame sequence."""
    bits = {"x": {}, "y": {}}
    for f in frames:
        if f.bit_index >= width_bits:
            raise InvalidInputError("bit_index beyond code width")
        bits[f.axis][f.bit_index] = f.sample
    out = []
    for axis, extent in (("x", venue[0]), ("y", venue[1])):
        axis_bits = bits[axis]
        if len(axis_bits) != width_bits:
            raise InvalidInputError(f"incomplete {axis} code: {len(axis_bits)} bits")
        cell = gray_decode([axis_bits[i] for i in range(width_bits)])
        out.append((cell + 0.5) * cell_pitch(extent, width_bits))
    return out[0], out[1]
