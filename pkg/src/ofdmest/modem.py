"""
Bit/symbol mapping, pilot-grid frame assembly and the OFDM modulator.

Labeling is fixed so BER numbers are reproducible:

* BPSK: bit 0 -> +1, bit 1 -> -1.
* QPSK: first bit drives I, second drives Q, 0 -> +1/sqrt(2), 1 -> -1/sqrt(2).
* QAM16: first two bits drive I, last two drive Q, each pair Gray coded
  00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3, scaled by 1/sqrt(10).

4-QAM is treated as QPSK.
"""

from dataclasses import dataclass, field

import numpy as np

from .numkernel import dft

# Gray-coded 2-bit -> 4-PAM level
_GRAY_PAM4 = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}

_ALIASES = {
    "bpsk": "BPSK",
    "qpsk": "QPSK",
    "4qam": "QPSK",
    "qam4": "QPSK",
    "4-qam": "QPSK",
    "qam16": "QAM16",
    "16qam": "QAM16",
    "16-qam": "QAM16",
}


def _build_points(kind: str) -> np.ndarray:
    if kind == "BPSK":
        return np.array([1.0 + 0j, -1.0 + 0j])
    if kind == "QPSK":
        amp = 1.0 / np.sqrt(2.0)
        pts = np.empty(4, dtype=complex)
        for label in range(4):
            i_bit, q_bit = label >> 1, label & 1
            pts[label] = amp * ((1 - 2 * i_bit) + 1j * (1 - 2 * q_bit))
        return pts
    if kind == "QAM16":
        pts = np.empty(16, dtype=complex)
        for label in range(16):
            pts[label] = _GRAY_PAM4[label >> 2] + 1j * _GRAY_PAM4[label & 0b11]
        return pts / np.sqrt(10.0)
    raise ValueError(f"unknown constellation {kind!r}")


@dataclass(frozen=True)
class Constellation:
    """A labeled unit-energy constellation.

    ``points[label]`` is the symbol for the integer whose big-endian bits are
    the label.
    """

    kind: str
    points: np.ndarray = field(repr=False, compare=False)
    bits_per_symbol: int

    @classmethod
    def from_name(cls, name: str) -> "Constellation":
        kind = _ALIASES.get(name.strip().lower())
        if kind is None:
            raise ValueError(
                f"unknown constellation {name!r}; expected one of bpsk, qpsk, qam16")
        points = _build_points(kind)
        points.setflags(write=False)
        return cls(kind, points, int(np.log2(points.size)))

    @property
    def beta(self) -> float:
        """``E|x|^2 * E|1/x|^2`` over equiprobable points."""
        p2 = np.abs(self.points) ** 2
        return float(np.mean(p2) * np.mean(1.0 / p2))

    @property
    def energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


@dataclass(frozen=True)
class PilotScheme:
    """Pilot placement.

    ``kind`` is ``"block"`` (whole symbols every `period` symbols, starting at
    symbol 0), ``"comb"`` (subcarriers 0, spacing, 2*spacing, ... of every
    symbol) or ``"none"``.
    """

    kind: str = "comb"
    period: int = 5
    spacing: int = 4
    value: complex = 1 + 0j

    def __post_init__(self):
        if self.kind not in ("block", "comb", "none"):
            raise ValueError(f"unknown pilot kind {self.kind!r}")
        if self.kind == "block" and self.period < 1:
            raise ValueError("block pilot period must be >= 1")
        if self.kind == "comb" and self.spacing < 2:
            raise ValueError("comb pilot spacing must be >= 2")
        if abs(abs(self.value) - 1.0) > 1e-12:
            raise ValueError("pilot value must have unit magnitude")

    def positions(self, n_subcarriers: int) -> np.ndarray:
        """Comb pilot subcarrier indices."""
        return np.arange(0, n_subcarriers, self.spacing)

    def mask(self, n_symbols: int, n_subcarriers: int) -> np.ndarray:
        mask = np.zeros((n_symbols, n_subcarriers), dtype=bool)
        if self.kind == "block":
            mask[::self.period, :] = True
        elif self.kind == "comb":
            if n_subcarriers % self.spacing:
                raise ValueError(
                    f"pilot spacing {self.spacing} must divide N={n_subcarriers}")
            mask[:, ::self.spacing] = True
        return mask


@dataclass(frozen=True)
class OfdmConfig:
    n_subcarriers: int = 64
    cp_length: int = 16
    constellation: Constellation = field(
        default_factory=lambda: Constellation.from_name("qam16"))
    pilots: PilotScheme = field(default_factory=PilotScheme)

    def __post_init__(self):
        n = self.n_subcarriers
        if n < 1 or n & (n - 1):
            raise ValueError(f"n_subcarriers must be a power of two, got {n}")
        if not 0 < self.cp_length < n:
            raise ValueError(
                f"cp_length must satisfy 0 < cp_length < n_subcarriers "
                f"(got {self.cp_length}, {n})")
        if self.pilots.kind == "comb" and n % self.pilots.spacing:
            raise ValueError(
                f"pilot spacing {self.pilots.spacing} must divide N={n}")

    @property
    def symbol_length(self) -> int:
        return self.n_subcarriers + self.cp_length


@dataclass(frozen=True)
class Frame:
    """Frequency-domain transmit grid (symbols x subcarriers)."""

    grid: np.ndarray
    pilot_mask: np.ndarray
    payload_bits: np.ndarray

    @property
    def n_symbols(self) -> int:
        return self.grid.shape[0]

    @property
    def data_symbols(self) -> np.ndarray:
        """Data cells in row-major order."""
        return self.grid[~self.pilot_mask]


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map a bit sequence onto constellation points, `bits_per_symbol` at a time."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    k = c.bits_per_symbol
    if bits.size % k:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of {k} ({c.kind})")
    groups = bits.reshape(-1, k)
    weights = 1 << np.arange(k - 1, -1, -1)
    return c.points[groups @ weights]


def demap_symbols(symbols, c: Constellation) -> np.ndarray:
    """Hard minimum-distance decisions, returned as bits."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    labels = np.argmin(np.abs(symbols[:, None] - c.points[None, :]), axis=1)
    k = c.bits_per_symbol
    shifts = np.arange(k - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def hard_decision(symbols, c: Constellation) -> np.ndarray:
    """Nearest constellation point for every input symbol."""
    symbols = np.asarray(symbols, dtype=complex)
    flat = symbols.ravel()
    labels = np.argmin(np.abs(flat[:, None] - c.points[None, :]), axis=1)
    return c.points[labels].reshape(symbols.shape)


def payload_capacity(cfg: OfdmConfig, n_symbols: int) -> int:
    """Number of payload bits carried by a frame of `n_symbols` symbols."""
    mask = cfg.pilots.mask(n_symbols, cfg.n_subcarriers)
    return int((~mask).sum()) * cfg.constellation.bits_per_symbol


def assemble_frame(bits, cfg: OfdmConfig, n_symbols: int) -> Frame:
    """Place pilots and mapped data on an ``n_symbols x N`` grid.

    Only the first :func:`payload_capacity` bits are consumed; they are
    recorded as ``payload_bits``.
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    mask = cfg.pilots.mask(n_symbols, cfg.n_subcarriers)
    need = int((~mask).sum()) * cfg.constellation.bits_per_symbol
    if bits.size < need:
        raise ValueError(f"need {need} payload bits, got {bits.size}")
    payload = bits[:need].copy()
    grid = np.empty(mask.shape, dtype=complex)
    grid[mask] = cfg.pilots.value
    grid[~mask] = map_bits(payload, cfg.constellation)
    for arr in (grid, mask, payload):
        arr.setflags(write=False)
    return Frame(grid, mask, payload)


def ofdm_modulate(freq_row, cfg: OfdmConfig) -> np.ndarray:
    """Inverse DFT plus cyclic prefix.

    Works on a single row of length N or on a ``(symbols, N)`` grid; the
    output has ``N + cp_length`` samples per row, the prefix being a copy of
    the last `cp_length` samples.
    """
    x = np.asarray(freq_row, dtype=complex)
    if x.shape[-1] != cfg.n_subcarriers:
        raise ValueError(
            f"expected {cfg.n_subcarriers} subcarriers, got {x.shape[-1]}")
    time = dft(x, inverse=True)
    return np.concatenate([time[..., -cfg.cp_length:], time], axis=-1)


def ofdm_demodulate(time_row, cfg: OfdmConfig) -> np.ndarray:
    """Drop the cyclic prefix and take the forward DFT."""
    y = np.asarray(time_row, dtype=complex)
    if y.shape[-1] != cfg.symbol_length:
        raise ValueError(
            f"expected {cfg.symbol_length} samples, got {y.shape[-1]}")
    return dft(y[..., cfg.cp_length:])
