"""Per-site POVM outcomes and their text serialization.

Each site carries one of six outcomes: a rank-two element F or a rank-one
element K, with an axis x, y or z.  Configurations are stored as two flat
uint8 arrays (kinds, axes) for cheap copying inside the sampler.

The generator here proposes outcomes uniformly over the six values; the
physical distribution (with its zero-probability configurations and
correlations) is produced only by the Metropolis chain in `sampler`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Lattice

AXES = ("x", "y", "z")
KINDS = ("F", "K")

AXIS_X, AXIS_Y, AXIS_Z = 0, 1, 2
KIND_F, KIND_K = 0, 1

#: canonical outcome order used everywhere an outcome index appears
OUTCOMES = ("Fx", "Fy", "Fz", "Kx", "Ky", "Kz")


@dataclass(frozen=True)
class PovmOutcome:
    """One of the six POVM outcomes."""

    kind: str  # "F" or "K"
    axis: str  # "x", "y" or "z"

    def __post_init__(self):
        if self.kind not in KINDS or self.axis not in AXES:
            raise ValueError(f"invalid outcome {self.kind}{self.axis}")

    @property
    def code(self) -> str:
        return self.kind + self.axis

    @property
    def index(self) -> int:
        return KINDS.index(self.kind) * 3 + AXES.index(self.axis)

    @classmethod
    def from_index(cls, i: int) -> "PovmOutcome":
        return cls(KINDS[i // 3], AXES[i % 3])


class ConfigError(ValueError):
    """Raised for malformed configuration text."""


@dataclass
class PovmConfig:
    """POVM outcome assignment for every lattice site."""

    lattice: Lattice
    kinds: np.ndarray  # uint8, 0 = F, 1 = K
    axes: np.ndarray  # uint8, 0 = x, 1 = y, 2 = z

    def __post_init__(self):
        n = self.lattice.n_sites
        self.kinds = np.asarray(self.kinds, dtype=np.uint8)
        self.axes = np.asarray(self.axes, dtype=np.uint8)
        if self.kinds.shape != (n,) or self.axes.shape != (n,):
            raise ConfigError("outcome count must equal site count")

    def outcome(self, site: int) -> PovmOutcome:
        return PovmOutcome(KINDS[self.kinds[site]], AXES[self.axes[site]])

    def outcomes(self) -> list[PovmOutcome]:
        return [self.outcome(s) for s in range(self.lattice.n_sites)]

    @property
    def n_k(self) -> int:
        """Number of sites with a K-type outcome, |J_K|."""
        return int(self.kinds.sum())

    def copy(self) -> "PovmConfig":
        return PovmConfig(self.lattice, self.kinds.copy(), self.axes.copy())

    def key(self) -> bytes:
        """Hashable identity of the outcome assignment."""
        return (self.kinds * 3 + self.axes).tobytes()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PovmConfig)
            and self.lattice is other.lattice
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.axes, other.axes)
        )


def config_from_indices(lattice: Lattice, indices) -> PovmConfig:
    """Build a config from outcome indices in the canonical Fx..Kz order."""
    idx = np.asarray(indices, dtype=np.uint8)
    return PovmConfig(lattice, idx // 3, idx % 3)


def random_config(lattice: Lattice, rng: np.random.Generator) -> PovmConfig:
    """Assign one of the six outcomes uniformly and independently per site.

    Compatibility (nonzero physical weight) is not guaranteed.
    """
    idx = rng.integers(0, 6, size=lattice.n_sites, dtype=np.uint8)
    return config_from_indices(lattice, idx)


def serialize_config(config: PovmConfig) -> str:
    """Render a config as height rows of width two-character codes."""
    lat = config.lattice
    rows = []
    for y in range(lat.height):
        row = [config.outcome(lat.site_index(x, y)).code for x in range(lat.width)]
        rows.append(" ".join(row))
    return "\n".join(rows)


def parse_config(text: str, lattice: Lattice) -> PovmConfig:
    """Parse the grid text format; inverse of `serialize_config`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != lattice.height:
        raise ConfigError(f"expected {lattice.height} rows, got {len(lines)}")
    kinds = np.zeros(lattice.n_sites, dtype=np.uint8)
    axes = np.zeros(lattice.n_sites, dtype=np.uint8)
    for y, line in enumerate(lines):
        tokens = line.split()
        if len(tokens) != lattice.width:
            raise ConfigError(
                f"row {y}: expected {lattice.width} entries, got {len(tokens)}"
            )
        for x, tok in enumerate(tokens):
            if len(tok) != 2 or tok[0] not in KINDS or tok[1] not in AXES:
                raise ConfigError(f"row {y}, column {x}: bad token {tok!r}")
            s = lattice.site_index(x, y)
            kinds[s] = KINDS.index(tok[0])
            axes[s] = AXES.index(tok[1])
    return PovmConfig(lattice, kinds, axes)
