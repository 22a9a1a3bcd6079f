"""Parameter sample sets: i.i.d. uniform, digitally shifted Sobol', and the nominal point."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import qmc

__all__ = [
    "ParameterBox",
    "SampleSet",
    "derive_seed",
    "sample_iid",
    "sample_sobol",
    "nominal_point",
    "nominal_set",
    "MAX_SOBOL_DIM",
]

# scipy ships Joe-Kuo direction numbers for far more dimensions; this caps what we support.
MAX_SOBOL_DIM = 8
_SOBOL_BITS = 32


@dataclass(frozen=True, eq=False)
class ParameterBox:
    """Product of closed intervals; every coordinate is modeled as uniform on its interval."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise ValueError("box bounds must be nonempty 1-D arrays of equal length")
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)) or np.any(lo > hi):
            raise ValueError("parameter box is empty or unbounded")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def scale(self, unit: np.ndarray) -> np.ndarray:
        pts = self.lower + unit * (self.upper - self.lower)
        # guard against rounding past the upper face
        return np.clip(pts, self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class SampleSet:
    points: np.ndarray
    generator: str
    seed: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty (N, dim) array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def provenance(self) -> dict:
        return {"generator": self.generator, "seed": int(self.seed), "N": self.N}

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"xi{j + 1}" for j in range(self.dim)])
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, generator: str = "file", seed: int = 0) -> "SampleSet":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        return cls(np.array([[float(v) for v in r] for r in rows[1:]]), generator, seed)

    def concat(self, other: "SampleSet") -> "SampleSet":
        return SampleSet(np.vstack([self.points, other.points]), "concat", 0)


def _as_box(box) -> ParameterBox:
    if isinstance(box, ParameterBox):
        return box
    if hasattr(box, "lower") and hasattr(box, "upper"):
        return ParameterBox(box.lower, box.upper)
    lo, hi = box
    return ParameterBox(lo, hi)


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 64-bit subseed for a replication key, e.g. ``derive_seed(s, N, r)``."""
    ss = np.random.SeedSequence(entropy=[int(seed), *[int(k) for k in key]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_iid(box, n: int, seed: int) -> SampleSet:
    """``n`` independent points uniform on ``box`` from a PCG64 stream keyed by ``seed``."""
    box = _as_box(box)
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    unit = rng.random((n, box.dim))
    return SampleSet(box.scale(unit), "iid", int(seed))


def _sobol_unit(n: int, dim: int, seed: int) -> np.ndarray:
    if dim > MAX_SOBOL_DIM:
        raise ValueError(f"Sobol' dimension {dim} exceeds the supported maximum {MAX_SOBOL_DIM}")
    eng = qmc.Sobol(d=dim, scramble=False, bits=_SOBOL_BITS)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # balance warning for n not a power of 2
        raw = eng.random(n + 1)[1:]
    ints = np.round(raw * 2.0**_SOBOL_BITS).astype(np.uint64)
    if seed != 0:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
        shift = rng.integers(0, 2**_SOBOL_BITS, size=dim, dtype=np.uint64)
        ints = ints ^ shift
    return ints.astype(float) / 2.0**_SOBOL_BITS


def sample_sobol(box, n: int, seed: int) -> SampleSet:
    """First ``n`` Sobol' points after the origin, with a random digital shift.

    ``seed == 0`` leaves the sequence unrandomized.
    """
    box = _as_box(box)
    if n < 1:
        raise ValueError("n must be at least 1")
    return SampleSet(box.scale(_sobol_unit(n, box.dim, int(seed))), "sobol", int(seed))


def nominal_point(box) -> np.ndarray:
    """Mean of the uniform distribution on ``box``: the interval midpoints."""
    box = _as_box(box)
    return 0.5 * (box.lower + box.upper)


def nominal_set(box) -> SampleSet:
    return SampleSet(nominal_point(box)[None, :], "nominal", 0)
