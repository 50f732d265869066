"""Shell-model cascade systems on a geometric hierarchy of scales.

A state assigns a real velocity V_i to every shell i = 0..r, where shell i
carries the characteristic length l0 * p**-i.  Every model here is a
quadratic ODE system

    dV_i/dt = sum_k c_k V_{i+a_k} V_{i+b_k} - (nu V)_i + f_i,

and the quadratic part is materialized as an explicit CouplingTable so it
can be audited, serialized, and compared independently of how it was
generated.  Shells outside 0..r are identically zero; interactions that
would reach them are dropped when a table is built.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, NumericError

__all__ = [
    "ModelFamily",
    "ModelSpec",
    "ShellState",
    "CouplingEntry",
    "CouplingTable",
    "HMatrix",
    "DissipationSpec",
    "ForcingSpec",
    "CouplingComparison",
    "build_s2_diag",
    "build_s3_diag",
    "build_s2_offdiag",
    "build_goy",
    "build_general",
    "h_diag",
    "h_offdiag",
    "eval_rhs",
    "compare_couplings",
    "as_shell_array",
]


def _pow(base: float, expo: float) -> float:
    """base**expo with integral exponents routed through exact integer powers.

    Coupling coefficients must be reproducible byte for byte, so an integral
    exponent of an integral base is evaluated in integer arithmetic and
    rounded exactly once; an integral exponent of a general base is a plain
    product loop; everything else is a single math.pow call.
    """
    e = float(expo)
    if e.is_integer():
        n = int(e)
        b = float(base)
        if b.is_integer():
            try:
                value = float(int(b) ** abs(n))
            except OverflowError:
                value = math.inf
            return value if n >= 0 else 1.0 / value
        out = 1.0
        factor = b if n >= 0 else 1.0 / b
        for _ in range(abs(n)):
            out *= factor
        return out
    return math.pow(float(base), e)


class ModelFamily(str, Enum):
    """Supported model families, keyed by interaction order and h structure."""

    S2_DIAG = "s2_diag"
    S3_DIAG = "s3_diag"
    S2_OFFDIAG = "s2_offdiag"
    GOY = "goy"
    GENERAL = "general"

    @classmethod
    def from_name(cls, name: str) -> "ModelFamily":
        try:
            return cls(name)
        except ValueError:
            known = ", ".join(sorted(m.value for m in cls))
            raise ConfigurationError(
                f"unknown model family {name!r}; expected one of: {known}"
            ) from None


# Interaction order s per closed-form family; GENERAL carries its own s.
_MODEL_ORDER = {
    ModelFamily.S2_DIAG: 2,
    ModelFamily.S3_DIAG: 3,
    ModelFamily.S2_OFFDIAG: 2,
    ModelFamily.GOY: 2,
}


@dataclass(frozen=True)
class ModelSpec:
    """Parameters identifying one concrete model instance.

    For the GOY family the scale ratio lambda is stored in the ``p`` slot
    (it plays the same role) and ``eps``/``a`` are its remaining knobs; the
    other families use integer ``p`` with the weight exponent ``gamma`` and
    amplitude ``h0``.
    """

    family: ModelFamily
    p: float
    r: int
    gamma: float = 0.0
    h0: float = 1.0
    s: int = 2
    alpha: float = 0.0
    eps: float = 0.0
    a: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.family, ModelFamily):
            object.__setattr__(self, "family", ModelFamily.from_name(str(self.family)))
        for name in ("p", "gamma", "h0", "alpha", "eps", "a"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ConfigurationError(f"{name} must be a real number, got {value!r}") from None
            if not math.isfinite(value):
                raise ConfigurationError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        try:
            object.__setattr__(self, "r", operator.index(self.r))
            object.__setattr__(self, "s", operator.index(self.s))
        except TypeError:
            raise ConfigurationError("r and s must be integers") from None

        if self.family is ModelFamily.GOY:
            if self.p <= 1.0:
                raise ConfigurationError(f"GOY scale ratio must exceed 1, got {self.p}")
        else:
            if not float(self.p).is_integer() or self.p < 2:
                raise ConfigurationError(f"p must be an integer >= 2, got {self.p}")

        expected = _MODEL_ORDER.get(self.family)
        if expected is not None and self.s != expected:
            raise ConfigurationError(
                f"family {self.family.value} has interaction order s={expected}, got s={self.s}"
            )
        if self.s < 1:
            raise ConfigurationError(f"s must be at least 1, got {self.s}")
        # Boundary corrections span 2s shells on each side.
        if self.r < 2 * self.s:
            raise ConfigurationError(
                f"r={self.r} too small for s={self.s}: need r >= 2s = {2 * self.s}"
            )


@dataclass(frozen=True, eq=False)
class ShellState:
    """Velocities on shells 0..r.  Indexing outside the range reads 0.0."""

    v: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.v, dtype=float, copy=True)
        if arr.ndim != 1 or arr.size < 2:
            raise ConfigurationError("shell state must be a 1-D vector of length r+1 >= 2")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ConfigurationError(f"shell state has a non-finite entry at shell {bad}")
        arr.setflags(write=False)
        object.__setattr__(self, "v", arr)

    @property
    def r(self) -> int:
        return self.v.size - 1

    def __len__(self) -> int:
        return self.v.size

    def __getitem__(self, i: int) -> float:
        if 0 <= i <= self.r:
            return float(self.v[i])
        return 0.0


def as_shell_array(state: "ShellState | Sequence[float] | np.ndarray", r: int) -> np.ndarray:
    """Validate and return a state as a plain float vector of length r+1."""
    arr = state.v if isinstance(state, ShellState) else np.asarray(state, dtype=float)
    if arr.ndim != 1 or arr.size != r + 1:
        raise ConfigurationError(f"state must have length r+1 = {r + 1}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ConfigurationError(f"state has a non-finite entry at shell {bad}")
    return arr


class CouplingEntry(NamedTuple):
    """One quadratic interaction: c * V[i+a] * V[i+b] feeding dV[i]/dt."""

    i: int
    a: int
    b: int
    c: float


@dataclass(frozen=True)
class CouplingTable:
    """Canonical sparse quadratic right-hand side.

    Entries are strictly sorted by (i, a, b) with a <= b, reference only
    shells inside 0..r, and never carry a zero coefficient; each unordered
    product V[i+a]V[i+b] appears at most once per shell with its total
    coefficient.  That makes the table a single ground truth for audits,
    serialization, and golden-file comparisons.
    """

    r: int
    entries: tuple[CouplingEntry, ...]
    spec: ModelSpec | None = None

    def __post_init__(self) -> None:
        r = operator.index(self.r)
        if r < 1:
            raise ConfigurationError(f"r must be at least 1, got {r}")
        object.__setattr__(self, "r", r)
        entries = tuple(
            e if isinstance(e, CouplingEntry) else CouplingEntry(*e) for e in self.entries
        )
        prev: tuple[int, int, int] | None = None
        for e in entries:
            if e.a > e.b:
                raise ConfigurationError(f"entry {e} is not canonical: need a <= b")
            if not (0 <= e.i <= r and 0 <= e.i + e.a <= r and 0 <= e.i + e.b <= r):
                raise ConfigurationError(f"entry {e} references shells outside 0..{r}")
            if not math.isfinite(e.c) or e.c == 0.0:
                raise ConfigurationError(f"entry {e} must carry a finite nonzero coefficient")
            key = (e.i, e.a, e.b)
            if prev is not None and key <= prev:
                raise ConfigurationError(f"entries must be strictly sorted by (i, a, b) at {key}")
            prev = key
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_entries(
        cls,
        r: int,
        rows: Iterable[tuple[int, int, int, float]],
        spec: ModelSpec | None = None,
    ) -> "CouplingTable":
        """Canonicalize raw rows: order a <= b, merge duplicates, drop zeros."""
        acc: dict[tuple[int, int, int], float] = {}
        for i, a, b, c in rows:
            i, a, b = operator.index(i), operator.index(a), operator.index(b)
            if a > b:
                a, b = b, a
            if not (0 <= i <= r and 0 <= i + a <= r and 0 <= i + b <= r):
                raise ConfigurationError(
                    f"coupling ({i}, {a}, {b}) references shells outside 0..{r}"
                )
            c = float(c)
            if not math.isfinite(c):
                raise ConfigurationError(f"coupling ({i}, {a}, {b}) has non-finite coefficient")
            key = (i, a, b)
            acc[key] = acc.get(key, 0.0) + c
        entries = tuple(
            CouplingEntry(i, a, b, c) for (i, a, b), c in sorted(acc.items()) if c != 0.0
        )
        return cls(r=r, entries=entries, spec=spec)

    @cached_property
    def _index(self) -> dict[tuple[int, int, int], float]:
        return {(e.i, e.a, e.b): e.c for e in self.entries}

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        ii = np.fromiter((e.i for e in self.entries), dtype=np.intp, count=len(self.entries))
        ia = np.fromiter((e.i + e.a for e in self.entries), dtype=np.intp, count=len(self.entries))
        ib = np.fromiter((e.i + e.b for e in self.entries), dtype=np.intp, count=len(self.entries))
        cc = np.fromiter((e.c for e in self.entries), dtype=float, count=len(self.entries))
        return ii, ia, ib, cc

    @property
    def max_offset(self) -> int:
        """Largest shell offset any entry reaches; 0 for an empty table."""
        if not self.entries:
            return 0
        return max(max(abs(e.a), abs(e.b)) for e in self.entries)

    def coefficient(self, i: int, a: int, b: int) -> float:
        """The coefficient at (i, a, b), or 0.0 when the coupling is absent."""
        if a > b:
            a, b = b, a
        return self._index.get((i, a, b), 0.0)

    def row_entries(self, i: int) -> tuple[CouplingEntry, ...]:
        return tuple(e for e in self.entries if e.i == i)

    def quadratic_rhs(self, v: np.ndarray) -> np.ndarray:
        """Signed quadratic right-hand side, one component per shell."""
        ii, ia, ib, cc = self._arrays
        out = np.zeros(self.r + 1)
        if cc.size:
            # overflow here surfaces as a non-finite entry for the caller's check
            with np.errstate(over="ignore", invalid="ignore"):
                np.add.at(out, ii, cc * v[ia] * v[ib])
        return out

    def term_scale(self, v: np.ndarray) -> np.ndarray:
        """Per-shell sum of absolute term magnitudes, the natural residual scale."""
        ii, ia, ib, cc = self._arrays
        out = np.zeros(self.r + 1)
        if cc.size:
            np.add.at(out, ii, np.abs(cc * v[ia] * v[ib]))
        return out

    def restricted_to_rows(self, lo: int, hi: int) -> "CouplingTable":
        """Keep only the rows lo <= i <= hi (shells elsewhere stop evolving)."""
        kept = [(e.i, e.a, e.b, e.c) for e in self.entries if lo <= e.i <= hi]
        return CouplingTable.from_entries(self.r, kept, spec=self.spec)

    def to_tsv(self) -> str:
        """One line per entry: i, a, b, c with 17 significant digits."""
        lines = [f"{e.i}\t{e.a}\t{e.b}\t{e.c:.17g}" for e in self.entries]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_tsv(cls, text: str, r: int, spec: ModelSpec | None = None) -> "CouplingTable":
        rows = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ConfigurationError(f"coupling line {lineno} must have 4 fields")
            rows.append((int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])))
        return cls.from_entries(r, rows, spec=spec)


@dataclass(frozen=True, eq=False)
class HMatrix:
    """Symmetric shell-space weight h entering the second quadratic sum."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ConfigurationError("h must be a square matrix")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("h must be finite")
        if not np.array_equal(arr, arr.T):
            raise ConfigurationError("h must be symmetric")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def r(self) -> int:
        return self.values.shape[0] - 1

    @property
    def bandwidth(self) -> int:
        nz = np.nonzero(self.values)
        if nz[0].size == 0:
            return 0
        return int(np.max(np.abs(nz[0] - nz[1])))


def h_diag(p: float, r: int, gamma: float, h0: float = 1.0) -> HMatrix:
    """Diagonal weight h_ij = h0 * p**(gamma*i) * delta_ij."""
    vals = np.zeros((r + 1, r + 1))
    for i in range(r + 1):
        vals[i, i] = h0 * _pow(p, gamma * i)
    return HMatrix(vals)


def h_offdiag(p: float, r: int, gamma: float, h0: float = 1.0) -> HMatrix:
    """Nearest-neighbor weight with zero diagonal.

    The normalization is fixed so that the full weighted sum
    (1 - 1/p)**2 sum_ij p**i p**j h_ij V_i V_j collapses to
    h0 p**-1 sum_i p**((gamma+2) i) V_i V_{i-1}:

        h_{i,i-1} = h_{i-1,i} = h0 p**(gamma*i) / (2 (1 - 1/p)**2).
    """
    vals = np.zeros((r + 1, r + 1))
    denom = 2.0 * (1.0 - 1.0 / p) ** 2
    for i in range(1, r + 1):
        vals[i, i - 1] = vals[i - 1, i] = h0 * _pow(p, gamma * i) / denom
    return HMatrix(vals)


@dataclass(frozen=True, eq=False)
class DissipationSpec:
    """Linear damping: the power law nu_i = nu0 * p**(2 i), or a full matrix.

    An explicit matrix overrides the law; supplying both is rejected.
    """

    nu0: float = 0.0
    matrix: np.ndarray | None = None

    def __post_init__(self) -> None:
        nu0 = float(self.nu0)
        if not math.isfinite(nu0) or nu0 < 0.0:
            raise ConfigurationError(f"nu0 must be finite and >= 0, got {self.nu0!r}")
        object.__setattr__(self, "nu0", nu0)
        if self.matrix is not None:
            if nu0 != 0.0:
                raise ConfigurationError("give either nu0 or an explicit matrix, not both")
            arr = np.array(self.matrix, dtype=float, copy=True)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ConfigurationError("dissipation matrix must be square")
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("dissipation matrix must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, "matrix", arr)

    @classmethod
    def none(cls) -> "DissipationSpec":
        return cls(nu0=0.0)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "DissipationSpec":
        return cls(nu0=0.0, matrix=matrix)

    @property
    def is_zero(self) -> bool:
        return self.matrix is None and self.nu0 == 0.0

    def diagonal(self, p: float, r: int) -> np.ndarray:
        if self.matrix is not None:
            raise ConfigurationError("explicit dissipation matrix has no diagonal law")
        return np.array([self.nu0 * _pow(p, 2 * i) for i in range(r + 1)])

    def as_matrix(self, p: float | None, r: int) -> np.ndarray:
        if self.matrix is not None:
            if self.matrix.shape[0] != r + 1:
                raise ConfigurationError(
                    f"dissipation matrix is {self.matrix.shape[0]}x{self.matrix.shape[0]}, "
                    f"model needs {r + 1}x{r + 1}"
                )
            return self.matrix
        if self.nu0 == 0.0:
            return np.zeros((r + 1, r + 1))
        if p is None:
            raise ConfigurationError("the dissipation power law needs the model's scale ratio p")
        return np.diag(self.diagonal(p, r))

    def apply(self, v: np.ndarray, p: float | None) -> np.ndarray:
        """The damping term nu V to be subtracted from the right-hand side."""
        if self.matrix is not None:
            if self.matrix.shape[0] != v.size:
                raise ConfigurationError("dissipation matrix does not match the state length")
            return self.matrix @ v
        if self.nu0 == 0.0:
            return np.zeros_like(v)
        if p is None:
            raise ConfigurationError("the dissipation power law needs the model's scale ratio p")
        return self.diagonal(p, v.size - 1) * v


@dataclass(frozen=True, eq=False)
class ForcingSpec:
    """Constant external forcing; None means identically zero."""

    values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.values is not None:
            arr = np.array(self.values, dtype=float, copy=True)
            if arr.ndim != 1:
                raise ConfigurationError("forcing must be a 1-D vector")
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("forcing must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, "values", arr)

    @classmethod
    def zero(cls) -> "ForcingSpec":
        return cls(values=None)

    @classmethod
    def constant(cls, values: Sequence[float] | np.ndarray) -> "ForcingSpec":
        return cls(values=np.asarray(values, dtype=float))

    @classmethod
    def boundary_balance(
        cls,
        table: CouplingTable,
        profile: "ShellState | np.ndarray",
        width: int | None = None,
    ) -> "ForcingSpec":
        """Forcing that pins a profile: cancel the quadratic right-hand side
        on the truncated boundary bands and leave the bulk untouched."""
        v = as_shell_array(profile, table.r)
        if width is None:
            width = 2 * table.max_offset
        width = max(0, min(operator.index(width), table.r + 1))
        quad = table.quadratic_rhs(v)
        f = np.zeros(table.r + 1)
        if width:
            f[:width] = -quad[:width]
            f[table.r + 1 - width :] = -quad[table.r + 1 - width :]
        return cls(values=f)

    @property
    def is_zero(self) -> bool:
        return self.values is None or not np.any(self.values)

    def vector(self, r: int) -> np.ndarray:
        if self.values is None:
            return np.zeros(r + 1)
        if self.values.size != r + 1:
            raise ConfigurationError(f"forcing has length {self.values.size}, need {r + 1}")
        return self.values


def build_s2_diag(p: float, r: int, gamma: float, h0: float = 1.0) -> CouplingTable:
    """Second-order cascade with the diagonal weight p**(gamma*i).

    The quadratic right-hand side of an interior shell i reads

        A_i [ p**3 (p**g - p**2g)    V_{i+1} V_{i+2}
            + (p**g - p**-g)         V_{i-1} V_{i+1}
            + p**-3 (p**-2g - p**-g) V_{i-2} V_{i-1} ],

    with A_i = h0 (1 - 1/p)**3 p**((g+2) i).  Products reaching outside
    0..r are dropped, which is exactly the zero-padding convention.

    At gamma = 0 every bracket vanishes and the table is empty.
    """
    spec = ModelSpec(family=ModelFamily.S2_DIAG, p=p, r=r, gamma=gamma, h0=h0, s=2)
    pf, g = spec.p, spec.gamma
    brackets = (
        (1, 2, _pow(pf, 3) * (_pow(pf, g) - _pow(pf, 2 * g))),
        (-1, 1, _pow(pf, g) - _pow(pf, -g)),
        (-2, -1, _pow(pf, -3) * (_pow(pf, -2 * g) - _pow(pf, -g))),
    )
    # h0 multiplies last so rescaling it rescales each coefficient exactly
    base = (1.0 - 1.0 / pf) ** 3
    rows = []
    for i in range(spec.r + 1):
        amp = base * _pow(pf, (g + 2.0) * i)
        for a, b, c in brackets:
            if i + a >= 0 and i + b <= spec.r:
                rows.append((i, a, b, spec.h0 * (amp * c)))
    return CouplingTable.from_entries(spec.r, rows, spec=spec)


def build_s3_diag(p: float, r: int, gamma: float, h0: float = 1.0) -> CouplingTable:
    """Third-order cascade with the diagonal weight p**(gamma*i).

    Nine products per interior shell, offsets spanning -3..+3:

        A_i [ p**5 (p**3g - p**2g)  V_{i+2} V_{i+3}
            + p**4 (p**3g - p**g)   V_{i+1} V_{i+3}
            + p**3 (p**2g - p**g)   V_{i+1} V_{i+2}
            + p    (p**-g - p**2g)  V_{i-1} V_{i+2}
            +      (p**-g - p**g)   V_{i-1} V_{i+1}
            + p**-1 (p**-2g - p**g) V_{i-2} V_{i+1}
            + p**-3 (p**-g - p**-2g)  V_{i-2} V_{i-1}
            + p**-4 (p**-g - p**-3g)  V_{i-3} V_{i-1}
            + p**-5 (p**-2g - p**-3g) V_{i-3} V_{i-2} ],

    with the same prefactor A_i = h0 (1 - 1/p)**3 p**((g+2) i) as the
    second-order family.
    """
    spec = ModelSpec(family=ModelFamily.S3_DIAG, p=p, r=r, gamma=gamma, h0=h0, s=3)
    pf, g = spec.p, spec.gamma
    brackets = (
        (2, 3, _pow(pf, 5) * (_pow(pf, 3 * g) - _pow(pf, 2 * g))),
        (1, 3, _pow(pf, 4) * (_pow(pf, 3 * g) - _pow(pf, g))),
        (1, 2, _pow(pf, 3) * (_pow(pf, 2 * g) - _pow(pf, g))),
        (-1, 2, _pow(pf, 1) * (_pow(pf, -g) - _pow(pf, 2 * g))),
        (-1, 1, _pow(pf, -g) - _pow(pf, g)),
        (-2, 1, _pow(pf, -1) * (_pow(pf, -2 * g) - _pow(pf, g))),
        (-2, -1, _pow(pf, -3) * (_pow(pf, -g) - _pow(pf, -2 * g))),
        (-3, -1, _pow(pf, -4) * (_pow(pf, -g) - _pow(pf, -3 * g))),
        (-3, -2, _pow(pf, -5) * (_pow(pf, -2 * g) - _pow(pf, -3 * g))),
    )
    base = (1.0 - 1.0 / pf) ** 3
    rows = []
    for i in range(spec.r + 1):
        amp = base * _pow(pf, (g + 2.0) * i)
        for a, b, c in brackets:
            if i + a >= 0 and i + b <= spec.r:
                rows.append((i, a, b, spec.h0 * (amp * c)))
    return CouplingTable.from_entries(spec.r, rows, spec=spec)


def build_s2_offdiag(p: float, r: int, gamma: float, h0: float = 1.0) -> CouplingTable:
    """Second-order cascade driven by a nearest-neighbor (zero-diagonal) h.

    Each shell couples to mixed neighbor products with prefactor
    B_i = h0 (1 - 1/p)**3 p**((g+3) i); four of the twelve products are
    additionally suppressed on specific boundary shells (i = 1, 0, r, r-1
    respectively) so that the boundary rows still cancel in the energy sum:

        B_i [ p**(-g-5) V_{i-2}**2        + p**-3 V_{i-2} V_i
            - p**(-2g-6) V_{i-3} V_{i-1}  - [i != 1]  p**(-g-4) V_{i-1}**2
            + p**(-g-2) V_{i-2} V_{i+1}   + [i != 0]  V_i V_{i+1}
            - [i != r] p**g V_{i-1} V_i   - p**(2g+2) V_{i-1} V_{i+2}
            + [i != r-1] p**(2g+4) V_{i+1}**2 + p**(3g+6) V_{i+1} V_{i+3}
            - p**(g+3) V_i V_{i+2}        - p**(2g+5) V_{i+2}**2 ].
    """
    spec = ModelSpec(family=ModelFamily.S2_OFFDIAG, p=p, r=r, gamma=gamma, h0=h0, s=2)
    pf, g = spec.p, spec.gamma
    rr = spec.r

    def unless(i: int, skip: int) -> float:
        return 0.0 if i == skip else 1.0

    base = (1.0 - 1.0 / pf) ** 3
    rows = []
    for i in range(rr + 1):
        amp = base * _pow(pf, (g + 3.0) * i)
        terms = (
            (-2, -2, _pow(pf, -g - 5.0)),
            (-2, 0, _pow(pf, -3)),
            (-3, -1, -_pow(pf, -2.0 * g - 6.0)),
            (-1, -1, -unless(i, 1) * _pow(pf, -g - 4.0)),
            (-2, 1, _pow(pf, -g - 2.0)),
            (0, 1, unless(i, 0)),
            (-1, 0, -unless(i, rr) * _pow(pf, g)),
            (-1, 2, -_pow(pf, 2.0 * g + 2.0)),
            (1, 1, unless(i, rr - 1) * _pow(pf, 2.0 * g + 4.0)),
            (1, 3, _pow(pf, 3.0 * g + 6.0)),
            (0, 2, -_pow(pf, g + 3.0)),
            (2, 2, -_pow(pf, 2.0 * g + 5.0)),
        )
        for a, b, c in terms:
            if i + a >= 0 and i + b <= rr and c != 0.0:
                rows.append((i, a, b, spec.h0 * (amp * c)))
    return CouplingTable.from_entries(rr, rows, spec=spec)


def build_goy(lam: float, eps: float, a: float, r: int) -> CouplingTable:
    """Classic three-neighbor GOY couplings on the ratio-lambda shell ladder:

        dv_i/dt = a lam**i ( v_{i+1} v_{i+2}
                             - (eps / lam) v_{i-1} v_{i+1}
                             + ((eps - 1) / lam**2) v_{i-2} v_{i-1} ).
    """
    spec = ModelSpec(family=ModelFamily.GOY, p=lam, r=r, eps=eps, a=a, s=2)
    lam, eps, a = spec.p, spec.eps, spec.a
    rows = []
    for i in range(spec.r + 1):
        # a multiplies last so rescaling it rescales each coefficient exactly
        amp = _pow(lam, i)
        terms = (
            (1, 2, amp),
            (-1, 1, -(amp * eps / lam)),
            (-2, -1, amp * (eps - 1.0) / (lam * lam)),
        )
        for aa, bb, c in terms:
            if i + aa >= 0 and i + bb <= spec.r:
                rows.append((i, aa, bb, a * c))
    return CouplingTable.from_entries(spec.r, rows, spec=spec)


def _theta(x: int, y: int) -> float:
    if x > y:
        return 1.0
    if x < y:
        return -1.0
    return 0.0


def build_general(
    p: float,
    r: int,
    alpha: float = 0.0,
    s: int = 2,
    h: HMatrix | None = None,
) -> CouplingTable:
    """Expand the order-s triple-sum interaction kernel against an explicit h.

    For every shell i the kernel runs over index pairs (j, k) in 0..2s with
    l = 3s - j - k also in 0..2s, signature theta(s,j) theta(s,k) theta(s,l),
    and contributes

        (1 - 1/p)**3 p**(2 i) sign
          * p**(-alpha (max(s,j) + max(s,k) + max(s,l)) - j - k)
          * V_{i+j-s} * h_{i-k+s, m} p**m V_m

    summed over the nonzero columns m of row i-k+s of h.  Only diagonal or
    tridiagonal h is supported; anything wider is rejected.  Rows or shells
    that fall outside 0..r drop out, matching the zero-padding convention.
    """
    if h is None:
        raise ConfigurationError("build_general requires an explicit HMatrix")
    spec = ModelSpec(family=ModelFamily.GENERAL, p=p, r=r, alpha=alpha, s=s)
    if h.values.shape != (spec.r + 1, spec.r + 1):
        raise ConfigurationError(
            f"h is {h.values.shape[0]}x{h.values.shape[0]}, model needs {spec.r + 1} shells"
        )
    if h.bandwidth > 1:
        raise ConfigurationError(
            f"h has bandwidth {h.bandwidth}; only diagonal or tridiagonal h is supported"
        )
    pf = spec.p
    two_s = 2 * spec.s
    kernel = []
    for j in range(two_s + 1):
        for k in range(two_s + 1):
            l = 3 * spec.s - j - k
            if l < 0 or l > two_s:
                continue
            sign = _theta(spec.s, j) * _theta(spec.s, k) * _theta(spec.s, l)
            if sign == 0.0:
                continue
            weight = _pow(
                pf,
                -spec.alpha * (max(spec.s, j) + max(spec.s, k) + max(spec.s, l)) - j - k,
            )
            kernel.append((j, k, sign * weight))

    base = (1.0 - 1.0 / pf) ** 3
    rows = []
    for i in range(spec.r + 1):
        amp = base * _pow(pf, 2 * i)
        for j, k, w in kernel:
            vi = i + j - spec.s
            row = i - k + spec.s
            if not (0 <= vi <= spec.r and 0 <= row <= spec.r):
                continue
            for m in range(max(0, row - 1), min(spec.r, row + 1) + 1):
                hv = h.values[row, m]
                if hv == 0.0:
                    continue
                c = amp * w * hv * _pow(pf, m)
                if c != 0.0:
                    rows.append((i, vi - i, m - i, c))
    return CouplingTable.from_entries(spec.r, rows, spec=spec)


def eval_rhs(
    table: CouplingTable,
    nu: DissipationSpec | None,
    f: ForcingSpec | None,
    state: "ShellState | Sequence[float] | np.ndarray",
) -> np.ndarray:
    """Full right-hand side: quadratic couplings minus damping plus forcing."""
    v = as_shell_array(state, table.r)
    out = table.quadratic_rhs(v)
    if nu is not None and not nu.is_zero:
        p = table.spec.p if table.spec is not None else None
        out -= nu.apply(v, p)
    if f is not None and f.values is not None:
        out += f.vector(table.r)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise NumericError(f"non-finite right-hand side at shell {int(bad[0])}")
    return out


@dataclass(frozen=True)
class CouplingComparison:
    """Entry-level diff of two coupling tables over the same shell range."""

    tol: float
    only_in_first: tuple[tuple[int, int, int], ...]
    only_in_second: tuple[tuple[int, int, int], ...]
    differing: tuple[tuple[tuple[int, int, int], float, float], ...]
    max_rel_diff: float

    @property
    def identical(self) -> bool:
        return not self.only_in_first and not self.only_in_second and self.max_rel_diff <= self.tol

    def as_dict(self) -> dict:
        return {
            "tol": self.tol,
            "identical": self.identical,
            "max_rel_diff": self.max_rel_diff,
            "only_in_first": [list(k) for k in self.only_in_first],
            "only_in_second": [list(k) for k in self.only_in_second],
            "differing": [
                {"key": list(k), "first": c1, "second": c2} for k, c1, c2 in self.differing
            ],
        }


def compare_couplings(
    first: CouplingTable, second: CouplingTable, tol: float = 1e-12
) -> CouplingComparison:
    """Report keys unique to either table and shared keys whose coefficients
    differ by more than tol in relative terms."""
    if first.r != second.r:
        raise ConfigurationError(f"cannot compare tables with r={first.r} and r={second.r}")
    a, b = first._index, second._index
    only_a = tuple(sorted(k for k in a if k not in b))
    only_b = tuple(sorted(k for k in b if k not in a))
    differing = []
    max_rel = 0.0
    for key in sorted(set(a) & set(b)):
        ca, cb = a[key], b[key]
        rel = abs(ca - cb) / max(abs(ca), abs(cb))
        max_rel = max(max_rel, rel)
        if rel > tol:
            differing.append((key, ca, cb))
    return CouplingComparison(
        tol=float(tol),
        only_in_first=only_a,
        only_in_second=only_b,
        differing=tuple(differing),
        max_rel_diff=max_rel,
    )
