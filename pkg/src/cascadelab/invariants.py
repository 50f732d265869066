"""Quadratic invariants and exact-cancellation audits for coupling tables.

Energy assigns shell i the weight (1 - 1/p) p**i applied to V_i**2 (no
half).  More general candidate invariants are quadratic forms
Q(V) = sum_ij W_ij V_i V_j with a symmetric W of bandwidth at most one.
Along the quadratic flow, dQ/dt expands into cubic monomials
V_{n1} V_{n2} V_{n3}; Q is conserved exactly when every net monomial
coefficient cancels.  The audit checks that cancellation both symbolically
(per monomial) and on random states, normalizing residuals by the sum of
absolute contributing terms so verdicts are scale-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError
from .models import CouplingTable, HMatrix, ShellState, _pow, as_shell_array

__all__ = [
    "WeightMatrix",
    "MonomialResidual",
    "AuditReport",
    "InvariantBasis",
    "energy",
    "helicity",
    "quadratic_derivative",
    "audit_conservation",
    "solve_invariant_weights",
]

# Relative residuals below this are indistinguishable from roundoff of an
# exact cancellation at double precision.
DEFAULT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Symmetric weight W with bandwidth <= 1 defining Q = sum W_ij V_i V_j.

    ``diag`` holds W_ii; ``off`` (optional, length r) holds W_{i,i+1}.
    """

    diag: np.ndarray
    off: np.ndarray | None = None

    def __post_init__(self) -> None:
        d = np.array(self.diag, dtype=float, copy=True)
        if d.ndim != 1 or d.size < 2:
            raise ConfigurationError("weight diagonal must be a 1-D vector of length r+1 >= 2")
        if not np.all(np.isfinite(d)):
            raise ConfigurationError("weight diagonal must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "diag", d)
        if self.off is not None:
            o = np.array(self.off, dtype=float, copy=True)
            if o.ndim != 1 or o.size != d.size - 1:
                raise ConfigurationError(
                    f"weight off-diagonal must have length r = {d.size - 1}"
                )
            if not np.all(np.isfinite(o)):
                raise ConfigurationError("weight off-diagonal must be finite")
            o.setflags(write=False)
            object.__setattr__(self, "off", o)

    @property
    def r(self) -> int:
        return self.diag.size - 1

    @property
    def bandwidth(self) -> int:
        return 1 if self.off is not None and np.any(self.off) else 0

    @classmethod
    def diagonal(cls, values: Sequence[float] | np.ndarray) -> "WeightMatrix":
        return cls(diag=np.asarray(values, dtype=float))

    @classmethod
    def diagonal_power(cls, p: float, r: int, beta: float, scale: float = 1.0) -> "WeightMatrix":
        """w_i = scale * p**(beta * i)."""
        return cls(diag=np.array([scale * _pow(p, beta * i) for i in range(r + 1)]))

    @classmethod
    def energy_weights(cls, p: float, r: int) -> "WeightMatrix":
        """The energy form: w_i = (1 - 1/p) p**i."""
        return cls.diagonal_power(p, r, 1.0, scale=1.0 - 1.0 / p)

    @classmethod
    def from_hmatrix(cls, h: HMatrix, p: float) -> "WeightMatrix":
        """W_ij = (1 - 1/p)**2 p**i p**j h_ij for h of bandwidth <= 1."""
        if h.bandwidth > 1:
            raise ConfigurationError("weight matrices support bandwidth <= 1 only")
        r = h.r
        pref = (1.0 - 1.0 / p) ** 2
        pw = np.array([_pow(p, i) for i in range(r + 1)])
        diag = pref * pw * pw * np.diagonal(h.values)
        if h.bandwidth == 1:
            off = pref * pw[:-1] * pw[1:] * np.array([h.values[i, i + 1] for i in range(r)])
            return cls(diag=diag, off=off)
        return cls(diag=diag)

    def quad(self, state: "ShellState | np.ndarray") -> float:
        v = state.v if isinstance(state, ShellState) else np.asarray(state, dtype=float)
        q = float(np.dot(self.diag, v * v))
        if self.off is not None:
            q += 2.0 * float(np.dot(self.off, v[:-1] * v[1:]))
        return q

    def grad(self, v: np.ndarray) -> np.ndarray:
        """The gradient 2 W v, so that dQ/dt = grad . dV/dt."""
        g = 2.0 * self.diag * v
        if self.off is not None:
            g[:-1] += 2.0 * self.off * v[1:]
            g[1:] += 2.0 * self.off * v[:-1]
        return g

    def as_matrix(self) -> np.ndarray:
        m = np.diag(self.diag)
        if self.off is not None:
            for i in range(self.r):
                m[i, i + 1] = m[i + 1, i] = self.off[i]
        return m


def energy(state: "ShellState | np.ndarray", p: float) -> tuple[float, np.ndarray]:
    """Total energy and the per-shell spectrum E_i = (1 - 1/p) p**i V_i**2."""
    v = state.v if isinstance(state, ShellState) else np.asarray(state, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ConfigurationError("state must be a 1-D vector of length r+1 >= 2")
    w = (1.0 - 1.0 / p) * np.array([_pow(p, i) for i in range(v.size)])
    shells = w * v * v
    return float(shells.sum()), shells


def helicity(state: "ShellState | np.ndarray", h: HMatrix, p: float) -> float:
    """The second weighted sum (1 - 1/p)**2 sum_ij p**i p**j h_ij V_i V_j."""
    v = state.v if isinstance(state, ShellState) else np.asarray(state, dtype=float)
    if v.size != h.r + 1:
        raise ConfigurationError(f"state has length {v.size}, h expects {h.r + 1}")
    pw = np.array([_pow(p, i) for i in range(v.size)])
    u = pw * v
    return float((1.0 - 1.0 / p) ** 2 * (u @ h.values @ u))


class MonomialResidual(NamedTuple):
    """Net coefficient of one cubic monomial V_n1 V_n2 V_n3 in dQ/dt."""

    monomial: tuple[int, int, int]
    net: float
    scale: float

    @property
    def relative(self) -> float:
        return abs(self.net) / self.scale if self.scale > 0.0 else 0.0


def quadratic_derivative(
    table: CouplingTable, weights: WeightMatrix
) -> tuple[MonomialResidual, ...]:
    """Expand dQ/dt = sum_i (2 W V)_i RHS_i into cubic monomials.

    Returns one record per monomial that receives any contribution, with its
    net coefficient and the sum of absolute contributions as the natural
    scale.  Exact conservation means every record's relative residual sits
    at roundoff level.
    """
    if weights.r != table.r:
        raise ConfigurationError(f"weights are for r={weights.r}, table has r={table.r}")
    acc: dict[tuple[int, int, int], list[float]] = {}

    def add(j: int, wij: float, i: int, a: int, b: int, c: float) -> None:
        if wij == 0.0:
            return
        coef = 2.0 * wij * c
        key = tuple(sorted((j, i + a, i + b)))
        slot = acc.setdefault(key, [0.0, 0.0])
        slot[0] += coef
        slot[1] += abs(coef)

    off = weights.off
    for e in table.entries:
        add(e.i, float(weights.diag[e.i]), e.i, e.a, e.b, e.c)
        if off is not None:
            if e.i > 0:
                add(e.i - 1, float(off[e.i - 1]), e.i, e.a, e.b, e.c)
            if e.i < table.r:
                add(e.i + 1, float(off[e.i]), e.i, e.a, e.b, e.c)
    return tuple(
        MonomialResidual(monomial=k, net=v[0], scale=v[1]) for k, v in sorted(acc.items())
    )


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one conservation audit of a quadratic form.

    ``max_sampled_derivative`` is the largest relative |dQ/dt| seen over the
    sampled states (residual divided by the sum of absolute contributing
    terms); ``symbolic_residuals`` lists only the monomials whose relative
    net coefficient exceeds the tolerance, so an exactly conserved quantity
    reports an empty list.
    """

    quantity: str
    seed: int
    n_samples: int
    tol: float
    max_sampled_derivative: float
    symbolic_residuals: tuple[MonomialResidual, ...]
    verdict: str

    @property
    def conserved(self) -> bool:
        return self.verdict == "conserved"

    def to_json_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "tol": self.tol,
            "max_sampled_derivative": self.max_sampled_derivative,
            "symbolic_residuals": [
                {"monomial": list(m.monomial), "coefficient": m.net}
                for m in self.symbolic_residuals
            ],
            "verdict": self.verdict,
        }


def audit_conservation(
    table: CouplingTable,
    weights: WeightMatrix,
    n_samples: int = 100,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    quantity: str = "Q",
) -> AuditReport:
    """Check conservation of Q = V' W V along the table's quadratic flow.

    Two independent routes must agree: the symbolic expansion of dQ/dt must
    cancel monomial by monomial, and the sampled derivative on uniform
    random states from per-sample substreams (seed, k) must vanish relative
    to the absolute term mass.  The verdict is conserved only if both hold
    at the stated tolerance.
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    residuals = quadratic_derivative(table, weights)
    violations = tuple(m for m in residuals if m.relative > tol)

    ii, ia, ib, cc = table._arrays
    max_rel = 0.0
    for k in range(n_samples):
        rng = np.random.default_rng((seed, k))
        v = rng.uniform(-1.0, 1.0, table.r + 1)
        if cc.size == 0:
            continue
        g = weights.grad(v)
        terms = g[ii] * cc * v[ia] * v[ib]
        denom = float(np.abs(terms).sum())
        if denom > 0.0:
            max_rel = max(max_rel, abs(float(terms.sum())) / denom)

    verdict = "conserved" if (max_rel <= tol and not violations) else "violated"
    return AuditReport(
        quantity=quantity,
        seed=int(seed),
        n_samples=int(n_samples),
        tol=float(tol),
        max_sampled_derivative=max_rel,
        symbolic_residuals=violations,
        verdict=verdict,
    )


@dataclass(frozen=True, eq=False)
class InvariantBasis:
    """Nullspace basis of conserved weight matrices for one coupling table.

    A degenerate table (no quadratic terms) conserves every quadratic form;
    that case is flagged and the basis is the full unit-weight space.
    """

    bandwidth: int
    weights: tuple[WeightMatrix, ...]
    singular_values: np.ndarray
    cutoff: float
    degenerate: bool
    max_verification_residual: float

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def _slots(self, w: WeightMatrix, shells: Sequence[int] | None) -> np.ndarray:
        r = w.r
        idx = list(range(r + 1)) if shells is None else sorted(set(int(i) for i in shells))
        if not idx or idx[0] < 0 or idx[-1] > r:
            raise ConfigurationError("shell selection is empty or out of range")
        parts = [np.asarray(w.diag)[idx]]
        if self.bandwidth == 1:
            off = w.off if w.off is not None else np.zeros(r)
            pair_idx = [i for i in idx if i + 1 in set(idx)]
            parts.append(np.asarray(off)[pair_idx])
        return np.concatenate(parts)

    def span_residual(
        self, candidate: WeightMatrix, shells: Sequence[int] | None = None
    ) -> float:
        """Relative distance from the candidate to the basis span, restricted
        to the selected shells.  Near zero means the candidate is conserved
        up to boundary effects outside the selection."""
        if not self.weights:
            raise ConfigurationError("basis is empty; nothing spans the candidate")
        t = self._slots(candidate, shells)
        norm = float(np.linalg.norm(t))
        if norm == 0.0:
            return 0.0
        t = t / norm
        basis = np.stack([self._slots(w, shells) for w in self.weights], axis=1)
        u, sv, _ = np.linalg.svd(basis, full_matrices=False)
        keep = sv > (sv[0] * 1e-12 if sv.size and sv[0] > 0 else 0.0)
        u = u[:, keep]
        return float(np.linalg.norm(t - u @ (u.T @ t)))


def solve_invariant_weights(
    table: CouplingTable,
    bandwidth: int = 0,
    cutoff: float = 1e-9,
) -> InvariantBasis:
    """Solve for every weight matrix the table conserves exactly.

    Each cubic monomial of dQ/dt yields one homogeneous linear equation in
    the free W entries (diagonal, plus the first off-diagonal when
    bandwidth is 1).  Rows are normalized to unit max magnitude for
    conditioning and the nullspace is read off the SVD with a relative
    singular-value cutoff.  Every returned basis element is re-verified
    through quadratic_derivative and the worst relative residual reported.
    """
    if bandwidth not in (0, 1):
        raise ConfigurationError("bandwidth must be 0 or 1")
    r = table.r
    ndiag = r + 1
    ncol = ndiag + (r if bandwidth == 1 else 0)

    # Per monomial key, per column: the accumulated net coefficient and the
    # sum of absolute contributions.  The latter is the natural scale for
    # deciding that a net is an exact cancellation with roundoff residue;
    # without the snap such residues survive row normalization as spurious
    # full-strength constraints.
    rows: dict[tuple[int, int, int], dict[int, list[float]]] = {}

    def add(col: int, j: int, i: int, a: int, b: int, c: float) -> None:
        key = tuple(sorted((j, i + a, i + b)))
        cell = rows.setdefault(key, {}).setdefault(col, [0.0, 0.0])
        cell[0] += 2.0 * c
        cell[1] += abs(2.0 * c)

    for e in table.entries:
        add(e.i, e.i, e.i, e.a, e.b, e.c)
        if bandwidth == 1:
            if e.i > 0:
                add(ndiag + e.i - 1, e.i - 1, e.i, e.a, e.b, e.c)
            if e.i < r:
                add(ndiag + e.i, e.i + 1, e.i, e.a, e.b, e.c)

    def to_weight(vec: np.ndarray) -> WeightMatrix:
        # Deterministic normalization: the largest component becomes 1.
        pivot = int(np.argmax(np.abs(vec)))
        scaled = vec / vec[pivot]
        diag = scaled[:ndiag]
        off = scaled[ndiag:] if bandwidth == 1 else None
        return WeightMatrix(diag=diag, off=off)

    if not rows:
        unit = np.eye(ncol)
        weights = tuple(to_weight(unit[:, j]) for j in range(ncol))
        return InvariantBasis(
            bandwidth=bandwidth,
            weights=weights,
            singular_values=np.zeros(0),
            cutoff=float(cutoff),
            degenerate=True,
            max_verification_residual=0.0,
        )

    kept = []
    for _, row in sorted(rows.items()):
        vec = np.zeros(ncol)
        for col, (net, amp) in row.items():
            if abs(net) > DEFAULT_TOL * amp:
                vec[col] = net
        top = np.max(np.abs(vec))
        if top > 0.0:
            kept.append(vec / top)
    matrix = np.array(kept) if kept else np.zeros((0, ncol))

    _, sv, vt = np.linalg.svd(matrix, full_matrices=True)
    smax = sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > cutoff * smax)) if smax > 0.0 else 0
    null_vectors = [vt[j] for j in range(rank, ncol)]
    weights = tuple(to_weight(vec) for vec in null_vectors)

    worst = 0.0
    for w in weights:
        for m in quadratic_derivative(table, w):
            worst = max(worst, m.relative)

    return InvariantBasis(
        bandwidth=bandwidth,
        weights=weights,
        singular_values=sv,
        cutoff=float(cutoff),
        degenerate=False,
        max_verification_residual=worst,
    )
