"""Dense complex linear algebra and quantum distance measures.

All operators are dense row-major ``numpy`` arrays of ``complex128``.  States
are wrapped in :class:`DensityMatrix`, which records the subsystem
factorization (as qubit counts) and whether the state is normalized; every
other module consumes these primitives.

Numerical tolerances follow a three-level hierarchy: structural checks
(Hermiticity, unitarity, PSD floors) at 1e-10, solver/oracle agreement at
1e-4, and analytic bound checks at 1e-6.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DimensionError, ValidationError

# Tolerance hierarchy: linear-algebra noise vs optimization noise vs bounds.
TOL_STRUCT = 1e-10
TOL_SOLVER = 1e-4
TOL_BOUND = 1e-6

# Hard cap on any matrix dimension produced by this package (configurable).
DEFAULT_DIM_CAP = 1 << 14


def as_matrix(m) -> np.ndarray:
    """Coerce to a 2-D complex array and reject non-finite entries."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ArgumentError(f"expected a matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValidationError("matrix contains NaN/Inf entries")
    return arr


def is_hermitian(m: np.ndarray, tol: float = TOL_STRUCT) -> bool:
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T)) <= tol


def is_unitary(m: np.ndarray, tol: float = TOL_STRUCT) -> bool:
    if m.shape[0] != m.shape[1]:
        return False
    d = m.shape[0]
    return np.max(np.abs(m.conj().T @ m - np.eye(d))) <= tol


def is_psd(m: np.ndarray, floor: float = -TOL_STRUCT) -> bool:
    """Eigenvalue floor test for positive semidefiniteness."""
    if not is_hermitian(m, tol=1e-8):
        return False
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    return bool(w.min(initial=0.0) >= floor)


def psd_clip(m: np.ndarray) -> np.ndarray:
    """Project a nearly-PSD Hermitian matrix onto the PSD cone.

    SDP solutions are PSD only up to solver tolerance; clipping negative
    eigenvalues to zero makes them safe for downstream simulation.
    """
    h = (m + m.conj().T) / 2
    w, q = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    return (q * w) @ q.conj().T


@dataclass
class DensityMatrix:
    """Hermitian PSD matrix with a declared qubit factorization.

    ``qubit_dims`` lists the number of qubits of each subsystem in order, so
    the matrix dimension is 2**sum(qubit_dims).  ``normalized`` marks whether
    the trace is pinned to 1 (the second SDP works with unnormalized blocks).
    """

    mat: np.ndarray
    qubit_dims: list[int] = field(default_factory=list)
    normalized: bool = True

    def __post_init__(self):
        self.mat = as_matrix(self.mat)
        d = self.mat.shape[0]
        if self.mat.shape[1] != d:
            raise ArgumentError("density matrix must be square")
        if not self.qubit_dims:
            n = int(round(np.log2(d)))
            if 2 ** n != d:
                raise ArgumentError(f"dimension {d} is not a power of two")
            self.qubit_dims = [n]
        if 2 ** sum(self.qubit_dims) != d:
            raise ArgumentError(
                f"qubit_dims {self.qubit_dims} do not match dimension {d}")
        if not is_hermitian(self.mat):
            raise ValidationError("density matrix is not Hermitian (1e-10)")
        w = np.linalg.eigvalsh((self.mat + self.mat.conj().T) / 2)
        if w.min(initial=0.0) < -TOL_STRUCT:
            raise ValidationError(
                f"density matrix has eigenvalue {w.min():.3e} < -1e-10")
        if self.normalized:
            tr = float(np.real(np.trace(self.mat)))
            if abs(tr - 1.0) > TOL_STRUCT:
                raise ValidationError(f"normalized state has trace {tr!r}")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def subsystem_dims(self) -> list[int]:
        return [2 ** q for q in self.qubit_dims]


def pure_state(vec) -> DensityMatrix:
    """Rank-1 density matrix |v><v| from a (normalized) state vector."""
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()))


def tensor(a: np.ndarray, b: np.ndarray,
           dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    """Kronecker product with a dimension cap."""
    a, b = as_matrix(a), as_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows > dim_cap or cols > dim_cap:
        raise DimensionError(
            f"tensor product dimension {rows}x{cols} exceeds cap {dim_cap}")
    return np.kron(a, b)


def tensor_all(mats, dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = tensor(out, m, dim_cap=dim_cap)
    return out


def partial_trace_mat(mat: np.ndarray, dims: list[int],
                      keep: list[int]) -> np.ndarray:
    """Partial trace of a raw matrix over the subsystems not in ``keep``.

    ``dims`` are the subsystem dimensions in tensor order; ``keep`` lists the
    subsystem indices to retain (order preserved as given in ``dims``).
    """
    mat = as_matrix(mat)
    n = len(dims)
    for k in keep:
        if not 0 <= k < n:
            raise ArgumentError(f"invalid subsystem index {k} (have {n})")
    keep = sorted(set(keep))
    total = int(np.prod(dims))
    if mat.shape != (total, total):
        raise ArgumentError(
            f"matrix shape {mat.shape} does not match dims {dims}")
    resh = mat.reshape(dims + dims)
    # Contract each traced subsystem's row index with its column index.
    traced = [i for i in range(n) if i not in keep]
    for count, i in enumerate(traced):
        # After `count` contractions the array has 2*(n-count) axes.
        ax = i - count
        resh = np.trace(resh, axis1=ax, axis2=ax + (n - count))
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return resh.reshape(d_keep, d_keep)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Partial trace keeping the given subsystem indices of ``rho``."""
    keep = sorted(set(keep))
    dims = rho.subsystem_dims()
    out = partial_trace_mat(rho.mat, dims, keep)
    out_qubits = [rho.qubit_dims[i] for i in keep]
    if not out_qubits:
        out_qubits = [0]
    return DensityMatrix(out, qubit_dims=out_qubits,
                         normalized=rho.normalized)


def _coerce_density(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.mat
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return as_matrix(arr)


def _check_pair(rho, sigma, require_normalized=True):
    a, b = _coerce_density(rho), _coerce_density(sigma)
    if a.shape != b.shape:
        raise ArgumentError(f"dimension mismatch {a.shape} vs {b.shape}")
    if require_normalized:
        for m in (a, b):
            if abs(np.trace(m) - 1.0) > 1e-8:
                raise ArgumentError("states must be normalized")
    return a, b


def trace_distance(rho, sigma) -> float:
    """T(rho, sigma) = (1/2) * sum |eigenvalues of rho - sigma|."""
    a, b = _check_pair(rho, sigma)
    diff = (a - b + (a - b).conj().T) / 2
    w = np.linalg.eigvalsh(diff)
    t = 0.5 * float(np.sum(np.abs(w)))
    return min(max(t, 0.0), 1.0)


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity F(rho, sigma) = Tr |sqrt(rho) sqrt(sigma)|."""
    a, b = _check_pair(rho, sigma)
    sa = _psd_sqrt(a)
    sb = _psd_sqrt(b)
    sv = np.linalg.svd(sa @ sb, compute_uv=False)
    f = float(np.sum(sv))
    return min(max(f, 0.0), 1.0)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (q * w) @ q.conj().T


def eig_hermitian(m) -> tuple[list[float], np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns eigenvalues sorted descending and the matching eigenvector
    columns; reconstruction error is bounded by 1e-8 relative Frobenius.
    """
    m = as_matrix(m)
    if not is_hermitian(m):
        raise ArgumentError("eig_hermitian requires a Hermitian matrix")
    w, q = np.linalg.eigh(m)
    order = np.argsort(w)[::-1]
    return [float(x) for x in w[order]], q[:, order]


# ---------------------------------------------------------------------------
# JSON serialization: array-of-rows with [re, im] pairs.  Python's float repr
# round-trips binary64 exactly, so json.dumps/loads is lossless.
# ---------------------------------------------------------------------------

def mat_to_json(m: np.ndarray) -> list:
    m = as_matrix(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def mat_from_json(data) -> np.ndarray:
    try:
        rows = [[complex(e[0], e[1]) for e in row] for row in data]
    except (TypeError, IndexError) as exc:
        raise ArgumentError(f"malformed matrix JSON: {exc}") from exc
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ArgumentError("malformed matrix JSON: ragged rows")
    return np.array(rows, dtype=complex)


def mat_dumps(m: np.ndarray) -> str:
    return json.dumps(mat_to_json(m))


def mat_loads(s: str) -> np.ndarray:
    return mat_from_json(json.loads(s))
