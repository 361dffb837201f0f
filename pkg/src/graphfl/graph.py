"""Device graph: adjacency construction, combinatorial Laplacian and its spectrum.

The spectrum is computed with a cyclic Jacobi eigensolver so that graph
frequencies and the Fourier basis are deterministic down to the sign of each
eigenvector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DeviceId",
    "Graph",
    "Spectrum",
    "GraphError",
    "EigenSolverError",
    "build_adjacency_from_positions",
    "graph_from_adjacency",
    "laplacian",
    "jacobi_eigh",
    "eigendecompose",
    "gft",
    "igft",
    "connected_components",
    "sample_room_layout",
    "load_adjacency_file",
    "write_adjacency_file",
    "load_positions_file",
]

# Eigenvalues of a Laplacian below this (relative to its scale) are exact zeros
# contaminated by rounding.
ZERO_EIG_TOL = 1e-10


class GraphError(ValueError):
    """Invalid graph input."""


class EigenSolverError(ArithmeticError):
    """The Jacobi iteration did not reach the requested off-diagonal norm."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual off-diagonal norm {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class DeviceId:
    cluster_index: int
    local_index: int


@dataclass(frozen=True, eq=False)
class Graph:
    adjacency: np.ndarray
    positions: np.ndarray | None = None
    device_ids: tuple[DeviceId, ...] = field(default=())

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError(f"adjacency must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise GraphError("adjacency has non-finite entries")
        if not np.array_equal(a, a.T):
            raise GraphError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise GraphError("adjacency must have a zero diagonal")
        if np.any(a < 0):
            raise GraphError("adjacency entries must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        ids = tuple(self.device_ids) or tuple(DeviceId(0, i) for i in range(a.shape[0]))
        if len(ids) != a.shape[0]:
            raise GraphError(f"{len(ids)} device ids for {a.shape[0]} nodes")
        object.__setattr__(self, "device_ids", ids)
        if self.positions is not None:
            p = np.array(self.positions, dtype=float)
            p.setflags(write=False)
            object.__setattr__(self, "positions", p)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def clusters(self) -> np.ndarray:
        return np.array([d.cluster_index for d in self.device_ids], dtype=int)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Graph frequencies (ascending) and the orthonormal Fourier basis.

    Column ``i`` of ``eigenvectors`` pairs with ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.eigenvalues.shape[0]


def build_adjacency_from_positions(positions, d_max: float, device_ids=None) -> Graph:
    """Connect every pair of devices closer than ``d_max`` meters (strictly)."""
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[0] < 1:
        raise GraphError(f"positions must be a K x 3 array, got shape {pos.shape}")
    if not np.all(np.isfinite(pos)):
        raise GraphError("positions contain non-finite coordinates")
    if not d_max > 0:
        raise GraphError(f"d_max must be positive, got {d_max}")
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    adj = (dist < d_max).astype(float)
    np.fill_diagonal(adj, 0.0)
    return Graph(adj, positions=pos, device_ids=tuple(device_ids or ()))


def graph_from_adjacency(adjacency, device_ids=None) -> Graph:
    return Graph(np.asarray(adjacency, dtype=float), device_ids=tuple(device_ids or ()))


def laplacian(graph: Graph | np.ndarray) -> np.ndarray:
    """Combinatorial Laplacian ``D - A``."""
    a = graph.adjacency if isinstance(graph, Graph) else np.asarray(graph, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GraphError(f"adjacency must be square, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise GraphError("adjacency must be symmetric")
    lap = -a.copy()
    np.fill_diagonal(lap, 0.0)
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(matrix, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Sweeps rotate every upper-triangular pair ``(p, q)`` in row-major order.
    Iteration stops once the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||A||_F)``.

    Returns the unsorted diagonal and the accumulated rotation matrix.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise GraphError(f"matrix must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise GraphError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        if _off_norm(a) < threshold:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation.
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    residual = _off_norm(a)
    if residual < threshold:
        return np.diag(a).copy(), v
    raise EigenSolverError(f"Jacobi did not converge in {max_sweeps} sweeps", residual)


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        # first entry within rounding of the largest magnitude decides the sign
        lead = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
        if col[lead] < 0:
            out[:, j] = -col
    return out


def eigendecompose(lap, tol: float = 1e-12, max_sweeps: int = 100) -> Spectrum:
    """Spectrum of a symmetric PSD Laplacian, eigenvalues ascending.

    Eigenvalues within ``ZERO_EIG_TOL`` (relative) of zero are set to exactly
    zero; the Laplacian is PSD so these are rounding residue.
    """
    lap = np.asarray(lap, dtype=float)
    vals, vecs = jacobi_eigh(lap, tol=tol, max_sweeps=max_sweeps)
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = _canonical_signs(vecs[:, order])
    scale = max(1.0, float(np.abs(lap).max(initial=0.0)))
    vals = np.where(np.abs(vals) < ZERO_EIG_TOL * scale, 0.0, vals)
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return Spectrum(vals, vecs)


def _check_rows(spectrum: Spectrum, g: np.ndarray, name: str) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim not in (1, 2) or g.shape[0] != spectrum.num_nodes:
        raise GraphError(
            f"{name} must have {spectrum.num_nodes} rows, got shape {g.shape}"
        )
    return g


def gft(spectrum: Spectrum, signal) -> np.ndarray:
    """Graph Fourier transform ``V^T G``."""
    return spectrum.eigenvectors.T @ _check_rows(spectrum, signal, "signal")


def igft(spectrum: Spectrum, coeffs) -> np.ndarray:
    """Inverse graph Fourier transform ``V G_f``."""
    return spectrum.eigenvectors @ _check_rows(spectrum, coeffs, "coefficients")


def connected_components(graph: Graph | np.ndarray) -> list[set[int]]:
    """Components as sets of node indices, ordered by their smallest member."""
    a = graph.adjacency if isinstance(graph, Graph) else np.asarray(graph)
    n = a.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(np.triu(a, 1))):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, set[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(i)
    return [groups[r] for r in sorted(groups)]


def sample_room_layout(
    rng: np.random.Generator,
    num_devices: int = 20,
    num_rooms: int = 4,
    room_size: float = 10.0,
    devices_per_room: tuple[int, int] = (4, 7),
    max_tries: int = 10_000,
):
    """Scatter devices uniformly inside cubic rooms laid out side by side.

    Room occupancies are drawn from a discrete uniform on ``devices_per_room``
    (inclusive) and redrawn until they add up to ``num_devices``.

    Returns ``(positions, device_ids)``.
    """
    lo, hi = devices_per_room
    if not (num_rooms * lo <= num_devices <= num_rooms * hi):
        raise GraphError(
            f"{num_devices} devices cannot be split into {num_rooms} rooms of {lo}..{hi}"
        )
    for _ in range(max_tries):
        counts = rng.integers(lo, hi + 1, size=num_rooms)
        if counts.sum() == num_devices:
            break
    else:
        raise GraphError("could not draw room occupancies summing to the device count")
    positions = []
    ids = []
    for room, count in enumerate(counts):
        origin = np.array([room * room_size, 0.0, 0.0])
        positions.append(origin + rng.uniform(0.0, room_size, size=(count, 3)))
        ids.extend(DeviceId(room, i) for i in range(count))
    return np.vstack(positions), ids


def load_adjacency_file(path) -> Graph:
    """Read ``K`` on the first line followed by ``K`` rows of ``K`` weights."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise GraphError(f"{path}: empty adjacency file")
    try:
        k = int(lines[0])
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise GraphError(f"{path}: {exc}") from None
    if len(rows) != k or any(len(r) != k for r in rows):
        raise GraphError(f"{path}: expected {k} rows of {k} weights")
    return Graph(np.array(rows))


def write_adjacency_file(graph: Graph, path) -> None:
    a = graph.adjacency
    body = "\n".join(" ".join(f"{x:g}" for x in row) for row in a)
    Path(path).write_text(f"{a.shape[0]}\n{body}\n")


def load_positions_file(path, d_max: float) -> Graph:
    """Read ``cluster_index x y z`` lines and connect devices closer than d_max."""
    clusters, coords = [], []
    for ln in Path(path).read_text().splitlines():
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) != 4:
            raise GraphError(f"{path}: expected 'cluster x y z', got {ln!r}")
        clusters.append(int(parts[0]))
        coords.append([float(x) for x in parts[1:]])
    seen: dict[int, int] = {}
    ids = []
    for c in clusters:
        ids.append(DeviceId(c, seen.get(c, 0)))
        seen[c] = seen.get(c, 0) + 1
    return build_adjacency_from_positions(np.array(coords), d_max, device_ids=ids)
