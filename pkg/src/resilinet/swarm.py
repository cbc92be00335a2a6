"""Swarm geometry, adjacency, hop distances, and connectivity statistics.

Positions are (n, 2) float arrays in meters.  Links follow the disk model:
two nodes are connected when their distance is at most the communication
range, boundary inclusive.  Adjacency matrices are dense boolean (n, n)
arrays with zero diagonal; hop matrices are float arrays with ``inf``
marking unreachable pairs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

TOPOLOGY_VERSION = 1


class GenerationError(RuntimeError):
    """No connected swarm was found within the resample budget."""


@dataclass(frozen=True)
class SwarmTopology:
    """Node positions plus the disk-model parameters implying the links.

    ``side`` is the edge length of the square deployment area in meters;
    generated topologies are always connected under ``comm_range``.
    """

    positions: np.ndarray
    comm_range: float
    side: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 2:
            raise ValueError("positions must be an (n, 2) array with n >= 2")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if self.comm_range <= 0:
            raise ValueError("comm_range must be positive")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def adjacency(self) -> np.ndarray:
        return build_adjacency(self.positions, self.comm_range)


@dataclass(frozen=True)
class DegreeStats:
    """Mean/max node degree plus the cumulative degree distribution.

    ``cumulative[d]`` is the fraction of nodes with degree <= d, for
    d = 0..max_degree; the last entry is always 1.
    """

    mean: float
    max_degree: int
    cumulative: np.ndarray


def friis_range(tx_power: float, tx_gain: float, rx_gain: float,
                wavelength: float, sensitivity: float) -> float:
    """Maximum link distance for a line-of-sight link with unit fading.

    Solves received power == sensitivity under inverse-square path loss:
    range = (wavelength / 4 pi) * sqrt(tx_power * tx_gain * rx_gain / sensitivity).
    """
    for name, value in (("tx_power", tx_power), ("tx_gain", tx_gain),
                        ("rx_gain", rx_gain), ("wavelength", wavelength),
                        ("sensitivity", sensitivity)):
        if not value > 0:
            raise ValueError(f"{name} must be positive")
    return wavelength / (4.0 * math.pi) * math.sqrt(tx_power * tx_gain * rx_gain / sensitivity)


def build_adjacency(positions: np.ndarray, comm_range: float) -> np.ndarray:
    """Disk-model adjacency: a_ij = 1 iff i != j and ||p_i - p_j|| <= comm_range.

    The comparison is on squared distances, so the boundary case
    ||p_i - p_j|| == comm_range counts as connected.
    """
    if comm_range <= 0:
        raise ValueError("comm_range must be positive")
    pos = np.asarray(positions, dtype=float)
    delta = pos[:, None, :] - pos[None, :, :]
    dist_sq = np.einsum("ijk,ijk->ij", delta, delta)
    adj = dist_sq <= comm_range * comm_range
    np.fill_diagonal(adj, False)
    return adj


def generate_swarm(n: int, density_per_km2: float, comm_range: float,
                   seed: int, max_attempts: int = 1000) -> SwarmTopology:
    """Sample a connected swarm of n nodes uniformly on a square area.

    The side length follows from the density: side = 1000 * sqrt(n / density)
    meters.  Draws are resampled until the disk-model graph is connected;
    raises GenerationError once the attempt budget is spent, which signals
    an infeasible (n, density, comm_range) combination rather than looping
    forever.  Deterministic for a fixed seed.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if density_per_km2 <= 0:
        raise ValueError("density_per_km2 must be positive")
    if comm_range <= 0:
        raise ValueError("comm_range must be positive")
    side = 1000.0 * math.sqrt(n / density_per_km2)
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        positions = rng.uniform(0.0, side, size=(n, 2))
        if count_subnets(build_adjacency(positions, comm_range)) == 1:
            return SwarmTopology(positions=positions, comm_range=comm_range, side=side)
    raise GenerationError(
        f"no connected swarm with n={n}, density={density_per_km2}/km^2, "
        f"comm_range={comm_range} m in {max_attempts} attempts"
    )


def hop_distances(adj: np.ndarray) -> np.ndarray:
    """All-pairs minimum hop counts; unreachable pairs are ``inf``."""
    a = np.asarray(adj)
    graph = csr_matrix(a.astype(np.int8))
    return shortest_path(graph, method="D", directed=False, unweighted=True)


def component_labels(adj: np.ndarray) -> tuple[int, np.ndarray]:
    """Connected components of an undirected adjacency: (count, labels)."""
    a = np.asarray(adj)
    count, labels = connected_components(csr_matrix(a.astype(np.int8)), directed=False)
    return int(count), labels


def count_subnets(adj: np.ndarray) -> int:
    """Number of connected components (sub-nets) of the graph."""
    return component_labels(adj)[0]


def laplacian(adj: np.ndarray) -> np.ndarray:
    """Graph Laplacian L = diag(degrees) - A; symmetric PSD, rows sum to 0."""
    a = np.asarray(adj, dtype=float)
    return np.diag(a.sum(axis=1)) - a


def degree_stats(adj: np.ndarray) -> DegreeStats:
    """Degree summary of a graph, including the cumulative distribution."""
    deg = np.asarray(adj).sum(axis=1).astype(int)
    max_degree = int(deg.max()) if deg.size else 0
    cumulative = np.array([float(np.mean(deg <= d)) for d in range(max_degree + 1)])
    return DegreeStats(mean=float(deg.mean()), max_degree=max_degree, cumulative=cumulative)


def diameter_hops(adj: np.ndarray) -> int:
    """Maximum finite hop distance; raises ValueError on disconnected graphs."""
    hops = hop_distances(adj)
    if np.isinf(hops).any():
        raise ValueError("graph is disconnected; hop diameter undefined")
    return int(hops.max())


def save_topology(path: str | Path, topology: SwarmTopology) -> None:
    """Write a topology JSON file (positions at 1e-6 m precision, index order)."""
    payload = {
        "version": TOPOLOGY_VERSION,
        "n": topology.n,
        "d_tr_m": float(topology.comm_range),
        "side_m": float(topology.side),
        "positions": [[round(float(x), 6), round(float(y), 6)] for x, y in topology.positions],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_topology(path: str | Path) -> SwarmTopology:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != TOPOLOGY_VERSION:
        raise ValueError(f"unsupported topology file version: {payload.get('version')!r}")
    positions = np.asarray(payload["positions"], dtype=float)
    if positions.shape[0] != payload["n"]:
        raise ValueError("topology file is inconsistent: n does not match positions")
    return SwarmTopology(positions=positions, comm_range=float(payload["d_tr_m"]),
                         side=float(payload["side_m"]))
