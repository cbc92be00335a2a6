"""Bipartite damage-attention graphs with multi-hop dilation.

Each branch k dilates the input graph's links to hop distance <= k and then
keeps only remaining-to-destroyed links, producing a bipartite graph stored
as an (n_remaining, n_destroyed) biadjacency.  The sequence of branches for
k = 1..K, plus the block-diagonal batch the convolution network consumes,
comes out of a single hop-distance pass (hop thresholding, not repeated
matrix powers).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .damage import InputGraph
from .swarm import count_subnets, hop_distances


@dataclass(frozen=True)
class BipartiteDamageGraph:
    """One dilation branch: remaining-to-destroyed links within ``hop_limit`` hops."""

    hop_limit: int
    biadjacency: np.ndarray

    @property
    def n_remaining(self) -> int:
        return self.biadjacency.shape[0]

    @property
    def n_destroyed(self) -> int:
        return self.biadjacency.shape[1]

    @property
    def nnz(self) -> int:
        """Nonzeros of the full symmetric adjacency (twice the biadjacency's)."""
        return 2 * int(self.biadjacency.sum())

    def full_adjacency(self) -> np.ndarray:
        """Materialize the full (n, n) adjacency [[0, B], [B^T, 0]]."""
        n_r, n_d = self.biadjacency.shape
        full = np.zeros((n_r + n_d, n_r + n_d), dtype=bool)
        full[:n_r, n_r:] = self.biadjacency
        full[n_r:, :n_r] = self.biadjacency.T
        return full

    def is_connected(self) -> bool:
        """True iff the bipartite graph on all n_r + n_d nodes is one component."""
        return count_subnets(self.full_adjacency()) == 1


@dataclass(frozen=True)
class DamageGraphSequence:
    """Branches k = 1..K plus their block-diagonal batch structures.

    ``batch_adjacency`` is the (KN, KN) sparse block diagonal of the full
    per-branch adjacencies; ``batch_features`` stacks the input features
    K times to match.
    """

    graphs: tuple[BipartiteDamageGraph, ...]
    batch_adjacency: sparse.csr_matrix
    batch_features: np.ndarray
    n_remaining: int
    n_destroyed: int

    @property
    def branches(self) -> int:
        return len(self.graphs)

    @property
    def n(self) -> int:
        return self.n_remaining + self.n_destroyed


@dataclass(frozen=True)
class SparsityReport:
    """Structural nonzero accounting for the batch convolution kernel."""

    nnz_per_branch: tuple[int, ...]
    kernel_nnz: int
    density: float
    density_bound: float


def dilate_adjacency(hops: np.ndarray, hop_limit: int) -> np.ndarray:
    """k-hop dilation: link i, j iff 0 < hops_ij <= hop_limit.

    Unreachable pairs (inf) are never linked; the diagonal stays zero.
    """
    if hop_limit < 1:
        raise ValueError("hop_limit must be at least 1")
    h = np.asarray(hops)
    return (h > 0) & (h <= hop_limit)


def damage_mask(n_remaining: int, n_destroyed: int) -> np.ndarray:
    """Boolean mask keeping only remaining-to-destroyed links."""
    n = n_remaining + n_destroyed
    mask = np.zeros((n, n), dtype=bool)
    mask[:n_remaining, n_remaining:] = True
    mask[n_remaining:, :n_remaining] = True
    return mask


def bipartite_damage_graph(dilated: np.ndarray, n_remaining: int, n_destroyed: int,
                           hop_limit: int) -> BipartiteDamageGraph:
    """Mask a dilated adjacency to its remaining/destroyed cross block.

    Equivalent to the element-wise product with ``damage_mask`` followed by
    extraction of the upper-right biadjacency block.
    """
    dil = np.asarray(dilated, dtype=bool)
    if dil.shape != (n_remaining + n_destroyed,) * 2:
        raise ValueError("dilated adjacency shape does not match n_remaining + n_destroyed")
    biadjacency = dil[:n_remaining, n_remaining:].copy()
    return BipartiteDamageGraph(hop_limit=hop_limit, biadjacency=biadjacency)


def choose_branch_count(hop_diameter: int, cap: int = 12) -> int:
    """Number of dilation branches: floor((hop_diameter + 1) / 2), capped.

    The cap bounds the memory of the (KN, KN) batch, which grows linearly
    in the branch count.
    """
    return min((hop_diameter + 1) // 2, cap)


def build_graph_sequence(input_graph: InputGraph, branches: int) -> DamageGraphSequence:
    """Build branches k = 1..K from one hop-distance pass, plus the batch."""
    if branches < 1:
        raise ValueError("branches must be at least 1")
    n_r, n_d = input_graph.n_remaining, input_graph.n_destroyed
    hops = hop_distances(input_graph.adjacency)
    graphs = tuple(
        bipartite_damage_graph(dilate_adjacency(hops, k), n_r, n_d, k)
        for k in range(1, branches + 1)
    )
    blocks = [sparse.csr_matrix(g.full_adjacency().astype(float)) for g in graphs]
    batch_adjacency = sparse.block_diag(blocks, format="csr")
    batch_features = np.tile(input_graph.features, (branches, 1))
    return DamageGraphSequence(
        graphs=graphs,
        batch_adjacency=batch_adjacency,
        batch_features=batch_features,
        n_remaining=n_r,
        n_destroyed=n_d,
    )


def sparsity_report(seq: DamageGraphSequence) -> SparsityReport:
    """Report structural nonzeros of the batch kernel against its bound.

    The kernel I - step * Laplacian has every diagonal entry structurally
    nonzero plus the adjacency pattern, so its count is sum(nnz per branch)
    plus KN.  The density can never exceed 1/(2K) + 1/(KN).
    """
    k = seq.branches
    n_total = k * seq.n
    nnz_per_branch = tuple(g.nnz for g in seq.graphs)
    kernel_nnz = sum(nnz_per_branch) + n_total
    density = kernel_nnz / float(n_total * n_total)
    bound = 1.0 / (2 * k) + 1.0 / n_total
    if density > bound + 1e-15:
        raise ValueError(f"kernel density {density} exceeds its bound {bound}")
    return SparsityReport(
        nnz_per_branch=nnz_per_branch,
        kernel_nnz=kernel_nnz,
        density=density,
        density_bound=bound,
    )


def dump_edge_lists(path: str | Path, seq: DamageGraphSequence) -> None:
    """Debug dump: per-branch edge lists in input-graph index space."""
    entries = []
    for g in seq.graphs:
        rows, cols = np.nonzero(g.biadjacency)
        edges = [[int(r), int(seq.n_remaining + d)] for r, d in zip(rows, cols)]
        entries.append({"k": g.hop_limit, "edges": edges})
    Path(path).write_text(json.dumps(entries, indent=2) + "\n")
