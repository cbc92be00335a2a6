"""Graph-convolution planner network over the bipartite damage-graph batch.

The network maps normalized node positions through a stack of graph
convolutions ``(I - step * L) X W`` on the block-diagonal batch: one widening
layer, ``blocks`` residual blocks (two convolution + ReLU pairs each, with a
skip from the first layer's output), and a tanh projection back to 2-D that
is rescaled to position range.  Each branch block of the output is a
candidate target-position matrix; the loss is the worst remaining-node
flight time plus a penalty for every extra sub-net in the candidate graph.

Everything is hand-rolled numpy: the forward pass caches what reverse mode
needs, gradients are derived manually (the sub-net penalty is piecewise
constant, so training uses a spanning-tree gap surrogate whose gradient
pulls the closest node pair of disconnected components together), and the
optimizer is a plain Adam.
"""
from __future__ import annotations

import base64
import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import minimum_spanning_tree

from .damage import InputGraph, apply_damage, build_input_graph
from .damage_graphs import DamageGraphSequence, build_graph_sequence, choose_branch_count
from .swarm import build_adjacency, component_labels, count_subnets, diameter_hops, generate_swarm

MODEL_VERSION = 1


class TrainingDivergence(RuntimeError):
    """Non-finite values appeared during training."""


@dataclass(frozen=True)
class Hyperparams:
    """Network and training knobs; defaults match the reference experiments.

    ``kernel_step`` of None resolves to 1/n at kernel build time, which
    always satisfies the contraction condition step <= 1/max_degree.
    ``gap_penalty`` of None resolves to lagrange_s / comm_range, i.e. one
    full penalty unit per communication range of residual component gap.
    """

    hidden_dim: int = 512
    blocks: int = 3
    kernel_step: float | None = None
    lagrange_s: float = 100.0
    gap_penalty: float | None = None
    learning_rate: float = 1e-4
    dropout: float = 0.1
    pretrain_iters: int = 500
    online_iters: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_speed: float = 10.0
    branch_cap: int = 12
    literal_upscale: bool = False

    def __post_init__(self):
        if self.hidden_dim < 1 or self.blocks < 1:
            raise ValueError("hidden_dim and blocks must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.kernel_step is not None and self.kernel_step <= 0:
            raise ValueError("kernel_step must be positive")
        if self.online_iters < 1 or self.pretrain_iters < 1:
            raise ValueError("iteration counts must be at least 1")

    def resolve_gap_penalty(self, comm_range: float) -> float:
        return self.lagrange_s / comm_range if self.gap_penalty is None else self.gap_penalty


@dataclass(frozen=True)
class ModelWeights:
    """Layer weight matrices: (2, d), then 2 per block (d, d), then (d, 2)."""

    matrices: tuple[np.ndarray, ...]
    hidden_dim: int
    blocks: int

    def __post_init__(self):
        expected = self.expected_shapes(self.hidden_dim, self.blocks)
        shapes = tuple(m.shape for m in self.matrices)
        if shapes != expected:
            raise ValueError(f"weight shapes {shapes} do not match {expected}")
        for m in self.matrices:
            if not np.all(np.isfinite(m)):
                raise ValueError("weights must be finite")

    @property
    def q(self) -> int:
        """Total number of convolution layers."""
        return 2 * self.blocks + 2

    @staticmethod
    def expected_shapes(hidden_dim: int, blocks: int) -> tuple[tuple[int, int], ...]:
        shapes = [(2, hidden_dim)]
        shapes.extend([(hidden_dim, hidden_dim)] * (2 * blocks))
        shapes.append((hidden_dim, 2))
        return tuple(shapes)

    @classmethod
    def init_scaled_uniform(cls, hidden_dim: int, blocks: int, seed: int) -> "ModelWeights":
        """Uniform init on +-sqrt(6 / (fan_in + fan_out)) per matrix."""
        rng = np.random.default_rng(seed)
        mats = []
        for rows, cols in cls.expected_shapes(hidden_dim, blocks):
            bound = np.sqrt(6.0 / (rows + cols))
            mats.append(rng.uniform(-bound, bound, size=(rows, cols)))
        return cls(matrices=tuple(mats), hidden_dim=hidden_dim, blocks=blocks)


def build_kernel(seq: DamageGraphSequence, step: float | None = None) -> sparse.csr_matrix:
    """Convolution kernel I - step * Laplacian of the block-diagonal batch.

    Validates the contraction condition 0 < step <= 1/max_degree; the
    resulting matrix is symmetric, entrywise in [0, 1], and row-stochastic.
    """
    adjacency = seq.batch_adjacency
    n_total = adjacency.shape[0]
    if step is None:
        step = 1.0 / seq.n
    degrees = np.asarray(adjacency.sum(axis=1)).ravel()
    max_degree = float(degrees.max()) if n_total else 0.0
    if step <= 0 or (max_degree > 0 and step > 1.0 / max_degree + 1e-15):
        raise ValueError(
            f"kernel step {step} violates contraction bound 1/{max_degree}"
        )
    kernel = sparse.identity(n_total, format="csr") - step * (
        sparse.diags(degrees) - adjacency
    )
    return kernel.tocsr()


def single_branch_kernel(seq: DamageGraphSequence, branch: int,
                         step: float | None = None) -> sparse.csr_matrix:
    """Kernel I - step * L for one branch's full (n, n) adjacency."""
    if not 1 <= branch <= seq.branches:
        raise ValueError("branch index out of range")
    full = seq.graphs[branch - 1].full_adjacency().astype(float)
    if step is None:
        step = 1.0 / seq.n
    degrees = full.sum(axis=1)
    max_degree = float(degrees.max()) if degrees.size else 0.0
    if step <= 0 or (max_degree > 0 and step > 1.0 / max_degree + 1e-15):
        raise ValueError(f"kernel step {step} violates contraction bound 1/{max_degree}")
    adjacency = sparse.csr_matrix(full)
    return (sparse.identity(seq.n, format="csr")
            - step * (sparse.diags(degrees) - adjacency)).tocsr()


def kernel_flow(seq: DamageGraphSequence, branch: int, x: np.ndarray,
                steps: int, step_size: float | None = None) -> np.ndarray:
    """Apply one branch's kernel ``steps`` times to x (no weights).

    Column sums are invariant; on a connected branch the rows converge to
    the centroid of x, and on a disconnected branch to per-component
    centroids.
    """
    kernel = single_branch_kernel(seq, branch, step_size)
    out = np.asarray(x, dtype=float).copy()
    for _ in range(steps):
        out = kernel @ out
    return out


def normalize_features(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Center on the swarm centroid and scale every row norm below 1.

    Returns (normalized, center, scale) with scale the maximum distance of
    any point from the centroid; the division by scale + 1 keeps row norms
    strictly under 1 even for the farthest node.
    """
    pts = np.asarray(points, dtype=float)
    center = pts.mean(axis=0)
    scale = float(np.linalg.norm(pts - center, axis=1).max())
    return (pts - center) / (scale + 1.0), center, scale


def upscale_features(normalized: np.ndarray, center: np.ndarray, scale: float) -> np.ndarray:
    """Exact inverse of normalize_features."""
    return (scale + 1.0) * np.asarray(normalized, dtype=float) + center


def gco_apply(kernel, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One graph convolution: (I - step L) X W as sparse-dense then dense-dense."""
    return (kernel @ x) @ w


@dataclass(frozen=True)
class BlockTrace:
    dropout_mask: np.ndarray | None
    mid_a: np.ndarray
    act_a: np.ndarray
    mid_b: np.ndarray
    act_b: np.ndarray


@dataclass(frozen=True)
class ForwardTrace:
    """Everything backward needs to replay the forward pass exactly."""

    x_norm: np.ndarray
    first_mid: np.ndarray
    first_act: np.ndarray
    block_traces: tuple[BlockTrace, ...]
    final_mid: np.ndarray
    final_act: np.ndarray
    output: np.ndarray
    center: np.ndarray
    scale: float
    train: bool


def forward(weights: ModelWeights, seq: DamageGraphSequence, kernel,
            config: Hyperparams, train: bool = False,
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, ForwardTrace]:
    """Run the network on the batch; returns (output positions, trace).

    Dropout is applied between residual blocks in train mode only (masks are
    recorded in the trace); eval mode is fully deterministic.  Raises
    TrainingDivergence if the output stops being finite.
    """
    mats = weights.matrices
    if mats[0].shape != (seq.batch_features.shape[1], weights.hidden_dim):
        raise ValueError("first weight matrix does not match the feature width")
    needs_rng = train and config.dropout > 0.0 and weights.blocks > 1
    if needs_rng and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")

    n = seq.n
    center = seq.batch_features[:n].mean(axis=0)
    scale = float(np.linalg.norm(seq.batch_features[:n] - center, axis=1).max())
    x_norm = (seq.batch_features - center) / (scale + 1.0)

    first_mid = kernel @ x_norm
    first_act = np.maximum(first_mid @ mats[0], 0.0)

    x = first_act
    block_traces = []
    for l in range(weights.blocks):
        if train and config.dropout > 0.0 and l > 0:
            keep = 1.0 - config.dropout
            mask = (rng.random(x.shape) >= config.dropout) / keep
            dropped = x * mask
        else:
            mask = None
            dropped = x
        w_a = mats[1 + 2 * l]
        w_b = mats[2 + 2 * l]
        mid_a = kernel @ dropped
        act_a = np.maximum(mid_a @ w_a, 0.0)
        mid_b = kernel @ act_a
        act_b = np.maximum(mid_b @ w_b, 0.0)
        x = act_b + first_act
        block_traces.append(BlockTrace(mask, mid_a, act_a, mid_b, act_b))

    final_mid = kernel @ x
    final_act = np.tanh(final_mid @ mats[-1])
    if config.literal_upscale:
        output = (scale + 1.0) * (final_act + center)
    else:
        output = (scale + 1.0) * final_act + center
    if not np.all(np.isfinite(output)):
        raise TrainingDivergence("non-finite network output")

    trace = ForwardTrace(
        x_norm=x_norm, first_mid=first_mid, first_act=first_act,
        block_traces=tuple(block_traces), final_mid=final_mid,
        final_act=final_act, output=output, center=center, scale=scale,
        train=train,
    )
    return output, trace


def backward(trace: ForwardTrace, weights: ModelWeights, kernel,
             grad_output: np.ndarray) -> list[np.ndarray]:
    """Reverse-mode gradients of every weight matrix given d(loss)/d(output).

    The kernel is symmetric, so its transpose in the chain is itself.
    """
    mats = weights.matrices
    g_final = grad_output * (trace.scale + 1.0)
    g_zq = g_final * (1.0 - trace.final_act ** 2)
    grads = [np.zeros_like(m) for m in mats]
    grads[-1] = trace.final_mid.T @ g_zq

    g_x = kernel @ (g_zq @ mats[-1].T)
    g_first = np.zeros_like(trace.first_act)
    for l in range(weights.blocks - 1, -1, -1):
        bt = trace.block_traces[l]
        w_a = mats[1 + 2 * l]
        w_b = mats[2 + 2 * l]
        g_first += g_x
        g_zb = g_x * (bt.act_b > 0)
        grads[2 + 2 * l] = bt.mid_b.T @ g_zb
        g_a = kernel @ (g_zb @ w_b.T)
        g_za = g_a * (bt.act_a > 0)
        grads[1 + 2 * l] = bt.mid_a.T @ g_za
        g_in = kernel @ (g_za @ w_a.T)
        if bt.dropout_mask is not None:
            g_in = g_in * bt.dropout_mask
        if l == 0:
            g_first += g_in
        else:
            g_x = g_in

    g_z1 = g_first * (trace.first_act > 0)
    grads[0] = trace.first_mid.T @ g_z1
    return grads


@dataclass(frozen=True)
class BranchMetrics:
    """Per-branch recovery time and sub-net count of the candidate graphs."""

    flight_times: np.ndarray
    subnet_counts: np.ndarray


def per_branch_metrics(output: np.ndarray, n: int, n_remaining: int,
                       start_remaining: np.ndarray, max_speed: float,
                       comm_range: float) -> BranchMetrics:
    """Evaluate every branch block of the output as a recovery candidate.

    Flight time is the worst remaining-node travel time to its target;
    the sub-net count is taken on the remaining targets only (destroyed
    rows never enter the candidate graph).
    """
    branches = output.shape[0] // n
    times = np.empty(branches)
    counts = np.empty(branches, dtype=int)
    for k in range(branches):
        targets = output[k * n: k * n + n_remaining]
        dist = np.linalg.norm(targets - start_remaining, axis=1)
        times[k] = float(dist.max()) / max_speed
        counts[k] = count_subnets(build_adjacency(targets, comm_range))
    return BranchMetrics(flight_times=times, subnet_counts=counts)


def reported_loss(metrics: BranchMetrics, lagrange_s: float) -> float:
    """Objective value as reported: sum_k flight_time_k + penalty per extra sub-net."""
    extra = metrics.subnet_counts.astype(float) - 1.0
    return float(metrics.flight_times.sum() + lagrange_s * extra.sum())


def _component_gap_gradient(targets: np.ndarray, comm_range: float,
                            gap_penalty: float, grad_out: np.ndarray) -> float:
    """Spanning-tree gap surrogate for the sub-net penalty; adds into grad_out.

    Components of the candidate graph are joined into a complete graph
    weighted by their closest node-pair distance; along the minimum spanning
    tree, every edge contributes gap_penalty * (distance - comm_range), with
    gradient on the closest pair pulling the components together.  Returns
    the surrogate value (zero when already connected).
    """
    n_comp, labels = component_labels(build_adjacency(targets, comm_range))
    if n_comp <= 1:
        return 0.0
    members = [np.flatnonzero(labels == c) for c in range(n_comp)]
    delta = targets[:, None, :] - targets[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", delta, delta))

    comp_dist = np.zeros((n_comp, n_comp))
    closest: dict[tuple[int, int], tuple[int, int]] = {}
    for a in range(n_comp):
        for b in range(a + 1, n_comp):
            sub = dist[np.ix_(members[a], members[b])]
            flat = int(np.argmin(sub))
            i = int(members[a][flat // sub.shape[1]])
            j = int(members[b][flat % sub.shape[1]])
            comp_dist[a, b] = comp_dist[b, a] = dist[i, j]
            closest[(a, b)] = (i, j)

    tree = minimum_spanning_tree(sparse.csr_matrix(np.triu(comp_dist))).tocoo()
    surrogate = 0.0
    for a, b in zip(tree.row, tree.col):
        a, b = (int(a), int(b)) if a < b else (int(b), int(a))
        i, j = closest[(a, b)]
        w = dist[i, j]
        gap = w - comm_range
        if gap <= 0.0 or w == 0.0:
            continue
        surrogate += gap_penalty * gap
        unit = (targets[i] - targets[j]) / w
        grad_out[i] += gap_penalty * unit
        grad_out[j] -= gap_penalty * unit
    return surrogate


@dataclass(frozen=True)
class LossHead:
    """Gradient of the trainable objective plus the metrics behind it."""

    grad_output: np.ndarray
    metrics: BranchMetrics
    reported: float
    surrogate_total: float

    @property
    def trainable(self) -> float:
        """Value whose gradient grad_output actually is."""
        return float(self.metrics.flight_times.sum() + self.surrogate_total)


def loss_head(output: np.ndarray, n: int, n_remaining: int,
              start_remaining: np.ndarray, max_speed: float, comm_range: float,
              lagrange_s: float, gap_penalty: float) -> LossHead:
    """Per-branch loss gradients with respect to the output positions.

    The flight-time term differentiates through the arg-max node (ties go to
    the lowest remaining index, zero vector at zero displacement); the
    sub-net penalty is piecewise constant, so its gradient comes from the
    spanning-tree gap surrogate while the reported value keeps the exact
    penalty.  Destroyed rows receive zero gradient.
    """
    branches = output.shape[0] // n
    grad = np.zeros_like(output)
    times = np.empty(branches)
    counts = np.empty(branches, dtype=int)
    surrogate_total = 0.0
    for k in range(branches):
        lo = k * n
        targets = output[lo: lo + n_remaining]
        dist = np.linalg.norm(targets - start_remaining, axis=1)
        worst = int(np.argmax(dist))
        times[k] = float(dist[worst]) / max_speed
        if dist[worst] > 0.0:
            grad[lo + worst] += (targets[worst] - start_remaining[worst]) / (
                max_speed * dist[worst]
            )
        counts[k] = count_subnets(build_adjacency(targets, comm_range))
        surrogate_total += _component_gap_gradient(
            targets, comm_range, gap_penalty, grad[lo: lo + n_remaining]
        )
    metrics = BranchMetrics(flight_times=times, subnet_counts=counts)
    return LossHead(
        grad_output=grad,
        metrics=metrics,
        reported=reported_loss(metrics, lagrange_s),
        surrogate_total=surrogate_total,
    )


@dataclass(frozen=True)
class AdamState:
    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step: int = 0

    @classmethod
    def zeros(cls, weights: ModelWeights) -> "AdamState":
        return cls(
            first_moment=tuple(np.zeros_like(m) for m in weights.matrices),
            second_moment=tuple(np.zeros_like(m) for m in weights.matrices),
            step=0,
        )


def adam_step(weights: ModelWeights, grads: list[np.ndarray], state: AdamState,
              config: Hyperparams) -> tuple[ModelWeights, AdamState]:
    """Standard Adam update with bias correction; deterministic given state."""
    t = state.step + 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    new_mats, new_m, new_v = [], [], []
    for w, g, m, v in zip(weights.matrices, grads, state.first_moment,
                          state.second_moment):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_mats.append(w - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps))
        new_m.append(m)
        new_v.append(v)
    return (
        replace(weights, matrices=tuple(new_mats)),
        AdamState(first_moment=tuple(new_m), second_moment=tuple(new_v), step=t),
    )


def train_step(weights: ModelWeights, state: AdamState, seq: DamageGraphSequence,
               kernel, start_remaining: np.ndarray, comm_range: float,
               config: Hyperparams, rng: np.random.Generator
               ) -> tuple[ModelWeights, AdamState, LossHead]:
    """One train-mode forward/backward/Adam update; returns the loss head."""
    output, trace = forward(weights, seq, kernel, config, train=True, rng=rng)
    head = loss_head(
        output, seq.n, seq.n_remaining, start_remaining, config.max_speed,
        comm_range, config.lagrange_s, config.resolve_gap_penalty(comm_range),
    )
    grads = backward(trace, weights, kernel, head.grad_output)
    weights, state = adam_step(weights, grads, state, config)
    return weights, state, head


@dataclass(frozen=True)
class CurvePoint:
    """One loss-curve row as written to the training CSV."""

    iteration: int
    reported_loss: float
    surrogate_loss: float
    best_flight_time: float | None
    feasible: bool


@dataclass(frozen=True)
class PretrainResult:
    weights: ModelWeights
    curve: tuple[CurvePoint, ...]
    metadata: dict


def pretrain(n: int, density_per_km2: float, comm_range: float, seed: int,
             config: Hyperparams | None = None) -> PretrainResult:
    """Train fresh weights on one random half-damage split scenario.

    Derives topology/damage/init/dropout seeds from the master seed, so the
    whole run (and the persisted file) is reproducible bit for bit.
    """
    config = config or Hyperparams()
    topo_seed, damage_seed, init_seed, dropout_seed = (
        int(s) for s in np.random.SeedSequence(seed).generate_state(4)
    )
    topology = generate_swarm(n, density_per_km2, comm_range, topo_seed)
    scenario = apply_damage(topology, n // 2, damage_seed, require_split=True)
    input_graph = build_input_graph(topology, scenario)
    branches = choose_branch_count(diameter_hops(topology.adjacency()), config.branch_cap)
    seq = build_graph_sequence(input_graph, branches)
    kernel = build_kernel(seq, config.kernel_step)

    weights = ModelWeights.init_scaled_uniform(config.hidden_dim, config.blocks, init_seed)
    state = AdamState.zeros(weights)
    rng = np.random.default_rng(dropout_seed)
    start_remaining = input_graph.features[: input_graph.n_remaining]

    curve = []
    best_flight: float | None = None
    for iteration in range(1, config.pretrain_iters + 1):
        weights, state, head = train_step(
            weights, state, seq, kernel, start_remaining, comm_range, config, rng
        )
        feasible = head.metrics.subnet_counts == 1
        if feasible.any():
            t = float(head.metrics.flight_times[feasible].min())
            best_flight = t if best_flight is None else min(best_flight, t)
        curve.append(CurvePoint(
            iteration=iteration,
            reported_loss=head.reported,
            surrogate_loss=head.trainable,
            best_flight_time=best_flight,
            feasible=bool(feasible.any()),
        ))

    metadata = {
        "n": n,
        "density_per_km2": density_per_km2,
        "d_tr_m": comm_range,
        "seed": seed,
        "branches": branches,
        "n_destroyed": scenario.n_destroyed,
        "iterations": config.pretrain_iters,
        "first_loss": curve[0].reported_loss,
        "final_loss": curve[-1].reported_loss,
    }
    return PretrainResult(weights=weights, curve=tuple(curve), metadata=metadata)


@dataclass(frozen=True)
class SolutionSet:
    """Per-branch candidates plus the selected branch.

    ``branch_targets[k]`` is the full (n, 2) target matrix for branch k + 1;
    ``k_star`` is 1-based and only ever points at a feasible branch.  When no
    branch ever produced a connected candidate, ``feasible`` is False and the
    caller falls back.
    """

    branch_targets: tuple[np.ndarray, ...]
    flight_times: np.ndarray
    subnet_counts: np.ndarray
    k_star: int | None
    feasible: bool
    iterations: int


def solve(input_graph: InputGraph, seq: DamageGraphSequence, kernel,
          weights: ModelWeights, comm_range: float,
          config: Hyperparams | None = None, seed: int = 0) -> SolutionSet:
    """Online-iterate from pretrained weights and keep the best per branch.

    The pretrained weights are never mutated (Adam produces fresh arrays).
    After each train-mode step, an eval-mode forward scores every branch;
    the best feasible candidate per branch over all iterations is retained.
    Stops early once a feasible best exists and the reported loss has been
    stable (relative change < 1e-3) for 10 consecutive iterations.  An
    entirely infeasible run is a value, not an error.
    """
    config = config or Hyperparams()
    n, n_r = seq.n, seq.n_remaining
    start_remaining = input_graph.features[:n_r]
    branches = seq.branches

    if count_subnets(input_graph.adjacency[:n_r, :n_r]) == 1:
        identity = tuple(input_graph.features.copy() for _ in range(branches))
        return SolutionSet(
            branch_targets=identity,
            flight_times=np.zeros(branches),
            subnet_counts=np.ones(branches, dtype=int),
            k_star=1, feasible=True, iterations=0,
        )

    state = AdamState.zeros(weights)
    rng = np.random.default_rng(seed)
    best_times = np.full(branches, np.inf)
    best_targets: list[np.ndarray | None] = [None] * branches
    last_metrics: BranchMetrics | None = None
    last_output: np.ndarray | None = None
    prev_loss: float | None = None
    stable = 0
    iterations = 0

    for iterations in range(1, config.online_iters + 1):
        weights, state, head = train_step(
            weights, state, seq, kernel, start_remaining, comm_range, config, rng
        )
        output, _ = forward(weights, seq, kernel, config, train=False)
        metrics = per_branch_metrics(
            output, n, n_r, start_remaining, config.max_speed, comm_range
        )
        for k in range(branches):
            if metrics.subnet_counts[k] == 1 and metrics.flight_times[k] < best_times[k]:
                best_times[k] = metrics.flight_times[k]
                best_targets[k] = output[k * n: (k + 1) * n].copy()
        last_metrics, last_output = metrics, output

        if prev_loss is not None and abs(head.reported - prev_loss) <= 1e-3 * max(
            abs(prev_loss), 1e-12
        ):
            stable += 1
        else:
            stable = 0
        prev_loss = head.reported
        if stable >= 10 and np.isfinite(best_times).any():
            break

    targets, times, counts = [], [], []
    for k in range(branches):
        if best_targets[k] is not None:
            targets.append(best_targets[k])
            times.append(best_times[k])
            counts.append(1)
        else:
            targets.append(last_output[k * n: (k + 1) * n].copy())
            times.append(float(last_metrics.flight_times[k]))
            counts.append(int(last_metrics.subnet_counts[k]))
    feasible_mask = np.isfinite(best_times)
    if feasible_mask.any():
        k_star = int(np.argmin(np.where(feasible_mask, best_times, np.inf))) + 1
        feasible = True
    else:
        k_star, feasible = None, False
    return SolutionSet(
        branch_targets=tuple(targets),
        flight_times=np.asarray(times),
        subnet_counts=np.asarray(counts, dtype=int),
        k_star=k_star, feasible=feasible, iterations=iterations,
    )


def save_model(path: str | Path, weights: ModelWeights, init_seed: int,
               metadata: dict | None = None) -> None:
    """Persist weights as canonical JSON (row-major float64, base64 payload)."""
    payload = {
        "version": MODEL_VERSION,
        "n": (metadata or {}).get("n"),
        "d_s": weights.hidden_dim,
        "L": weights.blocks,
        "Q": weights.q,
        "dtype": "float64",
        "byte_order": "little",
        "shapes": [list(m.shape) for m in weights.matrices],
        "weights": [
            base64.b64encode(np.ascontiguousarray(m, dtype="<f8").tobytes()).decode("ascii")
            for m in weights.matrices
        ],
        "init_seed": init_seed,
        "metadata": metadata or {},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_model(path: str | Path) -> tuple[ModelWeights, dict]:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model file version: {payload.get('version')!r}")
    mats = []
    for shape, blob in zip(payload["shapes"], payload["weights"]):
        raw = np.frombuffer(base64.b64decode(blob), dtype="<f8")
        mats.append(raw.reshape(shape).astype(float))
    weights = ModelWeights(
        matrices=tuple(mats), hidden_dim=payload["d_s"], blocks=payload["L"]
    )
    return weights, payload.get("metadata", {})


def write_loss_curve(path: str | Path, curve: tuple[CurvePoint, ...]) -> None:
    """CSV of the training curve: one row per iteration."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "reported_loss", "surrogate_loss",
                         "best_T_rc", "feasible_flag"])
        for point in curve:
            writer.writerow([
                point.iteration,
                repr(point.reported_loss),
                repr(point.surrogate_loss),
                "" if point.best_flight_time is None else repr(point.best_flight_time),
                int(point.feasible),
            ])
