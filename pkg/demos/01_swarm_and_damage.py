"""Generate a swarm, inspect its graph, and draw a network-splitting damage.

Walks the geometry layer end to end: disk-model adjacency, hop distances,
connectivity, and degree statistics before and after damage.
"""
import numpy as np

from resilinet import (apply_damage, build_input_graph, count_subnets,
                       degree_stats, diameter_hops, generate_swarm,
                       hop_distances, remaining_adjacency)

topology = generate_swarm(n=50, density_per_km2=200.0, comm_range=120.0, seed=1)
adjacency = topology.adjacency()
print(f"swarm: {topology.n} nodes on a {topology.side:.0f} m square")
print(f"links: {int(adjacency.sum()) // 2}, components: {count_subnets(adjacency)}")
print(f"hop diameter: {diameter_hops(adjacency)}")

stats = degree_stats(adjacency)
print(f"degrees: mean {stats.mean:.2f}, max {stats.max_degree}")

hops = hop_distances(adjacency)
print(f"mean hop distance: {hops[np.isfinite(hops)].mean():.2f}")

scenario = apply_damage(topology, n_destroyed=25, seed=2)
survivors = remaining_adjacency(topology, scenario)
print(f"\ndestroyed {scenario.n_destroyed} nodes -> "
      f"{count_subnets(survivors)} disconnected sub-nets remain")

graph_in = build_input_graph(topology, scenario)
print(f"input graph order: {graph_in.n_remaining} remaining rows first, "
      f"then {graph_in.n_destroyed} destroyed")
