"""Build the multi-hop bipartite damage-graph sequence for one scenario.

Shows how each dilation branch adds longer-range remaining-to-destroyed
links (monotone nesting), when branches become connected, and how sparse
the resulting block-diagonal convolution kernel stays.
"""
from resilinet import (apply_damage, build_input_graph, build_graph_sequence,
                       choose_branch_count, diameter_hops, generate_swarm,
                       sparsity_report)

topology = generate_swarm(n=50, density_per_km2=200.0, comm_range=120.0, seed=1)
scenario = apply_damage(topology, n_destroyed=25, seed=2)
graph_in = build_input_graph(topology, scenario)

hop_diameter = diameter_hops(topology.adjacency())
branches = choose_branch_count(hop_diameter)
print(f"hop diameter {hop_diameter} -> {branches} dilation branches")

seq = build_graph_sequence(graph_in, branches)
for graph in seq.graphs:
    print(f"  k={graph.hop_limit}: {graph.nnz // 2} cross links, "
          f"connected={graph.is_connected()}")

report = sparsity_report(seq)
print(f"\nbatch: {seq.batch_adjacency.shape[0]} x {seq.batch_adjacency.shape[1]}")
print(f"kernel nonzeros: {report.kernel_nnz} "
      f"(density {report.density:.4f} <= bound {report.density_bound:.4f})")
