"""Three regimes of the filtered aggregation on a toy gradient matrix."""

import numpy as np

from graphfl.filtering import aggregate, aggregation_weights, build_filter_matrix, fedavg
from graphfl.graph import eigendecompose, laplacian

# two rooms of three devices, joined by one edge between devices 2 and 3
adj = np.zeros((6, 6))
for i, j in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]:
    adj[i, j] = adj[j, i] = 1
spec = eigendecompose(laplacian(adj))

# devices in room A push +1, room B pushes -1
G = np.array([[1.0], [1.0], [1.0], [-1.0], [-1.0], [-1.0]])
sizes = np.array([450, 450, 450, 450, 450, 450])
kappa = aggregation_weights(sizes)

for mu in (0.0, 0.5, 5.0, 1e12):
    out = aggregate(build_filter_matrix(spec, mu), kappa, G)
    print(f"mu_s={mu:g}:", np.round(out.ravel(), 3))

# mu_s -> infinity is plain FedAvg
print("fedavg:", fedavg(sizes / sizes.sum(), G))

# cut the bridge: each room keeps its own average
adj[2, 3] = adj[3, 2] = 0
split = eigendecompose(laplacian(adj))
print("split rooms, mu_s=1e12:",
      np.round(aggregate(build_filter_matrix(split, 1e12), kappa, G).ravel(), 3))
