"""Local vs global accuracy as the smoothing parameter moves away from FedAvg.

Takes about half a minute.
"""

from graphfl.config import ExperimentConfig, RunSection
from graphfl.engine import run_experiment

ROUNDS = 40

print(f"{'aggregator':>16} {'local':>7} {'global':>7}")
for agg, mu in (("fedavg", 0.0), ("gfedfilt", 0.1), ("gfedfilt", 10.0), ("gfedfilt", 100.0)):
    cfg = ExperimentConfig(run=RunSection(rounds=ROUNDS, aggregator=agg, mu_s=mu))
    final = run_experiment(cfg).final
    label = agg if agg == "fedavg" else f"mu_s={mu:g}"
    print(f"{label:>16} {final.acc_local_mean:7.3f} {final.acc_global_mean:7.3f}")

# small mu_s keeps devices close to their own two labels (high local accuracy);
# large mu_s pulls everyone toward the shared model (better on all ten classes)
