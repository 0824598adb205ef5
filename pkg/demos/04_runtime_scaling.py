"""
Runtime versus number of time steps
===================================

A reduced version of the ``parsmooth bench`` experiment. The sequential
engine's runtime grows linearly in n. The parallel engine evaluates each
scan level as one vectorised numpy call, so on a CPU its cost is
dominated by per-level overhead rather than core count.
"""
# %%
import time

from parsmooth import IterationConfig, coordinated_turn_model, run_iterated, simulate

model = coordinated_turn_model()
grid = [100, 300, 1000, 3000]

print(f"{'n':>6} {'method':>6} {'seq [s]':>9} {'par [s]':>9}")
for n in grid:
    ys = simulate(model, n, seed=0).measurements
    for method in ("ieks", "ipls"):
        row = []
        for engine in ("sequential", "parallel"):
            start = time.perf_counter()
            run_iterated(model, ys, IterationConfig(method, engine, iterations=10))
            row.append(time.perf_counter() - start)
        print(f"{n:6d} {method:>6} {row[0]:9.3f} {row[1]:9.3f}")

# %%
# The full grid and CSV output:  parsmooth bench --out runtime.csv
