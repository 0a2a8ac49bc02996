"""Spectral gap of the core chain operator against chain length.

Odd lengths have a unique zero mode (the uniform superposition over the
good paths); even lengths have none. Prints a table and the log-log slope
of the normalized gap over the odd lengths.
"""
import sys
import time

import numpy as np

from tichain.hamiltonian import assemble_chain
from tichain.spectral import lowest_eigenpairs

ns = [int(x) for x in sys.argv[1].split(",")] if len(sys.argv) > 1 else [4, 5, 6, 7, 8, 9]

print(f"{'n':>3} {'dim':>9} {'lambda0':>11} {'lambda1':>11} {'norm gap':>11} {'sec':>6}")
odd, gaps = [], []
for n in ns:
    t0 = time.perf_counter()
    op = assemble_chain(n)
    r = lowest_eigenpairs(op, 2, max_vectors=0)
    print(f"{n:3d} {op.dim:9d} {r.lambda0:11.3e} {r.lambda1:11.3e} "
          f"{r.normalized_gap:11.3e} {time.perf_counter() - t0:6.1f}")
    if n % 2:
        odd.append(n)
        gaps.append(r.normalized_gap)

if len(odd) > 1:
    slope = np.polyfit(np.log(odd), np.log(gaps), 1)[0]
    print(f"normalized gap ~ n^{slope:.2f} over n={odd}")
