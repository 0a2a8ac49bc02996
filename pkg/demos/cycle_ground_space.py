"""Ground space of the translation-invariant cycle, layout by layout.

The operator never moves a delimiter, so it splits into one block per
delimiter layout. Only layouts made of length-n segments reach the bottom
of the spectrum; there are n of them (one per rotation), each with a
single ground state. Takes about two minutes and 600 MB at n=5, t=2.
"""
import sys

from tichain.hamiltonian import OperatorWeights
from tichain.spectral import cycle_spectrum, measure_chain_weight

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5
t = int(sys.argv[2]) if len(sys.argv) > 2 else 2

w = measure_chain_weight(n)
print(f"chain weight p({n}) = {w.p}  (size norm {w.size_norm}, segment gap {w.chain_gap:.4e})")
cs = cycle_spectrum(n, t, OperatorWeights(n, w.p))
print(f"{cs.result.dim} states in {len(cs.layouts)} layouts, "
      f"{cs.result.wall_ms / 1000:.0f} s")
print(f"{'layout':>{n * t}} {'dim':>8} {'lambda0':>13}")
for lay in cs.layouts:
    print(f"{lay.label:>{n * t}} {lay.dim:8d} {lay.lambda0:13.6e}")
vals = cs.result.eigenvalues
print(f"ground degeneracy {cs.result.degeneracy}, next level {vals[cs.result.degeneracy]:.4f}")
