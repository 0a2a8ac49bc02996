"""Entanglement across every cut of the chain ground state.

For each cut the right part is traced out. The second column is the part
of the path where at least s+1 qubits have already been copied to the
left; on those states the left region carries s qubits that are maximally
entangled with the right, so its entropy is at least s bits.
"""
import sys

from tichain.configspace import Region, chain_rules
from tichain.entanglement import construct_phi_g, entropy, reduced_density, split_phi_g

n = int(sys.argv[1]) if len(sys.argv) > 1 else 11
s = (n - 3) // 4
rs = chain_rules()

g = construct_phi_g(n)
_, tail, c = split_phi_g(n)
print(f"n={n}: {g.support_size} basis states, s={s}, tail weight c={c} ({float(c):.3f})")
print(f"{'cut':>4} {'S(ground)':>10} {'S(tail)':>9} {'tail blocks':>12}")
for t in range(1, n):
    keep = Region(0, n - t, n)
    S = entropy(reduced_density(g, keep))
    rho = reduced_density(tail, keep)
    blocks = rho.labelled_blocks(range(1, s + 1), rs) if n - t > s else None
    nb = "-" if blocks is None else str(len(blocks))
    print(f"{t:4d} {S:10.4f} {entropy(rho):9.4f} {nb:>12}")
