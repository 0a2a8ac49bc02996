"""Walk the good path on seven sites and show the potential rising at every step.

    python3 demos/good_path.py [n] [bits]
"""
import sys

from tichain.configspace import chain_rules, good_start_state
from tichain.transition import dump_path, extract_path, path_count_formula

n = int(sys.argv[1]) if len(sys.argv) > 1 else 7
bits = sys.argv[2] if len(sys.argv) > 2 else "10"[: (n - 3) // 2].ljust((n - 3) // 2, "0")

rs = chain_rules()
path = extract_path(good_start_state(n, [int(b) for b in bits], rs), rs)
print(f"n={n}, U qubits {bits}: {path.K} states (closed form {path_count_formula(n)})")
print(dump_path(path, rs), end="")
# the last state holds the qubits twice: once on e sites, once (mirrored) on E sites
