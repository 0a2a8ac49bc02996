"""Translationally invariant 1D Hamiltonians with highly entangled ground states."""

from .ruleset import builtin_chain_ruleset, builtin_cycle_ruleset, parse_ruleset

__version__ = "0.1.0"
