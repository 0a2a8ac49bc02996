"""Command-line frontend.

    tichain verify   --n 4,5,6,7 [--rules FILE]
    tichain spectrum --n 7 --variant core
    tichain spectrum --cycle --n 5 --t 2 [--p-weight P]
    tichain spectrum --gap-scan --n 5,7,9,11
    tichain entropy  --n 7 --state phi_g [--region-len R]
    tichain entropy  --cycle --n 9 --t 2 --state Phi
    tichain path     --n 7 [--x 01]

Options may also come from ``--config FILE`` holding ``key=value`` lines
named like the flags (``n=5,7``, ``gap-scan=true``, ``command=verify``);
flags given on the command line win. Results go to stdout, or to files in
``--out DIR``. The exit status is 0 iff every check of the command passed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path as FilePath

import numpy as np

from .configspace import BudgetExceededError, chain_rules, good_start_state
from .entanglement import (
    construct_cycle_state,
    construct_phi_g,
    construct_phi_x,
    entropy_sweep,
    split_phi_g,
    sweep_csv,
)
from .hamiltonian import CHAIN_VARIANTS, OperatorWeights, assemble_chain
from .ruleset import RuleSpecError, parse_ruleset
from .spectral import (
    ConvergenceError,
    cycle_spectrum,
    lowest_eigenpairs,
    measure_chain_weight,
    spectral_record,
)
from .suites import run_suites
from .transition import dump_path, extract_path

COMMANDS = ("verify", "spectrum", "entropy", "path")
FLAG_TOLERANCE = 1e-9
EXIT_FAIL, EXIT_ERROR = 1, 2


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
    common.add_argument("--t", type=int, default=2, help="segments on a cycle")
    common.add_argument("--cycle", action="store_true")
    common.add_argument("--rules", type=FilePath, help="rule-spec file for chain commands")
    common.add_argument("--tol", type=_positive_float, default=FLAG_TOLERANCE)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", type=FilePath, help="write output files here")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock times (output is then not reproducible)")

    parser = argparse.ArgumentParser(prog="tichain", description=__doc__.split("\n")[0])
    parser.add_argument("--config", type=FilePath, help="key=value file mirroring the flags")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="exhaustive structural checks")
    sp = sub.add_parser("spectrum", parents=[common], help="lowest eigenvalues and gaps")
    sp.add_argument("--variant", default="core", choices=sorted(CHAIN_VARIANTS))
    sp.add_argument("--gap-scan", action="store_true")
    sp.add_argument("--p-weight", type=int, help="override the measured chain weight")
    en = sub.add_parser("entropy", parents=[common], help="entanglement entropy sweeps")
    en.add_argument("--state", default="phi_g", help="phi_g, phi_x:<bits>, psi:<i> or Phi")
    en.add_argument("--region-len", type=int, help="only this region size")
    pa = sub.add_parser("path", parents=[common], help="dump the path of a good start state")
    pa.add_argument("--x", default="", help="U qubit bits of the start state")
    return parser


def _config_tokens(path: FilePath) -> tuple[str | None, list[str]]:
    command, tokens = None, []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key == "command":
            command = value
        elif value.lower() in ("true", "yes", "on"):
            tokens.append(f"--{key}")
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            tokens += [f"--{key}", value]
    return command, tokens


def parse_args(argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=FilePath)
    known, rest = pre.parse_known_args(argv)
    if known.config is None:
        return build_parser().parse_args(argv)
    command, tokens = _config_tokens(known.config)
    if rest and rest[0] in COMMANDS:
        command, rest = rest[0], rest[1:]
    if command is None:
        build_parser().error("no command given on the command line or in the config file")
    return build_parser().parse_args([command] + tokens + rest)


# ---------------------------------------------------------------- output


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / name).write_text(text)


def _rules(args):
    if args.rules is None:
        return chain_rules()
    return parse_ruleset(args.rules.read_text())


def _check(name: str, ok: bool, **detail) -> dict:
    return {"check": name, "passed": bool(ok), **detail}


def _record(r, kind, n, t, variant, timing) -> dict:
    rec = spectral_record(r, kind, n, t, variant)
    if not timing:
        rec["wall_ms"] = None
    return rec


# ---------------------------------------------------------------- commands


def cmd_verify(args) -> int:
    rs = _rules(args)
    suites = []
    for n in args.n:
        suites += [s.record() for s in run_suites(n, rs)]
    ok = all(s["passed"] for s in suites)
    _emit(args, "verify.json", _json({"command": "verify", "n": args.n, "passed": ok,
                                      "suites": suites}))
    return 0 if ok else EXIT_FAIL


def _chain_checks(variant: str, n: int, r, tol: float) -> list[dict]:
    checks = [_check("positive semidefinite", r.lambda0 >= -tol, lambda0=r.lambda0)]
    odd = n % 2 == 1
    if variant in ("core", "frustration_free", "trans_legal"):
        if odd and variant != "trans_legal":
            checks.append(_check("unique zero mode", abs(r.lambda0) < tol and r.degeneracy == 1,
                                 degeneracy=r.degeneracy))
        elif not odd:
            checks.append(_check("no zero mode at even n", r.lambda0 > 1e-6))
    elif variant == "uniform_bracket" and odd:
        checks.append(_check("ground energy n-2", abs(r.lambda0 - (n - 2)) < 1e-6
                             and r.degeneracy == 1, expected=n - 2))
    return checks


def _fit(ns, gaps) -> dict:
    slope = float(np.polyfit(np.log(ns), np.log(gaps), 1)[0]) if len(ns) > 1 else math.nan
    positive = all(g > 0 for g in gaps)
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    return {"slope": slope, "positive": positive, "decreasing": decreasing,
            "slope_in_range": len(ns) < 2 or -8 <= slope <= 0}


def cmd_spectrum(args) -> int:
    records, checks = [], []
    if args.cycle:
        for n in args.n:
            weight = args.p_weight or measure_chain_weight(n).p
            cs = cycle_spectrum(n, args.t, OperatorWeights(n, weight), args.tol, args.seed)
            rec = _record(cs.result, "cycle", n, args.t, None, args.timing)
            rec["chain_weight"] = weight
            rec["layouts"] = [
                {"layout": lay.label, "dim": lay.dim, "lambda0": lay.lambda0,
                 "degeneracy": lay.degeneracy} for lay in cs.layouts
            ]
            records.append(rec)
            checks.append(_check(f"n={n} ground degeneracy n", cs.result.degeneracy == n,
                                 degeneracy=cs.result.degeneracy))
    else:
        rs = _rules(args)
        variant = "core" if args.gap_scan else args.variant
        for n in args.n:
            op = assemble_chain(n, variant, rs=rs)
            r = lowest_eigenpairs(op, 2, args.tol, seed=args.seed, max_vectors=0)
            records.append(_record(r, "chain", n, 1, variant, args.timing))
            checks += [dict(c, n=n) for c in _chain_checks(variant, n, r, args.tol)]
    out = {"command": "spectrum", "records": records}
    if args.gap_scan:
        ns = [rec["n"] for rec in records]
        fit = _fit(ns, [rec["normalized_gap"] for rec in records])
        out["fit"] = fit
        checks.append(_check("gap envelope", fit["positive"] and fit["decreasing"]
                             and fit["slope_in_range"], slope=fit["slope"]))
    ok = all(c["passed"] for c in checks)
    out["checks"] = checks
    out["passed"] = ok
    _emit(args, "spectrum.json", _json(out))
    return 0 if ok else EXIT_FAIL


def _state(args, n):
    spec = args.state
    if args.cycle:
        if spec == "Phi":
            return construct_cycle_state(n, args.t, "Phi")
        if spec.startswith("psi:"):
            return construct_cycle_state(n, args.t, int(spec[4:]))
        raise ValueError(f"cycle states are Phi or psi:<i>, got {spec!r}")
    if spec == "phi_g":
        return construct_phi_g(n)
    if spec.startswith("phi_x:"):
        return construct_phi_x(n, [int(b) for b in spec[6:]])
    raise ValueError(f"chain states are phi_g or phi_x:<bits>, got {spec!r}")


def cmd_entropy(args) -> int:
    reports, checks, summary = [], [], []
    for n in args.n:
        v = _state(args, n)
        N = v.n_sites
        if args.region_len is not None:
            sizes = [args.region_len]
        elif args.cycle:
            sizes = range(1, (n - 1) * args.t + 1)
        else:
            sizes = range(1, N + 1)
        c = float(split_phi_g(n)[2])
        reps = entropy_sweep(v, sizes, n, args.t if args.cycle else 1, c_split=c)
        reports += reps
        ent = np.array([r.entropy_bits for r in reps])
        cap = all(-1e-12 <= r.entropy_bits <= r.region.length * math.log2(21) + 1e-9
                  for r in reps)
        checks.append(_check(f"n={n} entropy within [0, r log2 21]", cap))
        if args.cycle and v.label == "Phi":
            worst = min(r.entropy_bits - r.s_bound for r in reps)
            checks.append(_check(f"n={n} entropy above the region bound", worst >= -1e-9,
                                 margin=worst))
        elif args.cycle:
            worst = min(r.entropy_bits - r.good_count / 4 for r in reps)
            checks.append(_check(f"n={n} entropy above good particles / 4", worst >= -1e-9,
                                 margin=worst))
        elif v.label == "phi_g":
            s = (n - 3) // 4
            lo, hi = s + 2, n - s - 2
            cut = [r for r in reps if lo <= r.region.length <= hi]
            worst = min((r.entropy_bits - c * s for r in cut), default=0.0)
            checks.append(_check(f"n={n} entropy above c*s on cuts {lo}..{hi}", worst >= -1e-9,
                                 margin=worst))
        summary.append(f"# n={n} t={args.t if args.cycle else 1} state={v.label} "
                       f"regions={len(reps)} min={ent.min():.6f} mean={ent.mean():.6f} "
                       f"s={(n - 3) / 4:g} c={c:.6f}")
    ok = all(ch["passed"] for ch in checks)
    summary += [f"# {'PASS' if ch['passed'] else 'FAIL'} {ch['check']}" for ch in checks]
    _emit(args, "entropy.csv", sweep_csv(reports))
    text = "\n".join(summary) + "\n"
    if args.out is None:
        sys.stderr.write(text)
    else:
        _emit(args, "entropy_summary.txt", text)
    return 0 if ok else EXIT_FAIL


def cmd_path(args) -> int:
    rs = _rules(args)
    parts = []
    for n in args.n:
        x = [int(b) for b in args.x] if args.x else ()
        p = extract_path(good_start_state(n, x, rs), rs)
        parts.append(f"# n={n} K={p.K}\n" + dump_path(p, rs))
    _emit(args, "path.txt", "".join(parts))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except (OSError, ValueError) as exc:
        print(f"tichain: {exc}", file=sys.stderr)
        return EXIT_ERROR
    handler = {"verify": cmd_verify, "spectrum": cmd_spectrum, "entropy": cmd_entropy,
               "path": cmd_path}[args.command]
    try:
        return handler(args)
    except (RuleSpecError, BudgetExceededError, ConvergenceError, ValueError, OSError,
            IndexError) as exc:
        print(f"tichain: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL if isinstance(exc, (RuleSpecError, ConvergenceError)) else EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
