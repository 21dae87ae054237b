"""Command-line experiment harness.

Every subcommand evaluates one family of experiments and emits CSV with
the fixed header

    experiment,graph,n,d,m,t,a,p,statistic,value,stderr,replicas,seed

one row per parameter point, 17 significant digits, LF line endings.
Reruns with the same configuration and seed are byte-identical and
independent of --threads.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

from . import avg_sim, bipartite_exact, ehrenfest_chain, entropy_tools, graph_core
from .errors import NumericalError

HEADER = "experiment,graph,n,d,m,t,a,p,statistic,value,stderr,replicas,seed"
FIELDS = HEADER.split(",")

GRAPH_CHOICES = ("hypercube", "k_bipartite", "complete")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans have no CSV encoding here")
    if isinstance(value, int):
        return str(value)
    return "%.17g" % float(value)


def parse_grid(text: str) -> list[float]:
    """start:stop:step, inclusive of both ends when step divides the range."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise ValueError(f"grid step must be positive, got {step}")
    span = stop - start
    if span < 0:
        raise ValueError(f"grid stop must be >= start in {text!r}")
    ratio = span / step
    if abs(ratio - round(ratio)) <= 1e-9:
        count = int(round(ratio)) + 1
    else:
        count = int(math.floor(ratio)) + 1
    return [start + i * step for i in range(count)]


def parse_floats(text: str) -> list[float]:
    """Comma list of reals, or a start:stop:step grid."""
    if ":" in text:
        return parse_grid(text)
    return [float(p) for p in text.split(",") if p != ""]


def parse_ints(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p != ""]


def _build_graph(args) -> graph_core.Graph:
    if args.graph == "hypercube":
        if args.d is None:
            raise ValueError("--d is required for --graph hypercube")
        return graph_core.hypercube(args.d)
    if args.graph == "k_bipartite":
        if args.m is None or args.n is None:
            raise ValueError("--m and --n are required for --graph k_bipartite")
        return graph_core.complete_bipartite(args.m, args.n - args.m)
    if args.graph == "complete":
        if args.n is None:
            raise ValueError("--n is required for --graph complete")
        return graph_core.complete(args.n)
    raise ValueError(f"unknown --graph value {args.graph!r}")


def _worst_start(g: graph_core.Graph) -> int:
    # Dirac starts are worst-case; on bipartite graphs the larger side is
    if g.family == graph_core.COMPLETE_BIPARTITE:
        return g.m
    return 0


_FAMILY_NAMES = {
    graph_core.HYPERCUBE: "hypercube",
    graph_core.COMPLETE_BIPARTITE: "k_bipartite",
    graph_core.COMPLETE: "complete",
}


def _graph_columns(g: graph_core.Graph) -> dict:
    return {"graph": _FAMILY_NAMES[g.family], "n": g.n, "d": g.d, "m": g.m}


def _record(experiment: str, seed: int, **kw) -> dict:
    row = {k: None for k in FIELDS}
    row["experiment"] = experiment
    row["seed"] = seed
    row.update(kw)
    return row


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_simulate(args, seed: int) -> list[dict]:
    g = _build_graph(args)
    x0 = args.x0 if args.x0 is not None else _worst_start(g)
    xi = avg_sim.dirac(g.n, x0)
    rows = []
    for t in parse_floats(args.t):
        est, se = avg_sim.mean_lp(
            g, xi, t, args.p, args.replicas, seed, threads=args.threads
        )
        rows.append(
            _record(
                "simulate",
                seed,
                **_graph_columns(g),
                t=t,
                p=args.p,
                statistic="mean_lp",
                value=est,
                stderr=se,
                replicas=args.replicas,
            )
        )
    return rows


def _cmd_exact_bipartite(args, seed: int) -> list[dict]:
    rows = []
    theta = bipartite_exact.theta(args.m, args.n)
    for a in parse_grid(args.a_grid):
        # the window formula can go nonpositive at small sizes; clamp to 0
        t = max((math.log(args.n) + a) / (theta * args.m), 0.0)
        value = bipartite_exact.exact_l2(args.m, args.n, "C2", t)
        rows.append(
            _record(
                "exact-bipartite",
                seed,
                graph="k_bipartite",
                n=args.n,
                m=args.m,
                t=t,
                a=a,
                p=2,
                statistic="exact_l2",
                value=value,
            )
        )
    return rows


def _cmd_hypercube_exact(args, seed: int) -> list[dict]:
    rows = []
    for d in parse_ints(args.d):
        for a in parse_grid(args.a_grid):
            t = max(0.5 * math.log(d) + a, 0.0)
            value, _ = ehrenfest_chain.hypercube_avg_l2_exact(d, t)
            rows.append(
                _record(
                    "hypercube-exact",
                    seed,
                    graph="hypercube",
                    n=1 << d,
                    d=d,
                    t=t,
                    a=a,
                    p=2,
                    statistic="exact_l2",
                    value=value,
                )
            )
    return rows


def _cmd_ehrenfest(args, seed: int) -> list[dict]:
    if args.check != "sandwich":
        raise ValueError(f"unknown --check value {args.check!r}")
    p_chain = ehrenfest_chain.build_p(args.d)
    rows = []
    for t in parse_floats(args.t):
        s00 = math.exp(ehrenfest_chain.log_s00(args.d, t))
        p_t = ehrenfest_chain.kernel_row(p_chain, 0, t)[0]
        p_half = ehrenfest_chain.kernel_row(p_chain, 0, t / 2.0)[0]
        ok = p_t <= s00 + 1e-10 and s00 <= p_half + 1e-10
        rows.append(
            _record(
                "ehrenfest",
                seed,
                graph="hypercube",
                d=args.d,
                t=t,
                statistic="sandwich_pass",
                value=1.0 if ok else 0.0,
            )
        )
    return rows


def _cmd_entropy(args, seed: int) -> list[dict]:
    g = _build_graph(args)
    if args.kappa is not None:
        kappa = args.kappa
    else:
        kappa = entropy_tools.kappa_known(g)
    xi = avg_sim.dirac(g.n, _worst_start(g))
    rows = []
    for t in parse_floats(args.t):
        mean, se, bound = entropy_tools.entropy_decay_check(
            g, xi, t, args.replicas, seed, kappa, threads=args.threads
        )
        common = dict(_graph_columns(g), t=t)
        rows.append(
            _record(
                "entropy",
                seed,
                **common,
                statistic="entropy_mean",
                value=mean,
                stderr=se,
                replicas=args.replicas,
            )
        )
        rows.append(
            _record("entropy", seed, **common, statistic="entropy_bound", value=bound)
        )
    return rows


def _cmd_hardy(args, seed: int) -> list[dict]:
    m_max = args.m_max if args.m_max is not None else args.d // 2
    if not 1 <= m_max <= args.d // 2:
        raise ValueError(f"--m-max must be in [1, d/2], got {m_max}")
    p_chain = ehrenfest_chain.build_p(args.d)
    rows = []
    for M in range(1, m_max + 1):
        c_m = ehrenfest_chain.hardy_constant(args.d, M)
        lam = float(ehrenfest_chain.killed_eigenvalues(p_chain, M)[0])
        if args.statistic == "ratio":
            stat, value = "hardy_ratio", c_m * lam
        elif args.statistic == "cm":
            stat, value = "hardy_cm", c_m
        else:
            stat, value = "lambda_p", lam
        rows.append(
            _record("hardy", seed, d=args.d, m=M, statistic=stat, value=value)
        )
    return rows


def _cmd_profile_sweep(args, seed: int) -> list[dict]:
    rows = []
    a_values = parse_grid(args.a_grid)
    if args.family == "hypercube":
        if args.d is None:
            raise ValueError("--d is required for --family hypercube")
        for a in a_values:
            t = max(0.5 * math.log(args.d) + a, 0.0)
            value, _ = ehrenfest_chain.hypercube_avg_l2_exact(args.d, t)
            rows.append(
                _record(
                    "profile-sweep",
                    seed,
                    graph="hypercube",
                    n=1 << args.d,
                    d=args.d,
                    t=t,
                    a=a,
                    p=2,
                    statistic="profile_measured",
                    value=value,
                )
            )
        return rows
    if args.m is None or args.n is None:
        raise ValueError("--m and --n are required for bipartite families")
    if args.family == "bipartite-l2":
        theta = bipartite_exact.theta(args.m, args.n)
        predicted_amp = 1.0 + bipartite_exact.big_d(args.m / args.n)
        for a in a_values:
            t = max((math.log(args.n) + a) / (theta * args.m), 0.0)
            measured = bipartite_exact.exact_l2(args.m, args.n, "C2", t)
            predicted = predicted_amp * math.exp(-a)
            common = dict(graph="k_bipartite", n=args.n, m=args.m, t=t, a=a, p=2)
            rows.append(
                _record(
                    "profile-sweep",
                    seed,
                    **common,
                    statistic="profile_measured",
                    value=measured,
                )
            )
            rows.append(
                _record(
                    "profile-sweep",
                    seed,
                    **common,
                    statistic="profile_predicted",
                    value=predicted,
                )
            )
        return rows
    if args.family == "bipartite-l1":
        g = graph_core.complete_bipartite(args.m, args.n - args.m)
        xi = avg_sim.dirac(g.n, _worst_start(g))
        for a in a_values:
            try:
                t = bipartite_exact.cutoff_time_l1(args.m, args.n, a)
            except ValueError:
                # the window formula goes nonpositive at small sizes
                t = 0.0
            est, se = avg_sim.mean_lp(
                g, xi, t, 1, args.replicas, seed, threads=args.threads
            )
            rows.append(
                _record(
                    "profile-sweep",
                    seed,
                    graph="k_bipartite",
                    n=args.n,
                    m=args.m,
                    t=t,
                    a=a,
                    p=1,
                    statistic="mean_lp",
                    value=est,
                    stderr=se,
                    replicas=args.replicas,
                )
            )
        return rows
    raise ValueError(f"unknown --family value {args.family!r}")


# ---------------------------------------------------------------------------
# parser plumbing


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--threads", type=int, default=1, help="replica workers")
    sub.add_argument("--output", default=None, help="write CSV here instead of stdout")
    sub.add_argument("--config", default=None, help="key=value file; flags override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avgproc", description="averaging-process experiment harness"
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="Monte Carlo mean L^p distance")
    p.add_argument("--graph", choices=GRAPH_CHOICES, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=int, choices=(1, 2), default=2)
    p.add_argument("--t", required=True, help="comma list or start:stop:step")
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--x0", type=int, default=None, help="start vertex (default worst case)")
    p.set_defaults(handler=_cmd_simulate)
    _add_common(p)

    p = subs.add_parser("exact-bipartite", help="exact L2 at the cutoff times")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a-grid", dest="a_grid", required=True)
    p.set_defaults(handler=_cmd_exact_bipartite)
    _add_common(p)

    p = subs.add_parser("hypercube-exact", help="exact hypercube L2 at T(a)")
    p.add_argument("--d", required=True, help="comma list of dimensions")
    p.add_argument("--a-grid", dest="a_grid", required=True)
    p.set_defaults(handler=_cmd_hypercube_exact)
    _add_common(p)

    p = subs.add_parser("ehrenfest", help="birth-death chain checks")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--check", choices=("sandwich",), required=True)
    p.add_argument("--t", required=True)
    p.set_defaults(handler=_cmd_ehrenfest)
    _add_common(p)

    p = subs.add_parser("entropy", help="entropy decay check")
    p.add_argument("--graph", choices=GRAPH_CHOICES, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t", required=True)
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--kappa", type=float, default=None, help="override the decay rate")
    p.set_defaults(handler=_cmd_entropy)
    _add_common(p)

    p = subs.add_parser("hardy", help="discrete Hardy constants")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m-max", dest="m_max", type=int, default=None)
    p.add_argument("--statistic", choices=("ratio", "cm", "lambda"), default="ratio")
    p.set_defaults(handler=_cmd_hardy)
    _add_common(p)

    p = subs.add_parser("profile-sweep", help="measured vs predicted cutoff profiles")
    p.add_argument(
        "--family", choices=("hypercube", "bipartite-l1", "bipartite-l2"), required=True
    )
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--a-grid", dest="a_grid", required=True)
    p.add_argument("--replicas", type=int, default=1000)
    p.set_defaults(handler=_cmd_profile_sweep)
    _add_common(p)

    return parser


def _apply_config_file(argv: list[str]) -> list[str]:
    """Inject key=value pairs from --config FILE as flags, unless the flag
    is already present on the command line (flags override the file)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValueError("--config requires a file path")
    path = argv[idx + 1]
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValueError(f"cannot read --config file: {exc}") from exc
    out = list(argv)
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "config":
            raise ValueError(f"{path}:{lineno}: config cannot nest")
        flag = "--" + key
        if any(tok == flag or tok.startswith(flag + "=") for tok in argv):
            continue
        out += [flag, value]
    return out


def _merge_negative_values(argv: list[str]) -> list[str]:
    """Join ``--flag -4:4:1`` into ``--flag=-4:4:1`` so argparse does not
    mistake values with a leading minus for option names."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (
            tok.startswith("--")
            and "=" not in tok
            and i + 1 < len(argv)
            and len(argv[i + 1]) > 1
            and argv[i + 1][0] == "-"
            and (argv[i + 1][1].isdigit() or argv[i + 1][1] == ".")
        ):
            out.append(tok + "=" + argv[i + 1])
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def _resolve_seed(args) -> int:
    if args.seed is not None:
        if args.seed < 0:
            raise ValueError(f"--seed must be nonnegative, got {args.seed}")
        return args.seed
    env = os.environ.get("AVGPROC_SEED")
    if env is not None:
        try:
            seed = int(env, 10)
        except ValueError as exc:
            raise ValueError(f"AVGPROC_SEED must be a decimal integer, got {env!r}") from exc
        if not 0 <= seed < 2**64:
            raise ValueError(f"AVGPROC_SEED out of unsigned 64-bit range: {seed}")
        return seed
    return 0


def _emit(rows: list[dict], path: str | None) -> None:
    lines = [HEADER]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in FIELDS))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        argv = _merge_negative_values(_apply_config_file(argv))
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else 2
        seed = _resolve_seed(args)
        rows = args.handler(args, seed)
        _emit(rows, args.output)
        return 0
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
