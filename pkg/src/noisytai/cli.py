"""Command-line entry point.

Every subcommand can write its machine-readable result with ``--output``;
the write is atomic and a ``<output>.config.json`` sidecar records the fully
resolved arguments, which ``noisytai replay`` re-runs.
"""

import argparse
import csv
from importlib import resources
import io as _stringio
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from ._validation import ConvergenceError, SizeLimitError, ValidationError
from .blowup import (
    SequenceSet,
    SequenceSpace,
    compute_l_n,
    penalty_factor_log,
    verify_blowup_exact,
)
from .capacity import capacity
from .exponent import default_mu_grid, region, theta, theta_direct
from .io import atomic_write, format_number, load_document, setting
from .probcore import CondPmf, Pmf
from .rng import default_threads, stream, stream_id
from .simulator import (
    SymbolwiseEncoder,
    TestInstance,
    blow_up_rule,
    converse_check,
    exact_errors,
    exponent_estimate,
    likelihood_rule,
    monte_carlo_errors,
    reliable_set,
    truncated_measure,
)

EXIT_OK, EXIT_INVALID, EXIT_REFUSED = 0, 1, 2
NATS_PER_BIT = math.log(2)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def demo_path():
    return str(resources.files("noisytai") / "data" / "demo_n4.json")


def _show(value, bits):
    return f"{value / NATS_PER_BIT:.6g} bits" if bits else f"{value:.6g} nats"


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"not a comma-separated number list: {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"not a comma-separated integer list: {text!r}") from None


DEFAULT_MU_GRID = "0.01:100:40"


def _mu_grid(text):
    """``lo:hi:points`` for a log-spaced grid, or an explicit comma list."""
    if ":" in text:
        lo, hi, pts = text.split(":")
        return list(default_mu_grid(int(pts), float(lo), float(hi)))
    return _float_list(text)


def _csv(header, rows):
    buf = _stringio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(args, text):
    if args.output:
        atomic_write(args.output, text)
        resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
        resolved["version"] = __version__
        atomic_write(args.output + ".config.json", json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)


def _document(path, *keys):
    doc = load_document(path)
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ValidationError(f"{path}: missing {', '.join(missing)}")
    return doc


def _encoder(doc):
    if "encoder" in doc:
        return SymbolwiseEncoder(doc["encoder"])
    u_size = doc["joint"].shape[0]
    if u_size != doc["channel"].x_size:
        raise ValidationError("no encoder given and |U| != |X|")
    return SymbolwiseEncoder(CondPmf.identity(u_size))


# ---------------------------------------------------------------------------
# subcommands


def cmd_capacity(args):
    doc = _document(args.document, "channel")
    res = capacity(doc["channel"], tol=args.tol)
    print(f"capacity {_show(res.value, args.bits)}", file=sys.stderr if args.output else sys.stdout)
    dist = ";".join(format_number(p) for p in res.input_dist.probs)
    text = _csv(["capacity_nats", "iterations", "gap", "input_dist"],
                [[res.value, res.iterations, res.gap, dist]])
    _emit(args, text)
    return EXIT_OK


def _resolve_capacity(args):
    if args.capacity is not None:
        if args.capacity < 0:
            raise ValidationError("capacity must be non-negative")
        return args.capacity
    return capacity(_document(args.channel, "channel")["channel"]).value


def cmd_exponent(args):
    src = _document(args.document, "joint")["joint"]
    cap = _resolve_capacity(args)
    res = theta(src, cap, mu_grid=_mu_grid(args.mu_grid), restarts=args.restarts, seed=args.seed)
    out = sys.stderr if args.output else sys.stdout
    print(f"theta {_show(res.theta, args.bits)}", file=out)
    row = [cap, res.theta, res.best_mu]
    header = ["capacity_nats", "theta_nats", "best_mu"]
    if args.oracle:
        direct = theta_direct(src, cap, grid_step=args.grid_step)
        print(f"theta_direct {_show(direct, args.bits)}", file=out)
        header.append("theta_direct_nats")
        row.append(direct)
    _emit(args, _csv(header, [row]))
    return EXIT_OK


def cmd_region(args):
    src = _document(args.document, "joint")["joint"]
    caps = _float_list(args.capacity_grid)
    reg = region(src, caps, mu_grid=_mu_grid(args.mu_grid), restarts=args.restarts, seed=args.seed)
    rows = [[c, t, mu] for (c, t), mu in zip(reg.points, reg.best_mus)]
    _emit(args, _csv(["capacity_nats", "theta_nats", "best_mu"], rows))
    return EXIT_OK


def _read_set(space, spec):
    if spec.startswith("random:"):
        try:
            p, seed = spec[len("random:"):].split(",")
            p, seed = float(p), int(seed)
        except ValueError:
            raise ValidationError(f"expected random:p,seed, got {spec!r}") from None
        if not 0 <= p <= 1:
            raise ValidationError("inclusion probability must lie in [0, 1]")
        gen = stream(seed, stream_id(0xB10, 0))
        return SequenceSet(space, gen.random(space.total) < p)
    seqs = []
    for line in Path(spec).read_text().splitlines():
        line = line.split("#")[0].strip()
        if not line:
            continue
        tokens = line.replace(",", " ").split()
        digits = [int(t) for t in (tokens if len(tokens) > 1 else list(tokens[0]))]
        if len(digits) != space.n or any(not 0 <= d < space.q for d in digits):
            raise ValidationError(f"bad sequence {line!r} for n={space.n}, q={space.q}")
        seqs.append(digits)
    return SequenceSet.from_sequences(space, np.array(seqs, dtype=int).reshape(-1, space.n))


def cmd_blowup(args):
    q = args.alphabet_size
    pmf = Pmf(_float_list(args.pmf)) if args.pmf else Pmf(np.full(q, 1.0 / q))
    if pmf.size != q:
        raise ValidationError("--pmf length differs from --alphabet-size")
    space = SequenceSpace(q, args.n)
    d = _read_set(space, args.set)
    ls = range(args.n + 1) if args.l == "sweep" else [int(args.l)]
    rows = []
    for l in ls:
        exact, bound, vacuous = verify_blowup_exact(pmf, args.n, d, l)
        rows.append([l, exact, bound, int(vacuous)])
    params = compute_l_n(args.n, args.epsilon, args.b)
    p_floor = args.p_floor if args.p_floor is not None else float(pmf.probs[pmf.probs > 0].min())
    pen = penalty_factor_log(args.n, params.l_n, q, p_floor)
    print(f"l_n={params.l_n} eps_prime={format_number(params.eps_prime)} "
          f"penalty_factor_log={format_number(pen)}", file=sys.stderr)
    _emit(args, _csv(["l", "exact_prob", "lemma_bound", "vacuous_flag"], rows))
    return EXIT_OK


def cmd_simulate(args):
    doc = _document(args.config, "joint", "channel")
    src, dmc, enc = doc["joint"], doc["channel"], _encoder(doc)
    target = args.target_alpha if args.target_alpha is not None else setting(doc, "target_alpha", 0.1)
    n_list = _int_list(args.n_list) if args.n_list else [int(setting(doc, "n", 4))]
    args.target_alpha, args.n_list = target, ",".join(str(n) for n in n_list)
    rows = []
    for n in n_list:
        rule = likelihood_rule(src, dmc, enc, n, target)
        if args.blowup_l:
            rule = blow_up_rule(rule.materialize(), args.blowup_l)
        inst = TestInstance(src, dmc, n, enc, rule)
        if args.exact:
            est = exact_errors(inst)
        else:
            est = monte_carlo_errors(inst, args.trials, seed=args.seed, threads=args.threads)
        rows.append([n, est.alpha, est.beta, est.beta_exponent, est.method, est.ci_halfwidth])
    _emit(args, _csv(["n", "alpha", "beta", "beta_exponent", "method", "ci"], rows))
    return EXIT_OK


def verify_ledger(doc):
    """Run the change-of-measure, blow-up and converse checks on one instance.

    Returns a list of ``(name, passed, detail)``.
    """
    src, dmc, enc = doc["joint"], doc["channel"], _encoder(doc)
    n = int(setting(doc, "n", 4))
    eps = setting(doc, "epsilon", 0.3)
    gamma = setting(doc, "gamma", (1 - eps) / 2)
    target = setting(doc, "target_alpha", eps)
    ledger = []

    rule = likelihood_rule(src, dmc, enc, n, target)
    inst = TestInstance(src, dmc, n, enc, rule)
    err = exact_errors(inst)
    ledger.append(("type_one_within_epsilon", err.alpha <= eps,
                   f"alpha {err.alpha:.6f} <= {eps:.6f}"))

    rel = reliable_set(inst, gamma, eps)
    ledger.append(("reliable_set_mass", rel.prob >= rel.lower_bound - 1e-9,
                   f"P(B) {rel.prob:.6f} >= {rel.lower_bound:.6f}"))
    tm = truncated_measure(inst, rel, eps)
    ledger.extend(tm.checks)

    params = compute_l_n(n, eps)
    blown = blow_up_rule(rule.materialize(), params.l_n)
    blown_inst = inst.with_rule(blown)
    rel_blown = reliable_set(blown_inst, params.eps_prime)
    covered = bool(np.all(~rel.mask | rel_blown.mask))
    ledger.append(("blown_up_acceptance_on_reliable_set", covered,
                   f"l_n={params.l_n}, acceptance >= {params.eps_prime:.6f} on B"))
    beta_blown = exact_errors(blown_inst).beta
    pen = penalty_factor_log(n, params.l_n, dmc.y_size, dmc.p_floor)
    ceiling = err.beta * math.exp(pen)
    ledger.append(("blow_up_penalty_factor", beta_blown <= ceiling + 1e-12,
                   f"beta {beta_blown:.6g} <= {ceiling:.6g}"))

    n_list = [int(v) for v in setting(doc, "converse_n_list", [4, 6, 8, 10])]
    slack = setting(doc, "converse_slack", 0.05)
    th = theta(src, capacity(dmc).value).theta
    ests = [exact_errors(TestInstance(src, dmc, m, enc, likelihood_rule(src, dmc, enc, m, target)))
            for m in n_list]
    slope, _ = exponent_estimate(ests)
    rep = converse_check(slope, th, slack)
    ledger.append(("converse_ceiling", rep.passed,
                   f"slope {slope:.6f} <= theta {th:.6f} + {slack:.3f}"))
    return ledger


def cmd_verify(args):
    doc = _document(args.config, "joint", "channel")
    ledger = verify_ledger(doc)
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in ledger]
    ok = all(ok for _, ok, _ in ledger)
    lines.append(f"{'PASS' if ok else 'FAIL'} overall ({sum(o for _, o, _ in ledger)}/{len(ledger)})")
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_INVALID


def cmd_replay(args):
    resolved = json.loads(Path(args.resolved).read_text())
    resolved.pop("version", None)
    sub = resolved.get("command")
    if sub not in COMMANDS or sub == "replay":
        raise ValidationError(f"cannot replay command {sub!r}")
    resolved["output"] = args.output
    ns = argparse.Namespace(**resolved)
    ns.func = COMMANDS[sub]
    return ns.func(ns)


COMMANDS = {
    "capacity": cmd_capacity,
    "exponent": cmd_exponent,
    "region": cmd_region,
    "blowup": cmd_blowup,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "replay": cmd_replay,
}


def build_parser():
    parser = _Parser(prog="noisytai", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--output", "-o", help="write results here (atomically) plus a config sidecar")
        p.set_defaults(func=COMMANDS[name])
        return p

    p = add("capacity", "channel capacity by Blahut-Arimoto")
    p.add_argument("document", help="document with a 'channel' matrix")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--bits", action="store_true", help="display in bits (files stay in nats)")

    def exponent_flags(p):
        p.add_argument("document", nargs="?", default=demo_path(),
                       help="document with a 'joint' matrix (default: bundled demo)")
        p.add_argument("--mu-grid", default=DEFAULT_MU_GRID,
                       help="lo:hi:points (log-spaced) or a comma list")
        p.add_argument("--restarts", type=int, default=64)
        p.add_argument("--seed", type=int, default=0)

    p = add("exponent", "optimal type-II exponent theta(P_UV, C)")
    exponent_flags(p)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--capacity", type=float, help="channel capacity in nats")
    grp.add_argument("--channel", help="document whose channel capacity is used")
    p.add_argument("--oracle", action="store_true", help="also run the exhaustive grid search")
    p.add_argument("--grid-step", type=float, default=0.02)
    p.add_argument("--bits", action="store_true")

    p = add("region", "trade-off curve of theta against capacity")
    exponent_flags(p)
    p.add_argument("--capacity-grid", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7",
                   help="comma list of capacities in nats")

    p = add("blowup", "exact Hamming blow-up probabilities against the lemma bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alphabet-size", type=int, default=2)
    p.add_argument("--pmf", help="comma list for the i.i.d. law (default uniform)")
    p.add_argument("--set", default="random:0.1,0", help="file of sequences, or random:p,seed")
    p.add_argument("--l", default="sweep", help="radius, or 'sweep' for 0..n")
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--b", type=float, default=None, help="b(n) for l_n (default ln n)")
    p.add_argument("--p-floor", type=float, default=None,
                   help="smallest positive transition for the penalty (default: min of --pmf)")

    p = add("simulate", "type-I/II errors of likelihood-threshold rules")
    p.add_argument("--config", default=demo_path(), help="instance document")
    p.add_argument("--n-list", help="comma list of blocklengths (default: the document's n)")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--target-alpha", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blowup-l", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads())

    p = add("verify", "pass/fail ledger of the finite-n checks on an instance")
    p.add_argument("--config", default=demo_path())

    p = add("replay", "re-run a resolved config sidecar")
    p.add_argument("resolved", help="<output>.config.json written by an earlier run")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SizeLimitError, ConvergenceError) as exc:
        print(f"noisytai: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ValueError, OSError) as exc:  # ValidationError is a ValueError
        print(f"noisytai: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
