"""Command line: ``qgp <command> [options]``.

Commands ``capacity``, ``decouple``, ``code``, ``verify`` and ``typicality``
print a JSON report (or CSV with ``--format csv``) and, with ``--out DIR``,
write ``DIR/<command>.json`` and ``DIR/<command>.csv``.

Exit codes: 0 success, 1 contract violation, 2 usage, parse or cap error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coding import (
    build_code,
    converse_chain_check,
    entanglement_accounting,
    evaluate_code,
    gp_rate,
    optimize_capacity,
    pauli_precorrection_state,
    random_code,
)
from .decoupling import concentration_probe, fqsw_bound_check
from .entropic import check_mi_identity
from .exceptions import ContractViolation, QGPError, StateValidationError
from .serialization import csv_text, density_from_dict, dumps, encode_complex, decode_complex, load_channel
from .tensor_core import (
    DensityOperator,
    PureState,
    dimension_cap,
    maximally_entangled,
    random_density_operator,
    random_pure_state,
    tensor_product,
    uhlmann_partial_isometry,
    cross_overlap_operator,
)
from .typicality import DEFAULT_SCHEDULE, HaarSampler, epsilon_schedule, typicality_report
from .validation import check_seed, hermiticity_residual

EXIT_OK, EXIT_CONTRACT, EXIT_USAGE = 0, 1, 2
RESIDUAL_TOL = 1e-8
CONSISTENCY_TOL = 1e-10
REPLAY_FILE = "verify_replay.json"


class UsageError(QGPError, ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read config {path!r}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"config {path!r} line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path!r} must hold a JSON object")
    allowed = {"seed", "samples", "cap", "epsilon_schedule", "tolerances", "format"}
    unknown = set(cfg) - allowed
    if unknown:
        raise UsageError(f"config {path!r}: unknown key {sorted(unknown)[0]!r}")
    return cfg


def resolve_config(args) -> dict:
    """Merge flags, config file and ``QGP_SEED``; flags win."""
    cfg = _load_config(args.config)
    if args.seed is not None:
        seed = args.seed
    elif "seed" in cfg:
        seed = cfg["seed"]
    elif os.environ.get("QGP_SEED"):
        seed = os.environ["QGP_SEED"]
    else:
        seed = 0
    try:
        seed = check_seed(seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    schedule = args.epsilon_schedule or cfg.get("epsilon_schedule", DEFAULT_SCHEDULE)
    try:
        epsilon_schedule(schedule)
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = {
        "seed": seed,
        "samples": args.samples if args.samples is not None else cfg.get("samples"),
        "cap": args.cap if args.cap is not None else cfg.get("cap", 4096),
        "epsilon_schedule": schedule,
        "tolerances": dict(cfg.get("tolerances", {})),
        "format": args.format or cfg.get("format", "json"),
    }
    if out["format"] not in ("json", "csv"):
        raise UsageError(f"format must be json or csv, got {out['format']!r}")
    return out


def _tol(cfg: dict, key: str, default: float) -> float:
    return float(cfg["tolerances"].get(key, default))


def _config_hash(config: dict) -> str:
    return hashlib.sha256(dumps(config).encode()).hexdigest()


# ---------------------------------------------------------------------------
# commands: each returns (result dict, csv rows, contract ok)


def cmd_capacity(args, cfg):
    ch, source = load_channel(args.channel)
    res = optimize_capacity(ch, args.dim_a, args.env_dim, args.restarts, HaarSampler(cfg["seed"]),
                            max_iter=args.max_iter, n_jobs=args.n_jobs)
    d_b = ch.channel.out_layout.total_dim
    ceiling = math.log2(min(args.dim_a, d_b))
    check = gp_rate(res.best_sigma, ch)
    ok = res.rate <= ceiling + 1e-9 and abs(check - res.rate) < 1e-8
    result = {"channel": source, "capacity": res.to_dict(), "rate_ceiling": ceiling,
              "rate_recomputed": check}
    rows = [("iteration", "rate")] + [(i, r) for i, r in res.trace]
    return result, rows, ok


def _decouple_state(args, seed: int) -> PureState:
    layout = [("A", args.dim_a), ("R", args.dim_r)]
    if args.dim_rest > 1:
        layout.append(("B", args.dim_rest))
    if args.state == "maxent":
        if args.dim_a != args.dim_r * args.dim_rest:
            raise UsageError("maxent needs --dim-a equal to the product of the other dimensions")
        v = np.eye(args.dim_a).reshape(-1) / math.sqrt(args.dim_a)
        return PureState(v, layout)
    return random_pure_state(layout, HaarSampler(seed, stream=1).generator_at(0))


def cmd_decouple(args, cfg):
    n = cfg["samples"] or 500
    if args.dim_a_hat < 1 or args.dim_a % args.dim_a_hat:
        raise UsageError(f"|A^| = {args.dim_a_hat} does not divide |A| = {args.dim_a}")
    split = (args.dim_a // args.dim_a_hat, args.dim_a_hat)
    psi = _decouple_state(args, cfg["seed"])
    sampler = HaarSampler(cfg["seed"], stream=0)
    rep = fqsw_bound_check(psi, split, sampler, n)
    result = {"state": args.state, "decoupling": rep.to_dict()}
    if n >= 100:
        conc = concentration_probe(psi, split, HaarSampler(cfg["seed"], stream=0), n)
        result["concentration"] = {"std_dev": conc.std_dev, "outlier_fraction": conc.outlier_fraction}
    return result, list(rep.csv_rows()), rep.bound_satisfied


def _sigma_source(source: str, ch, args, cfg):
    use = ch.uses[0]
    if source == "witness":
        return pauli_precorrection_state(), {"sigma": "witness"}
    if source == "maxent":
        d = ch.channel.in_layout.dim(use.a)
        phi = maximally_entangled(("A", use.a), d).density()
        return tensor_product(phi, ch.side_marginal()), {"sigma": "maxent"}
    if source == "optimize":
        res = optimize_capacity(ch, args.dim_a, args.env_dim, args.restarts, HaarSampler(cfg["seed"], stream=7))
        return res.best_sigma, {"sigma": "optimize", "rate": res.rate}
    try:
        with open(source, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read sigma file {source!r}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"sigma file line {e.lineno} column {e.colno}: {e.msg}") from None
    return density_from_dict(obj), {"sigma": "file"}


def _parse_sizes(text: str | None):
    if text is None:
        return None
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--sizes expects three integers R,B~,A^ (got {text!r})") from None
    if len(dims) != 3:
        raise UsageError(f"--sizes expects three integers R,B~,A^ (got {text!r})")
    return dims


def cmd_code(args, cfg):
    ch, source = load_channel(args.channel)
    sigma, sigma_info = _sigma_source(args.sigma, ch, args, cfg)
    art = build_code(sigma, ch, args.n, _parse_sizes(args.sizes), HaarSampler(cfg["seed"]),
                     schedule=cfg["epsilon_schedule"])
    check = evaluate_code(art.W_enc, art.V_dec, ch, args.n)
    acct = entanglement_accounting(sigma, ch, args.n)
    gap = abs(check - art.epsilon_achieved)
    result = {
        "channel": source,
        **sigma_info,
        "gp_rate": gp_rate(sigma, ch),
        "summary": art.summary(),
        "epsilon_evaluated": check,
        "consistency_gap": gap,
        "accounting": acct.to_dict(),
        "artifacts": art.to_dict(),
    }
    rows = [("quantity", "value")]
    for k, v in art.summary().items():
        if isinstance(v, dict):
            rows += [(f"{k}.{kk}", vv) for kk, vv in v.items()]
        else:
            rows.append((k, v))
    rows += [("epsilon_evaluated", check), ("consistency_gap", gap)]
    rows += [(f"accounting.{k}", v) for k, v in acct.to_dict().items()]
    ok = gap <= _tol(cfg, "consistency", CONSISTENCY_TOL) and acct.identity_holds
    return result, rows, ok


# -- verify ---------------------------------------------------------------


def _mi_case(seed: int, k: int, fault: bool = False) -> dict:
    rng = HaarSampler(seed, stream=(2,)).generator_at(k)
    dims = [int(d) for d in rng.choice([2, 3], size=3)]
    layout = [("X", dims[0]), ("Y", dims[1]), ("Z", dims[2])]
    rho = random_density_operator(layout, rng)
    m = rho.matrix
    if fault:
        pert = rng.standard_normal(m.shape) + 1j * rng.standard_normal(m.shape)
        m = m + 1e-3 * pert
        rho = DensityOperator(m, layout, check=False)
    herm = hermiticity_residual(m)
    error = None
    try:
        resid = check_mi_identity(rho, "X", "Y", "Z")
    except StateValidationError as e:
        resid, error = herm, str(e)
    worst = max(herm, resid)
    return {"suite": "mi_identity" if not fault else "injected_fault", "case": k, "seed": seed,
            "dims": dims, "residual": max(resid, 0.0), "hermiticity": herm, "error": error,
            "passed": bool(worst < RESIDUAL_TOL and error is None),
            "payload": {"layout": [list(x) for x in layout], "matrix": encode_complex(m)}}


def _replay_case(rec: dict) -> dict:
    fault = rec["suite"] == "injected_fault"
    out = _mi_case(int(rec["seed"]), int(rec["case"]), fault)
    saved = decode_complex(rec["payload"]["matrix"])
    if not np.array_equal(saved, decode_complex(out["payload"]["matrix"])):
        raise ContractViolation(f"replay of case {rec['case']} regenerated a different state")
    return out


def _converse_cases(seed: int) -> list[dict]:
    from .channels import identity_channel, pauli_reveal_channel

    cases = []
    ich = identity_channel()
    sig = tensor_product(maximally_entangled(("A", "A'"), 2).density(), ich.side_marginal())
    art = build_code(sig, ich, 2, (4, 1, 1), HaarSampler(seed, stream=3))
    controls = [("perfect_identity_n2", art.W_enc, art.V_dec, ich, 2, 1.0, True)]
    rng = HaarSampler(seed, stream=4).generator_at(0)
    w, v = random_code(ich, 2, 4, rng)
    controls.append(("random_identity_n2", w, v, ich, 2, 1.0, False))
    pch = pauli_reveal_channel()
    w, v = random_code(pch, 2, 2, HaarSampler(seed, stream=4).generator_at(1))
    controls.append(("random_pauli_n2", w, v, pch, 2, 0.5, False))
    for name, w, v, ch, n, q, expect_fannes in controls:
        led = converse_chain_check(w, v, ch, n, q, 0.0)
        ok = led.identities_pass and led.slacks_nonnegative and led.telescoped_holds
        if expect_fannes:
            ok = ok and led.fannes_satisfied and abs(led.fannes_lhs - led.fannes_threshold) < RESIDUAL_TOL
        cases.append({"suite": "converse", "case": name, "seed": seed, "residual": led.max_identity_residual,
                      "min_slack": min((s.slack for s in led.steps), default=0.0),
                      "fannes_lhs": led.fannes_lhs, "fannes_threshold": led.fannes_threshold,
                      "fannes_satisfied": led.fannes_satisfied, "passed": bool(ok)})
    return cases


def _uhlmann_cases(seed: int, count: int = 10) -> list[dict]:
    cases = []
    for k in range(count):
        rng = HaarSampler(seed, stream=5).generator_at(k)
        rho = random_density_operator([("X", 2)], rng, rank=2)
        sig = random_density_operator([("X", 2)], rng, rank=2)
        from .tensor_core import purify

        psi, phi = purify(rho, "P"), purify(sig, "P")
        _, overlap = uhlmann_partial_isometry(psi, phi, ("X",))
        nuc = float(np.sum(np.linalg.svd(cross_overlap_operator(psi, phi, ("X",)), compute_uv=False)))
        cases.append({"suite": "uhlmann", "case": k, "seed": seed, "residual": abs(overlap - nuc),
                      "passed": bool(abs(overlap - nuc) < CONSISTENCY_TOL)})
    return cases


def cmd_verify(args, cfg):
    seed = cfg["seed"]
    if args.replay:
        try:
            with open(args.replay, encoding="utf-8") as fh:
                replay = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot load replay file {args.replay!r}: {e}") from None
        cases = [_replay_case(rec) for rec in replay.get("failures", [])]
    else:
        n = cfg["samples"] or 200
        cases = [_mi_case(seed, k) for k in range(n)]
        cases += _converse_cases(seed)
        cases += _uhlmann_cases(seed)
        typ = typicality_report([0.7, 0.3], 8, 0.15)
        cases.append({"suite": "typicality", "case": "0.7,0.3;n=8;eps=0.15", "seed": seed,
                      "residual": 0.0 if typ["counts_match"] else 1.0,
                      "passed": bool(typ["counts_match"] and typ["bound_holds"] and typ["gentle_holds"])})
        if args.inject_fault:
            cases.append(_mi_case(seed, 0, fault=True))
    failures = [c for c in cases if not c["passed"]]
    summary = {}
    for c in cases:
        s = summary.setdefault(c["suite"], {"cases": 0, "failures": 0, "max_residual": 0.0})
        s["cases"] += 1
        s["failures"] += 0 if c["passed"] else 1
        s["max_residual"] = max(s["max_residual"], float(c["residual"]))
    result = {"summary": summary, "n_cases": len(cases), "n_failures": len(failures),
              "failures": [{k: v for k, v in f.items()} for f in failures]}
    rows = [("suite", "case", "residual", "passed")] + [
        (c["suite"], c["case"], float(c["residual"]), c["passed"]) for c in cases]
    if failures and not args.replay:
        target = Path(args.out) if args.out else Path(".")
        target.mkdir(parents=True, exist_ok=True)
        (target / REPLAY_FILE).write_text(dumps({"seed": seed, "failures": failures}), encoding="utf-8")
        result["replay_file"] = REPLAY_FILE
    return result, rows, not failures


def cmd_typicality(args, cfg):
    try:
        spectrum = [float(x) for x in args.spectrum.split(",")]
    except ValueError:
        raise UsageError(f"--spectrum expects comma-separated probabilities (got {args.spectrum!r})") from None
    eps = args.epsilon if args.epsilon is not None else epsilon_schedule(cfg["epsilon_schedule"])(args.n)
    rep = typicality_report(spectrum, args.n, eps)
    rows = [("quantity", "value")] + [(k, v) for k, v in rep.items() if k != "spectrum"]
    return rep, rows, rep["counts_match"] and rep["bound_holds"] and rep["gentle_holds"]


COMMANDS = {
    "capacity": cmd_capacity,
    "decouple": cmd_decouple,
    "code": cmd_code,
    "verify": cmd_verify,
    "typicality": cmd_typicality,
}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="master seed (falls back to the config, then QGP_SEED, then 0)")
    g.add_argument("--samples", type=int, help="Monte Carlo sample count")
    g.add_argument("--out", help="directory for <command>.json and <command>.csv")
    g.add_argument("--format", choices=("json", "csv"), help="what to print on stdout (default json)")
    g.add_argument("--cap", type=int, help="largest allowed Hilbert-space dimension (default 4096)")
    g.add_argument("--epsilon-schedule", help="typicality schedule: quarter, half or fixed=<x>")
    g.add_argument("--config", help="JSON file with seed, samples, cap, epsilon_schedule, tolerances, format")

    p = _Parser(prog="qgp", description="Entanglement-assisted coding with side information at the transmitter.")
    p.add_argument("--version", action="version", version=f"qgp {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("capacity", parents=[common], help="search for a high-rate constrained input")
    c.add_argument("--channel", required=True, help="builtin:<name>?k=v or a spec file path")
    c.add_argument("--dim-a", type=int, default=2)
    c.add_argument("--env-dim", type=int, default=2)
    c.add_argument("--restarts", type=int, default=10)
    c.add_argument("--max-iter", type=int, default=2000)
    c.add_argument("--n-jobs", type=int, default=1)

    d = sub.add_parser("decouple", parents=[common], help="Monte Carlo check of the decoupling bound")
    d.add_argument("--dim-a", type=int, default=4)
    d.add_argument("--dim-a-hat", type=int, default=2)
    d.add_argument("--dim-r", type=int, default=2)
    d.add_argument("--dim-rest", type=int, default=1, help="dimension of the untouched purifying system")
    d.add_argument("--state", choices=("random", "maxent"), default="random")

    k = sub.add_parser("code", parents=[common], help="build and evaluate a finite-block code")
    k.add_argument("--channel", required=True)
    k.add_argument("--sigma", default="maxent", help="witness, maxent, optimize or a state JSON file")
    k.add_argument("--n", type=int, default=1)
    k.add_argument("--sizes", help="dimensions R,B~,A^ (product must equal the typical dimension)")
    k.add_argument("--dim-a", type=int, default=2)
    k.add_argument("--env-dim", type=int, default=2)
    k.add_argument("--restarts", type=int, default=5)

    v = sub.add_parser("verify", parents=[common], help="run the randomized identity suites")
    v.add_argument("--inject-fault", action="store_true", help="add a deliberately broken case")
    v.add_argument("--replay", help="re-run the failures recorded in a replay file")

    t = sub.add_parser("typicality", parents=[common], help="typical subspace counts and gentle measurement")
    t.add_argument("--spectrum", default="0.7,0.3")
    t.add_argument("--n", type=int, default=8)
    t.add_argument("--epsilon", type=float, help="overrides the schedule")
    return p


def _command_args(args) -> dict:
    skip = {"seed", "samples", "out", "format", "cap", "epsilon_schedule", "config", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        config = {"command": args.command, "args": _command_args(args),
                  **{k: cfg[k] for k in ("seed", "samples", "cap", "epsilon_schedule", "tolerances")}}
        with dimension_cap(int(cfg["cap"])):
            result, rows, ok = COMMANDS[args.command](args, cfg)
    except ContractViolation as e:
        print(f"qgp: contract violation: {e}", file=stderr)
        return EXIT_CONTRACT
    except (QGPError, ValueError) as e:
        print(f"qgp: error: {e}", file=stderr)
        return EXIT_USAGE
    report = {"command": args.command, "tool_version": __version__, "seed": cfg["seed"],
              "config_hash": _config_hash(config), "config": config, "contract_ok": bool(ok),
              "result": result}
    json_text = dumps(report)
    csv_out = csv_text(rows)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.json").write_text(json_text, encoding="utf-8")
        (out / f"{args.command}.csv").write_text(csv_out, encoding="utf-8")
    stdout.write(json_text if cfg["format"] == "json" else csv_out)
    if not ok:
        print(f"qgp: contract violation in {args.command}", file=stderr)
        return EXIT_CONTRACT
    return EXIT_OK


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
