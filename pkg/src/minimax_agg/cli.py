"""Command-line front end: list losses, learn weights, predict, certify.

Exit codes: 0 success, 2 usage/parse error, 3 infeasible constraint set,
4 property-check failure, 5 internal numeric error. Verbosity is
controlled by the MINIMAX_AGG_LOG environment variable (DEBUG, INFO,
WARNING, ...).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import data, game, losses, optimize, oracle

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_PROPERTY = 4
EXIT_NUMERIC = 5

log = logging.getLogger("minimax_agg")


class _UsageError(Exception):
    """Bad arguments or unparseable inputs (exit code 2)."""


def _configure_logging():
    level = os.environ.get("MINIMAX_AGG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _get_loss(args):
    name = args.loss
    if name is None:
        raise _UsageError("--loss is required for this command")
    if name.startswith("cw") and args.c is not None:
        name = f"cw:{args.c}"
    try:
        return losses.get_loss(name)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _load_vector(path):
    """Read a vector of floats from a file (comma/newline separated)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read().replace(",", " ")
    try:
        return np.array([float(t) for t in text.split()])
    except ValueError as exc:
        raise _UsageError(f"{path}: {exc}") from None


def _out_stream(args):
    return open(args.out, "w", encoding="utf-8") if args.out else sys.stdout


def _emit_rows(args, header, rows):
    stream = _out_stream(args)
    try:
        if args.format == "json-lines":
            for row in rows:
                stream.write(json.dumps(dict(zip(header, row))) + "\n")
        else:
            writer = csv.writer(stream)
            writer.writerow(header)
            writer.writerows(rows)
    finally:
        if stream is not sys.stdout:
            stream.close()


def _build_problem(args):
    """Assemble an EnsembleProblem from learn/check/oracle arguments."""
    if args.predictions is None:
        raise _UsageError("--predictions is required for this command")
    spec = _get_loss(args)
    variant = {"general": "general_loss"}.get(args.variant, args.variant)

    raw = data.load_predictions(args.predictions, kind="raw")

    holdout = None
    if args.holdout is not None:
        holdout = data.load_holdout(args.holdout)

    r = _load_vector(args.weights) if args.weights else None

    p = raw.shape[0]

    def parse_b(text):
        vals = np.array([float(t) for t in text.split(",")])
        # a single value applies to every classifier
        return np.full(p, vals[0]) if vals.size == 1 else vals

    if variant == "general_loss":
        if args.b is not None:
            eps_ell = parse_b(args.b)
        elif holdout is not None:
            eps_ell = data.estimate_general_loss_bounds(
                holdout[0], holdout[1], spec, args.stat_slack)
        else:
            raise _UsageError("general variant needs --b (loss bounds) or --holdout")
        log.info("loss bounds: %s", eps_ell)
        matrix, b = game.transform_general_loss(raw, eps_ell, spec)
        problem = game.make_problem(matrix, b, spec, variant=variant)
        return problem, eps_ell

    if args.b is not None:
        b = parse_b(args.b)
    elif holdout is not None:
        b = data.estimate_b(holdout[0], holdout[1], args.stat_slack)
    else:
        raise _UsageError("provide --b or --holdout to set constraint levels")
    log.info("constraint levels b: %s", b)
    problem = game.make_problem(raw, b, spec, variant=variant, r=r,
                                epsilon=args.epsilon)
    return problem, None


def _solve_options(args):
    return optimize.SolveOptions(seed=args.seed)


def cmd_losses(args):
    if args.table is not None:
        spec = _get_loss(args)
        m_lo, m_hi, steps = args.table
        m = np.linspace(m_lo, m_hi, int(steps))
        psi = np.asarray(losses.potential_well(spec, m), dtype=float)
        g = np.asarray(losses.predict_one(spec, m), dtype=float)
        _emit_rows(args, ["m", "psi", "g"],
                   [(repr(float(a)), repr(float(b)), repr(float(c)))
                    for a, b, c in zip(m, psi, g)])
        return EXIT_OK
    rows = []
    for spec in losses.registry_losses():
        rows.append((spec.name,
                     repr(float(spec.gamma_lo)), repr(float(spec.gamma_hi)),
                     "yes" if spec.closed_psi is not None else "no"))
    _emit_rows(args, ["loss", "score_at_minus_one", "score_at_plus_one",
                      "closed_forms"], rows)
    return EXIT_OK


def cmd_learn(args):
    problem, eps_ell = _build_problem(args)
    report = optimize.minimize_slack(problem, options=_solve_options(args))
    print(f"game_value {report.game_value!r}")
    print(f"iterations {report.iters_used}")
    print(f"converged {report.converged}")
    print(f"infeasible_suspected {report.infeasible_suspected}")
    if args.model:
        diagnostics = {
            "game_value": report.game_value,
            "iterations": report.iters_used,
            "converged": report.converged,
            "infeasible_suspected": report.infeasible_suspected,
        }
        if eps_ell is not None:
            diagnostics["loss_bounds"] = [float(v) for v in eps_ell]
        data.save_model(args.model, data.ModelFile(
            loss_name=problem.loss.name,
            variant=problem.variant,
            sigma=report.sigma_star,
            b=problem.constraints.b,
            epsilon=problem.constraints.epsilon,
            diagnostics=diagnostics,
        ))
        log.info("model written to %s", args.model)
    return EXIT_INFEASIBLE if report.infeasible_suspected else EXIT_OK


def cmd_predict(args):
    if args.model is None or args.predictions is None:
        raise _UsageError("predict needs --model and --predictions")
    model = data.load_model(args.model)
    spec = losses.get_loss(model.loss_name)
    raw = data.load_predictions(args.predictions, kind="raw")
    if raw.shape[0] != model.sigma.size:
        raise _UsageError(
            f"model expects {model.sigma.size} classifiers, "
            f"predictions file has {raw.shape[0]}")
    matrix = raw
    if model.variant == "general_loss":
        matrix = np.asarray(losses.score(spec, raw), dtype=float)
    margins = matrix.T @ model.sigma
    g = np.asarray(losses.predict_one(spec, margins), dtype=float)
    _emit_rows(args, ["index", "margin", "g"],
               [(j, repr(float(m)), repr(float(v))) for j, (m, v) in
                enumerate(zip(margins, g))])
    return EXIT_OK


def cmd_check(args):
    problem, eps_ell = _build_problem(args)
    report = optimize.minimize_slack(problem, options=_solve_options(args))
    if report.infeasible_suspected:
        print("infeasible_suspected True")
        return EXIT_INFEASIBLE
    all_pass = True

    if problem.variant == "plain":
        z0 = oracle.feasible_z_sample(problem, 1, seed=args.seed)[0]
        sandwich = oracle.sandwich_check(problem, report, z0,
                                         threads=args.threads)
        print(f"sandwich lower={sandwich.lower!r} value={sandwich.value!r} "
              f"upper={sandwich.upper!r} "
              f"{'PASS' if sandwich.passed else 'FAIL'}")
        all_pass &= sandwich.passed

        # any weights sigma0 certify a worst-case loss of half their slack
        rng = np.random.default_rng(args.seed)
        for t in range(5):
            sigma0 = rng.uniform(0.0, 2.0, size=problem.p)
            g0 = game.predict(problem, sigma0).g
            lp, lm = oracle._loss_tables(problem.loss, g0)
            a = np.nan_to_num(lp - lm, posinf=oracle._BIG, neginf=-oracle._BIG)
            worst = 0.5 * float(np.mean(lp + lm)) + 0.5 * game.dual_box_lp(
                problem.matrix, problem.constraints.b, a, warm_starts=[sigma0])
            bound = 0.5 * game.slack(problem, sigma0)
            ok = worst <= bound + 1e-6
            print(f"worst_case_bound sigma0[{t}] worst={worst!r} "
                  f"half_slack={bound!r} {'PASS' if ok else 'FAIL'}")
            all_pass &= ok

    if problem.variant == "general_loss" and eps_ell is not None:
        ok = report.game_value <= float(np.min(eps_ell)) + 1e-6
        print(f"value_below_best_classifier value={report.game_value!r} "
              f"min_bound={float(np.min(eps_ell))!r} "
              f"{'PASS' if ok else 'FAIL'}")
        all_pass &= ok

    return EXIT_OK if all_pass else EXIT_PROPERTY


def cmd_oracle(args):
    problem, _ = _build_problem(args)
    report = optimize.minimize_slack(problem, options=_solve_options(args))
    grid = oracle.grid_minimax(problem)
    diff = abs(report.game_value - grid.value)
    ok = diff <= grid.tolerance + 1e-6
    print(f"solver_value {report.game_value!r}")
    print(f"grid_value {grid.value!r}")
    print(f"difference {diff!r} tolerance {grid.tolerance!r} "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_PROPERTY


def build_parser():
    parser = argparse.ArgumentParser(
        prog="minimax-agg",
        description="Minimax-optimal aggregation of binary classifier "
                    "ensembles on unlabeled test data.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--loss", help="registry loss name (cw:<c> for "
                                      "cost-weighted)")
        p.add_argument("--c", type=float, help="cost parameter for the cw loss")
        p.add_argument("--variant", default="plain",
                       choices=["plain", "weighted", "uncertainty", "general"])
        p.add_argument("--epsilon", type=float, default=0.0,
                       help="constraint uncertainty radius")
        p.add_argument("--weights", help="per-example weight vector file "
                                         "(weighted variant)")
        p.add_argument("--b", help="comma-separated constraint levels "
                                   "(loss bounds for the general variant)")
        p.add_argument("--holdout", help="labeled holdout CSV for estimating "
                                         "constraint levels")
        p.add_argument("--stat-slack", type=float, default=0.0)
        p.add_argument("--predictions", help="ensemble prediction CSV")
        p.add_argument("--model", help="model file path")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", default="csv",
                       choices=["csv", "json-lines"])
        return p

    p = common(sub.add_parser("losses", help="list registry losses"))
    p.add_argument("--table", nargs=3, type=float,
                   metavar=("M_LO", "M_HI", "STEPS"),
                   help="emit (m, psi, g) rows for --loss over a margin grid")
    p.set_defaults(func=cmd_losses)

    common(sub.add_parser("learn", help="solve for the weights")) \
        .set_defaults(func=cmd_learn)
    common(sub.add_parser("predict", help="apply a saved model")) \
        .set_defaults(func=cmd_predict)
    common(sub.add_parser("check", help="certify a solve with independent "
                                        "bounds")).set_defaults(func=cmd_check)
    common(sub.add_parser("oracle", help="compare against the grid oracle")) \
        .set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except game.InfeasibleProblemError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FloatingPointError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
