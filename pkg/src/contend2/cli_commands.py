import csv
import io
import json
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .analytic import constant_policy_costs, expected_cost, markov_oracle
from .config import AppConfig
from .console_helper import format_table, log_erro, log_info, log_warn
from .core import Objective, ProbSequence, masses_to_probs, probs_to_masses
from .errors import Contend2Error, HorizonExhausted, NotConverged, NumericalError
from .optimizer import OptimizeConfig, best_row, optimize_masses, sweep_lengths
from .policy import ConstantPolicy, HistoryPolicy, RecurrentPolicy
from .protocols import (
    CubicSpec,
    avg_table,
    max_table,
    optimal_avg_protocol,
    optimal_max_protocol,
    optimal_min_protocol,
    solve_cubic_in_bracket,
)
from .simulator import (
    TABLE1_BOARD,
    RandomBoard,
    deduce,
    monte_carlo,
    read_board_csv,
    restart_dominance_check,
    write_deduction_csv,
)


@dataclass(frozen=True)
class RunSpec:
    """
    One fully resolved invocation

    Attributes:
        command: Subcommand name
        params: Every parameter the handler uses, defaults filled in; echoed in the output
        format: json, csv or text
        digits: Significant digits for printed floats
        verbose: Progress diagnostics on stderr
        threads: Worker cap; not echoed since results do not depend on it
    """

    command: str
    params: dict[str, Any]
    format: str = "json"
    digits: int = 12
    verbose: bool = False
    threads: int | None = None


@dataclass
class Output:
    """
    Handler result

    Attributes:
        fields: Result fields merged into the JSON document
        headers: Column titles for csv/text, when the result is a table
        rows: Table rows for csv/text
        failure: Numerical failure reported after the (flagged) output is printed
    """

    fields: dict[str, Any]
    headers: list[str] = field(default_factory=list)
    rows: list[list[Any]] = field(default_factory=list)
    failure: NumericalError | None = None


def round_floats(value: Any, digits: int) -> Any:
    """Round every float to `digits` significant digits; non-finite floats become None"""
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, digits) for v in value]
    return value


def _flatten(fields: dict[str, Any], prefix: str = "") -> list[list[Any]]:
    """name/value rows for results without a natural table"""
    rows: list[list[Any]] = []
    for key, value in fields.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows.extend(_flatten(value, f"{name}."))
        elif isinstance(value, list):
            rows.extend([f"{name}[{i}]", v] for i, v in enumerate(value) if not isinstance(v, (dict, list)))
        else:
            rows.append([name, value])
    return rows


def render(spec: RunSpec, output: Output) -> str:
    """Format an Output for stdout; the header always echoes command and params"""
    payload = round_floats({"command": spec.command, "params": spec.params, **output.fields}, spec.digits)
    if spec.format == "json":
        return json.dumps(payload, indent=2)

    headers, rows = output.headers, output.rows
    if not rows:
        headers, rows = ["name", "value"], _flatten(output.fields)
    rows = round_floats(rows, spec.digits)
    cells = [["" if v is None else v for v in row] for row in rows]
    if spec.format == "csv":
        buffer = io.StringIO()
        buffer.write(f"# {json.dumps({'command': spec.command, 'params': payload['params']})}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(cells)
        return buffer.getvalue().rstrip("\n")
    params = " ".join(f"{k}={v}" for k, v in payload["params"].items())
    return f"# contend2 {spec.command} {params}".rstrip() + "\n" + format_table(headers, cells)


def _objectives(name: str) -> list[Objective]:
    return list(Objective) if name == "all" else [Objective.parse(name)]


def optimal_policy(obj: Objective) -> HistoryPolicy:
    """History policy of the optimal protocol for `obj`"""
    if obj is Objective.MIN:
        return ConstantPolicy(optimal_min_protocol().probability)
    found = optimal_avg_protocol() if obj is Objective.AVG else optimal_max_protocol()
    return RecurrentPolicy(found.probs)


def policy_from_params(params: dict[str, Any], obj: Objective) -> HistoryPolicy:
    """--policy / --probability, else the optimal protocol for the objective"""
    if "probability" in params:
        return ConstantPolicy(params["probability"])
    if "probs" in params:
        return RecurrentPolicy(ProbSequence.parse(params["probs"]))
    return optimal_policy(obj)


def reference_cost(policy: HistoryPolicy, obj: Objective) -> float | None:
    """Exact two-device value of a constant or recurrent policy"""
    if isinstance(policy, ConstantPolicy):
        return constant_policy_costs(policy.q)[obj]
    if isinstance(policy, RecurrentPolicy):
        return expected_cost(probs_to_masses(policy.probs), obj)
    return None


def evaluate(spec: RunSpec) -> Output:
    """Closed-form and oracle value per objective"""
    params = spec.params
    objectives = _objectives(params["objective"])
    if "probability" in params:
        q = params["probability"]
        closed = constant_policy_costs(q)
        costs = {str(obj): {"closed_form": closed[obj], "oracle": markov_oracle(q, obj)} for obj in objectives}
        fields: dict[str, Any] = {"policy": ConstantPolicy(q).name, "costs": costs}
    else:
        probs = ProbSequence.parse(params["probs"])
        masses = probs_to_masses(probs)
        costs = {
            str(obj): {"closed_form": expected_cost(masses, obj), "oracle": markov_oracle(probs, obj)}
            for obj in objectives
        }
        fields = {"probs": list(probs.probs), "masses": list(masses.masses), "costs": costs}
    rows = [[obj, c["closed_form"], c["oracle"]] for obj, c in costs.items()]
    return Output(fields, ["objective", "closed_form", "oracle"], rows)


def protocol(spec: RunSpec) -> Output:
    """Optimal protocol and its cost"""
    obj = Objective.parse(spec.params["objective"])
    if obj is Objective.MIN:
        constant = optimal_min_protocol()
        return Output({"probability": constant.probability, "cost": constant.cost})
    found = optimal_avg_protocol() if obj is Objective.AVG else optimal_max_protocol()
    fields: dict[str, Any] = {
        "probs": list(found.probs.probs),
        "cost": found.cost,
        "masses": list(probs_to_masses(found.probs).masses),
    }
    if obj is Objective.MAX:
        fields["gamma"] = 1.0 / found.cost
    return Output(fields)


def optimize(spec: RunSpec) -> Output:
    """Single length, or a sweep over several with the best row picked"""
    params = spec.params
    obj = Objective.parse(params["objective"])
    lengths = params["lengths"]
    settings = {k: params[k] for k in ("tolerance", "max_iterations", "restarts", "seed")}
    headers = ["L", "cost", "residual_max", "converged"]

    if len(lengths) == 1:
        failure = None
        try:
            result = optimize_masses(OptimizeConfig(obj, lengths[0], **settings), verbose=spec.verbose)
        except NotConverged as e:
            result, failure = e.result, e
        fields = result.to_dict()
        fields["probs"] = list(masses_to_probs(result.masses).probs)
        row = [fields["L"], fields["cost"], fields["residual_max"], fields["converged"]]
        return Output(fields, headers, [row], failure)

    rows = sweep_lengths(obj, lengths, verbose=spec.verbose, **settings)
    best = best_row(rows)
    if spec.verbose:
        log_info(f"best length L={best.L} with cost {best.cost:.12g}")
    fields = {"rows": [r.to_dict() for r in rows], "best_L": best.L, "best_cost": best.cost}
    failure = None
    unconverged = [r.L for r in rows if not r.converged]
    if unconverged:
        failure = NotConverged(f"lengths {unconverged} did not meet tolerance {settings['tolerance']:.3g}", result=best)
    return Output(fields, headers, [[r.L, r.cost, r.residual_max, r.converged] for r in rows], failure)


def simulate(spec: RunSpec) -> Output:
    """Board deduction, Monte Carlo estimate, or restart dominance check"""
    params = spec.params
    obj = Objective.parse(params["objective"])
    policy = policy_from_params(params, obj)

    if "board" in params:
        board = RandomBoard(TABLE1_BOARD) if params["board"] == "table1" else read_board_csv(params["board"])
        deduction = deduce(board, policy)
        if params.get("trace"):
            path = write_deduction_csv(deduction, Path(params["trace"]))
            log_info(f"deduction written to {path}")
        cells = [[deduction.cell(k, t) for t in range(board.horizon)] for k in range(board.n)]
        fields = {
            "policy": policy.name,
            "latencies": list(deduction.latencies),
            "cost": deduction.cost(obj) if deduction.finished else None,
            "cells": cells,
        }
        rows = [
            [k + 1, "unfinished" if x is None else x, *cells[k]] for k, x in enumerate(deduction.latencies)
        ]
        return Output(fields, ["device", "latency", *(f"t{t}" for t in range(board.horizon))], rows)

    run_args = {k: params[k] for k in ("trials", "seed", "horizon")}
    reference = reference_cost(policy, obj) if params["devices"] == 2 else None

    if params["dominance"]:
        try:
            report = restart_dominance_check(
                policy, n=params["devices"], obj=obj, threads=spec.threads, **run_args
            )
        except HorizonExhausted as e:
            return Output({"policy": policy.name, "partial": e.result.to_dict()}, failure=e)
        fields = {"policy": policy.name, **report.to_dict(), "dominates": report.dominates()}
        rows = [["base", *report.base.to_dict().values()], ["restarted", *report.restarted.to_dict().values()]]
        return Output(fields, ["policy", "mean", "ci_halfwidth", "trials", "unfinished_count"], rows)

    failure = None
    try:
        result = monte_carlo(
            policy,
            n=params["devices"],
            obj=obj,
            block_size=params["block_size"],
            threads=spec.threads,
            **run_args,
        )
    except HorizonExhausted as e:
        result, failure = e.result, e
    fields = {"policy": policy.name, **result.to_dict(), "reference": reference}
    if reference is not None and not result.covers(reference, widths=4.0):
        log_warn(f"estimate {result.mean:.6g} is more than 4 CI half-widths from the exact {reference:.6g}")
    return Output(fields, failure=failure)


def solve(spec: RunSpec) -> Output:
    """Bracketed cubic root"""
    params = spec.params
    cubic = CubicSpec(tuple(params["cubic"]), tuple(params["bracket"]))
    root = solve_cubic_in_bracket(cubic, tol=params["tolerance"])
    return Output({"root": root, "residual": float(cubic.polynomial(root))})


def table(spec: RunSpec) -> Output:
    """Per-N table of the avg family, or the two max family cycle lengths"""
    if spec.params["objective"] == "avg":
        avg_rows = avg_table(spec.params["n_max"])
        best = min(avg_rows, key=lambda r: r.cost)
        fields = {"rows": [r._asdict() for r in avg_rows], "best_N": best.N, "best_cost": best.cost}
        return Output(fields, ["N", "a2", "cost", "source"], [list(r) for r in avg_rows])

    max_rows = max_table()
    best = min(max_rows, key=lambda r: r.cost)
    dicts = [{"N": r.N, "gamma": r.gamma, "cost": r.cost, "probs": list(r.probs.probs)} for r in max_rows]
    fields = {"rows": dicts, "best_N": best.N, "best_cost": best.cost}
    return Output(fields, ["N", "gamma", "cost"], [[r.N, r.gamma, r.cost] for r in max_rows])


HANDLERS: dict[str, Callable[[RunSpec], Output]] = {
    "evaluate": evaluate,
    "protocol": protocol,
    "optimize": optimize,
    "simulate": simulate,
    "solve": solve,
    "table": table,
}


def run(spec: RunSpec) -> int:
    """
    Execute one command and print its output

    Returns:
        0 on success, 1 on validation errors, 2 on numerical failures
    """
    handler = HANDLERS.get(spec.command)
    if handler is None:
        log_erro(f"unknown command '{spec.command}'")
        return 1
    try:
        output = handler(spec)
    except Contend2Error as e:
        log_erro(str(e))
        return e.exit_code
    print(render(spec, output))
    if output.failure is not None:
        log_erro(str(output.failure))
        return output.failure.exit_code
    return 0


def show_config(config: AppConfig) -> None:
    """Print the resolved configuration as JSON"""
    print(json.dumps(config.to_dict(), indent=2))
