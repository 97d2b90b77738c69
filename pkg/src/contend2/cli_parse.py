import argparse
import json
import sys
from pathlib import Path
from typing import Any, NoReturn

from .cli_commands import RunSpec, run, show_config
from .config import VALID_FORMATS, AppConfig, ConfigManager
from .console_helper import log_erro
from .core import Objective
from .errors import ValidationError

COMMANDS = ["evaluate", "protocol", "optimize", "simulate", "solve", "table"]
OBJECTIVES = [str(obj) for obj in Objective]


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors share exit code 1"""

    def error(self, message: str) -> NoReturn:
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contend2", description="two-device contention resolution", add_help=False)
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    parser.add_argument("-c", "--config")
    parser.add_argument("-f", "--format", choices=VALID_FORMATS)
    parser.add_argument("-o", "--objective", choices=[*OBJECTIVES, "all"])
    parser.add_argument("-p", "--policy")
    parser.add_argument("-q", "--probability", type=float)
    parser.add_argument("-L", "--length")
    parser.add_argument("--n-max", type=int, default=5)
    parser.add_argument("--cubic")
    parser.add_argument("--bracket")
    parser.add_argument("-t", "--trials", type=int)
    parser.add_argument("-s", "--seed", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("-n", "--devices", type=int)
    parser.add_argument("-j", "--threads", type=int)
    parser.add_argument("--tolerance", type=float)
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--max-iterations", type=int)
    parser.add_argument("--dominance", action="store_true")
    parser.add_argument("--board")
    parser.add_argument("--trace")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--config-show", action="store_true")
    return parser


def parse_floats(value: str, flag: str, count: int) -> list[float]:
    """Comma separated floats, e.g. '3,-12,10,-2'"""
    try:
        numbers = [float(v) for v in value.split(",")]
    except ValueError as e:
        raise ValidationError(f"{flag} expects {count} comma separated numbers, got '{value}'") from e
    if len(numbers) != count:
        raise ValidationError(f"{flag} expects {count} comma separated numbers, got {len(numbers)} in '{value}'")
    return numbers


def parse_lengths(value: str) -> list[int]:
    """'3' -> [3], '2..6' -> [2, 3, 4, 5, 6], '2,3,5' -> [2, 3, 5]"""
    try:
        if ".." in value:
            lo, hi = (int(v) for v in value.split("..", 1))
            lengths = list(range(lo, hi + 1))
        else:
            lengths = [int(v) for v in value.split(",")]
    except ValueError as e:
        raise ValidationError(f"--length expects L, lo..hi or a comma list, got '{value}'") from e
    if not lengths or min(lengths) < 1:
        raise ValidationError(f"--length needs positive lengths, got '{value}'")
    return lengths


def load_policy(value: str) -> dict[str, Any]:
    """
    Read --policy from stdin ('-'), a file, or inline JSON

    Accepts a JSON array of probabilities, an object with "probs" (the output
    of `protocol`), or an object with "probability" for a constant policy.

    Returns:
        {"probs": [...]} or {"probability": q}
    """
    source = "stdin" if value == "-" else value
    try:
        if value == "-":
            text = sys.stdin.read()
        elif Path(value).is_file():
            text = Path(value).read_text(encoding="utf-8")
        else:
            source = "--policy"
            text = value
        data = json.loads(text)
    except OSError as e:
        raise ValidationError(f"cannot read policy file '{value}': {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"policy from {source} is not valid JSON: {e}") from e

    if isinstance(data, dict):
        if "probs" in data:
            data = data["probs"]
        elif "probability" in data:
            try:
                return {"probability": float(data["probability"])}
            except (TypeError, ValueError) as e:
                raise ValidationError(f"policy from {source}: 'probability' must be a number") from e
        else:
            raise ValidationError(f"policy from {source} needs a 'probs' array or a 'probability'")
    if not isinstance(data, list) or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in data):
        raise ValidationError(f"policy from {source} must be a JSON array of numbers")
    return {"probs": [float(p) for p in data]}


def resolve_spec(args: argparse.Namespace, config: AppConfig) -> RunSpec:
    """Merge flags over configuration defaults into a RunSpec"""
    command = args.command
    if command is None:
        raise ValidationError(f"missing command, expected one of: {', '.join(COMMANDS)}")

    if args.threads is not None and args.threads < 1:
        raise ValidationError(f"--threads must be at least 1, got {args.threads}")

    sim, opt = config.simulate, config.optimize
    params: dict[str, Any] = {}

    def policy_params() -> dict[str, Any]:
        if args.policy is not None and args.probability is not None:
            raise ValidationError("--policy and --probability are mutually exclusive")
        if args.probability is not None:
            return {"probability": args.probability}
        if args.policy is not None:
            return load_policy(args.policy)
        return {}

    if command == "evaluate":
        params.update(policy_params())
        if not params:
            raise ValidationError("evaluate needs --policy or --probability")
        params["objective"] = args.objective or "all"
    elif command == "protocol":
        if args.objective == "all":
            raise ValidationError("protocol takes a single --objective (avg, min or max)")
        params["objective"] = args.objective or "avg"
    elif command == "optimize":
        if args.objective in (None, "all"):
            raise ValidationError("optimize needs --objective avg, min or max")
        if args.length is None:
            raise ValidationError("optimize needs --length L or a range such as 2..6")
        params.update(
            objective=args.objective,
            lengths=parse_lengths(args.length),
            tolerance=args.tolerance if args.tolerance is not None else opt.tolerance,
            max_iterations=args.max_iterations if args.max_iterations is not None else opt.max_iterations,
            restarts=args.restarts if args.restarts is not None else opt.restarts,
            seed=args.seed if args.seed is not None else opt.seed,
        )
    elif command == "simulate":
        if args.objective == "all":
            raise ValidationError("simulate takes a single --objective (avg, min or max)")
        params.update(policy_params())
        params["objective"] = args.objective or "avg"
        if args.board is not None:
            params.update(board=args.board, trace=args.trace)
        else:
            params.update(
                devices=args.devices if args.devices is not None else sim.devices,
                trials=args.trials if args.trials is not None else sim.trials,
                seed=args.seed if args.seed is not None else sim.seed,
                horizon=args.horizon if args.horizon is not None else sim.horizon,
                block_size=sim.block_size,
                dominance=args.dominance,
            )
    elif command == "solve":
        if args.cubic is None or args.bracket is None:
            raise ValidationError("solve needs --cubic c3,c2,c1,c0 and --bracket lo,hi")
        params.update(
            cubic=parse_floats(args.cubic, "--cubic", 4),
            bracket=parse_floats(args.bracket, "--bracket", 2),
            tolerance=args.tolerance if args.tolerance is not None else 1e-12,
        )
    elif command == "table":
        objective = args.objective or "avg"
        if objective not in ("avg", "max"):
            raise ValidationError(f"table supports --objective avg or max, got '{objective}'")
        params["objective"] = objective
        if objective == "avg":
            params["n_max"] = args.n_max

    return RunSpec(
        command=command,
        params=params,
        format=args.format or config.output.format,
        digits=config.output.digits,
        verbose=args.verbose,
        threads=args.threads if args.threads is not None else config.threads,
    )


def cli_parse(argv: list[str] | None = None) -> int:
    """Main CLI parse entry point"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ValidationError as e:
        log_erro(f"{e} (see --help)")
        return e.exit_code

    config_manager = ConfigManager(Path(args.config) if args.config else None)
    if args.config and not config_manager.config_path.exists():
        log_erro(f"--config file not found: {args.config}")
        return 1
    config = config_manager.load_config()

    errors = config_manager.validate_config(config)
    if errors:
        log_erro(f"Configuration validation errors in {config.config_path or 'defaults'}:")
        for error in errors:
            log_erro(f"  - {error}")
        return 1

    if args.config_show:
        show_config(config)
        return 0

    try:
        spec = resolve_spec(args, config)
    except ValidationError as e:
        log_erro(str(e))
        return e.exit_code
    return run(spec)
