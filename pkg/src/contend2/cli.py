# help defined here so --help/--version never pay for the numpy/scipy import
import sys
from importlib.metadata import version

try:
    __version__ = version("contend2")
except Exception:
    __version__ = "?.?.?"

# ansi
CYAN = "\033[96m"
BLUE = "\033[94m"
D_WHITE = "\033[37;2m"
B_WHITE = "\033[1;97m"
RESET = "\033[0m"
# help messages
HELP_EVALUATE = "Closed-form and Markov-chain costs of a policy"
HELP_PROTOCOL = "Print the optimal two-device protocol for an objective"
HELP_OPTIMIZE = "Rediscover optimal masses by coordinate descent"
HELP_SIMULATE = "Monte Carlo estimate, restart check or board deduction"
HELP_SOLVE = "Root of a cubic on a sign-change bracket"
HELP_TABLE = "Best member of each cycle length (avg: a2 per N, max: N = 0, 1)"
HELP_CONFIG = "Path to configuration file"
HELP_FORMAT = "Output format: json (default), csv, text"
HELP_OBJECTIVE = "avg, min, max (evaluate also takes all)"
HELP_POLICY = "Policy as JSON file, inline JSON or '-' for stdin"
HELP_PROBABILITY = "Constant transmit probability instead of --policy"
HELP_LENGTH = "Policy length L, or a range such as 2..6"
HELP_N_MAX = "Largest N in the avg table (default 5)"
HELP_CUBIC = "Coefficients c3,c2,c1,c0"
HELP_BRACKET = "Bracket lo,hi (write --bracket=-1,0 for a negative lo)"
HELP_TRIALS = "Monte Carlo trials"
HELP_SEED = "Master seed (default 20210611)"
HELP_HORIZON = "Slots per trial before a device counts as unfinished"
HELP_DEVICES = "Number of devices"
HELP_THREADS = "Worker threads (env CONTEND2_THREADS)"
HELP_TOLERANCE = "Optimizer or root tolerance"
HELP_RESTARTS = "Optimizer restarts"
HELP_MAX_ITER = "Optimizer sweeps per restart"
HELP_DOMINANCE = "Compare the policy with its restart-after-collision variant"
HELP_BOARD = "Deduce on a CSV board (or 'table1') instead of sampling"
HELP_TRACE = "Write the deduction as CSV to this path"
HELP_VERBOSE = "Progress diagnostics on stderr"
HELP_CONFIG_SHOW = "Print current configuration"
HELP_VERSION_SHOW = "Print current version"


def _opt(short: str, name: str, text: str, width: int = 16) -> str:
    head = f"{D_WHITE}-{RESET}{BLUE}{short}{RESET}{D_WHITE}, --{RESET}" if short else f"{D_WHITE}--{RESET}"
    pad = width - len(name) - (0 if short else -4)
    return f"  {head}{BLUE}{name}{RESET}{' ' * pad}{text}"


def print_help() -> None:
    commands = [
        ("evaluate", HELP_EVALUATE),
        ("protocol", HELP_PROTOCOL),
        ("optimize", HELP_OPTIMIZE),
        ("simulate", HELP_SIMULATE),
        ("solve", HELP_SOLVE),
        ("table", HELP_TABLE),
    ]
    options = [
        ("c", "config", HELP_CONFIG),
        ("f", "format", HELP_FORMAT),
        ("o", "objective", HELP_OBJECTIVE),
        ("p", "policy", HELP_POLICY),
        ("q", "probability", HELP_PROBABILITY),
        ("L", "length", HELP_LENGTH),
        ("", "n-max", HELP_N_MAX),
        ("", "cubic", HELP_CUBIC),
        ("", "bracket", HELP_BRACKET),
        ("t", "trials", HELP_TRIALS),
        ("s", "seed", HELP_SEED),
        ("", "horizon", HELP_HORIZON),
        ("n", "devices", HELP_DEVICES),
        ("j", "threads", HELP_THREADS),
        ("", "tolerance", HELP_TOLERANCE),
        ("", "restarts", HELP_RESTARTS),
        ("", "max-iterations", HELP_MAX_ITER),
        ("", "dominance", HELP_DOMINANCE),
        ("", "board", HELP_BOARD),
        ("", "trace", HELP_TRACE),
        ("v", "verbose", HELP_VERBOSE),
        ("", "config-show", HELP_CONFIG_SHOW),
        ("", "version", HELP_VERSION_SHOW),
    ]
    lines = [
        f"{D_WHITE}#{RESET} {B_WHITE}USAGE{RESET} {D_WHITE}(v{__version__}){RESET}",
        f"  {CYAN}contend2{RESET} {BLUE}command{RESET} {D_WHITE}[{RESET}{BLUE}options{RESET}{D_WHITE}...]{RESET}",
        "",
        f"{D_WHITE}#{RESET} {B_WHITE}COMMANDS{RESET}",
        *(f"  {BLUE}{name}{RESET}{' ' * (12 - len(name))}{text}" for name, text in commands),
        "",
        f"{D_WHITE}#{RESET} {B_WHITE}OPTIONS{RESET}",
        *(_opt(short, name, text) for short, name, text in options),
    ]
    print("\n".join(lines))


def main() -> int:
    if "-h" in sys.argv or "--help" in sys.argv:
        print_help()
        return 0
    elif "--version" in sys.argv:
        print(__version__)
        return 0
    else:
        from .cli_parse import cli_parse

        sys.exit(cli_parse())


if __name__ == "__main__":
    sys.exit(main())
