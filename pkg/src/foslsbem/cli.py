"""Command-line driver: convergence studies and the coercivity table as data files."""

import argparse
import logging
import sys
from dataclasses import dataclass

from threadpoolctl import threadpool_limits

from .analysis import CASES, ERROR_COLUMNS, ErrorTable, error_norms, fit_rate, make_case
from .coupling import SolverError, build_system, min_generalized_eigenvalue, solve
from .fosls import fosls_residual_norm_sq
from .mesh import build_unit_square_mesh

log = logging.getLogger("foslsbem")

EXPERIMENTS = CASES + ("eig",)
MIN_LEVEL, MAX_LEVEL = 1, 6
TABLE_ALPHAS = (1e4, 1e3, 1e2, 10.0, 1.0, 0.1, 0.01, 1e-3, 1e-4)


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    levels: tuple
    alpha: tuple = None
    quad_space: int = 3
    quad_time: int = 3
    out: str = "-"
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", TABLE_ALPHAS if self.experiment == "eig" else (1.0,))
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if not self.levels or min(self.levels) < MIN_LEVEL or max(self.levels) > MAX_LEVEL:
            raise ValueError(f"levels must lie in [{MIN_LEVEL}, {MAX_LEVEL}]")
        if any(not a > 0 for a in self.alpha):
            raise ValueError("alpha must be positive")
        if self.experiment != "eig" and len(self.alpha) != 1:
            raise ValueError("convergence experiments take a single alpha")
        if self.quad_space < 2 or self.quad_time < 2:
            raise ValueError("quadrature orders must be at least 2")
        if self.threads < 1:
            raise ValueError("threads must be positive")


def parse_levels(text):
    try:
        if ":" in text:
            a, b = text.split(":")
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must look like a:b, got {text!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty level range {text!r}")
    return tuple(range(lo, hi + 1))


def parse_alpha(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be a comma-separated list, got {text!r}") from None


def _format_row(n_h, values):
    return " ".join([str(int(n_h))] + [f"{v:.6e}" for v in values])


def convergence_rows(config):
    """Yield (N_h, squared errors) per level; failures are logged and skipped."""
    case = make_case(config.experiment)
    for level in config.levels:
        mesh = build_unit_square_mesh(level)
        try:
            system = build_system(mesh, case.data, config.alpha[0], config.quad_space,
                                  quad_time=config.quad_time)
            field = solve(system)
        except SolverError as exc:
            log.error("level %d failed: %s", level, exc)
            yield level, None
            continue
        if case.has_exact:
            err = error_norms(field, case, config.quad_space + 2, config.quad_time + 2)
        else:
            err = [fosls_residual_norm_sq(field, case.data, config.quad_space + 2)]
        log.info("level %d: N_h = %d done", level, mesh.n_nodes)
        yield level, (mesh.n_nodes, err)


def eig_rows(config):
    for level in config.levels:
        mesh = build_unit_square_mesh(level)
        system = build_system(mesh, quad_order=config.quad_space, quad_time=config.quad_time)
        for a in config.alpha:
            try:
                lam = min_generalized_eigenvalue(a, system=system)
            except SolverError as exc:
                log.error("level %d, alpha %g failed: %s", level, a, exc)
                yield level, None
                continue
            yield level, (mesh.n_nodes, a, lam)


def run(config, stream):
    """Write the data table for ``config`` to ``stream``; return the exit status."""
    status = 0
    with threadpool_limits(config.threads):
        if config.experiment == "eig":
            stream.write("Nh alpha lambda_min\n")
            for _, row in eig_rows(config):
                if row is None:
                    status = 1
                    continue
                stream.write(f"{row[0]} {row[1]:.6e} {row[2]:.6e}\n")
                stream.flush()
            return status

        case = make_case(config.experiment)
        columns = ERROR_COLUMNS if case.has_exact else ("e_eq",)
        table = ErrorTable(columns)
        stream.write(" ".join(("dofsh",) + columns) + "\n")
        for _, row in convergence_rows(config):
            if row is None:
                status = 1
                continue
            table.add(*row)
            stream.write(_format_row(*row) + "\n")
            stream.flush()
    if len(table.rows) >= 2:
        for col in columns:
            print(f"rate {col}: {fit_rate(table, col):.3f}", file=sys.stderr)
    return status


def build_parser():
    parser = argparse.ArgumentParser(prog="foslsbem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one experiment and write its data table")
    p.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p.add_argument("--levels", required=True, type=parse_levels, help="refinement levels a:b")
    p.add_argument("--alpha", type=parse_alpha, default=None,
                   help="alpha or comma-separated list (default 1, or the nine table values for eig)")
    p.add_argument("--quad-space", type=int, default=3, help="Gauss points per triangle direction")
    p.add_argument("--quad-time", type=int, default=3, help="Gauss points per time slab")
    p.add_argument("--out", default="-", help="output file, '-' for standard output")
    p.add_argument("--threads", type=int, default=1, help="BLAS thread count")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = RunConfig(args.experiment, args.levels, args.alpha, args.quad_space,
                           args.quad_time, args.out, args.threads)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if config.out == "-":
        return run(config, sys.stdout)
    try:
        stream = open(config.out, "w", encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write {config.out}: {exc}", file=sys.stderr)
        return 2
    with stream:
        return run(config, stream)


if __name__ == "__main__":
    sys.exit(main())
