"""Command-line convergence-study driver."""
from __future__ import annotations

import argparse
import logging
import sys

from . import parallel
from .problems import get_problem, registry
from .study import StudyConfig, format_table, run_study, solve_problem, study_mesh, write_solution


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hdg3d",
        description="HDG convergence studies for reaction-diffusion problems on tetrahedra.",
    )
    p.add_argument("--problem", default="paper-sine", help=f"one of: {', '.join(registry())}")
    p.add_argument("--degree", type=int, default=1, help="polynomial degree k (max k for --pstudy)")
    p.add_argument("--levels", type=int, default=3, help="number of uniform refinements (p-study: mesh level)")
    p.add_argument("--base", type=int, default=1, help="cells per unit length on the coarsest level")
    p.add_argument("--domain", choices=("cube", "L"), default="cube")
    p.add_argument("--tau", type=float, default=1.0, help="stabilization value on every face")
    p.add_argument("--bdm", action="store_true", help="hybridized BDM variant (tau = 0)")
    p.add_argument("--pstudy", action="store_true", help="sweep k = 0..degree on a fixed mesh")
    p.add_argument("--quad-bump", type=int, default=0, help="extra quadrature degree above 2k+2")
    p.add_argument("--mesh", help="read this mesh file instead of generating meshes")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--format", choices=("txt", "csv"), default="txt")
    p.add_argument("--threads", type=int, default=1, help="element-loop worker threads")
    p.add_argument("--dump", help="write the finest-level solution coefficients to this file")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        parallel.set_threads(args.threads)
        cfg = StudyConfig(
            degree=args.degree, levels=args.levels, base=args.base, tau=args.tau,
            quad_bump=args.quad_bump, bdm=args.bdm, pstudy=args.pstudy, domain=args.domain,
            mesh_file=args.mesh, threads=args.threads,
        )
        get_problem(args.problem, args.degree)
        rows = run_study(cfg, lambda k: get_problem(args.problem, k))
        text = format_table(rows, args.format, cfg.pstudy)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if args.dump:
            from .mesh import read_mesh

            raw = read_mesh(args.mesh) if args.mesh else study_mesh(
                args.domain, args.base * 2 ** (args.levels - 1))
            sol = solve_problem(raw, get_problem(args.problem, args.degree), args.degree,
                                tau=args.tau, bdm=args.bdm, quad_bump=args.quad_bump)
            write_solution(sol, args.dump)
    except (ValueError, KeyError, OSError, ArithmeticError, IndexError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"hdg3d: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
