"""Solve pipeline and convergence-study driver."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BasisFamily, BasisTables, build_tables
from .element_matrices import ElementMatrices, StabilizationField, build_element_matrices
from .global_system import (
    DofMap,
    SkeletonSystem,
    assemble,
    dirichlet_project,
    neumann_load,
    reconstruct,
    solve,
)
from .local_solver import LocalBlocks, assemble_blocks, bdm_blocks, condense
from .mesh import ExpandedMesh, RawMesh, box_mesh, dirichlet_planes, expand, l_domain_mesh
from .postprocess import (
    ErrorReport,
    error_quad_degree,
    errors,
    hdg_project,
    l2_project_skeleton,
    l2_project_volume,
    p_ratios,
    postprocess_star,
    rates,
)
from .problems import ProblemSpec
from .quadrature import tet_rule, tri_rule

log = logging.getLogger(__name__)

__all__ = [
    "HDGSolution",
    "StudyConfig",
    "StudyRow",
    "solve_problem",
    "evaluate_errors",
    "study_mesh",
    "run_study",
    "format_table",
    "write_solution",
    "read_solution",
]


@dataclass
class HDGSolution:
    em: ExpandedMesh
    k: int
    tables: BasisTables
    tau: StabilizationField
    elmats: ElementMatrices
    blocks: LocalBlocks
    dofmap: DofMap
    system: SkeletonSystem
    uhat: np.ndarray  # (Nfc, d2)
    q: np.ndarray  # (Nelt, 3, d3)
    u: np.ndarray  # (Nelt, d3) or (Nelt, d3 - d2) for BDM
    phiN: np.ndarray
    bdm: bool = False
    timings: dict = field(default_factory=dict)


def solve_problem(raw: RawMesh | ExpandedMesh, prob: ProblemSpec, k: int, tau: float = 1.0,
                  bdm: bool = False, quad_bump: int = 0, threads: int | None = None) -> HDGSolution:
    """Full HDG solve: matrices, condensation, assembly, skeleton solve, recovery."""
    t = {}
    t0 = time.perf_counter()
    em = raw if isinstance(raw, ExpandedMesh) else expand(raw)
    family = BasisFamily(k)
    if bdm and k < 1:
        raise ValueError("the BDM variant requires k >= 1")
    deg = 2 * k + 2 + quad_bump
    tables = build_tables(family, tet_rule(deg), tri_rule(deg))
    tau_field = StabilizationField.from_values(em, 0.0 if bdm else tau, allow_zero=bdm)
    t["setup"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    elmats = build_element_matrices(em, tables, prob.kappa, prob.c, prob.f, tau_field)
    blocks = assemble_blocks(elmats)
    if bdm:
        blocks = bdm_blocks(blocks, family)
    t["matrices"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cond = condense(blocks, threads=threads)
    t["condense"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dofmap = DofMap.from_mesh(em, family.d2)
    uD = dirichlet_project(em, tables, prob.uD)
    phiN = neumann_load(em, tables, prob.g)
    system = assemble(cond, dofmap, em, phiN, uD)
    t["assemble"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    uhat = solve(system, em)
    t["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    q, u = reconstruct(blocks, uhat, dofmap, threads)
    t["reconstruct"] = time.perf_counter() - t0
    return HDGSolution(em, k, tables, tau_field, elmats, blocks, dofmap, system, uhat, q, u,
                       phiN, bdm, t)


def evaluate_errors(sol: HDGSolution, prob: ProblemSpec, quad_degree: int | None = None,
                    quad_bump: int = 0):
    """Postprocess, project the exact solution and compute the six error measures.

    The postprocessing rules are exact to degree 2k+4 (+ `quad_bump`); the
    error functionals use their own rules of degree `quad_degree`.
    Returns ``(report, u_star)``.
    """
    k, em = sol.k, sol.em
    deg = 2 * k + 4 + quad_bump
    tables_kp1 = build_tables(BasisFamily(k + 1), tet_rule(deg), tri_rule(deg))
    u_star = postprocess_star(em, tables_kp1, sol.q, sol.u, prob.kappa)
    # projections of the exact solution use the error-grade rules
    pdeg = error_quad_degree(k) if quad_degree is None else quad_degree
    ptables = build_tables(BasisFamily(k), tet_rule(pdeg), tri_rule(pdeg))
    if sol.bdm:
        low = build_tables(BasisFamily(k - 1), ptables.tet, ptables.tri)
        Pi_u = l2_project_volume(em, low, prob.u)
    else:
        _, Pi_u = hdg_project(em, None, ptables, sol.tau, prob.q, prob.u)
    P_uhat = l2_project_skeleton(em, ptables, prob.u)
    report = errors(em, k, prob.u, prob.q, sol.q, sol.u, sol.uhat, u_star, Pi_u, P_uhat, quad_degree)
    return report, u_star


@dataclass(frozen=True)
class StudyConfig:
    degree: int = 1
    levels: int = 3
    base: int = 1
    tau: float = 1.0
    quad_bump: int = 0
    bdm: bool = False
    pstudy: bool = False
    domain: str = "cube"
    mesh_file: str | None = None
    threads: int = 1

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.bdm and self.degree < 1:
            raise ValueError("the BDM variant requires degree >= 1")
        if self.levels < 1 or self.base < 1:
            raise ValueError("levels and base must be >= 1")
        if self.domain not in ("cube", "L"):
            raise ValueError(f"unknown domain {self.domain!r}")


@dataclass(frozen=True)
class StudyRow:
    label: int  # refinement n (h-study) or degree k (p-study)
    nelt: int
    nfc: int
    report: ErrorReport
    seconds: float


def study_mesh(domain: str, n: int) -> RawMesh:
    """Level mesh with n cells per unit length; z = const planes are Dirichlet."""
    if domain == "cube":
        return box_mesh((n, n, n), bc=dirichlet_planes(2, [0.0, 1.0]))
    if domain == "L":
        return l_domain_mesh(n)
    raise ValueError(f"unknown domain {domain!r}")


def _run_one(raw, prob, k, cfg):
    t0 = time.perf_counter()
    sol = solve_problem(raw, prob, k, tau=cfg.tau, bdm=cfg.bdm, quad_bump=cfg.quad_bump,
                        threads=cfg.threads)
    report, _ = evaluate_errors(sol, prob, quad_bump=cfg.quad_bump)
    return sol, report, time.perf_counter() - t0


def run_study(cfg: StudyConfig, prob_factory) -> list[StudyRow]:
    """Run an h-study (levels) or a p-study (degrees 0..cfg.degree on one mesh).

    `prob_factory(k)` returns the problem for degree k.
    """
    from .mesh import read_mesh

    rows = []
    if cfg.pstudy:
        if cfg.mesh_file:
            raw = read_mesh(cfg.mesh_file)
        else:
            raw = study_mesh(cfg.domain, cfg.base * 2 ** (cfg.levels - 1))
        em = expand(raw)
        for k in range(1 if cfg.bdm else 0, cfg.degree + 1):
            sol, rep, sec = _run_one(em, prob_factory(k), k, cfg)
            log.info("k=%d done in %.1fs", k, sec)
            rows.append(StudyRow(k, em.nelt, em.nfc, rep, sec))
        return rows
    meshes = ([(1, read_mesh(cfg.mesh_file))] if cfg.mesh_file else
              [(cfg.base * 2**i, None) for i in range(cfg.levels)])
    prob = prob_factory(cfg.degree)
    for n, raw in meshes:
        raw = raw if raw is not None else study_mesh(cfg.domain, n)
        sol, rep, sec = _run_one(raw, prob, cfg.degree, cfg)
        log.info("n=%d (Nelt=%d) done in %.1fs", n, sol.em.nelt, sec)
        rows.append(StudyRow(n, sol.em.nelt, sol.em.nfc, rep, sec))
    return rows


COLUMNS = ("e_q", "e_u", "e_uhat", "eps_u", "eps_uhat", "e_star")


def _rate_columns(rows, pstudy):
    errs = np.array([r.report.as_tuple() for r in rows])
    out = np.full(errs.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(errs.shape[1]):
            e = errs[:, j]
            if np.all(e > 0):
                if pstudy and len(e) >= 3:
                    out[2:, j] = p_ratios(e)
                elif not pstudy and len(e) >= 2:
                    out[1:, j] = rates(e)
    return errs, out


def format_table(rows, fmt: str = "txt", pstudy: bool = False) -> str:
    """Aligned text or CSV table: label, Nelt, Nfc, then each error with its rate."""
    errs, rts = _rate_columns(rows, pstudy)
    header = ["k" if pstudy else "level", "Nelt", "Nfc"]
    for c in COLUMNS:
        header += [c, "r"]
    body = []
    for i, row in enumerate(rows):
        line = [str(row.label), str(row.nelt), str(row.nfc)]
        for j in range(len(COLUMNS)):
            line.append(f"{errs[i, j]:.4e}")
            line.append("--" if np.isnan(rts[i, j]) else f"{rts[i, j]:.2f}")
        body.append(line)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"


def write_solution(sol: HDGSolution, path) -> None:
    """Text dump of the trace and element coefficients (17 significant digits)."""
    d3 = sol.q.shape[2]
    lines = [
        "# hdg3d solution dump",
        f"# k {sol.k} d2 {sol.uhat.shape[1]} d3 {d3} nu {sol.u.shape[1]} bdm {int(sol.bdm)}",
        "# uhat: one row per face, d2 coefficients in the face basis",
        "# q: one row per element, qx, qy, qz coefficients (3 d3); u: nu coefficients",
        f"uhat {sol.uhat.shape[0]}",
    ]
    fmt = lambda row: " ".join(f"{v:.17g}" for v in row)  # noqa: E731
    lines += [fmt(r) for r in sol.uhat]
    lines.append(f"q {sol.q.shape[0]}")
    lines += [fmt(r) for r in sol.q.reshape(len(sol.q), -1)]
    lines.append(f"u {sol.u.shape[0]}")
    lines += [fmt(r) for r in sol.u]
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution(path) -> dict:
    sections, current = {}, None
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        head = line.split()
        if head[0] in ("uhat", "q", "u"):
            current = head[0]
            sections[current] = []
            continue
        sections[current].append([float(v) for v in head])
    out = {name: np.array(rows) for name, rows in sections.items()}
    d3 = out["q"].shape[1] // 3
    out["q"] = out["q"].reshape(-1, 3, d3)
    return out
