import csv
import io

import numpy as np
import pytest

from hdg3d.cli import main
from hdg3d.mesh import box_mesh, dirichlet_planes, write_mesh
from hdg3d.problems import get_problem, registry
from hdg3d.study import (
    StudyConfig,
    evaluate_errors,
    format_table,
    read_solution,
    run_study,
    solve_problem,
)

HEADER = ["level", "Nelt", "Nfc", "e_q", "r", "e_u", "r", "e_uhat", "r",
          "eps_u", "r", "eps_uhat", "r", "e_star", "r"]


def test_registry_names():
    assert {"paper-sine", "poly-k", "constant"} <= set(registry())
    with pytest.raises(KeyError):
        get_problem("nope")


def test_paper_sine_fields():
    p = get_problem("paper-sine")
    assert p.kappa(0.0, 0.0, 0.0) == 2.0
    assert p.c(1.0, 1.0, 0.0) == pytest.approx(2.0)
    assert p.u(1.0, 2.0, 0.25) == pytest.approx(np.sin(0.5))


@pytest.mark.parametrize("name,k", [("poly-k", 3), ("paper-sine", 1)])
def test_source_matches_finite_differences(name, k):
    p = get_problem(name, k)
    rng = np.random.default_rng(0)
    x, y, z = rng.uniform(0.1, 0.9, (3, 20))
    h = 1e-4
    div = 0.0
    for s in range(3):
        e = np.zeros(3)
        e[s] = h
        qp = p.q(x + e[0], y + e[1], z + e[2])[s]
        qm = p.q(x - e[0], y - e[1], z - e[2])[s]
        div = div + (qp - qm) / (2 * h)
    c = p.c(x, y, z) if callable(p.c) else p.c
    assert np.allclose(p.f(x, y, z), div + c * p.u(x, y, z), atol=1e-6)


def test_constant_problem_reproduced():
    p = get_problem("constant")
    assert p.f(0.3, 0.2, 0.1) == p.c
    sol = solve_problem(box_mesh((2, 2, 2), bc=dirichlet_planes(2, [0.0, 1.0])), p, 2)
    rep, _ = evaluate_errors(sol, p)
    assert max(rep.as_tuple()) < 1e-12


def test_study_config_validation():
    with pytest.raises(ValueError):
        StudyConfig(degree=-1)
    with pytest.raises(ValueError):
        StudyConfig(degree=0, bdm=True)
    with pytest.raises(ValueError):
        StudyConfig(domain="sphere")


def run_cli(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_text_table(capsys):
    code, out, _ = run_cli(capsys, "--degree", "1", "--levels", "2")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split() == HEADER
    assert len(lines) == 3
    assert lines[1].split()[4] == "--"


def test_cli_csv_and_determinism(tmp_path, capsys):
    out_file = tmp_path / "t.csv"
    for _ in range(2):
        code, _, _ = run_cli(capsys, "--degree", "1", "--levels", "2", "--format", "csv", "--out", str(out_file))
        assert code == 0
    text = out_file.read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == HEADER
    assert [r[1] for r in rows[1:]] == ["6", "48"]
    code, _, _ = run_cli(capsys, "--degree", "1", "--levels", "2", "--format", "csv", "--out", str(tmp_path / "u.csv"))
    assert (tmp_path / "u.csv").read_text() == text


def test_cli_mesh_file_and_dump(tmp_path, capsys):
    mesh_file = tmp_path / "m.txt"
    write_mesh(box_mesh((2, 1, 1), bc=dirichlet_planes(2, [0.0, 1.0])), mesh_file)
    dump = tmp_path / "sol.txt"
    code, out, _ = run_cli(capsys, "--mesh", str(mesh_file), "--problem", "poly-k", "--degree", "2",
                           "--dump", str(dump))
    assert code == 0
    row = out.strip().splitlines()[1].split()
    assert row[1] == "12"
    assert all(float(v) < 1e-9 for v in row[3::2])
    data = read_solution(dump)
    assert data["uhat"].shape[1] == 6 and data["q"].shape[1:] == (3, 10) and data["u"].shape[1] == 10
    assert dump.read_text().startswith("# hdg3d solution dump")


def test_cli_pstudy(capsys):
    code, out, _ = run_cli(capsys, "--pstudy", "--degree", "2", "--levels", "1")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split()[0] == "k"
    assert [l.split()[0] for l in lines[1:]] == ["0", "1", "2"]


@pytest.mark.parametrize("args", [
    ["--problem", "missing"],
    ["--bdm", "--degree", "0"],
    ["--mesh", "/nonexistent/mesh.txt"],
    ["--levels", "0"],
    ["--threads", "0"],
])
def test_cli_errors(capsys, args):
    code, out, err = run_cli(capsys, *args)
    assert code != 0
    assert err.startswith("hdg3d: error:")
    assert len(err.strip().splitlines()) == 1


def test_cli_pure_neumann_with_reaction(tmp_path, capsys):
    raw = box_mesh((1, 1, 1), bc=lambda c, n: np.full(len(c), 2))
    mesh_file = tmp_path / "n.txt"
    write_mesh(raw, mesh_file)
    code, _, err = run_cli(capsys, "--mesh", str(mesh_file), "--problem", "constant")
    # c = 1 > 0, so the pure Neumann problem is well posed
    assert code == 0


def test_format_table_rates():
    rows = run_study(StudyConfig(degree=1, levels=3), lambda k: get_problem("paper-sine", k))
    text = format_table(rows, "csv")
    data = list(csv.reader(io.StringIO(text)))
    r_eq = float(data[3][4])
    assert 1.5 < r_eq < 2.5
