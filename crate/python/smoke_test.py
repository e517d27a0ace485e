"""Smoke test for the hyperbreg Python extension.

Build and install first, for example:

    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml

then run ``python python/smoke_test.py``.
"""

import math
import pathlib
import tempfile

import hyperbreg


def main():
    assert "static-sine" in hyperbreg.Case.names()

    mesh = hyperbreg.Mesh(15)
    assert abs(mesh.h - 1.0 / 16.0) < 1e-15
    assert len(mesh.nodes()) == 15
    mass = mesh.mass()
    assert len(mass) == 15 and abs(mass[0][0] - 4.0 * mesh.h / 6.0) < 1e-15

    case = hyperbreg.Case("static-sine")
    sol = hyperbreg.solve(case, mesh, 128)
    assert len(sol) == 129
    mid = mesh.nodes()[7]
    assert abs(sol.final_u[7] - case.exact(1.0, mid)) < 5e-3

    ivs = hyperbreg.compatible_initial_values(hyperbreg.Case("poly-time"), mesh, 2)
    assert len(ivs) == 4

    levels, reports = hyperbreg.solve_derivative(case, mesh, 128, 1)
    assert len(levels) == 2 and len(reports) == 2
    assert all(r.lambda_observed > 0 for r in reports)

    rows = hyperbreg.convergence(case, [15, 31], [128, 256])
    assert rows[0][3] is None
    assert 1.8 < rows[1][3] < 2.2, rows

    taylor = hyperbreg.taylor_test(hyperbreg.Case("timedep-sine"), hyperbreg.Mesh(31), 256)
    slopes = [r.slope for r in taylor if r.slope is not None]
    assert all(abs(s - 2.0) < 0.2 for s in slopes), taylor

    inline = hyperbreg.Case.inline(
        coefficient="2+t",
        lower_bound=2.0,
        initial_u="sin(pi*x)",
        source="sin(pi*x)*(pi^2*(2+t)*(1+t^2)+2)",
        exact="sin(pi*x)*(1+t^2)",
    )
    assert inline.has_exact
    assert abs(inline.exact(1.0, 0.5) - 2.0) < 1e-14

    try:
        hyperbreg.Case("no-such-case")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown case accepted")

    with tempfile.TemporaryDirectory() as tmp:
        cfg = pathlib.Path(tmp) / "config.toml"
        cfg.write_text('command = "compat"\ncase = "poly-time"\nk = 2\nmesh_sizes = [7]\n')
        report = hyperbreg.run_experiment(str(cfg), str(pathlib.Path(tmp) / "out"))
        lines = pathlib.Path(report).read_text().splitlines()
        assert lines[0] == "m,level,norm_V"
        assert len(lines) == 5
        assert all(math.isfinite(float(v)) for v in lines[1].split(","))

    print("hyperbreg smoke test passed")


if __name__ == "__main__":
    main()
