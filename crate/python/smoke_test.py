"""Quick end-to-end check of the cstk Python module.

Build first:  maturin develop --release -m crates/py/Cargo.toml
"""

import math
import os
import tempfile

import cstk


def close(x, y, tol):
    assert abs(x - y) <= tol, f"{x} vs {y}"


def main():
    grid = cstk.Grid.cube(3, 8)
    assert grid.shape == [8, 8, 8] and grid.sites == 512

    zero = cstk.Form.zeros(grid, 1)
    assert cstk.chern_simons(zero) == 0.0
    assert cstk.flatness_residual(zero) == 0.0

    a = cstk.Form.random(grid, 1, 0.3, seed=7)
    f = cstk.curvature(a)
    assert f.degree == 2 and f.max_abs() > 0

    # constant gauge maps leave the action unchanged
    u = cstk.Gauge.constant(grid, (0.6, 0.0, 0.8, 0.0))
    close(cstk.chern_simons(cstk.gauge_act(a, u)), cstk.chern_simons(a), 1e-10)
    report = cstk.gauge_shift(a, u)
    assert isinstance(report, dict)

    # first variation against a finite difference
    eta = cstk.Form.random(grid, 1, 0.2, seed=8)
    h = 1e-5
    fd = (cstk.chern_simons(a.axpy(h, eta)) - cstk.chern_simons(a.axpy(-h, eta))) / (2 * h)
    close(cstk.dcs(a, eta), fd, 1e-6 * max(1.0, abs(fd)))

    # holonomy of the zero connection is the identity
    q = cstk.holonomy(zero, "axis:2")
    close(q[0], 1.0, 1e-14)
    flat = cstk.Form.named("flat-constant", grid)
    assert len(cstk.holonomy_rep(flat)) == 3
    try:
        cstk.holonomy_rep(a)
    except cstk.CstkError:
        pass
    else:
        raise AssertionError("holonomy_rep accepted a curved connection")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "a.cstk")
        a.save(path)
        assert cstk.Form.load(path).values() == a.values()

    trefoil = cstk.Presentation("trefoil")
    rho = cstk.solve_representation(trefoil, seed=3)
    dims = cstk.cohomology_dims(trefoil, rho)
    assert isinstance(dims, dict)
    classes = cstk.enumerate_components(cstk.Presentation("poincare"), trials=200, seed=1)
    assert len(classes) >= 1

    surface = cstk.Grid.cube(2, 12)
    path = [cstk.Form.random(surface, 1, 0.4, seed=s) for s in (1, 2, 3)]
    pt = cstk.parallel_transport(path)
    close(abs(pt), 1.0, 1e-12)
    assert isinstance(pt, complex)

    small = cstk.Grid.cube(3, 4)
    b = cstk.Form.random(small, 1, 0.5, seed=11)
    values = cstk.eigenvalues(b)
    assert all(x <= y for x, y in zip(values, values[1:]))
    flow = cstk.segment_flow(cstk.Form.random(small, 1, 2.0, seed=53), cstk.Form.random(small, 1, 2.0, seed=51), 9, 400)
    assert isinstance(flow, dict)

    try:
        cstk.Grid([2, 2, 2])
    except cstk.CstkError:
        pass
    else:
        raise AssertionError("tiny grid accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
