import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loraplan import kernels
from loraplan.geometry import trace_crossings
from loraplan.planner import obstruction_losses
from loraplan.propagation import VEGETATION_CAP_DB, diffraction_loss, mwf_loss
from loraplan.site import Point3, site_from_dict

from conftest import box

needs_compiled = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="extension not built")


def random_site(rng, n_obs=25, extent=1000.0):
    obstructions = []
    for k in range(n_obs):
        cx, cy = rng.uniform(0, extent, 2)
        n = int(rng.integers(4, 9))
        # star-shaped polygon; angular gaps stay below pi so no edge leaves its wedge
        ang = (np.arange(n) + rng.uniform(0, 0.5, n)) * (2 * np.pi / n)
        rad = rng.uniform(10, 80, n)
        fp = [{"x": float(cx + r * np.cos(a)), "y": float(cy + r * np.sin(a))} for a, r in zip(ang, rad)]
        if rng.random() < 0.75:
            obstructions.append({"id": f"b{k:02d}", "kind": "building", "footprint": fp,
                                 "height_m": float(rng.uniform(3, 40)),
                                 "material": str(rng.choice(["brick", "concrete", "wood", "glass"])),
                                 "floor_count": int(rng.integers(0, 8))})
        else:
            obstructions.append({"id": f"v{k:02d}", "kind": "vegetation", "footprint": fp,
                                 "height_m": float(rng.uniform(3, 20))})
    return site_from_dict({
        "grid": {"cell_size_m": extent / 40, "nx": 40, "ny": 40},
        "config": {"frequency_hz": 868e6},
        "gateways": [{"id": "gw", "position": {"x": extent / 2, "y": extent / 2, "z": 25}}],
        "obstructions": obstructions,
    })


def test_backend_registry():
    assert "python" in kernels.BACKENDS
    assert kernels.get_backend() is kernels.DEFAULT
    assert kernels.get_backend("python").BACKEND == "python"
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("seed", range(6))
def test_python_kernel_matches_scalar_trace(seed):
    rng = np.random.default_rng(seed)
    site = random_site(rng)
    cfg = site.config
    nodes = np.column_stack([rng.uniform(-50, 1050, 150), rng.uniform(-50, 1050, 150),
                             rng.uniform(1, 30, 150)])
    gw = site.gateways[0].position
    out = obstruction_losses(nodes, gw, site, backend="python")
    for row, (x, y, z) in zip(out, nodes):
        cr = trace_crossings(Point3(x, y, z), gw, site)
        wall, floor, veg = mwf_loss(cr, cfg)
        diff = diffraction_loss([c.v for c in cr if c.kind == "knife_edge"])
        assert tuple(row) == pytest.approx((wall, floor, veg, diff), abs=1e-9)


@needs_compiled
@pytest.mark.parametrize("seed", range(10))
def test_compiled_matches_python(seed):
    rng = np.random.default_rng(100 + seed)
    site = random_site(rng, n_obs=int(rng.integers(1, 50)))
    nodes = np.column_stack([rng.uniform(-50, 1050, 800), rng.uniform(-50, 1050, 800),
                             rng.uniform(0.5, 40, 800)])
    gw = site.gateways[0].position
    py = obstruction_losses(nodes, gw, site, backend="python")
    cy = obstruction_losses(nodes, gw, site, backend="cython")
    np.testing.assert_allclose(cy, py, rtol=0, atol=1e-9)


@needs_compiled
def test_compiled_matches_python_on_demo(demo_site):
    from loraplan.planner import _node_array
    _, _, nodes = _node_array(demo_site.grid)
    sub = nodes[::7]
    gw = demo_site.gateways[0].position
    py = obstruction_losses(sub, gw, demo_site, backend="python")
    cy = obstruction_losses(sub, gw, demo_site, backend="cython")
    np.testing.assert_allclose(cy, py, rtol=0, atol=1e-9)


@needs_compiled
@settings(max_examples=200, deadline=None)
@given(st.floats(-100, 300), st.floats(-100, 300), st.floats(0.5, 60),
       st.floats(-100, 300), st.floats(-100, 300), st.floats(0.5, 60))
def test_compiled_matches_python_grazing(ax, ay, az, bx, by, bz):
    # axis-aligned boxes with shared edges provoke vertex and collinear cases
    site = site_from_dict({
        "grid": {"cell_size_m": 10, "nx": 20, "ny": 20},
        "gateways": [],
        "obstructions": [
            {"id": "a", "kind": "building", "footprint": box(0, 0, 100, 100), "height_m": 20,
             "material": "brick", "floor_count": 3},
            {"id": "b", "kind": "building", "footprint": box(100, 0, 200, 100), "height_m": 35,
             "material": "concrete", "floor_count": 5},
            {"id": "c", "kind": "vegetation", "footprint": box(0, 100, 200, 200), "height_m": 12},
        ],
    })
    if (ax, ay) == (bx, by):
        return
    nodes = np.array([[ax, ay, az]])
    g = Point3(bx, by, bz)
    py = obstruction_losses(nodes, g, site, backend="python")
    cy = obstruction_losses(nodes, g, site, backend="cython")
    np.testing.assert_allclose(cy, py, rtol=0, atol=1e-9)


@pytest.mark.parametrize("workers", [2, 3, 0])
def test_threaded_split_identical(workers):
    rng = np.random.default_rng(7)
    site = random_site(rng)
    nodes = np.column_stack([rng.uniform(0, 1000, 10000), rng.uniform(0, 1000, 10000),
                             np.full(10000, 1.5)])
    gw = site.gateways[0].position
    serial = obstruction_losses(nodes, gw, site, workers=1)
    parallel = obstruction_losses(nodes, gw, site, workers=workers)
    assert serial.tobytes() == parallel.tobytes()


def test_vegetation_cap_respected():
    rng = np.random.default_rng(11)
    site = random_site(rng, n_obs=40)
    nodes = np.column_stack([rng.uniform(0, 1000, 500), rng.uniform(0, 1000, 500), np.full(500, 1.5)])
    out = obstruction_losses(nodes, site.gateways[0].position, site)
    assert (out >= 0).all()
    assert (out[:, 2] <= VEGETATION_CAP_DB).all()
