"""Pure-Python obstruction-loss kernel, used when the compiled one is unavailable."""

import math

from .geometry import FLOOR, KNIFE_EDGE, VEGETATION_CROSSING, WALL, trace_link

BACKEND = "python"


def _knife_edge_loss(v):
    if v <= -0.78:
        return 0.0
    w = v - 0.1
    return 6.9 + 20.0 * math.log10(math.sqrt(w * w + 1.0) + w)


def obstruction_losses(nodes, gx, gy, gz, packed, wavelength, floor_loss_db,
                       veg_db_per_m, veg_cap_db, out):
    """Fill ``out[k] = (wall_db, floor_db, vegetation_db, diffraction_db)`` for
    the link from ``nodes[k]`` to the gateway at (gx, gy, gz)."""
    for k in range(nodes.shape[0]):
        ax, ay, az = (float(c) for c in nodes[k])
        wall = 0.0
        floors = 0
        depth = 0.0
        vs = []
        for kind, _t, _o, value in trace_link(ax, ay, az, gx, gy, gz, packed, wavelength):
            if kind == WALL:
                wall += value
            elif kind == FLOOR:
                floors += 1
            elif kind == VEGETATION_CROSSING:
                depth += value
            elif kind == KNIFE_EDGE:
                vs.append(value)
        diff = 0.0
        for v in sorted(vs, reverse=True)[:3]:
            diff += _knife_edge_loss(v)
        out[k, 0] = wall
        out[k, 1] = floor_loss_db * floors
        out[k, 2] = min(veg_db_per_m * depth, veg_cap_db)
        out[k, 3] = diff
