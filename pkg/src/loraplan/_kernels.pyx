# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled obstruction-loss kernel.

Arithmetic mirrors ``geometry.trace_link`` operation for operation so that
both backends agree to the last few ulps.
"""

from libc.math cimport sqrt, log10, INFINITY, NAN
from libc.stdlib cimport malloc, free

BACKEND = "cython"

cdef double KNIFE_EDGE_V_THRESHOLD = -0.6 * sqrt(2.0)
cdef double MIN_INTERVAL = 1e-12


cdef inline double _knife_edge_loss(double v) noexcept nogil:
    cdef double w
    if v <= -0.78:
        return 0.0
    w = v - 0.1
    return 6.9 + 20.0 * log10(sqrt(w * w + 1.0) + w)


cdef inline double _fresnel_v(double h, double t, double length3, double wavelength) noexcept nogil:
    cdef double w = t * (1.0 - t)
    if w <= 0.0:
        if h <= 0.0:
            return -INFINITY
        return INFINITY
    return h * sqrt(2.0 / (wavelength * length3 * w))


cdef inline bint _inside(double x, double y, const double* xs, const double* ys, int n) noexcept nogil:
    cdef bint inside = False
    cdef int i, j = n - 1
    cdef double xi
    for i in range(n):
        if (ys[i] > y) != (ys[j] > y):
            xi = xs[i] + (y - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i])
            if x < xi:
                inside = not inside
        j = i
    return inside


cdef void _link(double ax, double ay, double az, double bx, double by, double bz,
                const int* kind, const double* height, const double* wall_db, const int* floors,
                const int* vstart, const int* vcount, const double* vx, const double* vy,
                const double* bbox, int nobs, double wavelength,
                double floor_loss_db, double veg_db_per_m, double veg_cap_db,
                double* hits, double* ts, double* iv, double* res) noexcept nogil:
    cdef double dx = bx - ax, dy = by - ay, dz = bz - az
    cdef double length2 = sqrt(dx * dx + dy * dy)
    cdef double length3 = sqrt(dx * dx + dy * dy + dz * dz)
    cdef double sxmin = ax if ax < bx else bx
    cdef double sxmax = bx if ax < bx else ax
    cdef double symin = ay if ay < by else by
    cdef double symax = by if ay < by else ay
    cdef double wall = 0.0, depth = 0.0
    cdef long nfloor = 0
    cdef double top3[3]
    cdef int ntop = 0
    cdef int o, k, k1, s, n, nh, nts, niv, m, f, nf, q
    cdef double top, x0, y0, ex, ey, den, rx, ry, t, u, t0, t1, tm, z0, z1, zlo, zhi
    cdef double step, zf, lo, hi, th, veg_depth, veg_start, best_v, v, alpha, tstar, tmp
    cdef bint is_building, blocked, has_lo
    cdef const double* xs
    cdef const double* ys

    for o in range(nobs):
        if (bbox[4 * o + 1] < sxmin or bbox[4 * o] > sxmax
                or bbox[4 * o + 3] < symin or bbox[4 * o + 2] > symax):
            continue
        top = height[o]
        is_building = kind[o] == 0
        s = vstart[o]
        n = vcount[o]
        xs = vx + s
        ys = vy + s

        nh = 0
        for k in range(n):
            x0 = xs[k]
            y0 = ys[k]
            k1 = k + 1 if k + 1 < n else 0
            ex = xs[k1] - x0
            ey = ys[k1] - y0
            den = dx * ey - dy * ex
            if den == 0.0:
                continue
            rx = x0 - ax
            ry = y0 - ay
            t = (rx * ey - ry * ex) / den
            u = (rx * dy - ry * dx) / den
            if 0.0 <= t <= 1.0 and 0.0 <= u < 1.0:
                hits[nh] = t
                nh += 1

        # sorted unique {0, hits..., 1}
        for k in range(1, nh):
            tmp = hits[k]
            m = k - 1
            while m >= 0 and hits[m] > tmp:
                hits[m + 1] = hits[m]
                m -= 1
            hits[m + 1] = tmp
        ts[0] = 0.0
        nts = 1
        for k in range(nh):
            if hits[k] != ts[nts - 1]:
                ts[nts] = hits[k]
                nts += 1
        if ts[nts - 1] != 1.0:
            ts[nts] = 1.0
            nts += 1

        niv = 0
        for k in range(nts - 1):
            t0 = ts[k]
            t1 = ts[k + 1]
            if t1 - t0 <= MIN_INTERVAL:
                continue
            tm = 0.5 * (t0 + t1)
            if _inside(ax + tm * dx, ay + tm * dy, xs, ys, n):
                if niv > 0 and t0 - iv[2 * niv - 1] <= MIN_INTERVAL:
                    iv[2 * niv - 1] = t1
                else:
                    iv[2 * niv] = t0
                    iv[2 * niv + 1] = t1
                    niv += 1
        if niv == 0:
            continue

        if is_building:
            for q in range(niv):
                t0 = iv[2 * q]
                t1 = iv[2 * q + 1]
                if t0 > 0.0 and az + t0 * dz < top:
                    wall += wall_db[o]
                if t1 < 1.0 and az + t1 * dz < top:
                    wall += wall_db[o]

        blocked = False
        veg_depth = 0.0
        veg_start = INFINITY
        for q in range(niv):
            t0 = iv[2 * q]
            t1 = iv[2 * q + 1]
            z0 = az + t0 * dz
            z1 = az + t1 * dz
            if z0 <= z1:
                zlo = z0
                zhi = z1
            else:
                zlo = z1
                zhi = z0
            if zlo < top:
                blocked = True
            if is_building:
                nf = floors[o]
                step = top / (nf + 1)
                for f in range(1, nf + 1):
                    zf = f * step
                    if zlo < zf < zhi:
                        nfloor += 1
            else:
                has_lo = True
                if z0 < top and z1 < top:
                    lo = t0
                    hi = t1
                elif z0 < top or z1 < top:
                    th = (top - az) / dz
                    if z0 < top:
                        lo = t0
                        hi = th
                    else:
                        lo = th
                        hi = t1
                else:
                    has_lo = False
                if has_lo:
                    veg_depth += (hi - lo) * length2
                    if lo < veg_start:
                        veg_start = lo
        if not is_building and veg_start < INFINITY:
            depth += veg_depth

        if not blocked:
            best_v = -INFINITY
            for q in range(niv):
                t0 = iv[2 * q]
                t1 = iv[2 * q + 1]
                v = _fresnel_v(top - (az + t0 * dz), t0, length3, wavelength)
                if v > best_v:
                    best_v = v
                v = _fresnel_v(top - (az + t1 * dz), t1, length3, wavelength)
                if v > best_v:
                    best_v = v
                alpha = az - top
                den = dz + 2.0 * alpha
                tstar = alpha / den if den != 0.0 else NAN
                if t0 < tstar < t1:
                    v = _fresnel_v(top - (az + tstar * dz), tstar, length3, wavelength)
                    if v > best_v:
                        best_v = v
            if best_v > KNIFE_EDGE_V_THRESHOLD:
                # keep the three largest, descending
                if ntop < 3:
                    top3[ntop] = best_v
                    ntop += 1
                elif best_v > top3[2]:
                    top3[2] = best_v
                m = ntop - 1
                while m > 0 and top3[m] > top3[m - 1]:
                    tmp = top3[m]
                    top3[m] = top3[m - 1]
                    top3[m - 1] = tmp
                    m -= 1

    res[0] = wall
    res[1] = floor_loss_db * nfloor
    tmp = veg_db_per_m * depth
    res[2] = tmp if tmp < veg_cap_db else veg_cap_db
    tmp = 0.0
    for k in range(ntop):
        tmp += _knife_edge_loss(top3[k])
    res[3] = tmp


def obstruction_losses(const double[:, ::1] nodes, double gx, double gy, double gz, packed,
                       double wavelength, double floor_loss_db, double veg_db_per_m,
                       double veg_cap_db, double[:, ::1] out):
    """Fill ``out[k] = (wall_db, floor_db, vegetation_db, diffraction_db)`` for
    the link from ``nodes[k]`` to the gateway at (gx, gy, gz). Releases the GIL."""
    cdef const int[::1] kind = packed.kind
    cdef const double[::1] height = packed.height
    cdef const double[::1] wall_db = packed.wall_db
    cdef const int[::1] floors = packed.floors
    cdef const int[::1] vstart = packed.vstart
    cdef const int[::1] vcount = packed.vcount
    cdef const double[::1] vx = packed.vx
    cdef const double[::1] vy = packed.vy
    cdef const double[:, ::1] bbox = packed.bbox
    cdef int nobs = kind.shape[0]
    cdef Py_ssize_t n = nodes.shape[0], k
    cdef int maxv = 0, o
    for o in range(nobs):
        if vcount[o] > maxv:
            maxv = vcount[o]
    if n == 0 or nobs == 0:
        for k in range(n):
            out[k, 0] = 0.0
            out[k, 1] = 0.0
            out[k, 2] = 0.0
            out[k, 3] = 0.0
        return
    cdef double* hits = <double*> malloc((maxv + 2) * sizeof(double))
    cdef double* ts = <double*> malloc((maxv + 2) * sizeof(double))
    cdef double* iv = <double*> malloc(2 * (maxv + 2) * sizeof(double))
    if hits == NULL or ts == NULL or iv == NULL:
        free(hits)
        free(ts)
        free(iv)
        raise MemoryError()
    try:
        with nogil:
            for k in range(n):
                _link(nodes[k, 0], nodes[k, 1], nodes[k, 2], gx, gy, gz,
                      &kind[0], &height[0], &wall_db[0], &floors[0], &vstart[0], &vcount[0],
                      &vx[0], &vy[0], &bbox[0, 0], nobs, wavelength,
                      floor_loss_db, veg_db_per_m, veg_cap_db, hits, ts, iv, &out[k, 0])
    finally:
        free(hits)
        free(ts)
        free(iv)
