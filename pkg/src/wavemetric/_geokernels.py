"""Lattice Dijkstra kernel shared by distance and arrival computations.

One source serves both backends: with numba available the function is
compiled, under ``WAVEMETRIC_DISABLE_NUMBA`` (or ``NUMBA_DISABLE_JIT``) the
identical code runs as plain Python.  Arithmetic and visitation order are the
same either way, so results are reproducible bit for bit.

The heap stores (distance, node index) pairs and compares them
lexicographically, which pins down the visitation order even when many nodes
share a distance; lazy deletion stands in for decrease-key.
"""

import numpy as np

from ._accel import njit

GEODESIC = 0
ANISO_TIME = 1
ISO_TIME = 2


@njit(cache=True)
def _heap_less(k1, i1, k2, i2):
    if k1 < k2:
        return True
    return k1 == k2 and i1 < i2


@njit(cache=True)
def _sift_up(hkey, hidx, pos):
    while pos > 0:
        parent = (pos - 1) // 2
        if _heap_less(hkey[pos], hidx[pos], hkey[parent], hidx[parent]):
            hkey[pos], hkey[parent] = hkey[parent], hkey[pos]
            hidx[pos], hidx[parent] = hidx[parent], hidx[pos]
            pos = parent
        else:
            break


@njit(cache=True)
def _sift_down(hkey, hidx, size):
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        right = child + 1
        if right < size and _heap_less(hkey[right], hidx[right], hkey[child], hidx[child]):
            child = right
        if _heap_less(hkey[child], hidx[child], hkey[pos], hidx[pos]):
            hkey[pos], hkey[child] = hkey[child], hkey[pos]
            hidx[pos], hidx[child] = hidx[child], hidx[pos]
            pos = child
        else:
            break


@njit(cache=True)
def dijkstra_lattice(shape, strides, spacing, offsets, mode, mats, speed, passable, sources):
    """Single-source-set shortest distances over a rectilinear lattice.

    shape/strides/spacing describe the grid (C order); offsets is the
    neighbor stencil in index space.  mode selects the edge weight:
    0 = sqrt(dx . G_mid . dx) with G read from mats,
    1 = |dx|^2 / sqrt(dx . M_mid . dx) (traversal time at speed sqrt(n.Mn)),
    2 = |dx| / midpoint of the scalar speed array.
    """
    d = shape.shape[0]
    n_nodes = passable.shape[0]
    n_off = offsets.shape[0]
    dist = np.full(n_nodes, np.inf)
    done = np.zeros(n_nodes, np.bool_)

    cap = 4 * n_nodes + 16
    hkey = np.empty(cap, np.float64)
    hidx = np.empty(cap, np.int64)
    hs = 0
    for si in range(sources.shape[0]):
        s = sources[si]
        if dist[s] != 0.0:
            dist[s] = 0.0
            hkey[hs] = 0.0
            hidx[hs] = s
            hs += 1
            _sift_up(hkey, hidx, hs - 1)

    cu = np.empty(d, np.int64)
    cv = np.empty(d, np.int64)
    while hs > 0:
        ukey = hkey[0]
        u = hidx[0]
        hs -= 1
        hkey[0] = hkey[hs]
        hidx[0] = hidx[hs]
        _sift_down(hkey, hidx, hs)
        if done[u] or ukey != dist[u]:
            continue
        done[u] = True
        rem = u
        for a in range(d):
            cu[a] = rem // strides[a]
            rem -= cu[a] * strides[a]
        for o in range(n_off):
            ok = True
            v = 0
            for a in range(d):
                cv[a] = cu[a] + offsets[o, a]
                if cv[a] < 0 or cv[a] >= shape[a]:
                    ok = False
                    break
                v += cv[a] * strides[a]
            if not ok:
                continue
            if done[v] or not passable[v]:
                continue
            if mode == ISO_TIME:
                len2 = 0.0
                for a in range(d):
                    dxa = offsets[o, a] * spacing[a]
                    len2 += dxa * dxa
                mid = 0.5 * (speed[u] + speed[v])
                if mid <= 0.0:
                    continue
                w = np.sqrt(len2) / mid
            else:
                q = 0.0
                len2 = 0.0
                for a in range(d):
                    dxa = offsets[o, a] * spacing[a]
                    len2 += dxa * dxa
                    for b in range(d):
                        dxb = offsets[o, b] * spacing[b]
                        q += dxa * (0.5 * (mats[u, a, b] + mats[v, a, b])) * dxb
                if mode == GEODESIC:
                    w = np.sqrt(q)
                else:
                    if q <= 0.0:
                        continue
                    w = len2 / np.sqrt(q)
            nd = dist[u] + w
            if nd < dist[v]:
                dist[v] = nd
                if hs >= cap:
                    new_cap = 2 * cap
                    nk = np.empty(new_cap, np.float64)
                    ni = np.empty(new_cap, np.int64)
                    nk[:hs] = hkey[:hs]
                    ni[:hs] = hidx[:hs]
                    hkey = nk
                    hidx = ni
                    cap = new_cap
                hkey[hs] = nd
                hidx[hs] = v
                hs += 1
                _sift_up(hkey, hidx, hs - 1)
    return dist
