"""Hot-path grid kernels: supercover line traversal, line of sight, disk sensing.

Compiled with numba when available; the pure-Python fallbacks compute exactly
the same cells so results are bit-identical either way.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def supercover(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """All cells the segment between the centers of a and b passes through.

    When the segment crosses a cell corner exactly, both corner-adjacent
    cells are included, so a diagonal between two Occupied diagonal
    neighbors is treated as blocked by line_of_sight.
    """
    x0, y0 = a
    x1, y1 = b
    cells = [(x0, y0)]
    dx, dy = x1 - x0, y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    x, y = x0, y0
    ix = iy = 0
    while ix < nx or iy < ny:
        d = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if d == 0:
            cells.append((x + sx, y))
            cells.append((x, y + sy))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif d < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


@njit(cache=True)
def los_blocked(occ: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> bool:
    """True iff a supercover cell strictly between the endpoints is blocked.

    occ is a (h, w) uint8 array, nonzero = blocked. Endpoints never block.
    """
    dx, dy = x1 - x0, y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    x, y = x0, y0
    ix = iy = 0
    while ix < nx or iy < ny:
        d = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if d == 0:
            # corner crossing: both side cells must be clear
            if occ[y, x + sx] != 0 and not (x + sx == x1 and y == y1) and not (x + sx == x0 and y == y0):
                return True
            if occ[y + sy, x] != 0 and not (x == x1 and y + sy == y1) and not (x == x0 and y + sy == y0):
                return True
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif d < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        if (x != x1 or y != y1) and occ[y, x] != 0:
            return True
    return False


@njit(cache=True)
def visible_mask(occ: np.ndarray, x0: int, y0: int, r_cells: float) -> np.ndarray:
    """Boolean mask of cells within Euclidean r_cells of (x0, y0) with LOS."""
    h, w = occ.shape
    out = np.zeros((h, w), dtype=np.bool_)
    r = int(np.floor(r_cells))
    r2 = r_cells * r_cells
    for y in range(max(0, y0 - r), min(h, y0 + r + 1)):
        for x in range(max(0, x0 - r), min(w, x0 + r + 1)):
            ddx = x - x0
            ddy = y - y0
            if ddx * ddx + ddy * ddy <= r2 + 1e-9:
                if not los_blocked(occ, x0, y0, x, y):
                    out[y, x] = True
    return out
