"""Compiled and vectorized iteration engines shared by the fast backends.

Three engine families live here:

* a scalar JIT row kernel (one orbit at a time),
* generated lane kernels - the blend-mask scheme: L orbits advance in
  lockstep, finished lanes keep a zeroed increment instead of branching
  out, the strip exits when every lane is dead or the budget is hit,
* a whole-grid numpy engine, used both as a second full-grid route in
  tests and as the half-precision implementation (binary16 has no JIT
  support, and numpy's float16 applies round-to-nearest-even after every
  operation, which is exactly the contract).

Bit-equality across backends is the design constraint that shapes all of
this: every engine performs the identical operation sequence

    zr2 = zr*zr; zi2 = zi*zi; test zr2+zi2 <= 4
    zr' = (zr2 - zi2) + cr; zi' = (zr*zi + zr*zi) + ci

in the working precision, with no fused multiply-add (fastmath stays off,
so LLVM may not contract a*b+c) and no reassociation.  The doubling is
spelled x + x rather than 2*x to keep float32 lanes free of float64
literal promotion.
"""

from __future__ import annotations

import threading

import numba

# The superword-level parallelism pass is what turns the unrolled lane
# kernels into packed vector instructions; it is off by default and must be
# enabled before the first kernel compiles.  fastmath is NOT enabled
# anywhere: contraction/reassociation would break cross-backend equality.
numba.config.SLP_VECTORIZE = 1

import numpy as np
from numba import njit

from .core import Precision

LANE_COUNTS = (2, 4, 8, 16)

_compile_lock = threading.Lock()
_kernel_cache: dict = {}


@njit(nogil=True, cache=True)
def _scalar_rows(out, cre, cims, max_iter):
    h, w = out.shape
    for r in range(h):
        ci = cims[r]
        for c in range(w):
            cr = cre[c]
            zr = cr - cr  # zero in the working dtype (cr is always finite)
            zi = cr - cr
            it = 0
            while it < max_iter:
                zr2 = zr * zr
                zi2 = zi * zi
                if not (zr2 + zi2 <= 4.0):
                    break
                t = (zr2 - zi2) + cr
                zrzi = zr * zi
                zi = (zrzi + zrzi) + ci
                zr = t
                it += 1
            out[r, c] = it
    return out


def _lane_kernel_source(lanes: int, fbits: int) -> str:
    """Emit the unrolled blend-mask kernel for a given lane count/precision.

    Per lane k the state is (crk, zrk, zik) plus an int32 latched mask mk
    and counter nk: mk &= (r2 <= 4) freezes a lane forever once it escapes
    (escaped orbits only grow, through inf to nan, and NaN <= 4 is false,
    so a dead lane can never resurrect), and nk += mk is the zeroed
    increment.  Columns beyond the last full strip run a scalar tail.
    """
    z = f"np.float{fbits}(0.0)"
    L = []
    a = L.append
    a("def _lane_rows(out, cre, cims, max_iter):")
    a("    h, w = out.shape")
    a(f"    nfull = w - (w % {lanes})")
    a("    for r in range(h):")
    a("        ci = cims[r]")
    a("        base = 0")
    a("        while base < nfull:")
    for k in range(lanes):
        a(f"            cr{k} = cre[base + {k}]")
        a(f"            zr{k} = {z}")
        a(f"            zi{k} = {z}")
        a(f"            m{k} = np.int32(1)")
        a(f"            n{k} = np.int32(0)")
    a("            it = 0")
    a("            while it < max_iter:")
    for k in range(lanes):
        a(f"                zr2_{k} = zr{k} * zr{k}")
        a(f"                zi2_{k} = zi{k} * zi{k}")
        a(f"                m{k} = m{k} & (np.int32(1) if zr2_{k} + zi2_{k} <= 4.0 else np.int32(0))")
        a(f"                n{k} = n{k} + m{k}")
        a(f"                t_{k} = (zr2_{k} - zi2_{k}) + cr{k}")
        a(f"                zrzi_{k} = zr{k} * zi{k}")
        a(f"                zi{k} = (zrzi_{k} + zrzi_{k}) + ci")
        a(f"                zr{k} = t_{k}")
    alive = " | ".join(f"m{k}" for k in range(lanes))
    a(f"                if ({alive}) == np.int32(0):")
    a("                    break")
    a("                it += 1")
    for k in range(lanes):
        a(f"            out[r, base + {k}] = n{k}")
    a(f"            base += {lanes}")
    a("        for c in range(nfull, w):")
    a("            cr = cre[c]")
    a(f"            zr = {z}")
    a(f"            zi = {z}")
    a("            it = 0")
    a("            while it < max_iter:")
    a("                zr2 = zr * zr")
    a("                zi2 = zi * zi")
    a("                if not (zr2 + zi2 <= 4.0):")
    a("                    break")
    a("                t = (zr2 - zi2) + cr")
    a("                zrzi = zr * zi")
    a("                zi = (zrzi + zrzi) + ci")
    a("                zr = t")
    a("                it += 1")
    a("            out[r, c] = it")
    a("    return out")
    return "\n".join(L)


def lane_kernel(lanes: int, precision: Precision):
    """Compiled blend-mask kernel for (lane count, precision); cached."""
    if lanes not in LANE_COUNTS:
        raise ValueError(f"lane count must be one of {LANE_COUNTS}, got {lanes}")
    if precision is Precision.HALF:
        raise ValueError("lane kernels exist for single/double only")
    fbits = 32 if precision is Precision.SINGLE else 64
    key = (lanes, fbits)
    with _compile_lock:
        if key not in _kernel_cache:
            ns = {"np": np}
            exec(_lane_kernel_source(lanes, fbits), ns)
            _kernel_cache[key] = njit(nogil=True)(ns["_lane_rows"])
        return _kernel_cache[key]


def numpy_rows(cre, cims, max_iter: int, dtype, compact_every: int = 32):
    """Whole-slice latched-mask iteration in numpy, any float dtype.

    Semantically identical to the scalar loop per pixel: the escape test
    uses the pre-update z, the alive mask latches, and finished orbits keep
    iterating harmlessly (monotone divergence through inf/nan) until the
    next compaction drops them.  Because each pixel's result is independent
    of which other pixels share the slice, splitting a grid into arbitrary
    row ranges cannot change any value.
    """
    dtype = np.dtype(dtype).type
    h, w = cims.size, cre.size
    cr = np.broadcast_to(cre.astype(dtype), (h, w)).ravel().copy()
    ci = np.repeat(cims.astype(dtype), w)
    n = h * w
    counts = np.zeros(n, np.int32)
    idx = np.arange(n)
    zr = np.zeros(n, dtype)
    zi = np.zeros(n, dtype)
    done = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while done < max_iter and idx.size:
            span = min(compact_every, max_iter - done)
            alive = np.ones(idx.size, bool)
            sub = np.zeros(idx.size, np.int32)
            for _ in range(span):
                zr2 = zr * zr
                zi2 = zi * zi
                alive &= (zr2 + zi2) <= dtype(4.0)
                sub += alive
                t = (zr2 - zi2) + cr
                zrzi = zr * zi
                zi = (zrzi + zrzi) + ci
                zr = t
            counts[idx] += sub
            done += span
            if not alive.all():
                keep = np.flatnonzero(alive)
                idx = idx[keep]
                zr = zr[keep]
                zi = zi[keep]
                cr = cr[keep]
                ci = ci[keep]
    return counts.reshape(h, w)


def render_rows(out, cre_f64, cims_f64, max_iter: int, precision: Precision,
                lane_count: int | None = None):
    """Fill `out` (int32, rows x width) for the given axis coordinates.

    The float64 axis coordinates are rounded once into the working
    precision here - the single place that cast happens, so every backend
    samples bit-identical values.  lane_count selects the blend-mask kernel;
    None (or half precision, which has no JIT path) uses the scalar engine.
    """
    dt = precision.dtype
    if precision is Precision.HALF:
        out[:] = numpy_rows(cre_f64, cims_f64, max_iter, dt)
        return out
    cre = cre_f64.astype(dt)
    cims = cims_f64.astype(dt)
    if lane_count is None:
        return _scalar_rows(out, cre, cims, max_iter)
    return lane_kernel(lane_count, precision)(out, cre, cims, max_iter)


def warm_up(precisions=(Precision.SINGLE, Precision.DOUBLE),
            lane_counts=LANE_COUNTS):
    """Force JIT compilation outside any timed region."""
    tiny = np.zeros((1, 17), np.int32)  # 17 exercises every ragged tail
    cre = np.linspace(-2.0, 1.0, 17)
    cim = np.zeros(1)
    for p in precisions:
        render_rows(tiny, cre, cim, 2, p)
        for lc in lane_counts:
            render_rows(tiny, cre, cim, 2, p, lane_count=lc)
