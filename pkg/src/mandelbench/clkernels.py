"""Device kernel source generation, and an optional real-device runner.

Kernels are generated as source text at run time - the template below has
three placeholders (scalar type, vector width, iteration budget) and the
builder substitutes them, so any width/precision combination a device
supports can be produced without shipping N pre-baked kernels.

The kernel mirrors the portable loop exactly:

* identical operation order (zr2/zi2, inclusive <= 4 test, (zr2-zi2)+cr,
  (zr*zi + zr*zi)+ci),
* `#pragma OPENCL FP_CONTRACT OFF` - no fused multiply-add, matching the
  host backends' contract,
* the blend scheme: vector relational ops return 0/-1 per lane, so
  `alive &= (r2 <= 4)` latches dead lanes and `count -= alive` is the
  branch-free increment (subtracting -1).  The loop exits early only when
  every lane of the group is dead.

Each work item owns one group of `width` horizontally adjacent pixels;
the 1-wide variant degenerates to scalar types and a plain conditional.
"""

from __future__ import annotations

import ctypes

import numpy as np

from .core import GridDims, IterationGrid, Precision, Window

KERNEL_NAME = "escape_counts"

_VECTOR_TEMPLATE = """\
// generated: precision={scalar_t} width={width} max_iter={max_iter}
#pragma OPENCL FP_CONTRACT OFF
{fp16_pragma}
__kernel void escape_counts(const double x1, const double y1,
                            const double xstep, const double ystep,
                            const int img_width,
                            __global int *out)
{{
    const int groups_per_row = img_width / {width};
    const int gid = get_global_id(0);
    const int row = gid / groups_per_row;
    const int col0 = (gid % groups_per_row) * {width};

    {scalar_t}{width} cr;
    {vload}
    const {scalar_t} ci = ({scalar_t})(y1 - row * ystep);

    {scalar_t}{width} zr = ({scalar_t}{width})(({scalar_t})0);
    {scalar_t}{width} zi = ({scalar_t}{width})(({scalar_t})0);
    // vector relational ops yield 0 / -1 per lane in the comparison's
    // native integer width ({itype} for {scalar_t})
    {itype}{width} alive = ({itype}{width})(-1);
    int{width} count = (int{width})(0);

    for (int it = 0; it < {max_iter}; it++) {{
        {scalar_t}{width} zr2 = zr * zr;
        {scalar_t}{width} zi2 = zi * zi;
        alive = alive & ((zr2 + zi2) <= ({scalar_t})4);
        count = count - convert_int{width}(alive);
        if (!any(alive)) break;
        {scalar_t}{width} t = (zr2 - zi2) + cr;
        {scalar_t}{width} zrzi = zr * zi;
        zi = (zrzi + zrzi) + ci;
        zr = t;
    }}
    {vstore}
}}
"""

_SCALAR_TEMPLATE = """\
// generated: precision={scalar_t} width=1 max_iter={max_iter}
#pragma OPENCL FP_CONTRACT OFF
{fp16_pragma}
__kernel void escape_counts(const double x1, const double y1,
                            const double xstep, const double ystep,
                            const int img_width,
                            __global int *out)
{{
    const int gid = get_global_id(0);
    const int row = gid / img_width;
    const int col = gid % img_width;

    const {scalar_t} cr = ({scalar_t})(x1 + col * xstep);
    const {scalar_t} ci = ({scalar_t})(y1 - row * ystep);

    {scalar_t} zr = ({scalar_t})0;
    {scalar_t} zi = ({scalar_t})0;
    int count = 0;

    for (int it = 0; it < {max_iter}; it++) {{
        {scalar_t} zr2 = zr * zr;
        {scalar_t} zi2 = zi * zi;
        if (!((zr2 + zi2) <= ({scalar_t})4)) break;
        count++;
        {scalar_t} t = (zr2 - zi2) + cr;
        {scalar_t} zrzi = zr * zi;
        zi = (zrzi + zrzi) + ci;
        zr = t;
    }}
    out[row * img_width + col] = count;
}}
"""

_SCALAR_TYPES = {Precision.HALF: "half", Precision.SINGLE: "float",
                 Precision.DOUBLE: "double"}
_MASK_TYPES = {Precision.HALF: "short", Precision.SINGLE: "int",
               Precision.DOUBLE: "long"}


def build_kernel_source(precision: Precision, vector_width: int,
                        max_iter: int) -> str:
    """Substitute the three placeholders and return OpenCL C source."""
    if vector_width not in (1, 2, 4, 8, 16):
        raise ValueError("vector_width must be 1, 2, 4, 8 or 16")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    scalar_t = _SCALAR_TYPES[precision]
    fp16 = ("#pragma OPENCL EXTENSION cl_khr_fp16 : enable"
            if precision is Precision.HALF else "")
    if vector_width == 1:
        return _SCALAR_TEMPLATE.format(scalar_t=scalar_t,
                                       max_iter=max_iter, fp16_pragma=fp16)
    w = vector_width
    lanes = ", ".join(f"({scalar_t})(x1 + (col0 + {k}) * xstep)"
                      for k in range(w))
    vload = f"cr = ({scalar_t}{w})({lanes});"
    stores = "\n    ".join(
        f"out[row * img_width + col0 + {k}] = count.s{format(k, 'x')};"
        for k in range(w))
    return _VECTOR_TEMPLATE.format(scalar_t=scalar_t, width=w,
                                   max_iter=max_iter, fp16_pragma=fp16,
                                   itype=_MASK_TYPES[precision],
                                   vload=vload, vstore=stores)


# -- optional real-device execution ---------------------------------------
#
# Everything below talks to a vendor OpenCL implementation through the
# NativeBridge, the way the original wrapper did: each API entry point is
# resolved lazily by name and every call runs under the bridge's shared
# lock.  This path only activates when the caller supplies a vendor
# library path; the test suite exercises it solely when one is available.

_CL_SYMBOLS = ("clGetPlatformIDs", "clGetDeviceIDs", "clCreateContext",
               "clCreateCommandQueue", "clCreateProgramWithSource",
               "clBuildProgram", "clCreateKernel", "clCreateBuffer",
               "clSetKernelArg", "clEnqueueNDRangeKernel",
               "clEnqueueReadBuffer", "clFinish", "clReleaseMemObject",
               "clReleaseKernel", "clReleaseProgram",
               "clReleaseCommandQueue", "clReleaseContext")

_CL_DEVICE_TYPE_ALL = 0xFFFFFFFF
_CL_MEM_WRITE_ONLY = 1 << 1


class OpenClError(Exception):
    pass


def _check(code, what):
    if code != 0:
        raise OpenClError(f"{what} failed with CL error {code}")


class OpenClRunner:
    """Minimal kernel runner over a bridge-wrapped vendor library."""

    def __init__(self, bridge):
        self.bridge = bridge

    def _invoke(self, symbol, *args):
        return self.bridge.invoke(symbol, *args)

    def render(self, window: Window, dims: GridDims, precision: Precision,
               vector_width: int) -> IterationGrid:
        if dims.width % max(vector_width, 1):
            raise ValueError("width must be a multiple of vector_width")
        source = build_kernel_source(precision, vector_width,
                                     window.max_iter).encode()
        err = ctypes.c_int32(0)

        platform = ctypes.c_void_p()
        nplat = ctypes.c_uint32()
        _check(self._invoke("clGetPlatformIDs", 1, ctypes.byref(platform),
                            ctypes.byref(nplat)), "clGetPlatformIDs")
        device = ctypes.c_void_p()
        ndev = ctypes.c_uint32()
        _check(self._invoke("clGetDeviceIDs", platform,
                            ctypes.c_uint64(_CL_DEVICE_TYPE_ALL), 1,
                            ctypes.byref(device), ctypes.byref(ndev)),
               "clGetDeviceIDs")
        ctx = self._invoke("clCreateContext", None, 1, ctypes.byref(device),
                           None, None, ctypes.byref(err))
        _check(err.value, "clCreateContext")
        try:
            queue = self._invoke("clCreateCommandQueue", ctx, device, 0,
                                 ctypes.byref(err))
            _check(err.value, "clCreateCommandQueue")
            src = ctypes.c_char_p(source)
            length = ctypes.c_size_t(len(source))
            program = self._invoke("clCreateProgramWithSource", ctx, 1,
                                   ctypes.byref(src), ctypes.byref(length),
                                   ctypes.byref(err))
            _check(err.value, "clCreateProgramWithSource")
            _check(self._invoke("clBuildProgram", program, 1,
                                ctypes.byref(device), b"", None, None),
                   "clBuildProgram")
            kernel = self._invoke("clCreateKernel", program,
                                  KERNEL_NAME.encode(), ctypes.byref(err))
            _check(err.value, "clCreateKernel")

            out = np.zeros(dims.pixels, dtype=np.int32)
            buf = self._invoke("clCreateBuffer", ctx,
                               ctypes.c_uint64(_CL_MEM_WRITE_ONLY),
                               ctypes.c_size_t(out.nbytes), None,
                               ctypes.byref(err))
            _check(err.value, "clCreateBuffer")

            xstep = (window.x2 - window.x1) / dims.width
            ystep = (window.y1 - window.y2) / dims.height
            args = [ctypes.c_double(window.x1), ctypes.c_double(window.y1),
                    ctypes.c_double(xstep), ctypes.c_double(ystep),
                    ctypes.c_int32(dims.width), ctypes.c_void_p(buf)]
            for i, arg in enumerate(args):
                _check(self._invoke("clSetKernelArg", kernel, i,
                                    ctypes.sizeof(arg), ctypes.byref(arg)),
                       f"clSetKernelArg[{i}]")
            global_size = ctypes.c_size_t(
                dims.pixels // max(vector_width, 1))
            _check(self._invoke("clEnqueueNDRangeKernel", queue, kernel, 1,
                                None, ctypes.byref(global_size), None, 0,
                                None, None), "clEnqueueNDRangeKernel")
            _check(self._invoke("clEnqueueReadBuffer", queue, buf, 1, 0,
                                ctypes.c_size_t(out.nbytes),
                                out.ctypes.data_as(ctypes.c_void_p), 0,
                                None, None), "clEnqueueReadBuffer")
            _check(self._invoke("clFinish", queue), "clFinish")

            self._invoke("clReleaseMemObject", buf)
            self._invoke("clReleaseKernel", kernel)
            self._invoke("clReleaseProgram", program)
            self._invoke("clReleaseCommandQueue", queue)
            return IterationGrid(
                dims, out.reshape(dims.height, dims.width))
        finally:
            self._invoke("clReleaseContext", ctx)
