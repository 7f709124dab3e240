/*
 * stub_device.c - a minimal instrumented compute library.
 *
 * Stands in for a vendor device library so the dynamic-loading layer can
 * be exercised over the real OS loader: three exported C-ABI symbols, no
 * dependencies beyond libc, and entry/exit instrumentation that a caller
 * can read back to prove no call was in flight across an unload.
 *
 * The pixel math deliberately reproduces the portable renderer bit for
 * bit: identical operation order, the inclusive |z|^2 <= 4 test on the
 * pre-update value, and no fused multiply-add (build with
 * -ffp-contract=off).  Half precision is computed softly: operands are
 * widened to binary32, the operation runs there, and the result is
 * rounded back to binary16 with round-to-nearest-even - the same
 * convention NumPy uses for float16 arithmetic, so grids agree exactly.
 *
 * Counters: total_entries / active_entries track the compute entry point
 * only; stub_counters and stub_version are observers and do not count.
 * load_generation increments once per dlopen of this object.  The value
 * is parked in an environment variable so it survives dlclose, which
 * wipes every static in the image.
 *
 * Test hook: when compiled with -DSTUB_TEST_HOOKS, stub_render_rows
 * sleeps for STUB_DEVICE_DELAY_MS milliseconds (read per call) after
 * registering its entry, widening race windows deterministically.
 */

#define _POSIX_C_SOURCE 200809L

#include <stdatomic.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#ifdef STUB_TEST_HOOKS
#include <time.h>
#endif

#define STUB_VERSION 20001

static atomic_llong active_entries;
static atomic_llong total_entries;
static long long load_generation;

__attribute__((constructor))
static void record_load(void)
{
    const char *prev = getenv("STUB_DEVICE_GENERATION");
    char buf[32];

    load_generation = (prev != NULL ? strtoll(prev, NULL, 10) : 0) + 1;
    snprintf(buf, sizeof buf, "%lld", load_generation);
    setenv("STUB_DEVICE_GENERATION", buf, 1);
}

#ifdef STUB_TEST_HOOKS
static void test_hook_delay(void)
{
    const char *ms_text = getenv("STUB_DEVICE_DELAY_MS");
    long ms;
    struct timespec ts;

    if (ms_text == NULL)
        return;
    ms = strtol(ms_text, NULL, 10);
    if (ms <= 0)
        return;
    ts.tv_sec = ms / 1000;
    ts.tv_nsec = (ms % 1000) * 1000000L;
    nanosleep(&ts, NULL);
}
#endif

/* ---- binary16 <-> binary32/binary64, round-to-nearest-even ---------- */

static float half_to_float(uint16_t h)
{
    uint32_t sign = (uint32_t)(h & 0x8000u) << 16;
    uint32_t exponent = (h >> 10) & 0x1fu;
    uint32_t mantissa = h & 0x3ffu;
    uint32_t bits;
    float out;

    if (exponent == 0u) {
        if (mantissa == 0u) {
            bits = sign;
        } else {
            int shift = 0;
            while (!(mantissa & 0x400u)) {
                mantissa <<= 1;
                shift++;
            }
            bits = sign | ((uint32_t)(113 - shift) << 23)
                 | ((mantissa & 0x3ffu) << 13);
        }
    } else if (exponent == 0x1fu) {
        bits = sign | 0x7f800000u | (mantissa << 13);
    } else {
        bits = sign | ((exponent + 112u) << 23) | (mantissa << 13);
    }
    memcpy(&out, &bits, sizeof out);
    return out;
}

static uint16_t float_to_half(float f)
{
    uint32_t bits;
    uint16_t sign;
    uint32_t exponent, mantissa;

    memcpy(&bits, &f, sizeof bits);
    sign = (uint16_t)((bits >> 16) & 0x8000u);
    exponent = bits & 0x7f800000u;
    mantissa = bits & 0x007fffffu;

    if (exponent >= 0x47800000u) {          /* >= 2^16, inf, or nan */
        if (exponent == 0x7f800000u && mantissa != 0u) {
            uint16_t payload = (uint16_t)(mantissa >> 13);
            return sign | 0x7c00u | (payload != 0u ? payload : 1u);
        }
        return sign | 0x7c00u;
    }
    if (exponent <= 0x38000000u) {          /* subnormal half or zero */
        uint32_t shift, sig, lost;

        if (exponent < 0x33000000u)
            return sign;                    /* underflows to signed zero */
        shift = 113u - (exponent >> 23);
        sig = 0x00800000u | mantissa;
        lost = sig & ((1u << shift) - 1u);  /* sticky bits the shift drops */
        sig >>= shift;
        if ((sig & 0x3fffu) != 0x1000u || lost != 0u)
            sig += 0x1000u;
        return sign + (uint16_t)(sig >> 13);
    }
    /* normal range; a mantissa carry rolls into the exponent, and at
     * e = 15 that overflow lands exactly on the infinity encoding */
    if ((mantissa & 0x3fffu) != 0x1000u)
        mantissa += 0x1000u;
    return sign + (uint16_t)((exponent - 0x38000000u) >> 13)
         + (uint16_t)(mantissa >> 13);
}

static uint16_t double_to_half(double d)
{
    uint64_t bits;
    uint16_t sign;
    uint64_t exponent, mantissa;

    memcpy(&bits, &d, sizeof bits);
    sign = (uint16_t)((bits >> 48) & 0x8000u);
    exponent = bits & 0x7ff0000000000000ull;
    mantissa = bits & 0x000fffffffffffffull;

    if (exponent >= 0x40f0000000000000ull) {    /* >= 2^16, inf, or nan */
        if (exponent == 0x7ff0000000000000ull && mantissa != 0u) {
            uint16_t payload = (uint16_t)(mantissa >> 42);
            return sign | 0x7c00u | (payload != 0u ? payload : 1u);
        }
        return sign | 0x7c00u;
    }
    if (exponent <= 0x3f00000000000000ull) {    /* subnormal half or zero */
        uint64_t sig;

        if (exponent < 0x3e60000000000000ull)
            return sign;
        /* doubles have room to shift left, so no sticky bits are lost */
        sig = 0x0010000000000000ull | mantissa;
        sig <<= ((exponent >> 52) - 998u);
        if ((sig & 0x003fffffffffffffull) != 0x0010000000000000ull)
            sig += 0x0010000000000000ull;
        return sign + (uint16_t)(sig >> 53);
    }
    if ((mantissa & 0x000007ffffffffffull) != 0x0000020000000000ull)
        mantissa += 0x0000020000000000ull;
    return sign + (uint16_t)((exponent - 0x3f00000000000000ull) >> 42)
         + (uint16_t)(mantissa >> 42);
}

static uint16_t half_add(uint16_t a, uint16_t b)
{
    return float_to_half(half_to_float(a) + half_to_float(b));
}

static uint16_t half_sub(uint16_t a, uint16_t b)
{
    return float_to_half(half_to_float(a) - half_to_float(b));
}

static uint16_t half_mul(uint16_t a, uint16_t b)
{
    return float_to_half(half_to_float(a) * half_to_float(b));
}

/* ---- the escape-time recurrence, one body per working precision ---- */

static int32_t iterate_double(double cr, double ci, int32_t max_iter)
{
    double zr = 0.0, zi = 0.0;
    int32_t count = 0;
    int32_t n;

    for (n = 0; n < max_iter; n++) {
        double zr2 = zr * zr;
        double zi2 = zi * zi;
        double t, zrzi;

        if (!(zr2 + zi2 <= 4.0))        /* false for NaN too */
            break;
        count++;
        t = (zr2 - zi2) + cr;
        zrzi = zr * zi;
        zi = (zrzi + zrzi) + ci;
        zr = t;
    }
    return count;
}

static int32_t iterate_single(float cr, float ci, int32_t max_iter)
{
    float zr = 0.0f, zi = 0.0f;
    int32_t count = 0;
    int32_t n;

    for (n = 0; n < max_iter; n++) {
        float zr2 = zr * zr;
        float zi2 = zi * zi;
        float t, zrzi;

        if (!(zr2 + zi2 <= 4.0f))
            break;
        count++;
        t = (zr2 - zi2) + cr;
        zrzi = zr * zi;
        zi = (zrzi + zrzi) + ci;
        zr = t;
    }
    return count;
}

static int32_t iterate_half(uint16_t cr, uint16_t ci, int32_t max_iter)
{
    uint16_t zr = 0u, zi = 0u;
    int32_t count = 0;
    int32_t n;

    for (n = 0; n < max_iter; n++) {
        uint16_t zr2 = half_mul(zr, zr);
        uint16_t zi2 = half_mul(zi, zi);
        uint16_t r2 = half_add(zr2, zi2);
        uint16_t t, zrzi;

        if (!(half_to_float(r2) <= 4.0f))
            break;
        count++;
        t = half_add(half_sub(zr2, zi2), cr);
        zrzi = half_mul(zr, zi);
        zi = half_add(half_add(zrzi, zrzi), ci);
        zr = t;
    }
    return count;
}

/* ---- exported ABI --------------------------------------------------- */

int stub_render_rows(double x1, double y1, double x2, double y2,
                     int32_t width, int32_t height, int32_t max_iter,
                     int32_t precision_code, int32_t row_start,
                     int32_t row_count, int32_t *out)
{
    int status = 0;
    double xstep, ystep;
    int32_t r, k;

    atomic_fetch_add(&total_entries, 1);
    atomic_fetch_add(&active_entries, 1);
#ifdef STUB_TEST_HOOKS
    test_hook_delay();
#endif

    if (precision_code < 0 || precision_code > 2) {
        status = 1;
        goto done;
    }
    if (out == NULL) {
        status = 2;
        goto done;
    }
    if (width < 1 || height < 1 || max_iter < 1 || row_start < 0
            || row_count < 0
            || (int64_t)row_start + row_count > height) {
        status = 3;
        goto done;
    }

    xstep = (x2 - x1) / width;
    ystep = (y1 - y2) / height;
    for (r = 0; r < row_count; r++) {
        double cim = y1 - (double)(row_start + r) * ystep;
        int32_t *row = out + (size_t)r * (size_t)width;

        switch (precision_code) {
        case 0: {
            uint16_t cim_h = double_to_half(cim);
            for (k = 0; k < width; k++) {
                double cre = x1 + (double)k * xstep;
                row[k] = iterate_half(double_to_half(cre), cim_h, max_iter);
            }
            break;
        }
        case 1: {
            float cim_s = (float)cim;
            for (k = 0; k < width; k++) {
                double cre = x1 + (double)k * xstep;
                row[k] = iterate_single((float)cre, cim_s, max_iter);
            }
            break;
        }
        default: {
            for (k = 0; k < width; k++) {
                double cre = x1 + (double)k * xstep;
                row[k] = iterate_double(cre, cim, max_iter);
            }
            break;
        }
        }
    }

done:
    atomic_fetch_sub(&active_entries, 1);
    return status;
}

int stub_counters(int64_t *out)
{
    if (out == NULL)
        return 2;
    out[0] = atomic_load(&active_entries);
    out[1] = atomic_load(&total_entries);
    out[2] = load_generation;
    return 0;
}

int stub_version(void)
{
    return STUB_VERSION;
}
