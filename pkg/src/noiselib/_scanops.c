/* Hot loops behind the retrieval engine.
 *
 * The full-library cosine scan reads a float16 shadow of the embedding
 * matrix (half the memory traffic of float32) with float32 accumulation;
 * callers re-score the few rows near the selection boundary in float64,
 * so the screen only has to be accurate to a provable bound, not exact.
 * Everything else accumulates in float64 directly.
 *
 * gcc will not auto-vectorize mixed-width reductions under strict IEEE
 * rules, hence the explicit AVX-512 / AVX2+F16C paths with a portable
 * scalar fallback.
 */

#include "_scanops.h"

#include <math.h>
#include <string.h>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

static float half_to_float(uint16_t h)
{
    uint32_t sign = (uint32_t)(h & 0x8000u) << 16;
    uint32_t exp = (h >> 10) & 0x1Fu;
    uint32_t man = h & 0x3FFu;
    uint32_t bits;

    if (exp == 0) {
        if (man == 0) {
            bits = sign;
        } else { /* subnormal half: renormalize into a float exponent */
            int shift = 0;
            while (!(man & 0x400u)) {
                man <<= 1;
                shift++;
            }
            man &= 0x3FFu;
            bits = sign | (uint32_t)(127 - 15 - shift) << 23 | man << 13;
        }
    } else if (exp == 31) {
        bits = sign | 0x7F800000u | man << 13;
    } else {
        bits = sign | (exp - 15 + 127) << 23 | man << 13;
    }
    {
        float f;
        memcpy(&f, &bits, sizeof f);
        return f;
    }
}

void nl_screen_f16(const uint16_t *mat16, const float *q, float *out,
                   ptrdiff_t n, ptrdiff_t d)
{
    ptrdiff_t i;
    for (i = 0; i < n; i++) {
        const uint16_t *row = mat16 + i * d;
        ptrdiff_t j = 0;
        float acc;
#if defined(__AVX512F__)
        __m512 a0 = _mm512_setzero_ps(), a1 = _mm512_setzero_ps();
        __m512 a2 = _mm512_setzero_ps(), a3 = _mm512_setzero_ps();
        for (; j + 64 <= d; j += 64) {
            a0 = _mm512_fmadd_ps(
                _mm512_cvtph_ps(_mm256_loadu_si256((const __m256i *)(row + j))),
                _mm512_loadu_ps(q + j), a0);
            a1 = _mm512_fmadd_ps(
                _mm512_cvtph_ps(_mm256_loadu_si256((const __m256i *)(row + j + 16))),
                _mm512_loadu_ps(q + j + 16), a1);
            a2 = _mm512_fmadd_ps(
                _mm512_cvtph_ps(_mm256_loadu_si256((const __m256i *)(row + j + 32))),
                _mm512_loadu_ps(q + j + 32), a2);
            a3 = _mm512_fmadd_ps(
                _mm512_cvtph_ps(_mm256_loadu_si256((const __m256i *)(row + j + 48))),
                _mm512_loadu_ps(q + j + 48), a3);
        }
        acc = _mm512_reduce_add_ps(
            _mm512_add_ps(_mm512_add_ps(a0, a1), _mm512_add_ps(a2, a3)));
#elif defined(__AVX2__) && defined(__F16C__)
        __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps();
        __m256 a2 = _mm256_setzero_ps(), a3 = _mm256_setzero_ps();
        float lanes[8];
        for (; j + 32 <= d; j += 32) {
            a0 = _mm256_fmadd_ps(
                _mm256_cvtph_ps(_mm_loadu_si128((const __m128i *)(row + j))),
                _mm256_loadu_ps(q + j), a0);
            a1 = _mm256_fmadd_ps(
                _mm256_cvtph_ps(_mm_loadu_si128((const __m128i *)(row + j + 8))),
                _mm256_loadu_ps(q + j + 8), a1);
            a2 = _mm256_fmadd_ps(
                _mm256_cvtph_ps(_mm_loadu_si128((const __m128i *)(row + j + 16))),
                _mm256_loadu_ps(q + j + 16), a2);
            a3 = _mm256_fmadd_ps(
                _mm256_cvtph_ps(_mm_loadu_si128((const __m128i *)(row + j + 24))),
                _mm256_loadu_ps(q + j + 24), a3);
        }
        _mm256_storeu_ps(lanes,
            _mm256_add_ps(_mm256_add_ps(a0, a1), _mm256_add_ps(a2, a3)));
        acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
            + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
#else
        float l0 = 0.f, l1 = 0.f, l2 = 0.f, l3 = 0.f;
        for (; j + 4 <= d; j += 4) {
            l0 += half_to_float(row[j]) * q[j];
            l1 += half_to_float(row[j + 1]) * q[j + 1];
            l2 += half_to_float(row[j + 2]) * q[j + 2];
            l3 += half_to_float(row[j + 3]) * q[j + 3];
        }
        acc = (l0 + l1) + (l2 + l3);
#endif
        for (; j < d; j++)
            acc += half_to_float(row[j]) * q[j];
        out[i] = acc;
    }
}

float nl_kth_largest_f32(const float *s, ptrdiff_t n, int k)
{
    /* Ascending insertion buffer of the current top-k; buf[0] is the
     * running k-th largest. Callers bound k (<= 1024). */
    float buf[1024];
    int filled = 0;
    ptrdiff_t i;

    for (i = 0; i < n; i++) {
        float v = s[i];
        if (filled < k) {
            int j = filled++;
            while (j > 0 && buf[j - 1] > v) {
                buf[j] = buf[j - 1];
                j--;
            }
            buf[j] = v;
        } else if (v > buf[0]) {
            int j = 0;
            while (j + 1 < k && buf[j + 1] < v) {
                buf[j] = buf[j + 1];
                j++;
            }
            buf[j] = v;
        }
    }
    return buf[0];
}

ptrdiff_t nl_gather_ge_f32(const float *s, ptrdiff_t n, float thr,
                           int64_t *out_idx)
{
    ptrdiff_t i, m = 0;
    for (i = 0; i < n; i++)
        if (s[i] >= thr)
            out_idx[m++] = (int64_t)i;
    return m;
}

void nl_rescore_dot(const float *mat, const double *q, const int64_t *idx,
                    double *out, ptrdiff_t m, ptrdiff_t d)
{
    ptrdiff_t t;
    for (t = 0; t < m; t++) {
        const float *row = mat + (ptrdiff_t)idx[t] * d;
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        ptrdiff_t j = 0;
        for (; j + 4 <= d; j += 4) {
            a0 += (double)row[j] * q[j];
            a1 += (double)row[j + 1] * q[j + 1];
            a2 += (double)row[j + 2] * q[j + 2];
            a3 += (double)row[j + 3] * q[j + 3];
        }
        for (; j < d; j++)
            a0 += (double)row[j] * q[j];
        out[t] = (a0 + a1) + (a2 + a3);
    }
}

void nl_dist_scan_f32(const float *mat, const double *q, double *out,
                      ptrdiff_t n, ptrdiff_t d, int mode)
{
    ptrdiff_t i;
    for (i = 0; i < n; i++) {
        const float *row = mat + i * d;
        ptrdiff_t j;
        double acc = 0.0;
        switch (mode) {
        case 0:
            #pragma omp simd reduction(+:acc)
            for (j = 0; j < d; j++)
                acc += (double)row[j] * q[j];
            out[i] = acc;
            break;
        case 1:
            #pragma omp simd reduction(+:acc)
            for (j = 0; j < d; j++) {
                double diff = (double)row[j] - q[j];
                acc += diff * diff;
            }
            out[i] = -acc / (double)d;
            break;
        case 2:
            #pragma omp simd reduction(+:acc)
            for (j = 0; j < d; j++) {
                double diff = (double)row[j] - q[j];
                acc += diff * diff;
            }
            out[i] = -sqrt(acc);
            break;
        default:
            #pragma omp simd reduction(+:acc)
            for (j = 0; j < d; j++)
                acc += fabs((double)row[j] - q[j]);
            out[i] = -acc / (double)d;
            break;
        }
    }
}

void nl_dist_scan_f64(const double *mat, const double *q, double *out,
                      ptrdiff_t n, ptrdiff_t d, int mode)
{
    ptrdiff_t i;
    for (i = 0; i < n; i++) {
        const double *row = mat + i * d;
        ptrdiff_t j;
        double acc = 0.0;
        switch (mode) {
        case 0:
            #pragma omp simd reduction(+:acc)
            for (j = 0; j < d; j++)
                acc += row[j] * q[j];
            out[i] = acc;
            break;
        case 1:
            #pragma omp simd reduction(+:acc)
            for (j = 0; j < d; j++) {
                double diff = row[j] - q[j];
                acc += diff * diff;
            }
            out[i] = -acc / (double)d;
            break;
        case 2:
            #pragma omp simd reduction(+:acc)
            for (j = 0; j < d; j++) {
                double diff = row[j] - q[j];
                acc += diff * diff;
            }
            out[i] = -sqrt(acc);
            break;
        default:
            #pragma omp simd reduction(+:acc)
            for (j = 0; j < d; j++)
                acc += fabs(row[j] - q[j]);
            out[i] = -acc / (double)d;
            break;
        }
    }
}

ptrdiff_t nl_argmax_f64(const double *s, ptrdiff_t n)
{
    ptrdiff_t i, best = 0;
    double bv = s[0];
    for (i = 1; i < n; i++) {
        if (s[i] > bv) {
            bv = s[i];
            best = i;
        }
    }
    return best;
}
