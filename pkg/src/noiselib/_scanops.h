#ifndef NOISELIB_SCANOPS_H
#define NOISELIB_SCANOPS_H

#include <stddef.h>
#include <stdint.h>

void nl_screen_f16(const uint16_t *mat16, const float *q, float *out,
                   ptrdiff_t n, ptrdiff_t d);

float nl_kth_largest_f32(const float *s, ptrdiff_t n, int k);

ptrdiff_t nl_gather_ge_f32(const float *s, ptrdiff_t n, float thr,
                           int64_t *out_idx);

void nl_rescore_dot(const float *mat, const double *q, const int64_t *idx,
                    double *out, ptrdiff_t m, ptrdiff_t d);

/* modes: 0 dot, 1 negated mean squared diff, 2 negated euclidean,
   3 negated mean absolute diff */
void nl_dist_scan_f32(const float *mat, const double *q, double *out,
                      ptrdiff_t n, ptrdiff_t d, int mode);
void nl_dist_scan_f64(const double *mat, const double *q, double *out,
                      ptrdiff_t n, ptrdiff_t d, int mode);

ptrdiff_t nl_argmax_f64(const double *s, ptrdiff_t n);

#endif
