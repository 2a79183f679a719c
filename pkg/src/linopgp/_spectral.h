/* Weighted cosine/sine sums over a fixed node set, written so that the
 * compiler can vectorise the trig evaluation.
 *
 * out[m] = sum_k cw[m*N + k] cos(om[k] x) + sw[m*N + k] sin(om[k] x)
 *
 * sin/cos use a three-part pi/2 reduction and the cephes minimax polynomials
 * on [-pi/4, pi/4]; absolute error is below 1e-15 for |om x| < REDUCE_MAX.
 * Larger arguments fall back to libm.
 */
#ifndef LINOPGP_SPECTRAL_H
#define LINOPGP_SPECTRAL_H

#include <math.h>
#include <stddef.h>

#define REDUCE_MAX 1.0e5

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
#define LINOPGP_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define LINOPGP_CLONES
#endif

static const double PIO2_1 = 1.57079632673412561417e+00;
static const double PIO2_2 = 6.07710050630396597660e-11;
static const double PIO2_3 = 2.02226624879595063154e-21;
static const double TWO_OVER_PI = 6.36619772367581382433e-01;

/* round to nearest for |v| < 2^51 without calling rint/floor, which keeps the
 * loop vectorisable on baseline SSE2; needs strict IEEE evaluation order */
#define ROUND_MAGIC 6755399441055744.0

LINOPGP_CLONES
static void trig_block(const double *om, ptrdiff_t N, double x, double *cs, double *sn)
{
    ptrdiff_t k;
    for (k = 0; k < N; k++) {
        double t = om[k] * x;
        double q = (t * TWO_OVER_PI + ROUND_MAGIC) - ROUND_MAGIC;
        double r = ((t - q * PIO2_1) - q * PIO2_2) - q * PIO2_3;
        double z = r * r;
        double s = r + r * z * ((((((1.58962301576546568060e-10 * z
                    - 2.50507477628578072866e-8) * z + 2.75573136213857245213e-6) * z
                    - 1.98412698295895385996e-4) * z + 8.33333333332211858878e-3) * z
                    - 1.66666666666666307295e-1));
        double c = 1.0 - 0.5 * z + z * z * ((((((-1.13585365213876817300e-11 * z
                    + 2.08757008419747316778e-9) * z - 2.75573141792967388112e-7) * z
                    + 2.48015872888517045348e-5) * z - 1.38888888888730564116e-3) * z
                    + 4.16666666666665929218e-2));
        /* quadrant n = q mod 4 as n = 2h + odd with h, odd in {0, 1} */
        double n = q - 4.0 * ((0.25 * q - 0.375 + ROUND_MAGIC) - ROUND_MAGIC);
        double h = (0.5 * n - 0.25 + ROUND_MAGIC) - ROUND_MAGIC;
        double odd = n - 2.0 * h;
        double ss = odd != 0.0 ? c : s;
        double cc = odd != 0.0 ? s : c;
        double sgn_s = 1.0 - 2.0 * h;
        double sgn_c = 1.0 - 2.0 * (odd + h - 2.0 * odd * h);
        sn[k] = sgn_s * ss;
        cs[k] = sgn_c * cc;
    }
}

LINOPGP_CLONES
static double dot2(const double *a, const double *b, const double *c, const double *d, ptrdiff_t N)
{
    ptrdiff_t k;
    double acc = 0.0;
    for (k = 0; k < N; k++)
        acc += a[k] * b[k] + c[k] * d[k];
    return acc;
}

static void spectral_row(const double *om, ptrdiff_t N, double x, const double *cw,
                         const double *sw, ptrdiff_t M, double *cs, double *sn, double *out)
{
    ptrdiff_t k, m;
    double big = 0.0;
    for (k = 0; k < N; k++) {
        double a = fabs(om[k] * x);
        big = a > big ? a : big;
    }
    if (big < REDUCE_MAX) {
        trig_block(om, N, x, cs, sn);
    } else {
        for (k = 0; k < N; k++) {
            cs[k] = cos(om[k] * x);
            sn[k] = sin(om[k] * x);
        }
    }
    for (m = 0; m < M; m++)
        out[m] = dot2(cw + m * N, cs, sw + m * N, sn, N);
}

#endif
