# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Gibbs/Metropolis chain for the phase-noise posterior."""

from libc.math cimport cos, sin, exp, log, sqrt, pow


def run_chain(
    const double[::1] y_re,
    const double[::1] y_im,
    double P,
    double s2,
    double c,
    Py_ssize_t burn_in,
    double step,
    bint adapt,
    double target,
    const double[:, :, ::1] xnorm,
    const double[:, ::1] vnorm,
    const double[::1] unif,
    bint prior_only,
    double[:, ::1] out_re,
    double[:, ::1] out_im,
    double[:, ::1] z_out,
):
    cdef Py_ssize_t n_iters = xnorm.shape[0]
    cdef Py_ssize_t B = y_re.shape[0]
    cdef Py_ssize_t t, i, r
    cdef double k = P / (P + s2)
    cdef double sd = sqrt(0.5 * P * s2 / (P + s2))
    cdef double log_step = log(step)
    cdef double eps = step
    cdef double acc, la, cs, sn, dr, di, cum_new, cum_old, zn, lr
    cdef long accepted = 0
    cdef double[64] z
    cdef double[64] zp
    cdef double[64] phi
    cdef double[64] xr
    cdef double[64] xi
    if B > 64:
        raise ValueError("block length above 64 is not supported by the compiled kernel")
    for i in range(B):
        z[i] = 0.0
        phi[i] = 0.0
        xr[i] = k * y_re[i]
        xi[i] = k * y_im[i]
    for t in range(n_iters):
        # step A: x | phi, y
        for i in range(B):
            cs = cos(phi[i])
            sn = sin(phi[i])
            xr[i] = k * (cs * y_re[i] + sn * y_im[i]) + sd * xnorm[t, i, 0]
            xi[i] = k * (cs * y_im[i] - sn * y_re[i]) + sd * xnorm[t, i, 1]
        # step B: random-walk move on the increments z
        lr = 0.0
        cum_new = 0.0
        for i in range(B):
            zp[i] = z[i] + eps * vnorm[t, i]
            cum_new += zp[i]
            lr += 0.5 * (z[i] * z[i] - zp[i] * zp[i])
            if not prior_only:
                cs = cos(c * cum_new)
                sn = sin(c * cum_new)
                dr = y_re[i] - (cs * xr[i] - sn * xi[i])
                di = y_im[i] - (sn * xr[i] + cs * xi[i])
                lr -= (dr * dr + di * di) / s2
                cs = cos(phi[i])
                sn = sin(phi[i])
                dr = y_re[i] - (cs * xr[i] - sn * xi[i])
                di = y_im[i] - (sn * xr[i] + cs * xi[i])
                lr += (dr * dr + di * di) / s2
        acc = 1.0 if lr >= 0.0 else exp(lr)
        if unif[t] < acc:
            cum_new = 0.0
            for i in range(B):
                z[i] = zp[i]
                cum_new += z[i]
                phi[i] = c * cum_new
            if t >= burn_in:
                accepted += 1
        if t < burn_in:
            if adapt:
                log_step += pow(t + 1.0, -0.6) * (acc - target)
                eps = exp(log_step)
        else:
            r = t - burn_in
            for i in range(B):
                out_re[r, i] = xr[i]
                out_im[r, i] = xi[i]
                z_out[r, i] = z[i]
    return accepted, eps
