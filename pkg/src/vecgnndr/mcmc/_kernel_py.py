"""Pure-Python twin of the compiled chain kernel.

The loop mirrors ``_kernel.pyx`` operation by operation and uses the scalar
``math`` functions, so both backends consume the same pre-drawn random
numbers and produce the same trajectory.
"""

from __future__ import annotations

import math


def run_chain(y_re, y_im, P, s2, c, burn_in, step, adapt, target, xnorm, vnorm, unif, prior_only, out_re, out_im, z_out):
    n_iters = xnorm.shape[0]
    B = y_re.shape[0]
    y_re = [float(a) for a in y_re]
    y_im = [float(a) for a in y_im]
    xn = xnorm.tolist()
    vn = vnorm.tolist()
    un = unif.tolist()
    k = P / (P + s2)
    sd = math.sqrt(0.5 * P * s2 / (P + s2))
    log_step = math.log(step)
    eps = step
    accepted = 0
    z = [0.0] * B
    zp = [0.0] * B
    phi = [0.0] * B
    xr = [k * a for a in y_re]
    xi = [k * a for a in y_im]
    for t in range(n_iters):
        xt = xn[t]
        for i in range(B):
            cs = math.cos(phi[i])
            sn = math.sin(phi[i])
            xr[i] = k * (cs * y_re[i] + sn * y_im[i]) + sd * xt[i][0]
            xi[i] = k * (cs * y_im[i] - sn * y_re[i]) + sd * xt[i][1]
        lr = 0.0
        cum_new = 0.0
        vt = vn[t]
        for i in range(B):
            zp[i] = z[i] + eps * vt[i]
            cum_new += zp[i]
            lr += 0.5 * (z[i] * z[i] - zp[i] * zp[i])
            if not prior_only:
                cs = math.cos(c * cum_new)
                sn = math.sin(c * cum_new)
                dr = y_re[i] - (cs * xr[i] - sn * xi[i])
                di = y_im[i] - (sn * xr[i] + cs * xi[i])
                lr -= (dr * dr + di * di) / s2
                cs = math.cos(phi[i])
                sn = math.sin(phi[i])
                dr = y_re[i] - (cs * xr[i] - sn * xi[i])
                di = y_im[i] - (sn * xr[i] + cs * xi[i])
                lr += (dr * dr + di * di) / s2
        acc = 1.0 if lr >= 0.0 else math.exp(lr)
        if un[t] < acc:
            cum_new = 0.0
            for i in range(B):
                z[i] = zp[i]
                cum_new += z[i]
                phi[i] = c * cum_new
            if t >= burn_in:
                accepted += 1
        if t < burn_in:
            if adapt:
                log_step += (t + 1.0) ** -0.6 * (acc - target)
                eps = math.exp(log_step)
        else:
            r = t - burn_in
            out_re[r, :] = xr
            out_im[r, :] = xi
            z_out[r, :] = z
    return accepted, eps
