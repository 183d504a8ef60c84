"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written as plain scalar loops from the
definitions (kernel formula, loss formulas, metric formulas, the ancestral
update line) and shares no code with src/.
"""

import math

import numpy as np


# ---------------------------------------------------------------- bicubic

def cubic_kernel_ref(x, a=-0.5):
    x = abs(x)
    if x <= 1.0:
        return (a + 2.0) * x**3 - (a + 3.0) * x**2 + 1.0
    if x < 2.0:
        return a * x**3 - 5.0 * a * x**2 + 8.0 * a * x - 4.0 * a
    return 0.0


def reflect_ref(i, n):
    # symmetric reflection, edge sample included: -1 -> 0, n -> n-1
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        if i >= n:
            i = 2 * n - 1 - i
    return i


def bicubic_matrix_ref(n_in, n_out):
    """Dense [n_out, n_in] resampling matrix from the kernel definition."""
    ratio = n_in / n_out
    fscale = ratio if ratio > 1.0 else 1.0
    mat = np.zeros((n_out, n_in))
    for i in range(n_out):
        center = (i + 0.5) * ratio - 0.5
        lo = int(math.floor(center - 2.0 * fscale)) + 1
        hi = int(math.ceil(center + 2.0 * fscale))
        weights = []
        cols = []
        for j in range(lo, hi + 1):
            w = cubic_kernel_ref((j - center) / fscale)
            weights.append(w)
            cols.append(reflect_ref(j, n_in))
        total = sum(weights)
        for col, w in zip(cols, weights):
            mat[i, col] += w / total
    return mat


def resize_band_ref(band, out_h, out_w):
    rows = bicubic_matrix_ref(band.shape[0], out_h)
    cols = bicubic_matrix_ref(band.shape[1], out_w)
    return rows @ np.asarray(band, dtype=np.float64) @ cols.T


# ---------------------------------------------------------------- losses

def loss_l1_ref(re, hr):
    re, hr = np.asarray(re, np.float64), np.asarray(hr, np.float64)
    total = 0.0
    for v1, v2 in zip(re.ravel(), hr.ravel()):
        total += abs(v1 - v2)
    return total / re.size


def loss_sam_ref(re, hr, eps=1e-8):
    """re, hr: (N, C, H, W). Mean over samples and pixels of angle / pi."""
    re, hr = np.asarray(re, np.float64), np.asarray(hr, np.float64)
    n, c, h, w = re.shape
    total = 0.0
    for s in range(n):
        for i in range(h):
            for j in range(w):
                dot = 0.0
                na = 0.0
                nb = 0.0
                for b in range(c):
                    dot += re[s, b, i, j] * hr[s, b, i, j]
                    na += re[s, b, i, j] ** 2
                    nb += hr[s, b, i, j] ** 2
                cos = dot / max(math.sqrt(na) * math.sqrt(nb), eps)
                cos = max(-1.0, min(1.0, cos))
                total += math.acos(cos) / math.pi
    return total / (n * h * w)


def loss_gradient_ref(re, hr):
    re, hr = np.asarray(re, np.float64), np.asarray(hr, np.float64)

    def field_diffs(x):
        n, c, h, w = x.shape
        out = []
        for s in range(n):
            for b in range(c):
                for i in range(h - 1):
                    for j in range(w):
                        out.append(x[s, b, i + 1, j] - x[s, b, i, j])
        for s in range(n):
            for b in range(c):
                for i in range(h):
                    for j in range(w - 1):
                        out.append(x[s, b, i, j + 1] - x[s, b, i, j])
        for s in range(n):
            for b in range(c - 1):
                for i in range(h):
                    for j in range(w):
                        out.append(x[s, b + 1, i, j] - x[s, b, i, j])
        return out

    dr = field_diffs(re)
    dh = field_diffs(hr)
    return sum(abs(a - b) for a, b in zip(dr, dh)) / len(dr)


# ---------------------------------------------------------------- metrics

def mpsnr_ref(ref, cand):
    ref, cand = np.asarray(ref, np.float64), np.asarray(cand, np.float64)
    h, w, c = ref.shape
    vals = []
    for b in range(c):
        se = 0.0
        for i in range(h):
            for j in range(w):
                se += (ref[i, j, b] - cand[i, j, b]) ** 2
        mse = se / (h * w)
        vals.append(float("inf") if mse == 0 else 10.0 * math.log10(1.0 / mse))
    return sum(vals) / c


def rmse_ref(ref, cand):
    ref, cand = np.asarray(ref, np.float64), np.asarray(cand, np.float64)
    se = 0.0
    for a, b in zip(ref.ravel(), cand.ravel()):
        se += (a - b) ** 2
    return math.sqrt(se / ref.size)


def sam_deg_ref(ref, cand, eps=1e-8):
    ref, cand = np.asarray(ref, np.float64), np.asarray(cand, np.float64)
    h, w, c = ref.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            dot = sum(ref[i, j, b] * cand[i, j, b] for b in range(c))
            na = math.sqrt(sum(ref[i, j, b] ** 2 for b in range(c)))
            nb = math.sqrt(sum(cand[i, j, b] ** 2 for b in range(c)))
            cos = max(-1.0, min(1.0, dot / max(na * nb, eps)))
            total += math.degrees(math.acos(cos))
    return total / (h * w)


def cc_ref(ref, cand):
    ref, cand = np.asarray(ref, np.float64), np.asarray(cand, np.float64)
    h, w, c = ref.shape
    vals = []
    for b in range(c):
        xs = [ref[i, j, b] for i in range(h) for j in range(w)]
        ys = [cand[i, j, b] for i in range(h) for j in range(w)]
        mx = sum(xs) / len(xs)
        my = sum(ys) / len(ys)
        cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / len(xs)
        sx = math.sqrt(sum((x - mx) ** 2 for x in xs) / len(xs))
        sy = math.sqrt(sum((y - my) ** 2 for y in ys) / len(ys))
        vals.append(cov / (sx * sy))
    return sum(vals) / c


def ergas_ref(ref, cand, scale, eps=1e-8):
    ref, cand = np.asarray(ref, np.float64), np.asarray(cand, np.float64)
    h, w, c = ref.shape
    terms = []
    for b in range(c):
        se = 0.0
        mu = 0.0
        for i in range(h):
            for j in range(w):
                se += (ref[i, j, b] - cand[i, j, b]) ** 2
                mu += ref[i, j, b]
        rm = math.sqrt(se / (h * w))
        mu /= h * w
        terms.append((rm / (mu + eps)) ** 2)
    return 100.0 / scale * math.sqrt(sum(terms) / c)


def gaussian_window_ref(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    g = [math.exp(-((k - half) ** 2) / (2 * sigma**2)) for k in range(size)]
    win = [[gi * gj for gj in g] for gi in g]
    total = sum(sum(row) for row in win)
    return [[v / total for v in row] for row in win]


def ssim_band_ref(x, y):
    """Per-pixel Gaussian-window SSIM with symmetric-reflect borders, then mean."""
    x = np.asarray(x, np.float64)
    y = np.asarray(y, np.float64)
    h, w = x.shape
    win = gaussian_window_ref()
    size = len(win)
    pad = size // 2
    c1, c2 = 0.01**2, 0.03**2
    total = 0.0
    for i in range(h):
        for j in range(w):
            mx = my = mxx = myy = mxy = 0.0
            for di in range(size):
                for dj in range(size):
                    ii = reflect_ref(i + di - pad, h)
                    jj = reflect_ref(j + dj - pad, w)
                    wgt = win[di][dj]
                    a, b = x[ii, jj], y[ii, jj]
                    mx += wgt * a
                    my += wgt * b
                    mxx += wgt * a * a
                    myy += wgt * b * b
                    mxy += wgt * a * b
            vx = mxx - mx * mx
            vy = myy - my * my
            cov = mxy - mx * my
            num = (2 * mx * my + c1) * (2 * cov + c2)
            den = (mx * mx + my * my + c1) * (vx + vy + c2)
            total += num / den
    return total / (h * w)


def mssim_ref(ref, cand):
    ref, cand = np.asarray(ref, np.float64), np.asarray(cand, np.float64)
    c = ref.shape[2]
    return sum(ssim_band_ref(ref[:, :, b], cand[:, :, b]) for b in range(c)) / c


# ---------------------------------------------------------------- diffusion

def ancestral_update_ref(z_t, alpha_t, alpha_bar_t, eps_pred, eps_draw):
    """Direct transcription of the reverse update line."""
    z_t = np.asarray(z_t, np.float64)
    eps_pred = np.asarray(eps_pred, np.float64)
    mean = (z_t - (1.0 - alpha_t) / math.sqrt(1.0 - alpha_bar_t) * eps_pred) / math.sqrt(alpha_t)
    if eps_draw is None:
        return mean
    return mean + math.sqrt(1.0 - alpha_t) * np.asarray(eps_draw, np.float64)
