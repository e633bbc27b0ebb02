"""Independent reference implementations used to check the library.

Nothing here imports the code under test except plain data containers, so a
shared bug cannot make both sides agree.
"""

import mpmath
import numpy as np

mpmath.mp.dps = 50


def absorption_db_per_km(f, t, s, ph, z):
    """Sea-water absorption, evaluated term by term at 50 digits."""
    f, t, s, ph, z = (mpmath.mpf(repr(float(v))) for v in (f, t, s, ph, z))
    f1 = mpmath.mpf("0.78") * mpmath.sqrt(s / 35) * mpmath.exp(t / 26)
    f2 = 42 * mpmath.exp(t / 17)
    a_b = mpmath.mpf("0.106") * (f1 * f ** 2 / (f ** 2 + f1 ** 2)) * mpmath.exp((ph - 8) / mpmath.mpf("0.56"))
    a_m = (mpmath.mpf("0.52") * (1 + t / 43) * (s / 35) * (f2 * f ** 2 / (f ** 2 + f2 ** 2))
           * mpmath.exp(-z / 6))
    a_f = mpmath.mpf("0.00049") * f ** 2 * mpmath.exp(-(t / 27 + z / 17))
    return a_b + a_m + a_f


def neper_per_db():
    """Conversion used by the decay model, 0.0115129... (ln 10 / 200)."""
    return mpmath.log(10) / 200


def pinhole_rays(position, rotation, fov_az, fov_el, width, height):
    """World-space unit ray per pixel center; row 0 is the top row."""
    th, tv = np.tan(fov_az / 2), np.tan(fov_el / 2)
    cols = (np.arange(width) + 0.5) / width
    rows = (np.arange(height) + 0.5) / height
    a = th * (2 * cols - 1)
    b = tv * (1 - 2 * rows)
    d = np.empty((height, width, 3))
    d[..., 0] = 1.0
    d[..., 1] = a[None, :]
    d[..., 2] = b[:, None]
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return d @ np.asarray(rotation).T


def ray_triangle_all(origins, dirs, tris, eps=1e-12):
    """t for every (ray, triangle) pair, inf on miss.  Plain Cramer's rule."""
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    e1, e2 = v1 - v0, v2 - v0
    out = np.full((len(origins), len(tris)), np.inf)
    for k in range(len(tris)):
        # solve o + t d = v0 + u e1 + v e2 as a 3x3 system per ray
        m = np.stack([-dirs, np.broadcast_to(e1[k], dirs.shape), np.broadcast_to(e2[k], dirs.shape)], axis=-1)
        det = np.linalg.det(m)
        ok = np.abs(det) > eps
        sol = np.full((len(origins), 3), np.nan)
        sol[ok] = np.linalg.solve(m[ok], (origins - v0[k])[ok][..., None])[..., 0]
        t, u, v = sol[:, 0], sol[:, 1], sol[:, 2]
        with np.errstate(invalid="ignore"):
            hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
        out[hit, k] = t[hit]
    return out


def face_normals(tris):
    n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def cast_depth(tris, position, rotation, fov_az, fov_el, width, height, rmin, rmax):
    """One ray per pixel: nearest front-facing hit with range in [rmin, rmax]."""
    dirs = pinhole_rays(position, rotation, fov_az, fov_el, width, height).reshape(-1, 3)
    origins = np.broadcast_to(np.asarray(position, dtype=float), dirs.shape)
    t = ray_triangle_all(origins, dirs, tris)
    front = (dirs @ face_normals(tris).T) < 0
    t = np.where(front & (t >= rmin) & (t <= rmax), t, np.inf)
    return t.min(axis=1).reshape(height, width)


def trace_secondary(position, gpos, gnrm, primary_intensity, tris, reflectivity,
                    offset=1e-4, eps=1e-6):
    """Brute-force single mirror bounce from every pixel with a nonzero normal.

    ``reflectivity`` is per triangle.  Returns (distance, intensity) images
    with inf / 0 where there is no front-facing secondary hit.
    """
    h, w = gnrm.shape[:2]
    dist = np.full(h * w, np.inf)
    inten = np.zeros(h * w)
    n = gnrm.reshape(-1, 3)
    sel = np.flatnonzero(np.any(n != 0, axis=1))
    if len(sel) == 0:
        return dist.reshape(h, w), inten.reshape(h, w)
    p = gpos.reshape(-1, 3)[sel]
    n = n[sel]
    view = p - position
    d1 = np.linalg.norm(view, axis=1)
    view /= d1[:, None]
    r = view - 2 * np.sum(view * n, axis=1)[:, None] * n
    r /= np.linalg.norm(r, axis=1, keepdims=True)
    t = ray_triangle_all(p + offset * r, r, tris)
    t[t <= eps] = np.inf
    k = np.argmin(t, axis=1)
    tk = t[np.arange(len(sel)), k]
    cos = -np.sum(r * face_normals(tris)[k], axis=1)
    keep = np.isfinite(tk) & (cos > 0)
    idx = sel[keep]
    dist[idx] = d1[keep] + offset + tk[keep]
    inten[idx] = np.clip(cos[keep] * reflectivity[k[keep]] * primary_intensity.ravel()[idx], 0, 1)
    return dist.reshape(h, w), inten.reshape(h, w)


def constant_ssim(a, b, k1=0.01, k2=0.03, peak=1.0):
    """SSIM of two constant images.

    Both variances and the covariance vanish, so the contrast-structure term
    is c2 / c2 = 1 and only the luminance term survives.
    """
    c1 = (k1 * peak) ** 2
    return (2 * a * b + c1) / (a * a + b * b + c1)
