"""Low-level computational-aesthetics features for single frames.

The 59-dim block, in order:

    ====  ===================================================
    0     contrast (luminance range / mean luminance)
    1-3   mean H, S, V over the whole image (H circular)
    4-6   mean H, S, V over the central half-width/half-height
    7-26  Itten histograms: H (12 bins), S (5), V (3)
    27-29 population std of each Itten histogram
    30-32 pleasure, arousal, dominance
    33-45 13 Haralick statistics averaged over 0/45/90/135 degrees
    46    contrast balance
    47    exposure quality
    48    no-reference JPEG quality
    49    Tenengrad sharpness
    50-58 spectral-residual saliency mass in a 3x3 grid
    ====  ===================================================

Frame vectors append face count, salient-face count and the binary
aesthetic score (dims 59-61).  Degenerate inputs (zero variance, all black)
map to 0 or the no-distortion limit so every function is total.
"""

from __future__ import annotations

import csv

import numpy as np
from scipy import ndimage

from .errors import InputError
from .frame_quality import sharpness as _quality_sharpness
from .frame_quality import sobel
from .media_io import Frame, to_grayscale, to_hsv

AESTHETIC_BLOCKS = {
    "contrast": 1,
    "image_mean_hsv": 3,
    "center_mean_hsv": 3,
    "itten_histograms": 20,
    "itten_contrasts": 3,
    "pad": 3,
    "haralick": 13,
    "contrast_balance": 1,
    "exposure_quality": 1,
    "jpeg_quality": 1,
    "tenengrad": 1,
    "spectral_thirds": 9,
}
AESTHETIC_DIM = sum(AESTHETIC_BLOCKS.values())  # 59
FRAME_DIM = AESTHETIC_DIM + 3  # 62
FACE_DIMS = (59, 60)
AESTHETIC_BIT_DIM = 61

ITTEN_BINS = (12, 5, 3)
HARALICK_LEVELS = 32
HARALICK_NAMES = (
    "asm", "contrast", "correlation", "variance", "idm", "sum_average", "sum_variance",
    "sum_entropy", "entropy", "difference_variance", "difference_entropy", "imc1", "imc2",
)
# Valdez & Mehrabian (1994) colour-emotion regression on brightness/saturation.
PAD_COEFFS = np.array([
    [0.69, 0.22],    # pleasure
    [-0.31, 0.60],   # arousal
    [-0.76, 0.32],   # dominance
])
# Wang, Sheikh & Bovik (2002) no-reference JPEG model.
JPEG_ALPHA, JPEG_BETA = -245.9, 261.9
JPEG_GAMMAS = (-0.0240, 0.0160, 0.0064)
JPEG_NO_DISTORTION = 10.0
_JPEG_FLOOR = 1e-6

SALIENCY_SIDE = 64
SALIENCY_SIGMA = 2.5
# amplitude floor relative to the spectral peak; exact spectral zeros of
# synthetic content would otherwise dominate the log-amplitude residual
SALIENCY_FLOOR = 1e-2


# -- colour statistics ---------------------------------------------------------

def contrast(frame) -> float:
    lum = to_grayscale(frame, "unit")
    mean = float(lum.mean())
    if mean <= 0.0:
        return 0.0
    return float((lum.max() - lum.min()) / mean)


def _circular_mean_deg(h: np.ndarray) -> float:
    rad = np.radians(h)
    s, c = float(np.sin(rad).mean()), float(np.cos(rad).mean())
    if abs(s) < 1e-12 and abs(c) < 1e-12:
        return 0.0
    deg = float(np.degrees(np.arctan2(s, c)))
    if abs(deg) < 1e-9:
        return 0.0
    return deg % 360.0


def _center(a: np.ndarray) -> np.ndarray:
    h, w = a.shape[:2]
    r0, c0 = h // 4, w // 4
    return a[r0:max(r0 + 1, r0 + h // 2), c0:max(c0 + 1, c0 + w // 2)]


def _hsv_means(hsv: np.ndarray) -> list[float]:
    return [_circular_mean_deg(hsv[..., 0]), float(hsv[..., 1].mean()), float(hsv[..., 2].mean())]


def hsv_means(frame, hsv: np.ndarray | None = None) -> np.ndarray:
    """(H, S, V) over the whole image followed by (H, S, V) over the central region."""
    if hsv is None:
        hsv = to_hsv(frame)
    return np.array(_hsv_means(hsv) + _hsv_means(_center(hsv)))


def _unit_hist(values: np.ndarray, bins: int, upper: float) -> np.ndarray:
    idx = np.minimum((values.ravel() * (bins / upper)).astype(np.int64), bins - 1)
    h = np.bincount(idx, minlength=bins).astype(np.float64)
    return h / h.sum()


def itten(frame, hsv: np.ndarray | None = None) -> np.ndarray:
    """H/S/V histograms at 12/5/3 bins (each sums to 1) then each histogram's population std."""
    if hsv is None:
        hsv = to_hsv(frame)
    hists = [
        _unit_hist(hsv[..., 0], ITTEN_BINS[0], 360.0),
        _unit_hist(hsv[..., 1], ITTEN_BINS[1], 1.0),
        _unit_hist(hsv[..., 2], ITTEN_BINS[2], 1.0),
    ]
    return np.concatenate(hists + [np.array([h.std() for h in hists])])


def pad_from_means(mean_v: float, mean_s: float) -> np.ndarray:
    return PAD_COEFFS @ np.array([mean_v, mean_s])


def pad(frame, hsv: np.ndarray | None = None) -> np.ndarray:
    if hsv is None:
        hsv = to_hsv(frame)
    return pad_from_means(float(hsv[..., 2].mean()), float(hsv[..., 1].mean()))


# -- texture -------------------------------------------------------------------

_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1))  # 0, 45, 90, 135 degrees (row, col)


def quantize(gray_byte: np.ndarray, levels: int = HARALICK_LEVELS) -> np.ndarray:
    q = (np.asarray(gray_byte, dtype=np.float64) * (levels / 256.0)).astype(np.int64)
    return np.clip(q, 0, levels - 1)


def glcm(q: np.ndarray, offset: tuple[int, int], levels: int = HARALICK_LEVELS) -> np.ndarray:
    """Symmetric, normalised co-occurrence matrix for one pixel offset."""
    dr, dc = offset
    h, w = q.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    a = q[r0:r1, c0:c1].ravel()
    b = q[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel()
    counts = np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels)
    P = (counts + counts.T).astype(np.float64)
    total = P.sum()
    return P / total if total > 0 else P


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def haralick_from_glcm(P: np.ndarray) -> np.ndarray:
    levels = P.shape[0]
    if P.sum() <= 0:
        return np.zeros(13)
    i, j = np.indices(P.shape)
    k = np.arange(levels, dtype=np.float64)
    px, py = P.sum(axis=1), P.sum(axis=0)
    mu_x, mu_y = float(k @ px), float(k @ py)
    var_x = float(((k - mu_x) ** 2) @ px)
    var_y = float(((k - mu_y) ** 2) @ py)

    p_sum = np.bincount((i + j).ravel(), weights=P.ravel(), minlength=2 * levels - 1)
    p_diff = np.bincount(np.abs(i - j).ravel(), weights=P.ravel(), minlength=levels)
    ks = np.arange(2 * levels - 1, dtype=np.float64)

    asm = float((P * P).sum())
    contrast_ = float((k * k) @ p_diff)
    if var_x > 0 and var_y > 0:
        corr = (float((i * j * P).sum()) - mu_x * mu_y) / np.sqrt(var_x * var_y)
    else:
        corr = 0.0
    idm = float((P / (1.0 + (i - j) ** 2)).sum())
    sum_avg = float(ks @ p_sum)
    sum_var = float(((ks - sum_avg) ** 2) @ p_sum)
    sum_ent = _entropy(p_sum)
    ent = _entropy(P)
    d_mean = float(k @ p_diff)
    diff_var = float(((k - d_mean) ** 2) @ p_diff)
    diff_ent = _entropy(p_diff)

    hx, hy = _entropy(px), _entropy(py)
    pxy = np.outer(px, py)
    mask = P > 0
    hxy1 = float(-(P[mask] * np.log2(pxy[mask])).sum())
    hxy2 = _entropy(pxy)
    denom = max(hx, hy)
    imc1 = (ent - hxy1) / denom if denom > 0 else 0.0
    imc2 = float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - ent)))))
    return np.array([asm, contrast_, corr, var_x, idm, sum_avg, sum_var, sum_ent, ent,
                     diff_var, diff_ent, imc1, imc2])


def haralick(frame, gray_byte: np.ndarray | None = None) -> np.ndarray:
    """13 Haralick statistics on a 32-level quantisation, averaged over four directions."""
    if gray_byte is None:
        gray_byte = to_grayscale(frame, "byte")
    q = quantize(gray_byte)
    return np.mean([haralick_from_glcm(glcm(q, off)) for off in _OFFSETS], axis=0)


# -- tone ------------------------------------------------------------------------

def equalize(gray_u8: np.ndarray) -> np.ndarray:
    """Classic CDF histogram equalisation; a single-level image maps to itself."""
    g = np.asarray(gray_u8, dtype=np.uint8)
    hist = np.bincount(g.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    n = int(cdf[-1])
    cdf_min = int(cdf[hist > 0][0])
    if n == cdf_min:
        return g.copy()
    lut = np.rint((cdf - cdf_min) / (n - cdf_min) * 255.0)
    return np.clip(lut, 0, 255).astype(np.uint8)[g]


def contrast_balance(frame, gray_byte: np.ndarray | None = None) -> float:
    """Mean absolute difference (0..255 scale) between gray and its equalised version."""
    if gray_byte is None:
        gray_byte = to_grayscale(frame, "byte")
    g8 = np.clip(np.rint(gray_byte), 0, 255).astype(np.uint8)
    return float(np.abs(g8.astype(np.int64) - equalize(g8).astype(np.int64)).mean())


def exposure_quality(frame, gray_unit: np.ndarray | None = None) -> float:
    """Negative absolute population skewness of pixel luminance."""
    if gray_unit is None:
        gray_unit = to_grayscale(frame, "unit")
    x = np.asarray(gray_unit, dtype=np.float64).ravel()
    d = x - x.mean()
    m2 = float((d * d).mean())
    if m2 <= 1e-18:
        return 0.0
    skew = float((d * d * d).mean()) / m2 ** 1.5
    return -abs(skew)


def jpeg_features(gray_byte: np.ndarray) -> tuple[float, float, float]:
    """Blockiness B, activity A and zero-crossing rate Z over an 8-pixel grid."""
    x = np.asarray(gray_byte, dtype=np.float64)
    parts = []
    for img in (x, x.T):
        m, n = img.shape
        d = img[:, 1:] - img[:, :-1]
        nb = n // 8 - 1
        if nb >= 1:
            b = float(np.abs(d[:, 7:8 * nb:8]).mean())
        else:
            b = 0.0
        a = (8.0 * float(np.abs(d).mean()) - b) / 7.0 if d.size else 0.0
        sig = np.sign(d)
        z = float((sig[:, :-1] * sig[:, 1:] < 0).mean()) if d.shape[1] > 1 else 0.0
        parts.append((b, a, z))
    (bh, ah, zh), (bv, av, zv) = parts
    return (bh + bv) / 2.0, (ah + av) / 2.0, (zh + zv) / 2.0


def jpeg_quality(frame, gray_byte: np.ndarray | None = None) -> float:
    """S = alpha + beta * B^g1 * A^g2 * Z^g3; a flat image returns the no-distortion limit."""
    if gray_byte is None:
        gray_byte = to_grayscale(frame, "byte")
    b, a, z = jpeg_features(gray_byte)
    if b <= 0.0 and a <= 0.0:
        return JPEG_NO_DISTORTION
    b, a, z = (max(v, _JPEG_FLOOR) for v in (b, a, z))
    g1, g2, g3 = JPEG_GAMMAS
    return float(JPEG_ALPHA + JPEG_BETA * b ** g1 * a ** g2 * z ** g3)


def tenengrad(frame) -> float:
    return _quality_sharpness(frame)


def _tenengrad_from_gray(gray_byte: np.ndarray) -> float:
    gx, gy = sobel(gray_byte)
    return float(np.mean(gx * gx + gy * gy))


# -- saliency ----------------------------------------------------------------------

def _shrink(gray: np.ndarray, side: int = SALIENCY_SIDE) -> np.ndarray:
    h, w = gray.shape
    k = max(1, max(h, w) // side)
    if k == 1:
        return gray
    hh, ww = (h // k) * k, (w // k) * k
    return gray[:hh, :ww].reshape(hh // k, k, ww // k, k).mean(axis=(1, 3))


def saliency_map(gray_unit: np.ndarray) -> np.ndarray:
    """Spectral-residual saliency on a ~64 px thumbnail, L1-normalised."""
    small = _shrink(np.asarray(gray_unit, dtype=np.float64))
    F = np.fft.fft2(small)
    amp = np.abs(F)
    log_amp = np.log(amp + SALIENCY_FLOOR * amp.max() + 1e-12)
    phase = np.angle(F)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="nearest")
    sal = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
    sal = ndimage.gaussian_filter(sal, SALIENCY_SIGMA, mode="nearest")
    total = sal.sum()
    if not np.isfinite(total) or total <= 0:
        return np.full(small.shape, 1.0 / small.size)
    return sal / total


def _grid_mass(m: np.ndarray) -> np.ndarray:
    h, w = m.shape
    rows = [0, round(h / 3), round(2 * h / 3), h]
    cols = [0, round(w / 3), round(2 * w / 3), w]
    out = np.array([m[rows[r]:rows[r + 1], cols[c]:cols[c + 1]].sum()
                    for r in range(3) for c in range(3)])
    total = out.sum()
    return out / total if total > 0 else np.full(9, 1.0 / 9.0)


def spectral_thirds(frame, gray_unit: np.ndarray | None = None) -> np.ndarray:
    """Saliency mass in each cell of a 3x3 grid, row-major; sums to 1."""
    if gray_unit is None:
        gray_unit = to_grayscale(frame, "unit")
    return _grid_mass(saliency_map(gray_unit))


# -- assembly ------------------------------------------------------------------------

def aesthetic_features(frame: Frame) -> np.ndarray:
    """The 59-dim aesthetics block with shared intermediate planes."""
    hsv = to_hsv(frame)
    gray = to_grayscale(frame, "unit")
    gray_b = gray * 255.0
    mean = float(gray.mean())
    c = float((gray.max() - gray.min()) / mean) if mean > 0 else 0.0
    parts = [
        [c],
        hsv_means(frame, hsv),
        itten(frame, hsv),
        pad(frame, hsv),
        haralick(frame, gray_b),
        [contrast_balance(frame, gray_b)],
        [exposure_quality(frame, gray)],
        [jpeg_quality(frame, gray_b)],
        [_tenengrad_from_gray(gray_b)],
        spectral_thirds(frame, gray),
    ]
    vec = np.concatenate([np.asarray(p, dtype=np.float64).ravel() for p in parts])
    assert vec.size == AESTHETIC_DIM
    return vec


def assemble_frame_vector(block, face_count: int = 0, salient_face_count: int = 0,
                          aesthetic_bit: int = 0) -> np.ndarray:
    """Aesthetics block (a frame or a precomputed 59-vector) plus the three appended dims."""
    if isinstance(block, Frame):
        block = aesthetic_features(block)
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (AESTHETIC_DIM,):
        raise InputError(f"expected a {AESTHETIC_DIM}-dim aesthetics block, got {block.shape}")
    if face_count < 0 or salient_face_count < 0:
        raise InputError("face counts must be non-negative")
    if aesthetic_bit not in (0, 1):
        raise InputError("aesthetic bit must be 0 or 1")
    return np.concatenate([block, [face_count, salient_face_count, aesthetic_bit]]).astype(np.float64)


def write_vectors_csv(path, indices, vectors):
    vectors = np.asarray(vectors, dtype=np.float64)
    dim = vectors.shape[1] if vectors.ndim == 2 else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"v{i}" for i in range(dim)])
        for i, row in zip(indices, vectors):
            w.writerow([int(i)] + [repr(float(v)) for v in row])


def read_vectors_csv(path) -> tuple[list[int], np.ndarray]:
    indices, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "index":
            raise InputError(f"{path}: expected an 'index,v0,...' header")
        for row in reader:
            indices.append(int(row[0]))
            rows.append([float(v) for v in row[1:]])
    return indices, np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
