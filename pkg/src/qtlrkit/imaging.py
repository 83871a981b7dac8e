"""Colour images as pure quaternion matrices, masks, image I/O and quality metrics.

Images are float arrays of shape (H, W, 3) with channels in [0, 1]. A pixel
``(r, g, b)`` is encoded as the pure quaternion ``0 + r i + g j + b k``.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.signal import correlate2d

from .quattensor import QuaternionTensor

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_SIGMA = 1.5
SSIM_WINDOW = 11


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {img.shape}")
    return img


def to_quaternion(img: np.ndarray) -> QuaternionTensor:
    img = _check_image(img)
    return QuaternionTensor.from_components(np.zeros(img.shape[:2]), img[..., 0], img[..., 1], img[..., 2])


def from_quaternion(q: QuaternionTensor) -> np.ndarray:
    """Imaginary parts as RGB, clamped to [0, 1]; the real part is dropped."""
    if q.order != 2:
        raise ValueError(f"expected a quaternion matrix, got order {q.order}")
    return np.clip(np.moveaxis(q.data[1:], 0, -1), 0.0, 1.0)


# masks ---------------------------------------------------------------------------


def random_mask(height: int, width: int, sr: float, seed: int | np.random.Generator) -> np.ndarray:
    """Exactly ``round(sr * H * W)`` observed pixels chosen by a seeded shuffle."""
    if not 0.0 < sr <= 1.0:
        raise ValueError(f"sampling rate must lie in (0, 1], got {sr}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = height * width
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[: int(round(sr * n))]] = True
    return mask.reshape(height, width)


def structural_mask(path: str | Path) -> np.ndarray:
    """A pixel is observed iff the mask image is non-black there."""
    return np.any(read_image(path) > 0.0, axis=2)


# metrics -------------------------------------------------------------------------


def _check_pair(ref: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref, test = _check_image(ref), _check_image(test)
    if ref.shape != test.shape:
        raise ValueError(f"image shapes differ: {ref.shape} vs {test.shape}")
    return ref, test


def psnr(ref: np.ndarray, test: np.ndarray, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)`` with the MSE pooled over all channels; ``inf`` if identical."""
    ref, test = _check_pair(ref, test)
    mse = float(np.mean((ref - test) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_channel(x: np.ndarray, y: np.ndarray, win: np.ndarray, data_range: float) -> float:
    filt = lambda a: correlate2d(a, win, mode="valid")  # noqa: E731
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx, my = filt(x), filt(y)
    vx = filt(x * x) - mx * mx
    vy = filt(y * y) - my * my
    cxy = filt(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(ref: np.ndarray, test: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM with an 11 x 11 Gaussian window (sigma 1.5) over the valid region, averaged over channels."""
    ref, test = _check_pair(ref, test)
    if min(ref.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels on each side")
    if np.array_equal(ref, test):
        return 1.0
    win = gaussian_window()
    return float(np.mean([_ssim_channel(ref[..., c], test[..., c], win, data_range) for c in range(3)]))


# image I/O -----------------------------------------------------------------------


def _to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(_check_image(img), 0.0, 1.0) * 255.0).astype(np.uint8)


def _read_ppm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(raw) and not raw[end : end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P6":
        raise ValueError(f"{path}: not a binary PPM (P6) file")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PPM is supported")
    pos += 1
    data = np.frombuffer(raw, dtype=np.uint8, count=width * height * 3, offset=pos)
    return data.reshape(height, width, 3).astype(float) / 255.0


def _write_ppm(path: Path, img: np.ndarray) -> None:
    px = _to_uint8(img)
    h, w = px.shape[:2]
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode() + px.tobytes())


def read_image(path: str | Path) -> np.ndarray:
    """Read an 8-bit RGB image (PNG via Pillow, or P6 PPM) scaled to [0, 1]."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return _read_ppm(path)
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=float) / 255.0


def write_image(path: str | Path, img: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        _write_ppm(path, img)
        return
    from PIL import Image

    Image.fromarray(_to_uint8(img)).save(path)


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    """Observed pixels white, missing pixels black."""
    mask = np.asarray(mask, dtype=bool)
    write_image(path, np.repeat(mask[..., None], 3, axis=2).astype(float))
