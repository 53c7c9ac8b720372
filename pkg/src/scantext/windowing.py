"""Text-line normalization and the multi-scale sliding-window pass.

A line image is first brought to a fixed 32x256 canvas, then scanned by a
window grid: 32-wide windows stepped at a fixed stride, with wider
co-centered glimpses stacked as extra channels.  Every glimpse is resized
to 32x32 before feature extraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CANVAS_HEIGHT = 32
CANVAS_WIDTH = 256
BASE_WINDOW = 32
DEFAULT_STRIDE = 4
MULTI_SCALES = (32, 40, 48)
SINGLE_SCALE = (40,)
PAD_VALUE = 0.0  # dark background; also used for out-of-bounds glimpse reads


@dataclass
class RawImage:
    """Grayscale line image, intensities in [0, 1], row-major."""
    pixels: np.ndarray  # (height, width)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError(f"degenerate image shape {self.pixels.shape}")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ValueError("pixel intensities must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class NormalizedImage:
    """Exactly 32x256; columns >= content_width hold the pad value."""
    pixels: np.ndarray
    content_width: int

    def __post_init__(self):
        if self.pixels.shape != (CANVAS_HEIGHT, CANVAS_WIDTH):
            raise ValueError(f"normalized image must be "
                             f"{CANVAS_HEIGHT}x{CANVAS_WIDTH}, "
                             f"got {self.pixels.shape}")
        if not 1 <= self.content_width <= CANVAS_WIDTH:
            raise ValueError(f"content_width {self.content_width} out of range")


@dataclass
class WindowSequence:
    """Ordered multi-channel glimpses with their center x-coordinates."""
    windows: np.ndarray      # (m, 32, 32, n_scales)
    centers: np.ndarray      # (m,) strictly increasing
    scales: tuple[int, ...]  # ascending glimpse widths

    def __len__(self) -> int:
        return self.windows.shape[0]


def _interp_matrix(src: int, dst: int) -> np.ndarray:
    """Column matrix R (src x dst) so that image @ R performs align-corners
    bilinear resampling; affine signals pass through exactly."""
    R = np.zeros((src, dst), dtype=np.float64)
    if src == 1:
        R[0, :] = 1.0
        return R
    if dst == 1:
        R[0, 0] = 1.0
        return R
    pos = np.arange(dst) * (src - 1) / (dst - 1)
    i0 = np.minimum(pos.astype(int), src - 2)
    frac = pos - i0
    R[i0, np.arange(dst)] += 1.0 - frac
    R[i0 + 1, np.arange(dst)] += frac
    return R


def bilinear_resize(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = pixels.shape
    out = pixels
    if h != out_h:
        out = _interp_matrix(h, out_h).T @ out
    if w != out_w:
        out = out @ _interp_matrix(w, out_w)
    return out


def resize_patch(patch: np.ndarray, target_w: int = BASE_WINDOW) -> np.ndarray:
    """Horizontally resample a 32-row patch to 32 columns (bilinear,
    align-corners); the vertical extent is already normalized."""
    if patch.ndim != 2 or patch.shape[0] != CANVAS_HEIGHT:
        raise ValueError(f"patch must have {CANVAS_HEIGHT} rows, got {patch.shape}")
    if patch.shape[1] < 1:
        raise ValueError("patch width < 1")
    if patch.shape[1] == target_w:
        return patch.copy()
    return patch @ _interp_matrix(patch.shape[1], target_w)


def normalize_image(img: RawImage) -> NormalizedImage:
    """Scale to height 32 preserving aspect ratio, right-padding to width
    256; lines that would exceed 256 are squashed to fit exactly."""
    scaled_w = max(1, round(img.width * CANVAS_HEIGHT / img.height))
    if scaled_w >= CANVAS_WIDTH:
        pixels = bilinear_resize(img.pixels, CANVAS_HEIGHT, CANVAS_WIDTH)
        content = CANVAS_WIDTH
    else:
        scaled = bilinear_resize(img.pixels, CANVAS_HEIGHT, scaled_w)
        pixels = np.full((CANVAS_HEIGHT, CANVAS_WIDTH), PAD_VALUE)
        pixels[:, :scaled_w] = scaled
        content = scaled_w
    return NormalizedImage(pixels=np.clip(pixels, 0.0, 1.0), content_width=content)


def extract_windows(img: NormalizedImage,
                    scales: tuple[int, ...] = MULTI_SCALES,
                    stride: int = DEFAULT_STRIDE) -> WindowSequence:
    """Slide the base 32-wide grid and cut one co-centered glimpse per scale
    at every stop, each resized to 32x32 and stacked as channels."""
    if stride <= 0:
        raise ValueError(f"stride {stride} must be positive")
    if any(s < 1 for s in scales):
        raise ValueError(f"scales must be >= 1, got {scales}")
    scales = tuple(sorted(scales))
    lefts = np.arange(0, CANVAS_WIDTH - BASE_WINDOW + 1, stride)
    centers = lefts + BASE_WINDOW // 2
    m = len(lefts)
    pad = max(scales)  # wide enough for any out-of-bounds read
    padded = np.pad(img.pixels, ((0, 0), (pad, pad)), constant_values=PAD_VALUE)

    channels = []
    for s in scales:
        cols = centers[:, None] - s // 2 + np.arange(s)[None, :] + pad
        glimpses = padded[:, cols]                  # (32, m, s)
        glimpses = glimpses.transpose(1, 0, 2)      # (m, 32, s)
        if s != BASE_WINDOW:
            glimpses = glimpses @ _interp_matrix(s, BASE_WINDOW)
        channels.append(glimpses)
    windows = np.stack(channels, axis=-1)           # (m, 32, 32, n)
    return WindowSequence(windows=windows, centers=centers.astype(np.int64),
                          scales=scales)


def window_count(stride: int = DEFAULT_STRIDE) -> int:
    return (CANVAS_WIDTH - BASE_WINDOW) // stride + 1
