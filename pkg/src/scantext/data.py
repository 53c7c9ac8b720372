"""Synthetic text-line rendering, dataset persistence (PGM + TSV manifest),
and attention-heatmap export."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .font import FONT, GLYPH_HEIGHT, GLYPH_WIDTH
from .seq2seq import AttentionMap
from .windowing import RawImage, bilinear_resize

CANVAS_HEIGHT = 32
GLYPH_TARGET_HEIGHT = 24
BASE_GAP = 2
MARGIN = 3


@dataclass(frozen=True)
class JitterSpec:
    """Per-character rendering perturbations; amplitudes, not samples."""
    scale: float = 0.2        # glyph height factor, +/- fraction
    baseline: int = 2         # vertical shift, +/- pixels
    spacing: int = 1          # inter-glyph gap, +/- pixels
    noise: float = 0.05       # max additive Gaussian sigma
    contrast: float = 0.4     # foreground level drawn from [1-contrast, 1]

    @classmethod
    def none(cls) -> "JitterSpec":
        return cls(scale=0.0, baseline=0, spacing=0, noise=0.0, contrast=0.0)


@dataclass
class Sample:
    image: RawImage
    label: str


def render_textline(text: str, seed: int,
                    jitter: JitterSpec = JitterSpec()) -> RawImage:
    """Draw the string on a 32px-high canvas, glyphs ~24px tall, with
    seeded per-character jitter and additive clamped noise.  Deterministic
    per (text, seed)."""
    if not text:
        raise ValueError("cannot render an empty string")
    for ch in text:
        if ch not in FONT:
            raise ValueError(f"character {ch!r} has no glyph")
    rng = np.random.default_rng([seed & 0x7FFFFFFF, *(ord(c) for c in text)])
    contrast = 1.0 - rng.uniform(0.0, jitter.contrast)

    glyphs = []
    for ch in text:
        h = max(1, round(GLYPH_TARGET_HEIGHT
                         * (1.0 + rng.uniform(-jitter.scale, jitter.scale))))
        w = max(1, round(h * GLYPH_WIDTH / GLYPH_HEIGHT))
        shift = int(rng.integers(-jitter.baseline, jitter.baseline + 1)) \
            if jitter.baseline else 0
        gap = BASE_GAP + (int(rng.integers(-jitter.spacing, jitter.spacing + 1))
                          if jitter.spacing else 0)
        glyphs.append((bilinear_resize(FONT.glyph(ch), h, w), shift, gap))

    width = MARGIN * 2 + sum(g.shape[1] + gap for g, _, gap in glyphs) - glyphs[-1][2]
    canvas = np.zeros((CANVAS_HEIGHT, width))
    x = MARGIN
    for g, shift, gap in glyphs:
        h, w = g.shape
        top = (CANVAS_HEIGHT - h) // 2 + shift
        top = min(max(top, 0), CANVAS_HEIGHT - h)
        region = canvas[top:top + h, x:x + w]
        np.maximum(region, g * contrast, out=region)
        x += w + gap

    if jitter.noise > 0:
        sigma = rng.uniform(0.0, jitter.noise)
        canvas = canvas + rng.normal(0.0, sigma, size=canvas.shape)
    return RawImage(pixels=np.clip(canvas, 0.0, 1.0))


def gen_dataset(charset: str, count: int, min_len: int, max_len: int,
                seed: int, jitter: JitterSpec = JitterSpec(),
                ) -> tuple[list[Sample], list[Sample]]:
    """Uniform random labels rendered to images, split 90/10 train/dev by a
    seeded shuffle."""
    if not FONT.covers(charset):
        missing = [c for c in charset if c not in FONT]
        raise ValueError(f"charset symbols without glyphs: {missing}")
    if not 1 <= min_len <= max_len:
        raise ValueError("need 1 <= min_len <= max_len")
    rng = np.random.default_rng(seed)
    symbols = list(charset)
    samples = []
    for i in range(count):
        length = int(rng.integers(min_len, max_len + 1))
        label = "".join(symbols[int(j)] for j in rng.integers(0, len(symbols),
                                                              size=length))
        samples.append(Sample(image=render_textline(label, int(rng.integers(2 ** 31))),
                              label=label))
    order = np.random.default_rng([seed, 90]).permutation(count)
    cut = int(round(count * 0.9))
    train = [samples[i] for i in order[:cut]]
    dev = [samples[i] for i in order[cut:]]
    return train, dev


# ---------------------------------------------------------------------------
# PGM (P5) image files


def write_pgm(path, pixels: np.ndarray) -> None:
    """Binary PGM, maxval 255; intensities in [0,1] quantized to 8 bits."""
    data = np.clip(np.rint(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM back to float intensities in [0,1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(blob):
            raise ValueError(f"{path}: truncated PGM header")
        if blob[pos:pos + 1] == b"#":  # comment to end of line
            pos = blob.index(b"\n", pos) + 1
            continue
        if blob[pos:pos + 1].isspace():
            pos += 1
            continue
        end = pos
        while end < len(blob) and not blob[end:end + 1].isspace():
            end += 1
        fields.append(blob[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    raster = np.frombuffer(blob, dtype=np.uint8, count=h * w, offset=pos)
    return raster.reshape(h, w).astype(np.float64) / 255.0


# ---------------------------------------------------------------------------
# dataset directory layout: <dir>/<split>/NNNNNN.pgm + manifest.tsv


def save_dataset(directory, train: list[Sample], dev: list[Sample]) -> None:
    for split, samples in (("train", train), ("dev", dev)):
        split_dir = os.path.join(directory, split)
        os.makedirs(split_dir, exist_ok=True)
        lines = []
        for i, s in enumerate(samples):
            name = f"{i:06d}.pgm"
            write_pgm(os.path.join(split_dir, name), s.image.pixels)
            lines.append(f"{name}\t{s.label}\n")
        with open(os.path.join(split_dir, "manifest.tsv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)


def load_split(directory, split: str) -> list[Sample]:
    split_dir = os.path.join(directory, split)
    manifest = os.path.join(split_dir, "manifest.tsv")
    samples = []
    with open(manifest, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            name, label = line.split("\t")
            pixels = read_pgm(os.path.join(split_dir, name))
            samples.append(Sample(image=RawImage(pixels=pixels), label=label))
    return samples


def load_dataset(directory) -> tuple[list[Sample], list[Sample]]:
    return load_split(directory, "train"), load_split(directory, "dev")


# ---------------------------------------------------------------------------
# attention heatmaps


def export_heatmap(am: AttentionMap, layer: int, centers: np.ndarray,
                   path) -> None:
    """Write one decoder layer's weights as a PGM: rows are output steps,
    columns are windows ordered by center, [0,1] mapped to [0,255]."""
    weights = am.weights[layer]
    order = np.argsort(centers, kind="stable")
    write_pgm(path, weights[:, order])
