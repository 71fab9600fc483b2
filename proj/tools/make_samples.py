"""Regenerates data/samples/*.ppm from scikit-image's bundled photographs.

Each normal-light image is a resized crop of the photograph; its low-light
partner is s * normal**gamma plus Gaussian noise, quantized to 8 bits.
"""
import pathlib

import numpy as np
from skimage import data, transform

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "samples"

# name, output (height, width), scale s, gamma
PAIRS = [
    ("astronaut", (128, 128), 0.22, 1.8),
    ("coffee", (128, 192), 0.18, 1.6),
    ("chelsea", (120, 180), 0.25, 2.0),
    ("rocket", (128, 192), 0.20, 1.7),
]
NOISE_SIGMA = 0.01


def write_ppm(path, img):
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def to_u8(x):
    return np.clip(np.floor(x * 255.0 + 0.5), 0, 255).astype(np.uint8)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240517)
    for name, (h, w), s, gamma in PAIRS:
        src = getattr(data, name)().astype(np.float64) / 255.0
        sh, sw = src.shape[:2]
        scale = max(h / sh, w / sw)
        resized = transform.resize(src, (round(sh * scale), round(sw * scale)), anti_aliasing=True)
        y0 = (resized.shape[0] - h) // 2
        x0 = (resized.shape[1] - w) // 2
        normal = to_u8(resized[y0:y0 + h, x0:x0 + w])
        n = normal.astype(np.float64) / 255.0
        low = to_u8(s * n ** gamma + rng.normal(0.0, NOISE_SIGMA, n.shape))
        write_ppm(OUT / f"{name}_normal.ppm", normal)
        write_ppm(OUT / f"{name}_low.ppm", low)
        print(f"{name}: {w}x{h}")


if __name__ == "__main__":
    main()
