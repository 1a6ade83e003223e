"""Regenerate tests/data/gravel_512x768.pgm from scikit-image's bundled photograph.

The gravel photograph (512x512 grayscale, public domain) is resampled to
512x768. Only needed if the fixture is lost; the test suite reads the committed
PGM and does not import scikit-image.
"""
from pathlib import Path

from skimage import data, transform

from sketchkit.io import write_pgm

out = Path(__file__).resolve().parents[1] / "tests" / "data" / "gravel_512x768.pgm"
img = transform.resize(data.gravel(), (512, 768), anti_aliasing=True)
write_pgm(out, img)
print(f"wrote {out}")
