"""8-bit grayscale image file I/O (PNG and PGM).

Reading maps pixel values to [0, 1] by dividing by 255.  Writing clamps to
[0, 1], scales by 255 and rounds half to even, so a write/read round trip
moves each in-range pixel by at most 1/510.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .operators import as_grid


def read_image(path) -> np.ndarray:
    """Load an 8-bit grayscale PNG/PGM file as a float grid in [0, 1]."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def write_image(path, img) -> None:
    """Write a grid to an 8-bit grayscale file; format follows the extension."""
    img = as_grid(img)
    data = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)
