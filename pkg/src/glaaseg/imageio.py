"""8-bit grayscale image files and contour overlays.

PGM (binary P5) is the canonical format on both ends; PNG and other formats
Pillow can decode are accepted on input. Masks are written as 0/255.
"""

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

log = logging.getLogger(__name__)

__all__ = ["ImageFormatError", "read_gray", "read_mask", "write_pgm", "to_uint8",
           "mask_to_uint8", "boundary", "overlay"]

# Modes that collapse losslessly or by luminance to 8-bit gray.
_CONVERTIBLE = {"1", "P", "RGB", "RGBA", "LA"}
_FOUR = ndimage.generate_binary_structure(2, 1)


class ImageFormatError(ValueError):
    """Unreadable file or an image that is not 8-bit grayscale."""


def read_gray(path):
    """Load an 8-bit grayscale image as a float64 array of gray levels."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in _CONVERTIBLE:
                log.warning("%s: converting %s image to 8-bit gray", path, mode)
                im = im.convert("L")
            elif mode != "L":
                raise ImageFormatError(f"{path}: expected 8-bit grayscale, got mode {mode}")
            return np.asarray(im, dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageFormatError(f"cannot read image {path}: {exc}") from None


def read_mask(path):
    """Load a mask image; nonzero pixels are foreground."""
    return read_gray(path) > 0


def to_uint8(field):
    """Round to gray levels, saturating at 0 and 255."""
    return np.clip(np.rint(np.asarray(field, dtype=np.float64)), 0, 255).astype(np.uint8)


def mask_to_uint8(mask):
    return np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)


def write_pgm(path, data):
    """Write a uint8 array as binary PGM (P5)."""
    data = np.asarray(data)
    if data.dtype != np.uint8 or data.ndim != 2:
        raise ValueError("write_pgm expects a 2-D uint8 array")
    path = Path(path)
    Image.fromarray(data, mode="L").save(path, format="PPM")
    return path


def boundary(mask):
    """Foreground pixels with a 4-neighbour outside the mask (image border counts as outside)."""
    mask = np.asarray(mask, dtype=bool)
    return mask & ~ndimage.binary_erosion(mask, structure=_FOUR, border_value=0)


def overlay(image, mask):
    """8-bit copy of ``image`` with the mask's contour drawn at 255."""
    out = to_uint8(image)
    out[boundary(mask)] = 255
    return out
