"""Multiplicative gamma speckle and piecewise-constant test phantoms.

Phantom spec files are plain text, one ``key = value`` per line, ``#`` starts
a comment::

    width = 85
    height = 76
    background = 20
    shape = disk 30 38 20 200          # cx cy r intensity
    shape = rect 55 10 80 30 200       # x0 y0 x1 y1 intensity (x1, y1 exclusive)
    shape = annulus 42 38 22 10 200    # cx cy r_outer r_inner intensity

Pixel centres sit at integer coordinates; a pixel belongs to a disk when
``(col - cx)**2 + (row - cy)**2 <= r**2``.
"""

from dataclasses import dataclass, field

import numpy as np

from .grid import ParameterError, ShapeMismatchError, clamp_to_floor, intensity_floor

__all__ = [
    "SpeckleSpec",
    "Rect",
    "Disk",
    "Annulus",
    "PhantomSpec",
    "sample_speckle",
    "apply_speckle",
    "make_phantom",
    "parse_phantom_spec",
    "load_phantom_spec",
    "format_phantom_spec",
    "PHANTOMS",
]


@dataclass(frozen=True)
class SpeckleSpec:
    """L-look gamma speckle: mean 1, variance 1/L."""

    looks: int
    seed: int = 0

    def __post_init__(self):
        if int(self.looks) != self.looks or self.looks < 1:
            raise ParameterError(f"looks must be a positive integer, got {self.looks}")


@dataclass(frozen=True)
class Rect:
    x0: int
    y0: int
    x1: int
    y1: int
    intensity: float

    def raster(self, height, width):
        rows, cols = np.mgrid[0:height, 0:width]
        return (cols >= self.x0) & (cols < self.x1) & (rows >= self.y0) & (rows < self.y1)

    def fits(self, height, width):
        return 0 <= self.x0 < self.x1 <= width and 0 <= self.y0 < self.y1 <= height


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    r: float
    intensity: float

    def raster(self, height, width):
        rows, cols = np.mgrid[0:height, 0:width]
        return (cols - self.cx) ** 2 + (rows - self.cy) ** 2 <= self.r**2

    def fits(self, height, width):
        return (
            self.r > 0
            and self.cx - self.r >= 0
            and self.cy - self.r >= 0
            and self.cx + self.r <= width - 1
            and self.cy + self.r <= height - 1
        )


@dataclass(frozen=True)
class Annulus:
    """Disk with a concentric hole."""

    cx: float
    cy: float
    r_outer: float
    r_inner: float
    intensity: float

    def raster(self, height, width):
        rows, cols = np.mgrid[0:height, 0:width]
        d2 = (cols - self.cx) ** 2 + (rows - self.cy) ** 2
        return (d2 <= self.r_outer**2) & (d2 > self.r_inner**2)

    def fits(self, height, width):
        outer = Disk(self.cx, self.cy, self.r_outer, self.intensity)
        return 0 < self.r_inner < self.r_outer and outer.fits(height, width)


_SHAPES = {"rect": (Rect, 5), "disk": (Disk, 4), "annulus": (Annulus, 5)}


@dataclass(frozen=True)
class PhantomSpec:
    width: int
    height: int
    background: float
    shapes: tuple = field(default_factory=tuple)
    name: str = "phantom"

    def validate(self):
        if self.width < 2 or self.height < 2:
            raise ParameterError("phantom must be at least 2x2")
        if not self.background > 0:
            raise ParameterError("background intensity must be > 0")
        for s in self.shapes:
            if not s.intensity > 0:
                raise ParameterError(f"shape intensity must be > 0: {s}")
            if s.intensity == self.background:
                raise ParameterError(f"shape intensity equals background: {s}")
            if not s.fits(self.height, self.width):
                raise ParameterError(f"shape out of bounds: {s}")


def sample_speckle(width, height, spec):
    """I.i.d. Gamma(shape=L, scale=1/L) field of shape ``(height, width)``."""
    rng = np.random.default_rng(spec.seed)
    L = int(spec.looks)
    return rng.gamma(shape=L, scale=1.0 / L, size=(height, width))


def apply_speckle(clean, noise, floor=None):
    """Multiplicative degradation ``f = u * n`` clamped to the intensity floor."""
    u = np.asarray(clean, dtype=np.float64)
    n = np.asarray(noise, dtype=np.float64)
    if u.shape != n.shape:
        raise ShapeMismatchError(f"image {u.shape} and noise {n.shape} differ")
    if np.any(u <= 0):
        raise ParameterError("clean image must be strictly positive")
    if floor is None:
        floor = intensity_floor(u)
    return clamp_to_floor(u * n, floor)


def make_phantom(spec):
    """Rasterize ``spec``; returns ``(clean_image, ground_truth_mask)``.

    Shapes may overlap only when they share an intensity.
    """
    spec.validate()
    h, w = spec.height, spec.width
    img = np.full((h, w), float(spec.background))
    mask = np.zeros((h, w), dtype=bool)
    owner = np.full((h, w), np.nan)
    for s in spec.shapes:
        r = s.raster(h, w)
        clash = r & ~np.isnan(owner) & (owner != s.intensity)
        if np.any(clash):
            raise ParameterError(f"shape {s} overlaps another shape with a different intensity")
        owner[r] = s.intensity
        img[r] = s.intensity
        mask |= r
    return img, mask


def parse_phantom_spec(text, name="phantom"):
    values = {}
    shapes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key == "shape":
            parts = value.split()
            if not parts or parts[0] not in _SHAPES:
                raise ParameterError(f"line {lineno}: unknown shape {value!r}")
            cls, nargs = _SHAPES[parts[0]]
            if len(parts) - 1 != nargs:
                raise ParameterError(f"line {lineno}: {parts[0]} takes {nargs} numbers")
            try:
                nums = [float(p) for p in parts[1:]]
            except ValueError:
                raise ParameterError(f"line {lineno}: non-numeric shape argument") from None
            if cls is Rect:
                nums[:4] = [int(v) for v in nums[:4]]
            shapes.append(cls(*nums))
        elif key in ("width", "height", "background", "name"):
            values[key] = value
        else:
            raise ParameterError(f"line {lineno}: unknown key {key!r}")
    try:
        spec = PhantomSpec(
            width=int(values["width"]),
            height=int(values["height"]),
            background=float(values["background"]),
            shapes=tuple(shapes),
            name=values.get("name", name),
        )
    except KeyError as exc:
        raise ParameterError(f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ParameterError(str(exc)) from None
    spec.validate()
    return spec


def load_phantom_spec(path):
    with open(path, encoding="utf-8") as fh:
        return parse_phantom_spec(fh.read())


def format_phantom_spec(spec):
    lines = [
        f"name = {spec.name}",
        f"width = {spec.width}",
        f"height = {spec.height}",
        f"background = {spec.background:g}",
    ]
    for s in spec.shapes:
        kind = {Rect: "rect", Disk: "disk", Annulus: "annulus"}[type(s)]
        nums = " ".join(f"{v:g}" for v in vars(s).values())
        lines.append(f"shape = {kind} {nums}")
    return "\n".join(lines) + "\n"


# Built-in phantoms. Sizes follow the two synthetic test images (85x76, 85x61).
PHANTOMS = {
    "phantom1": PhantomSpec(
        width=85,
        height=76,
        background=10.0,
        shapes=(
            Annulus(28, 38, 20, 9, 200.0),
            Rect(56, 12, 78, 64, 200.0),
        ),
        name="phantom1",
    ),
    "phantom2": PhantomSpec(
        width=85,
        height=61,
        background=10.0,
        shapes=(
            Disk(22, 30, 16, 200.0),
            Disk(60, 30, 18, 200.0),
        ),
        name="phantom2",
    ),
    "annulus": PhantomSpec(
        width=85,
        height=76,
        background=10.0,
        shapes=(Annulus(42, 38, 28, 12, 200.0),),
        name="annulus",
    ),
}
