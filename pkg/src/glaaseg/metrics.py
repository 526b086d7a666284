"""Segmentation quality: Dice overlap and region uniformity."""

from dataclasses import dataclass

import numpy as np

from .grid import ShapeMismatchError

__all__ = ["EvalReport", "dsc", "uniformity_pp", "evaluate", "PP_NORMALIZATION"]

PP_NORMALIZATION = "C = N * (max f - min f)^2"


@dataclass(frozen=True)
class EvalReport:
    pp: float
    iterations: int
    wall_time: float
    dsc: float | None = None

    def as_dict(self):
        out = {"iterations": self.iterations, "wall_time": self.wall_time, "pp": self.pp}
        if self.dsc is not None:
            out["dsc"] = self.dsc
        return out


def dsc(cs, gt):
    """Dice similarity ``2 |CS & GT| / (|CS| + |GT|)``; two empty masks score 1."""
    cs = np.asarray(cs, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if cs.shape != gt.shape:
        raise ShapeMismatchError(f"mask shapes differ: {cs.shape} vs {gt.shape}")
    total = int(cs.sum()) + int(gt.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(cs, gt).sum()) / total


def uniformity_pp(f, mask):
    """Region uniformity ``1 - sum_i SSE_i / C`` over the mask and its complement.

    ``SSE_i`` is the sum of squared deviations from the region mean and
    ``C = N * (max f - min f)**2``. An empty region contributes 0; a constant
    image scores 1.
    """
    f = np.asarray(f, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if f.shape != mask.shape:
        raise ShapeMismatchError(f"image {f.shape} and mask {mask.shape} differ")
    span = float(f.max() - f.min())
    if span == 0:
        return 1.0
    sse = 0.0
    for region in (f[mask], f[~mask]):
        if region.size:
            sse += float(np.sum((region - region.mean()) ** 2))
    return 1.0 - sse / (f.size * span**2)


def evaluate(result, f, gt=None):
    """Assemble an :class:`EvalReport`; Dice only when ``gt`` is given."""
    return EvalReport(
        pp=uniformity_pp(f, result.mask),
        iterations=result.iterations,
        wall_time=result.wall_time,
        dsc=None if gt is None else dsc(result.mask, gt),
    )
