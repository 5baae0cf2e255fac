"""Binary image chain: gray conversion, band thresholding, region labeling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


class NoObjectError(Exception):
    """Raised when no foreground region survives to act as object of interest."""


@dataclass(frozen=True)
class RgbImage:
    """Row-major RGB raster, channel values 0-255."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(f"pixel buffer shape {self.pixels.shape} does not match "
                             f"{self.height}x{self.width}x3")

    @classmethod
    def from_array(cls, arr) -> "RgbImage":
        a = np.asarray(arr, dtype=np.uint8)
        return cls(width=a.shape[1], height=a.shape[0], pixels=a)


@dataclass(frozen=True)
class GrayImage:
    """Row-major grayscale raster, intensities 0-255."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(f"pixel buffer shape {self.pixels.shape} does not match "
                             f"{self.height}x{self.width}")

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        a = np.asarray(arr, dtype=np.uint8)
        return cls(width=a.shape[1], height=a.shape[0], pixels=a)


@dataclass(frozen=True)
class BinaryImage:
    """Raster whose pixels are exactly 0 or 1."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8, values in {0, 1}

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(f"pixel buffer shape {self.pixels.shape} does not match "
                             f"{self.height}x{self.width}")
        bad = (self.pixels != 0) & (self.pixels != 1)
        if bad.any():
            raise ValueError("binary image may contain only 0 and 1")

    @classmethod
    def from_array(cls, arr) -> "BinaryImage":
        a = np.asarray(arr, dtype=np.uint8)
        return cls(width=a.shape[1], height=a.shape[0], pixels=a)


@dataclass(frozen=True)
class ThresholdBand:
    """Open-closed intensity window (t1, t2]; pixels inside become foreground."""

    t1: int
    t2: int

    def __post_init__(self):
        if not (0 <= self.t1 <= 255 and 0 <= self.t2 <= 255):
            raise ValueError("thresholds must lie in 0-255")
        if self.t1 >= self.t2:
            raise ValueError(f"invalid threshold band: t1={self.t1} must be < t2={self.t2}")


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel region labels; 0 is background, regions are 1..region_count."""

    width: int
    height: int
    labels: np.ndarray  # (height, width) int32
    region_count: int

    @classmethod
    def from_array(cls, arr, region_count: int) -> "LabelMap":
        a = np.asarray(arr, dtype=np.int32)
        return cls(width=a.shape[1], height=a.shape[0], labels=a, region_count=region_count)


@dataclass(frozen=True)
class Region:
    label: int
    pixel_count: int
    bounding_box: tuple  # (min_row, min_col, max_row, max_col)


def rgb_to_gray(img: RgbImage) -> GrayImage:
    """Convert to grayscale with BT.601 luma weights.

    gray = (299*r + 587*g + 114*b + 500) // 1000, i.e. the weighted sum
    rounded to the nearest integer with halves rounding up.  Exact integer
    arithmetic keeps the result platform-independent.
    """
    p = img.pixels.astype(np.int64)
    gray = (299 * p[:, :, 0] + 587 * p[:, :, 1] + 114 * p[:, :, 2] + 500) // 1000
    return GrayImage(img.width, img.height, gray.astype(np.uint8))


def threshold_band(img: GrayImage, band: ThresholdBand) -> BinaryImage:
    """Mark pixels with band.t1 < intensity <= band.t2 as foreground."""
    fg = (img.pixels > band.t1) & (img.pixels <= band.t2)
    return BinaryImage(img.width, img.height, fg.astype(np.uint8))


def label_regions(b: BinaryImage) -> LabelMap:
    """Partition foreground into maximal 8-connected regions.

    Labels are 1..N in raster order of each region's first pixel, so the
    numbering is deterministic regardless of the underlying labeling pass.
    """
    raw, count = ndimage.label(b.pixels, structure=EIGHT_CONNECTED)
    if count == 0:
        return LabelMap(b.width, b.height, np.zeros_like(raw, dtype=np.int32), 0)
    flat = raw.ravel()
    first_seen = np.full(count + 1, flat.size, dtype=np.int64)
    idx = np.flatnonzero(flat)
    # reversed so earlier indices win the final write
    first_seen[flat[idx[::-1]]] = idx[::-1]
    order = np.argsort(first_seen[1:], kind="stable") + 1
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order] = np.arange(1, count + 1, dtype=np.int32)
    return LabelMap(b.width, b.height, remap[raw], count)


def remove_small_regions(lm: LabelMap, min_area: int) -> LabelMap:
    """Drop regions smaller than min_area pixels and renumber the survivors."""
    if min_area < 0:
        raise ValueError("min_area must be >= 0")
    if lm.region_count == 0 or min_area == 0:
        return lm
    sizes = np.bincount(lm.labels.ravel(), minlength=lm.region_count + 1)
    keep = np.flatnonzero(sizes[1:] >= min_area) + 1
    remap = np.zeros(lm.region_count + 1, dtype=np.int32)
    remap[keep] = np.arange(1, keep.size + 1, dtype=np.int32)
    return LabelMap(lm.width, lm.height, remap[lm.labels], int(keep.size))


def largest_region(lm: LabelMap) -> Region:
    """Select the largest region (ties go to the smallest label).

    Raises NoObjectError on an empty label map.
    """
    if lm.region_count == 0:
        raise NoObjectError("label map contains no regions")
    sizes = np.bincount(lm.labels.ravel(), minlength=lm.region_count + 1)
    label = int(np.argmax(sizes[1:])) + 1  # argmax returns the first (smallest) label on ties
    rows, cols = np.nonzero(lm.labels == label)
    bbox = (int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))
    return Region(label=label, pixel_count=int(sizes[label]), bounding_box=bbox)


def region_mask(lm: LabelMap, region: Region) -> BinaryImage:
    """Binary mask holding only the given region's pixels."""
    return BinaryImage(lm.width, lm.height, (lm.labels == region.label).astype(np.uint8))


def area(b: BinaryImage) -> int:
    """Total foreground pixel count."""
    return int(b.pixels.sum())
