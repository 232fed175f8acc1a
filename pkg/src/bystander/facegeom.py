"""Raster images, face squares, Gaussian blurring and face crops.

Coordinates are in pixels with x to the right and y down; pixel ``(i, j)``
covers ``[i, i+1) x [j, j+1)``.  Images are 8-bit RGB, stored as
``height x width x 3`` uint8 arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

BLUR_SQUARE_SCALE = 2.4
CLASSIFIER_INPUT_SIDE = 128


class DegenerateGeometryError(ValueError):
    pass


class PPMFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Image:
    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a non-empty H x W x 3 array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("pixel values must lie in 0..255")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, rgb=(0, 0, 0)) -> "Image":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = np.asarray(rgb, dtype=np.uint8)
        return cls(px)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self) -> int:
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True)
class EyePair:
    left: tuple[float, float]
    right: tuple[float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "left", (float(self.left[0]), float(self.left[1])))
        object.__setattr__(self, "right", (float(self.right[0]), float(self.right[1])))
        if self.left == self.right:
            raise DegenerateGeometryError("eye positions coincide")

    @property
    def distance(self) -> float:
        return math.hypot(self.right[0] - self.left[0], self.right[1] - self.left[1])

    @property
    def midpoint(self) -> tuple[float, float]:
        return ((self.left[0] + self.right[0]) / 2.0, (self.left[1] + self.right[1]) / 2.0)


@dataclass(frozen=True)
class FaceRegion:
    """Axis-aligned square; may extend past the image and is clipped where used."""

    center: tuple[float, float]
    side: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "side", float(self.side))
        if not self.side > 0:
            raise DegenerateGeometryError(f"region side must be positive, got {self.side}")

    def bounds(self) -> tuple[float, float, float, float]:
        half = self.side / 2.0
        cx, cy = self.center
        return cx - half, cy - half, cx + half, cy + half

    def pixel_box(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Half-open pixel box ``(x0, y0, x1, y1)`` covered by the square, clipped to the image."""
        left, top, right, bottom = self.bounds()
        x0 = min(max(math.floor(left), 0), width)
        y0 = min(max(math.floor(top), 0), height)
        x1 = min(max(math.ceil(right), 0), width)
        y1 = min(max(math.ceil(bottom), 0), height)
        return x0, y0, max(x0, x1), max(y0, y1)


def blur_square_from_eyes(eyes: EyePair) -> FaceRegion:
    """Square of side 2.4x the eye distance, centred between the eyes."""
    d = eyes.distance
    if d <= 0:
        raise DegenerateGeometryError("eye positions coincide")
    return FaceRegion(eyes.midpoint, BLUR_SQUARE_SCALE * d)


def default_sigma(region: FaceRegion) -> float:
    return region.side / 8.0


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D kernel over ``[-ceil(3 sigma), ceil(3 sigma)]``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return w / w.sum()


def blur_region(image: Image, region: FaceRegion, sigma: float | None = None) -> Image:
    """Gaussian-blur the pixels inside ``region``; everything else is left untouched.

    The filter reads from the whole image with clamp-to-edge at the borders and
    writes only inside the clipped square.  Horizontal then vertical passes in
    float64, rounded to nearest on write.
    """
    if sigma is None:
        sigma = default_sigma(region)
    x0, y0, x1, y1 = region.pixel_box(image.width, image.height)
    if x0 >= x1 or y0 >= y1:
        return image
    kernel = gaussian_kernel(sigma)
    r = (kernel.shape[0] - 1) // 2
    src = image.pixels.astype(np.float64)

    rows = np.clip(np.arange(y0 - r, y1 + r), 0, image.height - 1)
    cols = np.arange(x0, x1)
    band = src[rows]
    horiz = np.zeros((rows.shape[0], cols.shape[0], 3))
    for t, w in enumerate(kernel):
        horiz += w * band[:, np.clip(cols + t - r, 0, image.width - 1)]

    out_h = y1 - y0
    vert = np.zeros((out_h, cols.shape[0], 3))
    for t, w in enumerate(kernel):
        vert += w * horiz[t:t + out_h]

    out = image.pixels.copy()
    out[y0:y1, x0:x1] = np.clip(np.rint(vert), 0, 255).astype(np.uint8)
    return Image(out)


def blur_faces(image: Image, regions, sigma: float | Callable[[FaceRegion], float] | None = None) -> Image:
    for region in regions:
        s = sigma(region) if callable(sigma) else sigma
        image = blur_region(image, region, s)
    return image


def crop_scale_face(image: Image, region: FaceRegion, out_side: int = CLASSIFIER_INPUT_SIDE) -> Image:
    """Resample the square ``region`` into an ``out_side x out_side`` image (bilinear, clamp-to-edge)."""
    if out_side < 1:
        raise ValueError("out_side must be positive")
    left, top, _, _ = region.bounds()
    scale = region.side / out_side
    # output pixel centres mapped into source pixel-centre coordinates
    u = np.arange(out_side, dtype=np.float64)
    sx = np.clip(left + (u + 0.5) * scale - 0.5, 0.0, image.width - 1)
    sy = np.clip(top + (u + 0.5) * scale - 0.5, 0.0, image.height - 1)

    x_lo = np.floor(sx).astype(int)
    y_lo = np.floor(sy).astype(int)
    x_hi = np.minimum(x_lo + 1, image.width - 1)
    y_hi = np.minimum(y_lo + 1, image.height - 1)
    fx = (sx - x_lo)[None, :, None]
    fy = (sy - y_lo)[:, None, None]

    src = image.pixels.astype(np.float64)
    top_row = src[y_lo][:, x_lo] * (1 - fx) + src[y_lo][:, x_hi] * fx
    bottom_row = src[y_hi][:, x_lo] * (1 - fx) + src[y_hi][:, x_hi] * fx
    out = top_row * (1 - fy) + bottom_row * fy
    return Image(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def face_features(image: Image, region: FaceRegion, out_side: int = CLASSIFIER_INPUT_SIDE) -> np.ndarray:
    """Flat float input vector (length ``out_side**2 * 3``, values in [0, 1]) for the classifier."""
    return crop_scale_face(image, region, out_side).pixels.reshape(-1).astype(np.float64) / 255.0


def in_central_region(image_width: int, face_center_x: float) -> bool:
    """True when ``x`` lies in the middle horizontal third, ``[W/3, 2W/3)``."""
    if image_width <= 0:
        raise ValueError("image width must be positive")
    # compare 3x against W and 2W to avoid rounding W/3
    return image_width <= 3 * face_center_x < 2 * image_width


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PPMFormatError("truncated header")
    return data[start:pos], pos


def parse_ppm(data: bytes) -> Image:
    magic, pos = _read_token(data, 0)
    if magic != b"P6":
        raise PPMFormatError(f"not a binary PPM (magic {magic!r})")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        if not tok.isdigit():
            raise PPMFormatError(f"bad header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PPMFormatError("image dimensions must be positive")
    if maxval != 255:
        raise PPMFormatError(f"only 8-bit PPM (maxval 255) is supported, got {maxval}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PPMFormatError("missing whitespace after header")
    pos += 1
    size = width * height * 3
    payload = data[pos:pos + size]
    if len(payload) != size:
        raise PPMFormatError(f"truncated payload: {len(payload)} of {size} bytes")
    px = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return Image(px.copy())


def format_ppm(image: Image) -> bytes:
    return b"P6\n%d %d\n255\n" % (image.width, image.height) + image.pixels.tobytes()


def read_ppm(path) -> Image:
    return parse_ppm(Path(path).read_bytes())


def write_ppm(image: Image, path) -> None:
    Path(path).write_bytes(format_ppm(image))
