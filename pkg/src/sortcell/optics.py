"""Monochrome imaging model and contrast-based part finding.

The camera sees brightness only. For a surface with reflectance (Rr, Rg, Rb),
a filter with per-channel transmission (Tr, Tg, Tb) and cell lighting
(Lr, Lg, Lb), the recorded intensity is

    I = clamp(Lr*Tr*Rr + Lg*Tg*Rg + Lb*Tb*Rb, 0, 1)

Cheap filters transmit a lot of the neighbouring channel, so under plain
ambient light green and blue blocks land at nearly the same intensity and a
contrast finder cannot tell them apart; flooding the cell with the matching
LED color spreads the intensities far enough to classify all three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage

from .workcell import ColorClass, Part, PartState, ReflectanceRGB


class CameraObstructed(Exception):
    """Raised when a frame is requested while the filter wheel is mid-travel."""


class AmbiguousScene(Exception):
    """Two candidate regions tie exactly after all tie-breaks (malformed scenario)."""


class FilterName(Enum):
    RED_FILTER = "red_filter"
    GREEN_FILTER = "green_filter"
    BLUE_FILTER = "blue_filter"
    NO_FILTER = "no_filter"


@dataclass(frozen=True)
class FilterSpec:
    name: FilterName
    transmission: tuple[float, float, float]

    def __post_init__(self) -> None:
        if any(not 0.0 <= t <= 1.0 for t in self.transmission):
            raise ValueError("filter transmission components must lie in [0, 1]")
        if self.name is FilterName.NO_FILTER and self.transmission != (1.0, 1.0, 1.0):
            raise ValueError("NO_FILTER must transmit (1, 1, 1)")


@dataclass(frozen=True)
class LightSpec:
    """Cell lighting, LED plus ambient residual, per channel in [0, 1.2]."""

    emission: tuple[float, float, float]

    def __post_init__(self) -> None:
        if any(not 0.0 <= e <= 1.2 for e in self.emission):
            raise ValueError("light emission components must lie in [0, 1.2]")


@dataclass(frozen=True)
class CameraConfig:
    width_px: int = 640
    height_px: int = 480
    mm_per_px: float = 0.5
    center_x_mm: float = 600.0
    center_y_mm: float = 0.0


@dataclass
class GrayImage:
    """Single-channel frame; pixels row-major in [0, 1]."""

    pixels: np.ndarray
    camera: CameraConfig

    def __post_init__(self) -> None:
        if self.pixels.shape != (self.camera.height_px, self.camera.width_px):
            raise ValueError("pixel grid does not match camera dimensions")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ValueError("pixel intensities must lie in [0, 1]")


@dataclass(frozen=True)
class VisionProcess:
    name: str
    find_threshold_delta: float = 0.15
    min_area_px: int = 200
    max_area_px: int = 20000

    def __post_init__(self) -> None:
        if not 0.0 < self.find_threshold_delta < 1.0:
            raise ValueError("find_threshold_delta must lie in (0, 1)")
        if self.min_area_px > self.max_area_px:
            raise ValueError("min_area_px must be <= max_area_px")


@dataclass(frozen=True)
class VisionRegister:
    """Found flag plus offsets from the taught reference (window center)."""

    found: bool
    x_mm: float = 0.0
    y_mm: float = 0.0
    rz_deg: float = 0.0


@dataclass(frozen=True)
class EdgeLeakConfig:
    """Off-center blue blocks reflect extra green into the camera path."""

    margin_mm: float = 60.0
    factor: float = 2.0


@dataclass
class OpticsDefaults:
    """Tunable spectral model; defaults match the cell's measured contrast
    behavior (filter-only ambiguity, filter+LED separation)."""

    block_reflectance: dict[ColorClass, ReflectanceRGB] = field(
        default_factory=lambda: {
            ColorClass.RED: ReflectanceRGB(0.80, 0.10, 0.08),
            ColorClass.GREEN: ReflectanceRGB(0.10, 0.70, 0.12),
            ColorClass.BLUE: ReflectanceRGB(0.08, 0.12, 0.75),
        }
    )
    belt_reflectance: ReflectanceRGB = field(
        default_factory=lambda: ReflectanceRGB(0.05, 0.05, 0.05)
    )
    filters: dict[FilterName, FilterSpec] = field(
        default_factory=lambda: {
            FilterName.RED_FILTER: FilterSpec(FilterName.RED_FILTER, (0.85, 0.10, 0.08)),
            FilterName.GREEN_FILTER: FilterSpec(FilterName.GREEN_FILTER, (0.10, 0.60, 0.55)),
            FilterName.BLUE_FILTER: FilterSpec(FilterName.BLUE_FILTER, (0.08, 0.55, 0.60)),
            FilterName.NO_FILTER: FilterSpec(FilterName.NO_FILTER, (1.0, 1.0, 1.0)),
        }
    )
    ambient_light: LightSpec = field(default_factory=lambda: LightSpec((0.6, 0.6, 0.6)))
    led_gain: float = 1.0
    led_residual: tuple[float, float, float] = (0.1, 0.1, 0.1)
    edge_leak: EdgeLeakConfig = field(default_factory=EdgeLeakConfig)

    def led_light(self, rgb_255: tuple[int, int, int]) -> LightSpec:
        """Cell lighting for an LED ring color (0-255 per channel)."""
        return LightSpec(
            tuple(
                c / 255.0 * self.led_gain + res
                for c, res in zip(rgb_255, self.led_residual)
            )
        )


# Scan process names as used by the robot programs.
REDSCAN = "REDSCAN"
GRNSCAN = "GRNSCAN"
BLUSCAN = "BLUSCAN"

SCAN_CHANNEL = {
    FilterName.RED_FILTER: ColorClass.RED,
    FilterName.GREEN_FILTER: ColorClass.GREEN,
    FilterName.BLUE_FILTER: ColorClass.BLUE,
}


def pixel_intensity(
    reflectance: ReflectanceRGB, filt: FilterSpec, light: LightSpec
) -> float:
    """Brightness a monochrome pixel records for a surface; clamped to [0, 1].

    Monotone nondecreasing in every input component.
    """
    total = sum(
        l * t * r
        for l, t, r in zip(light.emission, filt.transmission, reflectance.as_tuple())
    )
    return min(max(total, 0.0), 1.0)


def apply_edge_leak(
    part: Part, scan_channel: ColorClass, config: EdgeLeakConfig
) -> ReflectanceRGB:
    """Effective reflectance of a part for one scan.

    Only the documented confusion is modeled: a blue-dominant part scanned
    through the green path while sitting outside the edge margin reflects
    extra green (factor applied to the G channel, clamped to 1). Everything
    else is returned unchanged.
    """
    refl = part.reflectance
    if scan_channel is not ColorClass.GREEN:
        return refl
    if abs(part.y) <= config.margin_mm:
        return refl
    if not (refl.b > refl.r and refl.b > refl.g):
        return refl
    return ReflectanceRGB(refl.r, min(refl.g * config.factor, 1.0), refl.b)


def render(
    parts: list[Part],
    filt: FilterSpec,
    light: LightSpec,
    camera: CameraConfig,
    belt_reflectance: ReflectanceRGB,
    belt_half_width_mm: float = 150.0,
    edge_leak: EdgeLeakConfig | None = None,
    wheel_settled: bool = True,
) -> GrayImage:
    """Render the camera window: belt background plus on-belt part footprints.

    Raises CameraObstructed when the filter wheel has not settled.
    """
    if not wheel_settled:
        raise CameraObstructed("filter wheel is mid-travel")

    w, h, scale = camera.width_px, camera.height_px, camera.mm_per_px
    cols = np.arange(w, dtype=np.float64)
    rows = np.arange(h, dtype=np.float64)
    x_mm = (cols + 0.5 - w / 2.0) * scale + camera.center_x_mm
    y_mm = (rows + 0.5 - h / 2.0) * scale + camera.center_y_mm

    belt_value = pixel_intensity(belt_reflectance, filt, light)
    pixels = np.zeros((h, w), dtype=np.float64)
    on_belt_rows = np.abs(y_mm) <= belt_half_width_mm
    pixels[on_belt_rows, :] = belt_value

    scan_channel = SCAN_CHANNEL.get(filt.name)
    for part in parts:
        if part.state is not PartState.ON_BELT:
            continue
        refl = part.reflectance
        if edge_leak is not None and scan_channel is not None:
            refl = apply_edge_leak(part, scan_channel, edge_leak)
        value = pixel_intensity(refl, filt, light)
        half = part.size_mm / 2.0
        # Bounding box in pixel indices, then exact point-in-square test.
        reach = half * math.sqrt(2.0)
        c0 = np.searchsorted(x_mm, part.x - reach, side="left")
        c1 = np.searchsorted(x_mm, part.x + reach, side="right")
        r0 = np.searchsorted(y_mm, part.y - reach, side="left")
        r1 = np.searchsorted(y_mm, part.y + reach, side="right")
        if c0 >= c1 or r0 >= r1:
            continue
        dx = x_mm[c0:c1] - part.x
        dy = y_mm[r0:r1] - part.y
        theta = math.radians(part.rotation_deg)
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        u = cos_t * dx[None, :] + sin_t * dy[:, None]
        v = -sin_t * dx[None, :] + cos_t * dy[:, None]
        inside = (np.abs(u) <= half) & (np.abs(v) <= half)
        block = pixels[r0:r1, c0:c1]
        block[inside] = value
    return GrayImage(pixels=pixels, camera=camera)


def _background_mode(pixels: np.ndarray) -> float:
    values, counts = np.unique(pixels, return_counts=True)
    # Ties broken toward the darker value; the belt is the darkest large area.
    best = np.argmax(counts)
    return float(values[best])


def run_find(process: VisionProcess, image: GrayImage) -> VisionRegister:
    """Contrast blob search over a frame.

    A region qualifies when its mean intensity sits at least
    ``find_threshold_delta`` above the modal (background) intensity and its
    pixel area lies within the process bounds. Ties go to the largest area,
    then smallest centroid x, then smallest y; an exact tie after that raises
    AmbiguousScene.
    """
    pixels = image.pixels
    background = _background_mode(pixels)
    mask = pixels != background
    labels, count = ndimage.label(mask)
    candidates = []
    for idx in range(1, count + 1):
        region = labels == idx
        area = int(region.sum())
        if not process.min_area_px <= area <= process.max_area_px:
            continue
        delta = float(pixels[region].mean()) - background
        if delta < process.find_threshold_delta:
            continue
        rows, cols = np.nonzero(region)
        cam = image.camera
        cx = (float(cols.mean()) + 0.5 - cam.width_px / 2.0) * cam.mm_per_px
        cy = (float(rows.mean()) + 0.5 - cam.height_px / 2.0) * cam.mm_per_px
        candidates.append((area, cx, cy, _principal_axis_deg(rows, cols)))

    if not candidates:
        return VisionRegister(found=False)
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    if len(candidates) > 1 and candidates[0][:3] == candidates[1][:3]:
        raise AmbiguousScene("two regions tie exactly after all tie-breaks")
    area, cx, cy, rz = candidates[0]
    return VisionRegister(found=True, x_mm=cx, y_mm=cy, rz_deg=rz)


def _principal_axis_deg(rows: np.ndarray, cols: np.ndarray) -> float:
    """Orientation of the blob's principal axis; 0 for rotationally symmetric blobs.

    Squares stay symmetric under rasterization only approximately, so
    degeneracy is judged relative to the blob's spread rather than exactly.
    """
    x = cols - cols.mean()
    y = rows - rows.mean()
    mu20 = float((x * x).mean())
    mu02 = float((y * y).mean())
    mu11 = float((x * y).mean())
    spread = mu20 + mu02
    if spread <= 0.0:
        return 0.0
    anisotropy = math.hypot(mu20 - mu02, 2.0 * mu11) / spread
    if anisotropy < 0.01:
        return 0.0
    return 0.5 * math.degrees(math.atan2(2.0 * mu11, mu20 - mu02))


def to_pgm(image: GrayImage) -> bytes:
    """Binary PGM (P5, maxval 255, row-major) for visual inspection."""
    data = np.round(image.pixels * 255.0).astype(np.uint8)
    header = f"P5\n{image.camera.width_px} {image.camera.height_px}\n255\n"
    return header.encode("ascii") + data.tobytes()
