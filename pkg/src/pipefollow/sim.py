"""Deterministic closed-loop mission simulator.

A camera flies above a seabed plane at a fixed height, tilted down along the
vehicle heading, and renders the pipeline polyline in perspective.  Each
captured image is split into 5 bands whose feature vectors each drive one of
the next 5 steps; per-step lateral drift against the pipeline centerline is
recorded together with its percentage of the drift tolerance.

All randomness (seabed noise, speckle) comes from a generator seeded by
(world seed, frame index), so identical scenarios replay bit-exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from . import fis
from .features import NUM_BANDS, band_features, object_mask, split_bands
from .imgproc import GrayImage, NoObjectError, ThresholdBand

DEFAULT_TOLERANCE_CM = 8.0
CSV_HEADER = "step,actual_x_cm,sim_x_cm,drift_cm,pct_drift"


class EnvelopeExitError(Exception):
    """A step carried the vehicle outside the working envelope."""


class MissionFailure(Exception):
    def __init__(self, reason: str, step: int, detail: str = ""):
        msg = f"mission failed at step {step}: {reason}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.reason = reason
        self.step = step


class ScenarioError(Exception):
    """Scenario file rejected; message names the file and line."""


@dataclass(frozen=True)
class World:
    envelope: tuple = (150.0, 200.0)   # (width along x, depth along y), cm
    pipeline: tuple = ()               # ((x, y), ...) waypoints, strictly increasing y
    pipe_width: float = 10.0           # cm
    seed: int = 0

    def __post_init__(self):
        ex, ey = self.envelope
        if ex <= 0 or ey <= 0:
            raise ValueError("envelope dimensions must be positive")
        if len(self.pipeline) < 2:
            raise ValueError("pipeline needs at least 2 waypoints")
        for x, y in self.pipeline:
            if not (0 <= x <= ex and 0 <= y <= ey):
                raise ValueError(f"waypoint ({x}, {y}) outside envelope")
        ys = [y for _, y in self.pipeline]
        if any(b <= a for a, b in zip(ys, ys[1:])):
            raise ValueError("waypoint y coordinates must be strictly increasing")
        if self.pipe_width <= 0:
            raise ValueError("pipe width must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class CameraModel:
    height_cm: float = 40.0
    tilt_deg: float = 30.0             # down from horizontal
    fov_deg: float = 60.0              # horizontal field of view
    image_width: int = 320
    image_height: int = 240
    pipe_intensity: int = 220
    seabed_intensity: int = 80
    noise_amplitude: int = 30
    speckle_density: float = 0.005

    def __post_init__(self):
        if not 0 < self.tilt_deg < 90:
            raise ValueError("tilt must be in (0, 90) degrees")
        if not 10 < self.fov_deg < 170:
            raise ValueError("fov must be in (10, 170) degrees")
        for name in ("pipe_intensity", "seabed_intensity"):
            v = getattr(self, name)
            if not 0 <= v <= 255:
                raise ValueError(f"{name} must be in 0-255")
        if self.height_cm <= 0:
            raise ValueError("camera height must be positive")
        if not 0 <= self.speckle_density < 1:
            raise ValueError("speckle density must be in [0, 1)")


@dataclass(frozen=True)
class AuvState:
    x: float
    y: float
    heading: float   # degrees; 90 points along +y, larger values lean toward +x


@dataclass(frozen=True)
class PathPoint:
    step: int
    actual_x: float
    sim_x: float
    drift: float       # cm, signed, rounded half-up to 1 decimal
    pct_drift: float   # 100*|drift|/tolerance, half-up to 1 decimal


@dataclass(frozen=True)
class PathRecord:
    points: tuple
    tolerance: float

    def max_abs_drift(self) -> float:
        return max((abs(p.drift) for p in self.points), default=0.0)

    def within_tolerance(self) -> bool:
        return all(abs(p.drift) <= self.tolerance for p in self.points)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for p in self.points:
            lines.append(f"{p.step},{p.actual_x:.1f},{p.sim_x:.1f},"
                         f"{p.drift:+.1f},{p.pct_drift:.1f}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, tolerance: float = DEFAULT_TOLERANCE_CM) -> "PathRecord":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != CSV_HEADER:
            raise ValueError(f"missing CSV header {CSV_HEADER!r}")
        if len(lines) == 1:
            raise ValueError("CSV body is empty")
        points = []
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != 5:
                raise ValueError(f"malformed CSV row: {ln!r}")
            try:
                points.append(PathPoint(int(parts[0]), float(parts[1]), float(parts[2]),
                                        float(parts[3]), float(parts[4])))
            except ValueError:
                raise ValueError(f"non-numeric CSV row: {ln!r}") from None
        return cls(tuple(points), tolerance)


@dataclass(frozen=True)
class Scenario:
    world: World
    camera: CameraModel = CameraModel()
    thresholds: ThresholdBand = ThresholdBand(180, 255)
    min_area: int = 25
    rulebase_file: str = ""            # empty -> built-in default rule base
    steering_gain: float = 0.5         # degrees of heading change per steering unit
    step_length: float = 22.5          # cm
    steps_per_image: int = 5
    start: AuvState = AuvState(0.0, 0.0, 90.0)

    def __post_init__(self):
        if self.step_length <= 0:
            raise ValueError("step length must be positive")
        if self.steps_per_image < 1:
            raise ValueError("steps per image must be >= 1")
        ex, ey = self.world.envelope
        if not (0 <= self.start.x <= ex and 0 <= self.start.y <= ey):
            raise ValueError("start position outside envelope")


# --- geometry ----------------------------------------------------------------

def heading_vector(heading_deg: float) -> tuple:
    rad = math.radians(heading_deg - 90.0)
    return math.sin(rad), math.cos(rad)


def _camera_basis(auv: AuvState, cam: CameraModel):
    dx, dy = heading_vector(auv.heading)
    t = math.radians(cam.tilt_deg)
    right = np.array([dy, -dx, 0.0])
    forward = np.array([dx * math.cos(t), dy * math.cos(t), -math.sin(t)])
    up = np.array([dx * math.sin(t), dy * math.sin(t), math.cos(t)])
    origin = np.array([auv.x, auv.y, cam.height_cm])
    return origin, right, up, forward


def focal_px(cam: CameraModel) -> float:
    return (cam.image_width / 2.0) / math.tan(math.radians(cam.fov_deg) / 2.0)


def image_center(cam: CameraModel) -> tuple:
    return (cam.image_width - 1) / 2.0, (cam.image_height - 1) / 2.0


def project_point(point, auv: AuvState, cam: CameraModel):
    """Pixel coordinates of a seabed point, or None if behind the camera."""
    origin, right, up, forward = _camera_basis(auv, cam)
    v = np.array([point[0], point[1], 0.0]) - origin
    depth = float(v @ forward)
    if depth <= 1e-9:
        return None
    f = focal_px(cam)
    cx, cy = image_center(cam)
    return cx + f * float(v @ right) / depth, cy - f * float(v @ up) / depth


def _min_dist2_to_polyline(gx, gy, waypoints):
    best = np.full(gx.shape, np.inf)
    for (px, py), (qx, qy) in zip(waypoints, waypoints[1:]):
        wx, wy = qx - px, qy - py
        length2 = wx * wx + wy * wy
        s = np.clip(((gx - px) * wx + (gy - py) * wy) / length2, 0.0, 1.0)
        dx = gx - (px + s * wx)
        dy = gy - (py + s * wy)
        np.minimum(best, dx * dx + dy * dy, out=best)
    return best


def render_view(world: World, auv: AuvState, cam: CameraModel, frame: int = 0) -> GrayImage:
    """Perspective view of the pipeline on the seabed from the vehicle pose.

    Every pixel's ray is intersected with the seabed plane; ground points
    within half a pipe width of the polyline render at pipe intensity.
    Uniform intensity noise and pipe-bright speckle are then drawn from a
    generator seeded by (world.seed, frame).
    """
    origin, right, up, forward = _camera_basis(auv, cam)
    h, w = cam.image_height, cam.image_width
    f = focal_px(cam)
    cx, cy = image_center(cam)
    a = (np.arange(w) - cx) / f
    b = (cy - np.arange(h)) / f
    aa, bb = np.meshgrid(a, b)
    dirs = (forward[None, None, :]
            + aa[..., None] * right[None, None, :]
            + bb[..., None] * up[None, None, :])
    dz = dirs[..., 2]
    ground = dz < -1e-12   # rays above the horizon never hit the seabed
    t = np.where(ground, -origin[2] / np.where(ground, dz, -1.0), 0.0)
    gx = origin[0] + t * dirs[..., 0]
    gy = origin[1] + t * dirs[..., 1]
    d2 = _min_dist2_to_polyline(gx, gy, world.pipeline)
    pipe = ground & (d2 <= (world.pipe_width / 2.0) ** 2)
    img = np.where(pipe, cam.pipe_intensity, cam.seabed_intensity).astype(np.int64)
    rng = np.random.default_rng((world.seed, frame))
    if cam.noise_amplitude > 0:
        img += rng.integers(-cam.noise_amplitude, cam.noise_amplitude + 1, size=(h, w))
        np.clip(img, 0, 255, out=img)
    if cam.speckle_density > 0:
        salt = rng.random((h, w)) < cam.speckle_density
        img[salt] = cam.pipe_intensity
    return GrayImage(w, h, img.astype(np.uint8))


# --- vehicle kinematics -------------------------------------------------------

def step_auv(state: AuvState, steer: float, scenario: Scenario) -> AuvState:
    """Apply one steering command and advance one step length.

    The set point maps to a heading change of gain*(steer - 90) degrees; the
    vehicle then advances along the new heading.  Raises EnvelopeExitError if
    the step leaves the working area.
    """
    if not 0.0 <= steer <= 180.0:
        raise ValueError(f"steering set point {steer} outside [0, 180]")
    heading = state.heading + scenario.steering_gain * (steer - 90.0)
    rad = math.radians(heading - 90.0)
    x = state.x + scenario.step_length * math.sin(rad)
    y = state.y + scenario.step_length * math.cos(rad)
    ex, ey = scenario.world.envelope
    if not (0.0 <= x <= ex and 0.0 <= y <= ey):
        raise EnvelopeExitError(f"({x:.1f}, {y:.1f}) outside {ex:.0f} x {ey:.0f} envelope")
    return AuvState(x, y, heading)


# --- drift accounting ---------------------------------------------------------

def pipeline_x_at(world: World, y: float) -> float:
    """Pipeline centerline x at the given y, linearly interpolated."""
    ys = np.array([wy for _, wy in world.pipeline])
    xs = np.array([wx for wx, _ in world.pipeline])
    if y < ys[0] - 1e-9 or y > ys[-1] + 1e-9:
        raise ValueError(f"y={y:.2f} outside pipeline span [{ys[0]:.2f}, {ys[-1]:.2f}]")
    return float(np.interp(y, ys, xs))


def _round1(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def pct_of_drift(drift: float, tolerance: float) -> float:
    """100*|drift|/tolerance rounded half-up to one decimal."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    q = Decimal(repr(abs(drift))) * 100 / Decimal(repr(tolerance))
    return float(q.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def drift_metrics(path, world: World, tolerance: float = DEFAULT_TOLERANCE_CM) -> PathRecord:
    """Per-point drift (signed, 1 decimal) and percentage-of-tolerance."""
    points = []
    for i, state in enumerate(path, start=1):
        actual = pipeline_x_at(world, state.y)
        drift = _round1(state.x - actual)
        points.append(PathPoint(i, actual, state.x, drift, pct_of_drift(drift, tolerance)))
    return PathRecord(tuple(points), tolerance)


# --- mission loop -------------------------------------------------------------

def _band_steer(rb, mask, layout) -> float:
    return fis.infer(rb, band_features(mask, layout).as_dict()).output


def run_mission(scenario: Scenario, rb, mode: str = "sequential",
                tolerance: float = DEFAULT_TOLERANCE_CM) -> PathRecord:
    """Fly the pipeline: capture, extract 5 band vectors, infer, step 5 times.

    A step is taken only while its nominal landing stays within the pipeline
    span, so every recorded point has a defined centerline reference.  In
    "overlapped" mode the per-band processing runs on worker threads and each
    step blocks only on its own band's result; outputs are identical to
    sequential mode by construction.
    """
    if mode not in ("sequential", "overlapped"):
        raise ValueError(f"unknown mode {mode!r}")
    world = scenario.world
    auv = scenario.start
    far_y = world.pipeline[-1][1]
    layouts = split_bands(scenario.camera.image_width, scenario.camera.image_height)
    pool = ThreadPoolExecutor(max_workers=NUM_BANDS) if mode == "overlapped" else None
    path = []
    frame = 0
    try:
        while auv.y + scenario.step_length <= far_y + 1e-9:
            img = render_view(world, auv, scenario.camera, frame)
            mask = object_mask(img, scenario.thresholds, scenario.min_area)
            if pool is None:
                steers = [_band_steer(rb, mask, layout) for layout in layouts]
                steer_at = steers.__getitem__
            else:
                futures = [pool.submit(_band_steer, rb, mask, layout) for layout in layouts]
                steer_at = lambda i: futures[i].result()  # noqa: E731
            for i in range(scenario.steps_per_image):
                if auv.y + scenario.step_length > far_y + 1e-9:
                    break
                auv = step_auv(auv, steer_at(min(i, NUM_BANDS - 1)), scenario)
                path.append(auv)
            frame += 1
    except NoObjectError as exc:
        raise MissionFailure("no-object", len(path) + 1, str(exc)) from exc
    except EnvelopeExitError as exc:
        raise MissionFailure("envelope-exit", len(path) + 1, str(exc)) from exc
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return drift_metrics(path, world, tolerance)


# --- tuning harness -----------------------------------------------------------

@dataclass(frozen=True)
class TuneResult:
    params: dict                 # (variable, term) -> (width, center)
    initial_objective: tuple
    best_objective: tuple
    evaluations: int


def mission_objective(scenarios, rb) -> tuple:
    """(max |drift|, mean |drift|) over all scenario points; failure is infinite."""
    drifts = []
    for scenario in scenarios:
        try:
            record = run_mission(scenario, rb)
        except MissionFailure:
            return (math.inf, math.inf)
        drifts.extend(abs(p.drift) for p in record.points)
    if not drifts:
        return (math.inf, math.inf)
    return (max(drifts), sum(drifts) / len(drifts))


def tune(scenarios, init: dict, budget: int, rulebase=None) -> TuneResult:
    """Coordinate-descent search over term centers and widths.

    Each coordinate is probed one step up and down and then walked greedily
    while the objective keeps improving; steps halve after a sweep without
    progress.  Only improvements are ever accepted, so the result is never
    worse than init, and the whole search is deterministic.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rb0 = rulebase if rulebase is not None else fis.default_rulebase()
    evals = 0

    def evaluate(params):
        nonlocal evals
        evals += 1
        return mission_objective(scenarios, fis.with_term_parameters(rb0, params))

    best = dict(init)
    best_obj = evaluate(best)
    initial_obj = best_obj

    coords = []
    steps = {}
    for var in (*fis.INPUT_VARIABLES, fis.OUTPUT_VARIABLE):
        lo, hi = rb0.variables[var].universe
        span = hi - lo
        for term in rb0.variables[var].terms:
            for fld in ("center", "width"):
                coords.append((var, term, fld))
                steps[(var, term, fld)] = 0.05 * span

    def propose(params, var, term, fld, delta):
        width, center = params[(var, term)]
        lo, hi = rb0.variables[var].universe
        span = hi - lo
        if fld == "center":
            center = min(max(center + delta, lo), hi)
        else:
            width = min(max(width + delta, 0.01 * span), 2.0 * span)
        if (width, center) == params[(var, term)]:
            return None
        cand = dict(params)
        cand[(var, term)] = (width, center)
        return cand

    min_step = min(rb0.variables[v].universe[1] - rb0.variables[v].universe[0]
                   for v in rb0.variables) * 0.05 / 8.0
    while evals < budget:
        improved = False
        for coord in coords:
            if evals >= budget:
                break
            for sign in (1.0, -1.0):
                moved = False
                # walk this direction while it keeps paying off
                while evals < budget:
                    cand = propose(best, *coord, sign * steps[coord])
                    if cand is None:
                        break
                    obj = evaluate(cand)
                    if not obj < best_obj:
                        break
                    best, best_obj = cand, obj
                    improved = moved = True
                if moved:
                    break
        if not improved:
            if max(steps.values()) <= min_step:
                break
            for coord in steps:
                steps[coord] /= 2.0
    return TuneResult(best, initial_obj, best_obj, evals)


# --- scenario files -----------------------------------------------------------

_SCENARIO_DEFAULTS = {
    "envelope.x": 150.0, "envelope.y": 200.0,
    "pipe.width": 10.0,
    "camera.height": 40.0, "camera.tilt": 30.0, "camera.fov": 60.0,
    "camera.image.width": 320, "camera.image.height": 240,
    "camera.intensity.pipe": 220, "camera.intensity.seabed": 80,
    "camera.noise": 30, "camera.speckle": 0.005,
    "threshold.t1": 180, "threshold.t2": 255,
    "minArea": 25,
    "step.length": 22.5, "steps.per.image": 5, "steering.gain": 0.5,
    "seed": 0,
    "rulebase": "",
}

_INT_KEYS = {"camera.image.width", "camera.image.height", "camera.intensity.pipe",
             "camera.intensity.seabed", "camera.noise", "threshold.t1", "threshold.t2",
             "minArea", "steps.per.image", "seed"}
_FLOAT_KEYS = {"envelope.x", "envelope.y", "pipe.width", "camera.height", "camera.tilt",
               "camera.fov", "camera.speckle", "step.length", "steering.gain",
               "start.x", "start.y", "start.heading"}


def _parse_waypoints(source, line_no, value):
    waypoints = []
    for part in value.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 2:
            raise ScenarioError(f"{source} line {line_no}: waypoint {part!r} is not x:y")
        try:
            waypoints.append((float(bits[0]), float(bits[1])))
        except ValueError:
            raise ScenarioError(f"{source} line {line_no}: non-numeric waypoint "
                                f"{part!r}") from None
    return tuple(waypoints)


def parse_scenario(text: str, base_dir=".", source: str = "<scenario>") -> Scenario:
    values = dict(_SCENARIO_DEFAULTS)
    waypoints = ()
    start_overrides = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        hash_pos = raw.find("#")
        line = (raw[:hash_pos] if hash_pos >= 0 else raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source} line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "pipe.waypoints":
            waypoints = _parse_waypoints(source, line_no, value)
            continue
        if key in ("start.x", "start.y", "start.heading"):
            try:
                start_overrides[key] = float(value)
            except ValueError:
                raise ScenarioError(f"{source} line {line_no}: non-numeric value "
                                    f"for {key}") from None
            continue
        if key not in values:
            raise ScenarioError(f"{source} line {line_no}: unknown key {key!r}")
        if key == "rulebase":
            values[key] = value
            continue
        try:
            values[key] = int(value) if key in _INT_KEYS else float(value)
        except ValueError:
            raise ScenarioError(f"{source} line {line_no}: non-numeric value for {key}") from None
    if not waypoints:
        raise ScenarioError(f"{source}: missing required key pipe.waypoints")

    rulebase_file = values["rulebase"]
    if rulebase_file:
        rulebase_file = str((Path(base_dir) / rulebase_file).resolve())
    start = AuvState(
        x=start_overrides.get("start.x", waypoints[0][0]),
        y=start_overrides.get("start.y", waypoints[0][1]),
        heading=start_overrides.get("start.heading", 90.0),
    )
    try:
        return Scenario(
            world=World(envelope=(values["envelope.x"], values["envelope.y"]),
                        pipeline=waypoints, pipe_width=values["pipe.width"],
                        seed=values["seed"]),
            camera=CameraModel(height_cm=values["camera.height"],
                               tilt_deg=values["camera.tilt"], fov_deg=values["camera.fov"],
                               image_width=values["camera.image.width"],
                               image_height=values["camera.image.height"],
                               pipe_intensity=values["camera.intensity.pipe"],
                               seabed_intensity=values["camera.intensity.seabed"],
                               noise_amplitude=values["camera.noise"],
                               speckle_density=values["camera.speckle"]),
            thresholds=ThresholdBand(values["threshold.t1"], values["threshold.t2"]),
            min_area=values["minArea"],
            rulebase_file=rulebase_file,
            steering_gain=values["steering.gain"],
            step_length=values["step.length"],
            steps_per_image=values["steps.per.image"],
            start=start,
        )
    except ValueError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {p}: {exc}") from exc
    return parse_scenario(text, base_dir=p.parent, source=p.name)


def load_rulebase(scenario: Scenario):
    """Rule base referenced by the scenario, or the built-in default."""
    if not scenario.rulebase_file:
        return fis.default_rulebase()
    path = Path(scenario.rulebase_file)
    try:
        return fis.parse_rulebase(path.read_text())
    except fis.RuleParseError as exc:
        raise ScenarioError(f"{path.name}: {exc}") from exc
