"""Single-vehicle traffic data pipeline.

Induction-loop records (timestamp, lane, speed, optional length) flow
through four stages:

1. `aggregate` turns per-lane record streams into tumbling windows
   carrying flow J = count/window in veh/h, harmonic-mean (space-mean)
   speed, and density rho = J / v_mean in veh/km.
2. `extract_gaps` emits per-lane time gaps between consecutive vehicles
   and the clearance proxy gap x follower speed.
3. `bin_by_density` sorts gaps into equidistant density bins (default 85
   one-veh/km bins over [0, 85]) by the density of the window each gap
   fell in, unfolding each bin's clearances to unit mean.
4. `analyze_bin` runs the rigidity estimators on one bin: empirical
   number variance, linear tail fit, and the chi -> beta inversion,
   yielding the fitted inverse temperature beta_hat of that density.

`fundamental_diagram` reduces the same windows to J(rho) and its finite
difference derivative. `synth_generate` fabricates record files with a
prescribed density -> beta profile so the whole chain can be validated
round trip without proprietary detector data.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import gas, rigidity

SPEED_MAX_KMH = 250.0
FREE_FLOW_SPEED_KMH = 120.0
_LEVEL_GUARD_S = 600.0

#: descriptive regime labels for reports; not parameters of the method
FREE_FLOW_RHO_MAX = 15.0
CONGESTED_RHO_MIN = 35.0


@dataclass(frozen=True)
class VehicleRecord:
    """One detector passage: time in s, lane id, speed in km/h, length in m."""

    timestamp: float
    lane: int
    speed: float
    length: float | None = None


@dataclass(frozen=True)
class ColumnFormat:
    """Delimiter and zero-based column positions of the input fields."""

    delimiter: str = ","
    timestamp: int = 0
    lane: int = 1
    speed: int = 2
    length: int | None = 3


class RecordColumns(Sequence):
    """Column-oriented store of vehicle records, sorted by (lane, timestamp)."""

    __slots__ = ("timestamp", "lane", "speed", "length")

    def __init__(self, timestamp, lane, speed, length=None):
        ts = np.asarray(timestamp, dtype=float)
        ln = np.asarray(lane, dtype=np.int64)
        sp = np.asarray(speed, dtype=float)
        le = (np.full(ts.size, math.nan) if length is None
              else np.asarray(length, dtype=float))
        if not (ts.size == ln.size == sp.size == le.size):
            raise ValueError("record columns must have equal length")
        order = np.lexsort((ts, ln))
        self.timestamp = ts[order]
        self.lane = ln[order]
        self.speed = sp[order]
        self.length = le[order]

    def __len__(self) -> int:
        return int(self.timestamp.size)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return RecordColumns(self.timestamp[i], self.lane[i],
                                 self.speed[i], self.length[i])
        le = float(self.length[i])
        return VehicleRecord(float(self.timestamp[i]), int(self.lane[i]),
                             float(self.speed[i]), None if math.isnan(le) else le)

    def lane_slices(self) -> list[tuple[int, slice]]:
        """Contiguous (lane id, slice) blocks; records are lane-major."""
        if len(self) == 0:
            return []
        ids, starts = np.unique(self.lane, return_index=True)
        bounds = np.append(starts, self.lane.size)
        return [(int(ids[j]), slice(int(bounds[j]), int(bounds[j + 1])))
                for j in range(ids.size)]


def _as_columns(records) -> RecordColumns:
    if isinstance(records, RecordColumns):
        return records
    rows = list(records)
    return RecordColumns(
        [r.timestamp for r in rows],
        [r.lane for r in rows],
        [r.speed for r in rows],
        [math.nan if r.length is None else r.length for r in rows],
    )


def load_records(path, format_spec: ColumnFormat = ColumnFormat()) -> RecordColumns:
    """Parse a delimiter-separated record file, sorted per lane.

    Blank lines and '#' comments are skipped; an unparseable first content
    line is treated as an optional header. Lines that fail to parse or
    violate the sanity bounds (finite timestamp, speed in (0, 250] km/h)
    are rejected and counted; more than 1% rejected is a hard error naming
    the offending line numbers.
    """
    fmt = format_spec
    need = max(fmt.timestamp, fmt.lane, fmt.speed) + 1
    ts, ln, sp, le = [], [], [], []
    bad: list[int] = []
    total = 0
    first_content = True
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(fmt.delimiter)]
            try:
                t = float(parts[fmt.timestamp]) if len(parts) >= need else math.nan
                v = float(parts[fmt.speed])
                lane = int(float(parts[fmt.lane]))
                if not (math.isfinite(t) and 0.0 < v <= SPEED_MAX_KMH):
                    raise ValueError
                length = math.nan
                if fmt.length is not None and len(parts) > fmt.length and parts[fmt.length]:
                    length = float(parts[fmt.length])
                    if not (math.isfinite(length) and length > 0):
                        raise ValueError
            except (ValueError, IndexError):
                if first_content:
                    first_content = False
                    continue  # optional header
                total += 1
                bad.append(lineno)
                continue
            first_content = False
            total += 1
            ts.append(t)
            ln.append(lane)
            sp.append(v)
            le.append(length)
    if total and len(bad) > 0.01 * total:
        shown = ", ".join(str(n) for n in bad[:20])
        more = "" if len(bad) <= 20 else f" (+{len(bad) - 20} more)"
        raise ValueError(
            f"{len(bad)} of {total} lines malformed in {path}: lines {shown}{more}")
    return RecordColumns(ts, ln, sp, le)


@dataclass(frozen=True)
class AggregationWindow:
    """One tumbling per-lane window with its macroscopic quantities."""

    start: float
    end: float
    lane: int
    count: int
    flow_J: float
    mean_speed: float
    density_rho: float


def aggregate(records, window_seconds: float = 60.0) -> list[AggregationWindow]:
    """Per-lane tumbling windows of flow, harmonic-mean speed and density.

    Windows are anchored at integer multiples of window_seconds; empty
    windows are not emitted. rho = J / v_mean holds per window by
    construction.
    """
    w = float(window_seconds)
    if not (w > 0 and math.isfinite(w)):
        raise ValueError(f"window_seconds must be positive, got {window_seconds!r}")
    cols = _as_columns(records)
    out: list[AggregationWindow] = []
    for lane_id, block in cols.lane_slices():
        k = np.floor(cols.timestamp[block] / w).astype(np.int64)
        inv_speed = 1.0 / cols.speed[block]
        ids, starts, counts = np.unique(k, return_index=True, return_counts=True)
        harm = counts / np.add.reduceat(inv_speed, starts)
        flows = counts * (3600.0 / w)
        for j in range(ids.size):
            out.append(AggregationWindow(
                start=float(ids[j]) * w,
                end=float(ids[j] + 1) * w,
                lane=lane_id,
                count=int(counts[j]),
                flow_J=float(flows[j]),
                mean_speed=float(harm[j]),
                density_rho=float(flows[j] / harm[j]),
            ))
    return out


@dataclass(frozen=True, eq=False)
class GapTable:
    """Per-lane time gaps and clearance proxies, lane-major order.

    timestamp is the follower's passage time; dropped counts non-positive
    gaps removed (equal timestamps).
    """

    lane: np.ndarray
    timestamp: np.ndarray
    timegap_s: np.ndarray
    clearance_m: np.ndarray
    dropped: int

    def __len__(self) -> int:
        return int(self.timegap_s.size)

    def for_lane(self, lane_id: int) -> "GapTable":
        m = self.lane == lane_id
        return GapTable(self.lane[m], self.timestamp[m],
                        self.timegap_s[m], self.clearance_m[m], 0)


def extract_gaps(records) -> GapTable:
    """Time gaps of consecutive same-lane vehicles and clearance proxies.

    clearance = timegap x follower speed (km/h to m/s); the first car of a
    lane emits nothing.
    """
    cols = _as_columns(records)
    lanes, times, gaps, clear = [], [], [], []
    dropped = 0
    for lane_id, block in cols.lane_slices():
        t = cols.timestamp[block]
        if t.size < 2:
            continue
        dt = np.diff(t)
        keep = dt > 0
        dropped += int((~keep).sum())
        lanes.append(np.full(int(keep.sum()), lane_id, dtype=np.int64))
        times.append(t[1:][keep])
        gaps.append(dt[keep])
        clear.append(dt[keep] * (cols.speed[block][1:][keep] / 3.6))
    if not lanes:
        empty = np.empty(0)
        return GapTable(np.empty(0, dtype=np.int64), empty, empty, empty, dropped)
    return GapTable(np.concatenate(lanes), np.concatenate(times),
                    np.concatenate(gaps), np.concatenate(clear), dropped)


@dataclass(frozen=True, eq=False)
class DensityBin:
    """Gaps of one density slice [rho_lo, rho_hi) with fit results.

    chi_hat, gamma_hat, beta_hat stay NaN until analyze_bin fills them.
    flags is a tuple of markers such as "unreliable" or "chi_out_of_range".
    """

    rho_lo: float
    rho_hi: float
    timegaps: np.ndarray
    clearances_unfolded: gas.SpacingSequence
    flow_mean: float
    record_count: int
    chi_hat: float = math.nan
    gamma_hat: float = math.nan
    beta_hat: float = math.nan
    flags: tuple[str, ...] = ()

    @property
    def rho_center(self) -> float:
        return 0.5 * (self.rho_lo + self.rho_hi)


def _window_arrays(windows, window_seconds=None):
    w_lane = np.array([win.lane for win in windows], dtype=np.int64)
    w_start = np.array([win.start for win in windows])
    w_rho = np.array([win.density_rho for win in windows])
    w_flow = np.array([win.flow_J for win in windows])
    if window_seconds is None:
        window_seconds = windows[0].end - windows[0].start
    return w_lane, w_start, w_rho, w_flow, float(window_seconds)


def bin_by_density(gaps: GapTable, windows, bin_width: float = 1.0,
                   rho_max: float = 85.0, min_gaps: int = 1000) -> list[DensityBin]:
    """Assign gaps to equidistant density bins via their window's density.

    Gaps in windows at or above rho_max are discarded. Each bin's
    clearances are unfolded to mean exactly one; bins with fewer than
    min_gaps gaps are flagged "unreliable".
    """
    if bin_width <= 0 or rho_max <= 0:
        raise ValueError("bin_width and rho_max must be positive")
    if not windows:
        raise ValueError("no aggregation windows given")
    n_bins = int(round(rho_max / bin_width))
    w_lane, w_start, w_rho, w_flow, w = _window_arrays(windows)
    # composite (lane, window index) keys; gaps always hit an existing
    # window because the follower record itself produced one
    w_k = np.rint(w_start / w).astype(np.int64)
    g_k = np.floor(gaps.timestamp / w).astype(np.int64)
    span = max(int(w_k.max()), int(g_k.max()) if g_k.size else 0) + 1
    w_code = w_lane * span + w_k
    g_code = gaps.lane * span + g_k
    pos = np.searchsorted(w_code, g_code)
    if g_code.size and not (w_code[np.minimum(pos, w_code.size - 1)] == g_code).all():
        raise ValueError("gap timestamps not covered by the aggregation windows")
    rho_of_gap = w_rho[pos] if g_code.size else np.empty(0)
    gap_bin = np.floor(rho_of_gap / bin_width).astype(np.int64)
    win_bin = np.floor(w_rho / bin_width).astype(np.int64)
    bins: list[DensityBin] = []
    for b in range(n_bins):
        sel = gap_bin == b
        clearances = gaps.clearance_m[sel]
        in_bin = win_bin == b
        flow = float(w_flow[in_bin].mean()) if in_bin.any() else math.nan
        unfolded = gas.SpacingSequence(clearances)
        if clearances.size:
            unfolded = unfolded.unfolded()
        count = int(sel.sum())
        bins.append(DensityBin(
            rho_lo=b * bin_width,
            rho_hi=(b + 1) * bin_width,
            timegaps=gaps.timegap_s[sel],
            clearances_unfolded=unfolded,
            flow_mean=flow,
            record_count=count,
            flags=() if count >= min_gaps else ("unreliable",),
        ))
    return bins


def analyze_bin(density_bin: DensityBin, L_grid=None, L_min: float = 10.0) -> DensityBin:
    """Fit chi_hat, gamma_hat, beta_hat for one reliable bin.

    Composes empirical_number_variance, fit_linear_tail and invert_chi.
    A fitted slope outside the invertible range stores the clamped
    endpoint beta (0 above chi = 1, the cap below chi(64)) together with
    a "chi_out_of_range" flag.
    """
    if "unreliable" in density_bin.flags:
        raise ValueError("bin is flagged unreliable; not enough gaps to fit")
    if L_grid is None:
        L_grid = np.arange(2.0, 21.0)
    curve = rigidity.empirical_number_variance(density_bin.clearances_unfolded, L_grid)
    slope, intercept, _ = rigidity.fit_linear_tail(curve, L_min)
    flags = density_bin.flags
    floor_val = rigidity.chi_coefficient(64.0)
    if slope > 1.0:
        beta_hat, flags = 0.0, flags + ("chi_out_of_range",)
    elif slope <= floor_val:
        beta_hat, flags = 64.0, flags + ("chi_out_of_range",)
    else:
        beta_hat = rigidity.invert_chi(slope)
    return dataclasses.replace(density_bin, chi_hat=slope, gamma_hat=intercept,
                               beta_hat=beta_hat, flags=flags)


@dataclass(frozen=True, eq=False)
class FundamentalDiagram:
    """Mean flow J(rho) at bin centers and its finite-difference derivative."""

    rho: np.ndarray
    flow: np.ndarray
    flow_derivative: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.rho.tolist(), self.flow.tolist()))

    @property
    def derivative(self) -> list[tuple[float, float]]:
        return list(zip(self.rho.tolist(), self.flow_derivative.tolist()))


def fundamental_diagram(windows, bin_width: float = 1.0) -> FundamentalDiagram:
    """Bin windows by density and reduce to J(rho) with J' in km/h.

    The derivative uses central differences with one-sided ends, so it has
    as many points as the diagram itself. Needs at least 2 populated bins.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if not windows:
        raise ValueError("no aggregation windows given")
    _, _, w_rho, w_flow, _ = _window_arrays(windows)
    win_bin = np.floor(w_rho / bin_width).astype(np.int64)
    ids, inverse = np.unique(win_bin, return_inverse=True)
    if ids.size < 2:
        raise ValueError("need at least 2 populated density bins")
    sums = np.bincount(inverse, weights=w_flow)
    counts = np.bincount(inverse)
    flow = sums / counts
    centers = (ids + 0.5) * bin_width
    return FundamentalDiagram(centers, flow, np.gradient(flow, centers))


def synth_generate(beta_profile, duration_s: float, lanes: int = 1,
                   seed=0) -> RecordColumns:
    """Fabricate detector records realizing a density -> beta profile.

    Each (rho, beta) level occupies its own time block (blocks separated
    by a 600 s guard so windows never mix levels). Within a level every
    lane carries an independent spacing stream from the beta gas, scaled
    so the mean time gap realizes flow J = rho v at the level's constant
    speed v = 120 (1 - rho/120) km/h; window-estimated densities then
    match rho in expectation. Deterministic per seed.
    """
    if not beta_profile:
        raise ValueError("beta_profile must contain at least one rho: beta level")
    if not (isinstance(lanes, (int, np.integer)) and lanes >= 1):
        raise ValueError(f"lanes must be a positive integer, got {lanes!r}")
    duration_s = float(duration_s)
    if not (duration_s > 0 and math.isfinite(duration_s)):
        raise ValueError(f"duration_s must be positive, got {duration_s!r}")
    levels = sorted((float(r), float(b)) for r, b in dict(beta_profile).items())
    for rho, beta in levels:
        if not 0.0 <= rho <= 85.0:
            raise ValueError(f"density {rho} outside [0, 85] veh/km/lane")
        if not (beta >= 0.0 and math.isfinite(beta)):
            raise ValueError(f"beta must be a finite non-negative real, got {beta}")
    children = np.random.SeedSequence(seed).spawn(len(levels) * int(lanes))
    ts, ln, sp = [], [], []
    t0 = 0.0
    for i, (rho, beta) in enumerate(levels):
        speed = FREE_FLOW_SPEED_KMH * (1.0 - rho / FREE_FLOW_SPEED_KMH)
        flow = rho * speed
        n = int(round(flow * duration_s / 3600.0))
        if speed <= 0 or n < 2:
            raise ValueError(
                f"infeasible level rho={rho}: flow {flow:.1f} veh/h yields "
                f"{n} vehicles in {duration_s:.0f} s")
        params = gas.make_gas(beta)
        scale = (3600.0 / flow) / gas.moment(params, 1)
        for lane_id in range(1, int(lanes) + 1):
            child = children[i * int(lanes) + lane_id - 1]
            seq = gas.sample_spacings(params, n, child)
            ts.append(t0 + np.cumsum(seq.spacings * scale))
            ln.append(np.full(n, lane_id, dtype=np.int64))
            sp.append(np.full(n, speed))
        t0 += duration_s + _LEVEL_GUARD_S
    return RecordColumns(np.concatenate(ts), np.concatenate(ln), np.concatenate(sp))


def write_records(records, path) -> None:
    """Write records as delimiter-separated text that round-trips exactly."""
    cols = _as_columns(records)
    with_length = bool(np.isfinite(cols.length).any())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# timestamp_s,lane_id,speed_kmh" + (",length_m" if with_length else "") + "\n")
        for i in range(len(cols)):
            row = f"{float(cols.timestamp[i])!r},{int(cols.lane[i])},{float(cols.speed[i])!r}"
            if with_length and math.isfinite(cols.length[i]):
                row += f",{float(cols.length[i])!r}"
            fh.write(row + "\n")
