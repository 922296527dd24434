"""Monte-Carlo reachability: reachable clouds, periodic-point sets,
control-set estimates, and boundedness verdicts.

The estimators share one sampling scheme: random piecewise-constant laws
(dwell times uniform in [0.05, 0.5] quantized to the integration grid,
values half uniform in the control box and half from its vertex set), each
law owned by a deterministic per-index substream of the master seed, so
results are reproducible and grow monotonically with the budget.

Periodic-point search runs two clouds: forward trajectories from the
reference set F and backward trajectories (time-reversed system) from F.
A point certifies as periodic either by returning into the epsilon-ball of
F directly, or by epsilon-matching a point of the opposite cloud; in both
cases the whole open prefix of its trajectory is marked, since any earlier
point reaches the certified one by continuing the same law.  A matched
certificate consists of two exactly integrated legs whose junction gap is
at most epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .algebra import spectral_decompose
from .dynamics import ControlLaw, LinearSystem, integrate_law, rk4_step

DEFAULT_EPS = 0.02
DEFAULT_DT = 0.01
DEFAULT_KEEP = 2          # record every 2nd step: sample spacing 0.02
DWELL_RANGE = (0.05, 0.5)


# ---------------------------------------------------------------------------
# Reference sets F
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PerSetQuery:
    """Which reference set F periodicity is measured against.

    f_kind is one of "identity" (F = {e}), "central_subgroup" (F = the
    zero-spectral coordinate subspace of the drift, lattice-reduced), or
    "point_list" (explicit points).  Membership tolerance is epsilon in the
    lattice-aware sup-norm.
    """

    f_kind: str = "identity"
    tolerance: float = DEFAULT_EPS
    points: tuple = ()

    def __post_init__(self):
        if self.f_kind not in ("identity", "central_subgroup", "point_list"):
            raise ValueError(f"unknown reference-set kind {self.f_kind!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.f_kind == "point_list" and not len(self.points):
            raise ValueError("point_list query needs at least one point")


def central_coordinates(system: LinearSystem) -> np.ndarray:
    """Indices of the coordinate axes spanning the drift's zero-spectral part.

    Raises if that subspace is not coordinate-aligned (the reference-set
    machinery realizes it as a coordinate subspace).
    """
    dec = spectral_decompose(system.drift)
    Z0 = dec.zero_basis
    if Z0.shape[1] == 0:
        return np.array([], dtype=int)
    proj = Z0 @ Z0.T
    on_axis = [i for i in range(system.dim)
               if abs(proj[i, i] - 1.0) < 1e-9]
    if len(on_axis) != Z0.shape[1]:
        raise ValueError(
            "zero-spectral subspace of the drift is not coordinate-aligned; "
            "central-subgroup reference sets need coordinate axes")
    return np.array(on_axis, dtype=int)


def central_subgroup_compact(system: LinearSystem) -> bool:
    """Whether the subgroup of the zero-spectral part is a compact torus.

    True exactly when the lattice directions span the whole zero-spectral
    subspace of the drift (every central degree of freedom is circular).
    """
    dec = spectral_decompose(system.drift)
    Z0 = dec.zero_basis
    lat = np.array([j - 1 for j in system.group.lattice], dtype=int)
    if Z0.shape[1] != lat.size:
        return False
    if Z0.shape[1] == 0:
        return True
    E = np.zeros((system.dim, lat.size))
    E[lat, np.arange(lat.size)] = 1.0
    return float(np.max(np.abs(Z0 - E @ (E.T @ Z0)))) < 1e-9


class _ReferenceSet:
    """Distance-to-F and start-point sampling for a PerSetQuery."""

    def __init__(self, system: LinearSystem, query: PerSetQuery):
        self.system = system
        self.query = query
        self.kind = query.f_kind
        if self.kind == "central_subgroup":
            self.axes = central_coordinates(system)
            mask = np.ones(system.dim, bool)
            mask[self.axes] = False
            self.off_axes = np.flatnonzero(mask)
            lat = np.array([j - 1 for j in system.group.lattice], dtype=int)
            self.circle_axes = np.intersect1d(self.axes, lat)
            self.free_axes = np.setdiff1d(self.axes, lat)
        elif self.kind == "point_list":
            self.points = np.atleast_2d(np.asarray(query.points, float))

    def distance(self, X: np.ndarray) -> np.ndarray:
        """Per-row lattice-aware sup-norm distance from X to F."""
        X = np.atleast_2d(np.asarray(X, float))
        if self.kind == "identity":
            return self.system.group.distance(X, np.zeros(self.system.dim))
        if self.kind == "central_subgroup":
            if self.off_axes.size == 0:
                return np.zeros(X.shape[0])
            return np.max(np.abs(X[:, self.off_axes]), axis=1)
        d = np.stack([self.system.group.distance(X, p) for p in self.points])
        return np.min(d, axis=0)

    def sample_start(self, rng: np.random.Generator) -> np.ndarray:
        """A start point on F.

        Circular central directions are drawn uniformly on the circle;
        noncompact central directions start at 0 so that any unboundedness
        found is produced by the dynamics, not by seed placement.
        """
        x = np.zeros(self.system.dim)
        if self.kind == "central_subgroup" and self.circle_axes.size:
            x[self.circle_axes] = rng.uniform(0.0, 1.0, self.circle_axes.size)
        elif self.kind == "point_list":
            x = self.points[rng.integers(len(self.points))].copy()
        return x


# ---------------------------------------------------------------------------
# Law sampling and cloud integration
# ---------------------------------------------------------------------------

def _substream(seed: int, tag: int, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(tag, index)))


def sample_law(rng: np.random.Generator, omega: np.ndarray, horizon: float,
               dt: float = DEFAULT_DT) -> ControlLaw:
    """Random piecewise-constant law covering at least ``horizon``.

    Dwell times are uniform in [0.05, 0.5], quantized to multiples of the
    integration grid dt; each piece value is drawn uniformly from the
    control box with probability 1/2 and from its vertex set otherwise
    (extremal values drive trajectories to region boundaries).
    """
    omega = np.asarray(omega, float)
    m = omega.shape[0]
    pieces, total = [], 0.0
    while total < horizon:
        dwell = dt * max(1, round(rng.uniform(*DWELL_RANGE) / dt))
        if rng.uniform() < 0.5:
            val = rng.uniform(omega[:, 0], omega[:, 1])
        else:
            pick = rng.integers(0, 2, m)
            val = np.where(pick == 0, omega[:, 0], omega[:, 1])
        pieces.append((dwell, val))
        total += dwell
    return ControlLaw(tuple(pieces))


@dataclass(eq=False)
class _Cloud:
    """Flat sample arrays for one direction: points with provenance."""

    points: np.ndarray        # (P, n) reduced states
    traj: np.ndarray          # (P,) trajectory index
    times: np.ndarray         # (P,) sample time within the trajectory
    n_traj: int
    laws: list                # per-trajectory ControlLaw
    starts: np.ndarray        # (n_traj, n)


def _integrate_batch(system: LinearSystem, starts: np.ndarray, laws: list,
                     horizon: float, dt: float, keep: int):
    """March all trajectories on a common dt grid; laws must be dt-aligned.

    Returns (kept_times (K,), kept_states (K, N, n)).
    """
    N, n = starts.shape
    n_steps = int(round(horizon / dt))
    max_pieces = max(len(law.pieces) for law in laws)
    m = system.control_dim
    vals = np.zeros((N, max_pieces, m))
    ends = np.full((N, max_pieces), np.iinfo(np.int64).max, dtype=np.int64)
    for i, law in enumerate(laws):
        acc = 0.0
        for p, (dur, val) in enumerate(law.pieces):
            acc += dur
            vals[i, p] = val
            ends[i, p] = int(round(acc / dt))
    ptr = np.zeros(N, dtype=np.int64)
    rows = np.arange(N)
    x = system.group.reduce(np.array(starts, float))
    # Samples are stored in float32: position noise ~1e-7 is negligible
    # against the membership tolerance, and cloud memory halves.
    kept_states = np.empty((n_steps // keep + 1, N, n), dtype=np.float32)
    kept_times = np.empty(n_steps // keep + 1)
    kept_states[0] = x
    kept_times[0] = 0.0
    k_out = 1
    for j in range(n_steps):
        np.add(ptr, (ends[rows, ptr] <= j).astype(np.int64), out=ptr)
        u = vals[rows, ptr]
        f = lambda s: system.vector_field(s, u)
        x = system.group.reduce(rk4_step(f, x, dt))
        if (j + 1) % keep == 0:
            kept_states[k_out] = x
            kept_times[k_out] = (j + 1) * dt
            k_out += 1
    return kept_times[:k_out], kept_states[:k_out]


def _build_cloud(system: LinearSystem, ref: _ReferenceSet, horizon: float,
                 n_random: int, seed: int, tag: int, dt: float, keep: int,
                 certified=()) -> _Cloud:
    """Forward cloud for ``system`` (pass the reversed system for backward).

    ``certified`` holds extra (start, law) pairs integrated exactly on their
    own piece boundaries (their dwells need not be dt-aligned); they occupy
    stable leading slots so random substreams are index-aligned under budget
    growth.
    """
    laws, starts = [], []
    for i in range(n_random):
        rng = _substream(seed, tag, i)
        start = ref.sample_start(rng)
        law = sample_law(rng, system.omega, horizon, dt) if i else \
            ControlLaw.zero(system.control_dim, horizon)
        starts.append(start)
        laws.append(law)
    pts, traj, times = [], [], []
    n_cert = len(certified)
    # Certified trajectories integrate at the system's fine step (matching
    # simulate(), so witness replay reproduces them); only the sample spacing
    # follows the cloud's keep * dt cadence.  They are few, so the cost is
    # negligible, and long open-loop witnesses need the accuracy: transverse
    # integration error grows like exp(t) times the local truncation error.
    fine = min(system.step, dt)
    sub = max(1, int(round(dt / fine)))
    for c, (start, law) in enumerate(certified):
        t_arr, s_arr = integrate_law(
            lambda val: (lambda s: system.vector_field(s, val)),
            np.asarray(start, float), law, min(horizon, law.total_duration),
            fine, reduce=system.group.reduce, keep=keep * sub)
        pts.append(np.asarray(s_arr, dtype=np.float32))
        traj.append(np.full(len(t_arr), c))
        times.append(t_arr)
    if n_random:
        t_arr, s_arr = _integrate_batch(
            system, np.array(starts), laws, horizon, dt, keep)
        K, N, n = s_arr.shape
        pts.append(s_arr.reshape(K * N, n))
        traj.append(np.repeat(np.arange(N) + n_cert, K).reshape(N, K).T
                    .reshape(-1))
        times.append(np.repeat(t_arr, N))
    all_laws = [law for _, law in certified] + laws
    all_starts = np.array([np.asarray(s, float) for s, _ in certified]
                          + starts) if (certified or starts) else \
        np.zeros((0, system.dim))
    return _Cloud(points=np.concatenate(pts) if pts else
                  np.zeros((0, system.dim), dtype=np.float32),
                  traj=np.concatenate(traj).astype(np.int64) if traj else
                  np.zeros(0, dtype=np.int64),
                  times=np.concatenate(times) if times else np.zeros(0),
                  n_traj=n_cert + n_random, laws=all_laws, starts=all_starts)


# ---------------------------------------------------------------------------
# Matching and marking
# ---------------------------------------------------------------------------

def _circle_expanded(points: np.ndarray, circle_cols: np.ndarray,
                     eps: float):
    """Shifted copies of points whose circle coordinates hug the seam.

    Returns (expanded points, index into the original array), so nearest
    neighbors across the 0/1 wrap are found by a flat Euclidean tree.
    """
    pts = [points]
    idx = [np.arange(len(points))]
    for c in circle_cols:
        extra_pts, extra_idx = [], []
        for P, I in zip(pts, idx):
            low = P[:, c] < eps
            high = P[:, c] > 1.0 - eps
            if np.any(low):
                Q = P[low].copy()
                Q[:, c] += 1.0
                extra_pts.append(Q)
                extra_idx.append(I[low])
            if np.any(high):
                Q = P[high].copy()
                Q[:, c] -= 1.0
                extra_pts.append(Q)
                extra_idx.append(I[high])
        pts.extend(extra_pts)
        idx.extend(extra_idx)
    return np.concatenate(pts), np.concatenate(idx)


def _matched_mask(query_pts: np.ndarray, tree_pts: np.ndarray,
                  circle_cols: np.ndarray, eps: float) -> np.ndarray:
    """True where a query point has a tree point within Euclidean eps.

    The Euclidean ball sits inside the sup-norm ball, so a match certifies
    sup-norm proximity (conservative: some sup-close pairs are missed).
    Both sides are pre-filtered to the eps-fattened intersection of the two
    clouds' bounding boxes, which discards no pair: matched points lie
    within eps of each other, hence inside the fattened overlap.
    """
    if len(tree_pts) == 0 or len(query_pts) == 0:
        return np.zeros(len(query_pts), dtype=bool)
    free = np.setdiff1d(np.arange(query_pts.shape[1]), circle_cols)
    out = np.zeros(len(query_pts), dtype=bool)
    qsel = np.ones(len(query_pts), dtype=bool)
    tsel = np.ones(len(tree_pts), dtype=bool)
    if free.size:
        lo = np.maximum(query_pts[:, free].min(axis=0),
                        tree_pts[:, free].min(axis=0)) - eps
        hi = np.minimum(query_pts[:, free].max(axis=0),
                        tree_pts[:, free].max(axis=0)) + eps
        qsel = np.all((query_pts[:, free] >= lo)
                      & (query_pts[:, free] <= hi), axis=1)
        tsel = np.all((tree_pts[:, free] >= lo)
                      & (tree_pts[:, free] <= hi), axis=1)
        if not np.any(qsel) or not np.any(tsel):
            return out
    exp_pts, _ = _circle_expanded(tree_pts[tsel], circle_cols, eps)
    tree = cKDTree(exp_pts)
    dist, _ = tree.query(query_pts[qsel], k=1, distance_upper_bound=eps,
                         workers=-1)
    out[qsel] = np.isfinite(dist)
    return out


def _bucket_representatives(points: np.ndarray, h: float) -> np.ndarray:
    """One representative point per h-sized bucket (thins dense clusters)."""
    keys = np.round(points / h).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return points[idx]


def _chain_once(cloud: _Cloud, cert: np.ndarray, circle_cols: np.ndarray,
                eps: float) -> np.ndarray:
    """Extend certificates by matching against already-marked samples.

    A sample within eps of a marked point inherits a certificate with one
    extra junction (the marked point both reaches F and is reached from F
    along exactly integrated legs).  Marked points are thinned to bucket
    representatives before tree construction; this only reduces recall.
    """
    tau = _last_certified(cloud, cert)
    marked = (cloud.times > 0) & (cloud.times <= tau[cloud.traj])
    open_mask = cloud.times > tau[cloud.traj]
    if not np.any(marked) or not np.any(open_mask):
        return cert
    reps = _bucket_representatives(cloud.points[marked], eps / 4.0)
    gained = _matched_mask(cloud.points[open_mask], reps, circle_cols, eps)
    out = cert.copy()
    out[np.flatnonzero(open_mask)[gained]] = True
    return out


def _last_certified(cloud: _Cloud, certified: np.ndarray) -> np.ndarray:
    """Per-trajectory latest certified sample time (-inf if none)."""
    tau = np.full(cloud.n_traj, -np.inf)
    if np.any(certified):
        np.maximum.at(tau, cloud.traj[certified], cloud.times[certified])
    return tau


# ---------------------------------------------------------------------------
# Region estimates
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GridClassification:
    """Cell classification over a product grid.

    Free axes carry ``resolution`` cell centers across the window; circle
    axes carry ``circle_bins`` equal bins over [0, 1).  Class codes:
    0 = out, 1 = in, 2 = unknown.
    """

    free_axes: np.ndarray       # coordinate indices
    circle_axes: np.ndarray
    window: np.ndarray          # (n_free, 2) lo/hi
    resolution: int
    circle_bins: int
    classes: np.ndarray         # flat int8 array, C-order over (free..., circle...)

    @property
    def shape(self) -> tuple:
        return tuple([self.resolution] * len(self.free_axes)
                     + [self.circle_bins] * len(self.circle_axes))

    def axis_centers(self, k: int) -> np.ndarray:
        if k < len(self.free_axes):
            lo, hi = self.window[k]
            return np.linspace(lo, hi, self.resolution)
        return (np.arange(self.circle_bins) + 0.5) / self.circle_bins

    def cell_centers(self) -> np.ndarray:
        """(n_cells, n_axes) centers in the same C-order as ``classes``."""
        axes = [self.axis_centers(k)
                for k in range(len(self.free_axes) + len(self.circle_axes))]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def classify_points(self, points: np.ndarray,
                        fill_circle: bool = False) -> None:
        """Mark as inside every cell containing one of ``points``.

        With ``fill_circle``, each point marks every bin along the circle
        axes (used when the estimated set is a union of whole compact
        central fibers, so one witness covers its coset).
        """
        if len(points) == 0:
            return
        flat = np.zeros(len(points), dtype=np.int64)
        valid = np.ones(len(points), dtype=bool)
        for k, ax in enumerate(self.free_axes):
            lo, hi = self.window[k]
            h = (hi - lo) / (self.resolution - 1)
            idx = np.round((points[:, ax] - lo) / h).astype(np.int64)
            valid &= (idx >= 0) & (idx < self.resolution)
            flat = flat * self.resolution + np.clip(idx, 0,
                                                    self.resolution - 1)
        if fill_circle and len(self.circle_axes):
            base = flat[valid] * self.circle_bins ** len(self.circle_axes)
            base = np.unique(base)
            span = np.arange(self.circle_bins ** len(self.circle_axes))
            self.classes[(base[:, None] + span[None, :]).reshape(-1)] = 1
            return
        for ax in self.circle_axes:
            idx = np.floor(np.mod(points[:, ax], 1.0)
                           * self.circle_bins).astype(np.int64)
            idx = np.clip(idx, 0, self.circle_bins - 1)
            flat = flat * self.circle_bins + idx
        cls = self.classes
        cls[flat[valid]] = 1


def make_grid(system: LinearSystem, window, resolution: int = 101,
              circle_bins: int = 64) -> GridClassification:
    """Empty grid over ``window`` (one (lo, hi) per non-lattice axis)."""
    lat = np.array([j - 1 for j in system.group.lattice], dtype=int)
    mask = np.ones(system.dim, dtype=bool)
    mask[lat] = False
    free = np.flatnonzero(mask)
    window = np.asarray(window, float).reshape(-1, 2)
    if window.shape[0] != free.size:
        raise ValueError(
            f"window needs {free.size} (lo, hi) pairs, got {window.shape[0]}")
    shape = [resolution] * free.size + [circle_bins] * lat.size
    return GridClassification(
        free_axes=free, circle_axes=lat, window=window,
        resolution=resolution, circle_bins=circle_bins,
        classes=np.zeros(int(np.prod(shape)), dtype=np.int8))


@dataclass(eq=False)
class RegionEstimate:
    """Point-cloud estimate of a region, with provenance for every point.

    ``points`` carries the marked (certified) samples; ``traj``/``times``/
    ``cloud`` identify the trajectory each point came from (cloud 0 =
    forward, 1 = backward), so witnesses can be reconstructed on demand
    from the retained laws.  ``bbox`` is the per-coordinate min/max of the
    marked points over non-lattice coordinates.
    """

    points: np.ndarray
    traj: np.ndarray
    times: np.ndarray
    cloud: np.ndarray
    laws: tuple                  # (forward laws, backward laws)
    starts: tuple                # (forward starts, backward starts)
    params: dict
    grid: GridClassification = None
    bbox: np.ndarray = None
    diagnostic: str = ""

    def __post_init__(self):
        free = self.params.get("free_axes")
        if self.bbox is None:
            if len(self.points) and free is not None and len(free):
                sub = self.points[:, free]
                self.bbox = np.stack([sub.min(axis=0), sub.max(axis=0)],
                                     axis=1)
            else:
                self.bbox = np.zeros((0, 2))

    @property
    def n_points(self) -> int:
        return len(self.points)

    def witness(self, i: int) -> dict:
        """Law and timing that certify marked point i, for audit."""
        c, tr, t = int(self.cloud[i]), int(self.traj[i]), float(self.times[i])
        law = self.laws[c][tr]
        return {
            "cloud": "forward" if c == 0 else "backward",
            "start": self.starts[c][tr],
            "law": law if t >= law.total_duration else law.truncate(t)
            if t > 0 else law,
            "time": t,
        }


def _estimate_params(system, horizon, budget, seed, dt, keep, eps, kind):
    lat = np.array([j - 1 for j in system.group.lattice], dtype=int)
    mask = np.ones(system.dim, dtype=bool)
    mask[lat] = False
    return {
        "kind": kind, "t_max": horizon, "budget": budget, "seed": seed,
        "dt": dt, "keep": keep, "epsilon": eps,
        "free_axes": np.flatnonzero(mask), "circle_axes": lat,
    }


def _require_interior_omega(system: LinearSystem) -> None:
    """Sampling preconditions: u = 0 must be interior to the control range.

    A degenerate channel (lo = hi = 0, or 0 on the boundary) makes the
    vertex/interior sampling scheme meaningless, so estimators reject it
    up front instead of returning a silently empty exploration.
    """
    om = system.omega
    if om.shape[0] and (np.any(om[:, 0] >= 0) or np.any(om[:, 1] <= 0)):
        bad = int(np.argmax((om[:, 0] >= 0) | (om[:, 1] <= 0))) + 1
        raise ValueError(
            f"control range {bad} is {om[bad - 1].tolist()}: sampling needs "
            f"0 strictly interior (lo < 0 < hi) in every channel")


def sample_reachable(system: LinearSystem, x0, t_max: float,
                     n_samples: int, seed: int = 0, direction: str = "forward",
                     dt: float = DEFAULT_DT, keep: int = DEFAULT_KEEP,
                     laws: list = None) -> RegionEstimate:
    """Cloud of states reachable from x0 (or steering to x0, backward).

    Simulates ``n_samples`` random laws from x0, collecting every kept
    sample; trajectory 0 always runs the zero law, so the drift orbit is
    present in any estimate.  ``direction="backward"`` integrates the
    time-reversed system: its points are states from which x0 is reachable.
    ``laws`` overrides the random laws entirely.
    """
    if n_samples <= 0 and not laws:
        raise ValueError("n_samples must be positive")
    if laws is None:
        _require_interior_omega(system)
    sys_run = system if direction == "forward" else system.reversed_system()
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    x0 = np.asarray(x0, float)
    if laws is not None:
        cloud = _build_cloud(sys_run, None, t_max, 0, seed, 0, dt, keep,
                             certified=[(x0, law) for law in laws])
    else:
        class _Fixed:
            @staticmethod
            def sample_start(rng):
                return x0.copy()
        cloud = _build_cloud(sys_run, _Fixed, t_max, n_samples, seed,
                             0 if direction == "forward" else 1, dt, keep)
    params = _estimate_params(system, t_max, n_samples, seed, dt, keep,
                              np.nan, f"reachable-{direction}")
    tag = 0 if direction == "forward" else 1
    return RegionEstimate(
        points=cloud.points, traj=cloud.traj, times=cloud.times,
        cloud=np.full(len(cloud.points), tag, dtype=np.int8),
        laws=(cloud.laws, []) if tag == 0 else ([], cloud.laws),
        starts=(cloud.starts, np.zeros((0, system.dim))) if tag == 0 else
        (np.zeros((0, system.dim)), cloud.starts),
        params=params)


def estimate_per_set(system: LinearSystem, query: PerSetQuery = None,
                     grid: GridClassification = None, budget: int = 20000,
                     t_max: float = 8.0, seed: int = 0,
                     dt: float = DEFAULT_DT, keep: int = DEFAULT_KEEP,
                     certified_forward=(), chain_rounds: int = 1
                     ) -> RegionEstimate:
    """Estimate the set of F-periodic points by two-cloud witness search.

    Half the budget integrates forward from F, half integrates the reversed
    system from F.  A sample certifies by direct epsilon-return to F or by
    epsilon-matching the opposite cloud; certified samples mark their whole
    open trajectory prefix.  Each chain round then lets samples inherit
    certificates from already-marked points (one extra epsilon junction per
    round, so marked points sit within (1 + chain_rounds) * epsilon of an
    exactly-integrated periodic loop).  ``certified_forward`` injects
    deterministic (start, law) forward trajectories ahead of the random
    ones.
    """
    query = query or PerSetQuery()
    _require_interior_omega(system)
    eps = query.tolerance
    ref = _ReferenceSet(system, query)
    n_fwd = budget // 2
    n_bwd = budget - n_fwd
    fwd = _build_cloud(system, ref, t_max, n_fwd, seed, 0, dt, keep,
                       certified=tuple(certified_forward))
    bwd = _build_cloud(system.reversed_system(), ref, t_max, n_bwd, seed, 1,
                       dt, keep)
    circle = np.array([j - 1 for j in system.group.lattice], dtype=int)

    cert_f = ref.distance(fwd.points) <= eps if len(fwd.points) else \
        np.zeros(0, bool)
    cert_b = ref.distance(bwd.points) <= eps if len(bwd.points) else \
        np.zeros(0, bool)
    cert_f |= _matched_mask(fwd.points, bwd.points, circle, eps)
    cert_b |= _matched_mask(bwd.points, fwd.points, circle, eps)
    for _ in range(chain_rounds):
        cert_f = _chain_once(fwd, cert_f, circle, eps)
        cert_b = _chain_once(bwd, cert_b, circle, eps)

    tau_f = _last_certified(fwd, cert_f)
    tau_b = _last_certified(bwd, cert_b)
    mark_f = (fwd.times > 0) & (fwd.times <= tau_f[fwd.traj])
    mark_b = (bwd.times > 0) & (bwd.times <= tau_b[bwd.traj])

    points = np.concatenate([fwd.points[mark_f], bwd.points[mark_b]])
    traj = np.concatenate([fwd.traj[mark_f], bwd.traj[mark_b]])
    times = np.concatenate([fwd.times[mark_f], bwd.times[mark_b]])
    cloud = np.concatenate([np.zeros(mark_f.sum(), np.int8),
                            np.ones(mark_b.sum(), np.int8)])
    params = _estimate_params(system, t_max, budget, seed, dt, keep, eps,
                              f"per-set-{query.f_kind}")
    diagnostic = "" if len(points) else \
        "no periodic witnesses found at this budget"
    # With F = the central subgroup, the periodic set is a union of central
    # cosets: the flow's right-translation identity sends any witness for a
    # point to a witness for its central translates (same laws, translated
    # start and arrival, gaps unchanged), so one marked point classifies its
    # entire compact fiber.
    fill = query.f_kind == "central_subgroup"
    params["fiber_completed"] = fill and bool(system.group.lattice)
    est = RegionEstimate(points=points, traj=traj, times=times, cloud=cloud,
                         laws=(fwd.laws, bwd.laws),
                         starts=(fwd.starts, bwd.starts), params=params,
                         grid=grid, diagnostic=diagnostic)
    if grid is not None:
        grid.classify_points(points, fill_circle=fill)
    return est


def estimate_control_set(system: LinearSystem, budget: int = 20000,
                         grid: GridClassification = None, t_max: float = 8.0,
                         seed: int = 0, dt: float = DEFAULT_DT,
                         keep: int = DEFAULT_KEEP) -> RegionEstimate:
    """Estimate the control set containing the identity.

    Its interior equals the set of periodic points, so the estimator is the
    periodic-set search seeded on the compact central subgroup (known to
    lie inside the control set) when a lattice is present, and on the
    identity otherwise.
    """
    kind = "central_subgroup" if system.group.lattice else "identity"
    est = estimate_per_set(system, PerSetQuery(f_kind=kind), grid=grid,
                           budget=budget, t_max=t_max, seed=seed, dt=dt,
                           keep=keep)
    est.params["kind"] = "control-set"
    return est


# ---------------------------------------------------------------------------
# Boundedness verdicts
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BoundednessReport:
    """Outcome of the growth study of the central periodic set.

    verdict is BOUNDED / UNBOUNDED / INCONCLUSIVE; ``g0_compact`` states
    whether the central subgroup is a torus, and ``agreement`` whether the
    verdict matches the compactness dichotomy (None when inconclusive).
    """

    verdict: str
    g0_compact: bool
    agreement: bool
    stages: list                 # (t_max, budget, bbox, extent)
    final_estimate: RegionEstimate
    thresholds: dict

    def summary(self) -> str:
        lines = [f"verdict: {self.verdict}",
                 f"central subgroup compact: {self.g0_compact}",
                 f"agreement with dichotomy: {self.agreement}"]
        for t_max, budget, bbox, extent in self.stages:
            lines.append(
                f"  T_max={t_max:g} budget={budget}: extent={extent:.4f} "
                + " ".join(f"[{lo:+.3f},{hi:+.3f}]" for lo, hi in bbox))
        return "\n".join(lines)


def boundedness_report(system: LinearSystem, schedule,
                       query: PerSetQuery = None, seed: int = 0,
                       dt: float = DEFAULT_DT, keep: int = DEFAULT_KEEP,
                       certify_laws=None, growth_threshold: float = 10.0,
                       stabilize_tol: float = 0.02,
                       chain_rounds: int = 1) -> BoundednessReport:
    """Growth study of the central periodic set over an increasing schedule.

    ``schedule`` is a list of (T_max, budget) pairs, increasing in both;
    each stage runs the periodic-set estimator and records the bounding box
    of marked points over non-lattice coordinates.  The verdict is BOUNDED
    when the box extent grows less than ``stabilize_tol`` (relative) across
    the final two stage transitions, UNBOUNDED when the extent grows beyond
    ``growth_threshold`` times the first stage's, INCONCLUSIVE otherwise.
    ``certify_laws`` maps a stage's T_max to deterministic (start, law)
    pairs injected into the forward cloud (witness constructions).
    """
    query = query or PerSetQuery(f_kind="central_subgroup")
    schedule = list(schedule)
    if any(schedule[i][0] > schedule[i + 1][0]
           or schedule[i][1] > schedule[i + 1][1]
           for i in range(len(schedule) - 1)):
        raise ValueError("schedule must be increasing in T_max and budget")
    stages = []
    est = None
    for t_max, budget in schedule:
        cert = ()
        if certify_laws is not None:
            cert = certify_laws(t_max) if callable(certify_laws) \
                else certify_laws
        est = estimate_per_set(system, query, budget=budget, t_max=t_max,
                               seed=seed, dt=dt, keep=keep,
                               certified_forward=cert,
                               chain_rounds=chain_rounds)
        extent = float(np.max(est.bbox[:, 1] - est.bbox[:, 0])) \
            if len(est.bbox) else 0.0
        stages.append((t_max, budget, est.bbox, extent))
    extents = np.array([s[3] for s in stages])
    verdict = "INCONCLUSIVE"
    if len(extents) >= 2 and extents[0] > 0 and \
            extents[-1] > growth_threshold * extents[0] and \
            np.all(np.diff(extents) >= -stabilize_tol * extents[:-1]):
        verdict = "UNBOUNDED"
    elif len(extents) >= 3:
        g1 = (extents[-2] - extents[-3]) / max(extents[-3], 1e-30)
        g2 = (extents[-1] - extents[-2]) / max(extents[-2], 1e-30)
        if abs(g1) < stabilize_tol and abs(g2) < stabilize_tol:
            verdict = "BOUNDED"
    elif len(extents) == 2:
        g = (extents[-1] - extents[-2]) / max(extents[-2], 1e-30)
        if abs(g) < stabilize_tol:
            verdict = "BOUNDED"
    compact = central_subgroup_compact(system)
    agreement = (verdict == "BOUNDED") == compact \
        if verdict != "INCONCLUSIVE" else None
    return BoundednessReport(
        verdict=verdict, g0_compact=compact, agreement=agreement,
        stages=stages, final_estimate=est,
        thresholds={"growth_threshold": growth_threshold,
                    "stabilize_tol": stabilize_tol})
