"""Bundled example systems, their exact answers, and verification runs.

Three examples ship with the package:

* ``r2`` — the plane with saddle drift and one shared control channel.
  The control set containing the origin is (-1,1) x [-1,1]; the periodic
  point set is its interior (-1,1)^2.
* ``heisenberg`` — the Heisenberg group with its center reduced to a unit
  circle.  The periodic point set is (-1,1)^2 x circle and the central
  periodic points stay bounded.
* ``heisenberg-unbounded`` — the same dynamics on the full group, where the
  noncompact center lets certified periodic points reach |x3| > 10.

``verify_<example>`` functions re-run each example against these answers
and return named pass/fail checks; the command-line ``verify-example``
command prints them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigBundle, load_config
from .dynamics import ControlLaw
from .errors import ConfigError
from .reach import (GridClassification, PerSetQuery, boundedness_report,
                    estimate_control_set, estimate_per_set, make_grid)

EXAMPLE_NAMES = ("r2", "heisenberg", "heisenberg-unbounded")

# Central-pump loop: u = +1 for RISE then u = -1 for FALL returns the
# unstable coordinate exactly to 0 (exp(RISE) - 1 = 0.95 rises, then
# 1 - 0.05 exp(t) decays back to 0 at FALL) while each loop adds a fixed
# positive increment ~1.7634 to the central coordinate.  A final zero-control
# segment lets the stable coordinate relax back onto the central axis.
PUMP_RISE = float(np.log(1.95))
PUMP_FALL = float(np.log(20.0))
PUMP_CYCLE = PUMP_RISE + PUMP_FALL
PUMP_MAX_CYCLES = 6
PUMP_MIN_RELAX = 4.3
PUMP_MAX_RELAX = 6.0


def example_config_path(name: str) -> Path:
    """Filesystem path of a bundled example configuration."""
    if name not in EXAMPLE_NAMES:
        raise ConfigError(f"unknown example {name!r}; "
                          f"expected one of {EXAMPLE_NAMES}")
    return Path(str(resources.files("nilctrl") / "data" / f"{name}.toml"))


def load_example(name: str) -> ConfigBundle:
    return load_config(example_config_path(name))


def central_pump_laws(t_max: float):
    """Deterministic witness laws accumulating central-coordinate gain.

    Both control polarities of the bang-bang loop are returned (they mirror
    the hyperbolic coordinates; the central gain is identical).  Loop count
    is capped: the unstable coordinate amplifies integration error like
    exp(t), so laws stay short enough that the final distance to the central
    axis is far below the matching tolerance at the fine integration step.
    """
    n = int((t_max - PUMP_MIN_RELAX) // PUMP_CYCLE)
    n = min(PUMP_MAX_CYCLES, max(0, n))
    relax = min(PUMP_MAX_RELAX, t_max - n * PUMP_CYCLE)
    out = []
    for sign in (1.0, -1.0):
        pieces = [(PUMP_RISE, np.array([sign])),
                  (PUMP_FALL, np.array([-sign]))] * n
        pieces.append((relax, np.array([0.0])))
        out.append((np.zeros(3), ControlLaw(tuple(pieces))))
    return tuple(out)


# ---------------------------------------------------------------------------
# Exact answers and grid scoring
# ---------------------------------------------------------------------------

def plane_box_inside(centers: np.ndarray) -> np.ndarray:
    """Membership in the open unit box of the first two coordinates."""
    return np.max(np.abs(centers[:, :2]), axis=1) < 1.0


def plane_box_boundary_distance(centers: np.ndarray) -> np.ndarray:
    """Sup-norm distance to the unit-box boundary in the first two coordinates."""
    return np.abs(np.max(np.abs(centers[:, :2]), axis=1) - 1.0)


def grid_agreement(grid: GridClassification, inside_fn,
                   boundary_distance_fn, collar: float = 0.05):
    """Fraction of collar-excluded cells whose class matches ``inside_fn``.

    Cells whose centers lie within ``collar`` of the reference boundary are
    not scored (sampling cannot resolve membership there); ``unknown``
    cells count as disagreement.
    """
    centers = grid.cell_centers()
    scored = boundary_distance_fn(centers) > collar
    agree = (grid.classes == 1) == inside_fn(centers)
    n_scored = int(scored.sum())
    frac = float(np.mean(agree[scored])) if n_scored else 0.0
    return frac, n_scored


# ---------------------------------------------------------------------------
# Verification runs
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class VerificationOutcome:
    example: str
    checks: list = field(default_factory=list)
    elapsed: float = 0.0
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(f"no check named {name!r} in {self.example}")

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(CheckResult(name, bool(passed), detail))

    def summary(self) -> str:
        lines = [f"example {self.example}: "
                 f"{'PASS' if self.passed else 'FAIL'} "
                 f"({self.elapsed:.1f} s)"]
        lines += ["  " + c.line() for c in self.checks]
        return "\n".join(lines)


def verify_r2(seed: int = 0, budget: int = 20000, t_max: float = 8.0,
              resolution: int = 101, collar: float = 0.05
              ) -> VerificationOutcome:
    """Control set ~ (-1,1) x [-1,1] and periodic set ~ (-1,1)^2."""
    t_start = time.time()
    bundle = load_example("r2")
    system = bundle.build_system()
    out = VerificationOutcome(example="r2")
    window = bundle.window(system.dim)

    grid_c = make_grid(system, window, resolution)
    t0 = time.time()
    est_c = estimate_control_set(system, budget=budget, grid=grid_c,
                                 t_max=t_max, seed=seed)
    dt_c = time.time() - t0
    frac_c, n_c = grid_agreement(grid_c, plane_box_inside,
                                 plane_box_boundary_distance, collar)
    out.add("control-set-agreement", frac_c >= 0.95,
            f"{100 * frac_c:.2f}% of {n_c} scored cells (need >= 95%)")
    out.add("control-set-runtime", dt_c < 120.0,
            f"{dt_c:.1f} s (need < 120 s)")

    grid_p = make_grid(system, window, resolution)
    t0 = time.time()
    est_p = estimate_per_set(system, PerSetQuery(f_kind="central_subgroup"),
                             grid=grid_p, budget=budget, t_max=t_max,
                             seed=seed)
    dt_p = time.time() - t0
    frac_p, n_p = grid_agreement(grid_p, plane_box_inside,
                                 plane_box_boundary_distance, collar)
    out.add("per-set-agreement", frac_p >= 0.95,
            f"{100 * frac_p:.2f}% of {n_p} scored cells (need >= 95%)")
    out.add("per-set-runtime", dt_p < 120.0, f"{dt_p:.1f} s (need < 120 s)")

    out.elapsed = time.time() - t_start
    out.data = {"bundle": bundle, "system": system,
                "control_set": est_c, "per_set": est_p,
                "grid_control": grid_c, "grid_per": grid_p,
                "agreement_control": frac_c, "agreement_per": frac_p}
    return out


def verify_heisenberg(seed: int = 0, budget: int = 30000, t_max: float = 8.0,
                      resolution: int = 101, circle_bins: int = 64,
                      collar: float = 0.05,
                      schedule=((8.0, 8000), (16.0, 8000), (32.0, 8000))
                      ) -> VerificationOutcome:
    """Periodic set ~ (-1,1)^2 x circle, with a BOUNDED growth verdict."""
    t_start = time.time()
    bundle = load_example("heisenberg")
    system = bundle.build_system()
    out = VerificationOutcome(example="heisenberg")
    window = bundle.window(2)

    grid = make_grid(system, window, resolution, circle_bins=circle_bins)
    est = estimate_per_set(system, PerSetQuery(f_kind="central_subgroup"),
                           grid=grid, budget=budget, t_max=t_max, seed=seed)
    frac, n_cells = grid_agreement(grid, plane_box_inside,
                                   plane_box_boundary_distance, collar)
    out.add("per-set-agreement", frac >= 0.93,
            f"{100 * frac:.2f}% of {n_cells} scored cells (need >= 93%)")

    report = boundedness_report(system, schedule, seed=seed)
    out.add("bounded-verdict", report.verdict == "BOUNDED",
            f"verdict {report.verdict}, extents "
            + "/".join(f"{s[3]:.3f}" for s in report.stages))
    out.add("compactness-agreement",
            report.g0_compact and report.agreement is True,
            f"central subgroup compact: {report.g0_compact}, "
            f"agreement: {report.agreement}")

    out.elapsed = time.time() - t_start
    out.add("total-runtime", out.elapsed < 600.0,
            f"{out.elapsed:.1f} s (need < 600 s)")
    out.data = {"bundle": bundle, "system": system, "per_set": est,
                "grid": grid, "agreement": frac, "report": report}
    return out


def verify_heisenberg_unbounded(seed: int = 0,
                                schedule=((2.0, 3000), (4.0, 6000),
                                          (8.0, 8000), (16.0, 10000),
                                          (32.0, 12000))
                                ) -> VerificationOutcome:
    """UNBOUNDED verdict with certified periodic points beyond |x3| = 10."""
    t_start = time.time()
    bundle = load_example("heisenberg-unbounded")
    system = bundle.build_system()
    out = VerificationOutcome(example="heisenberg-unbounded")

    report = boundedness_report(system, schedule, seed=seed,
                                certify_laws=central_pump_laws)
    out.add("unbounded-verdict", report.verdict == "UNBOUNDED",
            f"verdict {report.verdict}, extents "
            + "/".join(f"{s[3]:.3f}" for s in report.stages))
    out.add("compactness-agreement",
            (not report.g0_compact) and report.agreement is True,
            f"central subgroup compact: {report.g0_compact}, "
            f"agreement: {report.agreement}")

    est = report.final_estimate
    far = np.abs(est.points[:, 2]) > 10.0 if est.n_points else \
        np.zeros(0, dtype=bool)
    out.add("witnesses-beyond-10", bool(far.any()),
            f"{int(far.sum())} certified points with |x3| > 10")

    replay_detail = "no far witness to replay"
    replay_ok = False
    if far.any():
        i = int(np.flatnonzero(far)[np.argmax(np.abs(est.points[far, 2]))])
        w = est.witness(i)
        replay_system = system if w["cloud"] == "forward" else \
            system.reversed_system()
        sim = replay_system.simulate(w["start"], w["law"], w["time"])
        gap = float(np.max(np.abs(sim.endpoint - est.points[i])))
        replay_ok = gap < 1e-4
        replay_detail = (f"replayed law of {len(w['law'].pieces)} pieces to "
                         f"t={w['time']:.2f}: endpoint gap {gap:.2e}")
    out.add("witness-replay", replay_ok, replay_detail)

    out.elapsed = time.time() - t_start
    out.data = {"bundle": bundle, "system": system, "report": report}
    return out


_VERIFIERS = {"r2": verify_r2, "heisenberg": verify_heisenberg,
              "heisenberg-unbounded": verify_heisenberg_unbounded}


def verify_example(name: str, seed: int = 0) -> VerificationOutcome:
    """Run the named example's verification with its default budgets."""
    if name not in _VERIFIERS:
        raise ConfigError(f"unknown example {name!r}; "
                          f"expected one of {EXAMPLE_NAMES}")
    return _VERIFIERS[name](seed=seed)
