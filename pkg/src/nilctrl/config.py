"""Structured-text configuration files defining algebras, groups, and systems.

One file describes a complete experiment subject with flat top-level keys:

* ``dim`` and ``brackets`` (rows ``[i, j, k, coeff]``, 1-based, meaning the
  bracket of basis vectors i and j contains ``coeff`` times basis vector k;
  the antisymmetric counterpart is filled in automatically) define the
  algebra; optional ``labels`` names the basis.
* optional ``lattice`` (1-based coordinate indices) turns central directions
  into unit circles.
* ``drift`` (n x n matrix), ``controls`` (list of n-vectors), ``omega``
  (one ``[lo, hi]`` pair per control), optional ``step`` define the control
  system.
* optional ``torus_dim``, ``rho_generators``, ``torus_controls`` extend the
  system to a torus semidirect product.
* optional ``law`` (rows ``[duration, u_1, ..., u_m]``) gives a default
  piecewise-constant control; optional ``window`` (one ``[lo, hi]`` per
  non-lattice coordinate) declares the grid window; optional ``name`` labels
  outputs.

Files are TOML; every parse or schema problem raises :class:`ConfigError`.
The file's SHA-256 is kept so output artifacts can embed their provenance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                        # python < 3.11
    import tomli as tomllib

from .algebra import LieAlgebra
from .dynamics import ControlLaw, LinearSystem
from .errors import ConfigError
from .group import NilGroup
from .semidirect import SemidirectSystem

_KNOWN_KEYS = {
    "name", "dim", "brackets", "labels", "lattice", "drift", "controls",
    "omega", "step", "torus_dim", "rho_generators", "torus_controls",
    "law", "window",
}


@dataclass
class ConfigBundle:
    """A parsed configuration plus its provenance hash."""

    path: Path
    raw: dict
    sha256: str
    name: str = field(init=False)

    def __post_init__(self):
        unknown = set(self.raw) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(
                f"{self.path}: unknown keys {sorted(unknown)}; "
                f"expected a subset of {sorted(_KNOWN_KEYS)}")
        self.name = str(self.raw.get("name", self.path.stem))

    # -- required/optional field access with uniform error reporting -------
    def _require(self, key: str):
        if key not in self.raw:
            raise ConfigError(f"{self.path}: missing required key {key!r}")
        return self.raw[key]

    def _array(self, key: str, value, shape_hint: str) -> np.ndarray:
        try:
            return np.asarray(value, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"{self.path}: key {key!r} is not a numeric {shape_hint}: "
                f"{exc}") from None

    # -- builders ----------------------------------------------------------
    def build_algebra(self) -> LieAlgebra:
        dim = self._require("dim")
        if not isinstance(dim, int) or dim < 1:
            raise ConfigError(f"{self.path}: dim must be a positive integer, "
                              f"got {dim!r}")
        rows = self._require("brackets")
        brackets = []
        for r, row in enumerate(rows):
            if len(row) != 4:
                raise ConfigError(
                    f"{self.path}: brackets row {r + 1} must be "
                    f"[i, j, k, coeff], got {row!r}")
            i, j, k = (int(v) for v in row[:3])
            for idx in (i, j, k):
                if not 1 <= idx <= dim:
                    raise ConfigError(
                        f"{self.path}: brackets row {r + 1} index {idx} "
                        f"outside 1..{dim}")
            brackets.append((i, j, k, float(row[3])))
        labels = self.raw.get("labels")
        if labels is not None and len(labels) != dim:
            raise ConfigError(f"{self.path}: labels must name all {dim} "
                              f"basis vectors, got {len(labels)}")
        return LieAlgebra.from_brackets(dim, brackets, labels=labels)

    def build_group(self) -> NilGroup:
        algebra = self.build_algebra()
        lattice = self.raw.get("lattice", [])
        idx = []
        for v in lattice:
            j = int(v)
            if not 1 <= j <= algebra.dim:
                raise ConfigError(f"{self.path}: lattice index {j} outside "
                                  f"1..{algebra.dim}")
            idx.append(j)
        return NilGroup(algebra, lattice=tuple(idx))

    def build_system(self) -> LinearSystem:
        group = self.build_group()
        n = group.dim
        drift = self._array("drift", self._require("drift"), "matrix")
        if drift.shape != (n, n):
            raise ConfigError(f"{self.path}: drift must be {n}x{n}, got "
                              f"shape {drift.shape}")
        controls = self._array("controls", self._require("controls"),
                               "list of vectors")
        controls = np.atleast_2d(controls)
        if controls.shape[1] != n:
            raise ConfigError(f"{self.path}: each control vector needs "
                              f"{n} entries, got shape {controls.shape}")
        omega = self._array("omega", self._require("omega"),
                            "list of [lo, hi] pairs")
        omega = omega.reshape(-1, 2) if omega.size else omega
        step = float(self.raw.get("step", 1e-3))
        try:
            return LinearSystem(group, drift, controls, omega, step=step,
                                name=self.name)
        except ValueError as exc:
            raise ConfigError(f"{self.path}: {exc}") from None

    def build_semidirect(self) -> SemidirectSystem:
        if "torus_dim" not in self.raw:
            raise ConfigError(f"{self.path}: missing required key "
                              f"'torus_dim' for a semidirect system")
        d = int(self.raw["torus_dim"])
        group = self.build_group()
        n = group.dim
        gens = self._array("rho_generators", self._require("rho_generators"),
                           "list of matrices")
        drift = self._array("drift", self._require("drift"), "matrix")
        controls = np.atleast_2d(
            self._array("controls", self._require("controls"),
                        "list of vectors"))
        m = controls.shape[0]
        torus_controls = self.raw.get("torus_controls",
                                      np.zeros((m, d)).tolist())
        torus_controls = self._array("torus_controls", torus_controls,
                                     "list of vectors")
        omega = self._array("omega", self._require("omega"),
                            "list of [lo, hi] pairs").reshape(-1, 2)
        step = float(self.raw.get("step", 1e-3))
        try:
            return SemidirectSystem(d, gens.reshape(d, n, n), group, drift,
                                    torus_controls, controls, omega,
                                    step=step, name=self.name)
        except ValueError as exc:
            raise ConfigError(f"{self.path}: {exc}") from None

    def build_law(self, horizon: float, control_dim: int) -> ControlLaw:
        """The config's ``law`` padded/truncated to ``horizon``, else u = 0."""
        rows = self.raw.get("law")
        if rows is None:
            return ControlLaw.zero(control_dim, horizon)
        pieces = []
        for r, row in enumerate(rows):
            if len(row) != 1 + control_dim:
                raise ConfigError(
                    f"{self.path}: law row {r + 1} must be "
                    f"[duration, u_1..u_{control_dim}], got {row!r}")
            dur = float(row[0])
            if dur <= 0:
                raise ConfigError(f"{self.path}: law row {r + 1} duration "
                                  f"must be positive, got {dur}")
            pieces.append((dur, np.asarray(row[1:], dtype=float)))
        law = ControlLaw(tuple(pieces))
        total = law.total_duration
        if total < horizon - 1e-9:
            pieces.append((horizon - total, np.zeros(control_dim)))
            law = ControlLaw(tuple(pieces))
        return law

    def window(self, n_free: int, default_half: float = 1.5) -> np.ndarray:
        """Grid window: the ``window`` key, else +-``default_half`` per axis."""
        win = self.raw.get("window")
        if win is None:
            return np.array([[-default_half, default_half]] * n_free)
        arr = self._array("window", win, "list of [lo, hi] pairs")
        arr = arr.reshape(-1, 2)
        if arr.shape[0] != n_free:
            raise ConfigError(f"{self.path}: window needs {n_free} "
                              f"[lo, hi] pairs, got {arr.shape[0]}")
        if np.any(arr[:, 0] >= arr[:, 1]):
            raise ConfigError(f"{self.path}: window pairs must have lo < hi")
        return arr


def load_config(path) -> ConfigBundle:
    """Parse a configuration file; all failure modes raise ConfigError."""
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{p}: not valid UTF-8 text: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        # the decoder's message carries line/column information
        raise ConfigError(f"{p}: parse error: {exc}") from None
    return ConfigBundle(path=p, raw=raw,
                        sha256=hashlib.sha256(data).hexdigest())
