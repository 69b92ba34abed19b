"""Reproducible experiment driver: configuration, seeded runs and CSV/JSON emission.

A run directory contains::

    config.json        the normalized configuration (every default explicit)
    manifest.json      config hash, code version, wall time, status, warnings
    initial.snap       initial state (spectral snapshot, see :mod:`hallmhd.io`)
    final.snap/.json   restart checkpoint
    energy.csv, derivatives.csv, difference.csv, gevrey.csv,
    weighted_moment.csv, phi.csv, moments.json, fits.json

Numbers are written with ``repr`` so identical configurations produce
identical bytes on a fixed transform backend.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from . import __version__, _kernels
from .decay import default_window, fit_exponent, phi_integral, two_sided_fit
from .gevrey import GEVREY_CSV_COLUMNS, GevreyParams, gevrey_record, with_gamma
from .heat import HeatFlow, difference_state, heat_evolve
from .initial import make_initial_data
from .io import save_checkpoint, write_snapshot
from .moments import (
    InsufficientDecayError,
    assemble_moments,
    boundary_fraction,
    first_moment,
    m0_membership,
    moment_integrands,
    weighted_moment,
)
from .spectral import GridSpec, SolenoidalState, sobolev_seminorm_sq
from .stepper import NonFiniteError, StabilityError, StepperConfig, evolve, stable_dt

__all__ = [
    "DIAGNOSTICS",
    "InitSpec",
    "ExperimentConfig",
    "RunResult",
    "geometric_snapshots",
    "profile_config",
    "run",
    "read_csv",
    "ScanPoint",
    "amplitude_scan",
]

log = logging.getLogger(__name__)

DIAGNOSTICS = ("energy", "derivatives", "difference", "gevrey", "moments", "weighted_moment", "phi")


@dataclass(frozen=True)
class InitSpec:
    sigma: float = 0.0
    amplitude: float = 0.1
    seed: int = 7


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    stepper: StepperConfig
    init: InitSpec = InitSpec()
    gevrey: GevreyParams = GevreyParams()
    diagnostics: tuple[str, ...] = DIAGNOSTICS
    fit_windows: dict[str, tuple[float, float]] = field(default_factory=dict)
    derivative_orders: tuple[float, ...] = (1.0, 2.0)
    output_dir: str = "runs/default"

    def __post_init__(self):
        unknown = set(self.diagnostics) - set(DIAGNOSTICS)
        if unknown:
            raise ValueError(f"unknown diagnostics {sorted(unknown)}; choose from {DIAGNOSTICS}")
        if "phi" in self.diagnostics and "energy" not in self.diagnostics:
            raise ValueError("the phi diagnostic needs the energy diagnostic")
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        object.__setattr__(self, "derivative_orders", tuple(float(m) for m in self.derivative_orders))
        windows = {k: (float(v[0]), float(v[1])) for k, v in self.fit_windows.items()}
        object.__setattr__(self, "fit_windows", windows)

    def window(self, name: str) -> tuple[float, float]:
        return self.fit_windows.get(name, default_window(self.grid))

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "stepper": self.stepper.to_dict(),
            "init": asdict(self.init),
            "gevrey": self.gevrey.to_dict(),
            "diagnostics": list(self.diagnostics),
            "fit_windows": {k: list(v) for k, v in sorted(self.fit_windows.items())},
            "derivative_orders": list(self.derivative_orders),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        st = dict(d["stepper"])
        st["snapshot_times"] = tuple(st.get("snapshot_times", ()))
        return cls(
            grid=GridSpec(**d["grid"]),
            stepper=StepperConfig(**st),
            init=InitSpec(**d.get("init", {})),
            gevrey=GevreyParams(**d.get("gevrey", {})),
            diagnostics=tuple(d.get("diagnostics", DIAGNOSTICS)),
            fit_windows={k: tuple(v) for k, v in d.get("fit_windows", {}).items()},
            derivative_orders=tuple(d.get("derivative_orders", (1.0, 2.0))),
            output_dir=d.get("output_dir", "runs/default"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON, ignoring where the output goes."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, init=replace(cfg.init, seed=int(seed)))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg


def geometric_snapshots(t_first: float, t_end: float, count: int, extra=()) -> tuple[float, ...]:
    """``count`` geometrically spaced times in ``[t_first, t_end]`` plus ``extra``, rounded to 1e-6."""
    ts = np.geomspace(t_first, t_end, count)
    return tuple(float(t) for t in np.unique(np.round(np.concatenate([ts, list(extra)]), 6)))


PROFILES = {
    # n, box length / pi, snapshot count
    "desk": (64, 32.0, 60),
    "smoke": (32, 16.0, 40),
}


def profile_config(name: str = "desk", sigma: float = 0.0, amplitude: float = 0.1, seed: int = 7,
                   output_dir: str | None = None, scheme: str = "IF-RK4",
                   diagnostics: tuple[str, ...] = DIAGNOSTICS) -> ExperimentConfig:
    """Preset experiment: ``desk`` (64^3, L = 32 pi) or ``smoke`` (32^3, L = 16 pi).

    The run ends at the top of the fit window, ``0.5 (L/2pi)^2``, and the
    step is the diffusive limit ``0.4 / |k_max|^2``.
    """
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    n, lpi, count = PROFILES[name]
    grid = GridSpec(n, lpi * math.pi)
    t_lo, t_hi = default_window(grid)
    stepper = StepperConfig(dt=stable_dt(grid, 0.0, 0.0), scheme=scheme, t_end=t_hi,
                            snapshot_times=geometric_snapshots(0.25, t_hi, count, extra=(t_lo,)))
    return ExperimentConfig(grid=grid, stepper=stepper, init=InitSpec(sigma, amplitude, seed),
                            diagnostics=tuple(diagnostics),
                            output_dir=output_dir or f"runs/{name}")


# ------------------------------------------------------------------------ output

CSV_HEADERS = {
    "energy": ["t", "E(t)=||u||_2^2+||B||_2^2"],
    "difference": ["t", "||D(t)||_2^2=||u-v||_2^2+||B-w||_2^2", "heat E(t)=||v||_2^2+||w||_2^2"],
    "weighted_moment": ["t", "int|x-x_c|(|u|^2+|B|^2)dx", "boundary energy fraction"],
    "phi": ["t", "Phi(t)=int_0^t E(s)ds"],
}
UNITS_NOTE = "# nondimensional units: viscosity = resistivity = 1, box [0,L)^3"


def _fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(UNITS_NOTE + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body of a CSV written by :func:`run`."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    body = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    return header, body.reshape(-1, len(header))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


@dataclass
class RunResult:
    directory: Path
    manifest: dict
    series: dict[str, list] = field(default_factory=dict)
    fits: dict[str, Any] = field(default_factory=dict)
    final: SolenoidalState | None = None

    @property
    def ok(self) -> bool:
        return self.manifest.get("status") == "ok"

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def _observers(cfg: ExperimentConfig, flow: HeatFlow, store: dict[str, list]):
    diags = set(cfg.diagnostics)
    obs = {}

    def add(name, fn):
        store[name] = []

        def wrapped(st, _fn=fn, _name=name):
            store[_name].append(_fn(st))
        obs[name] = wrapped

    if "energy" in diags:
        add("energy", lambda s: (s.time, s.energy()))
    if "derivatives" in diags:
        add("derivatives", lambda s: (s.time,) + tuple(
            sobolev_seminorm_sq(s.u, m) + sobolev_seminorm_sq(s.B, m) for m in cfg.derivative_orders))
    if "difference" in diags:
        def diff(s):
            heat = heat_evolve(flow, s.time - flow.start)
            return (s.time, difference_state(s, flow).energy(), heat.energy())
        add("difference", diff)
    if "gevrey" in diags:
        add("gevrey", lambda s: gevrey_record(s, cfg.gevrey, None))
    if "moments" in diags:
        add("moments", lambda s: (s.time,) + moment_integrands(s))
    if "weighted_moment" in diags:
        add("weighted_moment", lambda s: (s.time, weighted_moment(s), boundary_fraction(s)))
    return obs


def _safe(fn, warnings: list, label: str):
    try:
        return fn()
    except (ValueError, RuntimeError) as exc:
        warnings.append(f"{label}: {exc}")
        return None


def run(cfg: ExperimentConfig, output_dir=None, progress=None) -> RunResult:
    """Execute ``cfg`` and write every enabled diagnostic to the run directory."""
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    zero_length = cfg.stepper.t_end == 0
    if not zero_length:
        (out / "config.json").write_text(cfg.to_json() + "\n")
    wall0 = time.perf_counter()
    manifest: dict[str, Any] = {
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "kernel_backend": _kernels.ACTIVE,
        "libraries": {"numpy": np.__version__, "scipy": scipy.__version__,
                      "python": platform.python_version()},
        "status": "ok",
        "partial": False,
        "warnings": [],
        "outputs": [],
        "config": cfg.to_dict(),
    }
    warnings = manifest["warnings"]
    s0 = make_initial_data(cfg.init.sigma, cfg.init.amplitude, cfg.init.seed, cfg.grid)
    write_snapshot(out / "initial.snap", s0)
    manifest["outputs"].append("initial.snap")
    if zero_length:
        # nothing to integrate: the manifest (which embeds the config) and the initial state suffice
        manifest["steps"] = 0
        manifest["wall_time_s"] = round(time.perf_counter() - wall0, 3)
        _write_json(out / "manifest.json", manifest)
        result = RunResult(out, manifest, {})
        result.final = s0
        return result
    flow = HeatFlow(s0)
    store: dict[str, list] = {}
    obs = _observers(cfg, flow, store)
    result = RunResult(out, manifest, store)

    traj = None
    try:
        traj = evolve(s0, cfg.stepper, obs, progress=progress)
    except (NonFiniteError, StabilityError, OverflowError) as exc:
        manifest["status"] = "failed"
        manifest["partial"] = True
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        log.error("run aborted: %s", exc)

    if traj is not None:
        manifest["steps"] = traj.steps
        result.final = traj.final
        save_checkpoint(out / "final.snap", traj.final, cfg.stepper, traj.steps)
        manifest["outputs"].append("final.snap")

    fits: dict[str, Any] = {}
    gamma = None
    if store.get("energy"):
        rows = store["energy"]
        _write_csv(out / "energy.csv", CSV_HEADERS["energy"], rows)
        t, E = np.array(rows).T
        f = _safe(lambda: fit_exponent(t, E, cfg.window("energy")), warnings, "energy fit")
        if f is not None:
            fits["energy"] = f.to_dict()
            gamma = f.exponent
        env = _safe(lambda: two_sided_fit(t, E, cfg.window("energy")), warnings, "energy envelope")
        if env is not None:
            fits["energy_envelope"] = {"lower": asdict(env.lower), "upper": asdict(env.upper)}
        if "phi" in cfg.diagnostics and len(t) > 1:
            ph = _safe(lambda: phi_integral(t, E, cfg.window("energy")), warnings, "phi")
            if ph is not None:
                _write_csv(out / "phi.csv", CSV_HEADERS["phi"], zip(ph.t, ph.phi))
                fits["phi"] = ph.to_dict()
    if store.get("derivatives"):
        rows = store["derivatives"]
        header = ["t"] + [f"||Lambda^{m:g} u||_2^2+||Lambda^{m:g} B||_2^2" for m in cfg.derivative_orders]
        _write_csv(out / "derivatives.csv", header, rows)
        arr = np.array(rows)
        for j, m in enumerate(cfg.derivative_orders, start=1):
            f = _safe(lambda: fit_exponent(arr[:, 0], arr[:, j], cfg.window("derivatives")),
                      warnings, f"derivative fit m={m:g}")
            if f is not None:
                fits[f"derivative_m{m:g}"] = f.to_dict()
    if store.get("difference"):
        rows = store["difference"]
        _write_csv(out / "difference.csv", CSV_HEADERS["difference"], rows)
        arr = np.array(rows)
        f = _safe(lambda: fit_exponent(arr[:, 0], arr[:, 1], cfg.window("difference"), allow_log=True),
                  warnings, "difference fit")
        if f is not None:
            fits["difference"] = f.to_dict()
        f = _safe(lambda: fit_exponent(arr[:, 0], arr[:, 2], cfg.window("difference")),
                  warnings, "heat fit")
        if f is not None:
            fits["heat"] = f.to_dict()
    if store.get("gevrey"):
        recs = store["gevrey"]
        if gamma is not None:
            recs = with_gamma(recs, cfg.gevrey, gamma)
            store["gevrey"] = recs
        _write_csv(out / "gevrey.csv", GEVREY_CSV_COLUMNS, [r.as_row() for r in recs])
        unresolved = [r.t for r in recs if not r.resolved]
        if unresolved:
            warnings.append(f"gevrey: {len(unresolved)} snapshots flagged unresolved "
                            f"(t <= {max(unresolved):.4g})")
    if store.get("weighted_moment"):
        _write_csv(out / "weighted_moment.csv", CSV_HEADERS["weighted_moment"], store["weighted_moment"])
    if store.get("moments") and len(store["moments"]) > 1:
        rows = store["moments"]
        t = np.array([r[0] for r in rows])
        E = np.array([e for _, e in store["energy"]]) if store.get("energy") else None
        if E is None:
            warnings.append("moments: energy diagnostic disabled, no horizon estimate")
            E = np.zeros_like(t)
        try:
            mm = assemble_moments(t, [r[1] for r in rows], [r[2] for r in rows], E,
                                  first_moment(s0.B), cfg.window("moments"))
            mem = m0_membership(mm)
            _write_json(out / "moments.json", {**mm.to_dict(), "m0": mem.to_dict()})
            manifest["outputs"].append("moments.json")
            if mm.tail_fraction > 0.01:
                warnings.append(f"moments: truncated tail is {100 * mm.tail_fraction:.1f}% "
                                f"of the integral (reported as horizon error)")
        except (InsufficientDecayError, ValueError) as exc:
            manifest["status"] = "failed"
            manifest["error"] = f"moments: {exc}"
    _write_json(out / "fits.json", fits)
    result.fits = fits
    for name in ("energy", "derivatives", "difference", "gevrey", "weighted_moment", "phi"):
        if (out / f"{name}.csv").exists():
            manifest["outputs"].append(f"{name}.csv")
    manifest["outputs"].append("fits.json")
    manifest["wall_time_s"] = round(time.perf_counter() - wall0, 3)
    _write_json(out / "manifest.json", manifest)
    return result


# ------------------------------------------------------------ amplitude scan

@dataclass(frozen=True)
class ScanPoint:
    amplitude: float
    bounded: bool
    growth: float
    reason: str = ""


def amplitude_scan(cfg: ExperimentConfig, amplitudes, growth_limit: float = 10.0,
                   t_end: float | None = None) -> tuple[list[ScanPoint], float | None]:
    """Gevrey tracking over a range of initial amplitudes.

    Each amplitude is run with only the Gevrey observer along the configured
    ``tau`` schedule.  A run counts as bounded when it completes, every
    ``M_r`` is finite and ``max M_r(t) / M_r(0) <= growth_limit``.  The step
    is half the stability bound of each initial state, so that refusing a
    fixed step is not mistaken for blow-up.

    Returns the scan points (in ascending amplitude) and the largest
    amplitude below which every tested amplitude was bounded, or ``None``
    when even the smallest one was not.
    """
    points = []
    for a in sorted(float(x) for x in amplitudes):
        s0 = make_initial_data(cfg.init.sigma, a, cfg.init.seed, cfg.grid)
        pu, pb = s0.u.to_physical(), s0.B.to_physical()
        umax = float(np.sqrt((pu**2).sum(axis=0)).max())
        bmax = float(np.sqrt((pb**2).sum(axis=0)).max())
        horizon = cfg.stepper.t_end if t_end is None else float(t_end)
        stepper = replace(cfg.stepper, dt=0.5 * stable_dt(cfg.grid, umax, bmax, cfg.stepper.safety),
                          t_end=horizon,
                          snapshot_times=tuple(t for t in cfg.stepper.snapshot_times if t <= horizon))
        records: list = []
        try:
            evolve(s0, stepper, {"gevrey": lambda s: records.append(gevrey_record(s, cfg.gevrey))})
        except (NonFiniteError, StabilityError, OverflowError) as exc:
            points.append(ScanPoint(a, False, math.inf, f"{type(exc).__name__}: {exc}"))
            continue
        M = np.array([r.M_r for r in records])
        if not np.all(np.isfinite(M)):
            points.append(ScanPoint(a, False, math.inf, "M_r not finite"))
            continue
        growth = float(M.max() / M[0]) if M[0] > 0 else 1.0
        ok = growth <= growth_limit
        points.append(ScanPoint(a, ok, growth, "" if ok else f"M_r grew by {growth:.3g}"))
    largest = None
    for p in points:
        if not p.bounded:
            break
        largest = p.amplitude
    return points, largest
