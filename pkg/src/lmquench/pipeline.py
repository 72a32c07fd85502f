"""Per-point pipeline, on-disk cache and output bundles.

A bundle is a directory holding plain-text observables and a
``manifest.json`` with the inputs, library versions and a SHA-256 digest of
every file. Wall-clock timings are logged, never written, so that identical
configurations give byte-identical bundles.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import RunConfig
from .lagrange_mesh import Mesh, build_mesh
from .observables import (classify_distribution, fit_spectral_tail, le_histogram, mean_le,
                          min_line_gap, spectral_function_discrete, spectral_function_fft)
from .quench_dynamics import (QuenchResult, compute_overlaps, default_time_grid,
                              density_evolution, echo_amplitude)
from .two_body import Spectrum, TwoBodyConfig, initial_ground_state, solve

log = logging.getLogger(__name__)

CACHE_FORMAT = 1

BUNDLE_FILES = ("echo.csv", "histogram.csv", "spectrum_discrete.csv", "spectrum_fft.csv",
                "density.csv", "overlaps.csv", "summary.json")


# --------------------------------------------------------------------------- cache

def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:32]


class PointCache:
    """Overlaps and energies of quench points, one ``.npz`` per key.

    Keys hash ``(N, h, g, kappa, k)`` with the library version, so a version
    bump invalidates every entry. Eigenvectors are not stored (about
    ``dim^2 * 8`` bytes per point); the density field, the only observable
    that needs them, is cached separately per time grid.
    """

    def __init__(self, directory):
        self.directory = Path(directory)

    def key(self, mesh: Mesh, g: float, kappa: float, n_states: int, sum_rule: float) -> str:
        return _digest(dict(kind="quench", N=mesh.n_points, h=mesh.scaling, g=g, kappa=kappa,
                            k=n_states or f"auto:{sum_rule!r}", version=__version__,
                            format=CACHE_FORMAT))

    def _path(self, key: str, suffix: str = "") -> Path:
        return self.directory / f"{key}{suffix}.npz"

    def _write(self, path: Path, **arrays):
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp.npz")
        os.close(fd)
        np.savez(tmp, **arrays)
        os.replace(tmp, path)

    def load_result(self, key: str, mesh: Mesh, g: float, kappa: float) -> QuenchResult | None:
        path = self._path(key)
        if not path.exists():
            return None
        with np.load(path) as d:
            return QuenchResult(d["overlaps"], float(d["initial_energy"]), d["final_energies"],
                                float(d["sum_rule"]), mesh, g, kappa)

    def store_result(self, key: str, result: QuenchResult):
        self._write(self._path(key), overlaps=result.overlaps,
                    initial_energy=result.initial_energy,
                    final_energies=result.final_energies, sum_rule=result.sum_rule)

    def load_array(self, key: str, tag: str):
        path = self._path(key, "-" + tag)
        if not path.exists():
            return None
        with np.load(path) as d:
            return {k: d[k] for k in d.files}

    def store_array(self, key: str, tag: str, **arrays):
        self._write(self._path(key, "-" + tag), **arrays)


def quench_point(mesh: Mesh, g: float, kappa: float, *, n_states: int = 0,
                 sum_rule: float = 1 - 1e-6, cache: PointCache | None = None,
                 need_spectrum: bool = False) -> tuple[QuenchResult, Spectrum | None]:
    """Overlaps of the interacting trap ground state with the quenched states.

    Parameters
    ----------
    n_states : int
        Number of quenched states to compute; 0 computes all of the
        even-parity sector and keeps the smallest prefix reaching
        ``sum_rule``.
    cache : PointCache, optional
        Reused when it holds the point; the spectrum is then only recomputed
        if ``need_spectrum`` is set.

    Raises
    ------
    SumRuleError
        If the retained states do not reach ``sum_rule``.
    """
    key = cache.key(mesh, g, kappa, n_states, sum_rule) if cache else None
    if cache is not None and not need_spectrum:
        hit = cache.load_result(key, mesh, g, kappa)
        if hit is not None:
            log.info("cache hit g=%g kappa=%g", g, kappa)
            return hit, None
    t0 = time.perf_counter()
    e0, psi0 = initial_ground_state(mesh, g)
    quenched = solve(TwoBodyConfig(mesh, g, kappa), k=n_states or None)
    result = compute_overlaps((e0, psi0), quenched, threshold=sum_rule, trim=not n_states)
    log.info("solved g=%g kappa=%g: %d states in %.1fs", g, kappa, result.n_states,
             time.perf_counter() - t0)
    if cache is not None:
        cache.store_result(key, result)
    return result, quenched


# --------------------------------------------------------------------------- bundle

def _csv(columns, header) -> bytes:
    """Columns written with 17 significant digits: exact float round trip."""
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(out, data, fmt="%.17g", delimiter=",")
    return out.getvalue().encode()


def _json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n").encode()


def _time_grid(config: RunConfig, result: QuenchResult) -> np.ndarray:
    dyn = config.dynamics
    if dyn.dt:
        return np.linspace(0.0, dyn.t_max, int(math.ceil(dyn.t_max / dyn.dt)) + 1)
    return default_time_grid(result, dyn.t_max, dyn.samples_per_period, dyn.max_samples)


def _density(config: RunConfig, mesh: Mesh, result: QuenchResult, quenched: Spectrum | None,
             cache: PointCache | None):
    obs = config.observables
    times = np.linspace(0.0, obs.density_t_max, obs.density_steps + 1)
    tag = _digest(dict(kind="density", t_max=obs.density_t_max, steps=obs.density_steps,
                       refine=obs.refine))
    key = None
    if cache is not None:
        key = cache.key(mesh, config.physics.g, config.physics.kappa,
                        config.dynamics.n_states, config.dynamics.sum_rule)
        hit = cache.load_array(key, tag)
        if hit is not None:
            return hit["times"], hit["positions"], hit["values"]
    if quenched is None:
        result, quenched = quench_point(mesh, config.physics.g, config.physics.kappa,
                                        n_states=config.dynamics.n_states,
                                        sum_rule=config.dynamics.sum_rule,
                                        need_spectrum=True)
    field = density_evolution(result, quenched, times,
                              refine=None if obs.refine == 1 else obs.refine)
    if cache is not None:
        cache.store_array(key, tag, times=field.times, positions=field.positions,
                          values=field.values)
    return field.times, field.positions, field.values


def compute_bundle(config: RunConfig, cache: PointCache | None = None) -> dict[str, bytes]:
    """All bundle files (except the manifest) as bytes."""
    mesh = build_mesh(config.mesh.n_points, config.mesh.scaling)
    g, kappa = config.physics.g, config.physics.kappa
    dyn, obs = config.dynamics, config.observables
    result, quenched = quench_point(mesh, g, kappa, n_states=dyn.n_states,
                                    sum_rule=dyn.sum_rule, cache=cache)
    files = {}

    # long-time series: statistics and the FFT spectrum
    times = _time_grid(config, result)
    series = echo_amplitude(result, times)
    nyquist = math.pi / series.dt if series.dt else math.inf
    aliased = float(result.weights[np.abs(result.detunings) > nyquist].sum())

    hist = le_histogram(series, obs.bins, lower=obs.histogram_lower, min_horizon=dyn.t_max)
    # the classifier always sees the histogram stretched over the sampled range
    shape_hist = hist if obs.histogram_lower == "min" else le_histogram(
        series, obs.bins, lower="min", min_horizon=dyn.t_max)
    label = classify_distribution(shape_hist, obs.classifier)
    files["histogram.csv"] = _csv([hist.centers, hist.probabilities], ["y", "p"])

    display = np.linspace(0.0, dyn.display_t_max,
                          int(round(dyn.display_t_max / dyn.display_dt)) + 1)
    shown = echo_amplitude(result, display)
    files["echo.csv"] = _csv([shown.times, shown.amplitude.real, shown.amplitude.imag,
                              shown.echo], ["time", "re_nu", "im_nu", "echo"])

    discrete = spectral_function_discrete(result)
    files["spectrum_discrete.csv"] = _csv([discrete.peak_frequencies, discrete.peak_weights],
                                          ["omega", "weight"])
    fft = spectral_function_fft(series, window=None if obs.fft_window == "none" else "hann",
                                pad=obs.fft_pad, min_gap=min_line_gap(discrete))
    omega, amp = fft.curve
    keep = np.abs(omega) <= obs.fft_omega_max
    files["spectrum_fft.csv"] = _csv([omega[keep], amp[keep]], ["omega", "amplitude"])

    try:
        tail = fit_spectral_tail(discrete, obs.tail_window, obs.tail_bin_width or None)
        tail_info = dict(fit_range=list(tail.fit_range), n_points=tail.n_points,
                         power_law_exponent=tail.power_law[0], power_law_r2=tail.power_law[1],
                         exponential_rate=tail.exponential[0],
                         exponential_r2=tail.exponential[1], verdict=tail.verdict)
    except ValueError as exc:
        tail_info = dict(error=str(exc))

    d_times, d_x, d_rho = _density(config, mesh, result, quenched, cache)
    tt, xx = np.meshgrid(d_times, d_x, indexing="ij")
    files["density.csv"] = _csv([tt.ravel(), xx.ravel(), d_rho.ravel()], ["time", "x", "rho"])

    files["overlaps.csv"] = _csv(
        [np.arange(result.n_states), result.final_energies, result.overlaps.real,
         result.overlaps.imag, result.weights],
        ["n", "energy", "re_a", "im_a", "weight"])

    summary = dict(
        g=g, kappa=kappa, n_points=mesh.n_points, scaling=mesh.scaling,
        initial_energy=result.initial_energy,
        quenched_ground_energy=float(result.final_energies[0]),
        n_states=result.n_states, sum_rule=result.sum_rule, mean_le=mean_le(result),
        time_grid=dict(samples=int(times.size), dt=series.dt, horizon=series.horizon,
                       aliased_weight=aliased),
        histogram=dict(bins=obs.bins, lower=obs.histogram_lower,
                       short_horizon=hist.short_horizon),
        classification=dict(label=label.label, confidence=label.confidence,
                             features=label.features),
        spectrum=dict(frequency_convention="omega = E'_n - E0",
                      resolution=fft.resolution, underresolved=fft.underresolved,
                      min_line_gap=min_line_gap(discrete)),
        tail_fit=tail_info,
    )
    files["summary.json"] = _json(summary)
    return files


def versions() -> dict:
    return dict(lmquench=__version__, numpy=np.__version__, scipy=scipy.__version__,
                python=platform.python_version())


def write_bundle(directory, files: dict[str, bytes], inputs: dict) -> dict:
    """Write ``files`` and a manifest; returns the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    listing = {}
    for name in sorted(files):
        (directory / name).write_bytes(files[name])
        listing[name] = dict(sha256=hashlib.sha256(files[name]).hexdigest(),
                             bytes=len(files[name]))
    manifest = dict(inputs=inputs, versions=versions(), files=listing)
    if "summary.json" in files:
        manifest["sum_rule"] = json.loads(files["summary.json"])["sum_rule"]
    (directory / "manifest.json").write_bytes(_json(manifest))
    return manifest


def _inputs(config: RunConfig) -> dict:
    # neither the output location nor the worker count affects the results:
    # bundles are relocatable and independent of how a sweep was scheduled
    data = config.to_dict()
    data.pop("output")
    data["sweep"].pop("workers")
    return data


def _cache_for(config: RunConfig) -> PointCache | None:
    return PointCache(config.output.cache_dir) if config.output.cache_dir else None


def run_single(config: RunConfig, directory=None) -> dict:
    """Compute one ``(g, kappa)`` point and write its bundle. Returns the summary."""
    directory = Path(directory or config.output.directory)
    t0 = time.perf_counter()
    files = compute_bundle(config, _cache_for(config))
    write_bundle(directory, files, _inputs(config))
    log.info("bundle %s written in %.1fs", directory, time.perf_counter() - t0)
    return json.loads(files["summary.json"])


# --------------------------------------------------------------------------- sweep

SWEEP_COLUMNS = ("g", "kappa", "status", "directory", "initial_energy",
                 "quenched_ground_energy", "n_states", "sum_rule", "mean_le", "label",
                 "confidence", "error")


def point_directory(g: float, kappa: float) -> str:
    return f"g_{g!r}__kappa_{kappa!r}"


def error_record(exc: BaseException) -> dict:
    return dict(error=type(exc).__name__, message=str(exc))


def _sweep_point(args):
    config, g, kappa, root = args
    name = point_directory(g, kappa)
    try:
        summary = run_single(config.single_point(g, kappa), Path(root) / name)
    except Exception as exc:  # recorded, the sweep goes on
        record = dict(error_record(exc), g=g, kappa=kappa)
        path = Path(root) / name
        path.mkdir(parents=True, exist_ok=True)
        (path / "error.json").write_bytes(_json(record))
        log.error("point g=%g kappa=%g failed: %s", g, kappa, exc)
        return dict(g=g, kappa=kappa, status="failed", directory=name,
                    error=f"{record['error']}: {record['message']}")
    row = dict(g=g, kappa=kappa, status="ok", directory=name, error="")
    for k in ("initial_energy", "quenched_ground_energy", "n_states", "sum_rule", "mean_le"):
        row[k] = summary[k]
    row["label"] = summary["classification"]["label"]
    row["confidence"] = summary["classification"]["confidence"]
    return row


@dataclass(frozen=True)
class SweepOutcome:
    rows: list[dict]

    @property
    def failed(self) -> list[dict]:
        return [r for r in self.rows if r["status"] != "ok"]


def run_sweep(config: RunConfig, directory=None) -> SweepOutcome:
    """Run every grid point into its own bundle and write ``sweep.csv``.

    Points run independently (in worker processes when ``sweep.workers`` is
    not 1) and are merged in row-major ``(g, kappa)`` order, so the aggregate
    does not depend on scheduling. A failing point leaves an ``error.json``
    in its directory and a ``failed`` row in the aggregate.
    """
    root = Path(directory or config.output.directory)
    root.mkdir(parents=True, exist_ok=True)
    points = config.sweep.points(config.physics)
    jobs = [(config, g, k, str(root)) for g, k in points]
    workers = config.sweep.workers or os.cpu_count() or 1
    workers = min(workers, len(jobs))
    if workers == 1:
        rows = [_sweep_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))

    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=SWEEP_COLUMNS, lineterminator="\n",
                            extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v
                         for k, v in row.items()})
    write_bundle(root, {"sweep.csv": out.getvalue().encode()}, _inputs(config))
    return SweepOutcome(rows)
