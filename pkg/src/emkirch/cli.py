"""Config-driven scenario runner.

`emkirch run <config.yaml>` synthesizes the configured measurements, forms
the Kirchhoff images, recovers polarization/polarizability, and writes
machine-readable products (text + EMKM binary grids, profiles, reports and
a JSON manifest) into the output directory.  `validate` dry-runs the
config checks; `report` re-summarizes a finished run from its manifest.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.

Config schema (YAML, `schema_version: 1`): see docs/formats.md and the
shipped files under configs/.  Complex numbers are written as [re, im]
pairs.  Exactly one of scene.dipoles / scene.scatterers / scene.extended
must be present; recovery mode `full3x3` is valid for passive scenes only
and `noise` for active scenes only.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import analysis, formats, forward, imaging, kernels, scene
from .emcore import MediumParams
from .errors import ConfigError, EmkirchError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

SCHEMA_VERSION = 1

# Active runs stream per-frequency response matrices through this budget;
# larger (or many-scatterer, noise-free) scenes take the factored
# synthesis-free path instead.
PER_FREQ_BYTES_LIMIT = 1 << 30
STREAM_SCATTERER_LIMIT = 64

PRODUCTS = ("images", "recovery", "profiles", "reports")


class NumericalFailureError(EmkirchError):
    """Raised when too many recovery systems are singular."""


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}.{key}" if where else key, "missing required field")
    return doc[key]


def _as_float(value, field: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a number, got {value!r}") from None


def _as_int(value, field: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    return value


def _as_complex(value, field: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_as_float(value[0], field), _as_float(value[1], field))
    raise ConfigError(field, f"expected a number or [re, im] pair, got {value!r}")


def _as_point(value, field: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(field, "expected a 3-element [x, y, z] list")
    return np.array([_as_float(v, field) for v in value])


def _as_cvec(value, field: str, n: int) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(field, f"expected {n} complex entries")
    return np.array([_as_complex(v, f"{field}[{i}]") for i, v in enumerate(value)])


def _as_cmat(value, field: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(field, "expected a 3x3 matrix of complex entries")
    return np.stack([_as_cvec(row, f"{field}[{i}]", 3) for i, row in enumerate(value)])


def expand_extended(
    center, side: float, spacing: float, polarizability
) -> list[scene.Scatterer]:
    """Regular scatterer lattice filling a cube, all sharing one tensor.

    (floor(side / spacing) + 1)^3 points centered on `center`.
    """
    if side <= 0 or spacing <= 0:
        raise ValueError("side and spacing must be positive")
    if spacing > side:
        raise ValueError("spacing must not exceed the cube side")
    center = np.asarray(center, dtype=float)
    alpha = np.asarray(polarizability, dtype=complex)
    n = int(np.floor(side / spacing + 1e-12)) + 1
    offs = (np.arange(n) - (n - 1) / 2.0) * spacing
    gx, gy, gz = np.meshgrid(offs, offs, offs, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()]) + center
    return [scene.Scatterer(p, alpha) for p in pts]


@dataclass
class Scenario:
    """Validated, fully constructed run description."""

    medium: MediumParams
    array: scene.ArrayGeometry
    band: scene.FrequencyBand
    dipoles: list
    scatterers: list
    grid: scene.ImagingGrid
    noise: dict | None
    recovery_mode: str
    delta: float | None
    out_dir: str
    products: tuple
    binary: bool
    config: dict  # canonical structure, hashed into the manifest

    @property
    def is_active(self) -> bool:
        return not self.dipoles


def _build_array(doc, medium) -> scene.ArrayGeometry:
    shape = _require(doc, "shape", "array")
    a = _as_float(_require(doc, "aperture", "array"), "array.aperture")
    try:
        if shape == "square":
            return scene.make_square_array(a, _as_int(_require(doc, "n", "array"), "array.n"))
        if shape == "disk":
            return scene.make_disk_array(
                a,
                _as_int(_require(doc, "n_r", "array"), "array.n_r"),
                _as_int(_require(doc, "n_theta", "array"), "array.n_theta"),
            )
    except ValueError as exc:
        raise ConfigError("array", str(exc)) from None
    raise ConfigError("array.shape", f"must be 'square' or 'disk', got {shape!r}")


def _build_band(doc) -> scene.FrequencyBand:
    try:
        return scene.make_band(
            _as_float(_require(doc, "f0_hz", "band"), "band.f0_hz"),
            _as_float(doc.get("bandwidth_hz", 0.0), "band.bandwidth_hz"),
            _as_int(doc.get("n_freq", 1), "band.n_freq"),
        )
    except ValueError as exc:
        raise ConfigError("band", str(exc)) from None


def _build_scene(doc):
    keys = [k for k in ("dipoles", "scatterers", "extended") if k in doc]
    if len(keys) != 1:
        raise ConfigError(
            "scene", "exactly one of dipoles / scatterers / extended required"
        )
    dipoles, scatterers = [], []
    try:
        if keys[0] == "dipoles":
            for i, d in enumerate(doc["dipoles"]):
                dipoles.append(
                    scene.Dipole(
                        _as_point(_require(d, "position", f"scene.dipoles[{i}]"),
                                  f"scene.dipoles[{i}].position"),
                        _as_cvec(_require(d, "polarization", f"scene.dipoles[{i}]"),
                                 f"scene.dipoles[{i}].polarization", 3),
                    )
                )
        elif keys[0] == "scatterers":
            for i, s in enumerate(doc["scatterers"]):
                scatterers.append(
                    scene.Scatterer(
                        _as_point(_require(s, "position", f"scene.scatterers[{i}]"),
                                  f"scene.scatterers[{i}].position"),
                        _as_cmat(_require(s, "polarizability", f"scene.scatterers[{i}]"),
                                 f"scene.scatterers[{i}].polarizability"),
                    )
                )
        else:
            e = doc["extended"]
            scatterers = expand_extended(
                _as_point(_require(e, "center", "scene.extended"), "scene.extended.center"),
                _as_float(_require(e, "side", "scene.extended"), "scene.extended.side"),
                _as_float(_require(e, "spacing", "scene.extended"), "scene.extended.spacing"),
                _as_cmat(_require(e, "polarizability", "scene.extended"),
                         "scene.extended.polarizability"),
            )
    except ValueError as exc:
        raise ConfigError("scene", str(exc)) from None
    return dipoles, scatterers


def _build_grid(doc, band, medium) -> scene.ImagingGrid:
    origin = _as_point(_require(doc, "origin", "grid"), "grid.origin")
    axes_doc = _require(doc, "axes", "grid")
    if not isinstance(axes_doc, (list, tuple)) or not 1 <= len(axes_doc) <= 3:
        raise ConfigError("grid.axes", "expected 1 to 3 axis direction vectors")
    axes = np.stack([_as_point(a, f"grid.axes[{i}]") for i, a in enumerate(axes_doc)])
    norms = np.linalg.norm(axes, axis=1)
    if np.any(norms == 0):
        raise ConfigError("grid.axes", "axis directions must be nonzero")
    axes = axes / norms[:, None]
    counts = _require(doc, "counts", "grid")
    if not isinstance(counts, (list, tuple)) or len(counts) != len(axes_doc):
        raise ConfigError("grid.counts", "need one count per axis")
    counts = tuple(_as_int(c, "grid.counts") for c in counts)
    if "spacings" in doc:
        sp = doc["spacings"]
        if not isinstance(sp, (list, tuple)) or len(sp) != len(axes_doc):
            raise ConfigError("grid.spacings", "need one spacing per axis")
        spacings = np.array([_as_float(s, "grid.spacings") for s in sp])
    else:
        # default resolution: lambda0/8 cross-range, lambda0/16 in range
        lam = 2.0 * np.pi * medium.c / band.omega0
        spacings = np.where(np.abs(axes[:, 2]) > 0.5, lam / 16.0, lam / 8.0)
    try:
        return scene.ImagingGrid(origin, axes, spacings, counts)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None


def build_scenario(doc: dict) -> Scenario:
    """Validate a parsed config document and construct all domain objects."""
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a mapping")
    version = _require(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    med_doc = doc.get("medium", {})
    try:
        medium = MediumParams(
            c=_as_float(med_doc.get("c", 3.0e8), "medium.c"),
            mu=_as_float(med_doc.get("mu", 1.0), "medium.mu"),
        )
    except ValueError as exc:
        raise ConfigError("medium", str(exc)) from None
    array = _build_array(_require(doc, "array", ""), medium)
    band = _build_band(_require(doc, "band", ""))
    dipoles, scatterers = _build_scene(_require(doc, "scene", ""))
    grid = _build_grid(_require(doc, "grid", ""), band, medium)

    noise = doc.get("noise")
    if noise is not None:
        if dipoles:
            raise ConfigError("noise", "noise is defined for active scenes only")
        noise = {
            "snr_db": _as_float(_require(noise, "snr_db", "noise"), "noise.snr_db"),
            "seed": _as_int(_require(noise, "seed", "noise"), "noise.seed"),
        }

    rec_doc = doc.get("recovery", {})
    mode = rec_doc.get("mode", "crossrange")
    if mode not in ("crossrange", "full3x3"):
        raise ConfigError("recovery.mode", f"must be crossrange or full3x3, got {mode!r}")
    if mode == "full3x3" and not dipoles:
        raise ConfigError("recovery.mode", "full3x3 is valid for passive scenes only")
    delta = rec_doc.get("delta")
    if delta is not None:
        delta = _as_float(delta, "recovery.delta")
        if delta < 0:
            raise ConfigError("recovery.delta", "must be nonnegative")

    out_doc = doc.get("outputs", {})
    products = tuple(out_doc.get("products", list(PRODUCTS)))
    for p in products:
        if p not in PRODUCTS:
            raise ConfigError("outputs.products", f"unknown product {p!r}")
    return Scenario(
        medium=medium,
        array=array,
        band=band,
        dipoles=dipoles,
        scatterers=scatterers,
        grid=grid,
        noise=noise,
        recovery_mode=mode,
        delta=delta,
        out_dir=str(out_doc.get("directory", "out")),
        products=products,
        binary=bool(out_doc.get("binary", True)),
        config=doc,
    )


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"invalid YAML: {exc}") from None


def _active_path(sc: Scenario) -> str:
    """Which synthesis route an active run takes (deterministic per config)."""
    per_freq = (3 * sc.array.n_elements) ** 2 * 16
    if sc.noise is not None:
        return "materialized"
    if len(sc.scatterers) <= STREAM_SCATTERER_LIMIT and per_freq <= PER_FREQ_BYTES_LIMIT:
        return "streamed"
    return "factored"


def _compute_images(sc: Scenario, timings: dict):
    t0 = time.perf_counter()
    if not sc.is_active:
        data = forward.synthesize_passive(sc.dipoles, sc.array, sc.band, sc.medium)
        timings["synthesis"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        stack = imaging.passive_image_stack(data, sc.grid, sc.array, sc.medium)
        timings["imaging"] = time.perf_counter() - t0
        return stack

    route = _active_path(sc)
    if route == "materialized":
        total = sc.band.n_freq * (3 * sc.array.n_elements) ** 2 * 16
        if total > 8 * PER_FREQ_BYTES_LIMIT:
            raise ConfigError(
                "noise",
                "noisy run needs the full response block in memory "
                f"({total / 2**30:.1f} GiB); reduce elements or band samples",
            )
        data = forward.synthesize_active(sc.scatterers, sc.array, sc.band, sc.medium)
        data = forward.add_noise(data, sc.noise["snr_db"], sc.noise["seed"])
        timings["synthesis"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        stack = imaging.active_image_stack(data, sc.grid, sc.array, sc.medium)
    elif route == "streamed":
        pts = sc.grid.n_points
        values = np.empty((sc.band.n_freq, pts, 3, 3), dtype=complex)
        for fi in range(sc.band.n_freq):
            sub = sc.band.single(fi)
            data = forward.synthesize_active(sc.scatterers, sc.array, sub, sc.medium)
            k = sub.wavenumbers(sc.medium)[0]
            values[fi] = imaging.active_image(data, sc.grid, k, sc.array, sc.medium).values
        stack = imaging.TensorImageStack(sc.grid, sc.band, values)
    else:
        stack = imaging.active_image_from_scene(
            sc.scatterers, sc.grid, sc.band, sc.array, sc.medium
        )
    timings["imaging"] = time.perf_counter() - t0
    timings.setdefault("synthesis", 0.0)
    return stack


def _recover(sc: Scenario, stack, psf, timings: dict):
    t0 = time.perf_counter()
    if sc.is_active:
        rec = imaging.recover_polarizability_crossrange(stack, psf, sc.band, sc.delta)
    elif sc.recovery_mode == "crossrange":
        rec = imaging.recover_polarization_crossrange(
            stack.integrate(), psf, sc.band, sc.delta
        )
    else:
        rec = imaging.recover_polarization_full_grid(stack.integrate(), psf, sc.band)
    timings["recovery"] = time.perf_counter() - t0
    if np.mean(rec.valid) < 0.5:
        raise NumericalFailureError(
            f"{(~rec.valid).sum()} of {rec.valid.size} recovery systems are singular"
        )
    return rec


def _write_products(sc: Scenario, band_img, rec, out: Path, manifest, timings):
    t0 = time.perf_counter()

    def emit(name, values, kind_label):
        path_t = out / f"{name}.tsv"
        formats.write_grid_text(path_t, sc.grid, values, name)
        manifest.add_file(path_t.name, kind_label, formats.TEXT_SCHEMA_VERSION)
        if sc.binary:
            path_b = out / f"{name}.emkm"
            formats.write_grid_binary(path_b, sc.grid, values)
            manifest.add_file(path_b.name, kind_label, formats.BINARY_VERSION)

    if "images" in sc.products:
        emit("image_band", band_img.values, "image")
    if "recovery" in sc.products:
        emit("recovery", rec.values, "recovery")
        emit("recovery_norm", rec.magnitudes(), "recovery-norm")
        emit("recovery_cond", rec.cond, "recovery-cond")
    if "profiles" in sc.products:
        mags_img = np.sqrt(
            np.sum(np.abs(band_img.values) ** 2, axis=tuple(range(1, band_img.values.ndim)))
        ).reshape(sc.grid.counts)
        mags_rec = rec.magnitudes().reshape(sc.grid.counts)
        center = tuple(c // 2 for c in sc.grid.counts)
        for d in range(sc.grid.ndim):
            sel = tuple(
                slice(None) if ax == d else center[ax] for ax in range(sc.grid.ndim)
            )
            offs = sc.grid.axis_offsets(d)
            for tag, mags in (("image", mags_img), ("recovery", mags_rec)):
                path = out / f"profile_axis{d}_{tag}.tsv"
                formats.write_profile_text(path, offs, mags[sel], f"{tag} axis {d}")
                manifest.add_file(path.name, "profile", formats.TEXT_SCHEMA_VERSION)
    if "reports" in sc.products:
        mags = rec.magnitudes()
        peak = int(np.nanargmax(mags))
        peak_pt = sc.grid.points()[peak]
        entries = {
            "backend": kernels.backend_name(),
            "grid_points": sc.grid.n_points,
            "peak_norm": f"{mags[peak]:.12g}",
            "peak_position_m": " ".join(f"{v:.12g}" for v in peak_pt),
            "valid_fraction": f"{np.mean(rec.valid):.6f}",
            "median_block_cond": f"{np.nanmedian(rec.cond):.6g}",
            "phase_correction_delta": f"{getattr(rec, 'delta', 0.0):.6g}",
        }
        path = out / "summary.txt"
        formats.write_report_text(path, entries)
        manifest.add_file(path.name, "report", formats.TEXT_SCHEMA_VERSION)

        window = sc.grid.points()[[0, sc.grid.n_points - 1, sc.grid.n_points // 2]]
        k0 = sc.band.omega0 / sc.medium.c
        L = float(np.mean(window[:, 2]))
        if L > 0:
            fr = analysis.validate_fraunhofer(sc.array, window, k0, L)
            path = out / "fraunhofer_report.txt"
            formats.write_report_text(
                path,
                {
                    "max_phase_error_rad": f"{fr.max_phase_error:.6g}",
                    "max_amplitude_error": f"{fr.max_amplitude_error:.6g}",
                    "theta_b": f"{fr.theta_b:.6g}",
                    "aperture_phase_scale": f"{fr.aperture_phase_scale:.6g}",
                },
            )
            manifest.add_file(path.name, "report", formats.TEXT_SCHEMA_VERSION)
        if sc.array.kind == "disk" and L > 0:
            rep = analysis.validate_disk_psf(
                sc.array, np.array([0.0, 0.0, L]), k0, L
            )
            path = out / "disk_psf_report.txt"
            formats.write_report_text(
                path,
                {
                    "discrepancy": f"{rep.discrepancy:.6g}",
                    "aperture_scale": f"{rep.aperture_scale:.6g}",
                    "offcenter_scale": f"{rep.offcenter_scale:.6g}",
                },
            )
            manifest.add_file(path.name, "report", formats.TEXT_SCHEMA_VERSION)
    timings["write"] = time.perf_counter() - t0


def run(sc: Scenario, out_dir: str | None = None) -> Path:
    """Execute a scenario; returns the manifest path."""
    out = Path(out_dir if out_dir is not None else sc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings: dict = {}
    manifest = formats.RunManifest(
        config_hash=formats.config_hash(sc.config), backend=kernels.backend_name()
    )
    psf = imaging.PsfProvider(sc.array, sc.medium)
    stack = _compute_images(sc, timings)
    band_img = stack.integrate()
    rec = _recover(sc, stack, psf, timings)
    _write_products(sc, band_img, rec, out, manifest, timings)
    manifest.timings = {k: round(v, 6) for k, v in timings.items()}
    manifest_path = out / "manifest.json"
    manifest.write(manifest_path)
    return manifest_path


def _cmd_run(args) -> int:
    doc = load_config(args.config)
    if args.seed is not None:
        if not isinstance(doc, dict) or "noise" not in doc or doc["noise"] is None:
            raise ConfigError("--seed", "config has no noise block to reseed")
        doc["noise"]["seed"] = args.seed
    sc = build_scenario(doc)
    if args.threads is not None:
        kernels.set_num_threads(args.threads)
    manifest = run(sc, args.out_dir)
    print(f"wrote {manifest}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = build_scenario(load_config(args.config))
    kind = "passive" if not sc.is_active else f"active ({_active_path(sc)})"
    per_freq = (3 * sc.array.n_elements) ** 2 * 16
    print(f"config OK: {kind} scene")
    print(f"  array: {sc.array.kind}, {sc.array.n_elements} elements, "
          f"aperture {sc.array.aperture} m")
    print(f"  band: {sc.band.n_freq} samples, B = {sc.band.bandwidth:.6g} rad/s")
    print(f"  sources: {len(sc.dipoles) or len(sc.scatterers)}")
    print(f"  grid: {'x'.join(str(c) for c in sc.grid.counts)} = "
          f"{sc.grid.n_points} points")
    if sc.is_active:
        print(f"  response block: {per_freq / 2**20:.1f} MiB per band sample")
    print(f"  recovery: {sc.recovery_mode}; noise: "
          f"{'off' if sc.noise is None else sc.noise}")
    return EXIT_OK


def _cmd_report(args) -> int:
    doc = formats.read_manifest(args.manifest)
    print(f"config hash: {doc['config_hash']}")
    print(f"backend: {doc['backend']}")
    for key, value in sorted(doc.get("timings_seconds", {}).items()):
        print(f"  t[{key}] = {value}s")
    base = Path(args.manifest).parent
    for entry in doc["files"]:
        print(f"  {entry['path']} ({entry['kind']}, schema v{entry['schema_version']})")
    summary = base / "summary.txt"
    if summary.exists():
        print(summary.read_text().rstrip())
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="emkirch",
        description="Electromagnetic Kirchhoff migration scenario runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="synthesize, image, recover, write products")
    p_run.add_argument("config")
    p_run.add_argument("--out-dir", default=None, help="override outputs.directory")
    p_run.add_argument("--seed", type=int, default=None, help="override noise seed")
    p_run.add_argument(
        "--threads", type=int, default=None,
        help="cap kernel threads (parallelism hint; never changes results)",
    )
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    p_rep = sub.add_parser("report", help="re-summarize a finished run")
    p_rep.add_argument("manifest")
    p_rep.set_defaults(func=_cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
