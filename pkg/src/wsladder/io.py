"""Configuration files, result tables, and figure exports."""
from __future__ import annotations

import csv
import copy
import datetime as _dt
import hashlib
import io as _io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument

try:
    import tomllib as _toml
except ModuleNotFoundError:     # Python < 3.11
    import tomli as _toml

TOOL = "wsladder"
VERSION = "0.1.0"
THREADS_ENV = "WSLADDER_THREADS"


class ConfigError(InvalidArgument):
    pass


# Surface units: lengths in um, frequencies in GHz/MHz, modulus in GPa.
DEFAULTS: dict = {
    "seed": 0,
    "material": {"youngs_gpa": 1050.0, "poisson": 0.1, "density_kg_m3": 3515.0, "thickness_um": 0.6},
    "geometry": {
        "length_um": 4.25, "width_um": 1.5,
        "scheme": "nn", "bridge_length_um": 1.0, "bridge_width_um": 0.1, "offset": 0.25, "n": 25,
    },
    "solver": {"mesh_um": 0.05, "tol": 1e-8, "n_modes": 8, "threads": 1, "calib_tol_mhz": 0.1},
    "chain": {"model": "tb", "f0_ghz": 2.0, "step_mhz": [10.0], "kappa_mhz": 2.53, "tuning": "length"},
    "disorder": {"runs": 50, "sigma_nm": [0.0, 10.0, 20.0, 40.0], "kappa_rel_sigma": 0.0,
                 "base_length_um": 4.25},
    "bands": {"n_points": 50, "n_bands": 8, "square_um": 1.7, "bridge_length_um": 0.7,
              "bridge_width_um": 0.125},
    "sweep": {"length_um": [], "width_um": [], "bridge_length_um": [], "bridge_width_um": []},
}

_POSITIVE = {
    ("material", "youngs_gpa"), ("material", "density_kg_m3"), ("material", "thickness_um"),
    ("geometry", "length_um"), ("geometry", "width_um"), ("geometry", "bridge_length_um"),
    ("geometry", "bridge_width_um"), ("geometry", "n"),
    ("solver", "mesh_um"), ("solver", "tol"), ("solver", "n_modes"), ("solver", "threads"),
    ("solver", "calib_tol_mhz"), ("chain", "f0_ghz"), ("disorder", "runs"),
    ("disorder", "base_length_um"), ("bands", "n_points"), ("bands", "n_bands"),
    ("bands", "square_um"), ("bands", "bridge_length_um"), ("bands", "bridge_width_um"),
}


def _check_types(cfg: dict, ref: dict, where: str = "") -> None:
    for key, val in cfg.items():
        path = f"{where}{key}"
        if key not in ref:
            raise ConfigError(f"unknown config key '{path}'")
        want = ref[key]
        if isinstance(want, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{path}' must be a table")
            _check_types(val, want, path + ".")
        elif isinstance(want, list):
            if not isinstance(val, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                    for v in val):
                raise ConfigError(f"'{path}' must be a list of numbers")
        elif isinstance(want, str):
            if not isinstance(val, str):
                raise ConfigError(f"'{path}' must be a string")
        elif isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"'{path}' must be a number")


def _merge(base: dict, upd: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in upd.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def validate_config(cfg: dict) -> dict:
    _check_types(cfg, DEFAULTS)
    full = _merge(DEFAULTS, cfg)
    for sec, key in _POSITIVE:
        v = full[sec][key]
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"'{sec}.{key}' must be positive, got {v}")
    nu = full["material"]["poisson"]
    if not (0 <= nu < 0.5):
        raise ConfigError(f"'material.poisson' must lie in [0, 0.5), got {nu}")
    if full["geometry"]["scheme"].lower() not in ("nn", "aa", "an"):
        raise ConfigError(f"'geometry.scheme' must be nn, aa or an, got {full['geometry']['scheme']!r}")
    if full["chain"]["model"] not in ("tb", "fem"):
        raise ConfigError(f"'chain.model' must be tb or fem, got {full['chain']['model']!r}")
    if full["chain"]["tuning"] not in ("length", "width"):
        raise ConfigError("'chain.tuning' must be length or width")
    if any(s < 0 for s in full["disorder"]["sigma_nm"]):
        raise ConfigError("'disorder.sigma_nm' entries must be >= 0")
    return full


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> dict:
    """Parse a TOML run configuration, apply overrides, and validate strictly."""
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = _toml.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    _check_types(raw, DEFAULTS)
    if overrides:
        _check_types(overrides, DEFAULTS)
        raw = _merge(raw, overrides)
    return validate_config(raw)


def config_echo(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(config_echo(cfg).encode()).hexdigest()


def material_from_config(cfg: dict):
    from .geometry import Material

    m = cfg["material"]
    return Material(m["youngs_gpa"] * 1e9, m["poisson"], m["density_kg_m3"], m["thickness_um"] * 1e-6)


# --- tables ----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))   # shortest string that round-trips; at most 17 significant digits
    return str(v)


@dataclass
class ResultTable:
    columns: list[tuple[str, str]]          # (name, unit); "1" for dimensionless
    rows: list[tuple] = field(default_factory=list)
    config: dict | None = None
    timestamp: str | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name, unit in self.columns:
            if not unit:
                raise InvalidArgument(f"column {name!r} has no unit")

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise InvalidArgument(f"row has {len(row)} values, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        k = [c[0] for c in self.columns].index(name)
        return [r[k] for r in self.rows]

    def provenance(self) -> list[str]:
        lines = [f"tool: {TOOL} {VERSION}"]
        if self.config is not None:
            lines.append(f"config_sha256: {config_hash(self.config)}")
            lines.append(f"config: {config_echo(self.config)}")
        if self.timestamp:
            lines.append(f"timestamp: {self.timestamp}")
        lines.extend(f"note: {n}" for n in self.notes)
        return lines

    def to_csv(self) -> str:
        buf = _io.StringIO()
        for line in self.provenance():
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{n} [{u}]" for n, u in self.columns])
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def write(self, path: str | os.PathLike) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(self.to_csv(), encoding="utf-8")
        return p


def now_stamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def _parse_cell(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(text: str) -> ResultTable:
    """Inverse of ``ResultTable.to_csv``."""
    meta, body = [], []
    for line in text.splitlines(keepends=True):
        (meta if line.startswith("# ") and not body else body).append(line)
    cfg, stamp, notes = None, None, []
    for line in meta:
        key, _, val = line[2:].rstrip("\n").partition(": ")
        if key == "config":
            cfg = json.loads(val)
        elif key == "timestamp":
            stamp = val
        elif key == "note":
            notes.append(val)
    rd = csv.reader(_io.StringIO("".join(body)))
    header = next(rd)
    cols = []
    for h in header:
        name, _, unit = h.rpartition(" [")
        cols.append((name, unit.rstrip("]")))
    rows = [tuple(_parse_cell(c) for c in r) for r in rd]
    return ResultTable(cols, rows, cfg, stamp, notes)


def verify_provenance(text: str) -> bool:
    """True when the embedded config echo hashes to the recorded digest."""
    digest = echo = None
    for line in text.splitlines():
        if line.startswith("# config_sha256: "):
            digest = line.split(": ", 1)[1]
        elif line.startswith("# config: "):
            echo = line.split(": ", 1)[1]
    if digest is None or echo is None:
        return False
    return config_hash(json.loads(echo)) == digest


def write_json(obj, path: str | os.PathLike) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p


# --- SVG heatmaps -------------------------------------------------------------------

def _diverging(t: float) -> str:
    # t in [-1, 1]: blue - white - red
    t = max(-1.0, min(1.0, t))
    if t < 0:
        a = -t
        r, g, b = 1 - a * 0.85, 1 - a * 0.7, 1.0
    else:
        r, g, b = 1.0, 1 - t * 0.8, 1 - t * 0.85
    return f"#{int(round(255 * r)):02x}{int(round(255 * g)):02x}{int(round(255 * b)):02x}"


def _sequential(t: float) -> str:
    t = max(0.0, min(1.0, t))
    r = 1 - 0.75 * t
    g = 1 - 0.55 * t
    b = 1 - 0.15 * t
    return f"#{int(round(255 * r)):02x}{int(round(255 * g)):02x}{int(round(255 * b)):02x}"


def svg_heatmap(mesh, values, signed: bool = True, width_px: int = 800, label: str = "dV/V") -> str:
    """Per-element heatmap; diverging colours for signed data, sequential for magnitudes."""
    vals = np.asarray(values, dtype=float)
    if vals.shape != (mesh.n_elements,):
        raise InvalidArgument("one value per element required")
    if not signed:
        vals = np.abs(vals)
    vmin, vmax = float(vals.min()), float(vals.max())
    x0, y0 = mesh.nodes.min(axis=0)
    x1, y1 = mesh.nodes.max(axis=0)
    scale = width_px / (x1 - x0)
    hpx = (y1 - y0) * scale
    out = [f"<!-- {label} min={vmin:.17g} max={vmax:.17g} "
           f"colormap={'diverging' if signed else 'sequential'} -->",
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{hpx:.1f}" '
           f'viewBox="0 0 {width_px} {hpx:.3f}">']
    span = max(abs(vmin), abs(vmax)) if signed else vmax
    span = span if span > 0 else 1.0
    xy = mesh.nodes[mesh.elements]
    for k in range(mesh.n_elements):
        ex0, ey0 = xy[k, 0]
        ex1, ey1 = xy[k, 2]
        px, py = (ex0 - x0) * scale, (y1 - ey1) * scale
        col = _diverging(vals[k] / span) if signed else _sequential(vals[k] / span)
        out.append(f'<rect x="{px:.3f}" y="{py:.3f}" width="{(ex1 - ex0) * scale:.3f}" '
                   f'height="{(ey1 - ey0) * scale:.3f}" fill="{col}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_matrix(values, row_labels=None, label: str = "|s_n|") -> str:
    """Mode-by-site heatmap for strain or amplitude profiles."""
    v = np.asarray(values, dtype=float)
    vmin, vmax = float(v.min()), float(v.max())
    cell = 12
    nr, nc = v.shape
    out = [f"<!-- {label} min={vmin:.17g} max={vmax:.17g} colormap=sequential -->",
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{nc * cell}" height="{nr * cell}">']
    span = vmax if vmax > 0 else 1.0
    for i in range(nr):
        for j in range(nc):
            out.append(f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                       f'fill="{_sequential(v[i, j] / span)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
