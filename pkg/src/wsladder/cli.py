"""Command-line entry point: ``wsladder {resonator,pair,chain,disorder,bands}``."""
from __future__ import annotations

import argparse
import copy
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, ModeNotFound, NumericalFailure, WsLadderError
from .io import (THREADS_ENV, ConfigError, ResultTable, load_config, material_from_config,
                 now_stamp, svg_heatmap, svg_matrix, write_json)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
UM, NM, MHZ, GHZ = 1e-6, 1e-9, 1e6, 1e9


def _floats(text: str) -> list[float]:
    parts = [p for p in text.replace("/", ",").split(",") if p.strip()]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers separated by ',' or '/', got {text!r}")


def _dims(text: str) -> tuple[float, float]:
    try:
        a, b = text.lower().split("x")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LENGTHxWIDTH, e.g. 0.8x0.2, got {text!r}")


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out-dir", default=".", help="directory for CSV/JSON/SVG outputs")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--mesh-um", type=float, help="target element size")
    common.add_argument("--timestamp", action="store_true",
                        help="record the wall-clock time in output headers (breaks byte-identical reruns)")

    p = argparse.ArgumentParser(prog="wsladder", description="Wannier-Stark ladders of coupled plate resonators")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("resonator", parents=[common], help="fundamental compression mode of one plate")
    r.add_argument("--length-um", type=float)
    r.add_argument("--width-um", type=float)
    r.add_argument("--sweep-length-um", type=_floats, help="comma list; with --sweep-width-um gives a surface")
    r.add_argument("--sweep-width-um", type=_floats)
    r.add_argument("--svg", action="store_true", help="write a strain heatmap of the mode")

    q = sub.add_parser("pair", parents=[common], help="normal-mode splitting of two coupled plates")
    q.add_argument("--scheme", type=str.lower, choices=["nn", "aa", "an"])
    q.add_argument("--bridge-um", type=_dims, help="bridge LENGTHxWIDTH")
    q.add_argument("--offset", type=float, help="NN offset fraction")
    q.add_argument("--length-um", type=float)
    q.add_argument("--width-um", type=float)
    q.add_argument("--sweep-bridge-length-um", type=_floats)
    q.add_argument("--sweep-bridge-width-um", type=_floats)

    c = sub.add_parser("chain", parents=[common], help="normal modes and strain profiles of a ladder")
    c.add_argument("--model", choices=["tb", "fem"])
    c.add_argument("--n", type=int)
    c.add_argument("--f0-ghz", type=float)
    c.add_argument("--step-mhz", type=_floats, help="one value or a list such as 10/20/40")
    c.add_argument("--kappa-mhz", type=float)
    c.add_argument("--scheme", type=str.lower, choices=["nn", "aa"])
    c.add_argument("--bridge-um", type=_dims)
    c.add_argument("--offset", type=float)
    c.add_argument("--width-um", type=float)
    c.add_argument("--length-um", type=float)
    c.add_argument("--tuning", choices=["length", "width"])
    c.add_argument("--reconcile", action="store_true", help="write a reconciliation report (fem model)")

    d = sub.add_parser("disorder", parents=[common], help="IPR under Gaussian length disorder")
    d.add_argument("--n", type=int)
    d.add_argument("--f0-ghz", type=float)
    d.add_argument("--step-mhz", type=_floats)
    d.add_argument("--kappa-mhz", type=float)
    d.add_argument("--sigma-nm", type=_floats)
    d.add_argument("--runs", type=int)
    d.add_argument("--seed", type=int)
    d.add_argument("--base-length-um", type=float)
    d.add_argument("--kappa-rel-sigma", type=float)

    b = sub.add_parser("bands", parents=[common], help="in-plane Bloch bands of the square lattice")
    b.add_argument("--square-um", type=float)
    b.add_argument("--bridge-um", type=_dims)
    b.add_argument("--points", type=int)
    b.add_argument("--bands", type=int)
    return p


def _overrides(ns) -> dict:
    o: dict = {}

    def put(sec, key, val):
        if val is not None:
            if sec is None:
                o[key] = val
            else:
                o.setdefault(sec, {})[key] = val

    g = getattr
    put("solver", "mesh_um", ns.mesh_um)
    put("solver", "threads", ns.threads)
    cmd = ns.command
    if cmd in ("resonator", "pair", "chain"):
        put("geometry", "length_um", g(ns, "length_um", None))
        put("geometry", "width_um", g(ns, "width_um", None))
    if cmd in ("pair", "chain"):
        put("geometry", "scheme", g(ns, "scheme", None))
        put("geometry", "offset", g(ns, "offset", None))
        if g(ns, "bridge_um", None):
            put("geometry", "bridge_length_um", ns.bridge_um[0])
            put("geometry", "bridge_width_um", ns.bridge_um[1])
    if cmd == "resonator":
        put("sweep", "length_um", ns.sweep_length_um)
        put("sweep", "width_um", ns.sweep_width_um)
    if cmd == "pair":
        put("sweep", "bridge_length_um", ns.sweep_bridge_length_um)
        put("sweep", "bridge_width_um", ns.sweep_bridge_width_um)
    if cmd in ("chain", "disorder"):
        put("geometry", "n", ns.n)
        put("chain", "f0_ghz", ns.f0_ghz)
        put("chain", "step_mhz", ns.step_mhz)
        put("chain", "kappa_mhz", ns.kappa_mhz)
    if cmd == "chain":
        put("chain", "model", ns.model)
        put("chain", "tuning", ns.tuning)
    if cmd == "disorder":
        put("disorder", "sigma_nm", ns.sigma_nm)
        put("disorder", "runs", ns.runs)
        put("disorder", "base_length_um", ns.base_length_um)
        put("disorder", "kappa_rel_sigma", ns.kappa_rel_sigma)
        put(None, "seed", ns.seed)
    if cmd == "bands":
        put("bands", "square_um", ns.square_um)
        put("bands", "n_points", ns.points)
        put("bands", "n_bands", ns.bands)
        if ns.bridge_um:
            put("bands", "bridge_length_um", ns.bridge_um[0])
            put("bands", "bridge_width_um", ns.bridge_um[1])
    return o


def _file_sets(path, sec, key) -> bool:
    if path is None:
        return False
    from .io import _toml
    with open(path, "rb") as fh:
        raw = _toml.load(fh)
    return key in raw.get(sec, {})


def _pmap(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _table(cols, cfg, ns, notes=()):
    # Thread count affects wall time only, so it stays out of the provenance echo.
    echo = copy.deepcopy(cfg)
    echo["solver"].pop("threads", None)
    return ResultTable(cols, [], echo, now_stamp() if ns.timestamp else None, list(notes))


# --- commands ---------------------------------------------------------------------

def cmd_resonator(cfg, ns, out: Path) -> list[Path]:
    from .fem import assemble, compression_score, find_fundamental_compression, modal, strain_field
    from .geometry import PlateSpec, layout_single
    from .mesh import mesh

    mat = material_from_config(cfg)
    h = cfg["solver"]["mesh_um"] * UM
    sw = cfg["sweep"]
    lengths = sw["length_um"] or [cfg["geometry"]["length_um"]]
    widths = sw["width_um"] or [cfg["geometry"]["width_um"]]
    if not sw["length_um"] and ns.length_um is None and not _file_sets(ns.config, "geometry", "length_um"):
        raise ConfigError("missing --length-um (or geometry.length_um in the config)")
    if not sw["width_um"] and ns.width_um is None and not _file_sets(ns.config, "geometry", "width_um"):
        raise ConfigError("missing --width-um (or geometry.width_um in the config)")
    grid = [(L, W) for L in lengths for W in widths]

    def solve(lw):
        L, W = lw
        lay = layout_single(PlateSpec(L * UM, W * UM), mat)
        sysm = assemble(mesh(lay, h), mat)
        modes = modal(sysm, mat.rod_frequency(L * UM), cfg["solver"]["n_modes"], tol=cfg["solver"]["tol"])
        m = find_fundamental_compression(modes, lay.plates[0])
        return m, compression_score(m, lay.plates[0]), sysm

    res = _pmap(solve, grid, cfg["solver"]["threads"])
    t = _table([("length", "um"), ("width", "um"), ("frequency", "Hz"), ("compression_score", "1"),
                ("residual", "1")], cfg, ns)
    for (L, W), (m, score, _) in zip(grid, res):
        t.add(L, W, m.frequency, score, m.residual)
    paths = [t.write(out / "resonator.csv")]
    if len(grid) == 1:
        m, _, sysm = res[0]
        mt = _table([("node", "1"), ("x", "m"), ("y", "m"), ("ux", "1"), ("uy", "1")], cfg, ns,
                    [f"mass-normalized mode at {m.frequency:.17g} Hz"])
        for i, ((x, y), (ux, uy)) in enumerate(zip(sysm.mesh.nodes, m.displacement)):
            mt.add(i, x, y, ux, uy)
        paths.append(mt.write(out / "resonator_mode.csv"))
        if ns.svg:
            sf = strain_field(sysm, m)
            p = out / "resonator_strain.svg"
            p.write_text(svg_heatmap(sysm.mesh, sf.values, signed=True), encoding="utf-8")
            paths.append(p)
    return paths


def _bridge(cfg):
    from .geometry import BridgeSpec

    g = cfg["geometry"]
    scheme = g["scheme"].upper()
    return BridgeSpec(scheme, g["bridge_length_um"] * UM, g["bridge_width_um"] * UM,
                      g["offset"] if scheme == "NN" else None)


def cmd_pair(cfg, ns, out: Path) -> list[Path]:
    from .fem import splitting
    from .geometry import BridgeSpec, PlateSpec, layout_pair

    mat = material_from_config(cfg)
    h = cfg["solver"]["mesh_um"] * UM
    base = _bridge(cfg)
    g = cfg["geometry"]
    bl = cfg["sweep"]["bridge_length_um"] or [g["bridge_length_um"]]
    bw = cfg["sweep"]["bridge_width_um"] or [g["bridge_width_um"]]
    plate = PlateSpec(g["length_um"] * UM, g["width_um"] * UM)
    grid = [(a, b) for a in bl for b in bw]

    def solve(ab):
        spec = BridgeSpec(base.scheme, ab[0] * UM, ab[1] * UM, base.offset_fraction)
        A = plate.at(0.0, 0.0)
        B = plate.at(0.0, 0.0, orientation="vertical" if spec.scheme == "AN" else "horizontal")
        lay = layout_pair(spec.scheme, A, B, spec, mat)
        return splitting(lay, h, mat.rod_frequency(plate.length))

    res = _pmap(solve, grid, cfg["solver"]["threads"])
    t = _table([("scheme", "-"), ("bridge_length", "um"), ("bridge_width", "um"), ("offset", "1"),
                ("f_sym", "Hz"), ("f_anti", "Hz"), ("kappa", "Hz")], cfg, ns)
    off = base.offset_fraction if base.offset_fraction is not None else float("nan")
    for (a, b), s in zip(grid, res):
        t.add(base.scheme.lower(), a, b, off, s.f_sym, s.f_anti, s.kappa)
    return [t.write(out / "pair.csv")]


def cmd_chain(cfg, ns, out: Path) -> list[Path]:
    from .localization import ipr
    from .tb_model import WannierStarkParams, build_graph_model, build_ws_chain, solve_modes

    n = int(cfg["geometry"]["n"])
    ch = cfg["chain"]
    f0 = ch["f0_ghz"] * GHZ
    kappa = ch["kappa_mhz"] * MHZ
    paths = []
    if ch["model"] == "tb":
        cols = [("step", "MHz"), ("kappa", "MHz"), ("eta", "1"), ("alpha", "1"), ("frequency", "Hz"),
                ("ipr", "1")] + [(f"u_{k - (n - 1) // 2}", "1") for k in range(n)]
        t = _table(cols, cfg, ns, ["u_n are signed unit-norm amplitudes"])
        maps = []
        for F in ch["step_mhz"]:
            if F <= 0:
                raise ConfigError("chain.step_mhz entries must be positive for the tb model")
            p = WannierStarkParams(f0, F * MHZ, kappa)
            if n == 1:
                spec = solve_modes(build_graph_model([f0], []))
            else:
                spec = solve_modes(build_ws_chain(n, p))
            V = spec.eigenvectors
            for a in range(n):
                t.add(F, ch["kappa_mhz"], p.eta, a - (n - 1) // 2, spec.eigenvalues[a],
                      ipr(np.abs(V[:, a])), *V[:, a])
            maps.append(np.abs(V.T))
        paths.append(t.write(out / "chain.csv"))
        svg = out / "chain_profiles.svg"
        svg.write_text(svg_matrix(np.vstack(maps), label="|u_n|"), encoding="utf-8")
        paths.append(svg)
        return paths

    from .calibration import reconcile, synthesize_ladder_layout
    from .fem import chain_modes

    mat = material_from_config(cfg)
    h = cfg["solver"]["mesh_um"] * UM
    g = cfg["geometry"]
    if len(ch["step_mhz"]) != 1:
        raise ConfigError("the fem chain model takes a single step value")
    F = ch["step_mhz"][0] * MHZ
    lay = synthesize_ladder_layout(n, f0, F, _bridge(cfg), ch["tuning"], g["width_um"] * UM,
                                   g["length_um"] * UM, h, cfg["solver"]["calib_tol_mhz"] * MHZ, mat,
                                   n_jobs=cfg["solver"]["threads"])
    cm = chain_modes(lay, h, f0, max(cfg["solver"]["n_modes"], 2 * n + 4))
    cols = [("mode", "1"), ("frequency", "Hz"), ("compression_score", "1"), ("ipr", "1")] + \
           [(f"s_{k}", "1") for k in range(n)]
    t = _table(cols, cfg, ns, ["s_n is the max |dV/V| in the central 20% of plate n (mass-normalized mode)"])
    rows = []
    for k in cm.compression_modes():
        s = cm.profiles[k].values
        t.add(k, cm.modes[k].frequency, cm.scores[k], ipr(s), *s)
        rows.append(s / s.max())
    paths.append(t.write(out / "chain.csv"))
    write_json(lay.to_dict(), out / "chain_layout.json")
    paths.append(out / "chain_layout.json")
    if rows:
        svg = out / "chain_profiles.svg"
        svg.write_text(svg_matrix(np.vstack(rows), label="s_n/max"), encoding="utf-8")
        paths.append(svg)
    if ns.reconcile:
        params = WannierStarkParams(f0, F, kappa) if F > 0 else None
        rep = reconcile(lay, h, params, chain=cm)
        p = out / "chain_reconcile.json"
        p.write_text(rep.to_json() + "\n", encoding="utf-8")
        paths.append(p)
    return paths


def cmd_disorder(cfg, ns, out: Path) -> list[Path]:
    from .localization import DisorderConfig, disorder_ensemble
    from .tb_model import WannierStarkParams

    n = int(cfg["geometry"]["n"])
    ch, dz = cfg["chain"], cfg["disorder"]
    t = _table([("step", "MHz"), ("sigma", "nm"), ("center_ipr_mean", "1"), ("center_ipr_stderr", "1"),
                ("interior_ipr_mean", "1"), ("interior_ipr_stderr", "1"), ("runs", "1"),
                ("resamples", "1"), ("close_spacing_runs", "1")], cfg, ns)
    for F in ch["step_mhz"]:
        p = WannierStarkParams(ch["f0_ghz"] * GHZ, F * MHZ, ch["kappa_mhz"] * MHZ)
        for s in dz["sigma_nm"]:
            dc = DisorderConfig(s * NM, int(dz["runs"]), int(cfg["seed"]), dz["kappa_rel_sigma"])
            r = disorder_ensemble(p, n, dz["base_length_um"] * UM, dc, n_jobs=cfg["solver"]["threads"])
            t.add(F, s, r.center_mean, r.center_stderr, r.interior_mean, r.interior_stderr,
                  dc.n_runs, r.n_resamples, r.n_close_spacing_runs)
    return [t.write(out / "disorder.csv")]


def cmd_bands(cfg, ns, out: Path) -> list[Path]:
    from .bloch import band_structure
    from .geometry import BridgeSpec, layout_phononic_cell

    mat = material_from_config(cfg)
    bc = cfg["bands"]
    cell = layout_phononic_cell(bc["square_um"] * UM,
                                BridgeSpec("AA", bc["bridge_length_um"] * UM, bc["bridge_width_um"] * UM),
                                mat)
    bt = band_structure(cell, cfg["solver"]["mesh_um"] * UM, int(bc["n_points"]), int(bc["n_bands"]))
    gaps = bt.stop_bands()
    notes = ["in-plane only: flexural branches are absent from the plane-stress model"]
    notes += [f"in-plane stop band above band {b}: {lo:.17g} Hz to {hi:.17g} Hz" for b, lo, hi in gaps]
    if not gaps:
        notes.append("no complete in-plane stop band among the computed bands")
    t = _table([("path", "1/m"), ("kx", "1/m"), ("ky", "1/m"), ("band", "1"), ("frequency", "Hz")],
               cfg, ns, notes)
    for row in bt.rows():
        t.add(*row)
    gap_doc = {"label": "in-plane only", "labels": bt.labels,
               "stop_bands": [{"below_band": b, "lower_Hz": lo, "upper_Hz": hi} for b, lo, hi in gaps]}
    return [t.write(out / "bands.csv"), write_json(gap_doc, out / "bands_gaps.json")]


COMMANDS = {"resonator": cmd_resonator, "pair": cmd_pair, "chain": cmd_chain,
            "disorder": cmd_disorder, "bands": cmd_bands}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    if ns.threads is None:
        ns.threads = _default_threads()
    try:
        cfg = load_config(ns.config, _overrides(ns))
        out = Path(ns.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = COMMANDS[ns.command](cfg, ns, out)
    except (NumericalFailure, ModeNotFound) as exc:
        print(f"wsladder: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (WsLadderError, InvalidArgument, OSError) as exc:
        print(f"wsladder: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
