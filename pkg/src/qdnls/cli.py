"""Command-line scenarios: ``qdnls {scatter,asymptote,evolve,verify,bounds}``.

Every run is driven by a JSON config.  Outputs are CSV and JSON files in the
``--out`` directory, each carrying the SHA-256 of the canonicalised config.
Exit codes: 0 pass, 1 numerical failure, 2 invalid input, 3 assumption violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import DependencyError, InvalidDataError, QDNLSError
from .grid import GridFunction

log = logging.getLogger("qdnls")

REFLECTION_CSV = "reflection.csv"


# --- config ---------------------------------------------------------------------------


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise InvalidDataError(f"config file {p} does not exist")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidDataError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InvalidDataError("the config must be a JSON object")
    base = p.parent
    prof = cfg.get("profile", {})
    if prof.get("type") == "file" and "path" in prof and not Path(prof["path"]).is_absolute():
        prof["path"] = str((base / prof["path"]).resolve())
    validate_config(cfg)
    return cfg


def config_hash(cfg: dict, tolerance_scale: float = 1.0) -> str:
    blob = json.dumps({"config": cfg, "tolerance_scale": tolerance_scale}, sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _grid(spec, name: str) -> np.ndarray:
    """A grid is a list of values or ``{start, stop, num}`` (linear) / ``{..., "geom": true}``."""
    if isinstance(spec, dict):
        try:
            a, b, n = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDataError(f"grid {name!r} needs start, stop and num") from exc
        g = np.geomspace(a, b, n) if spec.get("geom") else np.linspace(a, b, n)
    else:
        g = np.asarray(spec, dtype=float)
    if g.ndim != 1 or g.size == 0 or not np.all(np.isfinite(g)):
        raise InvalidDataError(f"grid {name!r} must be a non-empty finite list")
    if np.any(np.diff(g) <= 0):
        raise InvalidDataError(f"grid {name!r} must be strictly increasing")
    return g


def validate_config(cfg: dict) -> None:
    prof = cfg.get("profile", {"type": "gaussian"})
    kind = prof.get("type", "gaussian")
    if kind not in ("gaussian", "bump", "file", "zero"):
        raise InvalidDataError(f"unknown profile type {kind!r}")
    if kind in ("gaussian", "bump") and not float(prof.get("amplitude", 0.3)) > 0:
        raise InvalidDataError("amplitude must be positive")
    if kind == "file":
        path = prof.get("path")
        if not path or not Path(path).exists():
            raise InvalidDataError(f"profile file {path!r} does not exist")
    for name, spec in cfg.get("grids", {}).items():
        if name == "k" and isinstance(spec, dict) and "n" in spec:
            continue
        _grid(spec, name)


def build_profile(cfg: dict) -> GridFunction:
    prof = cfg.get("profile", {"type": "gaussian"})
    kind = prof.get("type", "gaussian")
    n = int(prof.get("n", 2049))
    if kind == "gaussian":
        return GridFunction.gaussian(float(prof.get("amplitude", 0.3)), float(prof.get("width", 1.0)), n=n)
    if kind == "bump":
        return GridFunction.bump(float(prof.get("amplitude", 0.3)), float(prof.get("radius", 1.0)), n=n)
    if kind == "zero":
        return GridFunction.zero(float(prof.get("half_width", 1.0)))
    return GridFunction.read_csv(prof["path"])


def _k_grid(cfg: dict) -> np.ndarray:
    from .scattering import default_k_grid

    spec = cfg.get("grids", {}).get("k")
    if spec is None:
        return default_k_grid()
    if isinstance(spec, dict) and "n" in spec:
        return default_k_grid(int(spec["n"]), float(spec.get("k_min", 1e-3)), float(spec.get("k_max", 40.0)))
    return _grid(spec, "k")


def _tol(cfg: dict, key: str, default: float, scale: float) -> float:
    return float(cfg.get("tolerances", {}).get(key, default)) * scale


# --- output helpers -----------------------------------------------------------------


def _write_json(path: Path, payload: dict, h: str) -> None:
    payload = {"config_hash": h, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serialisable: {type(o)}")


def _write_rows(path: Path, header: list[str], rows, h: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash: {h}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _require_table(out: Path):
    from .scattering import ScatteringTable

    p = out / REFLECTION_CSV
    if not p.exists():
        raise DependencyError(f"{p} not found; run the scatter subcommand first")
    return ScatteringTable.read_csv(p)


# --- subcommands -------------------------------------------------------------------


def cmd_scatter(cfg: dict, out: Path, threads: int, scale: float, h: str) -> int:
    from .scattering import ATOL, RTOL, reflection_coefficients

    q = build_profile(cfg)
    ks = _k_grid(cfg)
    rtol, atol = _tol(cfg, "rtol", RTOL, scale), _tol(cfg, "atol", ATOL, scale)
    table = reflection_coefficients(q, ks, threads=threads, rtol=rtol, atol=atol)
    table.write_csv(out / REFLECTION_CSV, header_comment=f"config_hash: {h}")
    meta = {"k_grid": {"n": int(ks.size), "min": float(ks.min()), "max": float(ks.max())},
            "tolerances": {"rtol": rtol, "atol": atol}, "window": [q.x_min, q.x_max],
            "truncation_error_bound": table.metadata["tail_bound"],
            "max_abs_r1": float(np.max(np.abs(table.r1))), "max_abs_r2": float(np.max(np.abs(table.r2)))}
    _write_json(out / "scatter_meta.json", meta, h)
    log.info("wrote %s (%d spectral points)", out / REFLECTION_CSV, ks.size)
    return 0


def _zeta_t(cfg: dict):
    g = cfg.get("grids", {})
    return _grid(g.get("zeta", [0.5, 1.0, 1.5]), "zeta"), _grid(g.get("t", [50.0, 100.0, 200.0]), "t")


def cmd_asymptote(cfg: dict, out: Path, threads: int, scale: float, h: str) -> int:
    from .asymptotics import amplitude_identity_residual, leading_term

    table = _require_table(out)
    zetas, ts = _zeta_t(cfg)
    rows = []
    for z in zetas:
        for t in ts:
            st = leading_term(table, z, t)
            rows.append([z, t, st.k0, st.nu, st.phi, st.leading.real, st.leading.imag, abs(st.leading),
                         amplitude_identity_residual(st)])
    _write_rows(out / "asymptotics.csv",
                ["zeta", "t", "k0", "nu", "phi", "re_leading", "im_leading", "abs_leading", "amplitude_residual"],
                rows, h)
    return 0


def cmd_evolve(cfg: dict, out: Path, threads: int, scale: float, h: str) -> int:
    from .evolve import EvolutionConfig, evolve, validate_asymptotics

    q = build_profile(cfg)
    ev = dict(cfg.get("evolution", {}))
    T = float(ev.pop("T", 1.0))
    snaps = ev.pop("snapshot_times", None)
    ecfg = EvolutionConfig(**ev)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    run = evolve(q, T, ecfg, snapshot_times=snaps)
    for i, t in enumerate(run.times):
        v = run.values(i)
        _write_rows(snap_dir / f"q_t{t:.6g}.csv", ["x", "re_q", "im_q"],
                    ([x, z.real, z.imag] for x, z in zip(run.x, v)), h)
    _write_rows(out / "mass.csv", ["t", "mass"], zip(run.mass_times, run.mass_series), h)
    summary = {"config": ecfg.as_dict(), "T": T, "mass_drift": run.mass_drift, "edge_max": run.edge_max,
               "steps": run.info["steps"]}
    if "zeta" in cfg.get("grids", {}):
        table = _require_table(out)
        zetas, ts = _zeta_t(cfg)
        et = validate_asymptotics(q, zetas, ts, ecfg, table=table, threads=threads)
        _write_rows(out / "error_table.csv", ["zeta", "t", "abs_error", "abs_leading", "rel_error"],
                    ([r["zeta"], r["t"], r["abs_error"], r["abs_leading"], rel]
                     for r, rel in zip(et.rows(), et.rel_error)), h)
        summary["validation"] = {str(z): {"relative_decreasing": et.relative_decreasing(z),
                                          "decay_ratio": et.decay_ratio(z),
                                          "decay_exponent": et.decay_exponent(z)} for z in zetas}
    _write_json(out / "evolve_summary.json", summary, h)
    return 0


def cmd_verify(cfg: dict, out: Path, threads: int, scale: float, h: str) -> int:
    from .rh import jump_residual_grid, recover_q
    from .scattering import scattering_matrix, symmetry_residuals

    q = build_profile(cfg)
    g = cfg.get("grids", {})
    xs = _grid(g.get("x", [-0.8, -0.4, 0.0, 0.4, 0.8]), "x")
    kr = _grid(g.get("k_ray", [0.5, 1.0, 2.0, 4.0, 8.0]), "k_ray")
    jump_tol = _tol(cfg, "jump", 1e-6, scale)
    sym_tol = _tol(cfg, "symmetry", 1e-8, scale)
    rec_tol = _tol(cfg, "recover", 1e-6, scale)
    jumps = jump_residual_grid(q, xs, kr, threads=threads)
    sym = []
    for k in kr:
        ea, eb = symmetry_residuals(lambda z: scattering_matrix(q, z)[0], complex(k))
        sym.append(max(ea, eb))
    rec = recover_q(q, xs)
    rec_err = float(np.max(np.abs(rec - q(xs))))
    certs = {
        "jump_ray1": {"max_residual": float(jumps.max(initial=0.0)), "tolerance": jump_tol,
                      "passed": bool(jumps.max(initial=0.0) <= jump_tol)},
        "symmetries": {"max_residual": float(max(sym)), "tolerance": sym_tol, "passed": bool(max(sym) <= sym_tol)},
        "reconstruction": {"max_error": rec_err, "tolerance": rec_tol, "passed": bool(rec_err <= rec_tol)},
    }
    _write_json(out / "verify.json", {"certificates": certs, "passed": all(c["passed"] for c in certs.values())}, h)
    return 0 if all(c["passed"] for c in certs.values()) else 1


def cmd_bounds(cfg: dict, out: Path, threads: int, scale: float, h: str) -> int:
    from .bounds import certify_bounds

    q = build_profile(cfg)
    g = cfg.get("grids", {})
    ks = np.sort(_grid(g["k_bounds"], "k_bounds")) if "k_bounds" in g else None
    xg = _grid(g["x_bounds"], "x_bounds") if "x_bounds" in g else None
    cert = certify_bounds(q, ks, xg, threads=threads)
    _write_json(out / "bounds.json", cert.as_dict(), h)
    margins = dict((k, m) for k, m in cert.margins)
    _write_rows(out / "bounds.csv", ["k", "min_f1", "min_f2", "min_f3", "one_minus_abs_r2_sq"],
                ([r[0], r[1], r[2], r[3], margins[r[0]]] for r in cert.min_f_by_k), h)
    return 0 if cert.passed else 1


COMMANDS = {"scatter": cmd_scatter, "asymptote": cmd_asymptote, "evolve": cmd_evolve,
            "verify": cmd_verify, "bounds": cmd_bounds}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdnls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=str, default=None, help="JSON scenario file")
        s.add_argument("--out", type=str, default=".", help="output directory")
        s.add_argument("--threads", type=int, default=1, help="worker processes for spectral sweeps")
        s.add_argument("--tolerance-scale", type=float, default=1.0,
                       help="multiply solver and acceptance tolerances by this factor")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if not args.tolerance_scale > 0:
            raise InvalidDataError("--tolerance-scale must be positive")
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        h = config_hash(cfg, args.tolerance_scale)
        return COMMANDS[args.command](cfg, out, args.threads, args.tolerance_scale, h)
    except QDNLSError as exc:
        print(f"qdnls {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
