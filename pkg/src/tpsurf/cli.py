"""Command-line front end: energy, verify, beta, linking, stopping, flow.

Reports are schema-versioned JSON (`tpsurf.report/1`) embedding the
resolved constants and input provenance; time series go to CSV.  With
--deterministic and a fixed seed, reports are byte-identical across
runs and across thread counts (wall-clock fields are zeroed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__, _kernels
from .errors import (
    InvalidArgumentError,
    ParseError,
    PreconditionError,
    TpsurfError,
    UnsupportedCaseError,
)
from .flow import FlowPolicy, flow_run, save_series
from .grassmann import LemmaConstants, Plane
from .linkdiag import SphereProbe, linking_mod2
from .regdiag import beta_curve, resolve_constants, stopping_distance
from .simplicial import load, quadrature
from .tpe import energy
from .verify import run_battery

SCHEMA = "tpsurf.report/1"

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_CRITERION = 4


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _parse_radii(spec: str):
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise InvalidArgumentError("radii spec must be a:b:{lin,log10}[:count]")
    a, b = float(parts[0]), float(parts[1])
    kind = parts[2]
    count = int(parts[3]) if len(parts) == 4 else 8
    if a <= 0 or b <= a or count < 2:
        raise InvalidArgumentError("radii spec needs 0 < a < b and count >= 2")
    if kind == "lin":
        return list(np.linspace(a, b, count))
    if kind == "log10":
        return list(np.geomspace(a, b, count))
    raise InvalidArgumentError(f"unknown radii scale {kind!r}")


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("TPSURF_THREADS")
    return int(env) if env else 1


def _config_echo(args, sset, extra=None):
    m = sset.intrinsic_dim
    lemma = LemmaConstants(m, args.q) if hasattr(args, "q") else None
    deterministic = getattr(args, "deterministic", False)
    cfg = {
        "q": getattr(args, "q", None),
        "quadrature": getattr(args, "quadrature", None),
        "mode": getattr(args, "mode", None),
        "theta": getattr(args, "theta", None),
        "delta": getattr(args, "delta", None),
        "eta": getattr(args, "eta", None),
        "probes": getattr(args, "probes", None),
        "radii": getattr(args, "radii", None),
        "seed": getattr(args, "seed", None),
        # execution-resource fields are masked in deterministic reports so
        # bytes match across thread counts
        "threads": None if deterministic else _threads(args),
        "deterministic": deterministic,
        "lemma_constants": lemma.as_dict() if lemma else None,
    }
    if extra:
        cfg.update(extra)
    return cfg


def _emit(args, report: dict):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=False)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return text


def _report_skeleton(command, args, path, sset):
    return {
        "schema": SCHEMA,
        "command": command,
        "config": _config_echo(args, sset),
        "provenance": {
            "input": str(path),
            "input_sha256": _sha256(path),
            "version": __version__,
            "backend": _kernels.backend_name(),
        },
    }


def cmd_energy(args) -> int:
    sset = load(args.input)
    cloud = quadrature(sset, args.quadrature)
    rep = energy(
        cloud,
        args.q,
        mode=args.mode,
        theta=args.theta,
        symmetrize=args.symmetrize,
        threads=_threads(args),
        deterministic=args.deterministic,
    )
    report = _report_skeleton("energy", args, args.input, sset)
    report["energy"] = rep.as_dict()
    text = _emit(args, report)
    print(
        f"E_q = {rep.total_energy:.12g} (q={args.q}, {rep.mode} mode, "
        f"{rep.pair_count} pairs, error bound {rep.acceleration_error_bound:.3g})"
    )
    if not args.out:
        print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    sset = load(args.input)
    radii = _parse_radii(args.radii) if args.radii else None
    battery = run_battery(
        sset,
        args.q,
        order=args.quadrature,
        probes=args.probes,
        radii=radii,
        delta=args.delta,
        eta=args.eta,
        seed=args.seed,
        threads=_threads(args),
        deterministic=args.deterministic,
    )
    report = _report_skeleton("verify", args, args.input, sset)
    report["battery"] = battery.as_dict()
    _emit(args, report)
    for c in battery.criteria:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}" + (f" ({c.note})" if c.note else ""))
    if not battery.all_passed:
        print("verification failed", file=sys.stderr)
        return EXIT_CRITERION
    return EXIT_OK


def cmd_beta(args) -> int:
    sset = load(args.input)
    cloud = quadrature(sset, args.quadrature)
    radii = _parse_radii(args.radii)
    x = cloud.points[args.center_index]
    curve = beta_curve(cloud, x, radii, seed=args.seed)
    report = _report_skeleton("beta", args, args.input, sset)
    report["beta"] = {
        "center_index": args.center_index,
        "center": x.tolist(),
        "samples": [
            {"d": d, "beta": b, "plane_frame": p.frame.tolist()} for d, b, p in curve.samples
        ],
    }
    _emit(args, report)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("d,beta\n")
            for d, b, _ in curve.samples:
                fh.write(f"{d:.17g},{b:.17g}\n")
    for d, b, _ in curve.samples:
        print(f"beta({d:.6g}) = {b:.10g}")
    return EXIT_OK


def _probe_from_args(args, sset):
    if args.probe_mesh:
        probe_set = load(args.probe_mesh)
        return SphereProbe.from_circle_mesh(probe_set)
    if args.probe_points:
        pts = [
            np.array([float(c) for c in chunk.split(",")])
            for chunk in args.probe_points.split(";")
        ]
        if len(pts) != 2:
            raise InvalidArgumentError("--probe-points needs exactly two points 'x,y,z;x,y,z'")
        a, b = pts
        center = 0.5 * (a + b)
        radius = 0.5 * float(np.linalg.norm(b - a))
        axis = (b - a) / (2.0 * radius)
        return SphereProbe.point_pair(center, radius, Plane(axis[:, None]))
    raise InvalidArgumentError("provide a probe mesh or --probe-points")


def cmd_linking(args) -> int:
    sset = load(args.input)
    probe = _probe_from_args(args, sset)
    parity = linking_mod2(sset, probe)
    report = _report_skeleton("linking", args, args.input, sset)
    report["linking"] = {
        "parity": parity,
        "probe_center": probe.center.tolist(),
        "probe_radius": probe.radius,
    }
    _emit(args, report)
    print(f"parity: {parity}")
    return EXIT_OK


def cmd_stopping(args) -> int:
    sset = load(args.input)
    cloud = quadrature(sset, args.quadrature)
    consts = resolve_constants(cloud, args.q, delta=args.delta, eta=args.eta)
    res = stopping_distance(cloud, args.x_index, consts)
    report = _report_skeleton("stopping", args, args.input, sset)
    report["constants"] = consts.as_dict()
    report["stopping"] = {
        "x_index": args.x_index,
        "x": res.x.tolist(),
        "d_s": res.d_s,
        "case": res.case,
        "partner": res.partner.tolist(),
        "radii_history": res.radii_history,
        "uncertainty": res.uncertainty,
    }
    _emit(args, report)
    print(f"d_s = {res.d_s:.10g} ({res.case}, {len(res.radii_history)} rounds)")
    return EXIT_OK


def cmd_flow(args) -> int:
    sset = load(args.input)
    state = flow_run(
        sset,
        args.q,
        args.steps,
        policy=FlowPolicy(),
        threads=_threads(args),
        audit=not args.no_audit,
        seed=args.seed,
    )
    report = _report_skeleton("flow", args, args.input, sset)
    report["flow"] = {
        "status": state.status,
        "steps": state.step,
        "initial_energy": state.energy_history[0],
        "final_energy": state.energy_history[-1],
        "measure_target": state.measure_target,
        "final_measure": state.mesh.total_measure,
        "critical_exponent": state.critical_exponent,
        "audits": state.audits,
    }
    _emit(args, report)
    if args.csv:
        save_series(state, args.csv)
    if args.save_mesh:
        from .simplicial import save

        save(state.mesh, args.save_mesh)
    print(
        f"flow {state.status}: E {state.energy_history[0]:.6g} -> "
        f"{state.energy_history[-1]:.6g} in {state.step} steps"
    )
    return EXIT_OK if state.status in ("done", "stagnated", "quality-stop") else EXIT_PRECONDITION


def _add_common(sub, q_required=True):
    sub.add_argument("input", help="mesh file (.obj or .ndmesh)")
    if q_required:
        sub.add_argument("--q", type=float, required=True, help="energy exponent (> 2m for the guarantees)")
    sub.add_argument("--quadrature", choices=("centroid", "bary3"), default="centroid")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=None, help="defaults to TPSURF_THREADS or 1")
    sub.add_argument("--deterministic", action="store_true", default=True)
    sub.add_argument("--no-deterministic", dest="deterministic", action="store_false")
    sub.add_argument("--out", default=None, help="write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tpsurf",
        description="Tangent-point repulsion energies and regularity diagnostics for discretized sets",
    )
    sp = p.add_subparsers(dest="command", required=True)

    pe = sp.add_parser("energy", help="total repulsion energy")
    _add_common(pe)
    pe.add_argument("--mode", choices=("exact", "bvh"), default="exact")
    pe.add_argument("--theta", type=float, default=0.5, help="bvh opening threshold")
    pe.add_argument("--symmetrize", action="store_true", help="average the kernel over both orientations")
    pe.set_defaults(func=cmd_energy)

    pv = sp.add_parser("verify", help="run the per-input verification battery")
    _add_common(pv)
    pv.add_argument("--probes", type=int, default=8)
    pv.add_argument("--radii", default=None, help="a:b:{lin,log10}[:count]")
    pv.add_argument("--delta", type=float, default=None)
    pv.add_argument("--eta", type=float, default=None)
    pv.set_defaults(func=cmd_verify)

    pb = sp.add_parser("beta", help="plane-fit beta numbers around one point")
    _add_common(pb, q_required=False)
    pb.add_argument("--center-index", type=int, required=True)
    pb.add_argument("--radii", required=True, help="a:b:{lin,log10}[:count]")
    pb.add_argument("--csv", default=None)
    pb.set_defaults(func=cmd_beta)

    pl = sp.add_parser("linking", help="linking parity with a probe sphere")
    pl.add_argument("input")
    pl.add_argument("probe_mesh", nargs="?", default=None, help="circle mesh used as the probe")
    pl.add_argument("--probe-points", default=None, help="two points 'x,y,z;x,y,z' for surface probes")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--threads", type=int, default=None)
    pl.add_argument("--deterministic", action="store_true", default=True)
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_linking)

    ps = sp.add_parser("stopping", help="stopping distance at a cloud point")
    _add_common(ps)
    ps.add_argument("--x-index", type=int, required=True)
    ps.add_argument("--delta", type=float, default=None)
    ps.add_argument("--eta", type=float, default=None)
    ps.set_defaults(func=cmd_stopping)

    pf = sp.add_parser("flow", help="constrained descent on the energy")
    _add_common(pf)
    pf.add_argument("--steps", type=int, default=100)
    pf.add_argument("--csv", default=None, help="write the per-step series here")
    pf.add_argument("--save-mesh", default=None, help="write the final mesh here")
    pf.add_argument("--no-audit", action="store_true")
    pf.set_defaults(func=cmd_flow)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (PreconditionError, InvalidArgumentError, UnsupportedCaseError) as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except TpsurfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
