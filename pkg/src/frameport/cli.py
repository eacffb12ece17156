"""Command-line entry point.

Subcommands
-----------
- verify: structural suites (group axioms, UEB orthonormality, equivariance,
  scheme compatibility, finite-subgroup perfection).
- channel: compute one scheme's effective channel and purity figures.
- table1: the channel-purity comparison table across all builtin schemes.
- simulate: end-to-end single-shot protocol runs.
- optimize: UEB parameter search for the conventional channel.

All outputs are stamped with seed, sample count, and a build id, and are
bit-reproducible given the same configuration and seed (except for the
wall-time column, which reports the actual run).  Exit codes: 0 success,
1 verification failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import channel as ch
from . import encoding as enc
from . import groups
from . import ueb as ueb_mod
from .optimize import optimize_conventional_ueb
from .qmat import DensityMatrix

__all__ = ["main", "build_id", "builtin_scheme", "SCHEME_NAMES"]

CSV_COLUMNS = ["scheme", "interpretation", "purity", "stderr",
               "linear_purity", "samples", "seed", "seconds"]


def build_id() -> str:
    """Short content hash of the package sources."""
    pkg = Path(__file__).resolve().parent
    digest = hashlib.sha1()
    for path in sorted(pkg.rglob("*.py")) + sorted(pkg.rglob("*.pyx")):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()[:12]


# ---------------------------------------------------------------------------
# Builtin registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchemeBundle:
    name: str
    group: str                  # misalignment group to integrate over
    variant: str                # conventional | tight | perfect
    spec: ch.TeleportationSpec
    eq: ueb_mod.EquivarianceData | None
    scheme: enc.EncodingScheme | None


def _u1_equivariance() -> ueb_mod.EquivarianceData:
    return ueb_mod.equivariance_analysis(
        ueb_mod.pauli_ueb(), groups.z8_physical(), groups.u1_physical_rep())


def _boct_equivariance() -> ueb_mod.EquivarianceData:
    return ueb_mod.equivariance_analysis(
        ueb_mod.pauli_ueb(), groups.binary_octahedral(),
        groups.su2_defining_rep())


def _btet_equivariance() -> ueb_mod.EquivarianceData:
    return ueb_mod.equivariance_analysis(
        ueb_mod.tetrahedral_ueb(), groups.binary_tetrahedral(),
        groups.su2_defining_rep())


def _bundle(name: str) -> SchemeBundle:
    pauli = ueb_mod.pauli_ueb()
    if name == "u1-conventional":
        return SchemeBundle(name, "u1", "conventional",
                            ch.u1_teleportation_spec(pauli), None, None)
    if name == "u1-tight":
        eq = _u1_equivariance()
        scheme = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1),
                                          label=name)
        return SchemeBundle(name, "u1", "tight",
                            ch.u1_teleportation_spec(pauli), eq, scheme)
    if name == "u1-perfect":
        eq = _u1_equivariance()
        scheme = enc.perfect_matched_scheme(enc.matched_scheme_spec(eq, 1),
                                            label=name)
        return SchemeBundle(name, "u1", "perfect",
                            ch.u1_teleportation_spec(pauli), eq, scheme)
    if name == "su2-conventional":
        return SchemeBundle(name, "su2", "conventional",
                            ch.su2_teleportation_spec(pauli), None, None)
    if name in ("su2-matched-tight", "su2-boct-tight"):
        eq = _boct_equivariance()
        scheme = enc.tight_matched_scheme(enc.matched_scheme_spec(eq, 1),
                                          label="su2-matched-tight")
        return SchemeBundle("su2-matched-tight", "su2", "tight",
                            ch.su2_teleportation_spec(pauli), eq, scheme)
    if name == "su2-rod-tight":
        eq = _boct_equivariance()
        return SchemeBundle(name, "su2", "tight",
                            ch.su2_teleportation_spec(pauli), eq,
                            enc.rod_scheme(label=name))
    if name == "su2-btet-perfect":
        eq = _btet_equivariance()
        scheme = enc.perfect_matched_scheme(enc.matched_scheme_spec(eq, 0),
                                            label=name)
        return SchemeBundle(name, "su2", "perfect",
                            ch.su2_teleportation_spec(ueb_mod.tetrahedral_ueb()),
                            eq, scheme)
    raise ConfigError(
        f"unknown scheme {name!r}; available: {', '.join(SCHEME_NAMES)}")


SCHEME_NAMES = ("u1-conventional", "u1-tight", "u1-perfect",
                "su2-conventional", "su2-matched-tight", "su2-rod-tight",
                "su2-btet-perfect")

_UEBS: dict[str, Callable[[], ueb_mod.UnitaryErrorBasis]] = {
    "pauli": ueb_mod.pauli_ueb,
    "tetrahedral": ueb_mod.tetrahedral_ueb,
}

_REPS: dict[str, Callable[[], groups.Representation]] = {
    "z4": groups.u1_reduced_rep,
    "z8": groups.u1_physical_rep,
    "boct": groups.su2_defining_rep,
    "btet": groups.su2_defining_rep,
    "tet": groups.su2_defining_rep,
}


def builtin_scheme(name: str) -> SchemeBundle:
    return _bundle(name)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.complexfloating):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(args, payload: dict, rows: list[dict] | None = None) -> None:
    meta = {"seed": args.seed, "samples": getattr(args, "samples", None),
            "build": build_id()}
    if args.format == "json":
        text = json.dumps(_jsonable({"meta": meta} | payload), indent=2)
    else:
        if rows is None:
            raise ConfigError("this command has no CSV form; use --format json")
        buf = io.StringIO()
        buf.write(f"# build {meta['build']} seed {meta['seed']}\n")
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _purity_row(name: str, interpretation: str, purity: float, stderr: float,
                linear: float, samples: int, seed: int, seconds: float
                ) -> dict:
    return {"scheme": name, "interpretation": interpretation,
            "purity": f"{purity:.6f}", "stderr": f"{stderr:.6f}",
            "linear_purity": f"{linear:.6f}", "samples": samples,
            "seed": seed, "seconds": f"{seconds:.3f}"}


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_groups(report: dict) -> bool:
    ok = True
    for name in ("z4", "z8", "tet", "btet", "boct"):
        sub = groups.subgroup_by_name(name)
        try:
            sub.check_axioms()
            report[f"group:{name}"] = {"ok": True, "order": sub.order}
        except Exception as exc:            # noqa: BLE001 - report and fail
            ok = False
            report[f"group:{name}"] = {"ok": False, "error": str(exc)}
    return ok


def _verify_uebs(report: dict) -> bool:
    ok = True
    for name, ctor in _UEBS.items():
        passed, dev = ueb_mod.check_ueb(ctor().mats, tol=1e-12)
        report[f"ueb:{name}"] = {"ok": passed, "max_deviation": dev}
        ok = ok and passed
    return ok


_EQ_PAIRS = (("pauli", "z4"), ("pauli", "z8"),
             ("pauli", "boct"), ("tetrahedral", "btet"))


def _verify_equivariance(report: dict, pairs=_EQ_PAIRS) -> bool:
    ok = True
    for ueb_name, sub_name in pairs:
        key = f"equivariance:{ueb_name}/{sub_name}"
        try:
            eq = ueb_mod.equivariance_analysis(
                _UEBS[ueb_name](), groups.subgroup_by_name(sub_name),
                _REPS[sub_name]())
            report[key] = {"ok": True,
                           "orbits": [list(o) for o in eq.orbits],
                           "stabilizer_orders": {
                               str(b): len(s)
                               for b, s in eq.stabilizers.items()}}
        except ueb_mod.NotEquivariantError as exc:
            ok = False
            report[key] = {"ok": False, "error": str(exc)}
    return ok


def _verify_schemes(report: dict, names=None) -> bool:
    ok = True
    for name in names or ("u1-tight", "u1-perfect", "su2-matched-tight",
                          "su2-rod-tight", "su2-btet-perfect"):
        bundle = _bundle(name)
        stream = groups.HaarStream(bundle.group, 7)
        passed, info = enc.compatibility_check(bundle.scheme, bundle.eq,
                                               stream, samples_per_case=200)
        report[f"compatibility:{name}"] = {"ok": passed} | _jsonable(info)
        ok = ok and passed
        passed, info = ch.finite_group_check(bundle.spec, bundle.eq,
                                             bundle.scheme, stream)
        report[f"finite-subgroup:{name}"] = {"ok": passed} | _jsonable(info)
        ok = ok and passed
    return ok


def cmd_verify(args) -> int:
    report: dict = {}
    ok = True
    if args.scheme:
        ok = _verify_schemes(report, [args.scheme]) and ok
    elif args.ueb or args.subgroup:
        ueb_name = args.ueb or "pauli"
        sub_name = args.subgroup or "boct"
        ok = _verify_uebs(report) and ok
        ok = _verify_equivariance(report, [(ueb_name, sub_name)]) and ok
    else:
        ok = _verify_groups(report) and ok
        ok = _verify_uebs(report) and ok
        ok = _verify_equivariance(report) and ok
        ok = _verify_schemes(report) and ok
    _emit(args, {"ok": ok, "checks": report},
          rows=[{"check": k, "ok": v.get("ok")} for k, v in report.items()])
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# channel
# ---------------------------------------------------------------------------

def _estimate(bundle: SchemeBundle, result, method: str, samples: int,
              seed: int) -> ch.ChannelEstimate:
    if bundle.variant == "conventional":
        return ch.conventional_channel(bundle.spec, bundle.group, result,
                                       method, samples, seed)
    if bundle.variant == "tight":
        return ch.tight_channel(bundle.spec, bundle.eq, bundle.scheme,
                                bundle.group, result, method, samples, seed)
    res = 0 if result == "averaged" else int(result)
    return ch.perfect_channel(bundle.spec, bundle.eq, bundle.scheme,
                              bundle.group, res, method, samples, seed)


def _default_method(bundle: SchemeBundle) -> str:
    return "quadrature" if bundle.group in ("u1", "u1r") else "mc"


def cmd_channel(args) -> int:
    bundle = _bundle(args.scheme)
    method = args.method or _default_method(bundle)
    result = args.result
    if result != "averaged":
        result = int(result)
    t0 = time.perf_counter()
    est = _estimate(bundle, result, method, args.samples, args.seed)
    seconds = time.perf_counter() - t0
    purity, p_err = est.map_purity_with_error()
    linear, _ = est.linear_purity_with_error()
    interpretation = ("result-averaged" if result == "averaged"
                      else f"result-{result}")
    rows = [_purity_row(bundle.name, interpretation, purity, p_err, linear,
                        est.samples, args.seed, seconds)]
    payload = {
        "scheme": bundle.name,
        "method": est.method,
        "interpretation": interpretation,
        "superoperator": est.superop.mat,
        "choi_spectrum": est.choi_spectrum(),
        "map_purity": purity,
        "map_purity_stderr": p_err,
        "linear_purity": linear,
        "samples": est.samples,
        "seconds": seconds,
    }
    if bundle.variant == "tight" and result == "averaged":
        per_result = ch.tight_result_estimates(
            bundle.spec, bundle.eq, bundle.scheme, bundle.group, method,
            args.samples, args.seed)
        mean_p, mean_err = ch.mean_result_purity(per_result)
        payload["mean_result_purity"] = mean_p
        payload["mean_result_purity_stderr"] = mean_err
        rows.append(_purity_row(bundle.name, "mean-result-purity", mean_p,
                                mean_err, linear, est.samples, args.seed,
                                seconds))
    _emit(args, payload, rows)
    return 0


# ---------------------------------------------------------------------------
# table1
# ---------------------------------------------------------------------------

def cmd_table1(args) -> int:
    rows: list[dict] = []

    def add(name: str, interpretation: str, est: ch.ChannelEstimate,
            seconds: float, override: tuple[float, float] | None = None):
        purity, err = override or est.map_purity_with_error()
        linear, _ = est.linear_purity_with_error()
        rows.append(_purity_row(name, interpretation, purity, err, linear,
                                est.samples, args.seed, seconds))

    # Circle group: exact quadrature.
    for name in ("u1-conventional", "u1-tight"):
        bundle = _bundle(name)
        t0 = time.perf_counter()
        est = _estimate(bundle, "averaged", "quadrature", args.samples,
                        args.seed)
        add(name, "result-averaged", est, time.perf_counter() - t0)

    # Rotation group conventional: both interpretations.
    bundle = _bundle("su2-conventional")
    t0 = time.perf_counter()
    per = ch.conventional_channel(bundle.spec, "su2", 1, "mc", args.samples,
                                  args.seed)
    add("su2-conventional", "result-1", per, time.perf_counter() - t0)
    t0 = time.perf_counter()
    avg = ch.conventional_channel(bundle.spec, "su2", "averaged", "mc",
                                  args.samples, args.seed)
    add("su2-conventional", "result-averaged", avg, time.perf_counter() - t0)

    # Rotation group tight schemes: mixed channel and mean of the per-result
    # purities (the latter matches the published table's averaging).
    for name in ("su2-matched-tight", "su2-rod-tight"):
        bundle = _bundle(name)
        t0 = time.perf_counter()
        per_result = ch.tight_result_estimates(
            bundle.spec, bundle.eq, bundle.scheme, "su2", "mc", args.samples,
            args.seed)
        n = bundle.spec.basis.size
        mixed = ch.mix_estimates([(1.0 / n, per_result[i]) for i in range(n)])
        seconds = time.perf_counter() - t0
        add(name, "mixed-channel", mixed, seconds)
        add(name, "mean-result-purity", mixed, seconds,
            override=ch.mean_result_purity(per_result))

    _emit(args, {"table": rows}, rows)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    bundle = _bundle(args.scheme)
    d = bundle.spec.dim
    sigma = np.zeros((d, d), dtype=np.complex128)
    sigma[args.input, args.input] = 1.0
    stream = groups.HaarStream(bundle.group, args.seed)
    t0 = time.perf_counter()
    out, transcript = ch.single_shot_simulate(
        bundle.spec, bundle.scheme, bundle.group, DensityMatrix(sigma),
        stream, shots=args.shots)
    seconds = time.perf_counter() - t0
    fidelity = float(out.mat[args.input, args.input].real)
    results, counts = np.unique(transcript["result"], return_counts=True)
    payload = {
        "scheme": bundle.name,
        "shots": args.shots,
        "input": args.input,
        "output_state": out.mat,
        "input_fidelity": fidelity,
        "result_counts": {int(r): int(c) for r, c in zip(results, counts)},
        "seconds": seconds,
    }
    _emit(args, payload,
          [{"scheme": bundle.name, "shots": args.shots,
            "input": args.input, "input_fidelity": f"{fidelity:.6f}",
            "seed": args.seed, "seconds": f"{seconds:.3f}"}])
    return 0


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

def cmd_optimize(args) -> int:
    t0 = time.perf_counter()
    report = optimize_conventional_ueb(args.group, samples=args.samples,
                                       seed=args.seed, threads=args.threads)
    seconds = time.perf_counter() - t0
    rows = [{"label": r.label,
             "params": " ".join(f"{p:.6f}" for p in r.params),
             "linear_purity": f"{r.linear_purity:.6f}",
             "stderr": f"{r.stderr:.6f}",
             "seed": args.seed} for r in report.rows]
    payload = report.to_json() | {
        "best": {"label": report.best.label,
                 "params": list(report.best.params),
                 "linear_purity": report.best.linear_purity},
        "pauli_is_optimal": report.pauli_is_optimal(slack=2e-3, sigmas=3.0),
        "seconds": seconds,
    }
    _emit(args, payload, rows)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frameport",
        description="Teleportation channels under reference-frame "
                    "uncertainty.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--samples", type=int, default=10 ** 6)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--method", choices=("mc", "quadrature"), default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("verify", help="structural verification suites")
    p.add_argument("--all", action="store_true")
    p.add_argument("--scheme", choices=SCHEME_NAMES, default=None)
    p.add_argument("--ueb", choices=tuple(_UEBS), default=None)
    p.add_argument("--subgroup", choices=tuple(_REPS), default=None)
    common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("channel", help="compute an effective channel")
    p.add_argument("--scheme", required=True)
    p.add_argument("--result", default="averaged",
                   help="UEB result index or 'averaged'")
    common(p)
    p.set_defaults(fn=cmd_channel)

    p = sub.add_parser("table1", help="channel-purity comparison table")
    common(p)
    p.set_defaults(fn=cmd_table1)

    p = sub.add_parser("simulate", help="single-shot protocol simulation")
    p.add_argument("--scheme", required=True)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--input", type=int, default=0,
                   help="computational basis state index")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("optimize", help="UEB purity optimization")
    p.add_argument("--group", choices=("u1", "su2"), required=True)
    common(p)
    p.set_defaults(fn=cmd_optimize)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if getattr(args, "samples", 1000) < 1000:
        print("error: samples must be at least 1e3", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
