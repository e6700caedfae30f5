"""Batch command line: validate | gate | mbqc | estimate | sweep.

Exit codes: 0 success or feasibility pass, 1 usage or input error,
2 feasibility failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .cluster import (
    BackendCapabilityError,
    CapacityError,
    PatternError,
    build_cluster_dense,
    build_cluster_graph,
    load_pattern,
    run_pattern,
)
from .device import (
    DeviceError,
    LatticeSpec,
    lattice_from_document,
    mhz,
    parse_device_text,
    set_document_value,
)
from .pulses import (
    DecoherenceSpec,
    PulseError,
    PulseSpec,
    calibrated_cz_pulse,
    optimal_cz_pulse,
    simulate_cz,
)
from .resources import (
    DEFAULT_MARGIN,
    check_feasibility,
    derive_budget,
    junction_label,
    max_feasible_size,
    total_time,
)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    return f"{x:.9g}"


def _rounded(obj):
    """Floats to 9 significant digits for stable, diffable JSON."""
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_rounded(obj), indent=2, sort_keys=True) + "\n"


def _emit(args, name: str, text: str) -> None:
    """Write ``text`` to ``--out/name`` when an output directory is given, else stdout."""
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_device(path: str) -> tuple[dict, LatticeSpec]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read device file: {exc}") from None
    doc = parse_device_text(text, path)
    return doc, lattice_from_document(doc, path)


def _parse_junction(text: str | None, lattice: LatticeSpec):
    if text is None:
        key = sorted(lattice.junctions)[0]
        return lattice.junctions[key]
    try:
        a, b = (tuple(int(c) for c in part.split(",")) for part in text.split(":"))
    except ValueError:
        raise UsageError(f"junction must look like '1,1:1,2', got {text!r}") from None
    try:
        return lattice.junction(a, b)
    except KeyError:
        raise UsageError(f"unknown junction {text!r}") from None


def _budget(args, lattice: LatticeSpec):
    resolution = args.resolution_ns * 1e-9 if args.resolution_ns > 0 else None
    return derive_budget(lattice, resolution=resolution)


# ------------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    _, lattice = _read_device(args.device)
    report = check_feasibility(lattice, _budget(args, lattice), margin=args.margin,
                               hopping_model=args.hopping_model)
    if args.out:
        _emit(args, "feasibility.json", _dump_json(report.to_dict()))
        _emit(args, "feasibility.csv", report.to_csv())
    print(report.to_text())
    return EXIT_OK if report.passed else EXIT_INFEASIBLE


def _gate_pulse(j, left, right, omega, args) -> PulseSpec:
    if omega == 0:
        # idle reference: same line and default duration, drive switched off
        ref = optimal_cz_pulse(j, left, right)
        return PulseSpec(ref.drive_frequency, 0.0, ref.duration)
    if args.calibrated:
        return calibrated_cz_pulse(j, left, right, omega, args.nmax)
    return optimal_cz_pulse(j, left, right, omega)


def _gate_record(lattice, j, omega, n_max, args) -> dict:
    left, right = lattice.endpoints(j)
    pulse = _gate_pulse(j, left, right, omega, args)
    result = simulate_cz(j, left, right, pulse, n_max)
    record = result.to_record()
    record["n_max"] = n_max
    if args.decoherence:
        deco = DecoherenceSpec(qubit_T1=j.coherence_time,
                               photon_T1=min(left.photon_lifetime, right.photon_lifetime))
        open_result = simulate_cz(j, left, right, pulse, n_max, deco)
        record["unitary_fidelity"] = record["fidelity"]
        record.update({k: v for k, v in open_result.to_record().items() if k != "pulse"})
        record["decoherence"] = {"qubit_T1_us": deco.qubit_T1 * 1e6, "photon_T1_us": deco.photon_T1 * 1e6}
    return record


def cmd_gate(args) -> int:
    _, lattice = _read_device(args.device)
    j = _parse_junction(args.junction, lattice)
    omega = lattice.defaults.omega if args.omega is None else mhz(args.omega)
    if omega < 0:
        raise UsageError("--omega must be >= 0")
    report = {"junction": junction_label(j.junction_id)}
    report.update(_gate_record(lattice, j, omega, args.nmax, args))
    if args.convergence:
        report["convergence"] = [
            _gate_record(lattice, j, omega, n, args) for n in sorted({1, args.nmax})
        ]
    if args.out:
        _emit(args, "gate.json", _dump_json(report))
    print(f"junction {report['junction']}")
    print(f"conditional_phase/pi {fmt(report['conditional_phase_over_pi'])}")
    print(f"leakage {fmt(report['leakage'])}")
    print(f"fidelity {fmt(report['fidelity'])}")
    if args.convergence:
        for row in report["convergence"]:
            print(f"  n_max={row['n_max']}: conditional_phase/pi {fmt(row['conditional_phase_over_pi'])}"
                  f" leakage {fmt(row['leakage'])}")
    if not args.out:
        sys.stdout.write(_dump_json(report))
    return EXIT_OK


def _site_text(site) -> str:
    return "(" + ",".join(str(c) for c in site) + ")"


def _output_fidelities(result, pattern) -> dict:
    """Per-site overlap <e|rho_site|e> of the byproduct-corrected residual with the expected outputs."""
    if not pattern.expected_output:
        return {}
    sites, amps = result.corrected_output()
    t = amps.reshape((2,) * len(sites))
    out = {}
    for site, expected in pattern.expected_output.items():
        e = np.asarray(expected, dtype=complex)
        e = e / np.linalg.norm(e)
        q = sites.index(site)
        m = np.moveaxis(t, q, 0).reshape(2, -1)
        rho = m @ m.conj().T
        out[site] = float(np.real(e.conj() @ rho @ e))
    return out


def cmd_mbqc(args) -> int:
    _, lattice = _read_device(args.device)
    try:
        pattern = load_pattern(args.pattern)
    except OSError as exc:
        raise UsageError(f"cannot read pattern file: {exc}") from None
    for st in pattern.steps:
        if st.site not in lattice.resonators:
            raise UsageError(f"pattern site {st.site} is not on the device lattice")
    if args.shots < 1:
        raise UsageError("--shots must be >= 1")
    if args.backend == "dense":
        initial = build_cluster_dense(lattice, inputs=pattern.inputs)
    else:
        if pattern.inputs:
            raise BackendCapabilityError("the graph backend cannot prepare arbitrary input states")
        initial = build_cluster_graph(lattice)
    seeds = np.random.SeedSequence(args.seed).spawn(args.shots)

    def shot(seed_seq):
        rng = np.random.default_rng(seed_seq)
        result = run_pattern(lattice, pattern, rng=rng, backend=args.backend, initial=initial)
        return result, _output_fidelities(result, pattern)

    # validate capability once up front so errors are not raised inside worker threads
    shot(np.random.SeedSequence(0))
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(shot, seeds))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "site", "gamma_rad", "outcome"])
    for result, _ in results:
        for i, st in enumerate(pattern.steps):
            w.writerow([i, _site_text(st.site), fmt(result.angles[i]), result.outcomes[i]])
    _emit(args, "outcomes.csv", buf.getvalue())

    n_steps = len(pattern.steps)
    ones = np.array([r.outcomes for r, _ in results], dtype=float).reshape(args.shots, n_steps)
    summary = {
        "backend": args.backend,
        "seed": args.seed,
        "shots": args.shots,
        "steps": [
            {"step": i, "site": list(st.site), "p_outcome_1": float(ones[:, i].mean()) if n_steps else 0.0,
             "p_outcome_0": 1.0 - float(ones[:, i].mean())}
            for i, st in enumerate(pattern.steps)
        ],
    }
    if args.backend == "graph":
        summary["deterministic_fraction"] = [
            float(np.mean([r.deterministic[i] for r, _ in results])) for i in range(n_steps)
        ]
    fids = [f for _, per_site in results for f in per_site.values()]
    if fids:
        summary["output_fidelity_mean"] = float(np.mean(fids))
        summary["output_fidelity_min"] = float(np.min(fids))
    text = _dump_json(summary)
    if args.out:
        _emit(args, "summary.json", text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def cmd_estimate(args) -> int:
    _, lattice = _read_device(args.device)
    budget = _budget(args, lattice)
    d = lattice.dimension if args.d is None else args.d
    n = lattice.n_sites if args.N is None else args.N
    if d < 1 or n < 1:
        raise UsageError("--d and --N must be >= 1")
    report = check_feasibility(lattice, budget, d, n, args.margin)
    tau_pho = min(r.photon_lifetime for r in lattice.resonators.values())
    n_max = max_feasible_size(budget, tau_pho, d, args.margin)
    out = {
        "d": d,
        "N": n,
        "margin": args.margin,
        "t_sin_ns": budget.t_sin * 1e9,
        "t_cp_ns": budget.t_cp * 1e9,
        "t_mea_ns": budget.t_mea * 1e9,
        "total_time_ns": total_time(d, n, budget) * 1e9,
        "N_max": n_max,
        "ratio15_worst": report.worst_ratio15.ratio15 if report.junctions else None,
        "ratio16_worst": report.worst_ratio16.ratio16 if report.junctions else None,
        "ratio17": report.ratio17,
        "pass": report.passed,
    }
    print(f"total_time {fmt(out['total_time_ns'])} ns (d={d}, N={n})")
    print(f"N_max {n_max} (d={d}, margin {args.margin:g})")
    if report.junctions:
        print(f"ratio15 {fmt(out['ratio15_worst'])}  ratio16 {fmt(out['ratio16_worst'])}  ratio17 {fmt(out['ratio17'])}")
    else:
        print(f"ratio17 {fmt(out['ratio17'])}")
    if args.out:
        _emit(args, "estimate.json", _dump_json(out))
    return EXIT_OK


def _sweep_point(doc, args, value):
    point_doc = set_document_value(doc, args.param, value)
    lattice = lattice_from_document(point_doc, args.device)
    j = _parse_junction(args.junction, lattice)
    left, right = lattice.endpoints(j)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            pulse = _gate_pulse(j, left, right, lattice.defaults.omega, args)
            r = simulate_cz(j, left, right, pulse, args.nmax)
        except (PulseError, DeviceError) as exc:
            return [value, math.nan, math.nan, math.nan, math.nan], str(exc)
    return [value, r.conditional_phase, r.leakage, r.avg_gate_fidelity, pulse.duration * 1e9], None


def cmd_sweep(args) -> int:
    doc, _ = _read_device(args.device)
    if args.steps < 2:
        raise UsageError("--steps must be >= 2")
    try:
        set_document_value(doc, args.param, args.start)
    except KeyError:
        raise UsageError(f"unresolvable sweep parameter {args.param!r}") from None
    values = np.linspace(args.start, args.stop, args.steps)
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda v: _sweep_point(doc, args, float(v)), values))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "conditional_phase_rad", "leakage", "fidelity", "duration_ns"])
    for row, err in rows:
        w.writerow([fmt(x) for x in row])
        if err:
            sys.stderr.write(f"{args.param}={fmt(row[0])}: {err}\n")
    _emit(args, "sweep.csv", buf.getvalue())
    return EXIT_OK


# ------------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="resonator-mbqc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, device=True):
        if device:
            sp.add_argument("device", help="device-v1 JSON file")
        sp.add_argument("--out", metavar="DIR", help="write reports into DIR instead of stdout")

    def timing(sp):
        sp.add_argument("--margin", type=float, default=DEFAULT_MARGIN,
                        help="required ratio for every 'much greater than' condition (default 5)")
        sp.add_argument("--resolution-ns", type=float, default=0.5,
                        help="round derived durations to this many ns, 0 to disable (default 0.5)")

    v = sub.add_parser("validate", help="feasibility ratios; exit 2 when any fails")
    common(v)
    timing(v)
    v.add_argument("--hopping-model", choices=("one-sided", "symmetric"), default="one-sided")
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("gate", help="simulate the CZ pulse on one junction")
    common(g)
    g.add_argument("--junction", metavar="I,J:K,L", help="endpoint sites (default: first junction)")
    g.add_argument("--omega", type=float, metavar="MHZ", help="Rabi strength Omega/2pi in MHz")
    g.add_argument("--nmax", type=int, default=3, help="Fock truncation per resonator (default 3)")
    g.add_argument("--decoherence", action="store_true", help="add T1 damping from device lifetimes")
    g.add_argument("--convergence", action="store_true", help="also run at n_max=1 and report both")
    g.add_argument("--calibrated", action="store_true",
                   help="drive at the exactly diagonalized line instead of the dispersive estimate")
    g.set_defaults(func=cmd_gate)

    m = sub.add_parser("mbqc", help="run a measurement pattern on the device cluster state")
    common(m)
    m.add_argument("pattern", help="pattern-v1 JSON file")
    m.add_argument("--backend", choices=("dense", "graph"), default="dense")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--shots", type=int, default=1)
    m.add_argument("--workers", type=int, default=1)
    m.set_defaults(func=cmd_mbqc)

    e = sub.add_parser("estimate", help="total time, N_max and feasibility ratios")
    common(e)
    timing(e)
    e.add_argument("--d", type=int)
    e.add_argument("--N", type=int)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sweep", help="CZ metrics versus one device parameter")
    common(s)
    s.add_argument("--param", required=True,
                   help="w_GHz, w_prime_GHz or defaults.<field>, e.g. defaults.omega_MHz")
    s.add_argument("--start", type=float, required=True)
    s.add_argument("--stop", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--junction", metavar="I,J:K,L")
    s.add_argument("--nmax", type=int, default=3)
    s.add_argument("--calibrated", action="store_true")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", 0) is not None and getattr(args, "seed", 0) < 0:
        print("error: --seed must be a non-negative integer", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "margin", 1) < 1:
        print("error: --margin must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (UsageError, DeviceError, PatternError, PulseError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
