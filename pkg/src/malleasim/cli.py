"""Command-line entry point: ``malleasim {profile,gen,sim,sweep}``.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import yaml

from . import metrics
from .config import RunConfig, load_config
from .errors import Busy, InputError, InvalidSpec, InvariantViolation, PolicyViolation
from .profiles import (ApplicationProfile, FIXTURE_APPS, derive_malleability_params,
                       fixture_profile, gain_difference, load_profile, load_profiles)
from .simulator import run
from .workload import (Heterogeneous, JobClass, PerApp, WorkloadSpec, format_workload,
                       generate, parse_job_class, read_workload, spec_from_dict, write_workload)

log = logging.getLogger("malleasim")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2

CLASS_ORDER = (JobClass.FIXED, JobClass.PURE_MOLDABLE, JobClass.PURE_MALLEABLE,
               JobClass.FLEXIBLE)

COMPARISON_COLUMNS = [
    "variant", "submission", "jobs", "makespan_s", "avg_waiting_s", "avg_execution_s",
    "avg_completion_s", "allocation_rate_pct", "energy_kwh", "resizes",
    "speedup_waiting_vs_fixed", "speedup_completion_vs_fixed", "speedup_makespan_vs_fixed",
    "speedup_waiting_vs_moldable", "speedup_completion_vs_moldable",
    "speedup_makespan_vs_moldable",
    "rel_completion_pct", "rel_makespan_pct", "rel_energy_pct", "rel_allocation_pct",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# -- helpers -----------------------------------------------------------------------

def _profiles(cfg: RunConfig) -> dict[str, ApplicationProfile]:
    return load_profiles(cfg.profiles_dir)


def _read_profile(arg: str) -> ApplicationProfile:
    # a path wins; a bare bundled name is accepted as a shortcut
    if not Path(arg).exists() and arg in FIXTURE_APPS:
        return fixture_profile(arg)
    try:
        return load_profile(arg)
    except OSError as exc:
        raise InputError(f"cannot read profile {arg}: {exc.strerror}") from exc


def _csv_list(text: str | None) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()] if text else []


def _fractions(text: str | None) -> list[float]:
    try:
        return [float(x) for x in _csv_list(text)]
    except ValueError as exc:
        raise InputError(f"--malleable-fraction expects numbers, got {text!r}") from exc


def _load_spec_doc(path: str) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read workload spec {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise InvalidSpec(f"{path}: not a valid YAML document ({exc})") from exc
    if not isinstance(doc, dict):
        raise InvalidSpec(f"{path}: workload spec must be a mapping")
    return doc


def _build_spec(doc: dict, seed: int, cfg: RunConfig, threshold: float | None) -> WorkloadSpec:
    doc = dict(doc)
    doc.setdefault("threshold_pct", cfg.threshold_pct)
    doc.setdefault("cluster_cap", cfg.job_cap)
    if threshold is not None:
        doc["threshold_pct"] = threshold
    spec = spec_from_dict(doc, seed)
    if spec.cluster_cap > cfg.total_nodes:
        raise InvalidSpec(f"cluster_cap {spec.cluster_cap} exceeds {cfg.total_nodes} nodes")
    return spec


def _job_class_override(args) -> object | None:
    chosen = [x for x in (args.classes, args.malleable_fraction, args.malleable_apps) if x]
    if len(chosen) > 1:
        raise InputError("--classes, --malleable-fraction and --malleable-apps are exclusive")
    if args.classes:
        names = _csv_list(args.classes)
        if len(names) != 1:
            raise InputError("gen takes a single class in --classes")
        return parse_job_class(names[0])
    if args.malleable_fraction:
        fr = _fractions(args.malleable_fraction)
        if len(fr) != 1:
            raise InputError("gen takes a single value in --malleable-fraction")
        return Heterogeneous(fr[0])
    if args.malleable_apps:
        return PerApp(frozenset(_csv_list(args.malleable_apps)))
    return None


# -- commands ----------------------------------------------------------------------

def cmd_profile(args) -> int:
    cfg = load_config(args.config)
    threshold = args.threshold if args.threshold is not None else cfg.threshold_pct
    prof = _read_profile(args.profile)
    curve = gain_difference(prof)
    params = derive_malleability_params(curve, threshold, cfg.job_cap)
    out = sys.stdout
    out.write(f"# {prof.name}: gain difference vs {curve.reference_procs} procs, "
              f"threshold {threshold:g}%\n")
    out.write("procs time_s gain_pct\n")
    out.write(f"{curve.reference_procs} {prof.measured_timings[curve.reference_procs]:.6f} -\n")
    for p, s in curve.entries.items():
        out.write(f"{p} {prof.measured_timings[p]:.6f} {s:.6f}\n")
    out.write(f"lower={params.lower} preferred={params.preferred} upper={params.upper}\n")
    return EXIT_OK


def cmd_gen(args) -> int:
    cfg = load_config(args.config)
    spec = _build_spec(_load_spec_doc(args.spec), args.seed, cfg, args.threshold)
    override = _job_class_override(args)
    if override is not None:
        spec = replace(spec, job_class=override)
    jobs = generate(spec, _profiles(cfg))
    if args.out in (None, "-"):
        sys.stdout.write(format_workload(jobs))
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_workload(jobs, args.out)
    return EXIT_OK


def cmd_sim(args) -> int:
    cfg = load_config(args.config)
    try:
        jobs = read_workload(args.workload)
    except OSError as exc:
        raise InputError(f"cannot read workload {args.workload}: {exc.strerror}") from exc
    trace = run(jobs, _profiles(cfg), cfg.sim_config(), seed=args.seed)
    report = metrics.summarize(trace, cfg.idle_w, cfg.loaded_w)
    metrics.write_outputs(trace, report, args.out)
    return EXIT_OK


def _variants(spec: WorkloadSpec, args) -> list[tuple[str, object, bool]]:
    """(name, job_class, rigid submission) for every run of a sweep."""
    names = _csv_list(args.classes) or [c.value for c in CLASS_ORDER]
    out = []
    for name in names:
        cls = parse_job_class(name)
        if not isinstance(cls, JobClass):
            raise InputError(f"--classes: {name!r} is not a job class")
        out.append((cls.value, cls, cls.rigid))
    for f in _fractions(args.malleable_fraction):
        out.append((f"mix{f:g}", Heterogeneous(f), spec.rigid))
    apps = _csv_list(args.malleable_apps)
    if apps:
        out.append(("apps:" + "+".join(apps), PerApp(frozenset(apps)), spec.rigid))
    seen = set()
    for name, _, _ in out:
        if name in seen:
            raise InputError(f"variant {name!r} listed twice")
        seen.add(name)
    return out


def _ratio(a: float, b: float) -> float:
    return 1.0 if a == b else (a / b if b else float("inf"))


def comparison_rows(results: list[tuple[str, bool, metrics.MetricsReport]]) -> list[list]:
    """One row per variant.  Speedups divide the baseline's average by the
    variant's; ``rel_*`` columns express the variant as a percentage of the
    baseline with the same submission mode (Fixed for rigid, PureMoldable
    for moldable)."""
    by_name = {name: rep for name, _, rep in results}
    fixed = by_name.get(JobClass.FIXED.value)
    moldable = by_name.get(JobClass.PURE_MOLDABLE.value)
    f = metrics.fmt
    rows = []
    for name, rigid, rep in results:
        row = [name, "rigid" if rigid else "moldable", len(rep.jobs), f(rep.makespan),
               f(rep.avg_waiting), f(rep.avg_execution), f(rep.avg_completion),
               f(rep.allocation_rate), f(rep.energy_kwh), rep.total_resizes]
        for base in (fixed, moldable):
            if base is None:
                row += ["", "", ""]
            else:
                sp = metrics.speedup(base, rep)
                row += [f(sp["waiting"]), f(sp["completion"]), f(sp["makespan"])]
        base = fixed if rigid else moldable
        if base is None:
            row += ["", "", "", ""]
        else:
            row += [f(100 * _ratio(rep.avg_completion, base.avg_completion)),
                    f(100 * _ratio(rep.makespan, base.makespan)),
                    f(100 * _ratio(rep.energy_kwh, base.energy_kwh)),
                    f(100 * _ratio(rep.allocation_rate, base.allocation_rate))]
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    spec = _build_spec(_load_spec_doc(args.spec), args.seed, cfg, args.threshold)
    profiles = _profiles(cfg)
    out = Path(args.out)
    results = []
    # variants share a seed, hence the same arrivals and applications
    for name, job_class, rigid in _variants(spec, args):
        jobs = generate(replace(spec, job_class=job_class, rigid=rigid), profiles)
        trace = run(jobs, profiles, cfg.sim_config(), seed=args.seed)
        report = metrics.summarize(trace, cfg.idle_w, cfg.loaded_w)
        metrics.write_outputs(trace, report, out / name.replace(":", "_").replace("+", "_"))
        results.append((name, rigid, report))
        log.info("%s: avg completion %.1f s, makespan %.1f s",
                 name, report.avg_completion, report.makespan)
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        w.writerows(comparison_rows(results))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="malleasim",
                description="Simulate malleable and moldable jobs on a batch cluster.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed_required=False):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--seed", type=int, required=seed_required,
                        help="random seed (required where randomness is drawn)")

    sp = sub.add_parser("profile", help="gain table and malleability parameters of a profile")
    sp.add_argument("profile", help="profile YAML file or bundled name (cg, jacobi, nbody, hpg)")
    sp.add_argument("--threshold", type=float, help="gain threshold in percent")
    sp.add_argument("--config", help="YAML run configuration")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("gen", help="generate a workload file from a spec")
    sp.add_argument("spec", help="workload spec YAML")
    common(sp, seed_required=True)
    sp.add_argument("--out", help="output workload file (default stdout)")
    sp.add_argument("--threshold", type=float, help="gain threshold in percent")
    sp.add_argument("--classes", help="override the job class")
    sp.add_argument("--malleable-fraction", help="percentage of malleable jobs")
    sp.add_argument("--malleable-apps", help="comma-separated apps whose jobs are malleable")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("sim", help="simulate a workload file")
    sp.add_argument("workload", help="workload file")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory for the CSV files")
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("sweep", help="compare job classes on one base job list")
    sp.add_argument("spec", help="workload spec YAML")
    common(sp, seed_required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--threshold", type=float, help="gain threshold in percent")
    sp.add_argument("--classes", help="comma-separated classes (default: all four)")
    sp.add_argument("--malleable-fraction",
                    help="comma-separated malleable percentages to add as mixed variants")
    sp.add_argument("--malleable-apps", help="comma-separated apps for a per-app variant")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvariantViolation, PolicyViolation, Busy) as exc:
        print(f"malleasim: internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except InputError as exc:
        print(f"malleasim: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"malleasim: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
