"""Command line entry point.

Run ``holocollapse <subcommand> --help`` for the flags.  Every flag can also
be given in an INI style config file passed with ``--config``; command line
flags win over the file.  See ``CONFIG_KEYS`` for the accepted keys.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from ._validation import check_positive, check_scaling, check_schedule
from .collapse import SCHEMA_VERSION, default_net_config, holonomy_at, strictly_decreasing, verify_theorem_a
from .exceptions import (BoundViolated, DisconnectedNet, HolocollapseError, IdentificationAmbiguous, NoDecay,
                         SizeCapExceeded)
from .geometry import SCENARIO_NAMES, catalog_scenarios, get_scenario
from .metricspace import FiniteMetricSpace, brute_force_gh, cc_diameter
from .transport import ambrose_singer_estimate, controllability_check, default_base_point

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

# section -> key -> (type, help)
CONFIG_KEYS = {
    "run": {
        "scenario": (str, "catalog scenario name"),
        "seed": (int, "random seed for samplers and nets"),
        "out": (str, "output directory"),
    },
    "scenario": {
        "radius": (float, "sphere radius"),
        "periods": ("floats", "torus periods, comma separated"),
        "hopf_charge": (float, "monopole charge of HopfLike"),
        "su2_charge": (float, "monopole charge of AbelianInSU2"),
        "torus_coefficient": (float, "coefficient c of A = i c dx_1 on HalfTorus"),
        "su2_direction": ("floats", "su(2) direction of the AbelianInSU2 potential"),
    },
    "holonomy": {
        "sample_count": (int, "transported curvature samples"),
        "loop_count": (int, "loops used for the discrete part"),
        "ode_step": (float, "RK4 parameter step"),
    },
    "cc-diam": {
        "net_count": (int, "base points of the fine net"),
        "net_radius": (float, "connectivity radius (base distance)"),
        "fiber_count": (int, "samples along the holonomy fiber"),
        "coarse_fraction": (float, "coarse net size as a fraction of net_count"),
    },
    "collapse-verify": {
        "schedule": (str, "comma separated f values"),
        "scaling": (str, "quadratic or linear"),
        "net_count": (int, "base points of the nets"),
        "net_radius": (float, "connectivity radius (base distance)"),
        "fiber_count": (int, "fiber labels per holonomy circle"),
        "ode_step": (float, "RK4 step of the path-independence checks"),
    },
    "gh-oracle": {
        "x": (str, "CSV file of the first metric space"),
        "y": (str, "CSV file of the second metric space"),
    },
}

DEFAULTS = {
    "seed": 0,
    "sample_count": 200,
    "loop_count": 20,
    "ode_step": 1e-3,
    "coarse_fraction": 0.5,
    "schedule": "1,0.25,0.0625,0.015625",
    "scaling": "quadratic",
}


class UsageError(Exception):
    pass


def _config_help():
    lines = ["config file keys (INI sections):"]
    for section, keys in CONFIG_KEYS.items():
        lines.append(f"  [{section}]")
        for key, (_, text) in keys.items():
            lines.append(f"    {key:<18} {text}")
    return "\n".join(lines)


def _convert(kind, raw, where):
    try:
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return kind(raw)
    except ValueError:
        name = "a list of numbers" if kind == "floats" else f"a{'n' if kind is int else ''} {kind.__name__}"
        raise UsageError(f"{where}: expected {name}, got {raw!r}") from None


def read_config(path, command):
    """Flat dict of the settings relevant to one subcommand."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    out, scenario = {}, {}
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise UsageError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in CONFIG_KEYS[section]:
                raise UsageError(f"{path}: [{section}] unknown key {key!r}")
            value = _convert(CONFIG_KEYS[section][key][0], raw, f"{path}: [{section}] {key}")
            if section == "scenario":
                scenario[key] = value
            elif section in ("run", command):
                out[key] = value
    out["scenario_params"] = scenario
    return out


def resolve(args):
    """Merge defaults, config file and command line flags."""
    settings = dict(DEFAULTS)
    settings["scenario_params"] = {}
    if getattr(args, "config", None):
        settings.update(read_config(args.config, args.command))
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "func"):
            settings[key] = value
    for key in ("seed",):
        if not isinstance(settings[key], int) or settings[key] < 0:
            raise UsageError(f"{key} must be a non-negative integer")
    for key in ("net_count", "fiber_count", "sample_count", "loop_count"):
        if settings.get(key) is not None:
            _positive(settings[key], key, integer=True)
    for key in ("net_radius", "ode_step", "coarse_fraction"):
        if settings.get(key) is not None:
            _positive(settings[key], key)
    return settings


def _positive(value, name, integer=False):
    try:
        check_positive(value, name, integer=integer)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _scenario(settings):
    name = settings.get("scenario")
    if not name:
        raise UsageError(f"--scenario is required; choose from {', '.join(SCENARIO_NAMES)}")
    if name not in SCENARIO_NAMES:
        raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}")
    try:
        return get_scenario(name, **settings["scenario_params"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad scenario parameters: {exc}") from None


def _net_config(scenario, settings, net_count=None):
    return default_net_config(scenario, target_count=net_count or settings.get("net_count"),
                              connectivity_radius=settings.get("net_radius"),
                              fiber_count=settings.get("fiber_count"), seed=settings["seed"])


def _manifest_value(v):
    if isinstance(v, tuple):
        return list(v)
    return v


class Output:
    """Writes result files into ``--out`` (nothing is written without it)."""

    def __init__(self, directory):
        self.directory = directory
        self.files = []
        if directory:
            os.makedirs(directory, exist_ok=True)

    def write(self, name, text):
        if not self.directory:
            return
        with open(os.path.join(self.directory, name), "w", newline="") as fh:
            fh.write(text)
        self.files.append(name)

    def manifest(self, command, settings, status):
        keys = set(CONFIG_KEYS["run"]) | set(CONFIG_KEYS.get(command, {})) | {"spaces", "ode_step"}
        resolved = {k: _manifest_value(v) for k, v in sorted(settings.items()) if k in keys}
        resolved["scenarioParams"] = {k: _manifest_value(v) for k, v in sorted(settings["scenario_params"].items())}
        doc = {
            "schemaVersion": SCHEMA_VERSION,
            "tool": "holocollapse",
            "version": __version__,
            "command": command,
            "config": resolved,
            "exitStatus": status,
            "files": sorted(self.files),
        }
        self.write("manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _dump(obj):
    return json.dumps(obj, indent=2, default=lambda x: x.item() if isinstance(x, np.generic) else x.tolist()) + "\n"


# -- subcommands ----------------------------------------------------------------------


def cmd_catalog(settings, out):
    rows = []
    for s in catalog_scenarios(**settings["scenario_params"]):
        rows.append({"name": s.name, "group": s.group.tag, "base": type(s.base).__name__, "kind": s.kind,
                     "expectedHolonomy": s.expected_holonomy.name})
        print(f"{s.name:<14} {s.group.tag:<4} {type(s.base).__name__:<8} {s.expected_holonomy.name}")
    out.write("catalog.json", _dump({"schemaVersion": SCHEMA_VERSION, "scenarios": rows}))
    return EXIT_OK


def cmd_holonomy(settings, out):
    scenario = _scenario(settings)
    u = default_base_point(scenario)
    try:
        report = ambrose_singer_estimate(scenario, u, settings["sample_count"], settings["seed"],
                                         settings["ode_step"], loop_count=settings["loop_count"])
    except IdentificationAmbiguous as exc:
        print(f"identification ambiguous: {exc}", file=sys.stderr)
        out.write("holonomy.json", _dump({"schemaVersion": SCHEMA_VERSION, "scenario": scenario.name,
                                          "error": str(exc)}))
        return EXIT_VIOLATION
    expected = holonomy_at(scenario, u)
    match = report.identified.same_as(expected, scenario.group)
    doc = report.to_dict()
    doc = {"schemaVersion": SCHEMA_VERSION, **doc, "expectedSubgroup": expected.name, "matchesExpected": match,
           "controllable": controllability_check(scenario, u, report)}
    out.write("holonomy.json", _dump(doc))
    summary = (f"{scenario.name}: holonomy {report.identified.name} (expected {expected.name}), "
               f"algebra rank {report.algebra_rank}, residual {report.residual:.3g}, "
               f"normalization {report.normalization}")
    out.write("holonomy.txt", summary + "\n")
    print(summary)
    return EXIT_OK if match else EXIT_VIOLATION


def cmd_cc_diam(settings, out):
    scenario = _scenario(settings)
    u = default_base_point(scenario)
    hol = holonomy_at(scenario, u)
    fine_cfg = _net_config(scenario, settings)
    coarse_count = max(1, int(round(fine_cfg.target_count * settings["coarse_fraction"])))
    rows = []
    try:
        for count in (coarse_count, fine_cfg.target_count):
            cfg = _net_config(scenario, settings, count)
            kappa, net = cc_diameter(scenario, u, cfg, hol)
            rows.append((count, kappa, net.node_count, net.radius))
    except DisconnectedNet as exc:
        print(f"{exc}\nhint: raise --net-count or --net-radius so the base net is connected", file=sys.stderr)
        return EXIT_VIOLATION
    (_, coarse, _, _), (_, fine, _, _) = rows
    gap = abs(fine - coarse) / fine if fine > 0 else 0.0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["netCount", "kappa0", "nodes", "connectivityRadius"])
    for count, kappa, nodes, radius in rows:
        w.writerow([count, repr(float(kappa)), nodes, repr(float(radius))])
    out.write("cc_diam.csv", buf.getvalue())
    out.write("cc_diam.json", _dump({
        "schemaVersion": SCHEMA_VERSION, "scenario": scenario.name, "kappa0": fine, "kappa0Coarse": coarse,
        "relativeGap": gap, "normalization": scenario.group.normalization,
        "resolutions": [{"netCount": c, "kappa0": k, "nodes": n, "connectivityRadius": r} for c, k, n, r in rows],
    }))
    print(f"{scenario.name}: kappa0 = {fine:.6g} (coarse {coarse:.6g}, relative gap {gap:.3%})")
    return EXIT_OK


def cmd_collapse_verify(settings, out):
    scenario = _scenario(settings)
    try:
        schedule = check_schedule(settings["schedule"], check_scaling(settings["scaling"]))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    cfg = _net_config(scenario, settings)
    report = verify_theorem_a(scenario, None, schedule, cfg, raise_on_violation=False,
                              ode_step=settings["ode_step"])
    out.write("collapse.csv", report.to_csv())
    out.write("collapse.json", report.to_json() + "\n")
    print(f"{scenario.name} ({report.scaling}): kappa0 = {report.kappa0:.6g}, limit {report.limit_space}")
    print(f"{'f':>10} {'dis/2':>10} {'bound/2':>10} {'netTol':>10}")
    for s in report.steps:
        print(f"{s.f:>10.6g} {s.distortion / 2:>10.5g} {s.bound / 2:>10.5g} {s.net_tolerance:>10.4g}")
    try:
        for k, s in enumerate(report.steps):
            if s.slack < -2 * s.net_tolerance or s.one_sided_margin < 0:
                raise BoundViolated(f"bound violated at f = {s.f:g}", pair=s.worst_pair, step=k)
        if not strictly_decreasing(report.distortions, report.diagnostics["noiseFloor"]):
            raise NoDecay("distortions are not strictly decreasing above the noise floor")
    except (BoundViolated, NoDecay) as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    print("PASS")
    return EXIT_OK


def cmd_gh_oracle(settings, out):
    paths = list(settings.get("spaces") or [])
    for key in ("x", "y"):
        if settings.get(key):
            paths.append(settings[key])
    if len(paths) != 2:
        raise UsageError("gh-oracle needs exactly two CSV metric files")
    try:
        X, Y = (FiniteMetricSpace.from_csv(p) for p in paths)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read metric space: {exc}") from None
    try:
        d = brute_force_gh(X, Y)
    except SizeCapExceeded as exc:
        raise UsageError(str(exc)) from None
    out.write("gh.json", _dump({"schemaVersion": SCHEMA_VERSION, "x": paths[0], "y": paths[1], "ghDistance": d}))
    print(repr(float(d)))
    return EXIT_OK


COMMANDS = {
    "catalog": cmd_catalog,
    "holonomy": cmd_holonomy,
    "cc-diam": cmd_cc_diam,
    "collapse-verify": cmd_collapse_verify,
    "gh-oracle": cmd_gh_oracle,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help=f"one of {', '.join(SCENARIO_NAMES)}")
    common.add_argument("--config", help="INI config file (keys listed below)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="directory for CSV/JSON outputs and manifest.json")
    common.add_argument("--ode-step", dest="ode_step", type=float)

    nets = argparse.ArgumentParser(add_help=False)
    nets.add_argument("--net-count", dest="net_count", type=int, help="number of base net points")
    nets.add_argument("--net-radius", dest="net_radius", type=float, help="net connectivity radius")
    nets.add_argument("--fiber-count", dest="fiber_count", type=int, help="samples along holonomy circles")

    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="holocollapse", description="Holonomy and collapse experiments.",
                                     epilog=_config_help(), formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("catalog", parents=[common], help="list scenarios", epilog=_config_help(), formatter_class=fmt)
    p = sub.add_parser("holonomy", parents=[common], help="identify the holonomy group",
                       epilog=_config_help(), formatter_class=fmt)
    p.add_argument("--sample-count", dest="sample_count", type=int)
    p.add_argument("--loop-count", dest="loop_count", type=int)
    p = sub.add_parser("cc-diam", parents=[common, nets], help="CC diameter at two resolutions",
                       epilog=_config_help(), formatter_class=fmt)
    p.add_argument("--coarse-fraction", dest="coarse_fraction", type=float)
    p = sub.add_parser("collapse-verify", parents=[common, nets], help="check the GH bound along a schedule",
                       epilog=_config_help(), formatter_class=fmt)
    p.add_argument("--scaling", choices=("quadratic", "linear"))
    p.add_argument("--schedule", help="comma separated f values")
    p = sub.add_parser("gh-oracle", parents=[common], help="exact GH distance of two small spaces",
                       epilog=_config_help(), formatter_class=fmt)
    p.add_argument("spaces", nargs="*", help="two CSV metric files")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve(args)
        out = Output(settings.get("out"))
        status = COMMANDS[args.command](settings, out)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"holocollapse {args.command}: error: {exc}\n")
    except (BoundViolated, NoDecay) as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except HolocollapseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    out.manifest(args.command, settings, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
