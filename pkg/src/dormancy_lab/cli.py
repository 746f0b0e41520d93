"""Command-line entry point. Every analysis is a subcommand; every run writes
a manifest echoing the fully resolved parameter set so that re-feeding the
manifest as --config reproduces the run.

Exit codes: 0 success, 2 invalid config, 3 precondition refusal,
4 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .branching import FixedPointDivergence, branching_report
from .equilibria import (
    NoCoexistence,
    condition_table,
    dormancy_virus_equilibrium,
    host_virus_equilibrium,
    invasion_conditions,
)
from .invasion import InvasionExperiment, PreconditionError, run_invasion
from .model import PARAM_KEYS, ConfigError, ModelParams, PopulationState, load_param_file
from .ode import IntegratorConfig, integrate, write_trajectory_csv
from .regimes import RegimeGrid, sweep
from .ssa import SsaConfig, StoppingSpec, run_ssa, write_hits_json, write_trajectory_csv as write_ssa_csv
from .stability import EigenConvergenceError, bifurcation_sweep, classify_equilibrium

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERIC = 4

DEFAULT_SEED = 1729   # fixed documented default; never entropy, so CI is reproducible


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _resolve_config_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    stem = name if name.endswith(".toml") else name + ".toml"
    preset = resources.files("dormancy_lab").joinpath("presets", stem)
    if preset.is_file():
        return Path(str(preset))
    raise CliError(f"config file not found: {name}", EXIT_CONFIG)


def _parse_set(values) -> dict:
    out = {}
    for item in values or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}", EXIT_CONFIG)
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in PARAM_KEYS:
            raise CliError(f"--set: unknown parameter key {key!r}", EXIT_CONFIG)
        try:
            val = int(raw) if key in ("m",) else float(raw)
        except ValueError:
            raise CliError(f"--set: cannot parse value for {key}: {raw!r}", EXIT_CONFIG)
        out[key] = val
    return out


def _load_params(args) -> tuple:
    """Merge config file, manifest options and --set overrides."""
    data = {}
    manifest_options = {}
    if args.config:
        path = _resolve_config_path(args.config)
        try:
            raw = json.loads(path.read_text()) if path.suffix == ".json" else None
        except json.JSONDecodeError:
            raw = None
        if raw is not None and isinstance(raw, dict) and "params" in raw:
            manifest_options = raw.get("options", {}) or {}
        try:
            data = load_param_file(path)
        except Exception as exc:
            raise CliError(f"cannot read config {path}: {exc}", EXIT_CONFIG)
    data.update(_parse_set(args.set))
    try:
        params = ModelParams.from_dict(data)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    return params, manifest_options


def _resolve(args, manifest_options, key, default):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in manifest_options:
        return manifest_options[key]
    return default


def _threads(args, manifest_options) -> int:
    t = _resolve(args, manifest_options, "threads", None)
    if t is None:
        t = os.environ.get("DORMANCY_LAB_THREADS")
    if t is None:
        return 1
    return max(1, int(t))


def _outdir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(outdir: Path, subcommand: str, params: ModelParams, options: dict) -> None:
    manifest = {
        "tool": "dormancy-lab",
        "version": __version__,
        "subcommand": subcommand,
        "params": params.to_dict(),
        "options": options,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_floats(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _invasion_init_counts(params, direction):
    if direction == "inv2":
        n1a, n1i, n3 = host_virus_equilibrium(params)
        return PopulationState(round(params.K * n1a), round(params.K * n1i), 1, 0, 0,
                               round(params.K * n3))
    t2a, t2d, t2i, t3 = dormancy_virus_equilibrium(params)
    return PopulationState(1, 0, round(params.K * t2a), round(params.K * t2d),
                           round(params.K * t2i), round(params.K * t3))


def _invasion_init_rescaled(params, direction, seed_size=1e-3):
    if direction == "inv2":
        n1a, n1i, n3 = host_virus_equilibrium(params)
        return np.array([n1a, n1i, seed_size, 0.0, 0.0, n3])
    t2a, t2d, t2i, t3 = dormancy_virus_equilibrium(params)
    return np.array([seed_size, 0.0, t2a, t2d, t2i, t3])


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

_OUTCOME_PHRASES = {
    "DarkGreenCoex": "stable six-type coexistence",
    "LightGreenCoex": "stable six-type coexistence (no type-2/virus pair coexistence)",
    "Blue": "fixation of type 2, virus persists",
    "Purple": "fixation of type 1, virus persists",
    "Red": "fixation of type 1, virus persists",
    "Orange": "fixation of plain type 2a, virus dies out",
    "FounderControlCoex23": "founder control",
    "FounderControlNoCoex23": "founder control",
    "NoEpidemic": "no persistent virus epidemic",
    "Critical": "critical boundary (excluded from qualitative claims)",
}


def _cmd_equilibria(args, params, options, outdir):
    from .regimes import classify

    report = invasion_conditions(params)
    report.to_json(outdir / "equilibria.json")
    print(condition_table(report, params))
    regime = classify(params).regime
    suffix = "" if regime in ("NoEpidemic", "Critical") else " (conjectured long-term outcome)"
    print(f"regime: {regime} -> {_OUTCOME_PHRASES.get(regime, regime)}{suffix}")
    return EXIT_OK


def _cmd_stability(args, params, options, outdir):
    which = options["which"].split(",") if options["which"] != "all" else \
        ["lv1", "lv2", "n_star", "n_tilde", "x"]
    payload = {}
    for name in which:
        try:
            payload[name] = classify_equilibrium(params, name.strip()).to_dict()
        except NoCoexistence as exc:
            payload[name] = {"error": f"equilibrium does not exist: {exc}"}
    with open(outdir / "stability.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    for name, entry in payload.items():
        if "error" in entry:
            print(f"{name}: {entry['error']}")
        else:
            print(f"{name}: {entry['full']['classification']}")
    return EXIT_OK


def _cmd_ode_sim(args, params, options, outdir):
    system = int(options["system"])
    if options["init"] is not None:
        init = _parse_floats(options["init"])
    elif options["init_preset"]:
        if system != 6:
            raise CliError("--init-preset requires --system 6", EXIT_CONFIG)
        init = _invasion_init_rescaled(params, options["init_preset"])
    else:
        raise CliError("ode-sim needs --init or --init-preset", EXIT_CONFIG)
    cfg = IntegratorConfig(rel_tol=options["rtol"], abs_tol=options["atol"],
                           t_end=options["t_end"])
    res = integrate(params, init, cfg, system=system, record_stride=options["stride"])
    if res.status == "step_underflow":
        print(f"step size underflow at t = {res.t_final}", file=sys.stderr)
        return EXIT_NUMERIC
    labels = {6: ["n1a", "n1i", "n2a", "n2d", "n2i", "n3"],
              4: ["n2a", "n2d", "n2i", "n3"],
              3: ["n1a", "n1i", "n3"],
              2: ["n1a", "n2a"]}[system]
    write_trajectory_csv(outdir / "ode_trajectory.csv", res, labels)
    print(f"integrated system{system} to t = {res.t_final:g} ({res.status}); "
          f"final state: {np.array2string(res.final_state, precision=6)}")
    return EXIT_OK


def _cmd_ssa_sim(args, params, options, outdir):
    if options["init"] is not None:
        counts = [int(float(x)) for x in options["init"].split(",")]
        init = PopulationState(*counts)
    elif options["init_preset"]:
        init = _invasion_init_counts(params, options["init_preset"])
    else:
        raise CliError("ssa-sim needs --init or --init-preset", EXIT_CONFIG)
    cfg = SsaConfig(seed=options["seed"], t_max=options["t_max"],
                    event_cap=options["event_cap"], record_stride=options["stride"])
    stops = StoppingSpec(beta=options["beta"],
                         extinction_sets=[("2a", "2d", "2i"), ("1a", "1i"), ("3",)],
                         halt_on_extinction=[False, False, False])
    out = run_ssa(params, init, cfg, stops)
    write_ssa_csv(outdir / "ssa_trajectory.csv", out)
    write_hits_json(outdir / "stops.json", out)
    print(f"SSA run: {out.events_used} events to t = {out.t_final:g} "
          f"({out.termination_reason}); final = {out.final_state}")
    return EXIT_OK


def _cmd_branching(args, params, options, outdir):
    rep = branching_report(params, options["direction"])
    rep.to_json(outdir / "branching.json")
    s = ", ".join("%.12g" % v for v in rep.extinction_probs)
    print(f"direction {rep.which}: extinction probs = ({s})")
    print(f"perron value = {rep.perron_value:.12g} ({rep.criticality}critical)"
          if rep.criticality != "critical" else
          f"perron value = {rep.perron_value:.3g} (critical: excluded by the theory)")
    print(f"matching invasion condition: {rep.invasion_condition}")
    return EXIT_OK


def _cmd_invasion(args, params, options, outdir, fate_mode=False):
    exp = InvasionExperiment(
        direction=options["direction"], params=params,
        K_list=tuple(options["K_list"]), replicas=options["replicas"],
        beta=options["beta"], delta=options["delta"], t_max=options["t_max"],
        base_seed=options["seed"], fate_mode=fate_mode)
    result = run_invasion(exp, threads=options["threads"])
    result.to_json(outdir / ("fate.json" if fate_mode else "invasion.json"))
    result.write_replicas_csv(outdir / "replicas.csv")
    for entry in result.per_K:
        line = (f"K={entry['K']:g}: {entry['successes']}/{entry['replicas']} successes "
                f"(p_hat={entry['p_hat']:.4f}, theory 1-s={result.theory['one_minus_s']:.4f})")
        if fate_mode:
            line += f", fates {entry['fate_of_successes']}"
        print(line)
    return EXIT_OK


def _cmd_regimes(args, params, options, outdir):
    n_l, n_q = (int(x) for x in options["grid"].lower().split("x"))
    grid = sweep(params, lambda2_range=tuple(options["lambda2_range"]),
                 q_range=tuple(options["q_range"]), resolution=(n_l, n_q))
    grid.to_csv(outdir / "regimes.csv")
    RegimeGrid.write_legend(outdir / "legend.json")
    present = sorted(grid.regimes_present())
    print(f"classified {len(grid.cells)} cells; regimes present: {present}")
    return EXIT_OK


def _cmd_bifurcation(args, params, options, outdir):
    lo, hi = options["m_range"]
    m_values = np.linspace(lo, hi, int(options["m_steps"]))
    rep = bifurcation_sweep(params, m_values, target=options["target"])
    rep.to_csv(outdir / "bifurcation.csv")
    with open(outdir / "bifurcation.json", "w") as fh:
        json.dump({"target": rep.target, "m_star": rep.m_star, "m_hopf": rep.m_hopf,
                   "m_is_integer_model": rep.m_is_integer_model,
                   "note": "m treated as a real sweep variable for ODE-only analysis"},
                  fh, indent=2)
        fh.write("\n")
    print(f"m* (transcritical) = {rep.m_star:.6f}; "
          f"m_hopf = {rep.m_hopf if rep.m_hopf is not None else 'none found in range'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dormancy-lab",
                                 description="host-virus-dormancy numerical laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(sp, seeded=True):
        sp.add_argument("--config", help="params file (JSON/TOML) or preset name (fig7, fig9)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a single parameter")
        sp.add_argument("--out", help="output directory (default: current)")
        if seeded:
            sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (env DORMANCY_LAB_THREADS as fallback)")

    common(sub.add_parser("equilibria", help="closed-form equilibria and conditions"), seeded=False)

    sp = sub.add_parser("stability", help="spectra and classification of named equilibria")
    common(sp, seeded=False)
    sp.add_argument("--which", default=None, help="comma list of lv1,lv2,n_star,n_tilde,x")

    sp = sub.add_parser("ode-sim", help="integrate a deterministic system")
    common(sp, seeded=False)
    sp.add_argument("--system", type=int, default=None, choices=(2, 3, 4, 6))
    sp.add_argument("--init", help="comma-separated rescaled initial state")
    sp.add_argument("--init-preset", choices=("inv2", "inv1"), dest="init_preset",
                    help="resident equilibrium plus a 1e-3 invader seed")
    sp.add_argument("--t-end", type=float, default=None, dest="t_end")
    sp.add_argument("--stride", type=float, default=None)
    sp.add_argument("--rtol", type=float, default=None)
    sp.add_argument("--atol", type=float, default=None)

    sp = sub.add_parser("ssa-sim", help="one exact stochastic trajectory")
    common(sp)
    sp.add_argument("--init", help="comma-separated absolute counts")
    sp.add_argument("--init-preset", choices=("inv2", "inv1"), dest="init_preset")
    sp.add_argument("--t-max", type=float, default=None, dest="t_max")
    sp.add_argument("--stride", type=float, default=None)
    sp.add_argument("--event-cap", type=int, default=None, dest="event_cap")
    sp.add_argument("--beta", type=float, default=None)

    sp = sub.add_parser("branching", help="invader branching process report")
    common(sp, seeded=False)
    sp.add_argument("--direction", choices=("inv2", "inv1"), default=None)

    for name in ("invasion", "fate"):
        sp = sub.add_parser(name, help=f"Monte-Carlo {name} experiment")
        common(sp)
        sp.add_argument("--direction", choices=("inv2", "inv1"), default=None)
        sp.add_argument("--K", default=None, help="comma list of carrying capacities")
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument("--beta", type=float, default=None)
        sp.add_argument("--delta", type=float, default=None)
        sp.add_argument("--t-max", type=float, default=None, dest="t_max")

    sp = sub.add_parser("regimes", help="(lambda2, q) regime map")
    common(sp, seeded=False)
    sp.add_argument("--grid", default=None)
    sp.add_argument("--lambda2-range", default=None, dest="lambda2_range")
    sp.add_argument("--q-range", default=None, dest="q_range")

    sp = sub.add_parser("bifurcation", help="burst-size sweep of an equilibrium")
    common(sp, seeded=False)
    sp.add_argument("--target", choices=("n_star", "n_tilde"), default=None)
    sp.add_argument("--m-range", default=None, dest="m_range")
    sp.add_argument("--m-steps", type=int, default=None, dest="m_steps")

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params, manifest_options = _load_params(args)
        outdir = _outdir(args)
        seed = int(_resolve(args, manifest_options, "seed", DEFAULT_SEED))
        threads = _threads(args, manifest_options)
        sc = args.subcommand
        if sc == "equilibria":
            options = {}
            code = _cmd_equilibria(args, params, options, outdir)
        elif sc == "stability":
            options = {"which": _resolve(args, manifest_options, "which", "all")}
            code = _cmd_stability(args, params, options, outdir)
        elif sc == "ode-sim":
            options = {k: _resolve(args, manifest_options, k, d) for k, d in
                       (("system", 6), ("init", None), ("init_preset", None),
                        ("t_end", 500.0), ("stride", 0.5), ("rtol", 1e-10), ("atol", 1e-10))}
            code = _cmd_ode_sim(args, params, options, outdir)
        elif sc == "ssa-sim":
            options = {k: _resolve(args, manifest_options, k, d) for k, d in
                       (("init", None), ("init_preset", None), ("t_max", 100.0),
                        ("stride", 0.5), ("event_cap", 10 ** 9), ("beta", 0.05))}
            options["seed"] = seed
            code = _cmd_ssa_sim(args, params, options, outdir)
        elif sc == "branching":
            options = {"direction": _resolve(args, manifest_options, "direction", "inv2")}
            code = _cmd_branching(args, params, options, outdir)
        elif sc in ("invasion", "fate"):
            options = {
                "direction": _resolve(args, manifest_options, "direction", "inv2"),
                "K_list": [float(x) for x in
                           str(_resolve(args, manifest_options, "K", "1000")).split(",")],
                "replicas": int(_resolve(args, manifest_options, "replicas", 1000)),
                "beta": float(_resolve(args, manifest_options, "beta", 0.05)),
                "delta": float(_resolve(args, manifest_options, "delta", 0.1)),
                "t_max": float(_resolve(args, manifest_options, "t_max", 1e3)),
                "seed": seed,
                "threads": threads,
            }
            code = _cmd_invasion(args, params, options, outdir, fate_mode=(sc == "fate"))
        elif sc == "regimes":
            options = {
                "grid": str(_resolve(args, manifest_options, "grid", "400x400")),
                "lambda2_range": _parse_floats(str(_resolve(args, manifest_options,
                                                            "lambda2_range", "1.2,4.0"))),
                "q_range": _parse_floats(str(_resolve(args, manifest_options,
                                                      "q_range", "0.01,0.99"))),
            }
            code = _cmd_regimes(args, params, options, outdir)
        elif sc == "bifurcation":
            options = {
                "target": _resolve(args, manifest_options, "target", "n_star"),
                "m_range": _parse_floats(str(_resolve(args, manifest_options, "m_range", "2,60"))),
                "m_steps": int(_resolve(args, manifest_options, "m_steps", 117)),
            }
            code = _cmd_bifurcation(args, params, options, outdir)
        else:  # pragma: no cover
            raise CliError(f"unknown subcommand {sc}", EXIT_CONFIG)
        _write_manifest(outdir, sc, params, {**options, "seed": seed, "threads": threads}
                        if sc in ("ssa-sim", "invasion", "fate") else options)
        return code
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, NoCoexistence) as exc:
        print(f"precondition refused: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (EigenConvergenceError, FixedPointDivergence) as exc:
        print(f"numeric non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
