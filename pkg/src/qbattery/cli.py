"""Command-line experiment runner.

Each subcommand reads a sectioned key-value config, runs one experiment
family through the library and writes ``<experiment>.csv`` plus
``summary.json`` into ``--out``. Numbers are printed with 12 significant
digits so identical configs give byte-identical files.

Exit status: 0 success, 2 config error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import charging, dicke, ergotropy, extraction, spinchain
from .qops import DensityState, random_state

EXPERIMENTS = ("ergotropy", "activation", "extract", "charge", "dicke", "spinchain")
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3

HEADERS = {
    "ergotropy": ("state", "energy", "passive_energy", "ergotropy", "beta_bar", "thermal_bound"),
    "activation": ("n", "w_max_n", "delta_w", "asymptote"),
    "extract": ("sample", "t", "energy", "power", "purity", "min_pt_eigenvalue"),
    "charge": ("n", "driving", "time", "gamma", "work", "power"),
    "dicke": ("n", "cutoff", "tau_opt", "max_power", "ratio"),
    "spinchain": ("profile", "n", "gamma", "fit_class"),
}


class ConfigError(ValueError):
    """Every problem found in a config document."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


# --- value parsers ----------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split()]
    if not parts:
        raise ValueError("expected at least one number")
    return tuple(float(p) for p in parts)


def _ints(text: str) -> tuple[int, ...]:
    out = []
    for part in text.replace(",", " ").split():
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("expected at least one integer")
    return tuple(out)


def _float_rows(text: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_floats(row) for row in text.split(";") if row.strip())


def _words(text: str) -> tuple[str, ...]:
    return tuple(w for w in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _all_positive(xs):
    return all(v > 0 for v in xs)


@dataclass(frozen=True)
class Param:
    parse: object
    default: object
    check: object = None
    rule: str = ""


def _schema() -> dict[str, dict[str, Param]]:
    pos, nonneg = (_positive, "must be positive"), (_nonneg, "must be non-negative")
    return {
        "ergotropy": {
            "levels": Param(_floats, (-2.0, -1.0, 0.0, 1.0, 2.0)),
            "populations": Param(_float_rows, ((0.1, 0.2, 0.0, 0.3, 0.4),)),
            "random_states": Param(int, 0, *nonneg),
        },
        "activation": {
            "levels": Param(_floats, (0.0, 0.579, 1.0)),
            "eigenvalues": Param(_floats, (0.538, 0.237, 0.224)),
            "n_max": Param(int, 4, *pos),
        },
        "extract": {
            "levels": Param(_floats, (0.0, 0.579, 1.0)),
            "populations": Param(_floats, (0.0, 0.7, 0.3)),
            "n": Param(int, 2, *pos),
            "substeps": Param(int, 8, *pos),
            "step_duration": Param(float, 1.0, *pos),
        },
        "charge": {
            "levels": Param(_floats, (0.0, 1.0)),
            "n": Param(_ints, (1, 2, 3, 4, 5, 6), _all_positive, "must be positive"),
            "drivings": Param(_words, ("collective", "parallel"),
                              lambda ws: all(w in ("collective", "parallel", "flip") for w in ws),
                              "must be collective, parallel or flip"),
            "E_max": Param(float, 1.0, *pos),
        },
        "dicke": {
            "n": Param(_ints, (1, 2, 4, 6, 8), _all_positive, "must be positive"),
            "omega_c": Param(float, 1.0, *pos),
            "omega_a": Param(float, None, *pos),
            "lambda_bar": Param(float, dicke.COUPLING_REGIMES["strong"], *nonneg),
            "tau_c": Param(float, None, *pos),
            "grid": Param(int, 400, *pos),
            "rotating_wave": Param(_bool, False),
        },
        "spinchain": {
            "profiles": Param(_words, ("nearest_neighbour", "long_range", "uniform"),
                              lambda ws: all(w in spinchain.PROFILES for w in ws),
                              "must name known profiles"),
            "n": Param(_ints, (3, 4, 5, 6, 7, 8), lambda ns: all(v >= 2 for v in ns), "must be >= 2"),
            "B": Param(float, 1.0),
            "omega": Param(float, 1.0, *nonneg),
            "alpha": Param(float, 0.0, lambda a: -1 <= a <= 1, "must lie in [-1, 1]"),
            "g": Param(float, 0.02),
            "samples": Param(int, 400, *pos),
            "enforce_weak": Param(_bool, True),
        },
    }


SCHEMA = _schema()


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict
    seed: int = 0
    output_path: str | None = None
    raw: dict = field(default_factory=dict)


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    """Parse and validate a config document, collecting every violation.

    The document has an optional ``[general]`` section (``experiment``,
    ``seed``, ``output``) and one section named after the experiment.
    Missing keys take documented defaults.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError([f"line {exc.lineno}: expected a [section] header"]) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError([f"line {exc.lineno}: {exc.message.splitlines()[0]}"]) from None
    except configparser.ParsingError as exc:
        raise ConfigError([f"line {ln}: cannot parse {line.strip()!r}" for ln, line in exc.errors]) from None

    errors = []
    general = dict(cp["general"]) if cp.has_section("general") else {}
    for key in sorted(set(general) - {"experiment", "seed", "output"}):
        errors.append(f"[general] unknown key {key!r}")
    exp = general.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        errors.append(f"[general] experiment = {exp!r} does not match subcommand {experiment!r}")
    if exp not in SCHEMA:
        errors.append(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
        raise ConfigError(errors)
    seed = 0
    if "seed" in general:
        try:
            seed = int(general["seed"])
        except ValueError:
            errors.append(f"seed: not an integer: {general['seed']!r}")
    for sec in cp.sections():
        if sec not in ("general", exp):
            errors.append(f"unknown section [{sec}]")

    raw = dict(cp[exp]) if cp.has_section(exp) else {}
    params = {}
    schema = SCHEMA[exp]
    for key in sorted(set(raw) - set(schema)):
        errors.append(f"[{exp}] unknown key {key!r}")
    for key, spec in schema.items():
        if key not in raw:
            params[key] = spec.default
            continue
        try:
            value = spec.parse(raw[key])
        except (ValueError, TypeError) as exc:
            errors.append(f"{key}: {exc}")
            continue
        if spec.check is not None and not spec.check(value):
            errors.append(f"{key}: {spec.rule} (got {raw[key]!r})")
            continue
        params[key] = value
    if not errors:
        errors.extend(_validate_physics(exp, params))
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(exp, params, seed, general.get("output"), raw)


def _validate_physics(exp: str, p: dict) -> list[str]:
    """Let the owning modules reject parameter combinations."""
    errs = []

    def attempt(name, fn):
        try:
            fn()
        except (ValueError, NotImplementedError) as exc:
            errs.append(f"{name}: {exc}")

    if "levels" in p:
        attempt("levels", lambda: ergotropy.EnergySpectrum(p["levels"]))
    if exp == "ergotropy":
        for k, row in enumerate(p["populations"]):
            if len(row) != len(p["levels"]):
                errs.append(f"populations: state {k} has {len(row)} entries for {len(p['levels'])} levels")
            else:
                attempt("populations", lambda r=row: DensityState.from_populations(np.asarray(r)))
    elif exp in ("activation", "extract"):
        key = "eigenvalues" if exp == "activation" else "populations"
        if len(p[key]) != len(p["levels"]):
            errs.append(f"{key}: {len(p[key])} entries for {len(p['levels'])} levels")
        elif any(v < 0 for v in p[key]) or sum(p[key]) <= 0:
            errs.append(f"{key}: must be non-negative with positive sum")
    elif exp == "dicke":
        for n in p["n"]:
            attempt("n", lambda n=n: dicke.DickeConfig(n=n, omega_c=p["omega_c"], omega_a=p["omega_a"],
                                                       lambda_bar=p["lambda_bar"], tau_c=p["tau_c"]))
    elif exp == "spinchain":
        for prof in p["profiles"]:
            for n in p["n"]:
                attempt("n", lambda prof=prof, n=n: spinchain.ChainConfig(
                    n=n, B=p["B"], omega=p["omega"], alpha=p["alpha"], profile=prof, g=p["g"]))
    elif exp == "charge":
        for n in p["n"]:
            attempt("n", lambda n=n: charging.ChargingProblem.ground_to_top(
                ergotropy.EnergySpectrum(p["levels"]), n, p["E_max"]))
        if "flip" in p["drivings"] and len(p["levels"]) != 2:
            errs.append("drivings: flip requires a qubit cell")
    return errs


# --- output -----------------------------------------------------------------


def fmt(x) -> str:
    """Canonical text form: 12 significant digits for reals."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        out = f"{x:.12g}"
        return "0" if out == "-0" else out
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return fmt(x) if not math.isfinite(x) else float(f"{x:.12g}")
    return x


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def package_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


# --- experiment runners -----------------------------------------------------


@contextmanager
def _mapper(threads: int):
    if threads <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield pool.map


def _run_ergotropy(cfg: ExperimentConfig, mapper):
    p = cfg.parameters
    spec = ergotropy.EnergySpectrum(p["levels"])
    h0 = ergotropy.internal_hamiltonian(spec)
    states = [DensityState.from_populations(np.asarray(r) / np.sum(r)) for r in p["populations"]]
    rng = np.random.default_rng(cfg.seed)
    states += [random_state(spec.d, rng) for _ in range(p["random_states"])]

    def point(rho):
        dec = ergotropy.passive_decomposition(rho, h0)
        return (ergotropy.energy(rho, h0), ergotropy.energy(dec.passive_state, h0), dec.ergotropy,
                ergotropy.entropy_matched_beta(rho, h0), ergotropy.ergotropy_thermal_bound(rho, h0))

    vals = list(mapper(point, states))
    rows = [(k, *v) for k, v in enumerate(vals)]
    claims = {
        "ergotropy_nonnegative": all(v[2] >= -1e-12 for v in vals),
        "thermal_bound_holds": all(v[4] >= v[2] - 1e-12 for v in vals),
        "min_bound_margin": min(v[4] - v[2] for v in vals),
        "ergotropies": [v[2] for v in vals],
    }
    return rows, claims


def _run_activation(cfg: ExperimentConfig, mapper):
    p = cfg.parameters
    spec = ergotropy.EnergySpectrum(p["levels"])
    ev = np.asarray(p["eigenvalues"], float)
    rho = DensityState.from_populations(ev / ev.sum())
    curve = ergotropy.activation_curve(rho, spec, p["n_max"])
    w = list(mapper(lambda n: ergotropy.per_copy_ergotropy(rho, spec, n), range(1, p["n_max"] + 1)))
    asym = ergotropy.activation_asymptote(rho, spec)
    beta = ergotropy.entropy_matched_beta(rho, ergotropy.internal_hamiltonian(spec))
    rows = [(n, wn, dw, asym) for (n, dw), wn in zip(curve, w)]
    dws = [dw for _, dw in curve]
    claims = {
        "asymptote": asym,
        "beta_bar": beta,
        "delta_w": dws,
        "non_decreasing": all(b >= a - 1e-15 for a, b in zip(dws, dws[1:])),
        "below_asymptote": all(d <= asym + 1e-12 for d in dws),
        "fraction_of_asymptote_at_n_max": dws[-1] / asym if asym > 0 else math.nan,
    }
    return rows, claims


def _run_extract(cfg: ExperimentConfig, mapper):
    p = cfg.parameters
    spec = ergotropy.EnergySpectrum(p["levels"])
    pops = np.asarray(p["populations"], float)
    cell = DensityState.from_populations(pops / pops.sum())
    state, plan, _ = extraction.plan_for_copies(cell, spec, p["n"], p["step_duration"])
    trace = extraction.execute_plan(state, plan, p["substeps"])
    certs = trace.extras["certificates"]
    rows = []
    for k, (smp, cert) in enumerate(zip(trace, certs)):
        rows.append((k, smp.t, smp.energy, smp.power, smp.purity, min(cert.ppt.values())))
    final = np.real(np.diag(trace.final_state.matrix))
    target = plan.apply(np.real(np.diag(state.matrix)))
    claims = {
        "steps": len(plan.steps),
        "swaps": len(plan.swaps),
        "extracted_work": -float(trace.energy[-1]),
        "final_population_error": float(np.max(np.abs(final - target))),
        "all_certified": all(np.allclose(c.reconstruct(), s.matrix, atol=1e-10) for c, s in zip(certs, trace.states)),
        "all_ppt": all(c.ppt_ok for c in certs),
    }
    return rows, claims


def _run_charge(cfg: ExperimentConfig, mapper):
    p = cfg.parameters
    spec = ergotropy.EnergySpectrum(p["levels"])
    points = [(n, kind) for n in p["n"] for kind in p["drivings"]]

    def point(pt):
        n, kind = pt
        prob = charging.ChargingProblem.ground_to_top(spec, n, p["E_max"])
        rep = charging.advantage(prob, charging.charging_schedule(prob, kind))
        return (n, kind, rep.time_actual, rep.gamma, rep.work, charging.average_power(rep.work, rep.time_actual))

    rows = list(mapper(point, points))
    claims = {"gamma": {f"{kind}_n{n}": g for n, kind, _, g, _, _ in rows}}
    return rows, claims


def _run_dicke(cfg: ExperimentConfig, mapper):
    p = cfg.parameters
    tmpl = dicke.DickeConfig(n=1, omega_c=p["omega_c"], omega_a=p["omega_a"], lambda_bar=p["lambda_bar"],
                             tau_c=p["tau_c"], rotating_wave=p["rotating_wave"])
    details = []
    ratios = dicke.dicke_power_ratio(p["n"], tmpl, p["grid"], mapper=mapper, details=details)
    rows = [(d.n, d.cutoff, d.tau, d.power, r) for d, (_, r) in zip(details, ratios)]
    ns, rs = [n for n, _ in ratios], [r for _, r in ratios]
    claims = {
        "ratios": rs,
        "non_decreasing": all(b >= a for a, b in zip(rs, rs[1:])),
        "exponent": dicke.fit_exponent(ns, rs) if len(ns) > 1 else math.nan,
    }
    return rows, claims


def _run_spinchain(cfg: ExperimentConfig, mapper):
    p = cfg.parameters
    tmpl = spinchain.ChainConfig(n=max(p["n"]), B=p["B"], omega=p["omega"], alpha=p["alpha"],
                                 profile=p["profiles"][0], g=p["g"])
    table = spinchain.scaling_study(p["profiles"], p["n"], tmpl, p["enforce_weak"], p["samples"], mapper=mapper)
    rows = [(prof, n, g, table.fits[prof].fit_class) for prof, n, g in table.rows]
    claims = {prof: {"fit_class": f.fit_class, "gamma_const": f.gamma_const, "r2_linear": f.r2_linear,
                     "r2_log": f.r2_log, "spread": f.spread, "bound_ok": f.bound_ok,
                     "gammas": table.gammas(prof)[1]}
              for prof, f in table.fits.items()}
    return rows, claims


RUNNERS = {
    "ergotropy": _run_ergotropy,
    "activation": _run_activation,
    "extract": _run_extract,
    "charge": _run_charge,
    "dicke": _run_dicke,
    "spinchain": _run_spinchain,
}


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1) -> dict:
    """Run ``cfg`` and write ``<experiment>.csv`` and ``summary.json`` into ``out_dir``."""
    with _mapper(threads) as mapper:
        rows, claims = RUNNERS[cfg.experiment](cfg, mapper)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{cfg.experiment}.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(HEADERS[cfg.experiment], rows))
    summary = {
        "experiment": cfg.experiment,
        "claims": claims,
        "provenance": {
            "version": package_version(),
            "seed": cfg.seed,
            "config": {"general": {"experiment": cfg.experiment, "seed": str(cfg.seed)},
                       cfg.experiment: dict(sorted(cfg.raw.items()))},
            "parameters": {k: v for k, v in sorted(cfg.parameters.items())},
        },
    }
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbattery", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {package_version()}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, type=Path, help="config file")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--validate-only", action="store_true", help="check the config and exit")
        sp.add_argument("--threads", type=int, default=1, help="parallel sweep workers")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, args.experiment)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.validate_only:
        print(f"{args.config}: ok")
        return 0
    out = args.out or (Path(cfg.output_path) if cfg.output_path else None)
    if out is None:
        print("config error: no output directory (use --out)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run_experiment(cfg, out, args.threads)
    except dicke.CutoffConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    print(f"wrote {out / (cfg.experiment + '.csv')} and {out / 'summary.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
