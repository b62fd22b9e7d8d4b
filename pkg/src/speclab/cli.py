"""Command-line driver.

Each subcommand reads one flat JSON configuration (``--config PATH``, or
``--config -`` for standard input; omitted means all defaults), writes its
data files into the output directory and finishes with ``manifest.json``
holding the config echo, seeds, timestamps and SHA-256 digests of every
file.  Data files contain no timestamps, so identical configs reproduce
them byte for byte.  The exit code is 0 iff every check the command runs
passed; 2 signals an invalid configuration.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import anderson as asp
from . import io, models, stats
from .errors import ConfigError, InsufficientData
from .instability import HALF_LIST_RULE, projection_norms_gram
from .linalg_core import eigendecompose

OUT_ENV = "SPECLAB_OUT"
NO_DEFAULT = object()


@dataclass(frozen=True)
class Field:
    type: str
    default: object = NO_DEFAULT
    choices: tuple = ()


def _coerce(key, field, value):
    t = field.type
    if t == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if t == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(key, "must be finite")
        return float(value)
    if t == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true/false, got {value!r}")
        return value
    if t == "str":
        if not isinstance(value, str) or (field.choices and value not in field.choices):
            raise ConfigError(key, f"expected one of {list(field.choices)}, got {value!r}")
        return value
    if t in ("floats", "ints"):
        if not isinstance(value, list) or not value:
            raise ConfigError(key, f"expected a non-empty list, got {value!r}")
        item = Field(t[:-1])
        return [_coerce(f"{key}[{i}]", item, v) for i, v in enumerate(value)]
    raise AssertionError(t)


ENSEMBLE_FIELDS = {
    "N": Field("int", 10),
    "M": Field("int", 1000),
    "seed": Field("int", 0),
    "sub_hi": Field("float", 1.0),
    "diag_hi": Field("float", 2.0),
    "super_hi": Field("float", 3.0),
    "threads": Field("int", 1),
}

ANDERSON_FIELDS = {
    "g": Field("float", math.log(2)),
    "N": Field("int", 40),
    "bc": Field("str", models.PERIODIC, (models.DIRICHLET, models.PERIODIC)),
    "potential": Field("str", "uniform", ("uniform", "two_point")),
    "B": Field("float", 1.0),
    "alpha": Field("float", 0.0),
    "beta": Field("float", 0.0),
    "p_alpha": Field("float", 1.0),
    "seed": Field("int", 0),
    "threads": Field("int", 1),
}

GRID_FIELDS = {
    "grid_re_min": Field("float", -4.0),
    "grid_re_max": Field("float", 4.0),
    "grid_im_min": Field("float", -3.0),
    "grid_im_max": Field("float", 3.0),
    "grid_nx": Field("int", 0),
    "grid_ny": Field("int", 0),
}

SCHEMAS = {
    "ensemble-stats": {
        **ENSEMBLE_FIELDS,
        "percentiles": Field("floats", [50.0, 95.0]),
        "samples_csv": Field("bool", False),
    },
    "covariance": {**ENSEMBLE_FIELDS, "centered": Field("bool", False)},
    "verify-closed-forms": {
        "a_values": Field("floats", [1.5, 2.0]),
        "N_values": Field("ints", [4, 8, 16]),
        "s_values": Field("ints", [2, 5, 10, 20]),
        "x": Field("float", 1.0),
        "y": Field("float", 2.0),
        "circulant_rtol": Field("float", 1e-8),
        "bs_rtol": Field("float", 1e-6),
        "perturb": Field("float", 0.0),
    },
    "anderson": {**ANDERSON_FIELDS, **GRID_FIELDS, "realness_tol": Field("float", 1e-6)},
    "pseudospectrum": {
        "matrix": Field("str", "anderson_1d", ("anderson_1d", "tridiagonal", "bs", "weighted_circulant")),
        **ANDERSON_FIELDS,
        **{k: v for k, v in GRID_FIELDS.items() if not k.endswith(("nx", "ny"))},
        "grid_nx": Field("int", 101),
        "grid_ny": Field("int", 101),
        "sample_index": Field("int", 0),
        "s": Field("int", 20),
        "x": Field("float", 1.0),
        "y": Field("float", 2.0),
        "a": Field("float", 2.0),
    },
}


def parse_config(command, raw):
    """Validate a raw mapping against the command's schema and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    schema = SCHEMAS[command]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(unknown[0], f"unknown key for {command}")
    cfg = {}
    for key, field in schema.items():
        if key in raw:
            cfg[key] = _coerce(key, field, raw[key])
        elif field.default is NO_DEFAULT:
            raise ConfigError(key, "missing required key")
        else:
            cfg[key] = list(field.default) if isinstance(field.default, list) else field.default
    if "threads" in cfg and cfg["threads"] < 1:
        raise ConfigError("threads", "must be >= 1")
    if "seed" in cfg and not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    return cfg


def load_config(path):
    if path is None:
        return {}
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _ensemble_spec(cfg):
    try:
        return models.EnsembleSpec(
            cfg["N"], cfg["M"], cfg["seed"], cfg["sub_hi"], cfg["diag_hi"], cfg["super_hi"]
        )
    except ValueError as exc:
        key = str(exc).split()[0]
        raise ConfigError(key, str(exc)) from exc


def _anderson_params(cfg):
    try:
        law = models.PotentialLaw(
            cfg["potential"], B=cfg["B"], alpha=cfg["alpha"], beta=cfg["beta"], p_alpha=cfg["p_alpha"]
        )
        return models.AndersonParams(cfg["g"], cfg["N"], law, cfg["bc"], cfg["seed"])
    except ValueError as exc:
        key = str(exc).split()[0]
        raise ConfigError(key, str(exc)) from exc


def _write_grid(man, out, grid, stem="pseudospectrum"):
    csv_path = io.write_csv(os.path.join(out, f"{stem}.csv"), ["re", "im", "sigma_min"], grid.rows())
    man.add_file(csv_path)
    man.add_file(io.write_json(os.path.join(out, f"{stem}.json"), grid.header()))


# --- subcommands ----------------------------------------------------------------

def cmd_ensemble_stats(cfg, out):
    spec = _ensemble_spec(cfg)
    conventions = {"percentile": stats.PERCENTILE_RULE, "half_list": HALF_LIST_RULE,
                   "two_run_seeds": stats.TWO_RUN_SEEDS}
    seeds = [spec.seed, spec.seed ^ 1]
    with io.Manifest(out, "ensemble-stats", cfg, seeds, conventions) as man:
        report, (rec1, _) = stats.build_report(spec, cfg["percentiles"], cfg["threads"])
        man.data["wall_time_seconds"] = report.wall_time
        man.data["exclusions"] = report.excluded
        man.add_file(io.write_json(os.path.join(out, "report.json"), report.to_dict()))
        if cfg["samples_csv"]:
            header = ["sample_index", "excluded", "instability_index", "half_list_index"]
            header += [f"X{n}" for n in range(1, spec.N + 1)]
            rows = (
                [r.sample_index, r.excluded or "", r.instability_index, r.half_list_index]
                + [io.fmt(x) for x in r.sorted_log_norms]
                for r in rec1
            )
            man.add_file(io.write_csv(os.path.join(out, "samples.csv"), header, rows))
    return 0


def cmd_covariance(cfg, out):
    spec = _ensemble_spec(cfg)
    with io.Manifest(out, "covariance", cfg, [spec.seed],
                     {"covariance": "centered" if cfg["centered"] else "uncentered E[X_m X_n]"}) as man:
        records = stats.run_ensemble(spec, cfg["threads"])
        man.data["exclusions"] = stats.exclusion_counts(records)
        lam, v = stats.covariance_spectrum(records, centered=cfg["centered"])
        mu = stats.spectral_ratio(lam)
        result = {
            "N": spec.N,
            "usable_samples": len(stats.usable(records)),
            "centered": cfg["centered"],
            "eigenvalues_ascending": [float(x) for x in lam],
            "mu": mu,
            "leading_vector": [float(x) for x in v],
            "leading_vector_correlation": stats.leading_vector_shape(v),
        }
        man.add_file(io.write_json(os.path.join(out, "covariance.json"), result))
        man.add_file(io.write_csv(os.path.join(out, "covariance_eigenvalues.csv"),
                                  ["index", "eigenvalue"], ([i + 1, x] for i, x in enumerate(lam))))
        ok = 0 <= mu <= 1
        man.data["checks"] = {"mu_in_unit_interval": ok}
    return 0 if ok else 1


def closed_form_cases(cfg):
    """Numerical vs closed-form projection norms for both exact families."""
    cases = []
    for a in cfg["a_values"]:
        for N in cfg["N_values"]:
            A = models.weighted_circulant(N, a).astype(complex)
            A[1 % N, 0] += cfg["perturb"]
            c = models.weighted_circulant_index(N, a)
            norms = projection_norms_gram(eigendecompose(A)).norms
            err = float(np.abs(norms / c - 1).max())
            cases.append({"family": "weighted_circulant", "a": a, "N": N, "closed": c,
                          "numeric_max": float(norms.max()), "rel_error": err,
                          "pass": err <= cfg["circulant_rtol"]})
    x, y = cfg["x"], cfg["y"]
    maxima = []
    for s in cfg["s_values"]:
        A = models.build_Bs(s, x, y)
        if s > 1:
            A[1, 0] += cfg["perturb"]
        es = eigendecompose(A)
        norms = projection_norms_gram(es).norms
        # eigenvalues ascend; closed-form k = 1 is the largest, 2 sqrt(xy) cos(pi/(s+1))
        closed = np.array([models.bs_projection_norm_closed(s, x, y, k) for k in range(s, 0, -1)])
        err = float(np.abs(norms / closed - 1).max())
        maxima.append(float(norms.max()))
        cases.append({"family": "Bs", "s": s, "x": x, "y": y, "closed_max": float(closed.max()),
                      "numeric_max": maxima[-1], "rel_error": err, "pass": err <= cfg["bs_rtol"]})
    monotone = all(b > a for a, b in zip(maxima, maxima[1:]))
    return cases, monotone


def cmd_verify_closed_forms(cfg, out):
    with io.Manifest(out, "verify-closed-forms", cfg) as man:
        cases, monotone = closed_form_cases(cfg)
        ok = monotone and all(c["pass"] for c in cases)
        report = {"cases": cases, "bs_max_norm_increasing": monotone, "all_pass": ok}
        man.add_file(io.write_json(os.path.join(out, "closed_forms.json"), report))
        header = ["family", "param", "rel_error", "pass"]
        rows = ([c["family"], f"a={c['a']},N={c['N']}" if "a" in c else f"s={c['s']}",
                 c["rel_error"], int(c["pass"])] for c in cases)
        man.add_file(io.write_csv(os.path.join(out, "closed_forms.csv"), header, rows))
        man.data["checks"] = {"all_pass": ok}
    for c in cases:
        label = f"a={c['a']} N={c['N']}" if "a" in c else f"s={c['s']}"
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['family']:<18} {label:<12} rel_error={c['rel_error']:.3e}")
    print(f"{'PASS' if monotone else 'FAIL'} Bs max norm strictly increasing in s")
    return 0 if ok else 1


def anderson_analysis(params, realness_tol=1e-6):
    """Eigenvalues of one 1D truncation plus inclusion and realness checks."""
    H = models.anderson_1d(params)
    w = np.linalg.eigvals(H)
    w = w[np.lexsort((w.imag, w.real))]
    inc = asp.inclusion_report(w, params.g, params.potential)
    result = {
        "size": params.size,
        "bc": params.bc,
        "hull_support": list(params.potential.support),
        "tube_m": params.potential.max_abs,
        **inc.summary(),
    }
    failed = inc.hull_violations > 0
    if params.bc == models.PERIODIC:
        failed |= inc.tube_violations > 0 or inc.hole_violations > 0
    else:
        # the tube and hole bounds concern the infinite-volume operator;
        # Dirichlet truncations are similar to symmetric ones and violate them
        result["finite_volume_discrepancy"] = {
            "tube_violations": inc.tube_violations,
            "hole_violations": inc.hole_violations,
        }
        diag = asp.dirichlet_realness(H, params.g, tol=realness_tol)
        result["realness"] = {
            "raw_max_abs_imag": diag.max_abs_imag,
            "raw_real_within_tol": diag.raw_real,
            "max_deviation_from_symmetrized": diag.max_deviation,
            "symmetrized_real": True,
        }
    result["pass"] = not failed
    return H, w, result


def cmd_anderson(cfg, out):
    params = _anderson_params(cfg)
    with io.Manifest(out, "anderson", cfg, [params.seed]) as man:
        H, w, result = anderson_analysis(params, cfg["realness_tol"])
        man.add_file(io.write_csv(os.path.join(out, "eigenvalues.csv"), ["index", "re", "im"],
                                  ([i, z.real, z.imag] for i, z in enumerate(w))))
        if params.bc == models.DIRICHLET:
            sym = np.linalg.eigvalsh(asp.dirichlet_symmetrized(H, params.g))
            man.add_file(io.write_csv(os.path.join(out, "symmetrized_eigenvalues.csv"),
                                      ["index", "eigenvalue"], ([i, x] for i, x in enumerate(sym))))
        if cfg["grid_nx"] or cfg["grid_ny"]:
            grid = _grid(H, cfg)
            _write_grid(man, out, grid)
        man.add_file(io.write_json(os.path.join(out, "inclusion.json"), result))
        man.data["checks"] = {"pass": result["pass"]}
    return 0 if result["pass"] else 1


def _grid(A, cfg):
    rect = (cfg["grid_re_min"], cfg["grid_re_max"], cfg["grid_im_min"], cfg["grid_im_max"])
    try:
        return asp.pseudospectrum_grid(A, rect, (cfg["grid_nx"], cfg["grid_ny"]), cfg["threads"])
    except ValueError as exc:
        raise ConfigError("grid_nx", str(exc)) from exc


def cmd_pseudospectrum(cfg, out):
    kind = cfg["matrix"]
    if kind == "anderson_1d":
        A = models.anderson_1d(_anderson_params(cfg))
    elif kind == "tridiagonal":
        spec = models.EnsembleSpec(cfg["N"], cfg["sample_index"] + 1, cfg["seed"])
        A = models.sample_tridiagonal(spec, cfg["sample_index"])
    elif kind == "bs":
        A = models.build_Bs(cfg["s"], cfg["x"], cfg["y"])
    else:
        A = models.weighted_circulant(cfg["N"], cfg["a"])
    with io.Manifest(out, "pseudospectrum", cfg, [cfg["seed"]],
                     {"grid_axis_order": asp.GRID_AXIS_ORDER}) as man:
        man.add_file(io.write_matrix_csv(os.path.join(out, "matrix.csv"), A))
        _write_grid(man, out, _grid(A, cfg))
    return 0


COMMANDS = {
    "ensemble-stats": cmd_ensemble_stats,
    "covariance": cmd_covariance,
    "verify-closed-forms": cmd_verify_closed_forms,
    "anderson": cmd_anderson,
    "pseudospectrum": cmd_pseudospectrum,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="speclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config file, '-' for stdin")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV}/<command>)")
        p.add_argument("--threads", type=int, help="worker threads")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        schema = SCHEMAS[args.command]
        if isinstance(raw, dict):
            for key in ("seed", "threads"):
                value = getattr(args, key)
                if value is None:
                    continue
                if key not in schema:
                    raise ConfigError(key, f"not used by {args.command}")
                raw[key] = value
        cfg = parse_config(args.command, raw)
        out = args.out or os.path.join(os.environ.get(OUT_ENV, "speclab_out"), args.command)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, InsufficientData) as exc:
        print(f"speclab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
