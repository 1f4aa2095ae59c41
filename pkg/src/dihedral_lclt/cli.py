"""Command-line experiment runner.

Every output starts with a header echoing the configuration and the library
version (``#`` lines for CSV, a ``meta`` object for JSON) and contains no
timestamps, so identical configurations give byte-identical files.

Parameters come from the command line or from ``--config FILE`` (a JSON
object whose keys are the long option names with dashes replaced by
underscores); unknown keys are rejected.  ``DIHEDRAL_LCLT_THREADS`` caps
the BLAS thread pools when set before start-up.
"""

from __future__ import annotations

import os

_threads = os.environ.get("DIHEDRAL_LCLT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dual import TorusGrid, fourier, parseval_check, plancherel_inverse, uncorrected_plancherel_weight
from .fixtures import DISTRIBUTIONS, MODELS, FixtureNotFound, load_distribution, load_model
from .gibbs_markov import MarkovGibbsModel, gm_gaussian_limit, gm_nstep_prob, spectral_curve, validate_model
from .group import GroupDistribution, GroupElement, delta, identity
from .recurrence import return_fraction
from .renewal import first_return_pmf, transience_certificate
from .rw import deviation_table

EXIT_SCHEMA = 2
EXIT_VALIDATION = 3


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        # the output path is not part of the experiment
        return {"command": self.command, **{k: self.params[k] for k in sorted(self.params) if k != "out"}}


# option name -> (type, default, help); None default means required unless noted
SCHEMAS: dict[str, dict[str, tuple]] = {
    "dual-selftest": {
        "dim": (int, 1, "dimension d"),
        "K": (int, 0, "nodes per coordinate (0: smallest exact grid)"),
        "out": (str, "-", "output path"),
    },
    "rw-lclt": {
        "dist": (str, "NU1", "distribution JSON file or fixture name"),
        "n": (int, None, "number of steps"),
        "radius": (int, -1, "sup-norm radius (-1: 2 sqrt n)"),
        "out": (str, "-", "output path"),
    },
    "gm-lclt": {
        "model": (str, "GM-MARKOV", "model JSON file or fixture name"),
        "n": (int, None, "number of steps"),
        "target": (str, "e", "group element: 'e' or 'FLIP:r1,r2,...'"),
        "out": (str, "-", "output path"),
    },
    "return-tail": {
        "model": (str, "GM-BERN", "model JSON file or fixture name"),
        "nmax": (int, None, "largest return time"),
        "out": (str, "-", "output path"),
    },
    "recurrence": {
        "dist": (str, "NU1", "distribution JSON file or fixture name"),
        "trials": (int, None, "number of sampled paths"),
        "horizons": (str, "100,1000,10000", "comma-separated horizons"),
        "seed": (int, None, "master seed (required)"),
        "out": (str, "-", "output path"),
    },
    "validate-model": {
        "model": (str, None, "model JSON file or fixture name"),
        "out": (str, "-", "output path"),
    },
}


def _load_dist(name: str) -> GroupDistribution:
    if name in DISTRIBUTIONS:
        return load_distribution(name)
    path = Path(name)
    if not path.exists():
        raise FixtureNotFound(name)
    return GroupDistribution.load(path)


def _load_model(name: str) -> MarkovGibbsModel:
    if name in MODELS:
        return load_model(name)
    path = Path(name)
    if not path.exists():
        raise FixtureNotFound(name)
    return MarkovGibbsModel.load(path)


def parse_target(text: str, d: int) -> GroupElement:
    text = text.strip()
    if text == "e":
        return identity(d)
    flip, _, trans = text.partition(":")
    vals = tuple(int(x) for x in trans.split(",")) if trans else (0,) * d
    if len(vals) != d:
        raise SchemaError(f"target {text!r} does not have dimension {d}")
    return GroupElement(int(flip), vals)


def _header(cfg: ExperimentConfig) -> list[str]:
    return [f"# dihedral_lclt {__version__}", f"# config {json.dumps(cfg.to_json_obj(), sort_keys=True)}"]


def _csv(cfg: ExperimentConfig, columns: list[str], rows, extra: list[str] = ()) -> str:
    buf = io.StringIO()
    for line in _header(cfg) + [f"# {e}" for e in extra]:
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json(cfg: ExperimentConfig, body: dict) -> str:
    doc = {"meta": {"version": __version__, "config": cfg.to_json_obj()}, **body}
    return json.dumps(doc, sort_keys=True, indent=1, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return str(x)


# -- commands ---------------------------------------------------------------------

def cmd_dual_selftest(cfg: ExperimentConfig):
    d = cfg.params["dim"]
    K = cfg.params["K"] or 5
    grid = TorusGrid(K, d)
    e = identity(d)
    nodes = grid.nodes()
    F = fourier(delta(e), nodes)
    corrected = plancherel_inverse(F, e, grid)
    uncorrected = plancherel_inverse(F, e, grid, weight=uncorrected_plancherel_weight(d))
    g = GroupElement(-1, (1,) + (0,) * (d - 1))
    f = {e: 0.5, g: 0.25 - 0.5j, GroupElement(1, (-1,) * d): 1.0}
    lhs, rhs, gap = parseval_check(f, TorusGrid(max(K, 5), d))
    _, rhs_u, gap_u = parseval_check(f, TorusGrid(max(K, 5), d), weight=uncorrected_plancherel_weight(d))
    body = {
        "delta_e_inversion": {"corrected": corrected, "uncorrected": uncorrected},
        "parseval": {"lhs": lhs, "rhs": rhs, "gap": gap, "rhs_uncorrected": rhs_u, "gap_uncorrected": gap_u},
        "gap": max(abs(corrected - 1.0), gap),
        "passed": abs(corrected - 1.0) < 1e-12 and gap < 1e-12,
    }
    return _json(cfg, body), 0


def cmd_rw_lclt(cfg: ExperimentConfig):
    nu = _load_dist(cfg.params["dist"])
    n = cfg.params["n"]
    radius = cfg.params["radius"]
    if radius < 0:
        radius = int(math.floor(2 * math.sqrt(n)))
    tab = deviation_table(nu, n, radius)
    s = tab.scale
    rows = []
    it = np.ndindex(*tab.p_plus.shape)
    for idx in it:
        r = tuple(i - radius for i in idx)
        for flip, p in ((1, tab.p_plus[idx]), (-1, tab.p_minus[idx])):
            rows.append((flip, ";".join(map(str, r)), p, s * p, tab.phi[idx], abs(s * p - tab.phi[idx]), tab.phi_reflected[idx]))
    extra = [f"n={n} radius={radius} max_gap={tab.sup_gap!r} max_gap_reflected={tab.sup_gap_reflected!r}"]
    cols = ["flip", "r", "p", "scaled", "phi", "gap", "phi_reflected"]
    return _csv(cfg, cols, rows, extra), 0


def _validated(m: MarkovGibbsModel):
    rep = validate_model(m)
    if not rep.ok:
        sys.stderr.write(json.dumps(rep.to_json_obj(), indent=1) + "\n")
        return None
    return rep


def cmd_gm_lclt(cfg: ExperimentConfig):
    m = _load_model(cfg.params["model"])
    if _validated(m) is None:
        return "", EXIT_VALIDATION
    n = cfg.params["n"]
    g = parse_target(cfg.params["target"], m.d)
    curve = spectral_curve(m)
    p = gm_nstep_prob(m, n, g)
    scale = n ** (m.d / 2)
    phi = gm_gaussian_limit(curve, np.array(g.trans, dtype=float) / math.sqrt(n)) if n > 0 else float("nan")
    rows = [(n, repr(g).replace(" ", ""), p, scale * p, phi, abs(scale * p - phi))]
    extra = [f"sigma1_sq={curve.sigma1_sq.tolist()}"]
    return _csv(cfg, ["n", "target", "p", "scaled", "phi", "gap"], rows, extra), 0


def cmd_return_tail(cfg: ExperimentConfig):
    m = _load_model(cfg.params["model"])
    if _validated(m) is None:
        return "", EXIT_VALIDATION
    nmax = cfg.params["nmax"]
    law = first_return_pmf(m, nmax, exact=False, with_u=False)
    rows = []
    partial = 0.0
    for n in range(1, nmax + 1):
        f = float(law.f[n])
        partial += f
        tail = float(law.tail[n])
        if m.d == 1:
            stat = tail * math.sqrt(n)
        elif m.d == 2:
            stat = tail * math.log(n) if n > 1 else float("nan")
        else:
            stat = partial
        rows.append((n, f, tail, stat))
    col = {1: "tail_sqrt_n", 2: "tail_log_n"}.get(m.d, "partial_sum")
    extra = []
    if m.d >= 3:
        try:
            cert = transience_certificate(m, nmax, law=law)
            extra.append(f"certified_bound={cert.total!r} certified={cert.certified}")
        except (ValueError, ArithmeticError) as exc:
            extra.append(f"certificate unavailable: {exc}")
    return _csv(cfg, ["n", "f", "tail", col], rows, extra), 0


def cmd_recurrence(cfg: ExperimentConfig):
    nu = _load_dist(cfg.params["dist"])
    try:
        horizons = [int(h) for h in cfg.params["horizons"].split(",") if h.strip()]
    except ValueError as exc:
        raise SchemaError(f"bad horizons: {exc}") from exc
    rep = return_fraction(nu, horizons, cfg.params["trials"], cfg.params["seed"])
    return _json(cfg, {"return_fraction": rep.to_json_obj(), "nondecreasing": rep.nondecreasing}), 0


def cmd_validate_model(cfg: ExperimentConfig):
    m = _load_model(cfg.params["model"])
    rep = validate_model(m)
    out = _json(cfg, rep.to_json_obj())
    if not rep.ok:
        sys.stderr.write(json.dumps(rep.to_json_obj(), indent=1) + "\n")
        return out, EXIT_VALIDATION
    return out, 0


COMMANDS = {
    "dual-selftest": cmd_dual_selftest,
    "rw-lclt": cmd_rw_lclt,
    "gm-lclt": cmd_gm_lclt,
    "return-tail": cmd_return_tail,
    "recurrence": cmd_recurrence,
    "validate-model": cmd_validate_model,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dihedral-lclt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with parameters")
        for key, (typ, default, help_) in schema.items():
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ, default=None, help=help_)
    return parser


def make_config(ns: argparse.Namespace) -> ExperimentConfig:
    """Merge --config file and command-line values, apply defaults and enforce the schema."""
    schema = SCHEMAS[ns.command]
    params: dict = {}
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read config: {exc}") from exc
        if not isinstance(data, dict):
            raise SchemaError("config must be a JSON object")
        unknown = sorted(set(data) - set(schema))
        if unknown:
            raise SchemaError(f"unknown config keys: {unknown}")
        for key, val in data.items():
            typ = schema[key][0]
            if typ is int and (isinstance(val, bool) or not isinstance(val, int)):
                raise SchemaError(f"{key} must be an integer")
            if typ is str and not isinstance(val, str):
                raise SchemaError(f"{key} must be a string")
            params[key] = val
    for key, (_, default, _) in schema.items():
        cli_val = getattr(ns, key)
        if cli_val is not None:
            params[key] = cli_val
        elif key not in params:
            if default is None:
                raise SchemaError(f"--{key} is required")
            params[key] = default
    return ExperimentConfig(ns.command, params)


def run(cfg: ExperimentConfig) -> int:
    text, status = COMMANDS[cfg.command](cfg)
    if text:
        out = cfg.params.get("out", "-")
        if out == "-":
            sys.stdout.write(text)
        else:
            Path(out).write_text(text)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = make_config(ns)
        return run(cfg)
    except SchemaError as exc:
        sys.stderr.write(f"schema error: {exc}\n")
        return EXIT_SCHEMA
    except FixtureNotFound as exc:
        sys.stderr.write(f"not found: {exc}\n")
        return EXIT_SCHEMA
    except (ValueError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
