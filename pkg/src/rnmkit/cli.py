"""Command-line front end.

Commands operate on a potential described in a small TOML file and write
their results as CSV/JSON artifacts that embed the fully resolved run
configuration, so every artifact can be regenerated from its own header.

Exit codes: 0 when everything passed its tolerance, 1 when a numerical
check failed, 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import asdict, dataclass, field

try:
    import tomllib as _toml
except ModuleNotFoundError:  # python < 3.11
    import tomli as _toml

import numpy as np

from .errors import ConfigError, DegenerateSingularityError, RnmError
from .experiments import (
    asymptotic_ratio_table,
    field_grid,
    limit_kernel,
    scale_convergence,
    universality_sweep,
)
from .potential import Potential, canonical_decompose, mesoscopic_scale
from .sampler import GibbsEnsemble, RadialBump, empirical_density, mcmc_run, ward_identity_mc
from .ward import QuadSpec, ward_residual

__all__ = ["RunConfig", "main", "parse_complex", "config_to_toml", "config_from_toml"]

EXIT_PASS = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2

_FIGURE_TABLE = [[2, 2, 1.0, 0.0], [3, 1, -0.25, 0.0], [1, 3, -0.25, 0.0]]
_QUARTIC_RADIAL = [0.0, 1.0]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Fully resolved run description; embedded into every artifact."""

    command: str
    potential: dict
    params: dict = field(default_factory=dict)
    out: str = "."
    seed: int = 0
    threads: int = 1


_TOP_KEYS = {"command", "out", "seed", "threads", "potential", "params"}
_POTENTIAL_KEYS = {"name", "radial", "table", "remainder"}
_PARAM_KEYS = {
    "decompose": {"n_list"},
    "grid": {"kind", "extent", "points", "n", "root", "series_order", "format"},
    "ward": {"points", "tol", "fd_step", "series_order"},
    "sweep": {"kind", "n_list", "radii", "extent", "points", "series_order"},
    "sample": {"n", "sweeps", "burn_in", "chains", "thin", "grid", "dump",
               "psi_radius", "psi_center"},
}


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError("non-finite numbers have no place in a config")
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)  # TOML basic strings share JSON's escapes
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {type(v).__name__} into a config")


def config_to_toml(cfg: RunConfig) -> str:
    lines = [f"command = {_toml_value(cfg.command)}",
             f"out = {_toml_value(cfg.out)}",
             f"seed = {_toml_value(cfg.seed)}",
             f"threads = {_toml_value(cfg.threads)}",
             "", "[potential]"]
    for k in sorted(cfg.potential):
        lines.append(f"{k} = {_toml_value(cfg.potential[k])}")
    lines.append("")
    lines.append("[params]")
    for k in sorted(cfg.params):
        lines.append(f"{k} = {_toml_value(cfg.params[k])}")
    return "\n".join(lines) + "\n"


def config_from_toml(text: str) -> RunConfig:
    data = _toml.loads(text)
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for req in ("command", "potential"):
        if req not in data:
            raise ConfigError(f"config is missing {req!r}")
    command = data["command"]
    if command not in _PARAM_KEYS:
        raise ConfigError(f"unknown command {command!r}")
    pot = data["potential"]
    bad = set(pot) - _POTENTIAL_KEYS
    if bad:
        raise ConfigError(f"unknown potential keys: {sorted(bad)}")
    bad = set(data.get("params", {})) - _PARAM_KEYS[command]
    if bad:
        raise ConfigError(f"unknown {command} parameters: {sorted(bad)}")
    return RunConfig(
        command=data["command"],
        potential=pot,
        params=data.get("params", {}),
        out=data.get("out", "."),
        seed=data.get("seed", 0),
        threads=data.get("threads", 1),
    )


def _potential_from_spec(spec: dict) -> Potential:
    bad = set(spec) - _POTENTIAL_KEYS
    if bad:
        raise ConfigError(f"unknown potential keys: {sorted(bad)}")
    name = spec.get("name", "config")
    remainder = []
    for pos, item in enumerate(spec.get("remainder", [])):
        if len(item) != 2:
            raise ConfigError(f"remainder entry #{pos} must be [coeff, power], got {item!r}")
        remainder.append((float(item[0]), float(item[1])))
    has_radial = "radial" in spec
    has_table = "table" in spec
    if has_radial == has_table:
        raise ConfigError("potential needs exactly one of 'radial' or 'table'")
    if has_radial:
        coeffs = [float(c) for c in spec["radial"]]
        return Potential.from_radial_coeffs(coeffs, remainder=tuple(remainder), name=name)
    entries = []
    for pos, item in enumerate(spec["table"]):
        if len(item) not in (3, 4):
            raise ConfigError(
                f"table entry #{pos} must be [i, j, re] or [i, j, re, im], got {item!r}")
        i, j = int(item[0]), int(item[1])
        v = float(item[2]) + 1j * (float(item[3]) if len(item) == 4 else 0.0)
        entries.append((i, j, v))
    return Potential.from_table(entries, remainder=tuple(remainder), name=name)


def _load_potential(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"potential file not found: {path}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    if "potential" not in data:
        raise ConfigError(f"{path} has no [potential] table")
    return data["potential"]


def parse_complex(text: str) -> complex:
    """Parse '1', '-0.5+0.5i', 'i', '1+i' (mathematical i allowed)."""
    s = text.strip().replace(" ", "").replace("i", "j")
    s = re.sub(r"(?<![0-9.)])j", "1j", s)  # bare j means 1j
    try:
        return complex(s)
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def _parse_list(text: str, conv):
    return [conv(tok) for tok in text.split(",") if tok.strip()]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"Object of type {type(o).__name__} is not JSON serializable")


def _emit_json(cfg: RunConfig, name: str, payload: dict) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, name)
    payload = {"config": asdict(cfg), **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def cmd_decompose(cfg: RunConfig) -> int:
    p = _potential_from_spec(cfg.potential)
    try:
        dec = canonical_decompose(p)
    except DegenerateSingularityError as exc:
        print(f"degenerate singularity: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if dec.regular:
        print("regular point (k=1)")
    else:
        print(f"singular point of type {dec.sing_type} (k={dec.k})")
    print(f"tau0 = {dec.tau0!r}")
    n_list = cfg.params.get("n_list", [10, 100, 1000])
    rows = []
    for n in n_list:
        r_n = mesoscopic_scale(p, int(n))
        rows.append({"n": int(n), "r_n": r_n})
        print(f"r_{n} = {r_n!r}")
    _emit_json(cfg, "decompose.json",
               {"k": dec.k, "tau0": dec.tau0, "regular": dec.regular,
                "type": dec.sing_type, "r_n": rows})
    return EXIT_PASS


def cmd_grid(cfg: RunConfig) -> int:
    params = cfg.params
    kind = params["kind"]
    if kind == "figure1":
        spec = dict(cfg.potential) or {"name": "level-curve-weight", "table": _FIGURE_TABLE}
        quantity = "R0"
    elif kind == "figure2":
        spec = dict(cfg.potential) or {"name": "quartic", "radial": _QUARTIC_RADIAL}
        quantity = "berezin"
    else:
        spec = dict(cfg.potential)
        quantity = kind
        if not spec:
            raise ConfigError(f"grid {kind!r} needs --potential")
    p = _potential_from_spec(spec)
    fg = field_grid(
        quantity,
        p,
        extent=params.get("extent", 2.0),
        points=params.get("points", 41),
        n=params.get("n"),
        root=parse_complex(params.get("root", "0")),
        series_order=params.get("series_order", 256),
        threads=cfg.threads,
    )
    fg.meta["config"] = asdict(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    base = os.path.join(cfg.out, f"grid-{kind}")
    fmt = params.get("format", "both")
    if fmt in ("csv", "both"):
        fg.to_csv(base + ".csv")
        print(f"wrote {base}.csv")
    if fmt in ("json", "both"):
        fg.to_json(base + ".json")
        print(f"wrote {base}.json")
    return EXIT_PASS


def cmd_ward(cfg: RunConfig) -> int:
    p = _potential_from_spec(cfg.potential)
    dec = canonical_decompose(p)
    kern = limit_kernel(dec, N=cfg.params.get("series_order", 256))
    tol = cfg.params.get("tol", 5e-3)
    spec = QuadSpec(fd_step=cfg.params.get("fd_step", 1e-3))
    rows = []
    worst = 0.0
    for token in cfg.params["points"]:
        z = parse_complex(token)
        res = float(ward_residual(kern, dec, z, spec))
        worst = max(worst, res)
        rows.append({"point": token, "residual": res, "tolerance": tol,
                     "passed": res < tol, "oracle": "cross-quadrature"})
        print(f"ward residual at {token}: {res:.3e} (tol {tol:g})")
    _emit_json(cfg, "ward.json", {"rows": rows, "passed": worst < tol})
    return EXIT_PASS if worst < tol else EXIT_TOLERANCE


def cmd_sweep(cfg: RunConfig) -> int:
    p = _potential_from_spec(cfg.potential)
    kind = cfg.params["kind"]
    if kind == "universality":
        report = universality_sweep(
            p,
            cfg.params.get("n_list", [16, 32, 64]),
            grid=(cfg.params.get("extent", 1.2), cfg.params.get("points", 21)),
            series_order=cfg.params.get("series_order", 256),
            threads=cfg.threads,
        )
    elif kind == "ratio":
        dec = canonical_decompose(p)
        kern = limit_kernel(dec, N=cfg.params.get("series_order", 768))
        report = asymptotic_ratio_table(kern, dec, cfg.params.get("radii", [2, 3, 4]))
    elif kind == "scale":
        report = scale_convergence(p, cfg.params.get("n_list", [16, 32, 64, 128]))
    else:
        raise ConfigError(f"unknown sweep kind {kind!r}")
    report.config["cli"] = asdict(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, f"sweep-{kind}.json")
    report.to_json(path)
    print(f"wrote {path}")
    for row in report.rows:
        print(f"  {row.parameter}: {row.value:.6g} [{('pass' if row.passed else 'FAIL')}]")
    return EXIT_PASS if report.passed else EXIT_TOLERANCE


def cmd_sample(cfg: RunConfig) -> int:
    p = _potential_from_spec(cfg.potential)
    params = cfg.params
    n = params.get("n", 32)
    ens = GibbsEnsemble(n=n, potential=p, seed=cfg.seed)
    samples = mcmc_run(
        ens,
        sweeps=params.get("sweeps", 20000),
        burn_in=params.get("burn_in", 2000),
        chains=params.get("chains", 1),
        thin=params.get("thin", 10),
    )
    audit_ok = bool(np.all(samples.audit_error <= 1e-8))
    r_n = mesoscopic_scale(p, n)
    lo, hi, bins = params.get("grid", [-8.0, 8.0, 33])
    density = empirical_density(samples, r_n, (float(lo), float(hi), int(bins)))
    os.makedirs(cfg.out, exist_ok=True)
    dump = params.get("dump", "npy")
    if dump == "npy":
        path = os.path.join(cfg.out, "samples.npy")
        np.save(path, samples.configs)
        print(f"wrote {path}")
    elif dump == "csv":
        path = os.path.join(cfg.out, "samples.csv")
        with open(path, "w") as fh:
            fh.write(f"# config = {asdict(cfg)!r}\n")
            fh.write("chain,sample,particle,re,im\n")
            for c in range(samples.chains):
                for s in range(samples.kept):
                    for i in range(n):
                        z = samples.configs[c, s, i]
                        fh.write(f"{c},{s},{i},{z.real!r},{z.imag!r}\n")
        print(f"wrote {path}")
    elif dump != "none":
        raise ConfigError(f"unknown dump format {dump!r}")
    psi = RadialBump(center=parse_complex(str(params.get("psi_center", "0"))),
                     radius=params.get("psi_radius", 1.5))
    mean, se = ward_identity_mc(ens, psi, samples)
    ward_ok = abs(mean) <= 3.0 * se
    _emit_json(cfg, "sample.json", {
        "acceptance": list(samples.acceptance),
        "sigma": list(samples.sigma),
        "audit_error": list(samples.audit_error),
        "audit_passed": audit_ok,
        "ward_mean": [mean.real, mean.imag],
        "ward_stderr": se,
        "ward_passed": bool(ward_ok),
        "density_center": density.value_at(0j + 1e-9),
        "r_n": r_n,
    })
    return EXIT_PASS if (audit_ok and ward_ok) else EXIT_TOLERANCE


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rnmkit",
        description="numerics for correlation kernels at bulk singularities",
    )
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="sampler seed")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: RNMKIT_THREADS or 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="singularity type, tau0, r_n table")
    d.add_argument("--potential", required=True)
    d.add_argument("--n", default="10,100,1000", help="comma list for the r_n table")

    g = sub.add_parser("grid", help="field grid (figure presets or a quantity name)")
    g.add_argument("kind", help="figure1, figure2, R0, Rn, berezin, ward-residual")
    g.add_argument("--potential")
    g.add_argument("--extent", type=float, default=2.0)
    g.add_argument("--points", type=int, default=41)
    g.add_argument("--n", type=int)
    g.add_argument("--root", default="0")
    g.add_argument("--order", type=int, default=256)
    g.add_argument("--format", choices=("csv", "json", "both"), default="both")

    w = sub.add_parser("ward", help="Ward-equation residuals at points")
    w.add_argument("--potential", required=True)
    w.add_argument("--points", required=True, help="comma list, e.g. 1,0.5+0.5i")
    w.add_argument("--tol", type=float, default=5e-3)
    w.add_argument("--fd-step", type=float, default=1e-3)
    w.add_argument("--order", type=int, default=256)

    s = sub.add_parser("sweep", help="convergence sweeps")
    s.add_argument("kind", choices=("universality", "ratio", "scale"))
    s.add_argument("--potential", required=True)
    s.add_argument("--n", default="16,32,64")
    s.add_argument("--radii", default="2,3,4")
    s.add_argument("--extent", type=float, default=1.2)
    s.add_argument("--points", type=int, default=21)
    s.add_argument("--order", type=int)

    m = sub.add_parser("sample", help="Metropolis sampling and MC checks")
    m.add_argument("--potential", required=True)
    m.add_argument("--n", type=int, default=32)
    m.add_argument("--sweeps", type=int, default=20000)
    m.add_argument("--burn-in", type=int, default=2000)
    m.add_argument("--chains", type=int, default=1)
    m.add_argument("--thin", type=int, default=10)
    m.add_argument("--grid", default="-8,8,33")
    m.add_argument("--dump", choices=("csv", "npy", "none"), default="npy")
    m.add_argument("--psi-radius", type=float, default=1.5)
    m.add_argument("--psi-center", default="0")
    return ap


def _resolve_config(args) -> RunConfig:
    threads = args.threads
    if threads is None:
        env = os.environ.get("RNMKIT_THREADS")
        threads = int(env) if env else 1
    potential = _load_potential(args.potential) if getattr(args, "potential", None) else {}
    params: dict = {}
    if args.command == "decompose":
        params["n_list"] = _parse_list(args.n, int)
    elif args.command == "grid":
        params = {
            "kind": args.kind,
            "extent": args.extent,
            "points": args.points,
            "root": args.root,
            "series_order": args.order,
            "format": args.format,
        }
        if args.n is not None:
            params["n"] = args.n
    elif args.command == "ward":
        params = {
            "points": [t.strip() for t in args.points.split(",") if t.strip()],
            "tol": args.tol,
            "fd_step": args.fd_step,
            "series_order": args.order,
        }
    elif args.command == "sweep":
        params = {
            "kind": args.kind,
            "n_list": _parse_list(args.n, int),
            "radii": _parse_list(args.radii, float),
            "extent": args.extent,
            "points": args.points,
        }
        if args.order is not None:
            params["series_order"] = args.order
    elif args.command == "sample":
        toks = _parse_list(args.grid, float)
        if len(toks) != 3:
            raise ConfigError(f"--grid wants lo,hi,bins; got {args.grid!r}")
        params = {
            "n": args.n,
            "sweeps": args.sweeps,
            "burn_in": args.burn_in,
            "chains": args.chains,
            "thin": args.thin,
            "grid": [toks[0], toks[1], int(toks[2])],
            "dump": args.dump,
            "psi_radius": args.psi_radius,
            "psi_center": args.psi_center,
        }
    return RunConfig(
        command=args.command,
        potential=potential,
        params=params,
        out=args.out,
        seed=args.seed,
        threads=threads,
    )


_COMMANDS = {
    "decompose": cmd_decompose,
    "grid": cmd_grid,
    "ward": cmd_ward,
    "sweep": cmd_sweep,
    "sample": cmd_sample,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return _COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RnmError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
