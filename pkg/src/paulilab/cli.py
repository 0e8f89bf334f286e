"""Config-driven command line front end.

One subcommand per invocation; parameters come from built-in defaults, then a
TOML config file, then command-line flags, in that order of precedence.  The
fully resolved configuration is echoed to ``resolved_config.json`` in the
output directory before any computation starts, and all reports (stable-key
JSON, RFC-4180 CSV) are byte-reproducible across runs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import criteria as criteria_mod
from . import eigensolve as eig
from .discretize import (
    GridSizeError,
    ScalingOverflowError,
    box00,
    box0n,
    build_grid,
    dirac,
    identity_residual,
    pauli,
)
from .measure import DEFAULT_CENTERS, DEFAULT_RADII, doubling_report, weight_laplacian_density
from .weights import PlurisubharmonicityError, WeightParseError, parse_weight

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SUBCOMMANDS = ("spectrum", "identity", "doubling", "criteria", "proxy", "landau")
OPERATORS = ("pauli+", "pauli-", "dirac", "box00", "box0n")


@dataclass
class RunConfig:
    """Fully resolved parameters for one subcommand run (all deterministic)."""

    weight: str = "|z1|^2"
    n: int = None
    L: float = 6.0
    h: float = 0.1
    output_dir: str = "out"
    threads: int = 1
    dump_operator: str = None
    # spectrum
    operator: str = "pauli+"
    k: int = 6
    tol: float = 1e-8
    shift_invert: bool = True
    sigma: float = -0.1
    kernel_tol: float = 0.1
    # identity
    which: str = "all"
    refinement_levels: int = 3
    # doubling
    quad_rule: int = 16
    # criteria
    radii: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0])
    directions: int = None
    ball_order: int = 8
    # proxy
    L_values: list = field(default_factory=lambda: [4.0, 6.0, 8.0])
    lam: float = 10.0
    kernel_eps: float = 0.1
    max_k: int = 160

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items()}


def _load_config(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _apply(config, table, subcommand):
    """Overlay a TOML table: top-level keys first, then [subcommand] keys."""
    known = set(config.__dict__)
    for source in (table, table.get(subcommand, {})):
        for key, value in source.items():
            if isinstance(value, dict):
                continue
            if key not in known:
                raise KeyError(f"unknown config key {key!r}")
            setattr(config, key, value)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="paulilab",
        description="Spectral laboratory for magnetic Schrodinger operators "
        "built from plurisubharmonic polynomial weights.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, helptext in (
        ("spectrum", "assemble one operator and write its low spectrum as CSV"),
        ("identity", "residual/convergence checks of the discrete operator identities"),
        ("doubling", "sampled doubling report for the weight's Laplacian density"),
        ("criteria", "radial condition series, classification and Dirac verdict"),
        ("proxy", "eigenvalue-count trends across box sizes for both Pauli operators"),
        ("landau", "end-to-end check suite for the quadratic weight |z1|^2"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--weight", help="weight expression, e.g. '|z1|^2 + |z2|^4'")
        p.add_argument("--n", type=int, help="complex dimension override")
        p.add_argument("--L", type=float, help="box half-width")
        p.add_argument("--h", type=float, help="grid spacing")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="cap on worker threads")
        p.add_argument("--dump-operator", help="write the assembled operator in Matrix Market format")
        if name == "spectrum":
            p.add_argument("--operator", choices=OPERATORS)
            p.add_argument("--k", type=int)
            p.add_argument("--tol", type=float)
        if name == "identity":
            p.add_argument("--which", choices=("2.2", "2.3", "dirac-square", "all"))
            p.add_argument("--refinement-levels", type=int, dest="refinement_levels")
        if name == "proxy":
            p.add_argument("--L-values", dest="L_values", type=float, nargs="+")
            p.add_argument("--lam", type=float)
            p.add_argument("--k", type=int)
    return parser


def _resolve(args):
    config = RunConfig()
    if args.config:
        _apply(config, _load_config(args.config), args.subcommand)
    for key in (
        "weight", "n", "L", "h", "threads", "operator", "k", "tol",
        "which", "refinement_levels", "L_values", "lam",
    ):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    if getattr(args, "out", None):
        config.output_dir = args.out
    if getattr(args, "dump_operator", None):
        config.dump_operator = args.dump_operator
    return config


def _echo_config(config, outdir, subcommand):
    outdir.mkdir(parents=True, exist_ok=True)
    resolved = dict(config.to_dict(), subcommand=subcommand)
    (outdir / "resolved_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


_THREAD_LIMITER = None


def _limit_threads(count):
    global _THREAD_LIMITER
    try:
        import threadpoolctl

        # keep a reference; the limiter restores the old limits when dropped
        _THREAD_LIMITER = threadpoolctl.threadpool_limits(limits=max(1, int(count)))
    except Exception:
        pass  # best effort; computation is single-threaded apart from BLAS


def _write_json(path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _assemble(config, w, grid, name):
    if name == "pauli+":
        return pauli(w, grid, +1)
    if name == "pauli-":
        return pauli(w, grid, -1)
    if name == "dirac":
        return dirac(w, grid)
    if name == "box00":
        return box00(w, grid)
    if name == "box0n":
        return box0n(w, grid)
    raise KeyError(f"unknown operator {name!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_spectrum(config, outdir):
    w = parse_weight(config.weight, n=config.n)
    grid = build_grid(w.n, config.L, config.h)
    op = _assemble(config, w, grid, config.operator)
    if config.dump_operator:
        op.export_matrix_market(config.dump_operator)
    res = eig.smallest_eigs(
        op,
        k=config.k,
        tol=config.tol,
        shift_invert=config.shift_invert,
        sigma=config.sigma,
        kernel_tol=config.kernel_tol,
        grid=grid,
    )
    with open(outdir / "spectrum.csv", "w", newline="", encoding="utf-8") as fh:
        res.write_csv(fh)
    _write_json(
        outdir / "spectrum.json",
        {"weight": w.describe(), "operator": config.operator, "result": res.to_dict()},
    )
    return EXIT_OK if res.converged else EXIT_NUMERICAL


def _cmd_identity(config, outdir):
    w = parse_weight(config.weight, n=config.n)
    grid = build_grid(w.n, config.L, config.h)
    kinds = ["2.2", "2.3"] + (["dirac-square"] if w.n == 1 else [])
    if config.which != "all":
        kinds = [config.which]
    reports = {}
    for kind in kinds:
        reports[kind] = identity_residual(
            w, grid, kind, refinement_levels=config.refinement_levels
        ).to_dict()
    _write_json(outdir / "identity.json", {"weight": w.describe(), "reports": reports})
    return EXIT_OK


def _cmd_doubling(config, outdir):
    w = parse_weight(config.weight, n=config.n)
    density = weight_laplacian_density(w)
    rep = doubling_report(
        density, centers=DEFAULT_CENTERS, radii=DEFAULT_RADII, rule=config.quad_rule
    )
    _write_json(outdir / "doubling.json", {"weight": w.describe(), "report": rep.to_dict()})
    return EXIT_OK


def _cmd_criteria(config, outdir):
    w = parse_weight(config.weight, n=config.n)
    rep = criteria_mod.classify(
        w,
        radii=tuple(config.radii),
        directions_per_radius=config.directions,
        order=config.ball_order,
    )
    payload = rep.to_dict()
    if w.n == 1:
        payload["dirac_verdict"] = criteria_mod.dirac_verdict(w, rep)
    _write_json(outdir / "criteria.json", payload)
    return EXIT_OK


def _cmd_proxy(config, outdir):
    w = parse_weight(config.weight, n=config.n)
    proxy = eig.compactness_proxy(
        w,
        config.L_values,
        config.h,
        k=config.k,
        lam=config.lam,
        kernel_eps=config.kernel_eps,
        max_k=config.max_k,
        tol=config.tol,
    )
    _write_json(outdir / "proxy.json", proxy.to_dict())
    import csv as _csv

    with open(outdir / "proxy.csv", "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh, lineterminator="\r\n")
        writer.writerow(
            ["L", "pminus_zero_count", "pplus_gap", "pplus_kth_eigenvalue", "pplus_count_below"]
        )
        for i, L in enumerate(proxy.L_values):
            writer.writerow(
                [
                    repr(float(L)),
                    proxy.pminus_zero_counts[i],
                    repr(float(proxy.pplus_gap[i])),
                    repr(float(proxy.pplus_eig_growth[i])),
                    proxy.pplus_counts_below[i],
                ]
            )
    return EXIT_OK if not proxy.saturated else EXIT_NUMERICAL


def _cmd_landau(config, outdir):
    """End-to-end suite for phi=|z1|^2: conjugation identities, the Dirac
    block decomposition, Landau levels of P+, and the P- ground state."""
    w = parse_weight("|z1|^2")
    checks = []

    def record(name, passed, detail):
        checks.append({"check": name, "passed": bool(passed), "detail": detail})
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")

    grid_id = build_grid(1, 6.0, 0.2)
    for kind in ("2.2", "2.3", "dirac-square"):
        rep = identity_residual(w, grid_id, kind, refinement_levels=3)
        ok = 1.5 <= rep.observed_order <= 2.5
        detail = f"observed order {rep.observed_order:.3f} over h={rep.h_values}"
        if kind == "dirac-square":
            ok = ok and rep.offdiag_max == 0.0
            detail += f", off-diagonal max {rep.offdiag_max}"
        record(f"identity {kind} second-order", ok, detail)

    grid = build_grid(1, 8.0, 0.1)
    pp = pauli(w, grid, +1)
    res_p = eig.smallest_eigs(pp, k=6, tol=1e-6, shift_invert=True, sigma=-0.1, grid=grid)
    levels = np.array([4.0, 8.0])
    rel = np.min(
        np.abs(res_p.eigenvalues[:, None] - levels[None, :]) / levels[None, :], axis=1
    )
    record(
        "P+ lowest six eigenvalues on the first two levels {4, 8} (5%)",
        bool(np.all(rel <= 0.05) and res_p.converged),
        f"eigenvalues {np.round(res_p.eigenvalues, 4).tolist()}",
    )
    record(
        "P+ positive semidefinite",
        bool(res_p.eigenvalues[0] >= -1e-8 * pp.norm1),
        f"smallest {res_p.eigenvalues[0]:.6f}",
    )

    pm = pauli(w, grid, -1)
    res_m = eig.smallest_eigs(pm, k=6, tol=1e-6, shift_invert=True, sigma=-0.05, grid=grid)
    record(
        "P- ground state within 0.01 of zero",
        bool(res_m.eigenvalues[0] <= 0.01),
        f"smallest {res_m.eigenvalues[0]:.6f}",
    )
    record(
        "assembled operators exactly Hermitian",
        bool(pp.hermitian_certified and pm.hermitian_certified),
        "certified at assembly",
    )

    all_ok = all(c["passed"] for c in checks)
    _write_json(
        outdir / "landau.json",
        {
            "weight": w.describe(),
            "checks": checks,
            "pplus_eigenvalues": [float(v) for v in res_p.eigenvalues],
            "pminus_eigenvalues": [float(v) for v in res_m.eigenvalues],
            "all_passed": all_ok,
        },
    )
    print(f"{'PASS' if all_ok else 'FAIL'}  landau suite overall")
    return EXIT_OK if all_ok else EXIT_NUMERICAL


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "identity": _cmd_identity,
    "doubling": _cmd_doubling,
    "criteria": _cmd_criteria,
    "proxy": _cmd_proxy,
    "landau": _cmd_landau,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve(args)
    except (KeyError, OSError, tomllib.TOMLDecodeError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    _limit_threads(config.threads)
    outdir = Path(config.output_dir)
    try:
        _echo_config(config, outdir, args.subcommand)
        return _COMMANDS[args.subcommand](config, outdir)
    except (WeightParseError, PlurisubharmonicityError, GridSizeError,
            ScalingOverflowError, KeyError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
