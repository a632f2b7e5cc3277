"""Configuration-driven experiment runner.

Commands map onto the acceptance criteria:

    kernel-check         geometry, quadrature, bergman
    trace                berezin, trace_identities
    toeplitz-identities  composite_identity, matrix_block
    cusp-action          modforms, cusp_action
    poincare             poincare
    density              density
    full-suite           all twelve criteria (the CI gate)

Every run writes a JSON report (report_v1); CSV tables and SVG figures are
emitted on request.  Reports are deterministic for a fixed config and warm
cache: wall-clock data lives in a separate "volatile" section, and figures
embed the config hash as provenance.

Exit codes: 0 all checks pass, 1 check failure, 2 config error, 3 capacity
or numeric-degeneracy errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance, berezin, hypgeom, modforms, quad, toeplitz
from .errors import BergmodError, CapacityExceeded, ConfigError, IterationLimit

COMMANDS = {
    "kernel-check": ["geometry", "quadrature", "bergman"],
    "trace": ["berezin", "trace_identities"],
    "toeplitz-identities": ["composite_identity", "matrix_block"],
    "cusp-action": ["modforms", "cusp_action"],
    "poincare": ["poincare"],
    "density": ["density"],
    "full-suite": list(acceptance.CRITERIA),
}

DEFAULT_CONFIG = {
    "seed": 1234,
    "level": 6,
    "truncation": 60,
    "ladder": [40, 80],
    "height": 10,
    "qexp_depth": 200,
    "weights": [12, 16, 18, 20, 22, 24],
    "out_dir": "bergmod-out",
    "cache_dir": None,
    "emit_svg": False,
    "qexpansion_file": None,
}

_RANGES = {
    "seed": (0, 2 ** 32 - 1),
    "level": (1, 12),
    "truncation": (4, 400),
    "height": (1, 40),
    "qexp_depth": (16, 2000),
}


def load_config(path=None, overrides=None) -> dict:
    config = dict(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config.update(user)
    for key, val in (overrides or {}).items():
        if val is not None:
            config[key] = val
    _validate(config)
    return config


def _validate(config):
    for key, (lo, hi) in _RANGES.items():
        v = config.get(key)
        if not isinstance(v, int) or not lo <= v <= hi:
            raise ConfigError(f"config {key} = {v!r} outside [{lo}, {hi}]")
    ladder = config.get("ladder")
    if (not isinstance(ladder, (list, tuple)) or len(ladder) < 2
            or any(not isinstance(n, int) or not 4 <= n <= 400 for n in ladder)
            or sorted(ladder) != list(ladder)):
        raise ConfigError(f"ladder {ladder!r} must be an increasing list of sizes in [4, 400]")
    ws = config.get("weights")
    if (not isinstance(ws, (list, tuple))
            or any(not isinstance(k, int) or k < 12 or k % 2 for k in ws)):
        raise ConfigError(f"weights {ws!r} must be even integers >= 12")
    qf = config.get("qexpansion_file")
    if qf is not None and not Path(qf).exists():
        raise ConfigError(f"qexpansion_file {qf!r} does not exist")


def config_hash(config) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def run_command(command: str, config: dict) -> dict:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    report = acceptance.run_criteria(config, names=COMMANDS[command])
    report["command"] = command
    report["config_hash"] = config_hash(config)
    report["library_version"] = _version()
    cdir = Path(config["cache_dir"]) if config.get("cache_dir") else quad.default_cache_dir()
    report["volatile"]["quadrature_cache_keys"] = (
        sorted(p.name for p in cdir.iterdir()) if cdir.is_dir() else [])
    if command == "cusp-action" and config.get("qexpansion_file"):
        report["criteria"].append(_external_form_check(config).to_dict())
        report["passed"] = all(c["passed"] for c in report["criteria"])
    return report


def _version():
    from . import __version__
    return __version__


def _external_form_check(config):
    """Intertwining ladder for a user-supplied q-expansion."""
    f = modforms.load_qexpansion(config["qexpansion_file"])
    ladder = config.get("ladder", [40, 80])
    res = {N: toeplitz.intertwining_residual(f, 4, N, hypgeom.T, 5,
                                             cache_dir=config.get("cache_dir"))
           for N in (ladder[0], ladder[-1])}
    return acceptance.CriterionResult("external_form", [
        acceptance.Check("intertwining residual decreasing",
                         res[ladder[0]] / max(res[ladder[-1]], 1e-300), 1.0, op=">="),
    ], info={"residuals": {str(k): float(v) for k, v in res.items()},
             "weight": f.weight})


# -- rendering ---------------------------------------------------------------------

def report_render(report: dict) -> str:
    """Human-readable table with one line per check."""
    lines = []
    head = f"{'criterion':<22}{'check':<46}{'value':>12}  {'tol':>9}  status"
    lines.append(head)
    lines.append("-" * len(head))
    for crit in report.get("criteria", []):
        for chk in crit["checks"]:
            lines.append(
                f"{crit['name']:<22}{chk['name']:<46}{chk['value']:>12.3e}  "
                f"{chk['op']}{chk['tol']:>8.1e}  {'pass' if chk['passed'] else 'FAIL'}")
        ladder = _ladder_of(crit)
        if ladder is not None:
            mono = all(b <= a for a, b in zip(ladder, ladder[1:]))
            lines.append(f"{'':<22}residual ladder {['%.3e' % v for v in ladder]}"
                         f" monotone: {mono}")
    lines.append("-" * len(head))
    lines.append(f"overall: {'pass' if report.get('passed') else 'FAIL'}")
    return "\n".join(lines)


def _ladder_of(crit):
    info = crit.get("info", {})
    for key in ("symbol_residuals", "separation_ladder"):
        if key in info:
            return info[key]
    return None


def write_report(report: dict, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"report_{report['command']}.json"
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
    return path


def write_csv_tables(report: dict, out_dir: Path):
    """Delimited companions: one checks table plus residual-ladder curves."""
    paths = []
    path = out_dir / f"checks_{report['command']}.csv"
    with open(path, "w") as fh:
        fh.write("criterion,check,value,op,tol,passed\n")
        for crit in report["criteria"]:
            for chk in crit["checks"]:
                fh.write(f"{crit['name']},{chk['name']!r},{chk['value']!r},"
                         f"{chk['op']},{chk['tol']!r},{chk['passed']}\n")
    paths.append(path)
    for crit in report["criteria"]:
        info = crit.get("info", {})
        if "symbol_residuals" in info:
            path = out_dir / "density_residuals.csv"
            with open(path, "w") as fh:
                fh.write("size,symbol_residual,operator_residual\n")
                for s, a, b in zip(info["sizes"], info["symbol_residuals"],
                                   info["operator_residuals"]):
                    fh.write(f"{s},{a!r},{b!r}\n")
            paths.append(path)
        if "separation_ladder" in info:
            path = out_dir / "separation_ladder.csv"
            with open(path, "w") as fh:
                fh.write("m,residual\n")
                for m, v in zip((4, 6, 8, 10), info["separation_ladder"]):
                    fh.write(f"{m},{v!r}\n")
            paths.append(path)
    return paths


def write_figures(report: dict, config: dict, out_dir: Path):
    """SVG figures for ladders plus the invariant-symbol heat map over F."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    meta = {"Description": f"bergmod report {report['command']} "
                           f"config {report['config_hash']}"}
    paths = []
    for crit in report["criteria"]:
        info = crit.get("info", {})
        if "symbol_residuals" in info:
            fig, ax = plt.subplots(figsize=(5, 3.4))
            ax.semilogy(info["sizes"], info["symbol_residuals"], "o-",
                        label="symbol-level (L2(F))")
            ax.semilogy(info["sizes"], info["operator_residuals"], "s-",
                        label="operator-level (tau norm)")
            ax.set_xlabel("dictionary size")
            ax.set_ylabel("least-squares residual")
            ax.legend(frameon=False)
            fig.tight_layout()
            p = out_dir / "density_residuals.svg"
            fig.savefig(p, metadata=meta)
            plt.close(fig)
            paths.append(p)
        if "separation_ladder" in info:
            fig, ax = plt.subplots(figsize=(5, 3.4))
            ax.semilogy((4, 6, 8, 10), info["separation_ladder"], "o-")
            ax.set_xlabel("weight parameter m")
            ax.set_ylabel("separation residual")
            fig.tight_layout()
            p = out_dir / "separation_ladder.svg"
            fig.savefig(p, metadata=meta)
            plt.close(fig)
            paths.append(p)
    if report["command"] in ("kernel-check", "full-suite"):
        paths.append(_field_heatmap(config, out_dir, meta))
    return paths


def _field_heatmap(config, out_dir: Path, meta):
    import matplotlib.pyplot as plt

    M = int(config.get("qexp_depth", 200))
    delta = modforms.delta_qexp(M)
    sym = modforms.InvariantSymbol.from_pair(delta, delta)
    xs = np.linspace(-0.5, 0.5, 101)
    ys = np.linspace(0.7, 2.2, 101)
    X, Y = np.meshgrid(xs, ys)
    Z = (X + 1j * Y).ravel()
    vals = np.full(Z.shape, np.nan)
    ok = np.abs(Z) >= 1.0
    vals[ok] = np.real(sym(Z[ok]))
    grid = vals.reshape(X.shape)
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    pc = ax.pcolormesh(X, Y, grid, shading="auto", rasterized=True)
    fig.colorbar(pc, ax=ax, label="|Delta(z)|^2 y^12")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    p = out_dir / "delta_pair_field.svg"
    fig.savefig(p, metadata=meta)
    plt.close(fig)
    # the delimited companion of the figure
    berezin.dump_symbol_field(out_dir / "delta_pair_field.csv", Z[ok],
                              np.asarray(sym(Z[ok])))
    return p


# -- entry point --------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="bergmod",
        description="Truncated Bergman models, Toeplitz operators and the "
                    "modular trace: experiment runner")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=str, default=None, help="JSON config file")
    ap.add_argument("--out", type=str, default=None, help="output directory")
    ap.add_argument("--level", type=int, default=None, help="quadrature level")
    ap.add_argument("--truncation", type=int, default=None, help="basis truncation")
    ap.add_argument("--ladder", type=str, default=None,
                    help="comma-separated truncation ladder, e.g. 40,80")
    ap.add_argument("--emit-svg", action="store_true", help="write SVG figures")
    ap.add_argument("--seed", type=int, default=None,
                    help="seed for randomized property checks")
    ap.add_argument("--cache", type=str, default=None, help="quadrature cache dir")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {
            "level": args.level,
            "truncation": args.truncation,
            "seed": args.seed,
            "cache_dir": args.cache,
            "out_dir": args.out,
        }
        if args.ladder:
            overrides["ladder"] = [int(t) for t in args.ladder.split(",")]
        if args.emit_svg:
            overrides["emit_svg"] = True
        config = load_config(args.config, overrides)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_command(args.command, config)
        out_dir = Path(config["out_dir"])
        path = write_report(report, out_dir)
        write_csv_tables(report, out_dir)
        if config.get("emit_svg"):
            write_figures(report, config, out_dir)
        print(report_render(report))
        print(f"report: {path}")
    except (CapacityExceeded, IterationLimit) as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except BergmodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
