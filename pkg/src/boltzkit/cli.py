"""Command-line entry point running each experiment family.

Usage::

    boltzkit <command> --config <file> [--seed S] [--out PATH]

with ``<command>`` one of ``strichartz``, ``bilinear``, ``annihilation``,
``boardgame``, ``duhamel``, ``uniqueness``, ``solve``.

Config files are UTF-8 text, one ``key = value`` pair per line, with ``#``
starting a comment.  A ``command`` key inside the file is allowed and must
agree with the command given on the command line.  The universal keys
``seed`` (nonnegative integer, default 0) and ``out`` (report path stem) may
appear in the file; the ``--seed`` and ``--out`` flags override them.
Unknown keys, malformed numbers, and missing required keys are rejected with
the offending line number.

Each run writes three files next to the stem (default
``./boltzkit_<command>``):

``<stem>.json``
    the report.  Identical configs produce byte-identical bytes: floats are
    printed with 17 significant digits, key order is fixed, and nothing
    volatile (timestamps, paths, hostnames) is included.  Schema::

        {
          "schema_version": "boltzkit-report-1",
          "command": "<command>",
          "convention_version": "<package convention string>",
          "config": { ...full resolved config, including seed... },
          "verdict": "pass" | "fail" | "report",
          "result": { ...command-specific payload... }
        }

    ``"report"`` marks commands that only measure (no pass/fail claim).

``<stem>.csv``
    the same rows in RFC-4180 CSV (CRLF line endings, minimal quoting).

``<stem>.meta.json``
    volatile run metadata (wall-clock timestamp).  Deliberately excluded
    from the byte-identical guarantee.

Exit codes: 0 when the verdict is ``pass`` or ``report``, 1 when a measured
verdict is ``fail``, and 2 for configuration or runtime errors, in which
case a structured error JSON is printed to stderr.

stdout carries exactly one summary line per run.

The ``BOLTZKIT_THREADS`` environment variable caps numeric-library
parallelism; it is translated to the BLAS/OpenMP thread variables when the
package is first imported.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BoltzkitError, ConfigParseError

SCHEMA_VERSION = "boltzkit-report-1"

_REQ = object()

# Per-command key schemas: key -> (type tag, default).  ``_REQ`` marks a
# required key.  Type tags: int, float, bool, str, ints (comma-separated
# integer list), floats.
_SCHEMAS: dict[str, dict[str, tuple[str, object]]] = {
    "strichartz": {
        "d": ("int", 2),
        "p": ("float", 4.0),
        "m": ("int", 1),
        "levels": ("ints", [4, 8, 16]),
        "t": ("float", 0.0625),
        "samples": ("int", 16),
        "nv": ("int", 8),
        "v_max": ("float", math.pi),
        "nx_factor": ("int", 2),
        "time_samples": ("int", 33),
        "estimate_id": ("str", "strichartz-2.7"),
        "slack": ("float", 0.1),
    },
    "bilinear": {
        "kind": ("str", "bilinear"),
        "case": ("str", "full"),
        "d": ("int", 2),
        "gamma": ("float", 0.0),
        "s": ("float", 0.8),
        "s1": ("float", 0.0),
        "r": ("float", 1.3),
        "t": ("float", 0.0625),
        "nx": ("int", 16),
        "nv": ("int", 16),
        "v_max": ("float", 4.0),
        "n_sphere": ("int", 8),
        "samples": ("int", 8),
        "time_samples": ("int", 17),
        "levels": ("ints", [2, 4]),
        "slack": ("float", 0.1),
    },
    "annihilation": {
        "d": ("int", 2),
        "nx": ("int", 8),
        "nv": ("int", 16),
        "v_max": ("float", 4.0),
        "gamma": ("float", 0.0),
        "n_sphere": ("int", 8),
        "profile": ("str", "sharp"),
        "levels": ("ints", [1, 2, 4]),
        "tol": ("float", 1e-12),
        "factor": ("float", 10.0),
    },
    "boardgame": {
        "k": ("int", _REQ),
        "identity": ("bool", False),
        "d": ("int", 2),
        "nx": ("int", 8),
        "nv": ("int", 8),
        "v_max": ("float", 4.0),
        "gamma": ("float", 0.0),
        "n_sphere": ("int", 8),
        "t1": ("float", 0.5),
        "n_points": ("int", 40),
    },
    "duhamel": {
        "d": ("int", 1),
        "nx": ("int", 8),
        "nv": ("int", 8),
        "v_max": ("float", 4.0),
        "gamma": ("float", 0.0),
        "n_sphere": ("int", 8),
        "init": ("str", "mode"),
        "t1": ("float", 0.25),
        "k": ("int", 2),
        "dt": ("float", 1.0 / 128),
        "n_gl": ("int", 8),
        "rel_tol": ("float", 1e-3),
        "abs_floor": ("float", 1e-9),
    },
    "uniqueness": {
        "d": ("int", 2),
        "nx": ("int", 8),
        "nv": ("int", 8),
        "v_max": ("float", 4.0),
        "gamma": ("float", 0.0),
        "n_sphere": ("int", 8),
        "init": ("str", "mix"),
        "t_end": ("float", 0.0625),
        "dt_a": ("float", 1.0 / 64),
        "dt_b": ("float", 1.0 / 128),
        "scheme_a": ("str", "strang"),
        "scheme_b": ("str", "strang"),
        "n_samples": ("int", 5),
        "s": ("float", 0.8),
        "r": ("float", 1.3),
        "gap_tol": ("float", 0.0),
    },
    "solve": {
        "d": ("int", 2),
        "nx": ("int", 8),
        "nv": ("int", 8),
        "v_max": ("float", 4.0),
        "kernel": ("str", "spec"),
        "gamma": ("float", 0.0),
        "n_sphere": ("int", 8),
        "init": ("str", "mix"),
        "dt": ("float", 1.0 / 32),
        "t_end": ("float", 0.125),
        "scheme": ("str", "strang"),
        "conserve": ("bool", True),
        "dealias": ("bool", True),
        "n_samples": ("int", 5),
        "save": ("bool", False),
    },
}

COMMANDS = tuple(sorted(_SCHEMAS))

_BOOL_WORDS = {
    "true": True,
    "false": False,
    "yes": True,
    "no": False,
    "1": True,
    "0": False,
    "on": True,
    "off": False,
}


@dataclass
class ExperimentConfig:
    """One resolved experiment: command, typed parameters, seed, out stem."""

    command: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    out_path: str | None = None


def _parse_scalar(raw: str, typ: str, key: str, line_no: int):
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            word = raw.strip().lower()
            if word not in _BOOL_WORDS:
                raise ValueError(raw)
            return _BOOL_WORDS[word]
        if typ == "str":
            return raw
        if typ in ("ints", "floats"):
            parts = [tok.strip() for tok in raw.split(",") if tok.strip()]
            if not parts:
                raise ValueError(raw)
            cast = int if typ == "ints" else float
            return [cast(tok) for tok in parts]
    except ValueError as exc:
        raise ConfigParseError(
            f"line {line_no}: key {key!r} expects {typ}, got {raw!r}",
            line_number=line_no,
        ) from exc
    raise ConfigParseError(f"line {line_no}: unhandled type {typ!r}")


def parse_config(text: str, command: str | None = None) -> ExperimentConfig:
    """Parse ``key = value`` config text into a typed :class:`ExperimentConfig`.

    ``command`` may come from the text (a ``command`` key) or the argument;
    when both are present they must agree.  Defaults are filled, required
    keys enforced, unknown keys rejected — each error names the line.
    """
    entries: dict[str, tuple[str, int]] = {}
    for line_no, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(
                f"line {line_no}: expected 'key = value', got {raw_line.strip()!r}",
                line_number=line_no,
            )
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigParseError(
                f"line {line_no}: empty key", line_number=line_no
            )
        if key in entries:
            raise ConfigParseError(
                f"line {line_no}: duplicate key {key!r}", line_number=line_no
            )
        entries[key] = (value, line_no)

    cmd_line = None
    if "command" in entries:
        file_cmd, cmd_line = entries.pop("command")
        if command is not None and file_cmd != command:
            raise ConfigParseError(
                f"line {cmd_line}: config file says command = {file_cmd!r} "
                f"but {command!r} was requested",
                line_number=cmd_line,
            )
        command = file_cmd
    if command is None:
        raise ConfigParseError(
            "no command: pass one on the command line or set a 'command' key"
        )
    if command not in _SCHEMAS:
        raise ConfigParseError(
            (f"line {cmd_line}: " if cmd_line is not None else "")
            + f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}",
            line_number=cmd_line,
        )

    seed = 0
    if "seed" in entries:
        raw, ln = entries.pop("seed")
        seed = _parse_scalar(raw, "int", "seed", ln)
        if seed < 0:
            raise ConfigParseError(
                f"line {ln}: seed must be >= 0, got {seed}", line_number=ln
            )
    out_path = None
    if "out" in entries:
        out_path = entries.pop("out")[0]

    schema = _SCHEMAS[command]
    params = {}
    for key, (typ, default) in schema.items():
        if key in entries:
            raw, ln = entries.pop(key)
            params[key] = _parse_scalar(raw, typ, key, ln)
        elif default is _REQ:
            raise ConfigParseError(
                f"command {command!r} requires key {key!r}"
            )
        else:
            params[key] = default
    if entries:
        key, (_, ln) = min(entries.items(), key=lambda kv: kv[1][1])
        raise ConfigParseError(
            f"line {ln}: unknown key {key!r} for command {command!r}",
            line_number=ln,
        )
    return ExperimentConfig(command, params, seed, out_path)


# ---------------------------------------------------------------------------
# Deterministic serialization
# ---------------------------------------------------------------------------


def _sig17(x: float) -> float:
    """Round-trip a float through 17 significant digits (value-preserving)."""
    return float(f"{x:.17g}")


def _jsonable(obj):
    """Recursively convert report values to deterministic JSON-ready types."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return _sig17(obj)
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    if hasattr(obj, "tolist"):  # numpy arrays
        return _jsonable(obj.tolist())
    return str(obj)


def _dump_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2) + "\n"


def _csv_table(header: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [f"{v:.17g}" if isinstance(v, float) else v for v in row]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Shared builders
# ---------------------------------------------------------------------------


def _make_grid(p: dict):
    from .spectral_core import make_grid

    return make_grid(p["d"], p["nx"], p["nv"], p["v_max"])


def _make_kernel(p: dict):
    from .collision import CollisionKernelSpec

    return CollisionKernelSpec(d=p["d"], gamma=p["gamma"], n_sphere=p["n_sphere"])


def _initial_state(grid, init: str, seed: int):
    from .solver import band_limited_random, maxwellian, maxwellian_with_mode
    from .spectral_core import PhaseField

    if init == "maxwellian":
        return maxwellian(grid)
    if init == "mode":
        return maxwellian_with_mode(grid, rho=1.0, sigma2=0.8, eps=0.3)
    if init == "mix":
        return PhaseField(
            grid,
            "XV",
            maxwellian(grid, rho=1.0, sigma2=0.8).data
            + maxwellian_with_mode(grid, rho=0.4, sigma2=1.4, eps=0.5).data,
        )
    if init == "random":
        return band_limited_random(grid, seed)
    raise ConfigParseError(
        f"init must be maxwellian, mode, mix, or random, got {init!r}"
    )


# ---------------------------------------------------------------------------
# Command runners: each returns (result dict, verdict, csv text)
# ---------------------------------------------------------------------------


def _run_strichartz(cfg: ExperimentConfig):
    from .estimates import report_to_csv, report_to_json, strichartz_report

    p = cfg.parameters
    report = strichartz_report(
        d=p["d"],
        p=p["p"],
        M=p["m"],
        levels=p["levels"],
        T=p["t"],
        samples=p["samples"],
        seed=cfg.seed,
        nv=p["nv"],
        v_max=p["v_max"],
        nx_factor=p["nx_factor"],
        time_samples=p["time_samples"],
        estimate_id=p["estimate_id"],
        slack=p["slack"],
    )
    return json.loads(report_to_json(report)), report.verdict, report_to_csv(report)


def _run_bilinear(cfg: ExperimentConfig):
    from .estimates import (
        bilinear_ratio,
        report_to_csv,
        report_to_json,
        rough_term_report,
    )

    p = cfg.parameters
    grid = _make_grid(p)
    kernel = _make_kernel(p)
    if p["kind"] == "bilinear":
        report = bilinear_ratio(
            case=p["case"],
            d=p["d"],
            gamma=p["gamma"],
            s=p["s"],
            s1=p["s1"],
            r=p["r"],
            T=p["t"],
            grid=grid,
            samples=p["samples"],
            seed=cfg.seed,
            kernel=kernel,
            time_samples=p["time_samples"],
            adversarial_levels=p["levels"],
            slack=p["slack"],
        )
    elif p["kind"] == "rough":
        report = rough_term_report(
            d=p["d"],
            gamma=p["gamma"],
            s=p["s"],
            r=p["r"],
            grid=grid,
            samples=p["samples"],
            seed=cfg.seed,
            kernel=kernel,
            adversarial_levels=p["levels"],
            slack=p["slack"],
        )
    else:
        raise ConfigParseError(
            f"kind must be 'bilinear' or 'rough', got {p['kind']!r}"
        )
    return json.loads(report_to_json(report)), report.verdict, report_to_csv(report)


def _run_annihilation(cfg: ExperimentConfig):
    from itertools import product

    from .collision import check_annihilation
    from .solver import band_limited_random

    p = cfg.parameters
    grid = _make_grid(p)
    kernel = _make_kernel(p)
    ft = band_limited_random(grid, (cfg.seed, 0))
    gt = band_limited_random(grid, (cfg.seed, 1))
    rows = []
    worst = 0.0
    n_qual = 0
    ok = True
    for m, m1, m2 in product(p["levels"], repeat=3):
        row = check_annihilation(ft, gt, m, m1, m2, kernel, profile=p["profile"])
        qualifies = m >= p["factor"] * max(m1, m2)
        row["qualifies"] = qualifies
        if qualifies and not row["vacuous"]:
            n_qual += 1
            worst = max(worst, row["ratio"])
            if row["ratio"] >= p["tol"]:
                ok = False
        rows.append(row)
    verdict = "pass" if ok else "fail"
    result = {
        "levels": p["levels"],
        "factor": p["factor"],
        "tol": p["tol"],
        "n_triples": len(rows),
        "n_qualifying": n_qual,
        "worst_qualifying_ratio": worst,
        "rows": rows,
    }
    csv_text = _csv_table(
        ["M", "M1", "M2", "ratio", "qualifies", "vacuous"],
        [
            [r["M"], r["M1"], r["M2"], float(r["ratio"]),
             int(r["qualifies"]), int(r["vacuous"])]
            for r in rows
        ],
    )
    return result, verdict, csv_text


def _run_boardgame(cfg: ExperimentConfig):
    from .hierarchy import (
        boardgame_identity_report,
        class_table_csv,
        enumerate_collapse_maps,
        km_classes,
    )

    p = cfg.parameters
    k = p["k"]
    classes = km_classes(k)
    result = {
        "k": k,
        "n_maps": len(enumerate_collapse_maps(k)),
        "n_classes": len(classes),
        "classes": [
            {"representative": str(c.representative), "size": c.size}
            for c in classes
        ],
        "identity": None,
    }
    verdict = "report"
    if p["identity"]:
        if k > 4:
            raise ConfigParseError(
                f"the identity run supports k <= 4, got k = {k}"
            )
        grid = _make_grid(p)
        kernel = _make_kernel(p)
        f = _initial_state(grid, "mix", cfg.seed)
        ident = boardgame_identity_report(
            f,
            kernel,
            t1=p["t1"],
            k_max=k,
            n_points=p["n_points"],
            seed=cfg.seed,
        )
        result["identity"] = ident
        verdict = "pass" if ident["pass"] else "fail"
    return result, verdict, class_table_csv(k)


def _run_duhamel(cfg: ExperimentConfig):
    from .hierarchy import duhamel_reconstruction

    p = cfg.parameters
    grid = _make_grid(p)
    kernel = _make_kernel(p)
    f0 = _initial_state(grid, p["init"], cfg.seed)
    rep = duhamel_reconstruction(
        f0, kernel, t1=p["t1"], k=p["k"], dt=p["dt"], n_gl=p["n_gl"]
    )
    degenerate = (
        rep["target_norm"] <= p["abs_floor"] and rep["abs_err"] <= p["abs_floor"]
    )
    ok = rep["rel_err"] <= p["rel_tol"] or degenerate
    rep["degenerate"] = degenerate
    rep["rel_tol"] = p["rel_tol"]
    rep["abs_floor"] = p["abs_floor"]
    rows = [
        [depth + 1, float(norm), float(rep["target_norm"]),
         float(rep["recon_norm"]), float(rep["abs_err"]),
         float(rep["rel_err"]) if math.isfinite(rep["rel_err"]) else "inf"]
        for depth, norm in enumerate(rep["depth_term_norms"])
    ]
    csv_text = _csv_table(
        ["depth", "term_norm", "target_norm", "recon_norm", "abs_err", "rel_err"],
        rows,
    )
    return rep, ("pass" if ok else "fail"), csv_text


def _run_uniqueness(cfg: ExperimentConfig):
    from .solver import SolverConfig, uniqueness_experiment

    p = cfg.parameters
    grid = _make_grid(p)
    kernel = _make_kernel(p)
    f0 = _initial_state(grid, p["init"], cfg.seed)
    cfg_a = SolverConfig(
        grid, dt=p["dt_a"], t_end=p["t_end"], kernel=kernel, scheme=p["scheme_a"]
    )
    cfg_b = SolverConfig(
        grid, dt=p["dt_b"], t_end=p["t_end"], kernel=kernel, scheme=p["scheme_b"]
    )
    table = uniqueness_experiment(
        f0, cfg_a, cfg_b, p["t_end"], n_samples=p["n_samples"], s=p["s"], r=p["r"]
    )
    if p["gap_tol"] > 0.0:
        verdict = "pass" if table["sup_gap_l2"] <= p["gap_tol"] else "fail"
    else:
        verdict = "report"
    table["gap_tol"] = p["gap_tol"]
    csv_text = _csv_table(
        ["t", "gap_l2", "gap_sobolev"],
        [
            [float(t), float(a), float(b)]
            for t, a, b in zip(
                table["times"], table["gap_l2"], table["gap_sobolev"]
            )
        ],
    )
    return table, verdict, csv_text


def _run_solve(cfg: ExperimentConfig):
    import numpy as np

    from .solver import SolverConfig, save_trajectory, solve
    from .spectral_core import l2_norm, transform

    p = cfg.parameters
    grid = _make_grid(p)
    kernel = None if p["kernel"] == "none" else _make_kernel(p)
    f0 = _initial_state(grid, p["init"], cfg.seed)
    scfg = SolverConfig(
        grid,
        dt=p["dt"],
        t_end=p["t_end"],
        kernel=kernel,
        scheme=p["scheme"],
        conserve=p["conserve"],
        dealias=p["dealias"],
    )
    sample_times = [
        p["t_end"] * i / (p["n_samples"] - 1) for i in range(p["n_samples"])
    ] if p["n_samples"] > 1 else [p["t_end"]]
    traj = solve(f0, scfg, sample_times=sample_times)
    cell = (grid.dx ** grid.d) * (grid.dv ** grid.d)
    rows = []
    masses = []
    for t, fld in zip(traj.times, traj.fields):
        xv = transform(fld, "XV")
        mass = complex(cell * np.sum(xv.data))
        masses.append(mass)
        rows.append([float(t), float(l2_norm(fld)), float(mass.real)])
    drift = max(abs(m - masses[0]) for m in masses)
    result = {
        "times": [float(t) for t in traj.times],
        "l2_norms": [r[1] for r in rows],
        "mass": [float(m.real) for m in masses],
        "mass_drift": float(drift),
        "max_imag_mass": max(abs(m.imag) for m in masses),
        "n_steps": scfg.n_steps,
        "saved": bool(p["save"]),
    }
    if p["save"]:
        stem = _out_stem(cfg)
        bin_path, meta_path = save_trajectory(traj, str(stem) + "_traj")
        result["trajectory_files"] = [bin_path.name, meta_path.name]
    csv_text = _csv_table(["t", "l2_norm", "mass"], rows)
    return result, "report", csv_text


_RUNNERS = {
    "strichartz": _run_strichartz,
    "bilinear": _run_bilinear,
    "annihilation": _run_annihilation,
    "boardgame": _run_boardgame,
    "duhamel": _run_duhamel,
    "uniqueness": _run_uniqueness,
    "solve": _run_solve,
}


# ---------------------------------------------------------------------------
# Run + entry point
# ---------------------------------------------------------------------------


def _out_stem(cfg: ExperimentConfig) -> Path:
    raw = cfg.out_path or f"boltzkit_{cfg.command}"
    path = Path(raw)
    if path.suffix == ".json":
        path = path.with_suffix("")
    return path


def _summary_line(cfg: ExperimentConfig, verdict: str, result: dict) -> str:
    bits = [f"{cfg.command}: {verdict}"]
    for key in (
        "fitted_slope",
        "worst_qualifying_ratio",
        "n_classes",
        "rel_err",
        "sup_gap_l2",
        "mass_drift",
    ):
        if key in result and result[key] is not None:
            val = result[key]
            bits.append(
                f"{key}={val:.6g}" if isinstance(val, float) else f"{key}={val}"
            )
    bits.append(f"seed={cfg.seed}")
    return " ".join(bits)


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment: write reports, print the summary line.

    Returns the exit code (0 pass/report, 1 verdict failure).
    """
    from .spectral_core import CONVENTION_VERSION

    result, verdict, csv_text = _RUNNERS[cfg.command](cfg)
    stem = _out_stem(cfg)
    if stem.parent != Path("."):
        stem.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "convention_version": CONVENTION_VERSION,
        "config": {
            "command": cfg.command,
            "seed": cfg.seed,
            **cfg.parameters,
        },
        "verdict": verdict,
        "result": result,
    }
    Path(f"{stem}.json").write_text(_dump_json(payload), encoding="utf-8")
    Path(f"{stem}.csv").write_text(csv_text, encoding="utf-8", newline="")
    meta = {
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "report": f"{stem.name}.json",
        "table": f"{stem.name}.csv",
    }
    Path(f"{stem}.meta.json").write_text(
        json.dumps(meta, indent=2) + "\n", encoding="utf-8"
    )
    print(_summary_line(cfg, verdict, result))
    return 0 if verdict in ("pass", "report") else 1


def _error_payload(cmd: str | None, exc: BaseException) -> dict:
    info = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("line_number", "node_index", "step_index"):
        value = getattr(exc, attr, None)
        if value is not None:
            info[attr] = value
    return {"schema_version": SCHEMA_VERSION, "command": cmd, "error": info}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="boltzkit",
        description="Run one kinetic-estimate experiment from a config file.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument(
        "--config", required=True, help="path to a key = value config file"
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="override the config seed"
    )
    parser.add_argument(
        "--out", default=None, help="report path stem (writes .json/.csv)"
    )
    args = parser.parse_args(argv)
    try:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigParseError(
                f"cannot read config file {args.config!r}: {exc}"
            ) from exc
        cfg = parse_config(text, command=args.command)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigParseError(
                    f"--seed must be >= 0, got {args.seed}"
                )
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_path = args.out
        return run(cfg)
    except BoltzkitError as exc:
        print(
            json.dumps(_error_payload(args.command, exc)),
            file=sys.stderr,
        )
        print(f"{args.command}: error {type(exc).__name__}: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
