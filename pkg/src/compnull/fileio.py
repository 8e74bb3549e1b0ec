"""File formats: z-matrices, truth labels, results, parameters, manifests.

Tabular data is tab-separated text with one header line.  Floats are written
with %.17g so that reading a written file reproduces the exact float64
values; writers are fully deterministic (no timestamps, no environment
leakage), which makes byte-identical re-runs possible.

The parameter document is JSON (sorted keys, indented) and round-trips every
float exactly.  Scenario configurations and run manifests are line-oriented
``key=value`` text with ``#`` comments.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import ModelParams, ModelSpec, ZMatrix
from .simulate import ScenarioSpec, SimOutput, TruthLabels

_FLOAT_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return _FLOAT_FMT % float(value)
    return str(value)


def _z_header(k: int) -> list[str]:
    return ["id"] + [f"z_{i + 1}" for i in range(k)]


def _parse_float(token: str, row: int, column: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ValueError(f"row {row}, column {column}: could not parse {token!r}") from None
    if not np.isfinite(value):
        raise ValueError(f"row {row}, column {column}: non-finite value {token!r}")
    return value


def _read_table(path, expected_prefix: list[str]):
    """Read a TSV, check the fixed header prefix, return (header, rows)."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split("\t")
    if header[: len(expected_prefix)] != expected_prefix:
        raise ValueError(
            f"{path}: header must start with {expected_prefix}, got {header[: len(expected_prefix)]}"
        )
    rows = []
    for i, line in enumerate(lines[1:], start=1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != len(header):
            raise ValueError(
                f"{path}: row {i} has {len(fields)} fields, expected {len(header)}"
            )
        rows.append(fields)
    return header, rows


def write_zmatrix(path, z: ZMatrix) -> None:
    """Write a z-matrix as TSV: id, z_1..z_K."""
    lines = ["\t".join(_z_header(z.k))]
    for rid, row in zip(z.ids, z.z):
        lines.append("\t".join([str(rid)] + [_FLOAT_FMT % v for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_zmatrix(path) -> ZMatrix:
    """Read a z-matrix TSV; errors name the offending row and column."""
    header, rows = _read_table(path, ["id"])
    k = len(header) - 1
    expected = _z_header(k)
    if header != expected or k < 2:
        raise ValueError(f"{path}: header must be {_z_header(max(k, 2))} for some K >= 2")
    ids = np.array([r[0] for r in rows], dtype=object)
    z = np.empty((len(rows), k))
    for i, fields in enumerate(rows):
        for j in range(k):
            z[i, j] = _parse_float(fields[j + 1], i + 1, header[j + 1])
    return ZMatrix(ids=ids, z=z)


def write_truth(path, z: ZMatrix, truth: TruthLabels) -> None:
    """Write truth labels as TSV: id, h_1..h_K, alt."""
    k = truth.configs.shape[1]
    head = ["id"] + [f"h_{i + 1}" for i in range(k)] + ["alt"]
    lines = ["\t".join(head)]
    for rid, row, alt in zip(z.ids, truth.configs, truth.alt):
        lines.append("\t".join([str(rid)] + [str(int(v)) for v in row] + ["1" if alt else "0"]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_truth(path) -> TruthLabels:
    """Read a truth-label TSV written by write_truth."""
    header, rows = _read_table(path, ["id"])
    if header[-1] != "alt":
        raise ValueError(f"{path}: last column must be 'alt'")
    k = len(header) - 2
    configs = np.empty((len(rows), k), dtype=np.int8)
    alt = np.empty(len(rows), dtype=bool)
    for i, fields in enumerate(rows):
        for j in range(k):
            value = int(fields[j + 1])
            if value not in (-1, 0, 1):
                raise ValueError(f"{path}: row {i + 1}, column h_{j + 1}: bad sign {value}")
            configs[i, j] = value
        alt[i] = fields[-1] == "1"
    return TruthLabels(configs=configs, alt=alt)


def write_results(path, z: ZMatrix, lfdrs, rejected) -> None:
    """Write per-row output as TSV: id, z_1..z_K, lfdr, rejected."""
    lf = np.asarray(lfdrs, dtype=np.float64).reshape(-1)
    rej = np.asarray(rejected, dtype=bool).reshape(-1)
    if lf.shape[0] != len(z) or rej.shape[0] != len(z):
        raise ValueError("lfdrs and rejected must have one entry per row")
    head = _z_header(z.k) + ["lfdr", "rejected"]
    lines = ["\t".join(head)]
    for rid, row, l, r in zip(z.ids, z.z, lf, rej):
        lines.append(
            "\t".join(
                [str(rid)]
                + [_FLOAT_FMT % v for v in row]
                + [_FLOAT_FMT % l, "1" if r else "0"]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_results(path):
    """Read a results TSV; returns (ZMatrix, lfdrs, rejected)."""
    header, rows = _read_table(path, ["id"])
    if header[-2:] != ["lfdr", "rejected"]:
        raise ValueError(f"{path}: last columns must be 'lfdr' and 'rejected'")
    k = len(header) - 3
    if k < 2 or header != _z_header(k) + ["lfdr", "rejected"]:
        raise ValueError(f"{path}: header must be id, z_1..z_K, lfdr, rejected")
    ids = np.array([r[0] for r in rows], dtype=object)
    z = np.empty((len(rows), k))
    lf = np.empty(len(rows))
    rej = np.empty(len(rows), dtype=bool)
    for i, fields in enumerate(rows):
        for j in range(k):
            z[i, j] = _parse_float(fields[j + 1], i + 1, header[j + 1])
        lf[i] = _parse_float(fields[-2], i + 1, "lfdr")
        rej[i] = fields[-1] == "1"
    return ZMatrix(ids=ids, z=z), lf, rej


def write_params(path, spec: ModelSpec, params: ModelParams, loglik_trace=None) -> None:
    """Write a fitted (or constructed) model as a JSON document.

    Floats survive the JSON round trip exactly (repr-based encoding).
    """
    doc = {
        "format": "compnull-params-v1",
        "k": spec.k,
        "variant": spec.variant,
        "m_counts": list(spec.m_counts),
        "rho": spec.rho,
        "mu": [m.tolist() for m in params.mu],
        "pi": [p.tolist() for p in params.pi],
    }
    if loglik_trace is not None:
        doc["loglik_trace"] = [float(v) for v in np.asarray(loglik_trace).reshape(-1)]
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_params(path):
    """Read a parameter document; returns (ModelSpec, ModelParams, trace or None)."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "compnull-params-v1":
        raise ValueError(f"{path}: not a parameter document (missing format marker)")
    spec = ModelSpec(
        k=int(doc["k"]),
        variant=doc["variant"],
        m_counts=tuple(int(v) for v in doc["m_counts"]),
        rho=doc.get("rho"),
    )
    params = ModelParams(
        mu=tuple(np.asarray(m, dtype=np.float64) for m in doc["mu"]),
        pi=tuple(np.asarray(p, dtype=np.float64) for p in doc["pi"]),
    )
    trace = doc.get("loglik_trace")
    return spec, params, (np.asarray(trace) if trace is not None else None)


def write_table(path, columns: list[str], rows: list[dict]) -> None:
    """Write a list of dicts as a TSV with the given column order."""
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(_fmt(row[c]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# key=value documents: scenario configs and run manifests


def _parse_keyvalues(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {i}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"{path}: line {i}: empty key")
        if key in out:
            raise ValueError(f"{path}: line {i}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


_SCENARIO_FIELDS = {
    "kind": str,
    "n_sets": int,
    "sample_size": int,
    "maf": float,
    "tau1": float,
    "tau2": float,
    "tau3": float,
    "effect_window_low": float,
    "window_length": float,
    "beta_offset": float,
    "rho_outcomes": float,
    "sign_mix": float,
    "mode": str,
    "seed": int,
    "quota_assignment": lambda s: s.strip().lower() in ("1", "true", "yes"),
}


def read_scenario_config(path) -> tuple[ScenarioSpec, dict[str, str]]:
    """Read a scenario description from key=value text.

    Unknown keys are returned in the second element (the replicate driver
    uses them for grids); known keys are converted and validated through
    ScenarioSpec.
    """
    raw = _parse_keyvalues(path)
    known = {}
    extra = {}
    for key, value in raw.items():
        if key in _SCENARIO_FIELDS:
            known[key] = _SCENARIO_FIELDS[key](value)
        else:
            extra[key] = value
    if "kind" not in known or "n_sets" not in known:
        raise ValueError(f"{path}: a scenario config needs at least kind and n_sets")
    return ScenarioSpec(**known), extra


def write_scenario_config(path, spec: ScenarioSpec, extra: dict | None = None) -> None:
    """Write a scenario spec (plus optional extra keys) as key=value text."""
    lines = []
    for key, value in asdict(spec).items():
        lines.append(f"{key}={_fmt(value)}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(path, entries: dict) -> None:
    """Write a run manifest: deterministic key=value lines, no timestamps."""
    lines = [f"{key}={_fmt(value)}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict[str, str]:
    """Read a manifest back into a string-valued dict."""
    return _parse_keyvalues(path)


def write_sim_output(out_dir, sim: SimOutput) -> None:
    """Write zmatrix.tsv and truth.tsv for a simulation."""
    out = Path(out_dir)
    write_zmatrix(out / "zmatrix.tsv", sim.z)
    write_truth(out / "truth.tsv", sim.z, sim.truth)
