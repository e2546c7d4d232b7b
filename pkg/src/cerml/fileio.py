"""Plain-text persistence: feature CSVs, manifests, configs, representations and models.

Every container is line oriented. Scalars are ``key = value`` lines and
matrices are blocks introduced by ``[block name rows cols]`` followed by one
comma-separated line per row. Floats are written with 17 significant digits,
which round-trips float64 exactly.
"""
from __future__ import annotations

import dataclasses
import os
from pathlib import Path

import numpy as np

from .dataset import Dataset, SetSpec
from .errors import ValidationError
from .pipeline import ProjectionModel, TrainingData
from .representation import AffinePoint, GrassmannPoint, SetRepresentation, SpdPoint
from .solver import TrainConfig

FORMAT_VERSION = 1
FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


# ---------------------------------------------------------------------------
# features and manifests

def write_features(path, features: np.ndarray) -> None:
    np.savetxt(path, np.asarray(features, dtype=float), fmt=FLOAT_FMT, delimiter=",")


def read_features(path) -> np.ndarray:
    try:
        F = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read feature file {path}: {exc}") from exc
    return F


def parse_key_values(text: str, source: str = "<text>") -> list[tuple[str, str]]:
    """``key = value`` pairs in file order; blank lines and ``#`` comments are skipped."""
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{n}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValidationError(f"{source}:{n}: empty key")
        out.append((key, value))
    return out


def write_manifest(path, features_file: str, ds: Dataset) -> None:
    lines = ["format = cerml-manifest", f"version = {FORMAT_VERSION}", f"features = {features_file}"]
    lines += [f"set = {s.start} {s.length} {s.label} {s.role}" for s in ds.sets]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> Dataset:
    """Load a manifest and the feature file it points to (relative to the manifest)."""
    path = Path(path)
    try:
        pairs = parse_key_values(path.read_text(), str(path))
    except OSError as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
    meta, sets = {}, []
    for key, value in pairs:
        if key == "set":
            parts = value.split()
            if len(parts) != 4:
                raise ValidationError(f"{path}: set line needs 'start length label role', got {value!r}")
            try:
                sets.append(SetSpec(int(parts[0]), int(parts[1]), int(parts[2]), parts[3]))
            except ValueError as exc:
                raise ValidationError(f"{path}: bad set line {value!r}") from exc
        elif key in ("format", "version", "features"):
            meta[key] = value
        else:
            raise ValidationError(f"{path}: unknown manifest key {key!r}")
    if meta.get("format") != "cerml-manifest":
        raise ValidationError(f"{path}: not a manifest")
    _check_version(meta.get("version"), path)
    if "features" not in meta:
        raise ValidationError(f"{path}: no features entry")
    return Dataset(read_features(path.parent / meta["features"]), sets)


def _check_version(value, source) -> None:
    if value != str(FORMAT_VERSION):
        raise ValidationError(f"{source}: unsupported format version {value!r} (expected {FORMAT_VERSION})")


# ---------------------------------------------------------------------------
# configs

def _coerce(name: str, raw: str, default):
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("on", "true", "yes", "1"):
            return True
        if low in ("off", "false", "no", "0"):
            return False
        raise ValidationError(f"{name}: expected on/off, got {raw!r}")
    try:
        return type(default)(raw)
    except ValueError as exc:
        raise ValidationError(f"{name}: cannot parse {raw!r} as {type(default).__name__}") from exc


def config_from_pairs(pairs, base: TrainConfig | None = None) -> TrainConfig:
    """Apply ``(key, value)`` strings on top of ``base``; unknown keys are errors."""
    base = base or TrainConfig()
    values = dataclasses.asdict(base)
    for key, raw in pairs:
        if key not in values:
            raise ValidationError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw, getattr(TrainConfig(), key))
    return TrainConfig(**values)


def read_config(path, base: TrainConfig | None = None) -> TrainConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    return config_from_pairs(parse_key_values(text, str(path)), base)


def config_lines(config: TrainConfig, prefix: str = "") -> list[str]:
    out = []
    for k, v in dataclasses.asdict(config).items():
        if isinstance(v, bool):
            v = "on" if v else "off"
        elif isinstance(v, float):
            v = _fmt(v)
        out.append(f"{prefix}{k} = {v}")
    return out


# ---------------------------------------------------------------------------
# block container

def _block(name: str, M) -> list[str]:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return [f"[block {name} {M.shape[0]} {M.shape[1]}]"] + [",".join(map(_fmt, row)) for row in M]


def _parse_container(text: str, source: str):
    scalars, blocks = {}, {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        if line.startswith("[block "):
            parts = line.strip("[]").split()
            if len(parts) != 4:
                raise ValidationError(f"{source}: malformed block header {line!r}")
            name, r, c = parts[1], int(parts[2]), int(parts[3])
            rows = lines[i:i + r]
            if len(rows) != r:
                raise ValidationError(f"{source}: block {name} truncated")
            try:
                M = np.array([[float(t) for t in row.split(",")] for row in rows]) if r else np.zeros((0, c))
            except ValueError as exc:
                raise ValidationError(f"{source}: block {name} has non-numeric entries") from exc
            if M.shape != (r, c):
                raise ValidationError(f"{source}: block {name} is {M.shape}, header says {(r, c)}")
            blocks[name] = M
            i += r
            continue
        key, value = parse_key_values(line, source)[0]
        scalars[key] = value
    return scalars, blocks


def _sets_lines(sets) -> list[str]:
    out = [f"sets = {len(sets)}"]
    for i, s in enumerate(sets):
        v = s.variation
        out.append(f"set.{i}.label = {s.label}")
        out += _block(f"set.{i}.mean", s.mean[None, :])
        if isinstance(v, SpdPoint):
            out += _block(f"set.{i}.C", v.C) + _block(f"set.{i}.logC", v.logC)
        else:
            out += _block(f"set.{i}.U", v.U)
            if isinstance(v, AffinePoint):
                out += _block(f"set.{i}.offset", v.offset[None, :])
    return out


def _sets_from(scalars, blocks, model_type: str, source) -> list[SetRepresentation]:
    out = []
    try:
        for i in range(int(scalars["sets"])):
            mean = blocks[f"set.{i}.mean"].reshape(-1)
            if model_type == "spd":
                var = SpdPoint(blocks[f"set.{i}.C"], blocks[f"set.{i}.logC"])
            elif model_type == "affine":
                var = AffinePoint(blocks[f"set.{i}.U"], blocks[f"set.{i}.offset"].reshape(-1))
            else:
                var = GrassmannPoint(blocks[f"set.{i}.U"])
            out.append(SetRepresentation(mean, var, int(scalars[f"set.{i}.label"])))
    except KeyError as exc:
        raise ValidationError(f"{source}: missing entry {exc}") from exc
    return out


def _atomic_write(path, lines) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# representations

def save_representations(path, sets, model_type: str) -> None:
    lines = ["format = cerml-repr", f"version = {FORMAT_VERSION}", f"model_type = {model_type}"]
    _atomic_write(path, lines + _sets_lines(sets))


def load_representations(path) -> tuple[list[SetRepresentation], str]:
    scalars, blocks = _read_container(path, "cerml-repr")
    mt = scalars.get("model_type", "")
    return _sets_from(scalars, blocks, mt, path), mt


def _read_container(path, fmt: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    scalars, blocks = _parse_container(text, str(path))
    if scalars.get("format") != fmt:
        raise ValidationError(f"{path}: expected a {fmt} file")
    _check_version(scalars.get("version"), path)
    return scalars, blocks


# ---------------------------------------------------------------------------
# models

def save_model(path, model: ProjectionModel) -> None:
    lines = ["format = cerml-model", f"version = {FORMAT_VERSION}",
             f"out_dim = {model.out_dim}", f"augmented = {int(model.augmented)}",
             f"converged = {int(model.converged)}", f"fingerprint = {model.fingerprint}"]
    lines += config_lines(model.config, "config.")
    lines += [f"bandwidth.{k} = {_fmt(v)}" for k, v in sorted(model.bandwidths.items())]
    lines += _block("trace", np.asarray(model.trace)[None, :])
    for v in sorted(model.W):
        lines += _block(f"W.{v}", model.W[v])
    d = model.data
    if d.stills is not None:
        lines += _block("stills", d.stills) + _block("still_labels", d.still_labels[None, :])
    lines += _sets_lines(d.sets)
    _atomic_write(path, lines)


def load_model(path) -> ProjectionModel:
    scalars, blocks = _read_container(path, "cerml-model")
    cfg = config_from_pairs([(k[7:], v) for k, v in scalars.items() if k.startswith("config.")])
    sets = _sets_from(scalars, blocks, cfg.model_type, path)
    stills = blocks.get("stills")
    labels = blocks["still_labels"].reshape(-1).astype(int) if "still_labels" in blocks else None
    data = TrainingData(sets, stills, labels)
    try:
        W = {k[2:]: M for k, M in blocks.items() if k.startswith("W.")}
        model = ProjectionModel(
            cfg, W,
            {k[10:]: float(v) for k, v in scalars.items() if k.startswith("bandwidth.")},
            data, list(blocks["trace"].reshape(-1)), bool(int(scalars["converged"])),
            bool(int(scalars["augmented"])), int(scalars["out_dim"]))
    except KeyError as exc:
        raise ValidationError(f"{path}: missing entry {exc}") from exc
    if model.fingerprint != scalars.get("fingerprint"):
        raise ValidationError(f"{path}: stored training data does not match its fingerprint")
    return model
