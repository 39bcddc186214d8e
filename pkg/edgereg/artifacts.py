"""On-disk formats: problem directories, images, run manifests."""
from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from edgereg import sparse
from edgereg.errors import EdgeRegError, ProblemFormatError
from edgereg.problems import Problem, to_image

log = logging.getLogger(__name__)

PGM_MAXVAL = 65535
_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")
PROBLEM_FILES = {
    "A": "A.mtx",
    "b": "b.raw",
    "b_true": "b_true.raw",
    "x_true": "x_true.raw",
    "descriptor": "problem.json",
}


def _atomic_write(path: Path, content: str):
    """Write content to a file atomically using tempfile + os.replace."""
    fd, tmp_path = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(content)
        os.replace(tmp_path, str(path))
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise


def write_json(path: str | Path, data: dict) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ProblemFormatError(f"missing file {path}") from None
    except json.JSONDecodeError as e:
        raise ProblemFormatError(f"{path} is not valid JSON: {e}") from e


# ── Images and vectors ───────────────────────────────────────

def write_pgm(path: str | Path, x, n_v: int, n_h: int | None = None) -> dict:
    """Binary 16-bit PGM, min-max scaled. Returns the scaling used."""
    path = Path(path)
    img = to_image(x, n_v, n_h)
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo
    scaled = np.zeros(img.shape) if span == 0.0 else (img - lo) / span
    pixels = np.round(scaled * PGM_MAXVAL).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii"))
        f.write(pixels.tobytes(order="C"))
    return {"min": lo, "max": hi}


def read_pgm(path: str | Path) -> np.ndarray:
    """Pixel values of a 16-bit P5 file as an (height, width) integer array."""
    data = Path(path).read_bytes()
    header = _PGM_HEADER.match(data)
    if header is None:
        raise ProblemFormatError(f"{path} is not a binary PGM file")
    width, height, maxval = (int(g) for g in header.groups())
    dtype = ">u2" if maxval > 255 else "u1"
    pixels = np.frombuffer(data, dtype=dtype, count=width * height, offset=header.end())
    return pixels.reshape(height, width)


def write_raw(path: str | Path, x, shape: tuple[int, ...] | None = None, **meta) -> Path:
    """Little-endian float64 dump plus ``<path>.json`` describing it."""
    path = Path(path)
    x = sparse.as_vector(x, name=path.name)
    x.astype("<f8").tofile(path)
    sidecar = {
        "dtype": "float64",
        "byteorder": "little",
        "length": int(x.size),
        "shape": list(shape) if shape is not None else [int(x.size)],
        "order": "F",
        **meta,
    }
    write_json(path.with_name(path.name + ".json"), sidecar)
    return path


def read_raw(path: str | Path):
    """Inverse of :func:`write_raw`; returns (vector, sidecar dict)."""
    path = Path(path)
    if not path.exists():
        raise ProblemFormatError(f"missing file {path}")
    meta = read_json(path.with_name(path.name + ".json"))
    x = np.fromfile(path, dtype="<f8").astype(np.float64)
    if x.size != meta.get("length", x.size):
        raise ProblemFormatError(f"{path} holds {x.size} values, sidecar says {meta['length']}")
    return x, meta


def write_image(out_dir: Path, stem: str, x, shape: tuple[int, int]) -> dict[str, str]:
    """PGM preview plus full-precision raw dump; returns the artifact paths."""
    scaling = write_pgm(out_dir / f"{stem}.pgm", x, *shape)
    write_raw(out_dir / f"{stem}.raw", x, shape=shape, scaling=scaling)
    return {f"{stem}_pgm": f"{stem}.pgm", f"{stem}_raw": f"{stem}.raw"}


# ── Problem directories ──────────────────────────────────────

def write_problem(out_dir: str | Path, problem: Problem) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    comment = json.dumps(problem.descriptor, sort_keys=True)
    sparse.write_matrix_market(out_dir / PROBLEM_FILES["A"], problem.A, comment=comment)
    write_raw(out_dir / PROBLEM_FILES["b"], problem.b)
    if problem.b_true is not None:
        write_raw(out_dir / PROBLEM_FILES["b_true"], problem.b_true)
    if problem.x_true is not None:
        write_raw(out_dir / PROBLEM_FILES["x_true"], problem.x_true, shape=problem.shape)
    write_json(out_dir / PROBLEM_FILES["descriptor"],
               {**problem.descriptor, "shape": list(problem.shape)})
    log.info("Wrote problem to %s", out_dir)
    return out_dir


def load_problem(problem_dir: str | Path) -> Problem:
    problem_dir = Path(problem_dir)
    if not problem_dir.is_dir():
        raise ProblemFormatError(f"{problem_dir} is not a directory")
    descriptor = read_json(problem_dir / PROBLEM_FILES["descriptor"])
    if not isinstance(descriptor, dict):
        raise ProblemFormatError(
            f"{problem_dir}: problem.json must hold an object, got {type(descriptor).__name__}")
    try:
        shape = tuple(int(s) for s in descriptor.pop("shape"))
    except (KeyError, TypeError, ValueError):
        raise ProblemFormatError(f"{problem_dir}: problem.json has no valid 'shape'") from None
    if len(shape) != 2:
        raise ProblemFormatError(f"{problem_dir}: shape must have two entries, got {shape}")

    a_path = problem_dir / PROBLEM_FILES["A"]
    if not a_path.exists():
        raise ProblemFormatError(f"missing file {a_path}")
    try:
        A = sparse.read_matrix_market(a_path)
    except ValueError as e:
        raise ProblemFormatError(f"{a_path}: {e}") from e
    b, _ = read_raw(problem_dir / PROBLEM_FILES["b"])
    optional = {}
    for key in ("b_true", "x_true"):
        path = problem_dir / PROBLEM_FILES[key]
        optional[key] = read_raw(path)[0] if path.exists() else None

    if A.shape[0] != b.size:
        raise ProblemFormatError(f"A has {A.shape[0]} rows but b has {b.size} entries")
    if A.shape[1] != shape[0] * shape[1]:
        raise ProblemFormatError(f"A has {A.shape[1]} columns, image shape is {shape}")
    return Problem(A=A, b=b, x_true=optional["x_true"], shape=shape,
                   b_true=optional["b_true"], descriptor=descriptor)


# ── Run manifest ─────────────────────────────────────────────

@dataclass
class RunManifest:
    config: dict
    problem: dict
    outer: list[dict] = field(default_factory=list)
    stop_reason: str = ""
    total_inner_iterations: int = 0
    artifacts: dict[str, str] = field(default_factory=dict)
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RunManifest:
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


def write_manifest(run_dir: str | Path, manifest: RunManifest) -> Path:
    """Write ``manifest.json``; every listed artifact must already exist."""
    run_dir = Path(run_dir)
    missing = [name for name in manifest.artifacts.values() if not (run_dir / name).exists()]
    if missing:
        raise EdgeRegError(f"manifest references missing files: {', '.join(missing)}")
    return write_json(run_dir / "manifest.json", manifest.to_dict())
