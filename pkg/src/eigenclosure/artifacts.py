"""Reading and writing run artifacts: delimited tables, chains and the run manifest."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .sampler import Chain

__all__ = [
    "sha256_file",
    "write_table",
    "read_table",
    "write_matrix",
    "read_matrix",
    "write_chain",
    "read_chain",
    "write_json",
    "read_json",
    "Manifest",
]

MANIFEST = "manifest.json"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_matrix(path, matrix):
    """Headerless comma-separated matrix at full double precision."""
    np.savetxt(path, np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")


def read_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def write_chain(path, chain: Chain):
    """Full chain, burn-in included, with a ``log_post`` column; metadata beside it."""
    path = Path(path)
    header = ",".join(list(chain.names) + ["log_post"])
    np.savetxt(path, np.column_stack([chain.samples, chain.log_post]), delimiter=",",
               fmt="%.17g", header=header, comments="")
    meta = {
        "burn_in": chain.burn_in,
        "n_steps": chain.n_steps,
        "accepted_first": chain.accepted_first,
        "accepted_second": chain.accepted_second,
        "n_second": chain.n_second,
        "n_failed": chain.n_failed,
        "acceptance_rate": chain.acceptance_rate,
        "first_stage_acceptance": chain.first_stage_acceptance,
        "n_adaptations": len(chain.adaptations),
    }
    write_json(path.with_suffix(".json"), meta)


def read_chain(path) -> Chain:
    path = Path(path)
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    if names[-1] != "log_post":
        raise ValueError(f"{path}: last column must be log_post")
    data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    meta = read_json(path.with_suffix(".json"))
    return Chain(data[:, :-1], data[:, -1], int(meta["burn_in"]), names[:-1],
                 int(meta["accepted_first"]), int(meta["accepted_second"]),
                 int(meta["n_second"]), int(meta["n_failed"]))


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_json(path, data):
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


class Manifest:
    """``manifest.json`` in a run directory: config, seeds, stage records, checksums.

    Only numeric artifacts (CSV and JSON) enter ``numeric_hash``; figures are
    listed without checksums because renderers may embed version strings.
    """

    def __init__(self, root):
        self.root = Path(root)
        path = self.root / MANIFEST
        self.data = read_json(path) if path.exists() else {
            "config": None, "seeds": {}, "stages": {}, "artifacts": {}, "figures": []}

    def set_config(self, config: dict):
        self.data["config"] = config

    def record_seed(self, name: str, seed: int):
        self.data["seeds"][name] = int(seed)

    def record_stage(self, name: str, info: dict):
        self.data["stages"][name] = _jsonable(info)

    def add_artifact(self, path):
        rel = Path(path).resolve().relative_to(self.root.resolve()).as_posix()
        self.data["artifacts"][rel] = sha256_file(path)

    def add_figure(self, path):
        rel = Path(path).resolve().relative_to(self.root.resolve()).as_posix()
        if rel not in self.data["figures"]:
            self.data["figures"].append(rel)
            self.data["figures"].sort()

    @property
    def numeric_hash(self) -> str:
        digest = hashlib.sha256()
        for rel in sorted(self.data["artifacts"]):
            digest.update(f"{rel}:{self.data['artifacts'][rel]}\n".encode())
        return digest.hexdigest()

    def verify(self) -> list[str]:
        """Relative paths whose current checksum differs from the recorded one."""
        bad = []
        for rel, digest in self.data["artifacts"].items():
            path = self.root / rel
            if not path.exists() or sha256_file(path) != digest:
                bad.append(rel)
        return bad

    def save(self):
        self.data["numeric_hash"] = self.numeric_hash
        self.root.mkdir(parents=True, exist_ok=True)
        write_json(self.root / MANIFEST, self.data)
