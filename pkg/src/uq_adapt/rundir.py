"""Run-directory layout: manifest with per-file checksums, per-level CSV artifacts, evaluation journal."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from pathlib import Path

import numpy as np

MANIFEST = "manifest.json"
JOURNAL = "journal.csv"
FORMAT = "uq-adapt-run/1"


class RunDirectoryError(RuntimeError):
    """Corrupt, partial or incompatible run directory."""


def fmt(v) -> str:
    return "nan" if v is None else "%.17g" % v


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(r if isinstance(r, str) else fmt(r) for r in row))
    return "\n".join(lines) + "\n"


def read_csv(text: str):
    """Return (header, rows as list of string lists)."""
    lines = [ln for ln in text.splitlines() if ln]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def csv_matrix(text: str, skip: int = 0) -> np.ndarray:
    header, rows = read_csv(text)
    if not rows:
        return np.empty((0, len(header) - skip))
    return np.array([[float(v) for v in r[skip:]] for r in rows])


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class RunDirectory:
    def __init__(self, path):
        self.path = Path(path)

    @property
    def manifest_path(self) -> Path:
        return self.path / MANIFEST

    def exists(self) -> bool:
        return self.manifest_path.exists()

    def level_dir(self, level: int) -> Path:
        return self.path / f"level_{level}"

    # -- writing -----------------------------------------------------------

    def write_level(self, level: int, files: dict[str, str]):
        """Write a completed level atomically (temp directory + rename)."""
        self.path.mkdir(parents=True, exist_ok=True)
        final = self.level_dir(level)
        tmp = self.path / f".level_{level}.partial"
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir()
        for name, text in files.items():
            with open(tmp / name, "w") as fh:
                fh.write(text)
        if final.exists():
            shutil.rmtree(final)
        os.replace(tmp, final)

    def write_manifest(self, manifest: dict):
        self.path.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.manifest_path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    def write_journal(self, text: str):
        self.path.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.path / JOURNAL, text)

    def append_journal(self, line: str, header: str):
        self.path.mkdir(parents=True, exist_ok=True)
        jp = self.path / JOURNAL
        new = not jp.exists()
        with open(jp, "a") as fh:
            if new:
                fh.write(header + "\n")
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def write_file(self, name: str, text: str):
        self.path.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.path / name, text)

    # -- reading -----------------------------------------------------------

    def read_manifest(self) -> dict:
        try:
            with open(self.manifest_path) as fh:
                manifest = json.load(fh)
        except FileNotFoundError:
            raise RunDirectoryError(f"no {MANIFEST} in {self.path}") from None
        except json.JSONDecodeError as exc:
            raise RunDirectoryError(f"corrupt manifest: {exc}") from None
        if manifest.get("format") != FORMAT:
            raise RunDirectoryError(f"unsupported run-directory format {manifest.get('format')!r}")
        return manifest

    def read_level(self, level: int, checksums: dict[str, str]) -> dict[str, str]:
        d = self.level_dir(level)
        files = {}
        for name, digest in checksums.items():
            try:
                text = (d / name).read_text()
            except FileNotFoundError:
                raise RunDirectoryError(f"level {level}: missing {name}") from None
            if sha256(text) != digest:
                raise RunDirectoryError(f"level {level}: checksum mismatch for {name}")
            files[name] = text
        return files

    def read_journal(self) -> str | None:
        jp = self.path / JOURNAL
        return jp.read_text() if jp.exists() else None

    def discard_incomplete(self, complete: set[int]):
        """Remove level directories that the manifest does not list as complete."""
        if not self.path.exists():
            return
        for p in self.path.iterdir():
            if p.is_dir() and (p.name.startswith(".level_") or p.name.startswith("level_")):
                try:
                    lvl = int(p.name.split("_")[1].split(".")[0])
                except ValueError:
                    continue
                if p.name.startswith(".") or lvl not in complete:
                    shutil.rmtree(p)
