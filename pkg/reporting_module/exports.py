# reporting_module/exports.py
# Deterministic CSV / JSON writers and the run manifest.

import hashlib
import json
import logging
from pathlib import Path
from typing import Iterable

import pandas as pd

from config import APP_NAME, APP_VERSION, DIGEST_ALGORITHM, SCHEMA_VERSION
from scenario_module.scenario import ScenarioConfig, scenario_hash

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def write_csv(table: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, lineterminator="\n")
    return path


def write_json(document, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def file_digest(path: Path) -> str:
    return hashlib.new(DIGEST_ALGORITHM, Path(path).read_bytes()).hexdigest()


def _listed_files(out_dir: Path, files: Iterable[Path]) -> list[Path]:
    listed = []
    for f in files:
        f = Path(f)
        if f.is_dir():
            listed.extend(sorted(p for p in f.rglob("*") if p.is_file()))
        else:
            listed.append(f)
    return sorted({p for p in listed if p.name != MANIFEST_NAME}, key=lambda p: p.relative_to(out_dir).as_posix())


def write_manifest(out_dir, subcommand: str, cfg: ScenarioConfig, files: Iterable[Path], extra: dict | None = None) -> Path:
    """Everything needed to reproduce a run: config hash, seed, digest algorithm and
    version, plus a digest per output file. No wall-clock content."""
    out_dir = Path(out_dir)
    manifest = {
        "app": APP_NAME,
        "app_version": APP_VERSION,
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "scenario_name": cfg.name,
        "scenario_hash": scenario_hash(cfg),
        "rng_seed": cfg.rng_seed,
        "digest_algorithm": DIGEST_ALGORITHM,
        "outputs": {
            p.relative_to(out_dir).as_posix(): file_digest(p) for p in _listed_files(out_dir, files)
        },
    }
    if extra:
        manifest.update(extra)
    path = write_json(manifest, out_dir / MANIFEST_NAME)
    logger.info("✅ Manifest written to %s (%d outputs)", path, len(manifest["outputs"]))
    return path
