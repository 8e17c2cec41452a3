# tests/test_exports.py
import json

import pandas as pd
import pytest

from reporting_module.exports import file_digest, write_csv, write_json, write_manifest
from scenario_module.units import gas_to_ether, kmh_to_ms, ms_to_kmh
from utilities_module.blob_utils import blob_path, download_from_blob_storage, upload_to_blob_storage


def test_manifest_lists_every_output_with_its_digest(tmp_path, small_cfg):
    # ARRANGE
    csv_path = write_csv(pd.DataFrame({"t": [900.0], "grams": [12.5]}), tmp_path / "samples.csv")
    json_path = write_json({"b": 1, "a": 2}, tmp_path / "nested" / "summary.json")

    # ACT
    manifest_path = write_manifest(tmp_path, "run", small_cfg, [csv_path, tmp_path / "nested"])
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    # ASSERT
    assert manifest["outputs"] == {
        "nested/summary.json": file_digest(json_path),
        "samples.csv": file_digest(csv_path),
    }
    assert manifest["subcommand"] == "run"
    assert json_path.read_text(encoding="utf-8").index('"a"') < json_path.read_text(encoding="utf-8").index('"b"')


def test_blob_storage_is_content_addressed(tmp_path):
    # ACT
    path, digest = upload_to_blob_storage(tmp_path, "payloads", b"payload", "bin")
    again, same = upload_to_blob_storage(tmp_path, "payloads", b"payload", "bin")

    # ASSERT
    assert path == again and digest == same
    assert path == blob_path(tmp_path, "payloads", digest, "bin")
    assert download_from_blob_storage(tmp_path, "payloads", digest, "bin") == b"payload"
    with pytest.raises(FileNotFoundError):
        download_from_blob_storage(tmp_path, "payloads", "ab" * 32, "bin")


def test_unit_helpers():
    assert ms_to_kmh(kmh_to_ms(72.0)) == pytest.approx(72.0)
    assert gas_to_ether(1_000_000_000, 1.0) == pytest.approx(1.0)
