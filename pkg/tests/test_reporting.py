import json

import numpy as np
import pytest

from sqdunwrap import InvalidInputError
from sqdunwrap.reporting import (assemble_report, canonical_json, code_version_hash,
                                 sha256_of, sweep_csv, text_table, write_pgm16)


def _fake_results():
    return {
        "qgpu": {"report": {"method": "qgpu", "mean_nrmse_pct": 1.5,
                            "median_nrmse_pct": 1.2, "congruence_fraction_mean": 1.0,
                            "per_snr": {"none": {"mean_nrmse_pct": 1.5, "n_images": 4}}},
                 "timing": {"mean_s_per_image": 0.1, "total_s": 0.4}},
        "identity": {"report": {"method": "identity", "mean_nrmse_pct": 30.0,
                                "median_nrmse_pct": 29.0, "congruence_fraction_mean": 1.0,
                                "per_snr": {"none": {"mean_nrmse_pct": 30.0, "n_images": 4}}},
                     "timing": {"mean_s_per_image": 0.0, "total_s": 0.0}},
    }


class TestReport:
    def test_hash_covers_only_deterministic_part(self):
        results = _fake_results()
        doc1 = assemble_report(results, dataset_path="ds", split="test", seed=0,
                               congruence_tol=1e-3, config_echo={}, artifact_hashes={})
        results["qgpu"]["timing"]["total_s"] = 99.0  # timing change: same hash
        doc2 = assemble_report(results, dataset_path="ds", split="test", seed=0,
                               congruence_tol=1e-3, config_echo={}, artifact_hashes={})
        assert doc1["report_hash"] == doc2["report_hash"]
        assert doc1["report_hash"] == sha256_of(canonical_json(doc1["report"]).encode())

    def test_hash_changes_with_content(self):
        results = _fake_results()
        doc1 = assemble_report(results, dataset_path="ds", split="test", seed=0,
                               congruence_tol=1e-3, config_echo={}, artifact_hashes={})
        results["qgpu"]["report"]["mean_nrmse_pct"] = 2.0
        doc2 = assemble_report(results, dataset_path="ds", split="test", seed=0,
                               congruence_tol=1e-3, config_echo={}, artifact_hashes={})
        assert doc1["report_hash"] != doc2["report_hash"]

    def test_sweep_csv_schema_and_order(self):
        csv = sweep_csv(_fake_results())
        lines = csv.strip().splitlines()
        assert lines[0] == "snr_db,method,mean_nrmse_pct,n_images"
        assert all(line.split(",")[0] == "none" for line in lines[1:])

    def test_text_table_lists_all_methods(self):
        table = text_table(_fake_results())
        assert "qgpu" in table and "identity" in table
        assert "mean NRMSE %" in table

    def test_code_version_hash_stable(self):
        assert code_version_hash() == code_version_hash()
        assert len(code_version_hash()) == 64


class TestPgm:
    def test_header_payload_and_sidecar(self, tmp_path):
        img = np.linspace(-3.0, 5.0, 12 * 8).reshape(12, 8)
        path = tmp_path / "img.pgm"
        write_pgm16(path, img)
        data = path.read_bytes()
        assert data.startswith(b"P5\n8 12\n65535\n")
        payload = np.frombuffer(data[len(b"P5\n8 12\n65535\n"):], dtype=">u2")
        assert payload.size == 96
        assert payload.min() == 0 and payload.max() == 65535
        sidecar = json.loads((tmp_path / "img.pgm.json").read_text())
        assert sidecar["min"] == -3.0 and sidecar["max"] == 5.0

    def test_constant_image_maps_to_zero(self, tmp_path):
        path = tmp_path / "c.pgm"
        write_pgm16(path, np.full((4, 4), 2.0))
        payload = np.frombuffer(path.read_bytes().split(b"65535\n", 1)[1], dtype=">u2")
        assert (payload == 0).all()

    def test_non_2d_rejected(self, tmp_path):
        with pytest.raises(InvalidInputError):
            write_pgm16(tmp_path / "x.pgm", np.zeros((2, 2, 2)))
