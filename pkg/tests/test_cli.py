import json
import os

import numpy as np

from sqdunwrap import load_dataset
from sqdunwrap.cli import main


def run(*argv):
    return main(list(argv))


class TestGen:
    def test_identical_reruns(self, tmp_path):
        args = ["--count", "6", "--size", "32", "--seed", "1", "--stages", "2",
                "--sigma", "6,16"]
        assert run("gen", "--out", str(tmp_path / "a"), *args) == 0
        assert run("gen", "--out", str(tmp_path / "b"), *args) == 0
        for fname in ("manifest.json", "wrapped.bin", "truth.bin"):
            assert (tmp_path / "a" / fname).read_bytes() == \
                   (tmp_path / "b" / fname).read_bytes()

    def test_noise_menu_recorded(self, tmp_path):
        assert run("gen", "--out", str(tmp_path / "ds"), "--count", "12",
                   "--size", "32", "--stages", "2", "--sigma", "6,16",
                   "--noise", "0,5,10,20,60") == 0
        manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
        assert set(manifest["snr_db"]) <= {0.0, 5.0, 10.0, 20.0, 60.0}
        assert manifest["config"]["noise_menu"] == [0.0, 5.0, 10.0, 20.0, 60.0]

    def test_invalid_size_exits_one(self, tmp_path, capsys):
        assert run("gen", "--out", str(tmp_path / "ds"), "--count", "2",
                   "--size", "40", "--stages", "4") == 1
        err = capsys.readouterr().err
        assert "divisible" in err and "40" in err


class TestTrain:
    def _train_args(self, ds, out_dir, loss="lc", extra=()):
        return ["train", "--dataset", ds,
                "--checkpoint", os.path.join(out_dir, f"{loss}.ckpt"),
                "--history", os.path.join(out_dir, f"{loss}.history.json"),
                "--loss", loss, "--filters", "4,8", "--units", "2", "--fusion", "4",
                "--epochs", "1", "--batch", "4", "--train-count", "20",
                "--seed", "5", "--quiet", *extra]

    def test_writes_checkpoint_and_history(self, tiny_ds_dir, tmp_path):
        assert run(*self._train_args(tiny_ds_dir, str(tmp_path))) == 0
        assert (tmp_path / "lc.ckpt").exists()
        history = json.loads((tmp_path / "lc.history.json").read_text())
        assert history["config"]["loss"] == "lc"
        assert len(history["epochs"]) == 1

    def test_mse_and_lc_histories_distinct(self, tiny_ds_dir, tmp_path):
        assert run(*self._train_args(tiny_ds_dir, str(tmp_path), loss="lc")) == 0
        assert run(*self._train_args(tiny_ds_dir, str(tmp_path), loss="mse")) == 0
        h_lc = json.loads((tmp_path / "lc.history.json").read_text())
        h_mse = json.loads((tmp_path / "mse.history.json").read_text())
        assert h_lc["config"]["loss"] == "lc"
        assert h_mse["config"]["loss"] == "mse"
        assert h_lc["epochs"][0]["train_loss"] != h_mse["epochs"][0]["train_loss"]

    def test_no_sqd_flag_builds_ablation(self, tiny_ds_dir, tmp_path):
        assert run(*self._train_args(tiny_ds_dir, str(tmp_path), extra=("--no-sqd",))) == 0
        history = json.loads((tmp_path / "lc.history.json").read_text())
        assert history["config"]["arch"]["use_sqd"] is False
        from sqdunwrap import UnwrapNet
        net = UnwrapNet.load(tmp_path / "lc.ckpt")
        assert net.sqd is None


class TestUnwrap:
    def test_qgpu_reports_full_congruence(self, tiny_ds_dir, tmp_path, capsys):
        out = tmp_path / "phase.npy"
        assert run("unwrap", "--dataset", tiny_ds_dir, "--index", "0",
                   "--method", "qgpu", "--out", str(out)) == 0
        text = capsys.readouterr().out
        assert "congruence fraction: 1.0000" in text
        assert out.exists()
        pred = np.load(out)
        ds = load_dataset(tiny_ds_dir)
        assert pred.shape == ds[0][0].shape

    def test_model_without_checkpoint_is_user_error(self, tiny_ds_dir, tmp_path, capsys):
        assert run("unwrap", "--dataset", tiny_ds_dir, "--index", "0",
                   "--method", "model", "--out", str(tmp_path / "x.npy")) == 1
        assert "checkpoint" in capsys.readouterr().err

    def test_npy_input_and_pgm_export(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        phi = np.cumsum(rng.uniform(0, 0.8, (24, 24)), axis=1)
        wrapped = np.angle(np.exp(1j * phi)).astype(np.float32)
        np.save(tmp_path / "w.npy", wrapped)
        pgm = tmp_path / "out.pgm"
        assert run("unwrap", "--input", str(tmp_path / "w.npy"), "--method", "qgpu",
                   "--out", str(tmp_path / "out.npy"),
                   "--export-pgm", str(pgm)) == 0
        data = pgm.read_bytes()
        assert data.startswith(b"P5\n24 24\n65535\n")
        assert len(data) == len(b"P5\n24 24\n65535\n") + 24 * 24 * 2
        sidecar = json.loads((tmp_path / "out.pgm.json").read_text())
        assert sidecar["min"] < sidecar["max"]

    def test_missing_input_is_user_error(self, tmp_path, capsys):
        assert run("unwrap", "--input", str(tmp_path / "nope.npy"),
                   "--method", "qgpu", "--out", str(tmp_path / "o.npy")) == 1


class TestCompare:
    def test_identity_row_always_present(self, tiny_ds_dir, tmp_path, capsys):
        assert run("compare", "--dataset", tiny_ds_dir, "--methods", "qgpu",
                   "--out-dir", str(tmp_path / "cmp"), "--train-count", "20") == 0
        report = json.loads((tmp_path / "cmp" / "report.json").read_text())
        assert set(report["report"]["methods"]) == {"qgpu", "identity"}
        table = capsys.readouterr().out
        assert "identity" in table and "qgpu" in table

    def test_csv_schema(self, tiny_ds_dir, tmp_path):
        assert run("compare", "--dataset", tiny_ds_dir, "--methods", "qgpu,identity",
                   "--out-dir", str(tmp_path / "cmp"), "--train-count", "20") == 0
        lines = (tmp_path / "cmp" / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "snr_db,method,mean_nrmse_pct,n_images"
        assert len(lines) == 3  # one bucket ("none") x two methods
        for line in lines[1:]:
            snr, method, mean, n = line.split(",")
            assert snr == "none"
            assert method in ("qgpu", "identity")
            float(mean), int(n)

    def test_report_deterministic_across_reruns(self, tiny_noisy_ds_dir, tmp_path):
        for sub in ("r1", "r2"):
            assert run("compare", "--dataset", tiny_noisy_ds_dir,
                       "--methods", "qgpu,identity,oracle",
                       "--out-dir", str(tmp_path / sub), "--train-count", "20") == 0
        r1 = json.loads((tmp_path / "r1" / "report.json").read_text())
        r2 = json.loads((tmp_path / "r2" / "report.json").read_text())
        assert r1["report"] == r2["report"]
        assert r1["report_hash"] == r2["report_hash"]
        assert (tmp_path / "r1" / "sweep.csv").read_bytes() == \
               (tmp_path / "r2" / "sweep.csv").read_bytes()

    def test_model_method_with_checkpoint(self, tiny_ds_dir, tmp_path):
        assert run("train", "--dataset", tiny_ds_dir,
                   "--checkpoint", str(tmp_path / "m.ckpt"),
                   "--history", str(tmp_path / "h.json"),
                   "--filters", "4,8", "--units", "2", "--fusion", "4",
                   "--epochs", "1", "--batch", "4", "--train-count", "20",
                   "--seed", "5", "--quiet") == 0
        assert run("compare", "--dataset", tiny_ds_dir, "--methods", "model,qgpu",
                   "--checkpoint", str(tmp_path / "m.ckpt"),
                   "--out-dir", str(tmp_path / "cmp"), "--train-count", "20") == 0
        report = json.loads((tmp_path / "cmp" / "report.json").read_text())
        assert report["report"]["seed"] == 5  # split seed taken from the checkpoint
        assert "model" in report["report"]["methods"]
        hashes = report["report"]["artifact_hashes"]
        assert hashes["checkpoint"] is not None
        assert len(hashes["code_version"]) == 64

    def test_model_without_checkpoint_is_user_error(self, tiny_ds_dir, tmp_path, capsys):
        assert run("compare", "--dataset", tiny_ds_dir, "--methods", "model",
                   "--out-dir", str(tmp_path / "cmp")) == 1


class TestExitCodes:
    def test_internal_error_exits_two(self, tiny_ds_dir, tmp_path, monkeypatch, capsys):
        import sqdunwrap.cli as cli_mod

        def boom(args):
            raise RuntimeError("synthetic internal failure")

        monkeypatch.setitem(cli_mod.__dict__, "cmd_gen", boom)
        parser_default = cli_mod.build_parser()
        # rebuild dispatch through main: monkeypatch the handler lookup
        monkeypatch.setattr(cli_mod, "build_parser", lambda: _patched(parser_default, boom))
        assert cli_mod.main(["gen", "--out", str(tmp_path / "x")]) == 2
        assert "synthetic internal failure" in capsys.readouterr().err


def _patched(parser, handler):
    for action in parser._subparsers._group_actions[0].choices.values():
        action.set_defaults(func=handler)
    return parser
