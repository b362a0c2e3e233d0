import json

import numpy as np
import pytest

from tradescope.cli import main
from tradescope.raster import Raster, load_raster, save_raster


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("clicorpus")
    assert main(["make-corpus", "--out", str(root), "--size", "48", "--seed", "3"]) == 0
    return root


class TestMakeCorpus:
    def test_writes_crops_and_manifest(self, cli_corpus):
        assert (cli_corpus / "manifest.csv").exists()
        assert len(list(cli_corpus.glob("*.png"))) == 25


class TestDegrade:
    def _args(self, src, dst, seed="5"):
        return [
            "degrade", "--in", str(src), "--out", str(dst),
            "--grd", "1.9", "--snr50", "40", "--gsd-product", "1.2", "--seed", seed,
        ]

    def test_runs_and_writes_sidecar(self, cli_corpus, tmp_path):
        src = cli_corpus / "urban_1.png"
        dst = tmp_path / "degraded.png"
        assert main(self._args(src, dst)) == 0
        assert dst.exists()
        stages = json.loads(dst.with_suffix(".stages.json").read_text())
        assert [s["stage"] for s in stages] == [
            "blur", "resample_sensor", "poisson", "normalize", "resample_product"
        ]
        out = load_raster(dst)
        assert out.data.shape == (24, 24, 3)

    def test_byte_identical_reruns(self, cli_corpus, tmp_path):
        src = cli_corpus / "forest_1.png"
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert main(self._args(src, a)) == 0
        assert main(self._args(src, b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_output(self, cli_corpus, tmp_path):
        src = cli_corpus / "forest_1.png"
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert main(self._args(src, a, seed="5")) == 0
        assert main(self._args(src, b, seed="6")) == 0
        assert a.read_bytes() != b.read_bytes()

    def test_missing_required_flag_exits_1(self, cli_corpus, tmp_path, capsys):
        code = main([
            "degrade", "--in", str(cli_corpus / "urban_1.png"),
            "--out", str(tmp_path / "x.png"), "--grd", "1.9", "--gsd-product", "1.2",
        ])
        assert code == 1
        assert "snr50" in capsys.readouterr().err

    def test_unreadable_input_exits_2(self, tmp_path):
        code = main(self._args(tmp_path / "absent.png", tmp_path / "x.png"))
        assert code == 2

    def test_unresolvable_grd_exits_3(self, cli_corpus, tmp_path):
        code = main([
            "degrade", "--in", str(cli_corpus / "urban_1.png"),
            "--out", str(tmp_path / "x.png"),
            "--grd", "0.9", "--snr50", "40", "--gsd-product", "1.2",
        ])
        assert code == 3


class TestUpscale:
    def test_bicubic(self, cli_corpus, tmp_path):
        dst = tmp_path / "up.png"
        code = main([
            "upscale", "--in", str(cli_corpus / "rural_1.png"), "--out", str(dst),
            "--backend", "bicubic", "--scale", "2", "--gsd", "1.2",
        ])
        assert code == 0
        assert load_raster(dst).data.shape == (96, 96, 3)

    def test_unknown_backend_exits_4(self, cli_corpus, tmp_path):
        code = main([
            "upscale", "--in", str(cli_corpus / "rural_1.png"),
            "--out", str(tmp_path / "x.png"), "--backend", "psychic", "--scale", "2",
        ])
        assert code == 4

    def test_external_without_adapter_exits_1(self, cli_corpus, tmp_path):
        code = main([
            "upscale", "--in", str(cli_corpus / "rural_1.png"),
            "--out", str(tmp_path / "x.png"), "--backend", "external", "--scale", "2",
        ])
        assert code == 1

    def test_bad_param_syntax_exits_1(self, cli_corpus, tmp_path):
        code = main([
            "upscale", "--in", str(cli_corpus / "rural_1.png"),
            "--out", str(tmp_path / "x.png"), "--scale", "2", "--param", "oops",
        ])
        assert code == 1


class TestEvaluate:
    def test_identical_images(self, cli_corpus, capsys):
        src = str(cli_corpus / "beach_1.png")
        assert main(["evaluate", "--reference", src, "--candidate", src]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "mse,psnr_db,ssim_global,ssim_win11"
        mse, psnr, ssim_g, ssim_w = out[1].split(",")
        assert mse == "0" and psnr == "inf" and ssim_g == "1"

    def test_append_csv(self, cli_corpus, tmp_path):
        src = str(cli_corpus / "beach_1.png")
        csv_path = tmp_path / "m.csv"
        for _ in range(2):
            assert main([
                "evaluate", "--reference", src, "--candidate", src,
                "--append-to", str(csv_path),
            ]) == 0
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 3  # one header, two rows

    def test_missing_candidate_exits_2(self, cli_corpus, tmp_path):
        code = main([
            "evaluate", "--reference", str(cli_corpus / "beach_1.png"),
            "--candidate", str(tmp_path / "absent.png"),
        ])
        assert code == 2


@pytest.fixture(scope="module")
def records_csv(cli_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("sweepout") / "records.csv"
    code = main([
        "sweep", "--manifest", str(cli_corpus / "manifest.csv"),
        "--gsd-values", "1.2,2.4", "--grd-values", "1.55,2.6",
        "--snr50-values", "10,100", "--out", str(out),
    ])
    assert code == 0
    return out


class TestSweepAndReport:
    def test_sweep_wrote_full_grid(self, records_csv):
        lines = records_csv.read_text().splitlines()
        assert len(lines) == 1 + 25 * 8  # 25 crops x 2x2x2 grid

    def test_config_file_with_flag_override(self, cli_corpus, tmp_path, records_csv):
        config = tmp_path / "sweep.yaml"
        config.write_text(
            "manifest: {m}\ngsd_values: [1.2, 2.4]\ngrd_values: [1.55, 2.6]\n"
            "snr50_values: '10,50'\nseed: 0\n".format(m=cli_corpus / "manifest.csv")
        )
        out = tmp_path / "records.csv"
        code = main([
            "sweep", "--config", str(config), "--snr50-values", "10,100",
            "--out", str(out),
        ])
        assert code == 0
        assert out.read_bytes() == records_csv.read_bytes()

    def test_report_box(self, records_csv, capsys):
        assert main(["report", "--records", str(records_csv), "--figure", "box"]) == 0
        out = capsys.readouterr().out
        assert "median=" in out and "urban" in out

    def test_report_heatmap_with_export(self, records_csv, tmp_path, capsys):
        dst = tmp_path / "heat.csv"
        code = main([
            "report", "--records", str(records_csv), "--figure", "heatmap",
            "--snr50", "10", "--out", str(dst),
        ])
        assert code == 0
        assert "gsd\\grd" in capsys.readouterr().out
        assert dst.read_text().startswith("gsd_product,grd,snr50,median_ssim_global")

    def test_report_crops(self, records_csv, capsys):
        assert main(["report", "--records", str(records_csv), "--figure", "crops"]) == 0
        assert "crop_id" in capsys.readouterr().out

    def test_report_on_all_failed_exits_1(self, tmp_path):
        from tradescope import sweep as sw

        record = sw.RunRecord(
            geography="urban", crop_id=1,
            point=sw.TradeSpacePoint(gsd=1.2, grd=1.2, snr50=50.0),
            scale=None, backend="bicubic", mse=None, psnr_db=None,
            ssim_global=None, ssim_win11=None, status="failed: q", seed=0,
        )
        path = tmp_path / "records.csv"
        sw.export_records_csv([record], path)
        assert main(["report", "--records", str(path)]) == 1

    def test_all_points_failing_exits_3(self, cli_corpus, tmp_path):
        code = main([
            "sweep", "--manifest", str(cli_corpus / "manifest.csv"),
            "--gsd-values", "1.2", "--grd-values", "1.0", "--snr50-values", "50",
            "--out", str(tmp_path / "records.csv"),
        ])
        assert code == 3

    def test_unknown_command_exits_1(self):
        assert main(["transmogrify"]) == 1
