import pytest

from ma_isac_lab.cli import main
from ma_isac_lab.experiments import read_csv

TINY = """
num_transmit = 2
num_receive = 2
restarts = 1
max_outer_sensing = 2
max_outer_comm = 3
estimate_trials = 1
line_points = 10
hull_grid = 3
eval_grid = 5
region_size_sweep_wavelengths = 2.0
"""


@pytest.fixture
def tiny_cfg(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY, encoding="utf-8")
    return str(path)


class TestExitCodes:
    def test_success_writes_csv(self, tiny_cfg, tmp_path):
        out = tmp_path / "out.csv"
        code = main(["region-size", "--config", tiny_cfg, "--out", str(out), "--seed", "5"])
        assert code == 0
        records = read_csv(str(out))
        assert records
        assert all(r.experiment == "region-size" for r in records)

    def test_missing_config_file(self, tmp_path):
        code = main(
            ["region-size", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o.csv")]
        )
        assert code == 1

    def test_bad_config_content(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("not_a_key = 1\n", encoding="utf-8")
        code = main(["region-size", "--config", str(path), "--out", str(tmp_path / "o.csv")])
        assert code == 1

    def test_unknown_kind_is_config_error(self, tiny_cfg, tmp_path):
        code = main(["warp-drive", "--config", tiny_cfg, "--out", str(tmp_path / "o.csv")])
        assert code == 1

    def test_missing_required_flags(self):
        assert main(["region-size"]) == 1

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "experiment kind" in capsys.readouterr().out

    def test_seed_out_of_range(self, tiny_cfg, tmp_path):
        code = main(
            ["region-size", "--config", tiny_cfg, "--out", str(tmp_path / "o.csv"),
             "--seed", str(1 << 64)]
        )
        assert code == 1

    def test_nonpositive_trials(self, tiny_cfg, tmp_path):
        code = main(
            ["region-size", "--config", tiny_cfg, "--out", str(tmp_path / "o.csv"), "--trials", "0"]
        )
        assert code == 1

    def test_runtime_failure_exits_two(self, tmp_path):
        # 4 antennas cannot honor the spacing floor inside a 0.4-wavelength box
        path = tmp_path / "cramped.cfg"
        path.write_text(
            "num_transmit = 4\nnum_receive = 4\nregion_side_wavelengths = 0.4\n"
            "restarts = 1\nmax_outer_sensing = 2\n",
            encoding="utf-8",
        )
        code = main(
            ["secrecy-vs-power", "--config", str(path), "--out", str(tmp_path / "o.csv")]
        )
        assert code == 2


class TestOverrides:
    def test_seed_flag_changes_records(self, tiny_cfg, tmp_path):
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["region-size", "--config", tiny_cfg, "--out", str(out_a), "--seed", "1"]) == 0
        assert main(["region-size", "--config", tiny_cfg, "--out", str(out_b), "--seed", "2"]) == 0
        seeds_a = {r.seed for r in read_csv(str(out_a))}
        seeds_b = {r.seed for r in read_csv(str(out_b))}
        assert seeds_a != seeds_b

    def test_same_seed_same_payload(self, tiny_cfg, tmp_path):
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (out_a, out_b):
            assert main(
                ["region-size", "--config", tiny_cfg, "--out", str(out), "--seed", "9"]
            ) == 0
        strip = lambda p: [line.rsplit(",", 1)[0] for line in p.read_text().splitlines()]
        assert strip(out_a) == strip(out_b)

    def test_threads_flag_accepted(self, tiny_cfg, tmp_path, monkeypatch):
        monkeypatch.delenv("MA_ISAC_THREADS", raising=False)
        out = tmp_path / "o.csv"
        code = main(
            ["region-size", "--config", tiny_cfg, "--out", str(out), "--threads", "2"]
        )
        assert code == 0
        assert read_csv(str(out))
