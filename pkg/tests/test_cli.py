import json
import math

import numpy as np
import pytest

from entb92 import __version__
from entb92.cli import main
from entb92.optimize import rate_surface
from entb92.records import SCHEMA, manifest_path, read_csv, read_json, sha256


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rerun_manifest(path, out):
    """Replay a sidecar manifest into a new output file."""
    argv = json.loads(path.read_text())["argv"]
    i = argv.index("--out")
    argv = argv[:i + 1] + [str(out)] + argv[i + 2:]
    assert main(argv) == 0


class TestSweep:
    def test_fig1_schema_and_argmax(self, tmp_path):
        out = tmp_path / "fig1.csv"
        assert main(["sweep", "--figure", "1", "--grid", "0.1deg", "--out", str(out)]) == 0
        cols = read_csv(out)
        assert list(cols) == ["theta_deg", "phi_opt_deg", "r_entB92", "r_maxviol", "r_optimized"]
        assert len(cols["theta_deg"]) == 900
        i = int(np.argmax(cols["r_entB92"]))
        assert cols["theta_deg"][i] == pytest.approx(65.28, abs=0.1)  # 0.05 plus the grid resolution
        assert np.all(np.array(cols["r_optimized"]) >= np.array(cols["r_entB92"]) - 1e-12)

    def test_csv_values_are_bit_exact(self, tmp_path):
        out = tmp_path / "fig1.csv"
        main(["sweep", "--figure", "1", "--grid", "15", "--out", str(out)])
        cols = read_csv(out)
        for d, r in zip(cols["theta_deg"], cols["r_entB92"]):
            t = math.radians(d)
            assert r == rate_surface(t, t, 1.0, 1.0)

    def test_manifest_checksum_and_replay(self, tmp_path):
        out = tmp_path / "fig3.csv"
        assert main(["sweep", "--figure", "3", "--grid", "1", "--out", str(out)]) == 0
        man = read_json(manifest_path(out))
        assert man["sha256"] == sha256(out.read_text())
        assert man["version"] == __version__
        assert man["command"] == "sweep" and man["parameters"]["grid"] == 1.0
        again = tmp_path / "again.csv"
        rerun_manifest(manifest_path(out), again)
        assert again.read_bytes() == out.read_bytes()

    def test_fig3_noise_below_pure(self, tmp_path):
        out = tmp_path / "fig3.csv"
        main(["sweep", "--figure", "3", "--grid", "1", "--out", str(out)])
        cols = read_csv(out)
        for rule in ("entB92", "maxviol"):
            assert np.all(np.array(cols[f"s_ch_{rule}_noisy"]) <= np.array(cols[f"s_ch_{rule}_pure"]))

    def test_fig5_mes_row(self, tmp_path):
        out = tmp_path / "fig5.csv"
        main(["sweep", "--figure", "5", "--grid", "1", "--out", str(out)])
        cols = read_csv(out)
        i = cols["phi_rule"].index("MES")
        assert cols["theta_deg"][i] == 90.0 and cols["phi_deg"][i] == 45.0
        assert cols["eta_th_pure"][i] == pytest.approx(0.82843, abs=1e-5)
        assert cols["eta_th_b_pure"][i] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        # theta = phi = 90 deg only reaches S_CH = 0 at unit efficiency
        j = [k for k, (t, r) in enumerate(zip(cols["theta_deg"], cols["phi_rule"])) if t == 90.0 and r == "entB92"][0]
        assert cols["eta_th_pure"][j] == 1.0 and isinstance(cols["eta_th_pure"][j], float)
        assert math.isnan(cols["eta_th_noisy"][j])

    def test_fig4_small(self, tmp_path):
        out = tmp_path / "fig4.csv"
        assert main(["sweep", "--figure", "4", "--grid", "0.25", "--n", "20000", "--out", str(out)]) == 0
        cols = read_csv(out)
        assert cols["eta"] == [0.5, 0.75, 1.0]
        for mode in ("fulldi", "1sdi"):
            for nz in ("pure", "noisy"):
                g = np.array(cols[f"r_{mode}_generalized_{nz}"])
                e = np.array(cols[f"r_{mode}_entB92_{nz}"])
                assert np.all(g >= e - 1e-12)

    def test_json_format(self, capsys):
        code, out, _ = run(capsys, "sweep", "--figure", "5", "--grid", "30", "--format", "json")
        data = json.loads(out)
        assert code == 0 and data["schema"] == SCHEMA
        assert data["columns"][0] == "theta_deg"
        assert data["manifest"]["parameters"]["figure"] == "5"

    def test_unknown_figure(self, capsys):
        code, _, err = run(capsys, "sweep", "--figure", "2")
        assert code == 2 and "invalid choice" in err

    def test_bad_grid(self, capsys):
        assert run(capsys, "sweep", "--figure", "1", "--grid", "-1")[0] == 2

    def test_unwritable_output(self, tmp_path, capsys):
        code, _, err = run(capsys, "sweep", "--figure", "5", "--grid", "30", "--out", str(tmp_path / "no" / "x.csv"))
        assert code == 2 and "cannot write" in err


class TestOptimize:
    def test_best_theta(self, capsys):
        code, out, _ = run(capsys, "optimize", "--mode", "best-theta")
        res = json.loads(out)["result"]
        assert code == 0 and res["best_theta_deg"] == pytest.approx(65.28, abs=0.05)

    def test_sdi(self, capsys):
        res = json.loads(run(capsys, "optimize", "--mode", "sdi-threshold")[1])["result"]
        assert res["threshold"] == pytest.approx(0.5, abs=1e-4)
        assert set(res) >= {"threshold", "theta", "phi", "achieved_rate_above", "iterations", "converged"}

    def test_crossover_reported(self, capsys):
        res = json.loads(run(capsys, "optimize", "--mode", "crossover")[1])["result"]
        assert 60 < res["theta_deg"] < 80

    def test_csv_output(self, capsys):
        code, out, _ = run(capsys, "optimize", "--mode", "best-theta", "--format", "csv")
        assert code == 0 and out.splitlines()[0].startswith("best_theta")

    def test_invalid_mode(self, capsys):
        assert run(capsys, "optimize", "--mode", "fastest")[0] == 2


class TestSimulate:
    ARGS = ("simulate", "--theta", "90", "--phi", "45", "--eta", "1", "--n", "1000000", "--seed", "7")

    def test_mes_z_score(self, capsys):
        code, out, _ = run(capsys, *self.ARGS)
        data = json.loads(out)
        s = {row["name"]: row for row in data["statistics"]}["s_ch_direct"]
        assert code == 0
        assert s["expected"] == pytest.approx(0.20711, abs=1e-5)
        assert abs(s["z"]) <= 4
        assert data["manifest"]["seed"] == 7

    def test_repeatable_bytes(self, capsys):
        assert run(capsys, *self.ARGS)[1] == run(capsys, *self.ARGS)[1]

    def test_threads_do_not_change_output(self, capsys):
        a = json.loads(run(capsys, *self.ARGS, "--threads", "1")[1])
        b = json.loads(run(capsys, *self.ARGS, "--threads", "4")[1])
        assert a["statistics"] == b["statistics"]

    def test_one_sided_example(self, capsys):
        code, out, _ = run(capsys, "simulate", "--phi-equals-theta", "--theta", "60", "--eta-a", "1", "--eta-b", "0.68")
        data = json.loads(out)
        assert code == 0
        assert data["config"]["n_pairs"] == 10_000_000 and data["config"]["seed"] == 0
        assert data["empirical_rates"]["r"] > 0

    def test_counts_csv(self, tmp_path, capsys):
        counts = tmp_path / "counts.csv"
        code, out, _ = run(capsys, "simulate", "--theta", "70", "--phi-maxviol", "--eta", "0.9", "--n", "50000",
                           "--counts-csv", str(counts))
        cols = read_csv(counts)
        assert code == 0 and sum(cols["count"]) == 50000
        assert read_json(manifest_path(counts))["sha256"] == sha256(counts.read_text())

    def test_zero_pairs(self, capsys):
        assert run(capsys, "simulate", "--theta", "90", "--phi", "45", "--n", "0")[0] == 2

    def test_missing_phi(self, capsys):
        assert run(capsys, "simulate", "--theta", "90", "--n", "10")[0] == 2

    def test_invalid_noise_is_domain_error(self, capsys):
        assert run(capsys, "simulate", "--theta", "90", "--phi", "45", "--n", "10", "--pc", "0.8", "--pw", "0.5")[0] == 3


class TestThresholds:
    def test_mes(self, capsys):
        code, out, _ = run(capsys, "thresholds", "--theta", "90", "--phi", "45")
        res = json.loads(out)["result"]
        assert code == 0
        assert res["eta_th"] == pytest.approx(2 * (math.sqrt(2) - 1), abs=1e-12)
        assert res["eta_th_bisection"] == pytest.approx(res["eta_th"], abs=1e-8)
        assert res["eta_th_b"] == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_phi_equals_theta(self, capsys):
        res = json.loads(run(capsys, "thresholds", "--theta", "60", "--phi-equals-theta")[1])["result"]
        assert res["eta_th_b"] == pytest.approx(2 / 3, abs=1e-12)

    def test_no_violation_exit_code(self, capsys):
        code, out, err = run(capsys, "thresholds", "--theta", "90", "--phi-equals-theta")
        assert code == 3 and "no violation" in err
        assert json.loads(out)["result"]["eta_th"] is None

    def test_schema_check(self, tmp_path):
        bad = tmp_path / "x.json"
        bad.write_text('{"schema": "other/9"}')
        with pytest.raises(ValueError):
            read_json(bad)
