import json

import numpy as np
import pytest

from bibeta.cli import main
from bibeta.core import sample
from bibeta.types import AlphaParams, PairedSample


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def uniform_sample_csv(tmp_path):
    path = tmp_path / "data.csv"
    data = sample(AlphaParams(1, 1, 1, 1), 200, 7)
    path.write_text(data.to_csv())
    return path


class TestSampleCommand:
    def test_writes_reproducible_csv(self, capsys, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        code1, _, err = run_cli(capsys, "sample", "--alpha", "1,1,1,1", "--n", "50", "--seed", "3", "--out", str(out1))
        code2, _, _ = run_cli(capsys, "sample", "--alpha", "1,1,1,1", "--n", "50", "--seed", "3", "--out", str(out2))
        assert code1 == code2 == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert "seed: 3" in err

    def test_zero_rows_keeps_header(self, capsys):
        code, out, _ = run_cli(capsys, "sample", "--alpha", "2,7,3,1", "--n", "0")
        assert code == 0
        assert out == "x,y\n"

    def test_sample_moments_match(self, capsys):
        code, out, _ = run_cli(capsys, "sample", "--alpha", "2,7,3,1", "--n", "20000", "--seed", "8")
        data = PairedSample.from_csv(out)
        assert data.x.mean() == pytest.approx(9 / 13, abs=0.01)

    def test_bad_alpha_exits_one(self, capsys):
        code, _, err = run_cli(capsys, "sample", "--alpha", "1,1,1", "--n", "5")
        assert code == 1
        assert "alpha" in err


class TestFitCommand:
    def test_mm1_recovers_truth_roughly(self, capsys, uniform_sample_csv):
        code, out, _ = run_cli(capsys, "fit", str(uniform_sample_csv), "--method", "mm1")
        assert code == 0
        est = json.loads(out)["estimate"]
        np.testing.assert_allclose(est["alpha_hat"], np.ones(4), atol=0.3)

    def test_malformed_row_names_line(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n0.5,0.5\n0.5,abc\n")
        code, _, err = run_cli(capsys, "fit", str(bad), "--method", "mm1")
        assert code == 1
        assert "row 2" in err

    def test_bootstrap_outputs_and_determinism(self, capsys, uniform_sample_csv, tmp_path):
        args = [
            "fit", str(uniform_sample_csv), "--method", "mm1",
            "--bootstrap", "60", "--seed", "11",
            "--out-dir", str(tmp_path / "rep"), "--no-figures",
        ]
        code1, out1, _ = run_cli(capsys, *args)
        code2, out2, _ = run_cli(capsys, *args)
        assert code1 == code2 == 0
        assert out1 == out2
        payload = json.loads(out1)
        assert payload["bootstrap"]["B"] == 60
        resamples = (tmp_path / "rep" / "resamples.csv").read_text().splitlines()
        assert resamples[0] == "alpha1,alpha2,alpha3,alpha4"
        assert len(resamples) == 61

    def test_bootstrap_figure_rendered(self, capsys, uniform_sample_csv, tmp_path):
        out_dir = tmp_path / "rep"
        code, _, _ = run_cli(
            capsys, "fit", str(uniform_sample_csv), "--method", "mm1",
            "--bootstrap", "30", "--seed", "2", "--out-dir", str(out_dir),
        )
        assert code == 0
        assert (out_dir / "resamples_pairs.png").exists()

    def test_be1_smoke_emits_diagnostics(self, capsys, tmp_path):
        path = tmp_path / "ten.csv"
        path.write_text(sample(AlphaParams(1, 1, 1, 1), 10, 3).to_csv())
        code, out, _ = run_cli(
            capsys, "fit", str(path), "--method", "be1",
            "--chains", "1", "--warmup", "150", "--iters", "150", "--seed", "5",
        )
        assert code == 0
        payload = json.loads(out)
        assert "rhat" in payload["diagnostics"]
        assert "ess" in payload["diagnostics"]
        assert len(payload["estimate"]["alpha_hat"]) == 4

    def test_infeasible_variance_exits_two_with_machine_readable_error(self, capsys, tmp_path):
        path = tmp_path / "wild.csv"
        x = np.tile([0.001, 0.999], 10)
        path.write_text(PairedSample(x, x).to_csv())
        code, out, _ = run_cli(capsys, "fit", str(path), "--method", "mm1")
        assert code == 2
        payload = json.loads(out)
        assert payload["error"] == "InfeasibleVariance"


class TestDensityCommand:
    def test_uniform_alpha_grid_matches_geometry(self, capsys):
        code, out, _ = run_cli(capsys, "density", "--alpha", "1,1,1,1", "--grid", "10")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "x,y,density"
        rows = [ln.split(",") for ln in lines[1:]]
        assert len(rows) == 100
        checked = 0
        for sx, sy, sv in rows[::17]:
            x, y, v = float(sx), float(sy), float(sv)
            omega = min(x, y) - max(0.0, x + y - 1.0)
            assert v == pytest.approx(6.0 * omega, rel=1e-6)
            checked += 1
        assert checked >= 5

    def test_singular_cells_marked_undefined(self, capsys):
        code, out, _ = run_cli(capsys, "density", "--alpha", "1,0.4,0.4,1", "--grid", "6")
        assert code == 0
        undefined = [ln for ln in out.splitlines() if ln.endswith("undefined")]
        # cell centers sit exactly on the diagonal for i == j
        assert len(undefined) == 6

    def test_symmetric_alpha_symmetric_grid(self, capsys):
        code, out, _ = run_cli(capsys, "density", "--alpha", "2,3,3,2", "--grid", "7")
        vals = {}
        for ln in out.strip().splitlines()[1:]:
            sx, sy, sv = ln.split(",")
            vals[(sx, sy)] = float(sv)
        for (sx, sy), v in vals.items():
            assert vals[(sy, sx)] == pytest.approx(v, rel=1e-9)

    def test_figure_alongside_csv(self, capsys, tmp_path):
        out = tmp_path / "grid.csv"
        code, _, _ = run_cli(capsys, "density", "--alpha", "2,3,4,5", "--grid", "12", "--out", str(out))
        assert code == 0
        assert out.exists()
        assert out.with_suffix(".png").exists()


class TestElicitDiagnose:
    def test_elicit_round_trip(self, capsys):
        code, out, _ = run_cli(
            capsys, "elicit", "--m1", "0.5", "--m2", "0.5", "--v1", "0.05", "--v2", "0.05", "--rho", "0",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["path"] == "exact-four-moment"
        assert payload["alpha"]["alpha1"] == pytest.approx(1.0)

    def test_elicit_infeasible_exits_two(self, capsys):
        code, out, _ = run_cli(
            capsys, "elicit", "--m1", "0.5", "--m2", "0.5", "--v1", "0.3", "--v2", "0.4", "--rho", "0",
        )
        assert code == 2
        assert json.loads(out)["error"] == "InfeasibleVariance"

    def test_diagnose_reports_both_tests(self, capsys, uniform_sample_csv):
        code, out, _ = run_cli(capsys, "diagnose", str(uniform_sample_csv), "--seed", "4")
        assert code == 0
        payload = json.loads(out)
        assert payload["gn"]["p_value"] > 0.05
        assert payload["m"]["reject"] is False


class TestExperimentCommand:
    def test_well_specified_run_writes_reports(self, capsys, tmp_path):
        cfg = {
            "kind": "well-specified",
            "generator": {"type": "bivariate-beta", "alpha": [1, 1, 1, 1]},
            "n": 40,
            "reps": 4,
            "methods": ["mm1"],
            "bootstrap": 10,
            "seed": 6,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "results"
        code, out, _ = run_cli(capsys, "experiment", str(cfg_path), "--out-dir", str(out_dir))
        assert code == 0
        assert (out_dir / "metrics.csv").exists()
        assert (out_dir / "metrics.json").exists()
        assert (out_dir / "mape.png").exists()
        payload = json.loads(out)
        assert payload["reps"]["mm1"] == 4

    def test_reps_one_table_matches_single_fit(self, capsys, tmp_path):
        cfg = {
            "kind": "well-specified",
            "generator": {"type": "bivariate-beta", "alpha": [2, 7, 3, 1]},
            "n": 60,
            "reps": 1,
            "methods": ["mm2"],
            "bootstrap": 0,
            "seed": 12,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        code, out, _ = run_cli(capsys, "experiment", str(cfg_path))
        assert code == 0
        cells = json.loads(out)["cells"]["mm2"]
        from bibeta._rng import derive_seed
        from bibeta.estimators import estimate as fit

        data = sample(AlphaParams(2, 7, 3, 1), 60, derive_seed(12, 0))
        est = fit(data, "mm2").alpha_hat
        assert cells["alpha1"]["bias"] == pytest.approx(est[0] - 2.0, rel=1e-12)

    def test_sampling_distribution_kind(self, capsys, tmp_path):
        cfg = {
            "kind": "sampling-distribution",
            "statistic": "pn",
            "generator": {"type": "logit-normal", "mu": [0, 0], "sigma": [[1, 0.1], [0.1, 1]]},
            "n": 50,
            "reps": 50,
            "seed": 3,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "dist"
        code, out, _ = run_cli(capsys, "experiment", str(cfg_path), "--out-dir", str(out_dir), "--no-figures")
        assert code == 0
        payload = json.loads(out)
        assert "prob_outside_0_0.2" in payload
        assert (out_dir / "histogram.csv").exists()
        assert not (out_dir / "histogram.png").exists()

    def test_missing_config_exits_one(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "experiment", str(tmp_path / "nope.json"))
        assert code == 1


class TestSbcCommand:
    def test_tiny_run_writes_ranks(self, capsys, tmp_path):
        cfg = {
            "prior": {"kind": "gamma", "a": 1, "b": 1, "shift": 0.5},
            "n": 20,
            "L": 9,
            "N": 2,
            "hmc": {"chains": 1, "warmup": 100, "iters": 100},
            "seed": 5,
        }
        cfg_path = tmp_path / "sbc.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "sbc"
        code, out, _ = run_cli(capsys, "sbc", str(cfg_path), "--out-dir", str(out_dir), "--no-figures")
        assert code == 0
        payload = json.loads(out)
        assert payload["L"] == 9 and payload["experiments"] == 2
        ranks = (out_dir / "ranks.csv").read_text().splitlines()
        assert ranks[0] == "rank,alpha1,alpha2,alpha3,alpha4"
        assert len(ranks) == 11
