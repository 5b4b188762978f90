import json
import math

from sftops import cli
from sftops import groupoid as gd
from sftops import scenarios as sn


def small_scenario(tmp_path, name="small"):
    s = sn.full_shift_scenario()
    s.name = name
    s.basis_cap = 3000
    s.window = (-4, 10)
    path = tmp_path / f"{name}.json"
    path.write_text(sn.scenario_json(s))
    return str(path)


def run(args):
    return cli.main(args)


class TestValidate:
    def test_full_shift_numbers(self, tmp_path):
        out = tmp_path / "o"
        assert run(["validate", "--scenario", "full-2-shift", "--out", str(out)]) == 0
        rep = json.loads((out / "validate.json").read_text())
        assert abs(rep["entropy"] - math.log(2)) < 1e-12
        assert abs(rep["hausdorff_dimension"] - 2.0) < 1e-12
        assert abs(rep["summability_threshold"] - 1.0) < 1e-12

    def test_golden_mean_entropy(self, tmp_path):
        out = tmp_path / "o"
        assert run(["validate", "--scenario", "golden-mean", "--out", str(out)]) == 0
        rep = json.loads((out / "validate.json").read_text())
        assert abs(rep["entropy"] - 0.481212) < 1e-6

    def test_disconnected_matrix_exit_2(self, tmp_path):
        bad = {
            "name": "bad",
            "matrix": [[1, 0], [0, 1]],
            "kappa": 2.0,
            "orbit_P": [1],
            "orbit_Q": [0],
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        assert run(["validate", "--scenario", str(path), "--out", str(tmp_path)]) == 2

    def test_unreadable_scenario_exit_2(self, tmp_path):
        assert run(["validate", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2

    def test_overlapping_orbits_exit_2(self, tmp_path):
        bad = {
            "name": "bad",
            "matrix": [[1, 1], [1, 1]],
            "kappa": 2.0,
            "orbit_P": [0],
            "orbit_Q": [0],
        }
        path = tmp_path / "bad2.json"
        path.write_text(json.dumps(bad))
        assert run(["validate", "--scenario", str(path), "--out", str(tmp_path)]) == 2


class TestMetricAudit:
    def test_zero_failures(self, tmp_path):
        out = tmp_path / "o"
        code = run(
            ["metric-audit", "--scenario", "full-2-shift", "--out", str(out), "--samples", "3000"]
        )
        assert code == 0
        rep = json.loads((out / "metric_audit.json").read_text())
        assert rep["total_failures"] == 0
        assert rep["sample_count"] == 3000

    def test_sample_count_respected(self, tmp_path):
        out = tmp_path / "o"
        run(["metric-audit", "--scenario", "full-2-shift", "--out", str(out), "--samples", "777"])
        rep = json.loads((out / "metric_audit.json").read_text())
        for name in ("inversion_isometry", "phi_global_sandwich"):
            assert rep["checks"][name]["checked"] == 777

    def test_tampered_metric_surfaces_failure(self, tmp_path, monkeypatch):
        real = gd.groupoid_metric_exponent
        calls = {"n": 0}

        def tampered(a, b):
            calls["n"] += 1
            e = real(a, b)
            if calls["n"] % 97 == 0 and e is not None:
                return e + 1  # break the isometry checks deterministically
            return e

        monkeypatch.setattr(cli.gd, "groupoid_metric_exponent", tampered)
        out = tmp_path / "o"
        code = run(
            ["metric-audit", "--scenario", "full-2-shift", "--out", str(out), "--samples", "2000"]
        )
        assert code == 1
        rep = json.loads((out / "metric_audit.json").read_text())
        assert rep["total_failures"] > 0
        bad = [c for c in rep["checks"].values() if c["failures"]]
        assert bad and bad[0]["first_counterexample"] is not None


class TestDeterminism:
    def test_byte_identical_reports(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            assert (
                run(
                    [
                        "metric-audit",
                        "--scenario",
                        "full-2-shift",
                        "--out",
                        str(out),
                        "--samples",
                        "1500",
                    ]
                )
                == 0
            )
        assert (out1 / "metric_audit.json").read_bytes() == (out2 / "metric_audit.json").read_bytes()

    def test_seed_changes_sampling(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        run(["auf-audit", "--scenario", "full-2-shift", "--out", str(out1), "--samples", "4000"])
        run(
            [
                "auf-audit",
                "--scenario",
                "full-2-shift",
                "--out",
                str(out2),
                "--samples",
                "4000",
                "--seed",
                "99",
            ]
        )
        r1 = json.loads((out1 / "auf_audit.json").read_text())
        r2 = json.loads((out2 / "auf_audit.json").read_text())
        assert r1["star_refinement"] != r2["star_refinement"]


class TestAufAudit:
    def test_clean_run(self, tmp_path):
        out = tmp_path / "o"
        code = run(
            ["auf-audit", "--scenario", "full-2-shift", "--out", str(out), "--samples", "5000"]
        )
        assert code == 0
        rep = json.loads((out / "auf_audit.json").read_text())
        assert rep["sandwich"]["lower_violations"] == 0
        assert rep["star_refinement"]["violations"] == 0
        assert rep["diameter_regression"]["relative_error"] <= 0.10
        assert (out / "quasimetric.csv").exists()


class TestSpectrum:
    def test_small_spectrum_run(self, tmp_path):
        path = small_scenario(tmp_path)
        out = tmp_path / "o"
        code = run(["spectrum", "--scenario", path, "--out", str(out)])
        assert code == 0
        rep = json.loads((out / "spectrum.json").read_text())
        assert rep["vanishing_n0"] >= 0
        assert rep["trusted_blocks"]
        csv_lines = (out / "spectrum.csv").read_text().splitlines()
        assert csv_lines[0] == "index,value"
        assert len(csv_lines) == rep["spectrum_count"] + 1
        # 17 significant digits in the CSV payload
        assert any(len(line.split(",")[1]) >= 17 for line in csv_lines[1:])

    def test_unknown_function_exit_2(self, tmp_path):
        path = small_scenario(tmp_path)
        code = run(
            [
                "spectrum",
                "--scenario",
                path,
                "--out",
                str(tmp_path),
                "--stable-function",
                "missing",
            ]
        )
        assert code == 2

    def test_no_trusted_blocks_exit_3(self, tmp_path):
        path = small_scenario(tmp_path)
        out = tmp_path / "o"
        code = run(["spectrum", "--scenario", path, "--out", str(out), "--cap", "4"])
        assert code == 3

    def test_decay_certificate_sound(self, tmp_path):
        path = small_scenario(tmp_path)
        out = tmp_path / "o"
        assert run(["spectrum", "--scenario", path, "--out", str(out)]) == 0
        rep = json.loads((out / "spectrum.json").read_text())
        cert = rep["decay_certificate"]
        assert cert["violations"] == 0
        assert cert["schedule"] and cert["exponent"] > 0

    def test_empty_function_trivially_convergent(self, tmp_path):
        from sftops import functions as fnmod
        from sftops import cli as climod

        s = sn.full_shift_scenario()
        s.basis_cap = 500
        s.window = (-2, 4)
        s.functions["zero"] = fnmod.zero_function("stable")
        analysis = climod.spectrum_analysis(s, "zero", "b")
        assert analysis["spectrum_count"] == 0
        assert all(v["verdict"] == "CONVERGENT" for v in analysis["verdicts"].values())

    def test_window_flag(self, tmp_path):
        path = small_scenario(tmp_path)
        out = tmp_path / "o"
        code = run(["spectrum", "--scenario", path, "--out", str(out), "--window=-2..6"])
        assert code == 0
        rep = json.loads((out / "spectrum.json").read_text())
        assert rep["window"] == [-2, 6]


class TestFredholmCommand:
    def test_residuals(self, tmp_path):
        out = tmp_path / "o"
        code = run(["fredholm", "--scenario", "full-2-shift", "--out", str(out)])
        assert code == 0
        rep = json.loads((out / "fredholm.json").read_text())
        assert rep["odd_module"]["f_squared_residual"] == 0.0
        assert rep["resolvent_identity_residual"] < 1e-10
        assert rep["contour_exp_residual"] < 1e-8
        assert rep["corner_residual_zero_inside"] < 1e-9
        assert rep["corner_residual_zero_outside"] < 1e-9
        assert rep["summability_table"]

    def test_verdict_column_present(self, tmp_path):
        out = tmp_path / "o"
        run(["fredholm", "--scenario", "full-2-shift", "--out", str(out)])
        rep = json.loads((out / "fredholm.json").read_text())
        assert all("verdict" in row for row in rep["summability_table"])


class TestScenarioRoundTrip:
    def test_reference_scenarios_serialize(self, tmp_path):
        for name, mk in sn.REFERENCE_SCENARIOS.items():
            s = mk()
            path = tmp_path / f"{name}.json"
            path.write_text(sn.scenario_json(s))
            s2 = sn.load_scenario(str(path))
            assert sn.scenario_hash(s) == sn.scenario_hash(s2)

    def test_shipped_scenarios_match_builders(self):
        import pathlib

        root = pathlib.Path(__file__).resolve().parent.parent / "scenarios"
        for name, mk in sn.REFERENCE_SCENARIOS.items():
            shipped = sn.load_scenario(str(root / f"{name}.json"))
            assert sn.scenario_hash(shipped) == sn.scenario_hash(mk())
