"""End-to-end command-line checks through the installed entry point."""

import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from trafficgas import rigidity

CLI = shutil.which("trafficgas")


def run_cli(*args, cwd=None):
    cmd = [CLI] if CLI else [sys.executable, "-m", "trafficgas.cli"]
    return subprocess.run(cmd + [str(a) for a in args],
                          capture_output=True, text=True, cwd=cwd)


def parse_table(text):
    header = [l for l in text.splitlines() if l.startswith("#")]
    rows = [l.split(",") for l in text.splitlines() if l and not l.startswith("#")]
    return header, rows


class TestEntryPoint:
    def test_version(self):
        out = run_cli("--version")
        assert out.returncode == 0
        assert out.stdout.strip().startswith("trafficgas ")

    def test_unknown_command(self):
        assert run_cli("frobnicate").returncode == 2


class TestExact:
    def test_poisson_curve_is_identity(self):
        out = run_cli("exact", "--beta", 0)
        assert out.returncode == 0
        header, rows = parse_table(out.stdout)
        assert any("columns: L, delta_n_asymptotic" in h for h in header)
        assert len(rows) == 19
        for row in rows:
            L = float(row[0])
            assert float(row[1]) == L            # chi = 1, gamma = 0
            assert float(row[2]) == pytest.approx(L, abs=2e-3)
            assert float(row[3]) == 1.0

    def test_matches_library_coefficients(self):
        out = run_cli("exact", "--beta", 1.0, "--l-min", 5, "--l-max", 8, "--l-step", 1)
        _, rows = parse_table(out.stdout)
        chi = rigidity.chi_coefficient(1.0)
        gam = rigidity.gamma_coefficient(1.0)
        for row in rows:
            assert float(row[1]) == pytest.approx(chi * float(row[0]) + gam, rel=1e-12)
            assert float(row[3]) == pytest.approx(chi, rel=1e-15)
            assert float(row[4]) == pytest.approx(gam, rel=1e-15)

    def test_missing_beta_is_usage_error(self):
        out = run_cli("exact")
        assert out.returncode == 2
        assert "usage error" in out.stderr

    def test_negative_beta_is_usage_error(self):
        assert run_cli("exact", "--beta", -3).returncode == 2

    def test_bad_grid_is_usage_error(self):
        assert run_cli("exact", "--beta", 1, "--l-step", 0).returncode == 2
        assert run_cli("exact", "--beta", 1, "--l-min", 9, "--l-max", 5).returncode == 2


class TestSample:
    def test_seeded_runs_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for f in (a, b):
            out = run_cli("sample", "--beta", 1, "--count", 20000, "--seed", 11,
                          "--output", f)
            assert out.returncode == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_recorded_in_header(self, tmp_path):
        f = tmp_path / "s.csv"
        run_cli("sample", "--beta", 1, "--count", 1000, "--seed", 11, "--output", f)
        header, rows = parse_table(f.read_text())
        assert any(h.strip() == "# seed: 11" for h in header)
        assert len(rows) == 19

    def test_auto_seed_runs_differ(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for f in (a, b):
            assert run_cli("sample", "--beta", 1, "--count", 5000,
                           "--output", f).returncode == 0
        rows_a = [l for l in a.read_text().splitlines() if not l.startswith("#")]
        rows_b = [l for l in b.read_text().splitlines() if not l.startswith("#")]
        assert rows_a != rows_b

    def test_spacings_out(self, tmp_path):
        raw = tmp_path / "raw.txt"
        out = run_cli("sample", "--beta", 2, "--count", 3000, "--seed", 1,
                      "--spacings-out", raw, "--output", tmp_path / "curve.csv")
        assert out.returncode == 0
        vals = [float(l) for l in raw.read_text().splitlines() if not l.startswith("#")]
        assert len(vals) == 3000
        assert min(vals) > 0.0

    def test_zero_count_is_usage_error(self):
        assert run_cli("sample", "--beta", 1, "--count", 0).returncode == 2


class TestVariance:
    @pytest.fixture()
    def gap_file(self, tmp_path):
        rng = np.random.default_rng(8)
        f = tmp_path / "gaps.txt"
        f.write_text("\n".join(repr(float(g)) for g in rng.exponential(2.0, 30000)) + "\n")
        return f

    def test_timegap_power_law(self, gap_file, tmp_path):
        out_file = tmp_path / "var.csv"
        out = run_cli("variance", "--input", gap_file, "--kind", "timegap",
                      "--l-min", 1, "--l-max", 64, "--l-step", 3, "--output", out_file)
        assert out.returncode == 0
        text = out_file.read_text()
        fit_line = next(l for l in text.splitlines() if l.startswith("# power-law fit"))
        exponent = float(fit_line.split("exponent=")[1].split()[0])
        assert exponent == pytest.approx(-1.0, abs=0.1)  # iid gaps decay as 1/N

    def test_number_kind(self, gap_file):
        out = run_cli("variance", "--input", gap_file, "--kind", "number",
                      "--l-min", 2, "--l-max", 20)
        assert out.returncode == 0
        _, rows = parse_table(out.stdout)
        assert len(rows) == 19
        # unfolded Poisson stream: variance tracks L
        for row in rows:
            assert float(row[1]) == pytest.approx(float(row[0]), rel=0.25)

    def test_missing_input_is_usage_error(self):
        assert run_cli("variance", "--kind", "timegap").returncode == 2

    def test_nonexistent_input_is_runtime_error(self, tmp_path):
        out = run_cli("variance", "--input", tmp_path / "nope.txt")
        assert out.returncode == 1
        assert "error" in out.stderr


class TestSynthAnalyze:
    def test_round_trip(self, tmp_path):
        data = tmp_path / "traffic.csv"
        out = run_cli("synth", "--profile", "30.5:1", "--duration", 2500,
                      "--lanes", 2, "--seed", 5, "--output", data)
        assert out.returncode == 0

        table = tmp_path / "bins.csv"
        out = run_cli("analyze", "--input", data, "--window-seconds", 300,
                      "--min-bin-gaps", 300, "--output", table)
        assert out.returncode == 0

        header, rows = parse_table(table.read_text())
        assert any("rho_center, record_count, chi_hat" in h for h in header)
        assert len(rows) == 85
        fitted = [r for r in rows if r[2] != "nan"]
        assert fitted
        # the programmed level puts its best-filled bin near rho = 30.5
        top = max(rows, key=lambda r: int(r[1]))
        assert abs(float(top[0]) - 30.5) <= 2.0

        summary = json.loads((tmp_path / "bins.csv.summary.json").read_text())
        assert len(summary["bins"]) == 85
        assert summary["config"]["window_seconds"] == 300
        finite = [b for b in summary["bins"] if b["chi_hat"] is not None]
        assert len(finite) == len(fitted)
        regimes = {b["rho_center"]: b["regime"] for b in summary["bins"]}
        assert regimes[0.5] == "free"
        assert regimes[30.5] == "transitional"
        assert regimes[60.5] == "congested"

    def test_synth_deterministic(self, tmp_path):
        lines = []
        for name in ("a.csv", "b.csv"):
            f = tmp_path / name
            run_cli("synth", "--profile", "20:0.5", "--duration", 1200,
                    "--seed", 3, "--output", f)
            lines.append([l for l in f.read_text().splitlines()
                          if not l.startswith("#")])
        assert lines[0] == lines[1]

    def test_emit_plot_pack(self, tmp_path):
        data = tmp_path / "traffic.csv"
        run_cli("synth", "--profile", "30.5:0", "--duration", 2500,
                "--seed", 5, "--output", data)
        table = tmp_path / "bins.csv"
        out = run_cli("analyze", "--input", data, "--window-seconds", 300,
                      "--min-bin-gaps", 300, "--output", table, "--emit-plot")
        assert out.returncode == 0
        curves = (tmp_path / "bins.csv.curves.tsv").read_text()
        assert curves.splitlines()[1].startswith("L\t")
        fd = (tmp_path / "bins.csv.fd.tsv").read_text()
        assert fd.startswith("# rho_center")
        script = (tmp_path / "bins.csv.gnuplot").read_text()
        assert "multiplot" in script

    def test_profile_validation(self, tmp_path):
        out = run_cli("synth", "--profile", "90:1", "--duration", 600,
                      "--output", tmp_path / "x.csv")
        assert out.returncode == 2
        out = run_cli("synth", "--profile", "oops", "--duration", 600,
                      "--output", tmp_path / "x.csv")
        assert out.returncode == 2
        assert run_cli("synth", "--duration", 600,
                       "--output", tmp_path / "x.csv").returncode == 2

    def test_profile_file(self, tmp_path):
        prof = tmp_path / "profile.txt"
        prof.write_text("15:0.5\n40:2\n")
        out = run_cli("synth", "--profile", f"@{prof}", "--duration", 900,
                      "--seed", 2, "--output", tmp_path / "t.csv")
        assert out.returncode == 0

    def test_empty_input_is_runtime_error(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("# timestamp_s,lane_id,speed_kmh\n")
        out = run_cli("analyze", "--input", empty)
        assert out.returncode == 1
        assert "no records" in out.stderr

    def test_infeasible_profile_is_runtime_error(self, tmp_path):
        out = run_cli("synth", "--profile", "0:1", "--duration", 600,
                      "--output", tmp_path / "x.csv")
        assert out.returncode == 1
