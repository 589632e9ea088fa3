"""Command line behavior: exit codes, artifacts, determinism."""

import json
import subprocess
import sys

import pytest

from gasnet.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVER, load_mask, main
from gasnet.network import save_network
from gasnet.timeseries import write_profiles

from test_estimate import three_node, three_node_profiles


@pytest.fixture(scope="module")
def small_files(tmp_path_factory):
    """Three-node network, profiles, and synthetic measurements on disk."""
    root = tmp_path_factory.mktemp("cli_small")
    net_path = root / "network.json"
    prof_path = root / "profiles.csv"
    save_network(three_node(), str(net_path))
    write_profiles(str(prof_path), three_node_profiles())
    gen_dir = root / "gen"
    code = main([
        "gen-synthetic",
        "--network", str(net_path),
        "--profiles", str(prof_path),
        "--noise-density", "0.0025",
        "--noise-withdrawal", "0.0025",
        "--seed", "4",
        "--out", str(gen_dir),
    ])
    assert code == EXIT_OK
    return {
        "root": root,
        "network": str(net_path),
        "profiles": str(prof_path),
        "measurements": str(gen_dir / "measurements.csv"),
    }


class TestSimulate:
    def test_happy_path_writes_artifacts(self, six_files, tmp_path, capsys):
        net_path, prof_path = six_files
        out = tmp_path / "sim"
        code = main([
            "simulate",
            "--network", net_path,
            "--profiles", prof_path,
            "--out", str(out),
        ])
        assert code == EXIT_OK
        for name in (
            "solution_state.csv",
            "solution_withdrawals.csv",
            "diagnostics.json",
            "manifest.json",
        ):
            assert (out / name).is_file(), name
        captured = capsys.readouterr()
        assert "simulate:" in captured.out
        diag = json.loads((out / "diagnostics.json").read_text())
        assert diag["residual_inf"] < 1e-8
        manifest = json.loads((out / "manifest.json").read_text())
        assert "inputs" in manifest and "config" in manifest and "versions" in manifest

    def test_missing_network_file_names_path(self, tmp_path, capsys):
        absent = tmp_path / "absent.json"
        code = main([
            "simulate",
            "--network", str(absent),
            "--profiles", str(absent),
            "--out", str(tmp_path / "out"),
        ])
        assert code == EXIT_INPUT
        captured = capsys.readouterr()
        assert "input error" in captured.err
        assert str(absent) in captured.err

    def test_module_entry_point(self, six_files, tmp_path):
        net_path, prof_path = six_files
        out = tmp_path / "sim_sub"
        proc = subprocess.run(
            [
                sys.executable, "-m", "gasnet.cli", "simulate",
                "--network", net_path,
                "--profiles", prof_path,
                "--out", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "solution_state.csv").is_file()


class TestGenSynthetic:
    def test_same_seed_is_byte_identical(self, small_files, tmp_path):
        outs = []
        for name in ("g1", "g2"):
            out = tmp_path / name
            code = main([
                "gen-synthetic",
                "--network", small_files["network"],
                "--profiles", small_files["profiles"],
                "--seed", "11",
                "--out", str(out),
            ])
            assert code == EXIT_OK
            outs.append(out)
        first = (outs[0] / "measurements.csv").read_bytes()
        second = (outs[1] / "measurements.csv").read_bytes()
        assert first == second
        assert (outs[0] / "truth_state.csv").read_bytes() == (
            outs[1] / "truth_state.csv"
        ).read_bytes()

    def test_different_seed_changes_measurements(self, small_files, tmp_path):
        outs = []
        for seed, name in ((11, "s1"), (12, "s2")):
            out = tmp_path / name
            code = main([
                "gen-synthetic",
                "--network", small_files["network"],
                "--profiles", small_files["profiles"],
                "--seed", str(seed),
                "--out", str(out),
            ])
            assert code == EXIT_OK
            outs.append(out)
        assert (outs[0] / "measurements.csv").read_bytes() != (
            outs[1] / "measurements.csv"
        ).read_bytes()

    def test_mask_restricts_metered_junctions(self, small_files, tmp_path):
        mask = tmp_path / "mask.txt"
        mask.write_text("# metered junctions\nb\n")
        out = tmp_path / "masked"
        code = main([
            "gen-synthetic",
            "--network", small_files["network"],
            "--profiles", small_files["profiles"],
            "--mask", str(mask),
            "--out", str(out),
        ])
        assert code == EXIT_OK
        header = (out / "measurements.csv").read_text().splitlines()[0]
        assert "rho:b" in header and "rho:c" not in header


class TestEstimate:
    def test_estimate_and_rerun_byte_identical(self, small_files, tmp_path, capsys):
        outs = []
        for name in ("e1", "e2"):
            out = tmp_path / name
            code = main([
                "estimate",
                "--network", small_files["network"],
                "--measurements", small_files["measurements"],
                "--tol", "1e-6",
                "--max-iter", "300",
                "--out", str(out),
            ])
            assert code == EXIT_OK
            outs.append(out)
        captured = capsys.readouterr()
        assert "estimate: optimal" in captured.out
        for name in (
            "solution_state.csv",
            "solution_withdrawals.csv",
            "friction_estimates.csv",
            "fit_rmse.csv",
            "diagnostics.json",
            "manifest.json",
        ):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
        diag = json.loads((outs[0] / "diagnostics.json").read_text())
        assert diag["converged"] is True
        assert diag["kkt_error"] <= 1e-6

    def test_iteration_starved_run_exits_two_with_artifacts(
        self, small_files, tmp_path
    ):
        out = tmp_path / "starved"
        code = main([
            "estimate",
            "--network", small_files["network"],
            "--measurements", small_files["measurements"],
            "--tol", "1e-10",
            "--max-iter", "2",
            "--out", str(out),
        ])
        assert code == EXIT_SOLVER
        diag = json.loads((out / "diagnostics.json").read_text())
        assert diag["converged"] is False
        for name in ("solution_state.csv", "friction_estimates.csv", "fit_rmse.csv"):
            assert (out / name).is_file(), name

    def test_unknown_mask_junction_is_input_error(self, small_files, tmp_path, capsys):
        mask = tmp_path / "mask.txt"
        mask.write_text("b\nnope\n")
        code = main([
            "estimate",
            "--network", small_files["network"],
            "--measurements", small_files["measurements"],
            "--mask", str(mask),
            "--out", str(tmp_path / "unused"),
        ])
        assert code == EXIT_INPUT
        captured = capsys.readouterr()
        assert "nope" in captured.err

    def test_mask_drops_series_before_estimation(self, small_files, tmp_path):
        mask = tmp_path / "mask.txt"
        mask.write_text("b\n")
        out = tmp_path / "masked_est"
        code = main([
            "estimate",
            "--network", small_files["network"],
            "--measurements", small_files["measurements"],
            "--mask", str(mask),
            "--tol", "1e-5",
            "--max-iter", "300",
            "--out", str(out),
        ])
        assert code == EXIT_OK
        rows = (out / "fit_rmse.csv").read_text().splitlines()
        assert rows[0] == "junction,density_rmse,withdrawal_rmse"
        assert len(rows) == 2 and rows[1].startswith("b,")


class TestReport:
    def test_report_regenerates_matching_tables(self, small_files, tmp_path, capsys):
        est = tmp_path / "est"
        code = main([
            "estimate",
            "--network", small_files["network"],
            "--measurements", small_files["measurements"],
            "--tol", "1e-6",
            "--max-iter", "300",
            "--out", str(est),
        ])
        assert code == EXIT_OK
        rep = tmp_path / "rep"
        code = main([
            "report",
            "--network", small_files["network"],
            "--solution", str(est),
            "--out", str(rep),
        ])
        assert code == EXIT_OK
        assert (rep / "friction_estimates.csv").read_bytes() == (
            est / "friction_estimates.csv"
        ).read_bytes()
        assert (rep / "fit_rmse.csv").read_bytes() == (est / "fit_rmse.csv").read_bytes()
        captured = capsys.readouterr()
        assert "report: 2 pipes" in captured.out

    def test_report_without_estimates_is_input_error(
        self, six_files, tmp_path, capsys
    ):
        net_path, prof_path = six_files
        sim = tmp_path / "sim"
        code = main([
            "simulate",
            "--network", net_path,
            "--profiles", prof_path,
            "--out", str(sim),
        ])
        assert code == EXIT_OK
        code = main([
            "report",
            "--network", net_path,
            "--solution", str(sim),
            "--out", str(tmp_path / "rep"),
        ])
        assert code == EXIT_INPUT
        captured = capsys.readouterr()
        assert "no friction estimates" in captured.err


class TestMaskParsing:
    def test_comments_and_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "mask.txt"
        path.write_text("# comment\n\nJ1\n  J2  \n   # indented comment\n")
        assert load_mask(str(path)) == ("J1", "J2")
