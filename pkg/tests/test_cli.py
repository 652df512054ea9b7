"""Command-line surface: formats, schema, exit codes, byte-level determinism."""

import json

import jsonschema
import pytest

from thetaexp.cli import EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, load_result_schema, main


def run_cli(args, tmp_path, name="out"):
    out = tmp_path / name
    rc = main(args + ["--out", str(out)])
    return rc, out.read_bytes()


class TestExpandCommand:
    def test_happy_path(self, tmp_path, capsys):
        rc, payload = run_cli(["expand", "3/10", "--m", "4"], tmp_path)
        assert rc == EXIT_OK
        text = payload.decode()
        assert text.splitlines()[0] == "n,digit,p_n,q_n,cyl_lo,cyl_hi,lambda_cyl,gamma_cyl"
        assert "6" in text
        err = capsys.readouterr().err
        assert "determinant_identity: pass" in err
        assert "value_check: exact" in err

    def test_m1_terminates(self, tmp_path, capsys):
        rc, _ = run_cli(["expand", "1/2", "--m", "1"], tmp_path)
        assert rc == EXIT_OK
        assert "status: terminated" in capsys.readouterr().err

    def test_out_of_range_is_usage_error(self, tmp_path, capsys):
        rc = main(["expand", "2/3", "--m", "4"])
        assert rc == EXIT_USAGE

    def test_float_input_refused(self):
        assert main(["expand", "0.3", "--m", "4"]) == EXIT_USAGE
        assert main(["expand", "3e-1", "--m", "4"]) == EXIT_USAGE

    def test_non_rational_refused(self):
        assert main(["expand", "pi", "--m", "4"]) == EXIT_USAGE


class TestFrechetCommand:
    ARGS = ["frechet", "--m", "1", "--n-digits", "60", "--trajectories", "150",
            "--seed", "5", "--bits-per-digit", "16"]

    def test_runs_and_reports(self, tmp_path):
        rc, payload = run_cli(self.ARGS + ["--tolerance", "0.9"], tmp_path)
        assert rc == EXIT_OK
        header = payload.decode().splitlines()[0]
        assert header == "y,empirical,frechet,abs_diff,std_err"

    def test_tolerance_failure_exit_code(self, tmp_path):
        rc, _ = run_cli(self.ARGS + ["--tolerance", "1e-9"], tmp_path)
        assert rc == EXIT_TOLERANCE

    def test_zero_trajectories_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frechet", "--m", "1", "--n-digits", "10", "--trajectories", "0"])
        assert exc.value.code == EXIT_USAGE


class TestDeterminism:
    CASES = [
        ["expand", "7/24", "--m", "2"],
        ["frechet", "--m", "1", "--n-digits", "40", "--trajectories", "120",
         "--seed", "9", "--bits-per-digit", "16", "--tolerance", "0.9"],
        ["borel-bernstein", "--m", "1", "--threshold", "nlogn", "--n-digits", "300",
         "--trajectories", "25", "--seed", "3", "--bits-per-digit", "16"],
        ["lil", "--m", "1", "--n-digits", "400", "--trajectories", "12",
         "--seed", "4", "--bits-per-digit", "16"],
        ["mixing", "--m", "1", "--gaps", "1,2", "--trajectories", "3000",
         "--seed", "6", "--bits-per-digit", "16"],
        ["oracle", "--m", "1", "--n-digits", "2", "--w", "3",
         "--mc-trajectories", "4000", "--seed", "8", "--bits-per-digit", "16"],
    ]

    @pytest.mark.parametrize("args", CASES, ids=lambda a: a[0])
    def test_csv_bytes_identical_across_runs_and_workers(self, args, tmp_path):
        if args[0] == "expand":
            worker_variants = ([], [])
        else:
            worker_variants = (["--workers", "1"], ["--workers", "2"])
        rc1, first = run_cli(args + worker_variants[0], tmp_path, "a.csv")
        rc2, second = run_cli(args + worker_variants[1], tmp_path, "b.csv")
        assert rc1 == rc2 == EXIT_OK
        assert first == second

    @pytest.mark.parametrize("args", CASES[:3], ids=lambda a: a[0])
    def test_json_validates_against_published_schema(self, args, tmp_path):
        rc, payload = run_cli(args + ["--format", "json"], tmp_path, "r.json")
        assert rc == EXIT_OK
        doc = json.loads(payload)
        jsonschema.validate(doc, load_result_schema())
        if "--seed" in args:
            assert doc["config"]["seed"] == int(args[args.index("--seed") + 1])

    def test_different_seed_changes_rows(self, tmp_path):
        base = ["frechet", "--m", "1", "--n-digits", "40", "--trajectories", "120",
                "--bits-per-digit", "16", "--tolerance", "0.9"]
        _, a = run_cli(base + ["--seed", "1"], tmp_path, "a.csv")
        _, b = run_cli(base + ["--seed", "2"], tmp_path, "b.csv")
        assert a != b


class TestMixingCommand:
    def test_reports_slope_and_envelope(self, tmp_path, capsys):
        rc, payload = run_cli(
            ["mixing", "--m", "1", "--gaps", "1,2,3", "--trajectories", "5000",
             "--seed", "11", "--bits-per-digit", "16"],
            tmp_path,
        )
        assert rc == EXIT_OK
        assert payload.decode().splitlines()[0] == "gap,psi_hat,std_err,envelope"
        err = capsys.readouterr().err
        assert "log_slope" in err and "q_theta" in err

    def test_degenerate_event_is_usage_error(self, tmp_path):
        rc = main(["mixing", "--m", "2", "--gaps", "1", "--trajectories", "500",
                   "--seed", "1", "--event-digit", "1", "--bits-per-digit", "16"])
        assert rc == EXIT_USAGE  # digits are never below m=2


class TestOracleCommand:
    def test_exact_only(self, tmp_path):
        rc, payload = run_cli(["oracle", "--m", "1", "--n-digits", "1", "--w", "2"],
                              tmp_path)
        assert rc == EXIT_OK
        lines = payload.decode().splitlines()
        assert lines[0] == "n_digits,w,exact"
        assert lines[1].startswith("1,2,0.4150374992788438")

    def test_with_monte_carlo_verdict(self, tmp_path, capsys):
        rc, _ = run_cli(
            ["oracle", "--m", "1", "--n-digits", "2", "--w", "3",
             "--mc-trajectories", "20000", "--seed", "0", "--bits-per-digit", "16"],
            tmp_path,
        )
        assert rc == EXIT_OK
        assert "within 3 sigma" in capsys.readouterr().err

    def test_w_at_floor_gives_zero(self, tmp_path):
        rc, payload = run_cli(["oracle", "--m", "1", "--n-digits", "3", "--w", "1"],
                              tmp_path)
        assert rc == EXIT_OK
        assert payload.decode().splitlines()[1] == "3,1,0"

    def test_budget_exceeded_is_usage_error(self):
        rc = main(["oracle", "--m", "1", "--n-digits", "20", "--w", "100"])
        assert rc == EXIT_USAGE


class TestLilCommand:
    def test_header_and_reference(self, tmp_path, capsys):
        rc, payload = run_cli(
            ["lil", "--m", "1", "--n-digits", "500", "--trajectories", "10",
             "--seed", "2", "--bits-per-digit", "16"],
            tmp_path,
        )
        assert rc == EXIT_OK
        header = payload.decode().splitlines()[0]
        assert header == "trajectory,largest_digit,running_min,ratio_to_reference,in_band"
        assert "reference_constant: 1.442" in capsys.readouterr().err

    def test_too_short_rejected(self):
        assert main(["lil", "--m", "1", "--n-digits", "2", "--trajectories", "5"]) \
            == EXIT_USAGE


class TestBorelBernsteinCommand:
    def test_divergent_verdict(self, tmp_path, capsys):
        rc, _ = run_cli(
            ["borel-bernstein", "--m", "1", "--threshold", "nlogn",
             "--n-digits", "200", "--trajectories", "20", "--seed", "1",
             "--bits-per-digit", "16"],
            tmp_path,
        )
        assert rc == EXIT_OK
        assert "divergent series: exceedances recur" in capsys.readouterr().err

    def test_convergent_verdict(self, tmp_path, capsys):
        rc, _ = run_cli(
            ["borel-bernstein", "--m", "1", "--threshold", "nlogn-power:1.0",
             "--n-digits", "200", "--trajectories", "20", "--seed", "1",
             "--bits-per-digit", "16"],
            tmp_path,
        )
        assert rc == EXIT_OK
        assert "convergent series" in capsys.readouterr().err

    def test_linear_below_floor_counts_everything(self, tmp_path, capsys):
        rc, payload = run_cli(
            ["borel-bernstein", "--m", "4", "--threshold", "linear:0.001",
             "--n-digits", "50", "--trajectories", "6", "--seed", "1",
             "--bits-per-digit", "16"],
            tmp_path,
        )
        assert rc == EXIT_OK
        # phi(n) < m for the first thousands of n: every digit counts
        for line in payload.decode().splitlines()[1:]:
            assert line.split(",")[-1] == "50"

    def test_unknown_threshold_is_usage_error(self):
        rc = main(["borel-bernstein", "--m", "1", "--threshold", "nope",
                   "--n-digits", "10", "--trajectories", "2"])
        assert rc == EXIT_USAGE
