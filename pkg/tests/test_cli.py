import json

import numpy as np
import pytest

from paoneshot.cli import main, pi_check, ratio_check, replicate_counts
from paoneshot.estimators import AttachmentEstimate, OneshotConfig, estimate_oneshot
from paoneshot.model_fit import fit_alpha
from paoneshot.net_core import read_histogram, read_trace
from paoneshot.sg_sim import Linear, PowerLaw


def run(*argv):
    return main(["-q", *map(str, argv)])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--p", 0.5, "--T", 6000, "--alpha", 1, "--seed", 7,
               "--edges", "-o", d / "run") == 0
    return d


def test_simulate_outputs(sim_dir):
    with open(sim_dir / "run.trace") as fh:
        tr = read_trace(fh)
    snap = tr.snapshot()
    assert snap.N + snap.E == 6000 + 1
    with open(sim_dir / "run.hist.csv") as fh:
        assert read_histogram(fh) == snap.histogram
    text = (sim_dir / "run.trace").read_text()
    assert "# seed=7" in text and "# p=0.5" in text
    edges = [ln for ln in (sim_dir / "run.edges").read_text().splitlines()
             if not ln.startswith("#")]
    assert len(edges) == snap.E


def test_simulate_is_byte_identical(tmp_path, sim_dir):
    assert run("simulate", "--p", 0.5, "--T", 6000, "--alpha", 1, "--seed", 7,
               "--edges", "-o", tmp_path / "run") == 0
    for suffix in (".trace", ".hist.csv", ".edges"):
        assert (tmp_path / f"run{suffix}").read_bytes() == \
            (sim_dir / f"run{suffix}").read_bytes()


def test_simulate_replicates_and_threads(tmp_path):
    for t in (1, 3):
        assert run("simulate", "--T", 2000, "--replicates", 3, "--seed", 1,
                   "--threads", t, "-o", tmp_path / f"t{t}") == 0
    for i in range(3):
        a = (tmp_path / f"t1_{i:03d}.trace").read_bytes()
        b = (tmp_path / f"t3_{i:03d}.trace").read_bytes()
        assert a == b
    assert (tmp_path / "t1_000.trace").read_bytes() != (tmp_path / "t1_001.trace").read_bytes()


def test_simulate_sequence_replay(tmp_path):
    tokens = ["N", "E", "E", "N", "E", "N", "N", "E"] * 50
    (tmp_path / "events.txt").write_text("\n".join(tokens) + "\n")
    assert run("simulate", "--sequence", tmp_path / "events.txt", "--alpha", 0.5,
               "-o", tmp_path / "rep") == 0
    with open(tmp_path / "rep.trace") as fh:
        snap = read_trace(fh).snapshot()
    assert snap.N == tokens.count("N") + 2
    assert snap.E == tokens.count("E")


def test_simulate_stdout(capsys):
    assert run("simulate", "--T", 50, "-o", "-") == 0
    out = capsys.readouterr().out
    assert out.startswith("# ")
    assert sum(1 for ln in out.splitlines() if not ln.startswith("#")) == 49


def test_estimate_baseline_rows(tmp_path, capsys):
    (tmp_path / "h.csv").write_text("k,n_k\n0,5\n1,3\n2,2\n")
    assert run("estimate", tmp_path / "h.csv", "--method", "baseline", "-o", "-") == 0
    rows = [ln.split(",") for ln in capsys.readouterr().out.splitlines()
            if not ln.startswith("#")]
    assert rows[0][:4] == ["k", "n_k", "tail_k", "A_hat"]
    assert rows[1][0] == "0" and float(rows[1][3]) == 1.0
    assert rows[2][0] == "1" and float(rows[2][3]) == pytest.approx(0.6667, abs=1e-4)
    assert len(rows) == 3


def test_estimate_errors(tmp_path, sim_dir):
    (tmp_path / "u.edges").write_text("a b\nb c\n")
    assert run("estimate", tmp_path / "u.edges", "--method", "mle") == 3
    (tmp_path / "one.csv").write_text("k,n_k\n0,4\n")
    assert run("estimate", tmp_path / "one.csv", "--method", "oneshot", "--M", 2) == 3
    assert run("estimate", tmp_path / "missing.csv") == 3
    assert run("estimate", sim_dir / "run.trace", "--method", "nope") == 2
    assert run("estimate", sim_dir / "run.trace", "--M", 0) == 2
    (tmp_path / "bad.edges").write_text("a b\nc\n")
    assert run("estimate", tmp_path / "bad.edges", "--method", "baseline") == 3


def test_oneshot_cli_matches_library(tmp_path, sim_dir):
    out = tmp_path / "os.json"
    assert run("estimate", sim_dir / "run.trace", "--method", "oneshot", "--M", 10,
               "--S", 2, "--R", 2, "--seed", 3, "--format", "json", "-o", out) == 0
    with open(sim_dir / "run.trace") as fh:
        snap = read_trace(fh).snapshot()
    lib = estimate_oneshot(snap, OneshotConfig(M=10, S=2, R=2, seed=3))
    with open(out) as fh:
        est = AttachmentEstimate.read(fh)
    np.testing.assert_array_equal(est.A_hat, lib.A_hat)
    # fit through the CLI equals the in-process fit exactly
    assert run("fit", out, "-o", tmp_path / "fit.json") == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    ref = fit_alpha(lib)
    assert fit["parameter"] == ref.parameter
    assert fit["two_sigma"] == ref.two_sigma
    assert fit["report"] == ref.report()


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_estimate_round_trip_refit(tmp_path, sim_dir, fmt):
    out = tmp_path / f"e.{fmt}"
    assert run("estimate", sim_dir / "run.trace", "--method", "oneshot", "--M", 5,
               "--S", 1, "--R", 3, "--format", fmt, "-o", out) == 0
    with open(out) as fh:
        est = AttachmentEstimate.read(fh)
    again = tmp_path / f"again.{fmt}"
    with open(again, "w") as fh:
        est.to_json(fh) if fmt == "json" else est.to_csv(fh)
    with open(again) as fh:
        est2 = AttachmentEstimate.read(fh)
    assert abs(fit_alpha(est2).parameter - fit_alpha(est).parameter) <= 1e-12


def test_estimate_binned_and_mle(tmp_path, sim_dir):
    assert run("estimate", sim_dir / "run.trace", "--method", "oneshot-binned", "--M", 5,
               "--S", 1, "--R", 2, "-o", tmp_path / "b.csv") == 0
    text = (tmp_path / "b.csv").read_text()
    assert "bin=" in text and "bin_ratio" in text and "\"numerator\": \"observed\"" in text
    assert run("estimate", sim_dir / "run.trace", "--method", "oneshot-binned", "--M", 5,
               "--S", 1, "--R", 2, "--bin-numerator", "all", "-o", tmp_path / "b2.csv") == 0
    assert "\"numerator\": \"all\"" in (tmp_path / "b2.csv").read_text()
    assert run("estimate", sim_dir / "run.trace", "--method", "oneshot-binned",
               "--bin-numerator", "some") == 2
    assert run("estimate", sim_dir / "run.trace", "--method", "mle", "-o",
               tmp_path / "m.csv") == 0
    assert run("estimate", sim_dir / "run.edges", "--method", "mle", "-o",
               tmp_path / "m2.csv") == 0
    assert "converged" in (tmp_path / "m.csv").read_text()


def test_fit_exact_power_law(tmp_path, capsys):
    k = np.arange(1, 30)
    est = AttachmentEstimate("test", k, k ** 0.7, np.ones(29), np.ones(29))
    with open(tmp_path / "e.csv", "w") as fh:
        est.to_csv(fh)
    assert run("fit", tmp_path / "e.csv") == 0
    res = json.loads(capsys.readouterr().out)
    assert res["parameter"] == pytest.approx(0.7, abs=1e-12)
    assert res["report"].startswith("alpha = 0.70 ± ")
    assert res["config"]["form"] == "alpha"


def test_fit_errors(tmp_path, sim_dir):
    est = AttachmentEstimate("test", [0, 1], [1.0, 1.0], [1, 1], [1, 1])
    with open(tmp_path / "e.csv", "w") as fh:
        est.to_csv(fh)
    assert run("fit", tmp_path / "e.csv") == 4
    assert run("fit", sim_dir / "run.hist.csv", "--form", "gamma") == 2
    assert run("fit", sim_dir / "run.hist.csv", "--form", "gamma", "--kmin", 3) == 0


def test_diagnose_pt_constant(tmp_path, capsys):
    (tmp_path / "s.txt").write_text("N\n" * 40)
    assert run("diagnose", "pt", tmp_path / "s.txt", "--w", 5) == 0
    rows = [ln for ln in capsys.readouterr().out.splitlines() if not ln.startswith("#")]
    assert rows[0] == "t,p_hat"
    assert all(float(r.split(",")[1]) == 1.0 for r in rows[1:])
    assert len(rows) == 41


def test_diagnose_ratio_and_pi(tmp_path):
    assert run("diagnose", "ratio", "--T", 5000, "--reps", 4, "-o", tmp_path / "r.csv") == 0
    assert run("diagnose", "pi", "--T", 5000, "--reps", 4, "-o", tmp_path / "p.csv") == 0
    assert "max_rel_err" in (tmp_path / "p.csv").read_text()
    assert run("diagnose", "pi", "--alpha", 1) == 2
    assert run("diagnose", "pt") == 2


def test_ratio_check_slope_near_one():
    A = PowerLaw(1.0)
    counts = replicate_counts(20_000, 0.5, A, 20, seed=2, threads=1)
    res = ratio_check(counts, A, k_max=5)
    slope = np.polyfit(np.log(res["k"]), np.log(res["normalized"]), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)


def test_pi_check_shapes():
    counts = replicate_counts(5000, 0.5, Linear(1.0), 3, seed=1, threads=1)
    res = pi_check(counts, 1.0, 0.5, 5000, k_max=5)
    assert len(res["k"]) == 6
    np.testing.assert_allclose(res["pi"][:3], [2 / 3, 1 / 6, 1 / 15])


def test_usage_errors():
    assert main(["--bogus"]) == 2
    assert run("simulate") == 2
    assert run("simulate", "--T", 10, "--alpha", 1, "--beta", 1) == 2
    assert run("simulate", "--T", 10, "--p", 1.5) == 2


def test_unwritable_output(tmp_path):
    assert run("simulate", "--T", 10, "-o", tmp_path / "no" / "such" / "dir") == 3
