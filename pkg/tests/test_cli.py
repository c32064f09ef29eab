import json

import numpy as np
import pytest

from pcfilter import textio
from pcfilter.cli import EXIT_DOMAIN, EXIT_IO, EXIT_OK, EXIT_VERIFY, load_config, run

WHITE = "signal = white(1)\nnoise = white(1)\nweights = 1\n"
MA = "signal = ma(1, 0.5)\nnoise = white(0.5)\nweights = 1, 0.5\n"
MINIMAX = "p = 1\nq = 1\nweights = 1\nrestarts = 1\nprobes = 50\nsearch_grid = 128\nF = 256\n"


@pytest.fixture
def problem(tmp_path):
    def write(text, name="problem.txt"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write


def report_of(out):
    return textio.parse_report((out / "report.txt").read_text())


def test_filter_white(problem, tmp_path, capsys):
    out = tmp_path / "out"
    assert run(["filter", str(problem(WHITE)), "--out-dir", str(out)]) == EXIT_OK
    assert report_of(out)["delta"] == pytest.approx(0.5, abs=1e-12)
    h = textio.read_vector_series(out / "h.txt", "filter")
    assert h[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert "delta = " in capsys.readouterr().out


def test_json_like_output(problem, tmp_path, capsys):
    assert run(["filter", str(problem(WHITE)), "--out-dir", str(tmp_path / "o"), "--json-like"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["delta"] == pytest.approx(0.5, abs=1e-12)


def test_factorize_artifacts_round_trip(problem, tmp_path):
    out = tmp_path / "f"
    assert run(["factorize", str(problem(MA)), "--out-dir", str(out)]) == EXIT_OK
    kind, d = textio.read_matrix_series(out / "d.txt")
    assert kind == "ma"
    for name in ("b.txt", "phi.txt", "psi.txt"):
        assert (out / name).exists()
    rep = report_of(out)
    assert rep["residual_d"] < 1e-10
    # d d^* equals f + g: lag-0 coefficient of |1 + 0.5 z|^2 + 0.5
    assert float(np.sum(np.abs(d[:, 0, 0]) ** 2)) == pytest.approx(1.75, abs=1e-10)


def test_verify_passes(problem, tmp_path):
    out = tmp_path / "v"
    assert run(["verify", str(problem(MA)), "--out-dir", str(out), "--paths", "20000"]) == EXIT_OK
    rep = report_of(out)
    assert rep["status"] == "pass"
    assert rep["check_routes"] == rep["check_oracle"] == rep["check_monte_carlo"] == "pass"


def test_verify_fails_on_impossible_tolerance(problem, tmp_path):
    args = ["verify", str(problem(MA)), "--out-dir", str(tmp_path / "v"), "--paths", "1000", "--oracle-tol", "1e-30"]
    assert run(args) == EXIT_VERIFY


def test_simulate(problem, tmp_path):
    out = tmp_path / "s"
    assert run(["simulate", str(problem(MA + "horizon = 7\n")), "--out-dir", str(out), "--paths", "3"]) == EXIT_OK
    obs = textio.read_blocked(out / "observations.txt")
    sig = textio.read_blocked(out / "signal.txt")
    noise = textio.read_blocked(out / "noise.txt")
    assert len(obs) == 3 and obs[0].blocks.shape == (7, 1)
    np.testing.assert_allclose(obs[1].blocks, sig[1].blocks + noise[1].blocks, atol=1e-14)


def test_minimax_white(problem, tmp_path):
    out = tmp_path / "m"
    assert run(["minimax", str(problem(MINIMAX)), "--out-dir", str(out)]) == EXIT_OK
    rep = report_of(out)
    assert rep["delta0"] == pytest.approx(0.5, abs=1e-10)
    assert rep["certified"] is True
    _, f0 = textio.read_matrix_series(out / "f0.txt")
    assert np.abs(f0 - 1.0).max() < 1e-8


def test_uncertified_minimax_exits_2(problem, tmp_path):
    args = ["minimax", str(problem(MINIMAX)), "--out-dir", str(tmp_path / "m"), "--stationarity-tol", "1e-30"]
    assert run(args) == EXIT_VERIFY
    assert report_of(tmp_path / "m")["status"] == "fail"


def test_missing_weights_file(problem, tmp_path, capsys):
    text = "signal = white(1)\nnoise = white(1)\nweights_file = missing_weights.txt\n"
    assert run(["filter", str(problem(text)), "--out-dir", str(tmp_path / "o")]) == EXIT_IO
    assert "missing_weights.txt" in capsys.readouterr().err


def test_missing_problem_file(tmp_path, capsys):
    assert run(["filter", str(tmp_path / "nope.txt")]) == EXIT_IO
    assert "nope.txt" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text",
    [
        WHITE + "F = zero\n",
        WHITE + "route = sideways\n",
        WHITE + "colour = blue\n",
        "signal = pink(1)\nnoise = white(1)\nweights = 1\n",
    ],
)
def test_bad_parameters_exit_3(problem, tmp_path, text):
    assert run(["filter", str(problem(text)), "--out-dir", str(tmp_path / "o")]) == EXIT_IO


def test_non_positive_density_exits_1(problem, tmp_path):
    density = tmp_path / "neg.txt"
    textio.write_matrix_series(density, "density", -np.ones((64, 1, 1)))
    text = f"signal = file({density.name})\nnoise = zero\nweights = 1\nF = 64\n"
    assert run(["filter", str(problem(text)), "--out-dir", str(tmp_path / "o")]) == EXIT_DOMAIN


def test_weights_file_and_set_override(problem, tmp_path):
    textio.write_vector_series(tmp_path / "w.txt", "weights", np.array([[1.0], [0.5]]))
    path = problem("signal = white(1)\nnoise = white(1)\nweights_file = w.txt\n")
    cfg = load_config(path, {"seed": "7"})
    np.testing.assert_array_equal(cfg.weights, [[1.0], [0.5]])
    assert cfg.seed == 7


@pytest.mark.parametrize("command", ["factorize", "filter", "simulate", "verify", "minimax"])
def test_reruns_are_byte_identical(problem, tmp_path, command):
    text = MINIMAX if command == "minimax" else MA + "paths = 500\nhorizon = 4\n"
    path = problem(text)
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        run([command, str(path), "--out-dir", str(out)])
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
