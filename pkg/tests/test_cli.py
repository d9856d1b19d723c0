import csv
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynreg.cli import (
    EXIT_INVARIANT,
    EXIT_OK,
    EXIT_USAGE,
    RUN_COLUMNS,
    ExperimentConfig,
    ExperimentKind,
    collect_rows,
    loglog_slope,
    main,
    parse_config,
    summary_path,
)
from dynreg.core import InvalidParameter


def _body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def _rows(path):
    return list(csv.DictReader(_body(path)))


CONFIG = """
[common]
experiment = upper_bound
seeds = 20
dimension = 1

[upper_bound]
horizons = 16, 64
beta = 0.0
d_beta = 2.0
"""


def test_parse_config_file_then_flags(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text(CONFIG)
    cfg = parse_config(str(path))
    assert cfg.experiment is ExperimentKind.UPPER_BOUND
    assert cfg.horizons == (16, 64) and cfg.d_beta == 2.0 and cfg.seeds == 20
    assert parse_config(str(path), overrides={"beta": 0.5}).beta == 0.5
    assert parse_config(str(path), overrides={"beta": None}).beta == 0.0


def test_parse_config_errors(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text(CONFIG + "colour = blue\n")
    with pytest.raises(InvalidParameter, match="unknown config key 'colour'"):
        parse_config(str(path))
    for key in ("beta", "gamma"):
        with pytest.raises(InvalidParameter, match=r"\[0, 1\)"):
            parse_config(experiment="upper_bound", overrides={key: 1.0})
    with pytest.raises(InvalidParameter):
        parse_config(str(tmp_path / "missing.ini"))
    with pytest.raises(InvalidParameter, match="no experiment"):
        parse_config(overrides={"beta": 0.1})
    path.write_text("[mystery]\nbeta = 0\n")
    with pytest.raises(InvalidParameter, match="unknown config section"):
        parse_config(str(path), experiment="lemma_suite")


configs = st.builds(
    ExperimentConfig,
    experiment=st.sampled_from(list(ExperimentKind)),
    horizons=st.lists(st.integers(8, 5000), min_size=1, max_size=4).map(tuple),
    dimension=st.integers(1, 4),
    beta=st.floats(0.0, 0.5),
    d_beta=st.floats(0.0, 100.0),
    shifts=st.just(0),
    gamma=st.one_of(st.none(), st.floats(0.5, 0.99)),
    domain=st.sampled_from(["ball", "box"]),
    radius=st.floats(0.1, 10.0),
    regularizer=st.sampled_from(["zero", "indicator", "l1:0.25"]),
    learner=st.sampled_from(["zero", "pog"]),
    seeds=st.integers(1, 10_000),
    seed_start=st.integers(0, 100),
    resolution=st.floats(0.001, 0.5),
    timing=st.booleans(),
    out=st.sampled_from(["a.csv", "out/b.csv"]),
)


@settings(max_examples=60, deadline=None)
@given(configs)
def test_config_roundtrip(cfg):
    back = ExperimentConfig.from_ini(cfg.to_ini())
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_lemmas_exit_zero(tmp_path):
    out = tmp_path / "lemmas.csv"
    assert main(["lemmas", "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert len(rows) == 5 and all(r["ok"] == "true" for r in rows)


def test_upper_bound_rows_below_bound(tmp_path):
    out = tmp_path / "ub.csv"
    rc = main(["upper-bound", "--horizons", "64,256,1024", "--beta", "0", "--dbeta", "1",
               "--seeds", "30", "--out", str(out)])
    assert rc == EXIT_OK
    rows = _rows(out)
    assert list(rows[0].keys()) == list(RUN_COLUMNS) and len(rows) == 90
    for r in rows:
        assert float(r["measured_regret"]) <= float(r["theory_upper"])
    header = out.read_text().splitlines()[0]
    assert header.startswith("# dynreg experiment=upper_bound config_sha256=") and "seeds=0..29" in header
    summary = summary_path(out).read_text()
    assert "# loglog_slope=" in summary and "mean_regret" in summary


def test_upper_bound_box_with_l1(tmp_path):
    out = tmp_path / "ub.csv"
    rc = main(["upper-bound", "--horizons", "8", "--domain", "box", "--regularizer", "l1:0.2",
               "--dbeta", "0.5", "--seeds", "3", "--out", str(out)])
    assert rc == EXIT_OK
    for r in _rows(out):
        assert float(r["measured_regret"]) <= float(r["theory_upper"]) + 1e-5


def test_lower_bound_summary_in_range(tmp_path):
    out = tmp_path / "lb.csv"
    rc = main(["lower-bound", "--horizons", "64,256", "--dbeta", "4", "--seeds", "2000",
               "--out", str(out), "--no-timing"])
    assert rc == EXIT_OK
    rows = list(csv.DictReader(_body(summary_path(out))))
    for r in rows:
        ratio = float(r["mean_regret"]) / float(r["mean_theory_lower"])
        assert 0.2 <= ratio <= 1.0
    for r in _rows(out):
        assert r["theory_upper"] == "" and r["measured_regret"] == r["comparator_gain"]


def test_shifting_and_oracle_check(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["shifting", "--horizons", "128", "--shifts", "3", "--seeds", "10",
                 "--out", str(out)]) == EXIT_OK
    assert all(float(r["measured_regret"]) <= float(r["theory_upper"]) for r in _rows(out))
    out = tmp_path / "o.csv"
    assert main(["oracle-check", "--horizons", "2", "--seeds", "3", "--resolution", "0.02",
                 "--out", str(out)]) == EXIT_OK
    assert all(r["agree"] == "true" for r in _rows(out))


def test_byte_identical_bodies(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["upper-bound", "--horizons", "32,64", "--seeds", "15", "--no-timing"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert _body(a) == _body(b)
    assert _body(summary_path(a)) == _body(summary_path(b))


def test_parallel_matches_sequential():
    cfg = ExperimentConfig(experiment="lower_bound", horizons=(32, 64), seeds=50,
                           d_beta=3.0, timing=False)
    assert collect_rows(cfg, workers=1) == collect_rows(cfg, workers=3)


def test_usage_exit_codes(capsys):
    assert main(["upper-bound", "--beta", "1.0"]) == EXIT_USAGE
    assert "[0, 1)" in capsys.readouterr().err
    assert main(["upper-bound", "--gamma", "1.5"]) == EXIT_USAGE
    assert main(["upper-bound", "--bogus"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE
    assert main(["oracle-check", "--dim", "3", "--horizons", "3", "--seeds", "1",
                 "--out", "/dev/null"]) == EXIT_USAGE


def test_threads_env_validated(monkeypatch, tmp_path):
    monkeypatch.setenv("DYNREG_THREADS", "zero")
    assert main(["lower-bound", "--seeds", "2", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE


def test_invariant_violation_exit(monkeypatch, tmp_path):
    import dynreg.cli as cli

    monkeypatch.setattr(cli, "theorem2_bound", lambda *a, **k: -1.0)
    rc = main(["upper-bound", "--horizons", "16", "--seeds", "2", "--out", str(tmp_path / "x.csv")])
    assert rc == EXIT_INVARIANT


def test_run_subcommand_with_config(tmp_path):
    cfg_path = tmp_path / "c.ini"
    cfg_path.write_text(CONFIG)
    out = tmp_path / "r.csv"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == EXIT_OK
    assert len(_rows(out)) == 40


def test_module_entry_point(tmp_path):
    out = tmp_path / "l.csv"
    proc = subprocess.run([sys.executable, "-m", "dynreg", "lemmas", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "5/5" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "dynreg", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "lower-bound" in proc.stdout


def test_loglog_slope():
    assert loglog_slope([1, 4, 16], [1, 2, 4]) == pytest.approx(0.5)
    assert loglog_slope([4], [2]) is None
    assert loglog_slope([1, 2], [0.0, 1.0]) is None
