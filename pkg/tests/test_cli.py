import csv
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from a2c2 import cli
from a2c2.config import ConfigError, ExperimentConfig, parse_config, serialize_config
from a2c2.harness import AGGREGATE_COLUMNS, RUN_COLUMNS
from a2c2.protocol import PROTOCOLS

BASE = """\
# default experiment
protocols = beta_aware, alpha_unaware, parallel_exp3
M = 4
K = 10
T = 3000
runs = 2
seed = 3
epsilon_step = 0.01

[adversary]
name = burst
c_low = 0.2
c_high = 0.9
l_high = 0.9
burst_len = 50
n_bursts = 2

[protocol]
beta = auto
"""


def test_parse_defaults():
    cfg = parse_config(BASE)
    assert (cfg.M, cfg.K, cfg.epsilon_step) == (4, 10, 0.01)
    assert cfg.protocols == ("beta_aware", "alpha_unaware", "parallel_exp3")
    assert cfg.adversary_params["burst_len"] == 50
    assert cfg.beta == "auto"
    assert cfg.workers == 1 and cfg.checkpoints == ()


def test_m_exceeds_k_is_named():
    with pytest.raises(ConfigError) as e:
        parse_config(BASE.replace("M = 4", "M = 12"))
    assert any("line 3" in p and "M exceeds K" in p for p in e.value.problems)


def test_all_problems_reported_with_lines():
    text = BASE.replace("runs = 2", "runs = two").replace("seed = 3", "colour = red")
    text = text.replace("n_bursts = 2", "n_bursts = 2\nspeed = 4")
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    probs = e.value.problems
    assert any("line 6" in p and "'runs'" in p for p in probs)
    assert any("line 7" in p and "unknown key 'colour'" in p for p in probs)
    assert any("unknown key [adversary] 'speed'" in p for p in probs)


def test_missing_and_bad_values():
    with pytest.raises(ConfigError) as e:
        parse_config("protocols = alpha_aware\nK = 5\nT = 10\nepsilon_step = 0\n")
    probs = " ".join(e.value.problems)
    assert "missing required key 'M'" in probs
    assert "epsilon_step" in probs
    assert "needs 'alpha'" in probs


def test_checkpoints_validated():
    with pytest.raises(ConfigError):
        parse_config(BASE.replace("runs = 2", "runs = 2\ncheckpoints = 2000, 1000"))
    with pytest.raises(ConfigError):
        parse_config(BASE.replace("runs = 2", "runs = 2\ncheckpoints = 5000"))
    assert parse_config(BASE.replace("runs = 2", "runs = 2\ncheckpoints = 1000, 3000")).checkpoints == (1000, 3000)


def test_round_trip_example():
    cfg = parse_config(BASE)
    assert parse_config(serialize_config(cfg)) == cfg


configs = st.builds(
    lambda protos, M, extra, T, runs, seed, eps, alpha, beta, nb: ExperimentConfig(
        protocols=tuple(protos),
        M=M,
        K=M + extra,
        T=T,
        runs=runs,
        seed=seed,
        epsilon_step=eps,
        adversary="burst",
        adversary_params=dict(c_low=0.1, c_high=0.5, l_high=0.9, burst_len=3, n_bursts=nb),
        alpha=alpha,
        beta=beta,
    ),
    st.lists(st.sampled_from(PROTOCOLS), min_size=1, max_size=5, unique=True),
    st.integers(2, 8),
    st.integers(0, 8),
    st.integers(1, 10**7),
    st.integers(1, 100),
    st.integers(0, 2**32),
    st.floats(1e-4, 1.0),
    st.one_of(st.just("auto"), st.floats(0, 1)),
    st.one_of(st.just("auto"), st.floats(0, 1)),
    st.integers(0, 9),
)


@given(configs)
def test_round_trip_property(cfg):
    assert parse_config(serialize_config(cfg)) == cfg


# -------------------------------------------------------------------- run


def write_cfg(tmp_path, text=BASE):
    path = tmp_path / "exp.cfg"
    out = tmp_path / "out"
    out.mkdir(exist_ok=True)
    path.write_text(text)
    return path, out


def run_cli(path, out, *extra):
    return cli.main(
        ["run", "--config", str(path), "--output", str(out / "runs.csv"), "--aggregate-output", str(out / "agg.csv"), *extra]
    )


def test_run_is_reproducible(tmp_path):
    path, out = write_cfg(tmp_path)
    assert run_cli(path, out) == 0
    first = (out / "runs.csv").read_bytes(), (out / "agg.csv").read_bytes()
    assert run_cli(path, out) == 0
    assert ((out / "runs.csv").read_bytes(), (out / "agg.csv").read_bytes()) == first


def test_run_schema_one_row_per_protocol_and_checkpoint(tmp_path):
    path, out = write_cfg(tmp_path)
    assert run_cli(path, out, "--checkpoints", "1000,3000") == 0
    with open(out / "runs.csv") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == RUN_COLUMNS
    assert len(rows) == 1 + 3 * 2 * 2
    with open(out / "agg.csv") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == AGGREGATE_COLUMNS
    assert sorted((r[0], r[2]) for r in rows[1:]) == sorted(
        (p, t) for p in ("beta_aware", "alpha_unaware", "parallel_exp3") for t in ("1000", "3000")
    )
    assert all(r[5] == "2" for r in rows[1:])


def test_run_zero_runs_is_usage_error(tmp_path):
    path, out = write_cfg(tmp_path)
    assert run_cli(path, out, "--runs", "0") == 1
    assert not (out / "runs.csv").exists()


def test_flags_override_file(tmp_path):
    path, out = write_cfg(tmp_path)
    assert run_cli(path, out, "--protocols", "parallel_exp3", "--set", "adversary.n_bursts=1") == 0
    with open(out / "agg.csv") as f:
        rows = list(csv.reader(f))[1:]
    assert {r[0] for r in rows} == {"parallel_exp3"}


def test_unwritable_output_is_runtime_error(tmp_path):
    path, out = write_cfg(tmp_path)
    code = cli.main(["run", "--config", str(path), "--output", str(tmp_path / "missing" / "r.csv")])
    assert code == 2


def test_bad_command_line_is_usage_error(capsys):
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["bounds", "--models", "nope"]) == 1


# ----------------------------------------------------------------- bounds


def read_bounds(capsys):
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    return rows


def test_bounds_sweep_players(capsys):
    models = "alpha_aware,beta_aware,alpha_unaware,beta_unaware,no_sensing_reference"
    assert cli.main(["bounds", "--models", models, "--M-range", "2:16", "--T", "1e6", "--attack", "0.7"]) == 0
    rows = read_bounds(capsys)
    by = {}
    for r in rows:
        by.setdefault(r["model"], {})[int(r["M"])] = float(r["bound"])
    growth = {m: math.log(v[16] / v[2]) for m, v in by.items()}
    ref = growth.pop("no_sensing_reference")
    assert all(ref > g for g in growth.values())


def test_bounds_sweep_attack(capsys):
    assert cli.main(["bounds", "--M-range", "4", "--T", "1e6", "--attack", "0.4,0.6,0.8"]) == 0
    by = {}
    for r in read_bounds(capsys):
        by.setdefault(r["model"], []).append(float(r["bound"]))
    assert len(set(by["no_sensing_reference"])) == 1
    for m in ("alpha_aware", "beta_aware", "alpha_unaware", "beta_unaware"):
        assert by[m][0] < by[m][1] < by[m][2]


def test_bounds_single_reference_point(capsys):
    assert cli.main(["bounds", "--models", "no_sensing_reference", "--M-range", "4", "--T", "1e6"]) == 0
    (row,) = read_bounds(capsys)
    assert float(row["bound"]) == pytest.approx(4 * 10**1.5 * 1e6**0.875)


# ------------------------------------------------------------------- plot


def write_agg(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(AGGREGATE_COLUMNS)
        w.writerows(rows)


def test_plot_empty_body(tmp_path):
    src, dst = tmp_path / "a.csv", tmp_path / "a.svg"
    write_agg(src, [])
    assert cli.main(["plot", str(src), str(dst)]) == 0
    assert "<svg" in dst.read_text()


def test_plot_two_protocols_monotone(tmp_path):
    src, dst = tmp_path / "a.csv", tmp_path / "a.svg"
    rows = [
        ["beta_aware", "burst(T=1)", t, m, 1.0, 5] for t, m in ((1000, 10.0), (2000, 15.0), (4000, 30.0))
    ] + [["parallel_exp3", "burst(T=1)", t, m, 2.0, 5] for t, m in ((1000, 20.0), (4000, 90.0), (2000, 40.0))]
    write_agg(src, rows)
    drawn = cli.cmd_plot(src, dst)
    assert set(drawn) == {"beta_aware", "parallel_exp3"}
    for x, y in drawn.values():
        assert list(x) == sorted(x) and list(y) == sorted(y)
    svg = dst.read_text()
    assert "beta_aware" in svg and "parallel_exp3" in svg


def test_plot_malformed_csv(tmp_path):
    src = tmp_path / "bad.csv"
    src.write_text("a,b\n1,2\n")
    assert cli.main(["plot", str(src), str(tmp_path / "x.svg")]) == 2
    write_agg(src, [["p", "e", "x", "1", "1", "1"]])
    assert cli.main(["plot", str(src), str(tmp_path / "x.svg")]) == 2


def test_probe_sync_command(capsys):
    assert cli.main(["probe-sync", "--T", "400", "--trials", "200", "--target", "none"]) == 0
    assert "desync_rate=0.0" in capsys.readouterr().out
