import json
import math
import re
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from rwre_mle.cli import main
from rwre_mle.env_models import Beta, Temkin, temkin_benchmark, two_point_benchmark
from rwre_mle.harness import (
    ConfigError,
    EmptyCell,
    ExperimentSpec,
    InsufficientData,
    ReplicateRecord,
    TMaxRule,
    diagnostics,
    emit_boxplot_svg,
    emit_csv,
    emit_summary_csv,
    load_spec,
    read_records_csv,
    replicate_seeds,
    run_experiment,
    run_replicate,
    spec_from_dict,
    summarize,
)
from rwre_mle.harness.output import RECORD_COLUMNS, SUMMARY_COLUMNS, LinearAxis
from rwre_mle.harness.summary import quartile_stats
from rwre_mle.walk_sim import Walker, gen_environment

TP = two_point_benchmark()
TK = temkin_benchmark()
CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _small(model=TP, **kw):
    kw.setdefault("n_list", (50, 100))
    kw.setdefault("replicates", 6)
    kw.setdefault("seed", 17)
    return ExperimentSpec(name=kw.pop("name", "small"), model=model, **kw)


# -- config ----------------------------------------------------------------------


def test_shipped_configs_load():
    tp = load_spec(CONFIGS / "two_point.toml")
    tk = load_spec(CONFIGS / "temkin.toml")
    assert tp.n_list == tuple(range(100, 1001, 100)) and tp.replicates == 1000
    assert tp.model.p == pytest.approx(TP.p, abs=1e-12)
    assert tk.model.p == pytest.approx(TK.p, abs=1e-12) and tk.model.a == 0.4
    assert tp.t_max.rule == "largest_n" and tp.cap(100) == tp.cap(1000) == 1_077_218


def test_unknown_keys_are_errors():
    base = {"name": "x", "model": {"family": "two_point", "p": 0.548}}
    spec_from_dict(base)
    with pytest.raises(ConfigError):
        spec_from_dict({**base, "replicate": 3})
    with pytest.raises(ConfigError):
        spec_from_dict({**base, "model": {"family": "two_point", "p": 0.548, "q": 1}})
    with pytest.raises(ConfigError):
        spec_from_dict({**base, "t_max": {"rule": "per_n", "scale": 2}})


@pytest.mark.parametrize(
    "bad",
    [
        {"n_list": [200, 100]},
        {"replicates": 0},
        {"level": 1.5},
        {"theta0": [1.5]},
        {"t_max": {"rule": "fixed"}},
        {"t_max": {"rule": "sometimes"}},
        {"model": {"family": "two_point", "p": 0.995}},
        {"model": {"family": "two_point", "p": 0.5, "kappa": 0.9}},
        {"model": {"family": "cauchy"}},
    ],
)
def test_invalid_specs(bad):
    cfg = {"name": "x", "model": {"family": "two_point", "p": 0.548}, **bad}
    with pytest.raises(ConfigError):
        spec_from_dict(cfg)


def test_unparseable_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("name = \n")
    with pytest.raises(ConfigError):
        load_spec(p)
    with pytest.raises(ConfigError):
        load_spec(tmp_path / "missing.toml")


def test_t_max_rules():
    assert TMaxRule("per_n").cap(100, 1000, 0.9) == 83_406
    assert TMaxRule("largest_n").cap(100, 1000, 0.9) == 1_077_218
    assert TMaxRule("fixed", value=5000).cap(100, 1000, 0.9) == 5000


def test_overrides():
    spec = _small().with_overrides(seed=3, replicates=None, n_list=(10, 20))
    assert spec.seed == 3 and spec.replicates == 6 and spec.n_list == (10, 20)


# -- experiment -------------------------------------------------------------------


def test_replicate_seeds_pure():
    assert replicate_seeds(5, 3) == replicate_seeds(5, 3)
    assert replicate_seeds(5, 3) != replicate_seeds(5, 4)
    assert replicate_seeds(5, 3) != replicate_seeds(6, 3)
    assert replicate_seeds(5, 3, 100) != replicate_seeds(5, 3, 200)


def test_two_replicates_deterministic():
    spec = _small(n_list=(100,), replicates=2)
    a, b = run_experiment(spec), run_experiment(spec)
    assert len(a) == 2 and a == b


def test_adding_replicates_keeps_earlier_records():
    few = run_experiment(_small(replicates=3))
    many = run_experiment(_small(replicates=6))
    assert [r for r in many if r.replicate < 3] == few


def test_threads_do_not_change_output(tmp_path):
    spec = _small(replicates=8)
    emit_csv(run_experiment(spec, threads=1), tmp_path / "a.csv")
    emit_csv(run_experiment(spec, threads=3), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_records_are_sorted_and_complete():
    recs = run_experiment(_small())
    assert [(r.n, r.replicate) for r in recs] == [(n, i) for n in (50, 100) for i in range(6)]
    for r in recs:
        assert r.error is None and not r.censored
        assert _small().model.in_box(r.theta_mle)
        assert r.ci[0][0] <= r.theta_mle[0] <= r.ci[0][1]


def test_capped_replicate_censors_every_later_n():
    spec = _small(t_max=TMaxRule("fixed", value=150), n_list=(10, 100, 150), replicates=4)
    recs = run_experiment(spec)
    for rep in range(4):
        flags = [r.censored for r in recs if r.replicate == rep]
        assert flags == sorted(flags)  # once censored, stays censored
    censored = [r for r in recs if r.censored]
    assert censored
    for r in censored:
        assert r.theta_mle is None and r.theta_mom is None and r.ci is None and r.total_steps <= 150


def test_continuation_record_matches_direct_walk():
    spec = _small(n_list=(50, 100), replicates=1)
    recs = run_replicate(spec, 0)
    env_seed, walk_seed = replicate_seeds(spec.seed, 0)
    o = Walker(gen_environment(TP, env_seed), np.random.default_rng(walk_seed), spec.cap(100)).advance_to(100)
    assert recs[1].total_steps == o.total_steps


def test_fresh_walk_mode_uses_independent_seeds():
    recs = run_experiment(_small(fresh_walk_per_n=True, replicates=2))
    seeds = {(r.env_seed, r.walk_seed) for r in recs}
    assert len(seeds) == 4


def test_continuation_law_matches_fresh_runs():
    # T_200 reached through T_100 versus T_200 from a fresh walk
    cont, fresh = [], []
    for r in range(400):
        w = Walker(gen_environment(TP, 10_000 + r), np.random.default_rng(20_000 + r), 10**7)
        w.advance_to(100)
        cont.append(w.advance_to(200).total_steps)
        w = Walker(gen_environment(TP, 30_000 + r), np.random.default_rng(40_000 + r), 10**7)
        fresh.append(w.advance_to(200).total_steps)
    assert stats.ks_2samp(cont, fresh).pvalue > 0.01


def test_beta_experiment_runs():
    spec = ExperimentSpec(
        name="beta", model=Beta(alpha=2.5, beta=2.0), n_list=(20,), replicates=3, seed=1,
        t_max=TMaxRule("fixed", value=10**6),
    )
    recs = run_experiment(spec)
    rows = summarize([r for r in recs if not r.censored])
    assert {row.estimator for row in rows} == {"mle[0]", "mle[1]"}


# -- summaries -------------------------------------------------------------------


def test_single_value_summary():
    s = quartile_stats([0.3])
    assert s["q1"] == s["median"] == s["q3"] == 0.3 and s["iqr"] == 0 and s["outliers"] == 0


def test_type7_quartiles():
    s = quartile_stats(np.arange(1, 101))
    assert (s["q1"], s["median"], s["q3"]) == (25.75, 50.5, 75.25)
    assert s["outliers"] == 0 and s["whisker_lo"] == 1 and s["whisker_hi"] == 100


def test_outlier_rule():
    vals = list(range(1, 21)) + [100, -60]
    s = quartile_stats(vals)
    lo, hi = s["q1"] - 1.5 * s["iqr"], s["q3"] + 1.5 * s["iqr"]
    assert s["outliers"] == sum(v < lo or v > hi for v in vals) == 2
    assert s["whisker_hi"] == 20 and s["whisker_lo"] == 1


def _censored(n, rep):
    return ReplicateRecord("x", n, rep, 1, 2, True, 500)


def test_all_censored_cell_raises():
    with pytest.raises(EmptyCell):
        summarize([_censored(100, 0), _censored(100, 1)])


def test_summary_counts_censored():
    recs = run_experiment(_small(replicates=4)) + [_censored(100, 9)]
    for r in recs:
        r.example = "x"
    rows = [r for r in summarize(recs) if r.n == 100]
    assert {r.estimator for r in rows} == {"mle", "mom"}
    assert all(r.count == 4 and r.censored == 1 and r.censored_frac == 0.2 for r in rows)


# -- CSV -------------------------------------------------------------------------


def test_empty_csv_is_header_only(tmp_path):
    emit_csv([], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == ",".join(RECORD_COLUMNS) + "\n"
    emit_summary_csv([], tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == ",".join(SUMMARY_COLUMNS) + "\n"


def test_csv_round_trip(tmp_path):
    recs = run_experiment(_small(replicates=3)) + [_censored(100, 7)]
    recs[-1].example = "small"
    emit_csv(recs, tmp_path / "r.csv")
    back = read_records_csv(tmp_path / "r.csv")
    assert len(back) == len(recs)
    for a, b in zip(recs, back):
        assert (a.n, a.replicate, a.env_seed, a.walk_seed, a.censored, a.total_steps) == (
            b.n, b.replicate, b.env_seed, b.walk_seed, b.censored, b.total_steps)
        if a.censored:
            assert b.theta_mle is None and b.ci is None
            continue
        assert np.array_equal(a.theta_mle, b.theta_mle) and np.array_equal(a.sigma_hat, b.sigma_hat)
        assert a.ci == b.ci and a.theta_mom == b.theta_mom and a.clipped_mom == b.clipped_mom


def test_censored_row_format(tmp_path):
    emit_csv([_censored(100, 0)], tmp_path / "r.csv")
    row = dict(zip(RECORD_COLUMNS, (tmp_path / "r.csv").read_text().splitlines()[1].split(",")))
    assert row["censored"] == "true" and row["theta_mle"] == "" and row["theta_mom"] == ""


def test_unwritable_path_reports_path(tmp_path):
    bad = tmp_path / "missing" / "r.csv"
    with pytest.raises(OSError, match="missing"):
        emit_csv([], bad)


# -- SVG -------------------------------------------------------------------------


def _fake_summaries(example="demo", ns=range(100, 1001, 100)):
    rng = np.random.default_rng(0)
    recs = []
    for n in ns:
        for rep in range(30):
            recs.append(ReplicateRecord(
                example, n, rep, 0, 0, False, 10, theta_mle=np.array([0.55 + rng.normal(0, 1 / math.sqrt(n))]),
                sigma_hat=np.eye(1), ci=[(0, 1)], theta_mom=0.55 + rng.normal(0, 3 / math.sqrt(n)),
                clipped_mom=False,
            ))
    return summarize(recs)


def test_svg_glyph_counts(tmp_path):
    text = emit_boxplot_svg(_fake_summaries(), tmp_path / "b.svg", {"demo": 0.548})
    assert len(re.findall(r'class="box (mle|mom)"', text)) == 20
    assert len(re.findall(r'class="box mle"[^>]*fill="white"', text)) == 10
    assert len(re.findall(r'class="box mom"[^>]*fill="#b0b0b0"', text)) == 10
    assert text.count('class="reference"') == 1
    assert text.startswith("<svg") and "href" not in text


def test_svg_mle_box_left_of_moment_box(tmp_path):
    text = emit_boxplot_svg(_fake_summaries(ns=[100]), tmp_path / "b.svg", {"demo": 0.548})
    x_mle = float(re.search(r'class="box mle" x="([-\d.]+)"', text).group(1))
    x_mom = float(re.search(r'class="box mom" x="([-\d.]+)"', text).group(1))
    assert x_mle < x_mom


def test_svg_reference_line_position(tmp_path):
    text = emit_boxplot_svg(_fake_summaries(), tmp_path / "b.svg", {"demo": 0.548})
    g = re.search(r'data-axis-lo="([^"]+)" data-axis-hi="([^"]+)" data-axis-top="([^"]+)" data-axis-height="([^"]+)"', text)
    lo, hi, top, height = map(float, g.groups())
    expected = top + (hi - 0.548) / (hi - lo) * height
    assert LinearAxis(lo, hi, top, height)(0.548) == pytest.approx(expected)
    y1 = float(re.search(r'class="reference" x1="[^"]+" y1="([^"]+)"', text).group(1))
    assert y1 == pytest.approx(expected, abs=0.006)


def test_svg_deterministic(tmp_path):
    rows = _fake_summaries()
    emit_boxplot_svg(rows, tmp_path / "a.svg", {"demo": 0.548})
    emit_boxplot_svg(rows, tmp_path / "b.svg", {"demo": 0.548})
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


# -- diagnostics ------------------------------------------------------------------


def _normal_records(count, n=1000, theta=0.548, seed=0):
    z = np.random.default_rng(seed).standard_normal(count)
    half = 1.959963984540054 / math.sqrt(n)
    return [
        ReplicateRecord("null", n, i, 0, 0, False, 1, theta_mle=np.array([theta + zi / math.sqrt(n)]),
                        sigma_hat=np.eye(1), ci=[(theta + zi / math.sqrt(n) - half, theta + zi / math.sqrt(n) + half)])
        for i, zi in enumerate(z)
    ]


def test_diagnostics_null_case():
    spec = ExperimentSpec(name="null", model=TP.with_theta([0.548]), n_list=(1000,), replicates=500)
    rep = diagnostics(_normal_records(500), spec)
    assert rep.ks_pvalue > 0.01 and rep.n_used == 500
    assert 0.92 <= rep.coverage <= 0.98
    assert rep.fisher_increasing is None


def test_diagnostics_detects_bias():
    spec = ExperimentSpec(name="null", model=TP.with_theta([0.548]), n_list=(1000,), replicates=500)
    rep = diagnostics(_normal_records(500, theta=0.548 + 2 / math.sqrt(1000)), spec)
    assert rep.ks_pvalue < 1e-6 and rep.coverage < 0.7


def test_diagnostics_needs_enough_replicates():
    spec = ExperimentSpec(name="null", model=TP, n_list=(1000,), replicates=50)
    with pytest.raises(InsufficientData):
        diagnostics(_normal_records(99), spec)


# -- CLI -------------------------------------------------------------------------


def test_cli_kappa(capsys):
    assert main(["kappa", "--family", "temkin", "--a", "0.4", "--p", "0.41"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["regime"] == "TransientSubBallistic" and out["e_rho"] == pytest.approx(1.0083333, rel=1e-6)


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('name = "x"\nsurprise = 1\n[model]\nfamily = "two_point"\np = 0.5\n')
    assert main(["experiment", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "surprise" in capsys.readouterr().err
    assert main(["kappa", "--family", "temkin", "--a", "0.4", "--p", "1.4"]) == 2


def test_cli_simulate_then_estimate(tmp_path, capsys):
    lc = tmp_path / "lc.csv"
    tr = tmp_path / "tr.csv"
    args = ["--family", "two_point", "--kappa", "0.9", "--seed", "4", "--walk-seed", "5"]
    assert main(["simulate", *args, "--n", "300", "--left-counts-out", str(lc), "--dump-trajectory", str(tr)]) == 0
    sim = json.loads(capsys.readouterr().out)
    assert sim["hit"] and len(tr.read_text().splitlines()) == sim["total_steps"] + 2
    assert main(["estimate", *args, "--left-counts", str(lc)]) == 0
    from_file = json.loads(capsys.readouterr().out)
    assert main(["estimate", *args, "--n", "300"]) == 0
    direct = json.loads(capsys.readouterr().out)
    assert from_file["theta_hat"] == direct["theta_hat"]
    assert "moment_estimate" in direct


def test_cli_experiment_outputs(tmp_path, capsys):
    spec = tmp_path / "tiny.toml"
    spec.write_text(
        'name = "tiny"\nreplicates = 120\nseed = 2\nn_list = [30, 60]\n'
        '[model]\nfamily = "temkin"\na = 0.4\nkappa = 0.9\n'
    )
    out = tmp_path / "out"
    code = main(["experiment", str(spec), "--out-dir", str(out), "--threads", "2"])
    assert code == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["tiny_boxplot.svg", "tiny_diagnostics.json", "tiny_records.csv", "tiny_summary.csv"]
    diag = json.loads((out / "tiny_diagnostics.json").read_text())
    assert diag["n"] == 60 and diag["failed_records"] == 0
    first = (out / "tiny_records.csv").read_bytes()
    assert main(["experiment", str(spec), "--out-dir", str(out), "--replicates", "120", "--n-list", "30,60"]) == 0
    assert (out / "tiny_records.csv").read_bytes() == first


def test_cli_bad_n_list(tmp_path):
    assert main(["experiment", str(CONFIGS / "temkin.toml"), "--n-list", "10,x", "--out-dir", str(tmp_path)]) == 2
    assert main(["experiment", str(CONFIGS / "temkin.toml"), "--n-list", "20,10", "--out-dir", str(tmp_path)]) == 2
