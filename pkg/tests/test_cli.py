import csv
from dataclasses import replace

import pytest

from lae2sim import cli, experiments
from lae2sim.config import ConfigError, PolicySpec, load_config, parse_config, with_mode
from lae2sim.trace import load_trace

CONFIG = """\
# small grid
seed = 3
cache_sizes = 4, 8
trace.catalog_size = 80
trace.length = 6000
trace.zipf_exponent = 0.9
trace.shift_period = 1500
trace.shift_fraction = 0.1
policy.0.kind = fifo
policy.1.kind = klru
policy.1.k_hits = 2
policy.2.kind = lfu
policy.3.kind = lae2
policy.3.top_k_fraction = 0.5
policy.3.update_interval = 500
topk_sweep = 1, 2, 8
ablation.warmup = 2000
metrics.stride = 250
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(CONFIG)
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    return list(csv.DictReader(lines[1:]))


def test_parse_config(config_file):
    cfg = load_config(config_file)
    assert cfg.cache_sizes == (4, 8)
    assert [p.kind for p in cfg.policies] == ["fifo", "klru", "lfu", "lae2"]
    assert cfg.synthetic.rng_seed == 3
    assert cfg.topk_sweep == (1, 2, 8)
    assert "seed=3" in cfg.describe()
    assert load_config(config_file, seed=11).seed == 11


@pytest.mark.parametrize("text", [
    "cache_sizes = 4\ntrace.catalog_size = 10\ntrace.length = 10\n",
    "cache_sizes = 4\npolicy.0.kind = nope\ntrace.catalog_size = 10\ntrace.length = 10\n",
    "cache_sizes = 4\npolicy.0.kind = fifo\ncolour = red\ntrace.catalog_size = 10\ntrace.length = 10\n",
    "policy.0.kind = fifo\ntrace.catalog_size = 10\ntrace.length = 10\n",
    "cache_sizes = 4\npolicy.0.kind = lae2\npolicy.0.B = 1\ntrace.catalog_size = 10\ntrace.length = 10\n",
    "cache_sizes = 4\npolicy.0.kind = fifo\ntrace.catalog_size = 10\n",
    "cache_sizes = 4\npolicy.0.kind = fifo\njust words\n",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_trace_path_relative_to_config(tmp_path):
    (tmp_path / "t.txt").write_text("N=3\n0\n1\n2\n0\n")
    (tmp_path / "c.cfg").write_text("cache_sizes = 2\npolicy.0.kind = fifo\ntrace.path = t.txt\n")
    cfg = load_config(tmp_path / "c.cfg")
    assert cfg.load_trace().length == 4


def test_run_comparison(config_file, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run-comparison", "--config", str(config_file), "--out", str(out)]) == 0
    rows = read_csv(out / "comparison.csv")
    rates = {(r["policy"], int(r["cache_size"])): float(r["hit_rate"]) for r in rows}
    assert set(p for p, _ in rates) == {"fifo", "klru2", "lfu", "lae2", "belady"}
    for K in (4, 8):
        assert all(rates[(p, K)] <= rates[("belady", K)] for p, k in rates if k == K)
    assert (out / "comparison_report.json").exists()


def test_distinct_ids_give_zero(tmp_path):
    (tmp_path / "t.txt").write_text("N=50\n" + "".join(f"{i}\n" for i in range(50)))
    (tmp_path / "c.cfg").write_text("cache_sizes = 2, 5\npolicy.0.kind = fifo\ntrace.path = t.txt\n")
    out = tmp_path / "out"
    assert cli.main(["run-comparison", "--config", str(tmp_path / "c.cfg"), "--out", str(out)]) == 0
    assert all(float(r["hit_rate"]) == 0.0 for r in read_csv(out / "comparison.csv"))


def test_run_topk_endpoints(config_file, tmp_path):
    cfg = load_config(config_file)
    out = experiments.run_topk_sweep(cfg, tmp_path)
    base = cfg.lae2_base()
    for K in cfg.cache_sizes:
        arms_cfg = replace(cfg, cache_sizes=(K,), policies=(
            with_mode(base, "prediction", label="p"), with_mode(base, "e2", label="e")))
        arms = experiments.run_comparison(arms_cfg, tmp_path / f"cmp{K}")
        assert out.table[(K, 1)] == arms.table[("p", K)]
        assert out.table[(K, 8)] == arms.table[("e", K)]
    rows = read_csv(tmp_path / "topk.csv")
    assert len(rows) == 6


def test_run_ablation(config_file, tmp_path):
    cfg = load_config(config_file)
    out = experiments.run_ablation(cfg, tmp_path)
    assert out.ok
    for K in cfg.cache_sizes:
        lae2 = out.table[(K, "lae2")]
        pred = out.table[(K, "prediction_only")]
        before = lae2["t"] < cfg.warmup
        assert before.any()
        assert (lae2["cumulative"][before] == pred["cumulative"][before]).all()
    rows = read_csv(tmp_path / "ablation.csv")
    assert {r["arm"] for r in rows} == {"e2_only", "prediction_only", "lae2"}
    assert len(read_csv(tmp_path / "ablation_summary.csv")) == 6


def test_run_containment(config_file, tmp_path):
    assert cli.main(["run-containment", "--config", str(config_file), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "containment_K8.csv")
    fractions = [float(r["containment_fraction"]) for r in rows]
    assert [int(r["k"]) for r in rows] == list(range(1, 9))
    assert fractions == sorted(fractions) and fractions[-1] == 1.0


def test_gen_trace(config_file, tmp_path):
    assert cli.main(["gen-trace", "--config", str(config_file), "--out", str(tmp_path)]) == 0
    tr = load_trace(tmp_path / "trace.txt")
    assert tr == load_config(config_file).load_trace()


@pytest.mark.parametrize("verb", ["run-comparison", "run-topk", "run-ablation", "run-containment", "gen-trace"])
def test_reruns_byte_identical(config_file, tmp_path, verb):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert cli.main([verb, "--config", str(config_file), "--out", str(d)]) == 0
    names = sorted(p.name for p in dirs[0].iterdir())
    assert names == sorted(p.name for p in dirs[1].iterdir())
    for name in names:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_threads_match_serial(config_file, tmp_path):
    cli.main(["run-comparison", "--config", str(config_file), "--out", str(tmp_path / "s")])
    cli.main(["run-comparison", "--config", str(config_file), "--out", str(tmp_path / "p"), "--threads", "2"])
    assert (tmp_path / "s" / "comparison.csv").read_bytes() == (tmp_path / "p" / "comparison.csv").read_bytes()


def test_cell_failure_exit_code(config_file, tmp_path, monkeypatch):
    real = experiments.build_policy

    def flaky(spec, **kw):
        if spec.kind == "lfu":
            raise RuntimeError("boom")
        return real(spec, **kw)

    monkeypatch.setattr(experiments, "build_policy", flaky)
    code = cli.main(["run-comparison", "--config", str(config_file), "--out", str(tmp_path)])
    assert code == 2
    rows = read_csv(tmp_path / "comparison.csv")
    failed = [r for r in rows if r["error"]]
    assert {r["policy"] for r in failed} == {"lfu"}
    assert all(r["hit_rate"] for r in rows if not r["error"])


def test_bad_config_exit_code(tmp_path):
    (tmp_path / "c.cfg").write_text("cache_sizes = 2\n")
    assert cli.main(["run-comparison", "--config", str(tmp_path / "c.cfg"), "--out", str(tmp_path)]) == 1


def test_policy_spec_label():
    assert PolicySpec("klru", (("k_hits", "3"),)).label == "klru3"
    assert PolicySpec("lae2", (("mode", "e2"),)).label == "e2_only"
