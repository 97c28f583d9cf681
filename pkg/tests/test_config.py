import pytest

from malleasim.config import InvalidConfig, RunConfig, config_from_dict, load_config
from malleasim.reconfig import OverheadModel


def test_defaults():
    cfg = load_config(None)
    assert (cfg.total_nodes, cfg.job_cap, cfg.tick_s, cfg.idle_w, cfg.loaded_w,
            cfg.threshold_pct) == (128, 32, 10.0, 100.0, 340.0, 10.0)
    assert cfg.overhead == OverheadModel()
    assert cfg.sim_config().total_nodes == 128


def test_nested_sections(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("cluster: {total_nodes: 64, job_cap: 16}\n"
                    "scheduler: {tick_s: 5, malleability: false}\n"
                    "overhead: {spawn_base_s: 0, spawn_per_proc_s: 0, latency_s: 0}\n"
                    "energy: {idle_w: 90}\nprofiles: {threshold_pct: 15, dir: /x}\n")
    cfg = load_config(path)
    assert (cfg.total_nodes, cfg.job_cap, cfg.tick_s, cfg.malleability) == (64, 16, 5.0, False)
    assert cfg.overhead.spawn_base_s == 0.0 and cfg.overhead.bandwidth_bytes_per_s == 12.5e9
    assert (cfg.idle_w, cfg.loaded_w, cfg.threshold_pct, cfg.profiles_dir) == (90.0, 340.0, 15.0, "/x")


@pytest.mark.parametrize("doc, message", [
    ({"cluster": {"total_nodes": 16}}, "job_cap"),
    ({"cluster": {"nodes": 16}}, "cluster.nodes"),
    ({"network": {}}, "network"),
    ({"scheduler": {"tick_s": 0}}, "tick_s"),
    ({"scheduler": {"malleability": "yes"}}, "malleability"),
    ({"cluster": {"total_nodes": 12.5}}, "integer"),
    ({"energy": {"idle_w": -1}}, "wattages"),
    ({"overhead": {"bandwidth_bytes_per_s": 0}}, "bandwidth"),
    ({"overhead": {"warp": 1}}, "overhead.warp"),
    ([1, 2], "mapping"),
])
def test_invalid_configs(doc, message):
    with pytest.raises(InvalidConfig, match=message):
        config_from_dict(doc)


def test_cap_must_fit_cluster():
    with pytest.raises(InvalidConfig):
        RunConfig(total_nodes=8, job_cap=32)


@pytest.mark.parametrize("text, value", [("1.0e9", 1.0e9), ("2e10", 2e10), ("1.5e+9", 1.5e9)])
def test_scientific_notation_strings(text, value):
    cfg = config_from_dict({"overhead": {"bandwidth_bytes_per_s": text}})
    assert cfg.overhead.bandwidth_bytes_per_s == value


@pytest.mark.parametrize("text", ["fast", "nan"])
def test_non_numeric_strings_rejected(text):
    with pytest.raises(InvalidConfig, match="number"):
        config_from_dict({"overhead": {"bandwidth_bytes_per_s": text}})


def test_yaml_exponent_without_sign(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("overhead: {bandwidth_bytes_per_s: 1.0e9}\n")
    assert load_config(path).overhead.bandwidth_bytes_per_s == 1.0e9
