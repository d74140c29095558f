import itertools
import logging

import pytest
import yaml
from hypothesis import given, settings, strategies as st

from ptp.components import REGISTRY, default_params
from ptp.config import (
    ConfigurationError, GlobalParameterError, GlobalParams, apply_overrides, dump_config,
    get_path, load_config, merge, parse_override, resolve_component_config,
)


def write(path, data):
    path.write_text(yaml.safe_dump(data) if not isinstance(data, str) else data)
    return path


def test_single_file_identity(tmp_path):
    assert load_config([write(tmp_path / "a.yml", {"x": 1})]) == {"x": 1}


def test_default_configs_precedence(tmp_path):
    write(tmp_path / "b.yml", {"x": 0, "y": 2})
    a = write(tmp_path / "a.yml", {"default_configs": "b.yml", "x": 1})
    assert load_config([a]) == {"x": 1, "y": 2}


def test_default_configs_nested_relative_paths(tmp_path):
    (tmp_path / "defaults").mkdir()
    write(tmp_path / "defaults" / "base.yml", {"z": 3, "y": 0})
    write(tmp_path / "defaults" / "mid.yml", {"default_configs": "base.yml", "y": 2})
    a = write(tmp_path / "a.yml", {"default_configs": "defaults/mid.yml", "x": 1})
    assert load_config([a]) == {"x": 1, "y": 2, "z": 3}


def test_default_configs_cycle(tmp_path):
    a = write(tmp_path / "a.yml", {"default_configs": "b.yml"})
    write(tmp_path / "b.yml", {"default_configs": "a.yml"})
    with pytest.raises(ConfigurationError, match="cycle") as err:
        load_config([a])
    assert "a.yml" in str(err.value) and "b.yml" in str(err.value)


def test_diamond_include_is_not_a_cycle(tmp_path):
    write(tmp_path / "d.yml", {"d": 1})
    write(tmp_path / "b.yml", {"default_configs": "d.yml", "b": 1})
    write(tmp_path / "c.yml", {"default_configs": "d.yml", "c": 1})
    a = write(tmp_path / "a.yml", {"default_configs": "b.yml,c.yml"})
    assert load_config([a]) == {"b": 1, "c": 1, "d": 1}


def test_depth_cap(tmp_path):
    for i in range(40):
        write(tmp_path / f"f{i}.yml", {"default_configs": f"f{i + 1}.yml", f"k{i}": i})
    write(tmp_path / "f40.yml", {"end": True})
    with pytest.raises(ConfigurationError, match="deeper"):
        load_config([tmp_path / "f0.yml"])


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_config([tmp_path / "nope.yml"])


def test_parse_error_reports_file_and_line(tmp_path):
    bad = write(tmp_path / "bad.yml", "a: 1\nb: [1, 2\nc: 3\n")
    with pytest.raises(ConfigurationError, match=r"bad\.yml:\d+"):
        load_config([bad])


def test_top_level_must_be_map(tmp_path):
    with pytest.raises(ConfigurationError, match="map"):
        load_config([write(tmp_path / "l.yml", "- 1\n- 2\n")])


def test_files_merge_left_to_right(tmp_path):
    a = write(tmp_path / "a.yml", {"x": 1, "n": {"p": 1, "q": 1}})
    b = write(tmp_path / "b.yml", {"x": 2, "n": {"q": 2}})
    assert load_config([a, b]) == {"x": 2, "n": {"p": 1, "q": 2}}
    assert load_config(f"{a},{b}") == load_config([a, b])


def test_load_is_deterministic(tmp_path):
    write(tmp_path / "b.yml", {"y": [1, 2], "z": {"w": 0.5}})
    a = write(tmp_path / "a.yml", {"default_configs": "b.yml", "x": "s"})
    assert dump_config(load_config([a])) == dump_config(load_config([a]))


@pytest.mark.parametrize("base, override, expected", [
    ({"a": 1, "b": {"c": 2}}, {"b": {"c": 3, "d": 4}}, {"a": 1, "b": {"c": 3, "d": 4}}),
    ({"a": 1, "b": {"c": 2}}, {}, {"a": 1, "b": {"c": 2}}),
    ({"l": [1, 2]}, {"l": [9]}, {"l": [9]}),
    ({"a": 1}, {"a": {"b": 2}}, {"a": {"b": 2}}),
    ({"a": {"b": 2}}, {"a": 5}, {"a": 5}),
])
def test_merge(base, override, expected):
    assert merge(base, override) == expected


def test_merge_does_not_mutate():
    base, override = {"a": {"b": 1}}, {"a": {"c": 2}}
    merge(base, override)
    assert base == {"a": {"b": 1}} and override == {"a": {"c": 2}}


keys = st.sampled_from(list("abcd"))
leaf = st.one_of(st.integers(-3, 3), st.lists(st.integers(0, 3), max_size=2))
trees = st.recursive(leaf, lambda children: st.dictionaries(keys, children, max_size=3), max_leaves=8)
maps = st.dictionaries(keys, trees, max_size=4)


def _no_flips(*ts):
    """True when no path is a map in one tree and a non-map in another."""
    def walk(t, prefix, acc):
        for k, v in t.items():
            p = prefix + (k,)
            acc.setdefault(p, set()).add(isinstance(v, dict))
            if isinstance(v, dict):
                walk(v, p, acc)
    acc = {}
    for t in ts:
        walk(t, (), acc)
    return all(len(kinds) == 1 for kinds in acc.values())


@settings(max_examples=200, deadline=None)
@given(maps, maps, maps)
def test_merge_associative(a, b, c):
    if _no_flips(a, b, c):
        assert merge(merge(a, b), c) == merge(a, merge(b, c))


def test_get_and_set_path():
    tree = {"training": {"task": {"type": "parity"}}}
    assert get_path(tree, "training.task.type") == "parity"
    assert get_path(tree, "training.nope", None) is None
    with pytest.raises(KeyError):
        get_path(tree, "validation.task")


@pytest.mark.parametrize("text, key, value", [
    ("training.task.batch_size=64", "training.task.batch_size", 64),
    ("a.b=0.5", "a.b", 0.5),
    ("a=[1, 2]", "a", [1, 2]),
    ("a=hello", "a", "hello"),
    ("a.b=true", "a.b", True),
])
def test_parse_override(text, key, value):
    assert parse_override(text) == (key, value)


@pytest.mark.parametrize("text", ["novalue", "=3", "a..b=1", "a=[1,"])
def test_parse_override_rejects(text):
    with pytest.raises(ConfigurationError):
        parse_override(text)


def test_overrides_are_final_layer():
    tree = {"training": {"task": {"batch_size": 8, "type": "parity"}}}
    out = apply_overrides(tree, ["training.task.batch_size=64"])
    assert out["training"]["task"] == {"batch_size": 64, "type": "parity"}


# component configs ---------------------------------------------------------

def test_resolve_overrides_defaults():
    cfg = resolve_component_config({"dropout": 0.0}, {"type": "ffn", "priority": 2, "dropout": 0.5}, "m")
    assert cfg.params["dropout"] == 0.5 and cfg.priority == 2.0 and cfg.type_id == "ffn"


def test_resolve_stream_remap():
    cfg = resolve_component_config({}, {"type": "t1", "streams": {"output2": "data_stream_y"}},
                                   "task", require_priority=False)
    assert cfg.stream_remap == {"output2": "data_stream_y"}
    assert cfg.stream("output2") == "data_stream_y" and cfg.stream("output1") == "output1"


def test_resolve_freeze_and_load():
    cfg = resolve_component_config({}, {"type": "ffn", "priority": 2, "freeze": True,
                                        "load": {"file": "x.ckpt", "model": "enc"}}, "m")
    assert cfg.frozen is True and cfg.load_from == ("x.ckpt", "enc")
    plain = resolve_component_config({}, {"type": "ffn", "priority": 1, "load": "y.ckpt"}, "m")
    assert plain.frozen is False and plain.load_from == ("y.ckpt", "m")


def test_resolve_globals_and_disable():
    cfg = resolve_component_config({}, {"type": "x", "priority": 1.5, "globals": {"num_classes": "k"},
                                        "disable": "test, validation"}, "m")
    assert cfg.global_key("num_classes") == "k" and cfg.disable == ("test", "validation")
    assert cfg.priority == 1.5


@pytest.mark.parametrize("section, match", [
    ({"priority": 1}, "type"),
    ({"type": "x", "priority": "high"}, "numeric"),
    ({"type": "x"}, "priority"),
    ({"type": "x", "priority": float("inf")}, "finite"),
    ({"type": "x", "priority": 1, "streams": {"a": ""}}, "nonempty"),
])
def test_resolve_errors(section, match):
    with pytest.raises(ConfigurationError, match=match):
        resolve_component_config({}, section, "m")


def test_unknown_remap_source_is_not_an_error():
    cfg = resolve_component_config({}, {"type": "x", "priority": 1, "streams": {"bogus": "y"}}, "m")
    assert cfg.stream_remap == {"bogus": "y"}


def test_unknown_keys_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="ptp.config"):
        resolve_component_config({"a": 1}, {"type": "x", "priority": 1, "zzz": 2}, "m")
    assert "zzz" in caplog.text


@pytest.mark.parametrize("type_id", sorted(REGISTRY))
def test_zoo_defaults_are_complete(type_id):
    section = {"type": type_id, "priority": 1}
    cfg = resolve_component_config(default_params(type_id), section, "c")
    assert set(cfg.params) == set(REGISTRY[type_id].defaults)


# globals -------------------------------------------------------------------

def test_globals_publish_and_read():
    g = GlobalParams()
    g.publish("num_classes", 4, "task")
    assert g.get("num_classes") == 4


def test_globals_idempotent_republish():
    g = GlobalParams()
    g.publish("num_classes", 4, "task")
    g.publish("num_classes", 4, "model")
    assert g.publishers["num_classes"] == "task"


def test_globals_conflict_names_both_publishers():
    g = GlobalParams()
    g.publish("num_classes", 4, "task")
    with pytest.raises(GlobalParameterError) as err:
        g.publish("num_classes", 5, "model")
    assert "task" in str(err.value) and "model" in str(err.value)


def test_globals_unset_read_is_error():
    with pytest.raises(GlobalParameterError, match="num_classes"):
        GlobalParams().get("num_classes", reader="ffn")


def test_globals_empty_key():
    with pytest.raises(GlobalParameterError):
        GlobalParams().publish("", 1, "x")


def test_globals_order_independent():
    items = [("a", 1, "p"), ("b", 2, "q"), ("a", 1, "r"), ("c", [1, 2], "s")]
    results = []
    for perm in itertools.permutations(items):
        g = GlobalParams()
        for key, value, who in perm:
            g.publish(key, value, who)
        results.append(g.entries)
    assert all(r == results[0] for r in results)
