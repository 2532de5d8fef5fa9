import json
import math

import numpy as np
import pytest

from piprl.harness.agent import episode_rngs, run_episode
from piprl.harness.cli import main
from piprl.harness.config import ConfigError, RunConfig, bundled_map, dump_config, parse_config
from piprl.harness.evaluate import evaluate
from piprl.harness.tasks import (CategoryUnsatisfiable, TaskSpec, category_of, default_task,
                                 generate_tasks, geodesic_distance, shortest_actions, task_plan)
from piprl.harness.train import early_stop, load_suite, make_agent, train
from piprl.sim.env import A_F, AgentState, step_agent, target_found
from piprl.sim.floorplan import read_map
from piprl.sim.propagation import trace_paths


def quick(**kw):
    base = dict(maps=("empty",), episodes_per_task=4, horizon=20, eval_repeats=2, seed=0)
    base.update(kw)
    return RunConfig(**base)


# -- tasks ---------------------------------------------------------------------

def test_empty_room_has_no_deep_nlos():
    with pytest.raises(CategoryUnsatisfiable):
        generate_tasks([read_map(bundled_map("empty"))], {"2+-NLOS": 1}, np.random.default_rng(0))


def test_multi_room_quota():
    plan = read_map(bundled_map("test_01_multi_room"))
    tasks = generate_tasks([plan], rng=np.random.default_rng(0))
    assert len(tasks) == 10
    assert [t.category for t in tasks] == ["LOS"] * 3 + ["1-NLOS"] * 3 + ["2+-NLOS"] * 4
    for t in tasks:
        ell = trace_paths(plan, plan.cell_center(*t.start_cell), 3,
                          source=plan.cell_center(*t.tx_cell)).link_state
        assert category_of(ell) == t.category
    assert sum(t.category == "2+-NLOS" for t in tasks) == 4


def test_task_generation_is_seeded():
    plan = read_map(bundled_map("two_room"))
    a = generate_tasks([plan], rng=np.random.default_rng(5))
    b = generate_tasks([plan], rng=np.random.default_rng(5))
    assert a == b


def test_header_task_category_matches_trace():
    plan = read_map(bundled_map("two_room"))
    t = default_task(plan)
    assert t.category == category_of(trace_paths(plan, plan.start).link_state)


# -- NPL -------------------------------------------------------------------------

def test_straight_corridor_shortest_count():
    plan = read_map(bundled_map("empty"))
    task = TaskSpec("empty", plan.cell_of(7.0, 5.0), plan.cell_of(2.0, 5.0), "LOS")
    p = task_plan(plan, task)
    start = p.cell_center(*task.start_cell)
    d = geodesic_distance(p, start, p.tx)
    assert shortest_actions(p, start, 0.0) == math.ceil((d - 0.5) / 0.25)
    # replaying that many forward moves finds the target: NPL 1
    s = AgentState(*start, 0.0)
    for _ in range(shortest_actions(p, start, 0.0)):
        s = step_agent(p, s, A_F)
    assert target_found(p, s.x, s.y)


def test_turn_count_included():
    plan = read_map(bundled_map("empty"))
    start = (2.0, 5.0)
    ahead, behind = shortest_actions(plan, start, 0.0), shortest_actions(plan, start, 180.0)
    assert behind - ahead == 17  # 180 deg minus one turn of slack


def test_geodesic_bends_around_wall():
    plan = read_map(bundled_map("two_room"))
    a, b = plan.start, plan.tx
    assert geodesic_distance(plan, a, b) > math.hypot(b[0] - a[0], b[1] - a[1])


def test_npl_at_least_one_for_successes():
    cfg = quick(maps=("two_room", "empty"))
    plans, tasks = load_suite(cfg)
    rows = []
    evaluate(cfg, make_agent("wan", cfg), tasks, plans, repeats=2, rows=rows)
    for r in rows:
        if r["success"]:
            assert r["npl"] >= 1.0


# -- baselines -------------------------------------------------------------------

def test_wan_matches_piprl_on_los():
    cfg = quick()
    plans, tasks = load_suite(cfg)
    assert tasks[0].category == "LOS"
    logs = [run_episode(plans["empty"], tasks[0], make_agent(k, cfg), cfg, episode_rngs(0, 0, 0))
            for k in ("wan", "piprl")]
    assert logs[0].path == logs[1].path and logs[0].steps == logs[1].steps


def test_los_schedule_never_updates():
    cfg = quick()
    res = train(cfg, "piprl")
    assert res.updates == 0 and not res.transitions


def test_nprl_weights_are_one():
    cfg = quick(maps=("two_room",), horizon=4, episodes_per_task=2, rotation_tasks=0)
    res = train(cfg, "nprl")
    assert res.transitions
    assert all(r["weight"] == 1.0 and r["compliant"] == 1 for r in res.transitions)


def test_wan_has_no_network():
    assert make_agent("wan", quick()).net is None


def test_snr_ablation_weights_are_one():
    cfg = quick(maps=("two_room",), horizon=6, episodes_per_task=2)
    res = train(cfg, "piprl", drop=("snr",))
    assert all(r["weight"] == 1.0 for r in res.transitions)


def test_linkstate_ablation_never_terminates_on_link_state():
    cfg = quick(maps=("two_room",), horizon=6, episodes_per_task=3)
    res = train(cfg, "piprl", drop=("linkstate",))
    assert all(r["terminated_by"] != "link_state" for r in res.episodes)


# -- protocol ----------------------------------------------------------------------

def test_early_stop_rule():
    from collections import deque
    w = deque([0] * 4 + [1] * 6, maxlen=10)
    assert not early_stop(w, 7)
    w.append(1)
    assert early_stop(w, 7)


def test_early_stop_ends_task():
    cfg = quick(episodes_per_task=50)
    res = train(cfg, "piprl")
    assert res.episodes_to_stop[0] == 7  # every LOS episode succeeds


def test_two_task_run_is_deterministic(tmp_path):
    cfg = quick(maps=("two_room", "empty"), horizon=5, episodes_per_task=2)
    for d in ("a", "b"):
        train(cfg, "piprl", out_dir=tmp_path / d)
    for name in ("episodes.csv", "transitions.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_resume_continues_after_completed_tasks(tmp_path):
    cfg = quick(maps=("empty", "two_room"), horizon=4, episodes_per_task=2)
    full = train(cfg, "piprl", out_dir=tmp_path / "full")
    part = train(cfg.with_overrides(maps=("empty",)), "piprl", out_dir=tmp_path / "part")
    assert part.episodes_to_stop.keys() == {0}
    again = train(cfg, "piprl", out_dir=tmp_path / "full", resume=True)
    assert again.episodes_to_stop == full.episodes_to_stop


# -- config --------------------------------------------------------------------------

def test_config_round_trip():
    cfg = RunConfig(maps=("two_room", "empty"), seed=4, horizon=33, lr=1e-3, categories=("LOS",))
    again = parse_config(dump_config(cfg))
    assert again == cfg


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config("bogus = 1\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config("horizon = many\n")
    with pytest.raises(ConfigError):
        parse_config("tasks = everything\n")


# -- cli -----------------------------------------------------------------------------

def test_cli_parse(capsys):
    assert main(["parse", "meta", "-q"]) == 0
    assert "meta-program" in capsys.readouterr().out


def test_cli_trace_empty_room(capsys):
    assert main(["trace-paths", "empty", "2.0", "5.0", "--max-reflections", "0"]) == 0
    out = capsys.readouterr()
    lines = out.out.strip().splitlines()
    assert len(lines) == 2 and lines[1].split(",")[1] == "0"
    assert "1 path(s)" in out.err


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert main(["parse", "/nonexistent/prog.pirl"]) == 1


def test_cli_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.pirl"
    bad.write_text("Policy p:\n    if foo > 1:\n        Execute a_F\n")
    assert main(["parse", str(bad)]) == 2
    cfg = tmp_path / "run.cfg"
    cfg.write_text("maps = empty\n")
    junk = tmp_path / "junk.npz"
    junk.write_bytes(b"nope")
    assert main(["eval", str(cfg), "--policy", str(junk), "--repeats", "1"]) == 2


def test_cli_eval_wan_writes_reports(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("maps = empty\nhorizon = 20\n")
    out = tmp_path / "eval"
    assert main(["eval", str(cfg), "--policy", "wan", "--repeats", "2", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["categories"]["LOS"]["npl_mean"] <= 1.3
    assert (out / "eval_episodes.csv").exists()
    assert (out / "npl_by_category.png").stat().st_size > 0
