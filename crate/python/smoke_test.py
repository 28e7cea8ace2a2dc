"""Smoke test for the explore_lab extension module.

Build and install first:  pip install --no-build-isolation -e crates/py
Then run:                 python -m pytest python/smoke_test.py
"""

import math

import explore_lab


def test_strategies_are_listed():
    names = explore_lab.strategies()
    assert "Ours" in names and "Oracle" in names and "Online" in names


def test_env_steps_and_stays_in_bounds():
    env = explore_lab.Env("point-maze-umaze", seed=1)
    state = env.reset()
    assert len(state) == env.state_dim == 2
    next_state, reward, terminal, truncated = env.step([0.5, -0.5])
    assert len(next_state) == 2
    assert reward in (-1.0, 0.0)
    assert isinstance(terminal, bool) and isinstance(truncated, bool)


def test_optimistic_label_dominates_reward_model():
    labeler = explore_lab.Labeler(2, 2, seed=3, bonus_scale=1.0, hidden=[8, 8])
    for i in range(20):
        s = [0.1 * i, 0.0]
        labeler.update(s, [0.0, 0.0], s, -1.0, False)
    bonus = labeler.bonus([5.0, 5.0], [0.0, 0.0])
    assert bonus >= 0.0
    reward, terminal = labeler.label([5.0, 5.0], [0.0, 0.0])
    assert math.isfinite(reward) and 0.0 <= terminal <= 1.0


def test_short_run_writes_metrics(tmp_path):
    cfg = explore_lab.Config.from_toml(
        'strategy = "Ours"\nbudget = 300\n'
        '[env]\nname = "point-maze-umaze"\n'
        "[agent]\nhidden = [8, 8]\nensemble_size = 2\nutd = 1\nonline_batch = 8\noffline_batch = 8\nstart_training = 100\n"
        "[labeler]\nhidden = [8, 8]\nfeatures = 4\nstart_steps = 100\n"
        "[dataset]\ntrajectories = 5\n"
        "[eval]\ninterval = 100\nepisodes = 2\n"
    )
    assert cfg.budget == 300
    assert "budget = 300" in cfg.to_toml()
    path = explore_lab.run(cfg, seed=0, out_dir=str(tmp_path))
    rows = explore_lab.read_csv(path)
    assert [r["step"] for r in rows] == [100, 200, 300]
    assert all(0.0 <= r["coverage"] <= 1.0 for r in rows)


def test_experiment_steps_incrementally():
    cfg = explore_lab.Config("point-maze-umaze", "Online", 50)
    exp = explore_lab.Experiment(cfg, seed=0)
    exp.step(20)
    assert exp.steps == 20 and not exp.finished
    exp.step(100)
    assert exp.steps == 50 and exp.finished
    assert len(exp.q_values([1.5, 3.5], [0.0, 0.0])) >= 2


def test_bad_config_raises_value_error():
    try:
        explore_lab.Config.from_toml("budget = 10\nbogus = 1\n")
    except ValueError as e:
        assert "bogus" in str(e)
    else:
        raise AssertionError("unknown key accepted")
