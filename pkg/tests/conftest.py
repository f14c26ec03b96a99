import pathlib

import pytest

import trajlens as tl

CONFIG_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"

GRID_SEED = 0
LANDER_SEED = 22


def make_grid3():
    return tl.GridWorld(3, 3, (0, 0), (2, 2))


def make_grid1x2():
    return tl.GridWorld(2, 1, (0, 0), (1, 0))


def make_grid5():
    return tl.GridWorld(5, 5, (0, 0), (4, 4), max_steps=60)


def make_lander():
    return tl.MiniLander(start_altitude=13.0, max_steps=80, bins_h=10, bins_v=9)


@pytest.fixture
def grid3():
    return make_grid3()


@pytest.fixture
def grid1x2():
    return make_grid1x2()


@pytest.fixture
def grid5():
    return make_grid5()


@pytest.fixture
def lander():
    return make_lander()


@pytest.fixture(scope="session")
def grid3_oracle():
    return tl.value_iteration(make_grid3(), gamma=0.9, tolerance=1e-12)


@pytest.fixture(scope="session")
def grid5_training():
    env = make_grid5()
    return env, tl.train(env, episodes=800, alpha=0.3, gamma=0.6,
                         checkpoint_fractions=(0.02, 0.05, 0.1, 0.5, 1.0),
                         seed=GRID_SEED)


@pytest.fixture(scope="session")
def grid5_dataset(grid5_training):
    env, result = grid5_training
    dataset = tl.collect(env, result.checkpoints, 8, rollout_mode="greedy",
                         seed=GRID_SEED)
    dataset.attach_qtable(result.final)
    return dataset


@pytest.fixture(scope="session")
def lander_training():
    env = make_lander()
    return env, tl.train(env, episodes=300, alpha=0.3, gamma=0.9,
                         checkpoint_fractions=(0.02, 0.05, 0.1, 0.5, 1.0),
                         seed=LANDER_SEED)


@pytest.fixture(scope="session")
def lander_dataset(lander_training):
    env, result = lander_training
    dataset = tl.collect(env, result.checkpoints, 12, rollout_mode="epsilon",
                         epsilon=0.15, seed=LANDER_SEED)
    dataset.attach_qtable(result.final)
    return dataset
