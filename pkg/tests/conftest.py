import numpy as np
import pytest

from epmgames import ActionSet, TruncatedGame, build_monitoring
from epmgames.core import index_to_actions


@pytest.fixture
def ab():
    return ActionSet(("a", "b"))


def matching_game(kind: str, horizon: int = 2, action_set: ActionSet | None = None,
                  **kwargs) -> TruncatedGame:
    """Player 1 wins when the stage-1 action equals the stage-0 action."""
    actions = action_set or ActionSet(("a", "b"))
    m = build_monitoring(kind, actions, horizon, **kwargs)
    k = actions.size
    mask = np.zeros(k**horizon, dtype=bool)
    for i in range(k**horizon):
        acts = index_to_actions(i, horizon, k)
        mask[i] = acts[1] == acts[0]
    return TruncatedGame(m, mask)


BUILDER_CYCLE = (
    ("perfect", {}),
    ("blackwell", {}),
    ("delayed", {"d1": 1, "d2": 1}),
)


def random_game(rng: np.random.Generator, horizon_choices=(1, 2, 3, 4),
                builders=BUILDER_CYCLE, action_set: ActionSet | None = None,
                index: int = 0) -> TruncatedGame:
    actions = action_set or ActionSet(("a", "b"))
    horizon = int(rng.choice(horizon_choices))
    kind, kwargs = builders[index % len(builders)]
    m = build_monitoring(kind, actions, horizon, **kwargs)
    mask = rng.random(actions.size**horizon) < rng.random()
    return TruncatedGame(m, mask)
