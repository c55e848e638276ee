import numpy as np
import pytest

from verbaplan.datagen import default_arm
from verbaplan.world import Environment, ObjectEntity, RobotState


@pytest.fixture(scope="session")
def arm():
    return default_arm()


@pytest.fixture(scope="session")
def arm7():
    return default_arm("7dof")


@pytest.fixture()
def small_env():
    table = ObjectEntity(id=10, kind="table", position=[0.72, 0, 0.325], orientation=[1, 0, 0, 0], half_extents=[0.42, 0.5, 0.325])
    objs = [
        ObjectEntity(id=1, kind="block", position=[0.5, 0.0, 0.7], orientation=[1, 0, 0, 0], half_extents=[0.035, 0.035, 0.05], color="blue"),
        ObjectEntity(id=2, kind="can", position=[0.62, 0.0, 0.705], orientation=[1, 0, 0, 0], half_extents=[0.03, 0.03, 0.055], color="red"),
        ObjectEntity(id=3, kind="cup", position=[0.75, 0.0, 0.695], orientation=[1, 0, 0, 0], half_extents=[0.035, 0.035, 0.045], color="blue"),
    ]
    return Environment((table, *objs), frozenset({10, 1, 2, 3}))


@pytest.fixture()
def rest_state(arm):
    return RobotState(np.array([1.39, -1.14, -1.82]), np.zeros(arm.dof))
