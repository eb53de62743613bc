import numpy as np
import pytest

from gentree.core import Dataset
from gentree.data import rng
from gentree.dimension import UnitVector

G = 6.674e-11


def gravity_dataset(seed: int = 0, n_points: int = 10) -> Dataset:
    """F = G m1 m2 / r^2 on [1, 5]^3, units over (M, L, T)."""
    X = rng(seed).uniform(1.0, 5.0, (n_points, 3))
    y = G * X[:, 0] * X[:, 1] / X[:, 2] ** 2
    units = {"m1": UnitVector((1, 0, 0)), "m2": UnitVector((1, 0, 0)), "r": UnitVector((0, 1, 0))}
    return Dataset(["m1", "m2", "r"], X, y, units, UnitVector((1, 1, -2)))


@pytest.fixture
def gravity():
    return gravity_dataset()


@pytest.fixture
def gravity_files(tmp_path, gravity):
    from gentree.data import write_points, write_units

    pts, units = tmp_path / "gravity.csv", tmp_path / "gravity.units"
    write_points(pts, gravity)
    write_units(units, gravity, ["M", "L", "T"])
    return pts, units


def plain_dataset(X, y, names=None) -> Dataset:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    names = names or [f"x{i + 1}" for i in range(X.shape[1])]
    return Dataset(names, X, np.asarray(y, dtype=float))


# -- acceptance summary -------------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record_criterion(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
