import numpy as np
import pytest

from patchgraph.graphbuild import build_graph


def random_graphs(n, C=5, d=4, grid=3, seed=0, n_classes=2):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        lab = rng.integers(0, C - 1, size=(grid, grid))
        z = rng.normal(size=(grid * grid, d))
        out.append(build_graph(lab, z, C, label=i % n_classes))
    return out


@pytest.fixture
def small_graphs():
    return random_graphs(3)


ACCEPTANCE_RESULTS: list[tuple[str, bool | None, str]] = []  # None = not run


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0].split()[0])):
        status = "NOT RUN" if ok is None else "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status:<7}  {name}: {detail}")
