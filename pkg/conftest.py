import pytest


def pytest_addoption(parser):
    """Add command-line flags for pytest."""
    parser.addoption(
        "--run-slow-tests",
        action="store_true",
        help="runs the brute-force oracle tests on the larger grids",
    )


def pytest_runtest_setup(item):
    if "slow" in item.keywords and not item.config.getoption("--run-slow-tests"):
        pytest.skip("set --run-slow-tests to run the brute-force oracle tests")


@pytest.fixture
def scenarios_csv(tmpdir):
    # Two firms, two equally likely scenarios
    filepath = f"{tmpdir}/scenarios.csv"
    with open(filepath, "w") as f:
        f.write("prob,bank_a,bank_b\n0.5,1.0,0.0\n0.5,0.0,1.0\n")
    return filepath


@pytest.fixture
def scenarios_json(tmpdir):
    filepath = f"{tmpdir}/scenarios.json"
    with open(filepath, "w") as f:
        f.write(
            '{"probabilities": [0.5, 0.5], "losses": [[1.0, 0.0], [0.0, 1.0]],'
            ' "firms": ["bank_a", "bank_b"]}'
        )
    return filepath


@pytest.fixture
def write_config(tmpdir):
    """Write a TOML run configuration next to the scenario fixtures."""

    def _write(body: str, name: str = "run.toml") -> str:
        filepath = f"{tmpdir}/{name}"
        with open(filepath, "w") as f:
            f.write(body)
        return filepath

    return _write
