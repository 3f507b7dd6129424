import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vesselaug import dataset_io  # noqa: E402
from vesselaug.synthetic import synthetic_fundus  # noqa: E402


@pytest.fixture(scope="session")
def fundus():
    return synthetic_fundus(96, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_toy_dataset(root: Path, n: int = 3, size: int = 48) -> Path:
    """Write ``n`` synthetic fundus images with truth and FOV masks plus a manifest."""
    entries = []
    for i in range(n):
        f = synthetic_fundus(size, n_vessels=5, seed=100 + i)
        sid = f"{i + 1:02d}"
        dataset_io.save_image(f.image, root / "images" / f"{sid}.png")
        dataset_io.save_binary_mask(f.truth, root / "truth" / f"{sid}.png")
        dataset_io.save_binary_mask(f.fov, root / "fov" / f"{sid}.png")
        entries.append(dataset_io.ManifestEntry(sid, f"images/{sid}.png", f"truth/{sid}.png", f"fov/{sid}.png"))
    path = root / "manifest.jsonl"
    dataset_io.save_manifest(dataset_io.DatasetManifest(entries, root), path)
    return path


@pytest.fixture
def toy_dataset(tmp_path):
    return write_toy_dataset(tmp_path / "toy")


# -- acceptance reporting -----------------------------------------------------

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed or number not in _criteria:
        _criteria[number] = (title, "FAIL" if failed else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}")
