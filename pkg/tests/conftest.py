import os
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


def mnist_files():
    """Images/labels pair used for MNIST experiments.

    Set FEDALU_MNIST_DIR to a directory holding the standard
    ``train-images-idx3-ubyte[.gz]`` / ``train-labels-idx1-ubyte[.gz]``
    files to use full MNIST; otherwise the bundled 5000-image subset is used.
    """
    root = os.environ.get("FEDALU_MNIST_DIR")
    if root:
        for suffix in ("", ".gz"):
            images = Path(root) / f"train-images-idx3-ubyte{suffix}"
            labels = Path(root) / f"train-labels-idx1-ubyte{suffix}"
            if images.is_file() and labels.is_file():
                return images, labels, True
        raise FileNotFoundError(f"FEDALU_MNIST_DIR={root} holds no train-images/labels IDX files")
    return DATA / "mnist5k-images-idx3-ubyte.gz", DATA / "mnist5k-labels-idx1-ubyte.gz", False


@pytest.fixture(scope="session")
def mnist_paths():
    images, labels, _ = mnist_files()
    return images, labels


@pytest.fixture(scope="session")
def mnist(mnist_paths):
    from fedalu.datasets import load_mnist_idx

    return load_mnist_idx(*mnist_paths)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
