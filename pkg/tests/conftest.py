import numpy as np
import pytest

from actevo.data import BUILTIN_SCHEMAS, Dataset, load_csv


@pytest.fixture(scope="session")
def wbcd_csv(tmp_path_factory):
    """UCI-style WBCD file (id, M/B diagnosis, 30 features) rebuilt from the
    copy scikit-learn ships; the repo itself bundles no data."""
    from sklearn.datasets import load_breast_cancer

    bunch = load_breast_cancer()
    lines = []
    for i, (features, target) in enumerate(zip(bunch.data, bunch.target)):
        # scikit-learn encodes malignant as 0; the file uses M/B letters
        letter = "M" if target == 0 else "B"
        cells = [str(842000 + i), letter] + [repr(float(v)) for v in features]
        lines.append(",".join(cells))
    path = tmp_path_factory.mktemp("data") / "wbcd.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def wbcd_dataset(wbcd_csv):
    return load_csv(wbcd_csv, BUILTIN_SCHEMAS["wbcd"])


@pytest.fixture(scope="session")
def toy_dataset():
    """Small linearly separable two-feature set."""
    rng = np.random.default_rng(42)
    X = np.vstack([rng.normal(-2.0, 0.5, (40, 2)), rng.normal(2.0, 0.5, (40, 2))])
    y = np.array([0] * 40 + [1] * 40)
    order = rng.permutation(len(y))
    return Dataset("toy", X[order], y[order])


@pytest.fixture(scope="session")
def sonar_like_dataset():
    """Synthetic stand-in with the sonar shape: 208 rows of 60 features in [0, 1]."""
    rng = np.random.default_rng(7)
    X = rng.uniform(0.0, 1.0, (208, 60))
    y = (X[:, :10].sum(axis=1) > 5.0).astype(int)
    return Dataset("sonar_like", X, y)
