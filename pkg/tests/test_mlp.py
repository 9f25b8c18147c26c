import math

import numpy as np
import pytest

from fgd.errors import ShapeError
from fgd.linalg import frobenius_norm, make_rng
from fgd.mlp import (Dataset, MlpModel, accuracy, export_dataset, loss_and_grads, mlp_problem,
                     poly_features, two_moons, two_moons_split)


def test_zero_output_layer_gives_log_two():
    train, _ = two_moons_split(400, 400, 0.1, 0)
    model = MlpModel.init(9, 8, 2, 0, zero_output=True)
    loss, _ = loss_and_grads(model.params, train)
    assert loss == pytest.approx(math.log(2), abs=1e-15)


def test_finite_difference_micro_batch():
    train, _ = two_moons_split(400, 400, 0.1, 1)
    micro = Dataset(train.features[:3], train.labels[:3])
    params = MlpModel.init(9, 8, 2, 1).params
    params = [p + 0.3 * make_rng(1, i).standard_normal(p.shape) for i, p in enumerate(params)]
    _, grads = loss_and_grads(params, micro)
    eps = 1e-6
    for k, (p, g) in enumerate(zip(params, grads)):
        fd = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += eps
            minus[k][idx] -= eps
            fd[idx] = (loss_and_grads(plus, micro)[0] - loss_and_grads(minus, micro)[0]) / (2 * eps)
        assert frobenius_norm(fd - g) <= 1e-4 * frobenius_norm(g)


def test_two_moons_balanced_and_seeded():
    x, y = two_moons(101, 0.1, 3)
    assert x.shape == (101, 2) and np.bincount(y).tolist() == [50, 51]
    x2, y2 = two_moons(101, 0.1, 3)
    assert np.array_equal(x, x2) and np.array_equal(y, y2)


def test_features_standardised_on_train():
    train, test = two_moons_split(400, 400, 0.1, 0)
    assert train.features.shape == (400, 9) and test.features.shape == (400, 9)
    np.testing.assert_allclose(train.features.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(train.features.std(axis=0), 1, atol=1e-12)


def test_poly_features():
    f = poly_features(np.array([[2.0, 3.0]]))
    assert f.tolist() == [[2, 3, 4, 6, 9, 8, 12, 18, 27]]


def test_orthogonal_layer_shape_rule():
    with pytest.raises(ShapeError):
        MlpModel.init(4, 8, 2, 0)
    groups = MlpModel.init(9, 8, 2, 0).groups()
    assert [g.kind for g in groups] == ["orthogonal", "euclidean", "euclidean", "euclidean"]


def test_dimension_checks():
    model = MlpModel.init(9, 8, 2, 0)
    with pytest.raises(ShapeError):
        mlp_problem(model, Dataset(np.zeros((0, 9)), np.zeros(0, dtype=int)))
    with pytest.raises(ShapeError):
        mlp_problem(model, Dataset(np.zeros((3, 4)), np.zeros(3, dtype=int)))


def test_accuracy_of_perfect_logits():
    ds = Dataset(np.eye(2), np.array([0, 1]))
    params = [np.eye(2), np.zeros((1, 2)), 10 * np.eye(2), np.zeros((1, 2))]
    assert accuracy(params, ds) == 1.0


def test_export(tmp_path):
    ds = Dataset(np.array([[0.5, -1.0]]), np.array([1]))
    path = tmp_path / "d.csv"
    export_dataset(ds, path)
    assert path.read_text().splitlines() == ["x0,x1,label", "0.5,-1.0,1"]
