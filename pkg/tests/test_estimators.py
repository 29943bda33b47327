import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from subspace_psld import (MeasurementTransformer, SubspacePosteriorSampler, fit_subspace,
                           make_random_inpaint, make_subspace_model, sample_signals)
from subspace_psld.errors import ConfigError


@pytest.fixture
def data(model):
    _, X = sample_signals(model, 40, np.random.default_rng(0))
    op = make_random_inpaint(64, 0.4, seed=3)
    return X, op


def test_fit_subspace_recovers_span(model, data):
    X, _ = data
    learned = fit_subspace(X, 8)
    np.testing.assert_allclose(learned.projector(), model.projector(), atol=1e-10)
    with pytest.raises(ValueError):
        fit_subspace(X, 0)


def test_get_params_and_clone(data):
    _, op = data
    est = SubspacePosteriorSampler(operator=op, n_components=8, eta=100.0, random_state=1)
    params = est.get_params()
    assert params["eta"] == 100.0 and params["operator"] is op
    twin = clone(est)
    assert twin.get_params()["eta"] == 100.0 and not hasattr(twin, "model_")
    est.set_params(algorithm="DPS", zeta="matrix")
    assert est.algorithm == "DPS"


def test_fit_transform_recovers_signals(data):
    X, op = data
    Y = MeasurementTransformer(op).fit(X).transform(X)
    est = SubspacePosteriorSampler(operator=op, n_components=8, random_state=0).fit(X)
    np.testing.assert_allclose(est.transform(Y), X, atol=1e-8)
    assert est.score(Y, X) > -1e-8


def test_given_subspace_skips_learning(model, data):
    X, op = data
    est = SubspacePosteriorSampler(operator=op, subspace=model, algorithm="GML_DPS",
                                   eta="matrix", random_state=0).fit()
    assert est.model_ is model
    Y = op(X[:3])
    np.testing.assert_allclose(est.transform(Y), X[:3], atol=1e-8)


def test_multi_step_transform_is_reproducible(model, data):
    X, op = data
    est = SubspacePosteriorSampler(operator=op, subspace=model, regime="multi_step", n_steps=20,
                                   random_state=5).fit()
    Y = op(X[:2])
    np.testing.assert_array_equal(est.transform(Y), est.transform(Y))


def test_measurement_transformer_noise(data):
    X, op = data
    noisy = op.with_noise(0.1)
    a = MeasurementTransformer(noisy, random_state=2).fit(X).transform(X)
    b = MeasurementTransformer(noisy, random_state=2).fit(X).transform(X)
    np.testing.assert_array_equal(a, b)
    assert 0.05 < np.std(a - op(X)) < 0.15


def test_validation_errors(model, data):
    X, op = data
    with pytest.raises(NotFittedError):
        SubspacePosteriorSampler(operator=op, subspace=model).transform(op(X))
    with pytest.raises(ValueError):
        SubspacePosteriorSampler(n_components=8).fit(X)
    with pytest.raises(ValueError):
        SubspacePosteriorSampler(operator=op).fit(X)
    with pytest.raises(ValueError):
        SubspacePosteriorSampler(operator=op, subspace=make_subspace_model(16, 4)).fit()
    est = SubspacePosteriorSampler(operator=op, subspace=model).fit()
    with pytest.raises(ValueError):
        est.transform(X)
    with pytest.raises(ConfigError):
        SubspacePosteriorSampler(operator=op, subspace=model, algorithm="DDRM").fit()
    with pytest.raises(ValueError):
        MeasurementTransformer(op).fit(X[:, :10])
    with pytest.raises(ValueError):
        MeasurementTransformer().fit(X)
