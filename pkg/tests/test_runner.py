import numpy as np
import pytest

from pgem.core.exceptions import DomainError
from pgem.models import RunConfig
from pgem.services.runner import fit_from_config, path_from_config


@pytest.mark.parametrize("algorithm", ["em", "qnem", "vb", "online-em", "sgd", "da-cg", "irls-cd", "bridge"])
def test_binary_algorithms_dispatch(small_dataset, algorithm):
    config = RunConfig(command="fit", algorithm=algorithm, lam=1.0, passes=2)
    report = fit_from_config(config, small_dataset)
    assert report.algorithm == algorithm
    assert report.beta_hat.shape == (small_dataset.d,)


@pytest.mark.parametrize("algorithm", ["ecm", "partial-irls"])
def test_multinomial_algorithms_dispatch(multi_data, algorithm):
    report = fit_from_config(RunConfig(command="fit", algorithm=algorithm, tol=1e-6), multi_data)
    assert report.algorithm == algorithm
    assert report.B.shape == (multi_data.d, multi_data.k)


def test_data_and_algorithm_must_match(small_dataset, multi_data):
    with pytest.raises(DomainError):
        fit_from_config(RunConfig(command="fit", algorithm="ecm"), small_dataset)
    with pytest.raises(DomainError):
        fit_from_config(RunConfig(command="fit", algorithm="em"), multi_data)


def test_penalized_fit_exempts_intercept(small_dataset):
    config = RunConfig(command="fit", algorithm="da-cd", lam=1e6)
    report = fit_from_config(config, small_dataset)
    assert report.beta_hat[0] != 0.0
    np.testing.assert_array_equal(report.beta_hat[1:], 0.0)


def test_path_with_holdout(small_dataset):
    config = RunConfig(command="path", grid=3, replicates=2, tol=1e-6, seed=4)
    result = path_from_config(config, small_dataset)
    assert result.method == "da-cd"
    assert result.lambdas.size == 3
    assert result.misclassification.shape == (3,)
    assert np.max(np.abs(result.betas[0, 1:])) < 1e-6


def test_path_rejects_multinomial(multi_data):
    with pytest.raises(DomainError):
        path_from_config(RunConfig(command="path"), multi_data)
