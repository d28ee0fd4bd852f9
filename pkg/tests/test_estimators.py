import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from noisytai.estimators import BlahutArimoto, LikelihoodRatioDetector, TaiExponent
from noisytai.capacity import bsc
from noisytai.probcore import JointPmf
from noisytai.simulator import DecisionRule

from conftest import bsc_matrix, dsbs

LN2 = math.log(2)


def test_blahut_arimoto_estimator():
    est = BlahutArimoto(tol=1e-10).fit(bsc_matrix(0.1))
    assert est.capacity_ == pytest.approx(0.368064, abs=1e-6)
    np.testing.assert_allclose(est.input_dist_, [0.5, 0.5])
    assert est.get_params() == {"tol": 1e-10, "max_iter": 100_000}
    assert clone(est).get_params() == est.get_params()


def test_tai_exponent_estimator():
    est = TaiExponent(capacity=LN2, restarts=8)
    with pytest.raises(NotFittedError):
        est.transform([0, 1])
    est.fit(dsbs(0.1))
    assert est.theta_ == pytest.approx(LN2 - (-0.1 * math.log(0.1) - 0.9 * math.log(0.9)), abs=1e-9)
    rows = est.transform([0, 1, 1])
    assert rows.shape == (3, 3)
    np.testing.assert_allclose(rows.sum(axis=1), 1.0)
    assert est.set_params(capacity=0.0).fit(dsbs(0.1)).theta_ == 0.0


def test_likelihood_detector():
    det = LikelihoodRatioDetector(channel=bsc_matrix(0.1), n=4, target_alpha=0.3).fit(dsbs(0.1))
    assert isinstance(det.rule_, DecisionRule)
    v = np.array([[0, 0, 0, 0], [0, 1, 0, 1]])
    y = np.array([[0, 0, 0, 0], [1, 0, 1, 0]])
    pred = det.predict(v, y)
    assert pred.tolist() == [0, 1]
    scores = det.decision_function(v, y)
    assert scores[0] >= 0 > scores[1]


def test_estimators_accept_domain_objects():
    assert BlahutArimoto().fit(bsc(0.1)).capacity_ == pytest.approx(0.368064, abs=1e-6)
    est = TaiExponent(capacity=0.0, restarts=4).fit(JointPmf(dsbs(0.1)))
    assert est.theta_ == 0.0
    det = LikelihoodRatioDetector(channel=bsc(0.1), n=4).fit(JointPmf(dsbs(0.1)))
    assert det.rule_.n == 4
