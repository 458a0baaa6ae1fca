import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fbmtransport.errors import InvalidParameterError
from fbmtransport.estimators import DossSussmannSolver, TransportFBM


def test_transport_fbm_sampler():
    est = TransportFBM(H=0.3, beta=0.3, n=10)
    with pytest.raises(NotFittedError):
        est.sample([0, 1.0])
    est.fit()
    S = est.sample_many(np.linspace(0, 1, 5), 3)
    assert S.shape == (3, 5) and np.all(S[:, 0] == 0)
    np.testing.assert_array_equal(S[1], est.sample(np.linspace(0, 1, 5), 1).values)
    assert clone(est).get_params()["n"] == 10


def test_transport_fbm_rejects_bad_params():
    with pytest.raises(InvalidParameterError):
        TransportFBM(H=0.75, beta=0.1).fit()


def test_solver_schemes_agree_roughly():
    drv = TransportFBM(n=8).fit().sample(np.linspace(0, 1, 65))
    eu = DossSussmannSolver(n=8).fit(drv)
    ref = DossSussmannSolver(scheme="reference").fit(drv)
    t = np.linspace(0, 1, 7)
    assert eu.path_.provenance == "X-euler"
    assert ref.path_.provenance == "X-tilde"
    np.testing.assert_allclose(eu.predict(t), ref.predict(t), atol=0.05)
    with pytest.raises(InvalidParameterError):
        DossSussmannSolver(scheme="bogus").fit(drv)
    with pytest.raises(NotFittedError):
        DossSussmannSolver().predict(t)
