import numpy as np
import pytest

from verbaplan.dgg.gmm import GMM, VAR_FLOOR, fit_gmm, make_root_logterm, root_key, select_H, train_gmm
from verbaplan.dgg.grounding import Grounding
from verbaplan.errors import InsufficientData, UnknownRootGrounding
from verbaplan.mapping import H_DIM, serialize_H


def test_constant_samples_floor_variance():
    h0 = np.linspace(0.0, 1.0, 5)
    g = fit_gmm(np.tile(h0, (40, 1)), m=1, seed=0)
    assert np.allclose(g.means[0], h0, atol=1e-12)
    assert np.allclose(g.variances, VAR_FLOOR)


def test_em_recovers_separated_means():
    rng = np.random.default_rng(0)
    true_means = np.array([[0.0, 0.0], [3.0, 3.0], [-3.0, 3.0]])
    X = np.vstack([rng.normal(m, 0.1, size=(400, 2)) for m in true_means])
    g = fit_gmm(X, m=3, seed=1)
    for tm in true_means:
        assert min(np.max(np.abs(g.means - tm), axis=1)) < 0.05


def test_em_loglik_monotone():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(0, 0.5, (100, 3)), rng.normal(2.0, 0.3, (100, 3))])
    g = fit_gmm(X, m=2, seed=2)
    t = g.ll_trace
    assert all(t[i + 1] >= t[i] - 1e-9 for i in range(len(t) - 1))


def test_weights_sum_to_one():
    rng = np.random.default_rng(5)
    g = fit_gmm(rng.normal(size=(50, 4)), m=3, seed=3)
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        fit_gmm(np.zeros((2, 3)), m=5)
    with pytest.raises(InsufficientData):
        train_gmm([("place", np.zeros(H_DIM))], m=2)


def test_mode_mean_dominant_weight():
    g = GMM(weights=[0.9, 0.1], means=[[0.0, 0.0], [5.0, 5.0]], variances=np.full((2, 2), 0.01))
    assert np.allclose(g.mode_mean(), [0.0, 0.0])


def test_mode_mean_maximizes_density_at_means():
    rng = np.random.default_rng(9)
    for _ in range(25):
        m = 3
        g = GMM(
            weights=rng.dirichlet(np.ones(m)),
            means=rng.normal(size=(m, 4)),
            variances=rng.uniform(0.01, 0.3, size=(m, 4)),
        )
        mode = g.mode_mean()
        d_mode = g.logpdf(mode)[0]
        for mu in g.means:
            assert d_mode >= g.logpdf(mu)[0] - 1e-12


def test_root_key_and_select():
    samples = [("place", serialize_H(__import__("verbaplan.mapping", fromlist=["CostParams"]).CostParams(w_position=10.0, p_target=(0.1 * i, 0, 0.7)))) for i in range(10)]
    head = train_gmm(samples, m=1)
    H = select_H(head, Grounding.command("place"))
    assert H.w_position == pytest.approx(10.0, abs=1e-6)
    with pytest.raises(UnknownRootGrounding):
        select_H(head, Grounding.command("stop"))
    assert root_key(Grounding.negation()) == "negation"
    assert root_key(Grounding.command("pick_up")) == "pick_up"


def test_root_logterm_missing_key_penalty():
    from verbaplan.dgg.crf import MISSING_KEY_LOGTERM

    samples = [("place", np.zeros(H_DIM) + i * 0.01) for i in range(6)]
    head = train_gmm(samples, m=1)
    term = make_root_logterm(head)
    assert term(Grounding.command("stop")) == MISSING_KEY_LOGTERM
    assert np.isfinite(term(Grounding.command("place")))
    empty = make_root_logterm({})
    assert empty(Grounding.command("place")) == 0.0
