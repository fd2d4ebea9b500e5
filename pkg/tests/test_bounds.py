import numpy as np
import pytest

from streamdro.bounds import (BoundInputs, CertificateError, certificate, compute_bound_inputs, delta_estimate,
                              gradient_norm_term, in_sample_value, psi_over, psi_under)
from streamdro.clustering import kmeans
from streamdro.distributions import ClusteredDistribution
from streamdro.dro import (AffinePiece, AmbiguitySpec, DecisionSpec, SolveReport, solve_compressed_dro,
                           solve_full_dro)
from streamdro.portfolio import cvar_pieces
from streamdro.support import SupportSet


def test_psi_under_min_clause():
    b = BoundInputs(eps=0.0, M=np.array([0.5]), W1=1.0, Phi=0.3)
    assert psi_under(b) == pytest.approx(0.3)


def test_psi_under_portfolio_lipschitz_clause():
    b = BoundInputs(eps=0.002, M=np.array([0.0, 5.0]), W1=0.01)
    assert psi_under(b) == pytest.approx(0.07)


def test_psi_under_concave_single_piece():
    b = BoundInputs(eps=0.1, M=np.array([2.0]), W1=0.5, Phi=0.0)
    assert psi_under(b) == 0.0


def test_psi_under_smooth_clause():
    b = BoundInputs(eps=0.1, W2=0.3, grad_norm=2.0, L_global=4.0)
    r = 0.5
    assert psi_under(b) == pytest.approx(2 * r + 2 * r ** 2)


def test_psi_over_examples():
    assert psi_over(BoundInputs(eps=0.01, M=[5.0], L=[0.0, 0.0], W1=0.1, D2=0.2, delta=0.0)) == 0.0
    assert psi_over(BoundInputs(eps=0.01, M=[1.0, 3.0], W1=0.1)) == pytest.approx(3 * 0.12)
    both = BoundInputs(eps=0.01, M=[2.0], L=[1.0, 4.0], W1=0.1, D2=0.5, delta=0.05)
    assert psi_over(both) == pytest.approx(min(0.05 + 2.0 * 0.25, 2.0 * 0.12))


def test_all_infinite_raises():
    with pytest.raises(CertificateError):
        psi_under(BoundInputs(eps=0.1))
    with pytest.raises(CertificateError):
        psi_over(BoundInputs(eps=0.1))


def test_psi_monotone_in_distances():
    base = dict(eps=0.02, M=np.array([3.0]), L=np.array([1.0]), delta=0.0, grad_norm=1.0, L_global=1.0)
    prev_u = prev_o = -np.inf
    for s in np.linspace(0, 1, 11):
        b = BoundInputs(W1=s, W2=s, D2=s, Phi=s, **base)
        assert psi_under(b) >= prev_u and psi_over(b) >= prev_o
        prev_u, prev_o = psi_under(b), psi_over(b)


def test_delta_estimate():
    assert delta_estimate(SupportSet.full(), 0.5) == (0.0, False)
    box = SupportSet.box([0.0], [1.0])
    val, surrogate = delta_estimate(box, 0.01, [1.0, 5.0])
    assert val == pytest.approx(0.1) and surrogate
    vals = [delta_estimate(box, e, [5.0])[0] for e in (0.1, 0.01, 0.001, 0.0)]
    assert vals[-1] == 0.0 and np.all(np.diff(vals) < 0)


def _report(method, value=1.0, status="optimal"):
    return SolveReport(value=value, x=np.zeros(1), lam=0.0, s=None, z=None, dual_coeffs=None, status=status,
                       wall_time=0.0, method=method)


def test_certificate_rules():
    b0 = BoundInputs(eps=0.1, Phi=0.0)
    assert certificate(_report("compressed", 2.0), b0) == 2.0
    assert certificate(_report("full_dro", 2.0)) == 2.0
    assert certificate(_report("compressed", 2.0), BoundInputs(eps=0.1, Phi=0.25), residual=0.5) == 2.75
    with pytest.raises(CertificateError):
        certificate(_report("compressed", 2.0))
    with pytest.raises(CertificateError):
        certificate(_report("compressed", 2.0, status="infeasible"), b0)


def _instance(seed, d=5, n=None, K=5):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(K, 51))
    data = rng.normal(0.01, 0.05, size=(n, d)) + rng.choice([-0.05, 0.05], size=(n, 1))
    res = kmeans(data, K, seed=seed)
    clustered = ClusteredDistribution.from_labels(data, res.labels)
    return data, clustered, res.labels


def _cvar_decision(d):
    return DecisionSpec(np.r_[np.zeros(d), -1.0], np.r_[np.ones(d), 1.0],
                        A_eq=np.r_[np.ones(d), 0.0][None, :], b_eq=[1.0])


@pytest.mark.parametrize("seed", range(50))
def test_sandwich(seed):
    d, omega = 5, 0.2
    data, clustered, labels = _instance(seed, d)
    pieces = cvar_pieces(d, omega)
    dec = _cvar_decision(d)
    amb = AmbiguitySpec(1, "l2")
    eps = 0.01 * (1 + seed % 3)
    M = np.array([0.0, np.sqrt(d) / omega])
    full = solve_full_dro(data, pieces, SupportSet.full(), amb, eps, dec)
    comp = solve_compressed_dro(pieces, SupportSet.full(), amb, clustered, eps, dec)
    b = compute_bound_inputs(comp, pieces, clustered, data, labels, SupportSet.full(), M)
    assert full.value - psi_under(b) <= comp.value + 1e-6
    assert comp.value <= full.value + psi_over(b) + 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_single_affine_piece_compressed_not_below_full(seed):
    rng = np.random.default_rng(seed)
    data, clustered, _ = _instance(seed, d=3)
    piece = [AffinePiece(rng.normal(size=(3, 2)), rng.normal(size=3), rng.normal(size=2), 0.0)]
    dec = DecisionSpec(-np.ones(2), np.ones(2))
    amb = AmbiguitySpec(1, "l2")
    full = solve_full_dro(data, piece, SupportSet.full(), amb, 0.05, dec)
    comp = solve_compressed_dro(piece, SupportSet.full(), amb, clustered, 0.05, dec)
    assert comp.value >= full.value - 1e-8


def test_portfolio_step_uses_phi_when_active():
    d, omega = 5, 0.2
    data, clustered, labels = _instance(3, d, n=40)
    pieces = cvar_pieces(d, omega)
    comp = solve_compressed_dro(pieces, SupportSet.full(), AmbiguitySpec(1, "l2"), clustered, 0.01,
                                _cvar_decision(d))
    b = compute_bound_inputs(comp, pieces, clustered, data, labels, SupportSet.full(), [0.0, 1 / omega])
    lip = (1 / omega) * (2 * 0.01 + b.W1)
    assert b.Phi < lip
    assert certificate(comp, b) == pytest.approx(comp.value + b.Phi)
    assert b.delta == 0.0 and psi_over(b) == 0.0


def test_gradient_norm_term_and_in_sample():
    pieces = cvar_pieces(2, 0.5)
    x = np.array([0.5, 0.5, 0.0])
    cl = ClusteredDistribution.from_labels(np.array([[1.0, 1.0], [-1.0, -1.0]]), [0, 1])
    # the first mean activates the flat piece, the second the slope -x / omega
    g = gradient_norm_term(pieces, x, cl)
    assert g == pytest.approx(np.sqrt(0.5 * np.sum((x[:2] / 0.5) ** 2)))
    rep = SolveReport(value=0.0, x=x, lam=0.0, s=None, z=None, dual_coeffs=None, status="optimal",
                      wall_time=0, weights=cl.weights, atoms=cl.means)
    assert in_sample_value(rep, pieces) == pytest.approx(0.5 * 0.0 + 0.5 * (-(-1.0) / 0.5))
