import numpy as np
import pytest

from faultiso import (
    InfeasibleConversion,
    OdeModel,
    PolyMatrix,
    check_detectability,
    ode_to_dae,
    simulate_ode,
)
from conftest import toy_dae_no_input, toy_ode


def random_stable_ode(rng, n_x=3, n_y=2, n_u=1, n_d=1):
    a = rng.normal(size=(n_x, n_x))
    a *= 0.8 / max(np.max(np.abs(np.linalg.eigvals(a))), 1e-6)
    return OdeModel(
        G=np.eye(n_x),
        A=a,
        B_u=rng.normal(size=(n_x, n_u)),
        B_d=rng.normal(size=(n_x, n_d)),
        B_f=rng.normal(size=(n_x, 1)),
        C=rng.normal(size=(n_y, n_x)),
        D_u=rng.normal(size=(n_y, n_u)),
        D_d=rng.normal(size=(n_y, n_d)),
        D_f=rng.normal(size=(n_y, 1)),
        B_X=np.zeros((1, n_x)),
        E_X=lambda v, u: u,
    )


def test_ode_to_dae_bicycle_zero_selectors(bicycle_case):
    dae = bicycle_case.dae
    assert dae.n_rows == 7
    assert dae.n_x == 6  # 4 states + 2 disturbances
    assert dae.n_z == 4  # 3 outputs + 1 input
    assert dae.H.degree == 1
    assert dae.F.degree == 0
    # E(z) picks the steering input
    z = np.array([0.1, 0.2, 0.3, 0.7])
    assert dae.E(z) == pytest.approx(0.7)


def test_ode_to_dae_identity_selector():
    rng = np.random.default_rng(20)
    n_x, n_y = 3, 3
    c = rng.normal(size=(n_y, n_x))
    ode = OdeModel(
        G=np.eye(n_x),
        A=rng.normal(size=(n_x, n_x)),
        B_u=rng.normal(size=(n_x, 1)),
        B_d=np.zeros((n_x, 1)),
        B_f=rng.normal(size=(n_x, 1)),
        C=c,
        D_u=np.zeros((n_y, 1)),
        D_d=np.zeros((n_y, 1)),
        D_f=np.zeros((n_y, 1)),
        B_X=c,  # K_X = I solves B_X = K_X C exactly
        E_X=lambda v, u: float(np.sum(v)),
    )
    dae = ode_to_dae(ode)
    # E reconstructs B_X X = C X = y from the measurement
    x = rng.normal(size=n_x)
    y = c @ x
    assert dae.E(np.concatenate([y, [0.5]])) == pytest.approx(float(np.sum(y)))


def test_ode_to_dae_infeasible():
    rng = np.random.default_rng(21)
    ode = OdeModel(
        G=np.eye(4),
        A=rng.normal(size=(4, 4)),
        B_u=rng.normal(size=(4, 1)),
        B_d=np.zeros((4, 1)),
        B_f=rng.normal(size=(4, 1)),
        C=np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]),
        D_u=np.zeros((2, 1)),
        D_d=np.zeros((2, 1)),
        D_f=np.zeros((2, 1)),
        B_X=np.array([[0.0, 0.0, 1.0, 0.0]]),  # outside rowspace of C
        E_X=lambda v, u: float(v[0]),
    )
    with pytest.raises(InfeasibleConversion):
        ode_to_dae(ode)


def test_dae_identity_on_fault_free_trajectories():
    rng = np.random.default_rng(22)
    for trial in range(5):
        ode = random_stable_ode(rng)
        dae = ode_to_dae(ode)
        steps = 120
        u = rng.normal(size=steps)
        d = rng.normal(size=(steps, ode.n_d))
        x0 = rng.normal(size=ode.n_x)
        states, _, z = simulate_ode(ode, dae.E, u, d=d, x0=x0)
        x_dae = np.hstack([states, d])
        scale = max(np.max(np.abs(z)), np.max(np.abs(x_dae)), 1.0)
        h, l = dae.H, dae.L
        for k in range(steps - 1):
            res = np.zeros((dae.n_rows, 1))
            for i in range(h.degree + 1):
                res += h.coeffs[i] @ x_dae[k + i][:, None]
            for i in range(l.degree + 1):
                res += l.coeffs[i] @ z[k + i][:, None]
            assert np.max(np.abs(res)) <= 1e-8 * scale


def test_simulate_ode_inconsistent_feedthrough_rejected():
    rng = np.random.default_rng(23)
    ode = random_stable_ode(rng)
    # E reads an output that the fault feeds through to: inconsistent
    e_bad = lambda z: float(z[0])
    with pytest.raises(RuntimeError):
        simulate_ode(ode, e_bad, rng.normal(size=50), f_m=np.ones(50), f_a=np.ones(50))


def test_detectability_bicycle(bicycle_case):
    assert check_detectability(bicycle_case.dae) is True


def test_detectability_f_in_column_space():
    dae = toy_dae_no_input()
    # F = H * v for constant v makes the fault invisible
    v = np.array([[2.0]])
    f_dep = PolyMatrix(np.einsum("dij,jk->dik", dae.H.coeffs, v))
    broken = type(dae)(H=dae.H, L=dae.L, F=f_dep, E=dae.E)
    assert check_detectability(broken) is False


def test_detectability_zero_h():
    h = PolyMatrix(np.zeros((1, 2, 1)))
    l = PolyMatrix(np.zeros((1, 2, 1)))
    f = PolyMatrix(np.array([[[1.0], [0.0]]]))
    dae = type(toy_dae_no_input())(H=h, L=l, F=f, E=lambda z: 0.0)
    assert check_detectability(dae) is True


def test_detectability_invariant_under_left_multiplication():
    rng = np.random.default_rng(24)
    ode = random_stable_ode(rng)
    dae = ode_to_dae(ode)
    m = rng.normal(size=(dae.n_rows, dae.n_rows))
    m += dae.n_rows * np.eye(dae.n_rows)  # keep it well away from singular
    h2 = PolyMatrix(np.einsum("ij,djk->dik", m, dae.H.coeffs))
    f2 = PolyMatrix(np.einsum("ij,djk->dik", m, dae.F.coeffs))
    before = check_detectability(dae)
    after = check_detectability(type(dae)(H=h2, L=dae.L, F=f2, E=dae.E))
    assert before == after


def test_toy_ode_roundtrip():
    ode = toy_ode()
    dae = ode_to_dae(ode)
    assert dae.n_rows == 2
    assert dae.n_x == 1
    assert dae.n_z == 2
    # z = [y, u]: E picks u
    assert dae.E(np.array([3.0, 0.25])) == pytest.approx(0.25)


def test_dae_shape_validation():
    with pytest.raises(ValueError):
        type(toy_dae_no_input())(
            H=PolyMatrix(np.zeros((1, 2, 1))),
            L=PolyMatrix(np.zeros((1, 3, 1))),
            F=PolyMatrix(np.zeros((1, 2, 1))),
            E=lambda z: 0.0,
        )
    with pytest.raises(ValueError):
        type(toy_dae_no_input())(
            H=PolyMatrix(np.zeros((1, 2, 1))),
            L=PolyMatrix(np.zeros((1, 2, 1))),
            F=PolyMatrix(np.zeros((1, 2, 2))),
            E=lambda z: 0.0,
        )
