import numpy as np
import pytest

from faultiso import (
    DaeModel,
    OdeModel,
    PolyMatrix,
    build_case_study,
    poly_from_roots,
    synthesize_detector,
)

BASELINE_ROOTS = (-0.85, -0.59, -0.58)


def toy_ode() -> OdeModel:
    """First-order plant x+ = 0.5 x + u + (f_a + u f_m), y = x."""
    return OdeModel(
        G=np.eye(1),
        A=np.array([[0.5]]),
        B_u=np.array([[1.0]]),
        B_d=np.zeros((1, 0)),
        B_f=np.array([[1.0]]),
        C=np.eye(1),
        D_u=np.zeros((1, 1)),
        D_d=np.zeros((1, 0)),
        D_f=np.zeros((1, 1)),
        B_X=np.zeros((1, 1)),
        E_X=lambda v, u: u,
    )


def toy_dae_no_input() -> DaeModel:
    """Autonomous toy x+ = 0.5 x + f with z = x measured."""
    H = PolyMatrix(np.array([[[0.5], [1.0]], [[-1.0], [0.0]]]))
    L = PolyMatrix(np.array([[[0.0], [-1.0]]]))
    F = PolyMatrix(np.array([[[1.0], [0.0]]]))
    return DaeModel(H=H, L=L, F=F, E=lambda z: float(z[0]))


@pytest.fixture(scope="session")
def bicycle_case():
    return build_case_study(stabilized_signs=True)


@pytest.fixture(scope="session")
def bicycle_filter(bicycle_case):
    a = poly_from_roots(BASELINE_ROOTS)
    return synthesize_detector(bicycle_case.dae, a, 3)
