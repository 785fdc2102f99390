import pytest
from hypothesis import HealthCheck, settings

from qds.maps import (CurvePiece, CurveSpec, ExpandingMapParams, LambdaAstar,
                      constant_curve)

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def doubling_curve():
    return constant_curve(ExpandingMapParams(2))


@pytest.fixture
def tripling_curve():
    return constant_curve(ExpandingMapParams(3))


@pytest.fixture
def ramp_curve():
    # a(t) = 0.5 t over the degree-2 family, Lipschitz (eta = 1)
    return CurveSpec(
        pieces=(CurvePiece(0.0, 1.0, 2, a0=0.0, a1=0.5),),
        holder_exponent=1.0,
        bounds=LambdaAstar(1.4, 6.3),
    )


@pytest.fixture
def jump_curve():
    # doubling for t < 1/2, tripling afterwards; both preserve Lebesgue
    return CurveSpec(
        pieces=(CurvePiece(0.0, 0.5, 2), CurvePiece(0.5, 1.0, 3)),
        holder_exponent=1.0,
    )


@pytest.fixture
def wavy_params():
    return ExpandingMapParams(2, 0.5, 0.0)
