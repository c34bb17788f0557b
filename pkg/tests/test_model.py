import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochfem.model import (
    DiffusionSpec,
    DriftSpec,
    ModelSpec,
    ModelValidationError,
    diffusion_eval,
    drift_deriv,
    drift_eval,
    validate_one_sided_lipschitz,
)

DRIFTS = [
    DriftSpec.u_minus_uq(3),
    DriftSpec.u_minus_uq(5),
    DriftSpec.u_minus_uq(11),
    DriftSpec.template(2.0, 1.0, 0.5),
    DriftSpec.u_minus_uq(3, scale=25.0),
    DriftSpec.template(1.5),
]


def test_cubic_values():
    f = DriftSpec.u_minus_uq(3)
    assert drift_eval(f, 2.0) == -6.0
    assert drift_deriv(f, 2.0) == -11.0


def test_q11_fixed_point():
    assert drift_eval(DriftSpec.u_minus_uq(11), 1.0) == 0.0


@pytest.mark.parametrize("spec", DRIFTS + [DriftSpec.zero()])
def test_zero_at_origin(spec):
    assert drift_eval(spec, 0.0) == 0.0


@pytest.mark.parametrize("spec", DRIFTS)
def test_derivative_vs_central_difference(spec, rng):
    u = rng.uniform(-3, 3, 100)
    h = 1e-6
    fd = (drift_eval(spec, u + h) - drift_eval(spec, u - h)) / (2 * h)
    d = drift_deriv(spec, u)
    assert np.all(np.abs(fd - d) <= 1e-6 * np.maximum(np.abs(d), 1.0))


def test_template_matches_monomials(rng):
    spec = DriftSpec.template(2.0, 1.0, 0.5, scale=0.3)
    u = rng.uniform(-2, 2, 30)
    want = 0.3 * (2 * u - u**3 - 0.5 * u**5)
    np.testing.assert_allclose(drift_eval(spec, u), want, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(drift_deriv(spec, u), 0.3 * (2 - 3 * u**2 - 2.5 * u**4), rtol=1e-13, atol=1e-13)
    assert spec.q == 5 and spec.linear_coefficient == pytest.approx(0.6)


def test_template_rejects_negative():
    with pytest.raises(ModelValidationError):
        DriftSpec.template(1.0, -1.0)


def test_even_q_rejected():
    with pytest.raises(ModelValidationError) as exc:
        DriftSpec.u_minus_uq(4)
    assert exc.value.rule == "parity"


def test_diffusion_values():
    assert diffusion_eval(DiffusionSpec("linear", 1.0), 3.0) == 3.0
    assert diffusion_eval(DiffusionSpec("sqrt_shift", 1.0), 0.0) == 1.0


@pytest.mark.parametrize("kind", ["linear", "sqrt_shift"])
def test_diffusion_lipschitz_and_growth(kind, rng):
    g = DiffusionSpec(kind, 2.5)
    a, b = rng.uniform(-50, 50, (2, 10_000))
    slack = 8 * np.finfo(float).eps * 2.5 * np.maximum(np.abs(a), np.abs(b))  # rounding in g(a) - g(b)
    assert np.all(np.abs(g(a) - g(b)) <= 2.5 * np.abs(a - b) + slack)
    assert np.all(np.abs(g(a)) <= 2.5 * (1 + np.abs(a)) * (1 + 1e-12))


def test_diffusion_validation():
    with pytest.raises(ModelValidationError):
        DiffusionSpec("cubic", 1.0)
    with pytest.raises(ModelValidationError):
        DiffusionSpec("linear", -1.0)


def test_accepts_canonical():
    chk = validate_one_sided_lipschitz(DriftSpec.u_minus_uq(3))
    assert chk.ok and chk.mu == 2.0


def test_rejects_positive_leading():
    chk = validate_one_sided_lipschitz(DriftSpec((0.0, 1.0, 0.0, 1.0)))
    assert not chk.ok and chk.rule == "sign"


def test_rejects_even_leading():
    chk = validate_one_sided_lipschitz(DriftSpec((0.0, 1.0, 0.0, 0.0, -1.0)))
    assert not chk.ok and chk.rule == "parity"


def test_sampled_rule_catches_bad_middle_term():
    # odd, negative leading term, but a huge positive cubic beats mu = c0 + 1
    chk = validate_one_sided_lipschitz(DriftSpec((0.0, 1.0, 0.0, 50.0, 0.0, -0.01)))
    assert not chk.ok and chk.rule == "sampled"


@pytest.mark.parametrize("spec", DRIFTS)
def test_accepted_specs_satisfy_inequality(spec, rng):
    chk = validate_one_sided_lipschitz(spec)
    assert chk.ok
    a, b = rng.uniform(-10, 10, (2, 10_000))
    lhs = (a - b) * (drift_eval(spec, a) - drift_eval(spec, b))
    assert np.all(lhs <= chk.mu * (a - b) ** 2 * (1 + 1e-12) + 1e-9)


def test_model_spec_validates():
    with pytest.raises(ModelValidationError) as exc:
        ModelSpec(DriftSpec((0.0, 1.0, 0.0, 1.0)), DiffusionSpec())
    assert exc.value.rule == "sign"
    m = ModelSpec(DriftSpec.u_minus_uq(5), DiffusionSpec("linear", 0.5))
    assert m.q == 5
    assert m.g(2.0) == 1.0


@given(st.floats(-3, 3), st.integers(1, 4))
def test_odd_drift_is_odd(u, k):
    spec = DriftSpec.u_minus_uq(2 * k + 1)
    assert drift_eval(spec, -u) == -drift_eval(spec, u)
