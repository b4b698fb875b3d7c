"""Shared ad-hoc coefficient systems for the test suite."""

import numpy as np
import pytest

from mvsde import CoefficientSet


def constant_system(v=(1.0,), d=1, sigma_scale=1.0):
    """b0 constant, b1 = 0, sigma = scale * I."""
    vec = np.asarray(v, dtype=float)
    eye = sigma_scale * np.eye(d)
    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: vec,
        b1=lambda t, z, zeta: np.zeros(d),
        sigma=lambda t, z, zeta: eye,
        bound_C=float(np.linalg.norm(vec) + sigma_scale * np.sqrt(d)),
        ellipticity_nu=min(1.0, sigma_scale),
        b0_axes=(), b1_axes=(), sigma_axes=(),
        name="const",
    )


def zero_sigma_system(d=1, nu=0.5):
    """Deliberately broken: sigma = 0 everywhere; declared nu stays positive."""
    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: np.zeros(d),
        b1=lambda t, z, zeta: np.zeros(d),
        sigma=lambda t, z, zeta: np.zeros((d, d)),
        bound_C=1.0,
        ellipticity_nu=nu,
        name="zero-sigma",
    )


def sign_drift_system(axis="x", d=1):
    """b1 = sign of one coordinate block's first component; all else benign."""
    idx = 0 if axis == "x" else d

    def b1(t, z, zeta):
        return np.repeat(np.sign(z[..., idx:idx + 1]), d, axis=-1)

    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: np.zeros(d),
        b1=b1,
        sigma=lambda t, z, zeta: np.eye(d),
        bound_C=float(2.0 * np.sqrt(d)),
        ellipticity_nu=1.0,
        b0_axes=(), b1_axes=(axis,), sigma_axes=(),
        name=f"sign-drift-{axis}",
    )


def sign_y_b1_system(c=0.25, d=1):
    """b1 = c sign(y) coordinatewise, the piecewise velocity-drift fixture."""
    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: np.zeros(d),
        b1=lambda t, z, zeta: c * np.sign(z[..., d:]),
        sigma=lambda t, z, zeta: np.eye(d),
        bound_C=float((c + 1.0) * np.sqrt(d)),
        ellipticity_nu=1.0,
        b0_axes=(), b1_axes=("y",), sigma_axes=(),
        name="sign-y",
    )


def indicator_sigma_system(d=1):
    """sigma = (1 + 1{y.eta > 0}/2) I, the piecewise diffusion fixture."""

    def sigma(t, z, zeta):
        dot = np.sum(z[..., d:] * zeta[..., d:], axis=-1)
        s = 1.0 + 0.5 * (dot > 0)
        out = np.zeros(np.shape(s) + (d, d))
        out[...] = np.eye(d)
        return out * s[..., None, None]

    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: np.zeros(d),
        b1=lambda t, z, zeta: np.zeros(d),
        sigma=sigma,
        bound_C=float(1.5 * np.sqrt(d) + 1.0),
        ellipticity_nu=1.0,
        name="indicator-sigma",
    )


def eta_indicator_sigma_system(d=1):
    """sigma = (1 + 1{eta_1 > 0}/2) I, interaction through the measure only."""

    def sigma(t, z, zeta):
        s = 1.0 + 0.5 * (zeta[..., d] > 0)
        out = np.zeros(np.shape(s) + (d, d))
        out[...] = np.eye(d)
        return out * s[..., None, None]

    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: np.zeros(d),
        b1=lambda t, z, zeta: np.zeros(d),
        sigma=sigma,
        bound_C=float(1.5 * np.sqrt(d) + 1.0),
        ellipticity_nu=1.0,
        sigma_axes=("eta",),
        name="eta-indicator-sigma",
    )


def mixed_system(d=1):
    """b1 mixes a velocity term and an interaction term; used for hand sums."""

    def b1(t, z, zeta):
        return 0.3 * np.tanh(z[..., d:]) + 0.4 * np.tanh(zeta[..., :d] - z[..., :d])

    return CoefficientSet(
        d=d,
        b0=lambda t, z, zeta: np.zeros(d),
        b1=b1,
        sigma=lambda t, z, zeta: np.eye(d),
        bound_C=float((0.7 + 1.0) * np.sqrt(d)),
        ellipticity_nu=1.0,
        b1_axes=("x", "y", "xi"),
        name="mixed",
    )


@pytest.fixture
def free_d1():
    from mvsde import make_system
    return make_system("free")
