import numpy as np
import pytest

from spdc_nearfield.engine import (ChiTensor, DetectorGrid, PumpField,
                                   QuadratureSettings, SpdcScenario,
                                   derive_lambda_s)
from spdc_nearfield.greens import AngularFilter
from spdc_nearfield.scatterer import NanoParticle

DIPA_EPS = 1.9763 + 0.39124j
LAMBDA_I_NM = 3370.0
LAMBDA_P_NM = 500.0


def dipa_particle(center=(0.0, 0.0, 0.01), radius_nm=5.0):
    return NanoParticle(center_um=tuple(center), radius_nm=radius_nm,
                        epsilon=DIPA_EPS)


def scenario(particles=None, quadrature=None, pixels=21, extent_um=1.5,
             theta_min_deg=0.0, chi=None, pump=None, lambda_i_nm=LAMBDA_I_NM,
             lambda_p_nm=LAMBDA_P_NM, detectors=None):
    if particles is None:
        particles = (dipa_particle(),)
    lam_s = derive_lambda_s(lambda_p_nm, lambda_i_nm)
    kwargs = {}
    if detectors is not None:
        kwargs["detector_polarizations"] = detectors
    return SpdcScenario(
        pump=pump or PumpField(wavelength_nm=lambda_p_nm, waist_um=5.0),
        chi=chi or ChiTensor({"xxx": 1.0}),
        lambda_s_nm=lam_s,
        lambda_i_nm=lambda_i_nm,
        particles=particles,
        grid=DetectorGrid(extent_um=extent_um, pixels=pixels),
        filter=AngularFilter(theta_min_deg=theta_min_deg),
        quadrature=quadrature or QuadratureSettings.coarse(),
        **kwargs,
    )


@pytest.fixture(scope="session")
def paper_coarse():
    return scenario(pixels=8)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
