import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from basinuq.materials import (
    FluidProperties,
    MaterialProperties,
    OutsidePorosityRange,
    QuartzKinetics,
    mech_equilibrium_porosity,
    permeability,
    quartz_rate,
    thermal_coefficients,
)

SAND = MaterialProperties(
    rho_s=2648.0, c_s=741.0, lambda_s=3.0, phi0=0.5, phi_f=0.14,
    k1=14.9, k2=1.94, beta=7e-8,
)
FLUID = FluidProperties(rho_l=999.0, rho_sea=1025.0, mu_l=1.001e-3,
                        c_l=4186.0, lambda_l=0.6)
KIN = QuartzKinetics(rho_q=2650.0, m_q=6.008e-2, a0=1e4, a_q=5e-19,
                     b_q=0.022, t_c=373.15)


class TestPermeability:
    def test_zero_porosity_pins_exponent(self):
        mat = MaterialProperties(rho_s=2648, c_s=741, lambda_s=3.0,
                                 phi0=0.5, phi_f=0.14, k1=3.0, k2=8.0, beta=1e-8)
        assert permeability(0.0, mat) == pytest.approx(1e-23, rel=1e-12)

    def test_direct_evaluation(self):
        assert permeability(0.5, SAND) == pytest.approx(10 ** (-9.49), rel=1e-12)

    def test_alpha_blend_half(self):
        # alpha = 0.5 blend of the robustness study
        k1 = 14.9 * 0.5 + 1.94 * 0.5
        k2 = 7.7 * 0.5 + 8.0 * 0.5
        mat = MaterialProperties(rho_s=2648, c_s=741, lambda_s=3.0,
                                 phi0=0.55, phi_f=0.14, k1=k1, k2=k2, beta=4e-7)
        assert k1 == pytest.approx(8.42)
        assert k2 == pytest.approx(7.85)
        assert permeability(0.3, mat) == pytest.approx(10 ** (-20.324), rel=1e-12)

    def test_domain_error(self):
        with pytest.raises(OutsidePorosityRange):
            permeability(1.0, SAND)
        with pytest.raises(OutsidePorosityRange):
            permeability(-0.01, SAND)

    @given(st.floats(0.0, 0.98), st.floats(0.0, 0.98))
    def test_strictly_increasing_in_phi(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assume(hi - lo > 1e-9)
        assert permeability(lo, SAND) < permeability(hi, SAND)


class TestMechEquilibrium:
    def test_zero_stress_gives_phi0(self):
        assert mech_equilibrium_porosity(0.0, SAND) == SAND.phi0

    def test_infinite_stress_limit(self):
        assert mech_equilibrium_porosity(1e12, SAND) == pytest.approx(SAND.phi_f)

    def test_closed_form_value(self):
        mat = MaterialProperties(rho_s=2648, c_s=741, lambda_s=3.0,
                                 phi0=0.5, phi_f=0.14, k1=14.9, k2=1.94, beta=4e-8)
        expected = 0.14 + 0.36 * np.exp(-0.4)
        assert mech_equilibrium_porosity(1e7, mat) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.38131, abs=1e-5)

    @given(st.floats(0.0, 1e9), st.floats(0.0, 1e9))
    def test_decreasing_and_bounded(self, a, b):
        fa, fb = (mech_equilibrium_porosity(s, SAND) for s in (a, b))
        assert SAND.phi_f <= fa <= SAND.phi0
        if a < b:
            assert fa >= fb


class TestQuartzRate:
    def test_below_activation_temperature(self):
        assert quartz_rate(0.3, 0.3, 360.0, KIN) == 0.0

    def test_never_activated(self):
        assert quartz_rate(0.3, 0.3, 400.0, KIN, activated=False) == 0.0

    def test_direct_evaluation_at_100C(self):
        # T = 100 degC = 373.15 K, right at the activation threshold
        rate = quartz_rate(0.25, 0.25, 373.15, KIN)
        expected = 1e4 * (6.008e-2 / 2650.0) * 5e-19 * 10 ** (0.022 * 100.0)
        assert rate == pytest.approx(expected, rel=1e-12)
        assert rate == pytest.approx(1.797e-17, rel=1e-3)

    def test_linear_in_phi(self):
        r1 = quartz_rate(0.2, 0.4, 380.0, KIN)
        r2 = quartz_rate(0.4, 0.4, 380.0, KIN)
        assert r2 == pytest.approx(2.0 * r1, rel=1e-12)


class TestThermalCoefficients:
    def test_solid_end_member(self):
        c_t, k_t = thermal_coefficients(0.0, SAND, FLUID)
        assert c_t == pytest.approx(SAND.rho_s * SAND.c_s)
        assert k_t == pytest.approx(SAND.lambda_s)

    def test_fluid_end_member(self):
        c_t, k_t = thermal_coefficients(1.0, SAND, FLUID)
        assert c_t == pytest.approx(FLUID.rho_l * FLUID.c_l)
        assert k_t == pytest.approx(FLUID.lambda_l)

    def test_geometric_mean(self):
        _, k_t = thermal_coefficients(0.5, SAND, FLUID)
        assert k_t == pytest.approx(np.sqrt(1.8), rel=1e-12)

    @given(st.floats(0.0, 1.0))
    def test_conductivity_between_end_members(self, phi):
        _, k_t = thermal_coefficients(phi, SAND, FLUID)
        lo = min(FLUID.lambda_l, SAND.lambda_s)
        hi = max(FLUID.lambda_l, SAND.lambda_s)
        assert lo - 1e-12 <= k_t <= hi + 1e-12


class TestValidation:
    def test_bad_porosity_ordering(self):
        with pytest.raises(ValueError, match="phi_f"):
            MaterialProperties(rho_s=2648, c_s=741, lambda_s=3.0,
                               phi0=0.14, phi_f=0.5, k1=1, k2=1, beta=1e-8)

    def test_negative_fluid_property(self):
        with pytest.raises(ValueError, match="mu_l"):
            FluidProperties(rho_l=999, rho_sea=1025, mu_l=-1, c_l=4186, lambda_l=0.6)

    def test_unusual_activation_temperature_warns(self):
        with pytest.warns(UserWarning, match="activation temperature"):
            QuartzKinetics(rho_q=2650, m_q=6e-2, a0=1e4, a_q=5e-19,
                           b_q=0.022, t_c=400.0)
