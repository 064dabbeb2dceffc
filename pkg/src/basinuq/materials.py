"""Per-lithology constitutive constants and pointwise material laws.

All quantities are SI.  The types are frozen dataclasses so they can be
shared freely across concurrent model evaluations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .units import CELSIUS_OFFSET


@dataclass(frozen=True)
class MaterialProperties:
    """Constitutive constants of one lithology.

    rho_s      solid density [kg m^-3]
    c_s        solid specific thermal capacity [J K^-1 kg^-1]
    lambda_s   solid heat conductivity [W K^-1 m^-1]
    phi0       depositional porosity [-]
    phi_f      residual porosity under pure mechanical compaction [-]
    k1, k2     porosity-permeability coefficients (log10 m^2 scale)
    beta       uniaxial vertical compressibility [Pa^-1]
    quartz_active  whether quartz cementation operates in this lithology
                   (it selectively affects sand-rich sediments)
    """

    rho_s: float
    c_s: float
    lambda_s: float
    phi0: float
    phi_f: float
    k1: float
    k2: float
    beta: float
    quartz_active: bool = False

    def __post_init__(self):
        problems = []
        if not (0.0 < self.phi_f < self.phi0 < 1.0):
            problems.append(
                f"need 0 < phi_f < phi0 < 1, got phi_f={self.phi_f}, phi0={self.phi0}"
            )
        if not self.beta > 0.0:
            problems.append(f"beta must be positive, got {self.beta}")
        if not self.rho_s > 0.0:
            problems.append(f"rho_s must be positive, got {self.rho_s}")
        if problems:
            raise ValueError("invalid MaterialProperties: " + "; ".join(problems))


@dataclass(frozen=True)
class FluidProperties:
    """Pore fluid and seawater constants (single uniform fluid)."""

    rho_l: float
    rho_sea: float
    mu_l: float
    c_l: float
    lambda_l: float

    def __post_init__(self):
        bad = [
            name
            for name, v in (
                ("rho_l", self.rho_l),
                ("rho_sea", self.rho_sea),
                ("mu_l", self.mu_l),
                ("c_l", self.c_l),
                ("lambda_l", self.lambda_l),
            )
            if not v > 0.0
        ]
        if bad:
            raise ValueError(f"FluidProperties fields must be positive: {bad}")


@dataclass(frozen=True)
class QuartzKinetics:
    """Quartz precipitation-rate constants.

    rho_q  quartz density [kg m^-3]
    m_q    molar mass [kg mol^-1]
    a0     specific surface at onset of cementation [m^-1]
    a_q    rate prefactor [mol m^-2 s^-1]
    b_q    temperature exponent [1/degC]; the rate uses T in Celsius
    t_c    activation temperature [K]
    """

    rho_q: float
    m_q: float
    a0: float
    a_q: float
    b_q: float
    t_c: float

    def __post_init__(self):
        bad = [
            name
            for name, v in (
                ("rho_q", self.rho_q),
                ("m_q", self.m_q),
                ("a0", self.a0),
                ("a_q", self.a_q),
                ("b_q", self.b_q),
                ("t_c", self.t_c),
            )
            if not v > 0.0
        ]
        if bad:
            raise ValueError(f"QuartzKinetics fields must be positive: {bad}")
        if not (353.0 <= self.t_c <= 373.15 + 1e-9):
            warnings.warn(
                f"activation temperature {self.t_c} K outside the typical "
                "353-373 K window",
                stacklevel=2,
            )


def permeability(phi, mat: MaterialProperties):
    """Permeability [m^2] from porosity: K = 10^(k1*phi - k2 - 15).

    Accepts scalars or arrays; phi must lie in [0, 1).
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0.0) or np.any(phi >= 1.0):
        raise OutsidePorosityRange(f"porosity outside [0, 1): {phi}")
    out = 10.0 ** (mat.k1 * phi - mat.k2 - 15.0)
    return out if out.ndim else float(out)


class OutsidePorosityRange(ValueError):
    """Porosity argument fell outside the physical [0, 1) range."""


def mech_equilibrium_porosity(sigma_c, mat: MaterialProperties):
    """Drained-equilibrium porosity phi_f + (phi0 - phi_f) exp(-beta*sigma_c).

    Closed-form integral of the mechanical compaction law from a zero
    effective-stress depositional state.  Used as an oracle for the
    solver, never inside it.
    """
    sigma_c = np.asarray(sigma_c, dtype=float)
    out = mat.phi_f + (mat.phi0 - mat.phi_f) * np.exp(-mat.beta * sigma_c)
    return out if out.ndim else float(out)


def quartz_rate(phi, phi_act, temperature, kin: QuartzKinetics, activated=True):
    """Quartz volume-fraction rate dphi_Q/dt [s^-1].

    Zero below the activation temperature or for never-activated cells;
    otherwise A0 * (phi/phi_act) * (M_Q/rho_Q) * a_q * 10^(b_q * T_degC).
    """
    phi = np.asarray(phi, dtype=float)
    temperature = np.asarray(temperature, dtype=float)
    active = np.asarray(activated, dtype=bool) & (temperature >= kin.t_c)
    t_cel = temperature - CELSIUS_OFFSET
    rate = (
        kin.a0
        * (phi / np.asarray(phi_act, dtype=float))
        * (kin.m_q / kin.rho_q)
        * kin.a_q
        * 10.0 ** (kin.b_q * t_cel)
    )
    out = np.where(active, rate, 0.0)
    return out if out.ndim else float(out)


def thermal_coefficients(phi, mat: MaterialProperties, fluid: FluidProperties):
    """Effective heat capacity C_T and conductivity K_T of the mixture.

    C_T = phi*rho_l*c_l + (1-phi)*rho_s*c_s  (volume average)
    K_T = lambda_l^phi * lambda_s^(1-phi)    (geometric mean)
    """
    phi = np.asarray(phi, dtype=float)
    c_t = phi * fluid.rho_l * fluid.c_l + (1.0 - phi) * mat.rho_s * mat.c_s
    k_t = fluid.lambda_l**phi * mat.lambda_s ** (1.0 - phi)
    if c_t.ndim:
        return c_t, k_t
    return float(c_t), float(k_t)
