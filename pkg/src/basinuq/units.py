"""Unit conversions.

Scenario files speak Ma and m/Ma; all solver arithmetic is SI.
"""

SECONDS_PER_MA = 3.15576e13  # 1 Ma = 1e6 Julian years of 365.25 days

CELSIUS_OFFSET = 273.15


def ma_to_s(t_ma: float) -> float:
    return t_ma * SECONDS_PER_MA


def s_to_ma(t_s: float) -> float:
    return t_s / SECONDS_PER_MA


def rate_ma_to_s(rate_m_per_ma: float) -> float:
    """Convert a sedimentation rate from m/Ma to m/s."""
    return rate_m_per_ma / SECONDS_PER_MA


def kelvin_to_celsius(t_k: float) -> float:
    return t_k - CELSIUS_OFFSET
