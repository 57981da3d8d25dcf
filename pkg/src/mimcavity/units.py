"""Unit handling.

Internally the speed of light is 1: lengths stay in metres and an angular
frequency ``w`` is stored in rad/m (``w_SI = c * w``).  Conversions to SI
happen only at the edges of the package (CLI, reports).
"""

from dataclasses import dataclass

C_SI = 299_792_458.0
HBAR_SI = 1.054_571_817e-34


@dataclass(frozen=True)
class UnitSystem:
    c: float = C_SI
    hbar: float = HBAR_SI

    def omega_to_si(self, w):
        """rad/m -> rad/s."""
        return w * self.c

    def omega_from_si(self, w):
        """rad/s -> rad/m."""
        return w / self.c

    def time_to_si(self, t):
        return t / self.c

    def time_from_si(self, t):
        return t * self.c

    def curvature_to_hz_nm2(self, d2w):
        """d^2 omega / dq^2 from rad/m^3 to (rad/s)/nm^2."""
        return d2w * self.c * 1e-18

    def slope_to_hz_nm(self, dw):
        return dw * self.c * 1e-9


SI = UnitSystem()
