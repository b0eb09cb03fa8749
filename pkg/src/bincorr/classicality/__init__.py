"""Classical-set membership, critical visibilities, and dual certificates."""

from .battery import BatteryInstance, MonotonicityReport, monotonicity_battery
from .bell import (
    bell_critical_visibility,
    bell_membership_bruteforce,
    bruteforce_visibility_bell,
)
from .certificates import Certificate, VerificationReport, verify_certificate
from .pm import (
    bruteforce_visibility_pm,
    pm_critical_visibility,
    rac_binarised_witness_classical_max,
    rac_binarised_witness_value,
)
from .steering import steering_critical_visibility

__all__ = [
    "BatteryInstance",
    "Certificate",
    "MonotonicityReport",
    "VerificationReport",
    "bell_critical_visibility",
    "bell_membership_bruteforce",
    "bruteforce_visibility_bell",
    "bruteforce_visibility_pm",
    "monotonicity_battery",
    "pm_critical_visibility",
    "rac_binarised_witness_classical_max",
    "rac_binarised_witness_value",
    "steering_critical_visibility",
    "verify_certificate",
]
