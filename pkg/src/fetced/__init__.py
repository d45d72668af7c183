"""Free-time convergent error-dynamics guidance laws and a planar engagement simulator."""

from .engagement import (DegenerateGeometryError, MissileState, RelativeState, SingularRangeError,
                         StateDerivative, TargetState, kinematics_rhs, relative_from_inertial)
from .error_dynamics import (FeTCParams, ReachingProfile, fetc_closed_form, fetc_closed_form_rate,
                             fetc_rate, reaching_profile)
from .guidance import ErrorReadout, GuidanceSpec, Law
from .simulator import EngagementMetrics, SimConfig, Trajectory, compare_energy, run_engagement

__version__ = "0.1.0"
