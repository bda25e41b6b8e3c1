from .b2 import B2Report, GammaReport, b2_characteristic, b2_predicate, gamma, in_b2, vanishing_b2_profile
from .families import (
    Composed,
    ExpHarmonic,
    GridSampled,
    LogFunction,
    PointPower,
    RadialPower,
    Weight,
    arctan_re_weight,
    constant_weight,
    parse_weight,
)
from .oscillation import bmo_disc_norm, epsilon_condition, epsilon_stability, jn_profile, oscillation_constant
from .sarason import sarason_check, sarason_search
