from .counterexample import AnnulusFamily, annulus_floor, area_function_truncated, build_counterexample, off_annuli_sup
from .functions import AnalyticFunction, ClosedForm, Lacunary, PowerSeries, parse_function
from .seminorm import GridSpec, bloch_seminorm, level_set_member, little_bloch_profile
