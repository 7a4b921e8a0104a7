from .params import ParamStore, ParamScope
from .blocks import (
    HourglassConfig,
    declare_stem, stem_forward,
    declare_residual, residual_forward, residual_param_count,
    declare_dlau, dlau_forward, dlau_param_count,
    declare_hourglass, hourglass_forward, hourglass_param_count,
)
