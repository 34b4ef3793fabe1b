# models/__init__.py

from .oil_model import (
    OilParams,
    OilState,
    OilShift,
    OilModel,
    GibsonSchwartzParams,
    log_variance,
    spot_vol,
    transition_moments,
    step_correlation,
    evolve_oil_state,
    forward_price,
    calibrate_shift,
    map_gibson_schwartz,
    model_atm_vol,
    vol_term_structure,
    calibrate_oil_params,
    calibrate_oil_model,
)
from .credit_model import (
    NO_DEFAULT,
    CirParams,
    CreditShift,
    CreditModel,
    IntensityPath,
    cir_zcb_price,
    model_survival,
    fit_credit_shift,
    cir_transition_moments,
    evolve_cir,
    evolve_cir_euler,
    cumulative_intensity,
    sample_default_time,
    simulate_intensity,
    calibrate_credit_model,
    cds_model_price,
)
