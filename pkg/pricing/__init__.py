# pricing/__init__.py

from .pricers import (
    Side,
    ForwardContract,
    CommoditySwap,
    forward_value,
    option_on_forward,
    swap_value,
    annuity,
    fair_strike,
    fixed_leg_value,
    product_annuity,
    product_fixed_leg,
    residual_npv,
    exposure_strip,
    swap_exposure_strip,
    bucket_default_probabilities,
    cva_forward_independent,
    cva_swap_independent,
    cva_independent,
    cva_upper_bound,
    with_side,
)
from .cva_engine import (
    DEFAULT_SEED,
    RESULT_COLUMNS,
    Estimator,
    CirScheme,
    CorrelationSpec,
    SimulationConfig,
    JointPathEnsemble,
    CvaResult,
    map_market_correlation,
    simulate_joint_paths,
    cva_bucketed,
    run_cva,
    run_cva_async,
    adjusted_strike,
)
from .scenarios import (
    CalibratedMarket,
    Scenario,
    SweepSpec,
    anchor_forward_curve,
    build_scenario,
    price_scenario,
    run_sweep,
)
