from .cpmm import CpmmPool, cpmm_spot_price, cpmm_swap_exact_in, get_amount_out, price_of
from .stableswap import (
    StableswapPool,
    bisect_D,
    invariant_residual,
    marginal_price,
    newton_D,
    stableswap_solve_D,
    stableswap_swap,
)
