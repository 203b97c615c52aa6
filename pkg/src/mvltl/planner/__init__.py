from .oracle import GridTooLargeError, grid_oracle_plan
from .product import (LassoPlan, NoPlanError, ProductState, ViolationTable, default_beta,
                      product_edge, replay, total_violation)
from .rrt import PlanParams, Tree, plan_lasso

__all__ = [
    "GridTooLargeError", "LassoPlan", "NoPlanError", "PlanParams", "ProductState", "Tree",
    "ViolationTable", "default_beta", "grid_oracle_plan", "plan_lasso", "product_edge", "replay",
    "total_violation",
]
