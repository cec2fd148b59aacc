"""Large-market price of anarchy experiments: uniform price and greedy auctions,
approximate utilities, smoothness checks and atomic congestion games."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AdditiveMarginal, CappedCombinatorial, Estimate, FixedSupply, GreedyBid, MarketConfig,
    RngStream, SingleMinded, UniformIntegerSupply, UnitDemand, eval_valuation,
)
