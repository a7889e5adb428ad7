"""Momentum SGD lab: pathwise energy decay, martingale concentration, and
stopping-time envelope verification at desk scale."""

__version__ = "0.1.0"
