"""evcsnet - EV charging-station network design.

Plans where to install chargers, of which type and how many, by solving a
two-stage stochastic program with an embedded mixed-logit choice model, and
evaluates the resulting designs with a driver-level simulation.
"""

__version__ = "0.1.0"
