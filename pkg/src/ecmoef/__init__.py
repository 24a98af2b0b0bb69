"""Energy-circuit optimal energy flow for coupled electricity, gas and heat networks."""

from .scenario import Scenario, load_scenario, save_scenario

__version__ = "0.1.0"

__all__ = ["Scenario", "load_scenario", "save_scenario", "__version__"]
