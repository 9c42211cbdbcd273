from .api import run_scenario, write_report

__all__ = ["run_scenario", "write_report"]

__version__ = "0.1.0"
