"""
Run configuration loading and command-line overrides.
"""

from utils.run_config import RunConfig, apply_overrides, load_run_config

__all__ = ['RunConfig', 'apply_overrides', 'load_run_config']
