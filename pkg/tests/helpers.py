import os

from roiedge import bundled_scenario
from roiedge.config import RunConfig
from roiedge.sim import Scenario

BUNDLE_CONFIG = os.path.join(bundled_scenario(), "config.json")
_FEATURES: dict = {}


def bundled(overrides=()) -> Scenario:
    """Bundled scenario with overrides; features are shared across calls since they do not depend on them."""
    cfg = RunConfig.load(BUNDLE_CONFIG)
    if overrides:
        cfg = cfg.with_overrides(list(overrides))
    scn = Scenario.from_config(cfg)
    scn._features = _FEATURES
    return scn
