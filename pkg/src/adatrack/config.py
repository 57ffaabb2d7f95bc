"""Named tracker settings. Defaults follow common DCF-tracker practice; every
value can be overridden per run."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .solvers import BacfConfig, CgSettings


@dataclass
class TrackerConfig:
    # desired response and spatial penalty
    sigma_factor: float = 1.0 / 12.0   # label sigma / target size, in cells
    reg_min_weight: float = 0.1
    reg_slope: float = 3.0
    # search geometry
    search_area_scale: float = 4.0     # search window area / target area
    cell_size: int = 4                 # pixels per feature cell (builtin extractor)
    n_orientations: int = 8
    min_grid: int = 8                  # smallest canonical grid side, cells
    feature_window: bool = True        # taper samples with a Hann window
    feature_normalize: bool = True     # scale samples to unit RMS energy
    # scale search
    num_scales: int = 5
    scale_step: float = 1.02
    # model update
    learning_rate_eco: float = 0.009
    learning_rate_bacf: float = 0.013
    sample_capacity: int = 30
    train_interval: int = 5            # frames between filter refreshes
    # solvers
    cg: CgSettings = field(default_factory=CgSettings)
    bacf: BacfConfig = field(default_factory=BacfConfig)

    def override(self, **kwargs) -> "TrackerConfig":
        return replace(self, **kwargs)

    def learning_rate(self, solver: str) -> float:
        return self.learning_rate_eco if solver == "eco" else self.learning_rate_bacf
