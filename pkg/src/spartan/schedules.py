"""Three-phase sparse training schedule.

Warmup anneals the kept fraction from fully dense down to ``1 - s*``;
the intermediate phase holds it; fine-tuning freezes the mask. Sharpness
ramps linearly from ``beta_start`` to ``beta_max`` over warmup and
intermediate phases.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["TrainingSchedule", "WARMUP", "INTERMEDIATE", "FINE_TUNE"]

WARMUP = "warmup"
INTERMEDIATE = "intermediate"
FINE_TUNE = "fine_tune"


@dataclass(frozen=True)
class TrainingSchedule:
    total_epochs: int
    target_sparsity: float = 0.9
    beta_max: float = 10.0
    beta_start: float = 1.0
    warmup_frac: float = 0.2
    intermediate_end_frac: float = 0.8

    def __post_init__(self) -> None:
        if self.total_epochs < 0:
            raise ValueError("total_epochs must be >= 0")
        if not 0.0 < self.warmup_frac < self.intermediate_end_frac < 1.0:
            raise ValueError("need 0 < warmup_frac < intermediate_end_frac < 1")
        if not 0.0 <= self.target_sparsity < 1.0:
            raise ValueError("target_sparsity must lie in [0, 1)")
        if self.beta_max < self.beta_start:
            raise ValueError("beta_max must be >= beta_start")

    @property
    def warmup_end(self) -> float:
        return self.warmup_frac * self.total_epochs

    @property
    def intermediate_end(self) -> float:
        return self.intermediate_end_frac * self.total_epochs

    def _check(self, epoch: float) -> float:
        if not 0 <= epoch <= self.total_epochs:
            raise ValueError(f"epoch {epoch} outside [0, {self.total_epochs}]")
        return float(epoch)

    def keep_fraction_at(self, epoch: float) -> float:
        epoch = self._check(epoch)
        final = 1.0 - self.target_sparsity
        if epoch >= self.warmup_end:
            return final
        return 1.0 - self.target_sparsity * epoch / self.warmup_end

    def beta_at(self, epoch: float) -> float:
        epoch = self._check(epoch)
        if epoch >= self.intermediate_end:
            return float(self.beta_max)
        return self.beta_start + (self.beta_max - self.beta_start) * epoch / self.intermediate_end

    def phase_at(self, epoch: float) -> str:
        epoch = self._check(epoch)
        if epoch < self.warmup_end:
            return WARMUP
        if epoch < self.intermediate_end:
            return INTERMEDIATE
        return FINE_TUNE
