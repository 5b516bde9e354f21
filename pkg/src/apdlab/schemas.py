"""Pydantic models for config documents and service payloads.

These are the external contract: JSON config files consumed by the CLI
are the request bodies of the corresponding service endpoints.  Field
names carry explicit units (``_hz``, ``_s``) so documents stay
unambiguous across tools.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .apd_model import DetectorParams


class DetectorModel(BaseModel):
    eta_apd: float = Field(1.0, ge=0.0, le=1.0)
    dark_rate_hz: float = Field(0.0, ge=0.0)
    dead_time_s: float = Field(..., gt=0.0)

    def to_params(self) -> DetectorParams:
        return DetectorParams(
            eta_apd=self.eta_apd, dark_rate=self.dark_rate_hz, dead_time=self.dead_time_s
        )


class SweepAxis(BaseModel):
    """Evenly spaced sweep values from start to stop inclusive."""

    start: float
    stop: float
    num: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop < self.start:
            raise ValueError("sweep stop must be >= start")
        if self.num > 1 and self.stop == self.start:
            raise ValueError("sweep with num > 1 needs stop > start")
        return self

    def values(self) -> list[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.num)]


class SimOptions(BaseModel):
    duration_s: float = Field(..., gt=0.0)
    seed: int = Field(0, ge=0, lt=2**64)
    shards: int = Field(1, ge=1)


class SourceModel(BaseModel):
    """Sweep axis plus fixed source parameters; required fields depend on mode."""

    transmission: Optional[SweepAxis] = None
    f_rep_hz: Optional[float] = Field(None, gt=0.0)
    f_rep_sweep_hz: Optional[SweepAxis] = None
    mu_max: Optional[float] = Field(None, ge=0.0)
    mu_per_pulse: Optional[float] = Field(None, ge=0.0)
    photon_rate_hz: Optional[float] = Field(None, ge=0.0)
    slot_width_s: Optional[float] = Field(None, gt=0.0)


class SimulateRequest(BaseModel):
    mode: Literal["cw", "pulsed-constant-frequency", "pulsed-constant-energy"]
    detector: DetectorModel
    source: SourceModel
    sim: SimOptions

    @model_validator(mode="after")
    def _mode_fields(self):
        src = self.source
        if self.mode == "cw":
            missing = [
                name
                for name, value in (
                    ("source.photon_rate_hz", src.photon_rate_hz),
                    ("source.transmission", src.transmission),
                )
                if value is None
            ]
        elif self.mode == "pulsed-constant-frequency":
            missing = [
                name
                for name, value in (
                    ("source.f_rep_hz", src.f_rep_hz),
                    ("source.mu_max", src.mu_max),
                    ("source.transmission", src.transmission),
                )
                if value is None
            ]
        else:  # pulsed-constant-energy
            missing = [
                name
                for name, value in (
                    ("source.mu_per_pulse", src.mu_per_pulse),
                    ("source.f_rep_sweep_hz", src.f_rep_sweep_hz),
                )
                if value is None
            ]
        if missing:
            raise ValueError(f"mode '{self.mode}' requires {', '.join(missing)}")
        return self


class NetworkModel(BaseModel):
    stages: int = Field(..., ge=1, le=10)
    ratios: Optional[list[float]] = None  # level order; omit for a balanced tree
    base_delay_s: float = Field(100e-9, gt=0.0)


class TmdRequest(BaseModel):
    mode: Literal["tmd"] = "tmd"
    network: NetworkModel
    mu_max: float = Field(..., ge=0.0)
    transmission: SweepAxis
    system_transmission: float = Field(1.0, gt=0.0, le=1.0)
    dark_clicks_per_pulse: float = Field(0.0, ge=0.0)
    n_pulses_per_point: int = Field(0, ge=0)  # 0 = exact statistics
    seed: int = Field(0, ge=0, lt=2**64)
    n_max: Optional[int] = Field(None, ge=0)


class RecordModel(BaseModel):
    x: float
    y: float = Field(..., ge=0.0)
    y_err: Optional[float] = Field(None, ge=0.0)
    n_samples: Optional[int] = Field(None, ge=1)


class FitRequest(BaseModel):
    model: Literal["linear", "saturation", "mean-clicks"]
    records: list[RecordModel] = Field(..., min_length=2)
    f_rep_hz: Optional[float] = Field(None, gt=0.0)
    n_bins: Optional[int] = Field(None, ge=1)
    window: Optional[int] = Field(None, ge=2)

    @model_validator(mode="after")
    def _model_fields(self):
        if self.model == "saturation" and self.f_rep_hz is None:
            raise ValueError("saturation fit requires f_rep_hz")
        if self.model == "mean-clicks" and self.n_bins is None:
            raise ValueError("mean-clicks fit requires n_bins")
        return self


class CwCorrectionModel(BaseModel):
    detector: DetectorModel
    target_rates_hz: list[float] = Field(..., min_length=1)
    duration_s: float = Field(..., gt=0.0)
    seed: int = Field(0, ge=0, lt=2**64)
    slot_width_s: Optional[float] = Field(None, gt=0.0)
    shards: int = Field(1, ge=1)


class CorrectionTableRequest(BaseModel):
    records: Optional[list[RecordModel]] = None
    linear_window_points: Optional[int] = Field(None, ge=2)
    cw: Optional[CwCorrectionModel] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.records is None) == (self.cw is None):
            raise ValueError("provide exactly one of 'records' or 'cw'")
        return self


class TableResponse(BaseModel):
    columns: list[str]
    rows: list[list[int | float]]
    csv: str


class FitReportModel(BaseModel):
    params: dict[str, float]
    param_errs: dict[str, float]
    residual_norm: float
    converged: bool
    n_iterations: int
    window: Optional[dict] = None
    message: str = ""


class HealthResponse(BaseModel):
    status: str
    version: str
