"""Request/response schemas of the simulation service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    name: str
    version: str


class DomainBuildRequest(BaseModel):
    kind: Literal["box", "hexagon"]
    width: Optional[int] = None
    height: Optional[int] = None
    split_offset: int = 0
    radius: Optional[int] = None
    svg: bool = False


class DomainValidateRequest(BaseModel):
    hedom: str


class DomainInfo(BaseModel):
    n_interior: int
    n_boundary: int
    n_triangles: int
    v_start: list[int]
    v_end: list[int]


class DomainResponse(BaseModel):
    hedom: str
    info: DomainInfo
    svg: Optional[str] = None


class RunRequest(BaseModel):
    hedom: str
    seed: int
    sample_index: int = 0
    process: Literal["harmonic-explorer", "percolation"] = "harmonic-explorer"
    method: Literal["monte-carlo", "direct-sparse", "conjugate-gradient",
                    "gauss-seidel"] = "monte-carlo"
    stop_height: Optional[float] = None
    svg: bool = False


class RunResponse(BaseModel):
    path_csv: str
    steps_csv: str
    n_steps: int
    terminated: bool
    svg: Optional[str] = None


class SleRequest(BaseModel):
    kappa: float = 4.0
    dt: float = Field(1e-4, gt=0)
    T: float = Field(1.0, gt=0)
    seed: int
    sample_index: int = 0


class SleResponse(BaseModel):
    driving_csv: str
    trace_csv: str
    capacity: float


class ExtractRequest(BaseModel):
    path_csv: str
    dt_max: float = Field(1e-3, gt=0)


class DrivingResponse(BaseModel):
    driving_csv: str
    capacity: float
    n_steps: int


class VerifyRequest(BaseModel):
    corpus: Literal["default", "tiny"] = "default"
    oracle: bool = False
    seed: int = 20240
    perturb: bool = False


class ReportResponse(BaseModel):
    report: dict
    passed: bool
    files: dict[str, str] = {}


class StatsRequest(BaseModel):
    preset: str
    seed: Optional[int] = None
    samples: Optional[int] = None
    scale: Optional[int] = None
    jobs: int = Field(1, ge=1, le=64)
