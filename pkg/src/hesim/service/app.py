"""FastAPI wrapper around the simulator core.

All computation lives in the core package; the service only validates
requests, dispatches, and serializes results (CSV text plus JSON reports).
The CLI talks to these endpoints, in-process by default.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, HTTPException

from .. import (__version__, excursion, explorer, lattice, loewner, presets,
                 svg, verifysuite)
from ..harmonic import SolverConfig, SolverError
from ..lattice import DomainError
from ..loewner import LoewnerError
from ..stats import EnsembleError
from .models import (DomainBuildRequest, DomainInfo, DomainResponse,
                     DomainValidateRequest, DrivingResponse, ExtractRequest,
                     HealthResponse, ReportResponse, RunRequest, RunResponse,
                     SleRequest, SleResponse, StatsRequest, VerifyRequest)

CORE_ERRORS = (DomainError, LoewnerError, EnsembleError, SolverError,
               explorer.ExplorerError, ValueError, KeyError, TypeError)


def _domain_response(domain, want_svg=False, path=None) -> DomainResponse:
    info = DomainInfo(
        n_interior=len(domain.interior),
        n_boundary=len(domain.boundary_cycle),
        n_triangles=len(domain.triangles),
        v_start=[domain.v_start.u.a, domain.v_start.u.b,
                 domain.v_start.v.a, domain.v_start.v.b],
        v_end=[domain.v_end.u.a, domain.v_end.u.b,
               domain.v_end.v.a, domain.v_end.v.b],
    )
    return DomainResponse(
        hedom=lattice.domain_to_text(domain), info=info,
        svg=svg.render_domain(domain, path=path) if want_svg else None)


def create_app() -> FastAPI:
    app = FastAPI(title="hesim service", version=__version__)

    def guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CORE_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(name="hesim", version=__version__)

    @app.post("/domain/build", response_model=DomainResponse)
    def domain_build(req: DomainBuildRequest):
        def build():
            if req.kind == "box":
                if req.width is None or req.height is None:
                    raise DomainError("box domains need width and height")
                return lattice.build_box_domain(req.width, req.height,
                                                req.split_offset)
            if req.radius is None:
                raise DomainError("hexagon domains need a radius")
            return lattice.build_hexagon_domain(req.radius)
        return _domain_response(guard(build), want_svg=req.svg)

    @app.post("/domain/validate", response_model=DomainResponse)
    def domain_validate(req: DomainValidateRequest):
        return _domain_response(guard(lattice.domain_from_text, req.hedom))

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest):
        domain = guard(lattice.domain_from_text, req.hedom)

        def go():
            if req.process == "percolation":
                return explorer.run_percolation(domain, req.seed,
                                                sample_index=req.sample_index,
                                                stop_height=req.stop_height)
            cfg = SolverConfig(method=req.method)
            return explorer.run(domain, req.seed, cfg,
                                sample_index=req.sample_index,
                                stop_height=req.stop_height)
        state = guard(go)
        return RunResponse(
            path_csv=explorer.path_to_csv(state.path),
            steps_csv=explorer.steps_to_csv(state.step_log),
            n_steps=state.n, terminated=state.terminated,
            svg=(svg.render_domain(domain, path=state.path_points)
                 if req.svg else None))

    @app.post("/sle", response_model=SleResponse)
    def sle(req: SleRequest):
        df, tips = guard(loewner.sle_path, req.kappa, req.dt, req.T, req.seed,
                         req.sample_index)
        return SleResponse(driving_csv=loewner.driving_to_csv(df),
                           trace_csv=loewner.trace_to_csv(df, tips),
                           capacity=df.capacity)

    @app.post("/driving/extract", response_model=DrivingResponse)
    def extract(req: ExtractRequest):
        pts = guard(explorer.csv_to_path, req.path_csv)
        if len(pts):
            pts = pts - pts[0]       # curves are extracted relative to v_start
        df = guard(loewner.extract_driving, pts, req.dt_max)
        return DrivingResponse(driving_csv=loewner.driving_to_csv(df),
                               capacity=df.capacity, n_steps=len(df.t) - 1)

    @app.post("/verify", response_model=ReportResponse)
    def verify(req: VerifyRequest):
        if req.corpus == "tiny":
            report = guard(verifysuite.run_identities, seed=req.seed,
                           n_domains=4, n_states=6, oracle=True,
                           perturb=req.perturb)
        else:
            report = guard(verifysuite.run_identities, seed=req.seed,
                           oracle=req.oracle, perturb=req.perturb)
        doc = json.loads(report.to_json())
        files = {"verify_stats.csv": report.csv()}
        dom = verifysuite.corpus(req.seed, 1)[0]
        spec = excursion.ExcursionSpec.make(dom)
        files["excursion_summary.csv"] = excursion.summary_to_csv(
            excursion.summary(spec, probes=sorted(dom.interior)[:3]))
        return ReportResponse(report=doc, passed=report.passed, files=files)

    @app.post("/stats", response_model=ReportResponse)
    def stats_endpoint(req: StatsRequest):
        kwargs = {}
        if req.samples is not None:
            kwargs["M"] = req.samples
        if req.scale is not None:
            kwargs["scales" if req.preset == "he-vs-bm" else "scale"] = (
                (req.scale // 2, req.scale) if req.preset == "he-vs-bm"
                else req.scale)
        report, files = guard(presets.run_preset, req.preset, seed=req.seed,
                              jobs=req.jobs, **kwargs)
        doc = json.loads(report.to_json())
        return ReportResponse(report=doc, passed=report.passed, files=files)

    return app


app = create_app()
