"""HTTP service exposing the checker over JSON.

Each endpoint mirrors a command: the request carries the same flags, the
response carries the deterministic report plus the exit code the command
would have returned, so a thin client only prints and exits. Annotations
travel as the textual term format from the store module.
"""

from __future__ import annotations

from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import cli
from .annot import AnnotError, merge, normalize_ann
from .store import StoreError, annotation_from_text, annotation_to_text, diff_annotations

app = FastAPI(title="annocheck", version="0.1.0")


class CommandResponse(BaseModel):
    report: str
    exit_code: int


class CheckRequest(BaseModel):
    triple: str
    params: Optional[str] = None
    project: str = "corpus"
    workers: int = 1
    audit: bool = False
    format: str = "full"


class AnnotateRequest(BaseModel):
    goal: str
    params: Optional[str] = None
    project: str = "corpus"
    audit: bool = False
    format: str = "full"


class ReuseRequest(BaseModel):
    goal: str
    with_ref: str
    params: Optional[str] = None
    project: str = "corpus"
    audit: bool = False
    format: str = "full"


class AnnotationRef(BaseModel):
    """Either a named reference (fixture:KEY or stored key) or inline
    annotation text."""

    ref: Optional[str] = None
    text: Optional[str] = None


class MergeRequest(BaseModel):
    left: AnnotationRef
    right: AnnotationRef
    params: Optional[str] = None
    project: str = "corpus"


class DiffRequest(BaseModel):
    left: AnnotationRef
    right: AnnotationRef
    params: Optional[str] = None
    project: str = "corpus"


class AnnotationResponse(BaseModel):
    report: str
    exit_code: int
    annotation: Optional[str] = None


class DiffEntry(BaseModel):
    step: int
    left: Optional[str] = None
    right: Optional[str] = None


class DiffResponse(BaseModel):
    report: str
    exit_code: int
    differences: List[DiffEntry]


def _workspace(project: str, params: Optional[str]) -> cli.Workspace:
    try:
        return cli.build_workspace(project, params)
    except (cli.UsageError, StoreError) as e:
        raise HTTPException(status_code=400, detail=str(e))


def _resolve(ref: AnnotationRef, ws: cli.Workspace):
    try:
        if ref.text is not None:
            return annotation_from_text(ref.text)
        if ref.ref is not None:
            return cli.resolve_annotation(ref.ref, ws)
    except (cli.UsageError, StoreError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    raise HTTPException(status_code=400, detail="annotation reference is empty")


@app.post("/check", response_model=CommandResponse)
def check(req: CheckRequest) -> CommandResponse:
    ws = _workspace(req.project, req.params)
    try:
        report, code = cli.cmd_check(ws, req.triple, req.workers, req.audit, req.format)
    except cli.UsageError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return CommandResponse(report=report, exit_code=code)


@app.post("/annotate", response_model=AnnotationResponse)
def annotate(req: AnnotateRequest) -> AnnotationResponse:
    ws = _workspace(req.project, req.params)
    try:
        report, code, ann = cli.cmd_annotate(ws, req.goal, None, req.audit, req.format)
    except cli.UsageError as e:
        raise HTTPException(status_code=400, detail=str(e))
    text = annotation_to_text(ann) if code == cli.EXIT_HOLDS else None
    return AnnotationResponse(report=report, exit_code=code, annotation=text)


@app.post("/reuse", response_model=AnnotationResponse)
def reuse(req: ReuseRequest) -> AnnotationResponse:
    ws = _workspace(req.project, req.params)
    try:
        report, code, ann = cli.cmd_reuse(
            ws, req.goal, req.with_ref, None, req.audit, req.format
        )
    except cli.UsageError as e:
        raise HTTPException(status_code=400, detail=str(e))
    text = annotation_to_text(ann) if code == cli.EXIT_HOLDS else None
    return AnnotationResponse(report=report, exit_code=code, annotation=text)


@app.post("/merge", response_model=AnnotationResponse)
def merge_endpoint(req: MergeRequest) -> AnnotationResponse:
    ws = _workspace(req.project, req.params)
    a = _resolve(req.left, ws)
    b = _resolve(req.right, ws)
    try:
        m = normalize_ann(merge(a, b))
    except AnnotError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return AnnotationResponse(
        report="merged", exit_code=cli.EXIT_HOLDS, annotation=annotation_to_text(m)
    )


@app.post("/diff", response_model=DiffResponse)
def diff(req: DiffRequest) -> DiffResponse:
    ws = _workspace(req.project, req.params)
    a = _resolve(req.left, ws)
    b = _resolve(req.right, ws)
    ds = diff_annotations(a, b)
    entries = [
        DiffEntry(
            step=d.step,
            left=None if d.left is None else cli.render_pred(d.left),
            right=None if d.right is None else cli.render_pred(d.right),
        )
        for d in ds
    ]
    report = "identical" if not ds else f"{len(ds)} steps differ"
    code = cli.EXIT_HOLDS if not ds else cli.EXIT_VIOLATED
    return DiffResponse(report=report, exit_code=code, differences=entries)


@app.get("/health")
def health():
    return {"status": "ok"}
