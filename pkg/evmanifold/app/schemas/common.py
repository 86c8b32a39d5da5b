from pydantic import BaseModel
from typing import List, Optional


class ErrorDetail(BaseModel):
    error_type: str
    message: str
    stage: Optional[str] = None
    index: Optional[int] = None
    point: Optional[List[float]] = None
    cell: Optional[List[int]] = None
    exit_code: int


class ErrorResponse(BaseModel):
    detail: ErrorDetail
