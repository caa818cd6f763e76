import hashlib
from typing import List

import orjson
from pydantic import BaseModel

from src.models.base import orjson_dumps


def config_digest(document: dict) -> str:
    canonical = orjson.dumps(document, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY)
    return hashlib.sha256(canonical).hexdigest()


class RunManifest(BaseModel):
    command: str
    config_digest: str
    seed: int
    tool_version: str
    outputs: List[str] = []

    class Config:
        json_loads = orjson.loads
        json_dumps = orjson_dumps
