import numpy as np
import orjson
from pydantic import BaseModel


def orjson_dumps(v, *, default):
    return orjson.dumps(v, default=default, option=orjson.OPT_SERIALIZE_NUMPY).decode()


def as_float_array(value, ndim: int, name: str) -> np.ndarray:
    array = np.array(value, dtype=float, order='C')
    if array.ndim != ndim:
        raise ValueError(f'{name} must be {ndim}-dimensional, got shape {array.shape}')
    if not np.all(np.isfinite(array)):
        raise ValueError(f'{name} must contain finite values only')
    return array


class ArrayModel(BaseModel):
    """Base model for containers of numpy arrays."""

    class Config:
        # Заменяем стандартную работу с json на более быструю
        json_loads = orjson.loads
        json_dumps = orjson_dumps
        arbitrary_types_allowed = True
        allow_population_by_field_name = True
        json_encoders = {np.ndarray: lambda array: array.tolist()}
