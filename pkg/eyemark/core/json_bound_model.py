"""Utility module for binding Pydantic models to JSON files.

Provides functions for loading/saving lists of Pydantic models as line-delimited
JSON, and a helper class binding a single model instance to a JSON file. Output is
deterministic: keys keep declaration order and floats use their shortest repr,
so rerunning a verb with the same inputs reproduces the same bytes.
"""

import json
from pathlib import Path
from typing import Generic, Iterable, List, Type, TypeVar

from pydantic import BaseModel, ValidationError

from core.errors import EyemarkError


_T = TypeVar('T', bound = BaseModel)


def list_to_jsonl(items : Iterable[_T], jsonlfilename : Path) -> int:
    """Write models as line-delimited JSON, one compact object per line.

    Returns:
        int: Number of lines written.
    """
    jsonlpath = jsonlfilename.resolve()
    jsonlpath.parent.mkdir(parents = True, exist_ok = True)
    count = 0
    with jsonlpath.open("w", encoding = "utf-8") as file:
        for item in items:
            file.write(json.dumps(item.model_dump(mode = "json"), separators = (",", ":")))
            file.write("\n")
            count += 1
    return count


def list_from_jsonl(jsonlfilename : Path, model_class : Type[_T]) -> List[_T]:
    """Read line-delimited JSON written by :func:`list_to_jsonl`.

    Raises:
        EyemarkError: If a line is not a valid record (the message names the line).
    """
    items : List[_T] = []
    with jsonlfilename.open("r", encoding = "utf-8") as file:
        for lineno, line in enumerate(file, start = 1):
            if not line.strip():
                continue
            try:
                items.append(model_class.model_validate_json(line))
            except ValidationError as e:
                raise EyemarkError(f"{jsonlfilename}:{lineno}: invalid record: {e.errors()[0]['msg']}") from e
    return items


class JSONBoundModel(Generic[_T]):
    """Binds a Pydantic model to a JSON file for simple persistent storage.

    Attributes:
        data (_T): In-memory instance of the model, initialized from file or default.

    Examples:
        >>> from pydantic import BaseModel
        >>> from pathlib import Path
        >>> class Summary(BaseModel):
        ...     n: int = 0
        ...     nme_mean: float = 0.0
        >>> model = JSONBoundModel(Path("summary.json"), Summary)
        >>> model.data.n = 12
        >>> model.save()  # Save to file
    """

    def __init__(self, jsonfilename : Path, schema : Type[_T], data : _T = None):
        """Initialize the JSONBoundModel.

        Args:
            jsonfilename (Path): Path to the JSON file for persistence.
            schema (Type[_T]): Pydantic model class to use as schema.
            data (_T, optional): Initial in-memory value; a default instance otherwise.
        """
        self._jsonpath = jsonfilename.resolve()
        self._schema = schema
        self.data : _T = data if data is not None else schema()

    @property
    def path(self) -> Path:
        return self._jsonpath

    def load(self, required : bool = False):
        """Load the model data from the JSON file.

        Args:
            required (bool): Raise instead of falling back to defaults when the file is missing.

        Raises:
            FileNotFoundError: If ``required`` and the file does not exist.
        """
        if self._jsonpath.exists():
            with self._jsonpath.open(mode = "r", encoding = "utf-8") as f:
                raw = json.load(f)
                self.data = self._schema.model_validate(raw)
        elif required:
            raise FileNotFoundError(f"no such file: {self._jsonpath}")
        else:
            self.data = self._schema()

    def save(self):
        """Save the current model data to the JSON file."""
        self._jsonpath.parent.mkdir(parents = True, exist_ok = True)
        with self._jsonpath.open(mode = 'w', encoding = "utf-8") as f:
            json.dump(self.data.model_dump(mode = "json"), f, indent = 4)
            f.write("\n")

