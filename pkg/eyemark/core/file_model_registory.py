import logging
import os
import shutil
from pathlib import Path
from typing import Any, Optional, Type

from .json_bound_model import JSONBoundModel, _T

logger = logging.getLogger(__name__)


class FileModelRegistry:
    """Staged artifact directory of one verb run.

    Everything a verb writes goes into ``rootdir/.<name>.partial``. JSON
    artifacts are registered as :class:`JSONBoundModel` instances and saved
    together; :meth:`commit` then replaces ``rootdir/<name>`` with the staging
    directory, and :meth:`discard` throws the staging directory away, so a failed
    run leaves no partial output behind.

    Attributes:
        _rootdir (Path): Output root directory.
        _staging (Path): Directory receiving this run's files.
        _final (Path): Directory the files end up in after commit.
        _models (dict[str, JSONBoundModel]): Registered JSON artifacts.

    Examples:
        >>> from pydantic import BaseModel
        >>> from pathlib import Path
        >>> class Report(BaseModel):
        ...     n: int = 0
        >>> reg = FileModelRegistry(Path("out"), "eval")
        >>> reg.put("report", Report(n = 3))
        >>> reg.commit()
        PosixPath('out/eval')
    """

    def __init__(self, rootdir : Path, name : str):
        """Initialize the registry and an empty staging directory.

        Args:
            rootdir (Path): The base directory where artifacts are stored.
            name (str): Verb name; the committed directory is ``rootdir/name``.
        """
        self._rootdir = rootdir
        self._final = rootdir / name
        self._staging = rootdir / f".{name}.partial"
        if self._staging.exists():
            shutil.rmtree(self._staging)
        self._staging.mkdir(parents = True, exist_ok = True)

        self._models : dict[str, JSONBoundModel[Any]] = {}

    @property
    def staging(self) -> Path:
        return self._staging

    @property
    def final(self) -> Path:
        return self._final

    def path(self, *parts : str) -> Path:
        """Path of a file inside the staging directory; parent directories are created."""
        target = self._staging.joinpath(*parts)
        target.parent.mkdir(parents = True, exist_ok = True)
        return target

    def bind(self, name : str, schema : Type[_T], subdir : Optional[str] = None) -> JSONBoundModel[_T]:
        """Register a JSON artifact, or retrieve an already registered one.

        Args:
            name (str): The identifier for the artifact (used as filename).
            schema (Type[_T]): Pydantic model class of the artifact.
            subdir (str, optional): Optional subdirectory inside the staging directory.

        Returns:
            JSONBoundModel[_T]: The bound model.
        """
        if name in self._models.keys():
            return self._models[name]

        jsonpath = self._staging / (subdir if subdir is not None else "") / f"{name}.json"
        jsonmodel = JSONBoundModel(jsonfilename = jsonpath, schema = schema)
        self._models[name] = jsonmodel
        return jsonmodel

    def put(self, name : str, data : _T, subdir : Optional[str] = None) -> JSONBoundModel[_T]:
        """Register a JSON artifact with the given value."""
        jsonmodel = self.bind(name, type(data), subdir)
        jsonmodel.data = data
        return jsonmodel

    def save_all(self):
        """Save all registered artifacts to their JSON files.

        Raises:
            OSError: If any artifact cannot be written.
        """
        for model in self._models.values():
            try:
                model.save()
            except OSError as e:
                logger.error(f"Failed to save {model.path}: {e}")
                raise

    def commit(self) -> Path:
        """Save all artifacts and move the staging directory into place.

        Returns:
            Path: The committed directory ``rootdir/<name>``.
        """
        self.save_all()
        if self._final.exists():
            shutil.rmtree(self._final)
        os.replace(self._staging, self._final)
        logger.info(f"Artifacts committed to {self._final}")
        return self._final

    def discard(self):
        """Remove the staging directory and everything in it."""
        if self._staging.exists():
            shutil.rmtree(self._staging, ignore_errors = True)
            logger.info(f"Discarded partial output {self._staging}")
