"""Checkpoint persistence: a JSON manifest next to a binary of tensor records.

``checkpoint.json`` holds the model configuration, the epoch and one entry per
parameter or buffer (name, kind, byte offset, shape); ``checkpoint.bin`` is the
concatenation of the tensor records the entries point into.
"""

import logging
from pathlib import Path
from typing import List, Literal, Tuple

from pydantic import BaseModel, Field

from core.errors import ParamsMismatchError
from core.json_bound_model import JSONBoundModel
from core.tensor.serialization import read_tensor, write_tensor
from .network import EyeLandmarkNet, ModelConfig

logger = logging.getLogger(__name__)

MANIFEST_NAME = "checkpoint.json"
BINARY_NAME = "checkpoint.bin"
FORMAT = "eyemark-checkpoint/1"


class CheckpointEntry(BaseModel):
    name : str
    kind : Literal["param", "buffer"]
    offset : int
    shape : List[int]


class CheckpointManifest(BaseModel):
    """Manifest of one checkpoint.

    Attributes:
        format (str): Format tag.
        model (ModelConfig): Configuration the parameters belong to.
        epoch (int): Number of completed training epochs.
        entries (List[CheckpointEntry]): Index into ``checkpoint.bin``.
    """
    format : str = FORMAT
    model : ModelConfig = Field(default_factory = ModelConfig)
    epoch : int = 0
    entries : List[CheckpointEntry] = Field(default_factory = list)


def checkpoint_dir(path : Path) -> Path:
    """Accepts a checkpoint directory or its manifest file."""
    path = Path(path)
    return path.parent if path.name == MANIFEST_NAME else path


def save_checkpoint(net : EyeLandmarkNet, directory : Path, epoch : int) -> Path:
    """Writes ``checkpoint.json`` and ``checkpoint.bin`` into ``directory``.

    Returns:
        Path: The manifest path.
    """
    directory.mkdir(parents = True, exist_ok = True)
    params, buffers = net.params.state()
    entries : List[CheckpointEntry] = []
    offset = 0
    with (directory / BINARY_NAME).open("wb") as stream:
        for kind, arrays in (("param", params), ("buffer", buffers)):
            for name, array in arrays.items():
                entries.append(CheckpointEntry(name = name, kind = kind, offset = offset, shape = list(array.shape)))
                offset += write_tensor(stream, array)

    manifest = JSONBoundModel(
        directory / MANIFEST_NAME, CheckpointManifest,
        data = CheckpointManifest(model = net.config, epoch = epoch, entries = entries)
    )
    manifest.save()
    logger.debug(f"Saved checkpoint (epoch {epoch}, {len(entries)} tensors) to {directory}")
    return manifest.path


def load_checkpoint(path : Path) -> Tuple[EyeLandmarkNet, CheckpointManifest]:
    """Rebuilds the network stored in a checkpoint.

    Raises:
        FileNotFoundError: If the manifest is missing.
        ParamsMismatchError: If the stored tensors do not fit the stored configuration.
    """
    directory = checkpoint_dir(path)
    bound = JSONBoundModel(directory / MANIFEST_NAME, CheckpointManifest)
    bound.load(required = True)
    manifest = bound.data
    if manifest.format != FORMAT:
        raise ParamsMismatchError(f"unsupported checkpoint format '{manifest.format}'")

    net = EyeLandmarkNet(manifest.model)
    params, buffers = {}, {}
    with (directory / BINARY_NAME).open("rb") as stream:
        for entry in manifest.entries:
            stream.seek(entry.offset)
            array = read_tensor(stream)
            if list(array.shape) != entry.shape:
                raise ParamsMismatchError(f"tensor '{entry.name}' does not match its manifest shape")
            (params if entry.kind == "param" else buffers)[entry.name] = array
    net.params.load(params, buffers)
    net.verify()
    logger.info(f"Loaded checkpoint {directory} (epoch {manifest.epoch})")
    return net, manifest
