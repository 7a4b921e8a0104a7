"""The application module for the eyemark command line
"""

import argparse
import importlib
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Type

from pydantic import Field, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from core.data.manifest import DataConfig
from core.errors import EyemarkError, TrainingDivergedError
from core.file_model_registory import FileModelRegistry
from core.metrics import EvalConfig
from core.model.ablation import AblationConfig
from core.model.network import ModelConfig
from core.model.trainer import TrainConfig

logger = logging.getLogger(__name__)

PROG = "eyemark"


class AppConfig(BaseSettings):
    """Configuration schema for the eyemark application

    Sources, highest priority first: keyword arguments (command-line flags),
    ``EYEMARK_*`` environment variables (``__`` separates nested keys), the
    TOML file given with ``--config``, defaults. Top-level ``loss.*`` keys are
    accepted as an alias of ``model.loss.*``.

    Attributes:
        out_dir (Path): Root of every verb's output directory.
        log (str): Log level, one of error, info, debug.
        model (ModelConfig): Network configuration.
        train (TrainConfig): Training loop configuration.
        data (DataConfig): Data pipeline configuration.
        eval (EvalConfig): Evaluation configuration.
        ablation (AblationConfig): Ablation grid axes.
    """
    model_config = SettingsConfigDict(
        env_prefix = "EYEMARK_",
        env_nested_delimiter = "__",
        extra = "forbid",
    )

    out_dir : Path = Path("out")
    log : Literal["error", "info", "debug"] = "info"
    model : ModelConfig = Field(default_factory = ModelConfig)
    train : TrainConfig = Field(default_factory = TrainConfig)
    data : DataConfig = Field(default_factory = DataConfig)
    eval : EvalConfig = Field(default_factory = EvalConfig)
    ablation : AblationConfig = Field(default_factory = AblationConfig)

    @field_validator("log", mode = "before")
    @classmethod
    def _lower_level(cls, value : Any) -> Any:
        return value.strip().lower() if isinstance(value, str) else value

    @model_validator(mode = "before")
    @classmethod
    def _route_loss(cls, values : Any) -> Any:
        if isinstance(values, dict) and "loss" in values:
            values = dict(values)
            loss = values.pop("loss")
            model = dict(values.get("model") or {})
            model["loss"] = {**dict(model.get("loss") or {}), **dict(loss)}
            values["model"] = model
        return values

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls : Type[BaseSettings],
        init_settings : PydanticBaseSettingsSource,
        env_settings : PydanticBaseSettingsSource,
        dotenv_settings : PydanticBaseSettingsSource,
        file_secret_settings : PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings, env_settings, TomlConfigSettingsSource(settings_cls))


def load_config(path : Optional[Path] = None, **overrides : Any) -> AppConfig:
    """Builds the configuration from an optional TOML file plus overrides.

    Raises:
        FileNotFoundError: If ``path`` is given but does not exist.
        pydantic.ValidationError: If a value is invalid.
    """
    if path is None:
        return AppConfig(**overrides)
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")

    class FileConfig(AppConfig):
        model_config = SettingsConfigDict(toml_file = path)

    return FileConfig(**overrides)


class Command:
    """Base class of a verb.

    Attributes:
        name (str): Verb on the command line; also the output directory name.
        help (str): One-line description for the usage text.
    """
    name : str = ""
    help : str = ""

    def __init__(self, app : "EyemarkApp"):
        self._app = app

    def add_arguments(self, parser : argparse.ArgumentParser):
        """Adds verb-specific flags."""

    def config_overrides(self, args : argparse.Namespace) -> Dict[str, Any]:
        """Configuration values set by verb-specific flags."""
        return {}

    def run(self, args : argparse.Namespace, config : AppConfig, registry : FileModelRegistry):
        raise NotImplementedError

    @staticmethod
    def artifact(config : AppConfig, verb : str, *parts : str) -> Path:
        """Committed output path of another verb, the default input of this one."""
        return config.out_dir.joinpath(verb, *parts)


class EyemarkApp:
    """The main application class for the eyemark command line

    Verbs live in ``commands/<verb>`` packages that register themselves through a
    ``setup(app)`` function, and every run writes through a
    :class:`FileModelRegistry` staged under ``out_dir``.

    Attributes:
        _commands (Dict[str, Command]): Registered verbs.
    """

    extensions = [
        "commands.preprocess",
        "commands.augment",
        "commands.train",
        "commands.eval",
        "commands.infer",
        "commands.render",
    ]

    def __init__(self):
        self._commands : Dict[str, Command] = {}

    @property
    def commands(self) -> Dict[str, Command]:
        return dict(self._commands)

    def add_command(self, command : Command):
        if command.name in self._commands:
            raise ValueError(f"verb '{command.name}' registered twice")
        self._commands[command.name] = command

    def load_commands(self):
        """Imports every verb package and calls its ``setup(app)``."""
        for ext in self.extensions:
            try:
                module = importlib.import_module(ext)
                module.setup(self)
                logger.debug("Loaded extension: %s", ext)
            except Exception:
                logger.exception("Failed to load extension: %s", ext)
                raise

    def build_parser(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help = False)
        common.add_argument("--config", type = Path, help = "TOML configuration file")
        common.add_argument("--out-dir", type = Path, help = "output root (default: out)")
        common.add_argument("--seed", type = int, help = "model seed")

        parser = argparse.ArgumentParser(prog = PROG, description = "Eye landmark localization pipeline")
        subparsers = parser.add_subparsers(dest = "verb", metavar = "VERB", required = True)
        for command in self._commands.values():
            sub = subparsers.add_parser(command.name, help = command.help, parents = [common])
            command.add_arguments(sub)
        return parser

    def load_config(self, args : argparse.Namespace) -> AppConfig:
        overrides : Dict[str, Any] = {}
        if args.out_dir is not None:
            overrides["out_dir"] = args.out_dir
        if args.seed is not None:
            overrides["model"] = {"seed": args.seed}
        for key, value in self._commands[args.verb].config_overrides(args).items():
            section, _, leaf = key.partition(".")
            if leaf:
                overrides.setdefault(section, {})[leaf] = value
            else:
                overrides[section] = value
        return load_config(args.config, **overrides)

    def run(self, args : argparse.Namespace, config : AppConfig) -> int:
        """Runs one verb with staged output.

        Returns:
            int: 0 on success, 1 on a reported error (staged output discarded),
            3 when training diverged (last good checkpoint kept).
        """
        command = self._commands[args.verb]
        logger.info(f"{command.name}: resolved configuration {config.model_dump_json()}")

        registry = FileModelRegistry(rootdir = config.out_dir, name = command.name)
        try:
            command.run(args, config, registry)
            registry.commit()
        except TrainingDivergedError as e:
            logger.error(str(e))
            registry.commit()
            print(f"{PROG}: error: {e}", file = sys.stderr)
            return 3
        except (EyemarkError, ValueError, OSError) as e:
            logger.error(f"{command.name} failed: {e}")
            registry.discard()
            print(f"{PROG}: error: {e}", file = sys.stderr)
            return 1
        except BaseException:
            registry.discard()
            raise
        return 0
