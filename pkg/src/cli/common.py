from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from src.core import config
from src.core.exceptions import ConfigError
from src.core.presets import PRESETS, preset_document
from src.models.experiment import ExperimentConfig
from src.models.manifest import RunManifest, config_digest
from src.storage.files import describe_validation_error, load_model, write_json


def add_output_options(parser: ArgumentParser) -> None:
    parser.add_argument('--out', type=Path, default=Path(config.OUTPUT_DIR), help='output directory')
    parser.add_argument('--seed', type=int, default=None, help='override the configuration seed')


def add_config_options(parser: ArgumentParser, required: bool = True) -> None:
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument('--config', type=Path, help='JSON run configuration')
    group.add_argument('--preset', choices=sorted(PRESETS), help='embedded configuration of a reference experiment')


def _apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    if not overrides:
        return cfg
    document = cfg.dict()
    document.update(overrides)
    try:
        return ExperimentConfig.parse_obj(document)
    except ValidationError as exc:
        raise ConfigError(describe_validation_error(exc)) from exc


def resolve_config(args: Namespace, preset: Optional[str] = None, **overrides) -> ExperimentConfig:
    if getattr(args, 'config', None) is not None:
        cfg = load_model(args.config, ExperimentConfig)
    else:
        name = preset or args.preset
        try:
            cfg = ExperimentConfig.parse_obj(preset_document(name))
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    if getattr(args, 'seed', None) is not None:
        overrides['seed'] = args.seed
    return _apply_overrides(cfg, {key: value for key, value in overrides.items() if value is not None})


def write_manifest(out_dir: Path, command: str, cfg: ExperimentConfig, outputs: List[Path]) -> Path:
    manifest_path = Path(out_dir) / 'manifest.json'
    manifest = RunManifest(
        command=command,
        config_digest=config_digest(cfg.dict()),
        seed=cfg.seed,
        tool_version=config.PROJECT_VERSION,
        outputs=[str(path) for path in outputs] + [str(manifest_path)],
    )
    return write_json(manifest_path, manifest.dict())
