from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, TextIO

from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException
from platformdirs import user_cache_dir
from pydantic import BaseModel, Extra, ValidationError, confloat

from quadlink import resource_text
from quadlink.errors import QuadlinkError
from quadlink.experiment import ExperimentConfig
from quadlink.ingest import STOOQ_ENDPOINT

CACHE_DIR = Path(user_cache_dir("quadlink"))


class ConfigError(QuadlinkError, ValueError):
    pass


class FetchSettings(BaseModel):
    endpoint: str = STOOQ_ENDPOINT
    timeout: confloat(gt=0) = 30.0
    cache_directory: Path = CACHE_DIR / "prices"

    class Config:
        extra = Extra.forbid


class Config(BaseModel):
    experiment: ExperimentConfig = ExperimentConfig()
    fetch: FetchSettings = FetchSettings()

    class Config:
        extra = Extra.forbid


def read_entries(f: TextIO) -> List[str]:
    """Reads a flat key=value file, skipping blank lines and comments."""
    entries = []
    for line in f:
        line = line.strip()
        if line and not line.startswith("#"):
            entries.append(line)
    return entries


def _qualify(entries: Iterable[str], section: str) -> List[str]:
    # bare keys in flat files belong to the experiment section
    qualified = []
    for entry in entries:
        key = entry.split("=", 1)[0].strip()
        if "." not in key and key not in Config.__fields__:
            entry = f"{section}.{entry.strip()}"
        qualified.append(entry)
    return qualified


def get_config(
    f: Optional[TextIO] = None,
    overrides: Optional[Iterable[str]] = None,
    flags: Optional[Dict[str, Any]] = None,
) -> Config:
    """Merges packaged defaults, a key=value file, entries and flags.

    Later sources win: defaults, then the file, then ``overrides`` entries,
    then ``flags`` (already-typed values keyed by dotted path).
    """
    try:
        config = OmegaConf.create(resource_text("config.yaml"))
        if f is not None:
            entries = _qualify(read_entries(f), "experiment")
            config = OmegaConf.merge(config, OmegaConf.from_dotlist(entries))
        if overrides is not None:
            entries = _qualify(overrides, "experiment")
            config = OmegaConf.merge(config, OmegaConf.from_dotlist(entries))
        if flags:
            for key, value in flags.items():
                OmegaConf.update(config, key, value, merge=False)
        container = OmegaConf.to_container(config, resolve=True)
    except OmegaConfBaseException as e:
        raise ConfigError(f"Can't merge configuration: {e}") from e

    try:
        return Config.parse_obj(container)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
