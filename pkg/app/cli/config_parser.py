"""
Flat-section key-value run configurations.

Keys before the first section header are top-level (only ``command``);
``[model]``, ``[chain]``, ``[output]`` and ``[caps]`` hold the rest. List
values are comma separated. Unknown sections and keys are errors.
"""

import configparser
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from pydantic import BaseModel, ValidationError

from app.core.exceptions import ConfigError
from app.models.run_config import CapsSection, ChainSection, ModelSection, OutputSection, RunConfig

logger = logging.getLogger(__name__)

TOP_LEVEL = "run"
SECTIONS: Dict[str, type] = {
    "model": ModelSection,
    "chain": ChainSection,
    "output": OutputSection,
    "caps": CapsSection,
}
LIST_KEYS = {"L_list", "epsilon_list", "peierls_constants", "formats"}


def _read_sections(text: str) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(f"[{TOP_LEVEL}]\n{text}")
    except configparser.Error as e:
        raise ConfigError("syntax", str(e).splitlines()[0])

    raw: Dict[str, Dict[str, str]] = {}
    for section in parser.sections():
        if section != TOP_LEVEL and section not in SECTIONS:
            raise ConfigError(section, "unknown section")
        raw[section] = dict(parser.items(section))
    for key in raw.get(TOP_LEVEL, {}):
        if key != "command":
            raise ConfigError(key, "unknown top-level key")
    return raw


def _section_of(key: str) -> str:
    """Section owning a bare override key"""
    owners = [name for name, section in SECTIONS.items() if key in section.model_fields]
    if len(owners) != 1:
        raise ConfigError(key, "unknown key" if not owners else f"ambiguous key, use one of {owners}")
    return owners[0]


def _apply_overrides(raw: Dict[str, Dict[str, str]], overrides: Mapping[str, str]) -> None:
    for key, value in overrides.items():
        if key == "command":
            raw.setdefault(TOP_LEVEL, {})["command"] = value
            continue
        section, _, name = key.rpartition(".")
        section = section or _section_of(name)
        if section not in SECTIONS:
            raise ConfigError(key, "unknown section")
        raw.setdefault(section, {})[name] = value


def _coerce(key: str, value: str) -> Any:
    if key in LIST_KEYS:
        return [item.strip() for item in value.split(",") if item.strip()]
    return value.strip()


def _config_error(error: ValidationError) -> ConfigError:
    first = error.errors()[0]
    loc = [str(part) for part in first["loc"]]
    message = first["msg"]
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]
    if len(loc) >= 2 and loc[0] in SECTIONS:
        key = loc[1]
    elif loc:
        key = loc[0]
    else:
        key, _, rest = message.partition(": ")
        return ConfigError(key, rest or message)
    # model-level validators name the key in their message
    if len(loc) == 1 and loc[0] in SECTIONS and ": " in message:
        key, _, message = message.partition(": ")
    return ConfigError(key, message)


def parse_config(text: str, overrides: Optional[Mapping[str, str]] = None,
                 command: Optional[str] = None) -> RunConfig:
    """Parse, apply ``--key value`` overrides and resolve defaults"""
    raw = _read_sections(text)
    _apply_overrides(raw, overrides or {})

    data: Dict[str, Any] = {}
    top = raw.get(TOP_LEVEL, {})
    if command is not None:
        data["command"] = command
    elif "command" in top:
        data["command"] = top["command"].strip()
    else:
        raise ConfigError("command", "is required")

    for section in SECTIONS:
        if section in raw:
            data[section] = {key: _coerce(key, value) for key, value in raw[section].items()}

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise _config_error(e) from e
    logger.debug(f"Parsed {config.command.value} configuration, resolved J={config.model.resolved_J!r}")
    return config


def load_config(path: str, overrides: Optional[Mapping[str, str]] = None,
                command: Optional[str] = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e.strerror}")
    return parse_config(text, overrides, command)


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(_format(item) for item in value)
    return str(value)


def emit_config(config: RunConfig) -> str:
    """Canonical text form; parse_config(emit_config(c)) == c"""
    lines = [
        f"# resolved J = {config.model.resolved_J!r}",
        f"command = {config.command.value}",
        "",
    ]
    for section in SECTIONS:
        block: BaseModel = getattr(config, section)
        lines.append(f"[{section}]")
        for key, value in block.model_dump(mode="json", exclude_none=True).items():
            lines.append(f"{key} = {_format(value)}")
        lines.append("")
    return "\n".join(lines)
